#ifndef POLYMOMENT_EXPMV_HPP
#define POLYMOMENT_EXPMV_HPP

#include <Eigen/Dense>

#include <vector>

namespace polymoment {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Strictly increasing evaluation times, t_0 >= 0.
struct TimeGrid {
    std::vector<double> times;

    explicit TimeGrid(std::vector<double> t);
};

/// Result of propagating coefficient columns over a time grid.
struct ExpmvResult {
    std::vector<Matrix> values;  ///< one k x p block per grid time
    double tolerance = 0.0;      ///< requested relative tolerance
    long matvecs = 0;            ///< matrix-vector products spent (metadata)
};

/// Computes e^{t_i A} F for every grid time t_i.
///
/// The action is evaluated by scaling plus a truncated Taylor expansion
/// applied to the columns of F; e^{tA} is never formed densely. Truncation
/// degree and scaling are selected from 1-norm estimates of the powers of the
/// (trace-shifted) matrix against a precomputed degree table, and the grid is
/// chained: the step from t_i to t_{i+1} starts from the previous result.
///
/// `tol` is the target relative accuracy and must lie in [1e-15, 1e-6].
/// Throws std::invalid_argument for non-finite input or a tolerance outside
/// that range.
ExpmvResult expmv_grid(const Matrix& A, const Matrix& F, const TimeGrid& grid, double tol);

/// Derivative of e^{tA} f with respect to a parameter entering A, given
/// dA = dA/dtheta: integrates e^{(t-s)A} dA e^{sA} f ds over [0, t] by the
/// composite trapezoid rule on quad_steps+1 equispaced nodes. Second-order
/// accurate in 1/quad_steps. Requires quad_steps >= 8 and t >= 0.
Vector sensitivity(const Matrix& A, const Matrix& dA, const Vector& f, double t, int quad_steps);

/// ||(lambda I - A)^{-1}||_2 computed as 1/sigma_min(lambda I - A).
/// Returns +infinity when sigma_min falls below 1e-300.
double resolvent_norm(const Matrix& A, double lambda);

/// N-term partial sum of the resolvent inversion series
///   lambda * sum_{n>=1} (-1)^(n-1) e^{n lambda t} / (n-1)! * (n lambda I - A)^{-1} f,
/// each resolvent solved by dense LU. Stops early once a term's norm falls
/// below 1e-16 of the running sum. Throws std::range_error when e^{n lambda t}
/// overflows working precision (n lambda t > 700) before convergence, and
/// std::runtime_error on a singular resolvent. Only useful for lambda*t
/// small enough that the alternating terms stay representable.
Vector phragmen_series(const Matrix& A, const Vector& f, double t, double lambda, int max_terms);

/// Dense matrix exponential by scaling and squaring with a Taylor kernel.
/// Intended for small matrices (rating-block transition steps, diagnostics).
Matrix dense_expm(const Matrix& A);

}  // namespace polymoment

#endif
