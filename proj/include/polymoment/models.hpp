#ifndef POLYMOMENT_MODELS_HPP
#define POLYMOMENT_MODELS_HPP

#include <Eigen/Dense>

namespace polymoment {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Closed-form zero-coupon bond price under the square-root short-rate model
/// dX = theta (mu - X) dt + sigma sqrt(X) dW, r(X) = X:
///
///   P(x, tau) = exp(lnA(tau) - B(tau) x)
///
/// with the standard affine exponents
///   gamma = sqrt(theta^2 + 2 sigma^2),
///   B     = 2 (e^{gamma tau} - 1) / ((gamma + theta)(e^{gamma tau} - 1) + 2 gamma),
///   lnA   = (2 theta mu / sigma^2)
///           * ((gamma + theta) tau / 2 - log(1 + (gamma + theta)(e^{gamma tau} - 1)/(2 gamma))).
///
/// The sigma = 0 limit degenerates to the deterministic mean-reverting rate.
double cir_bond_price(double theta, double mu, double sigma, double x, double tau);

/// Steady-state mean and standard deviation of the short rate e^X when X is
/// an Ornstein-Uhlenbeck process with parameters (theta, mu, sigma).
struct BkMoments {
    double mean = 0.0;
    double sd = 0.0;
};

BkMoments bk_moment_map(double theta, double mu, double sigma);

/// Inverse of bk_moment_map at fixed theta:
///   sigma^2 = 2 theta log(1 + sd^2/mean^2), mu = log(mean) - sigma^2/(4 theta).
struct BkParams {
    double mu = 0.0;
    double sigma = 0.0;
};

BkParams bk_moment_map_inverse(double mean, double sd, double theta);

/// Rating transition probability matrix over horizon t, evaluated at factor
/// state y. Rows sum to one within `row_tol`.
struct MigrationMatrix {
    Matrix P;
    double t = 0.0;
    Vector y;

    /// Validates row sums and entry bounds; throws std::runtime_error on
    /// violation beyond the tolerance.
    void validate(double row_tol) const;
};

/// Parameters of a square-root factor process driving migration intensities.
struct CirFactor {
    double theta = 0.0;
    double mu = 0.0;
    double sigma = 0.0;
};

/// Analytic migration matrix for a single factor: diagonalize Q1 = B D B^{-1}
/// and price each eigenvalue channel as E_y[ e^{int D_ii Y_s ds} ], which is 1
/// for D_ii = 0 and otherwise a bond price of the rescaled square-root process
/// -D_ii Y. Requires a real, well-conditioned eigendecomposition (condition
/// of B below 1e12) and non-positive eigenvalues.
MigrationMatrix credit_analytic_1d(const Matrix& Q1, const CirFactor& factor, double y, double t);

/// Two commuting factors: the migration matrix factorizes into the product of
/// the two single-factor solutions. Inputs with ||Q1 Q2 - Q2 Q1||_F > 1e-10
/// are rejected with the measured commutator norm.
MigrationMatrix credit_analytic_2d_commuting(const Matrix& Q1, const Matrix& Q2,
                                             const CirFactor& f1, const CirFactor& f2,
                                             const Vector& y, double t);

/// ||Q1 Q2 - Q2 Q1||_F / (sqrt(2) ||Q1||_F ||Q2||_F), in [0, 1].
double noncommutativity(const Matrix& Q1, const Matrix& Q2);

}  // namespace polymoment

#endif
