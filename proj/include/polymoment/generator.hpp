#ifndef POLYMOMENT_GENERATOR_HPP
#define POLYMOMENT_GENERATOR_HPP

#include "polymoment/basis.hpp"

#include <string>
#include <variant>
#include <vector>

namespace polymoment {

/// Square-root short-rate model dX = theta (mu - X) dt + sigma sqrt(X) dW,
/// discounted at r(X) = X when `discounted` is set.
struct CirModel {
    double theta = 0.0;
    double mu = 0.0;
    double sigma = 0.0;
    bool discounted = true;
};

/// Log-rate model dX = theta (mu - X) dt + sigma dW with short rate e^X.
struct BkModel {
    double theta = 0.0;
    double mu = 0.0;
    double sigma = 0.0;
    bool discounted = true;
};

/// Rating migration model: n square-root factors Y with mean-reversion matrix
/// K, means mu and volatilities sigma, driving the m x m rating intensity
/// Q(y) = sum_i y_i Q_i.
struct CreditModel {
    Matrix K;
    Vector mu;
    Vector sigma;
    std::vector<Matrix> Q;
    int ratings = 0;

    int factors() const { return static_cast<int>(mu.size()); }
};

using ModelSpec = std::variant<CirModel, BkModel, CreditModel>;

struct ProjectionSpec {
    enum class Kind { FiniteSection, Taylor };

    Kind kind = Kind::Taylor;
    Vector x0;  ///< expansion point per dimension; required for Taylor

    static ProjectionSpec finite_section() { return ProjectionSpec{Kind::FiniteSection, {}}; }
    static ProjectionSpec taylor(double x0_scalar) {
        return ProjectionSpec{Kind::Taylor, Vector::Constant(1, x0_scalar)};
    }
    static ProjectionSpec taylor(Vector x0_vec) {
        return ProjectionSpec{Kind::Taylor, std::move(x0_vec)};
    }
};

/// Truncated matrix generator: column i holds the projected coefficients of
/// the process generator applied to basis element i.
struct MatrixGenerator {
    Matrix A;
    BasisLayout layout;
    ModelSpec model;
    ProjectionSpec projection;
};

/// k x k generator for the discounted square-root model on monomials 1..x^{k-1}.
/// The single overflow power -x^k from the killing term in the last column is
/// projected: Taylor folds -taylor_overflow(k, x0) into the column, finite
/// section drops it. Requires k >= 2.
MatrixGenerator build_cir(const CirModel& model, int k, const ProjectionSpec& proj);

/// k x k generator for the log-rate model. The killing rate e^x is expanded
/// as a power series around `series_center` (0 by default), each column's
/// product with x^i truncated at total degree D = k - 1 + guard and reduced to
/// the basis with a Taylor projection at proj.x0. guard = 0 selects the guard
/// depth adaptively: D grows until the largest entry change drops below 1e-12
/// relative. Finite section is rejected: without re-centering, the truncated
/// series diverges over the relevant state range.
MatrixGenerator build_bk(const BkModel& model, int k, const ProjectionSpec& proj,
                         int guard = 0, double series_center = 0.0);

/// Upper-triangular k x k generator of an undiscounted univariate square-root
/// factor on monomials (no killing row).
Matrix build_ay_univariate(double K, double mu, double sigma, int k);

/// Checks dimensions, K diagonal positivity and the generator-matrix property
/// of every Q_i (zero row sums within 1e-12, non-negative off-diagonals).
/// Throws std::invalid_argument naming the offending matrix row.
void validate_credit_model(const CreditModel& model);

/// Generator of the joint factor/rating process on the basis b(y) (x) z with
/// monomial degrees 0..ell-1: A = A_factor (x) I_m + A_rating, where the
/// rating part shifts monomial degree up by one and overflow monomials of
/// total degree ell are reduced by a per-coordinate Taylor projection at mu.
/// Requires valid generator matrices Q_i (zero row sums within 1e-12,
/// non-negative off-diagonals) and a Taylor projection at the factor means.
MatrixGenerator build_credit(const CreditModel& model, int ell, const ProjectionSpec& proj);

/// Entrywise derivative of the generator with respect to one scalar model
/// parameter. Parameter ids: "theta" | "mu" | "sigma" for the rate models
/// (square-root model analytic, log-rate model by central differences with
/// step max(1e-6, 1e-6 |p|)); "K" | "mu" | "sigma" (n = 1) or "K[i][j]" |
/// "mu[i]" | "sigma[i]" for the credit model, computed exactly via a
/// complex-step evaluation of the polynomial assembly. When the Taylor point
/// coincides with mu, it moves with mu in the derivative.
Matrix perturb_generator(const ModelSpec& model, const std::string& which, int order,
                         const ProjectionSpec& proj);

}  // namespace polymoment

#endif
