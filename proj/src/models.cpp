#include "polymoment/models.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace polymoment {

double cir_bond_price(double theta, double mu, double sigma, double x, double tau) {
    if (!(tau >= 0.0)) throw std::invalid_argument("cir_bond_price: tau must be >= 0");
    if (!(x >= 0.0)) throw std::invalid_argument("cir_bond_price: x must be >= 0");
    if (theta < 0.0 || sigma < 0.0 || mu < 0.0) {
        throw std::invalid_argument("cir_bond_price: parameters must be non-negative");
    }
    if (tau == 0.0) return 1.0;

    if (sigma == 0.0) {
        // Deterministic rate r(s) = mu + (x - mu) e^{-theta s}.
        const double B = theta == 0.0 ? tau : -std::expm1(-theta * tau) / theta;
        return std::exp(-mu * tau - (x - mu) * B);
    }

    const double gamma = std::sqrt(theta * theta + 2.0 * sigma * sigma);
    const double E = std::expm1(gamma * tau);
    const double u = (gamma + theta) * E / (2.0 * gamma);
    const double B = 2.0 * E / ((gamma + theta) * E + 2.0 * gamma);
    const double lnA = (2.0 * theta * mu / (sigma * sigma)) *
                       (0.5 * (gamma + theta) * tau - std::log1p(u));
    return std::exp(lnA - B * x);
}

BkMoments bk_moment_map(double theta, double mu, double sigma) {
    if (!(theta > 0.0)) throw std::invalid_argument("bk_moment_map: theta must be > 0");
    if (sigma < 0.0) throw std::invalid_argument("bk_moment_map: sigma must be >= 0");
    BkMoments m;
    const double v = sigma * sigma / (2.0 * theta);
    m.mean = std::exp(mu + 0.5 * v);
    m.sd = m.mean * std::sqrt(std::expm1(v));
    return m;
}

BkParams bk_moment_map_inverse(double mean, double sd, double theta) {
    if (!(mean > 0.0)) throw std::invalid_argument("bk_moment_map_inverse: mean must be > 0");
    if (!(sd > 0.0)) throw std::invalid_argument("bk_moment_map_inverse: sd must be > 0");
    if (!(theta > 0.0)) throw std::invalid_argument("bk_moment_map_inverse: theta must be > 0");
    BkParams p;
    const double s2 = 2.0 * theta * std::log1p(sd * sd / (mean * mean));
    p.sigma = std::sqrt(s2);
    p.mu = std::log(mean) - s2 / (4.0 * theta);
    return p;
}

void MigrationMatrix::validate(double row_tol) const {
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
        const double row_sum = P.row(i).sum();
        if (std::abs(row_sum - 1.0) > row_tol) {
            std::ostringstream msg;
            msg << "MigrationMatrix: row " << i << " sums to " << row_sum;
            throw std::runtime_error(msg.str());
        }
        for (Eigen::Index j = 0; j < P.cols(); ++j) {
            if (P(i, j) < -row_tol || P(i, j) > 1.0 + row_tol) {
                std::ostringstream msg;
                msg << "MigrationMatrix: entry (" << i << "," << j << ") = " << P(i, j)
                    << " outside [0, 1]";
                throw std::runtime_error(msg.str());
            }
        }
    }
}

namespace {

struct RealEigen {
    Matrix vectors;
    Vector values;
};

RealEigen real_eigendecomposition(const Matrix& Q) {
    const double scale = std::max(1.0, Q.cwiseAbs().maxCoeff());
    Eigen::EigenSolver<Matrix> es(Q);
    if (es.info() != Eigen::Success) {
        throw std::runtime_error("credit_analytic: eigendecomposition failed to converge");
    }
    const auto& vals = es.eigenvalues();
    for (Eigen::Index i = 0; i < vals.size(); ++i) {
        if (std::abs(vals(i).imag()) > 1e-9 * scale) {
            throw std::runtime_error("credit_analytic: complex eigenvalues, generator not handled");
        }
    }
    RealEigen out;
    out.values = vals.real();
    out.vectors = es.eigenvectors().real();

    Eigen::JacobiSVD<Matrix> svd(out.vectors);
    const double smin = svd.singularValues()(out.vectors.cols() - 1);
    const double smax = svd.singularValues()(0);
    if (smin <= 0.0 || smax / smin > 1e12) {
        throw std::runtime_error(
            "credit_analytic: eigenvector matrix condition exceeds 1e12 (near-defective Q)");
    }
    return out;
}

}  // namespace

MigrationMatrix credit_analytic_1d(const Matrix& Q1, const CirFactor& factor, double y, double t) {
    if (Q1.rows() != Q1.cols()) throw std::invalid_argument("credit_analytic_1d: Q1 must be square");
    if (!(t >= 0.0)) throw std::invalid_argument("credit_analytic_1d: t must be >= 0");
    if (!(y >= 0.0)) throw std::invalid_argument("credit_analytic_1d: y must be >= 0");

    const RealEigen eig = real_eigendecomposition(Q1);
    const double scale = std::max(1.0, Q1.cwiseAbs().maxCoeff());

    const Eigen::Index m = Q1.rows();
    Vector phi(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        double d = eig.values(i);
        if (d > 1e-10 * scale) {
            throw std::invalid_argument("credit_analytic_1d: positive eigenvalue of Q1 rejected");
        }
        if (d > 0.0) d = 0.0;
        if (d == 0.0) {
            phi(i) = 1.0;
        } else {
            // E_y[e^{int d Y_s ds}] with d < 0: the scaled process X = -d Y is
            // again square-root with theta unchanged, mean -d mu, volatility
            // sigma sqrt(-d), and initial state -d y.
            const double c = -d;
            phi(i) = cir_bond_price(factor.theta, c * factor.mu,
                                    factor.sigma * std::sqrt(c), c * y, t);
        }
    }

    MigrationMatrix out;
    out.t = t;
    out.y = Vector::Constant(1, y);
    out.P = eig.vectors * phi.asDiagonal() *
            eig.vectors.partialPivLu().solve(Matrix::Identity(m, m));
    out.validate(1e-8);
    return out;
}

MigrationMatrix credit_analytic_2d_commuting(const Matrix& Q1, const Matrix& Q2,
                                             const CirFactor& f1, const CirFactor& f2,
                                             const Vector& y, double t) {
    if (Q1.rows() != Q1.cols() || Q2.rows() != Q2.cols() || Q1.rows() != Q2.rows()) {
        throw std::invalid_argument("credit_analytic_2d: Q1, Q2 must be square and same size");
    }
    if (y.size() != 2) throw std::invalid_argument("credit_analytic_2d: y must have 2 entries");

    const double comm = (Q1 * Q2 - Q2 * Q1).norm();
    if (comm > 1e-10) {
        std::ostringstream msg;
        msg << "credit_analytic_2d: generators do not commute, ||[Q1,Q2]||_F = " << comm;
        throw std::invalid_argument(msg.str());
    }

    const MigrationMatrix p1 = credit_analytic_1d(Q1, f1, y(0), t);
    const MigrationMatrix p2 = credit_analytic_1d(Q2, f2, y(1), t);

    MigrationMatrix out;
    out.t = t;
    out.y = y;
    out.P = p1.P * p2.P;
    out.validate(1e-8);
    return out;
}

double noncommutativity(const Matrix& Q1, const Matrix& Q2) {
    if (Q1.rows() != Q1.cols() || Q2.rows() != Q2.cols() || Q1.rows() != Q2.rows()) {
        throw std::invalid_argument("noncommutativity: matrices must be square and same size");
    }
    const double n1 = Q1.norm();
    const double n2 = Q2.norm();
    if (n1 == 0.0 || n2 == 0.0) {
        throw std::invalid_argument("noncommutativity: zero matrix input");
    }
    return (Q1 * Q2 - Q2 * Q1).norm() / (std::sqrt(2.0) * n1 * n2);
}

}  // namespace polymoment
