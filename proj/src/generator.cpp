#include "polymoment/generator.hpp"

#include <cmath>
#include <complex>
#include <sstream>
#include <stdexcept>

namespace polymoment {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

void check_projection_point(const ProjectionSpec& proj, int dims, const char* who) {
    if (proj.kind == ProjectionSpec::Kind::Taylor) {
        if (proj.x0.size() != dims || !proj.x0.allFinite()) {
            throw std::invalid_argument(std::string(who) +
                                        ": Taylor projection needs a finite expansion point per dimension");
        }
    }
}

// Coefficients (in monomial powers of x) of the exponential series around
// `center`, truncated at degree D: e^c * sum_{q<=D} (x-c)^q / q!. Reduces to
// 1/j! for center = 0.
Vector exp_series_coefficients(double center, int degree) {
    Vector E(degree + 1);
    if (center == 0.0) {
        double inv_fact = 1.0;
        for (int j = 0; j <= degree; ++j) {
            E[j] = inv_fact;
            inv_fact /= (j + 1.0);
        }
        return E;
    }
    const double ec = std::exp(center);
    double inv_fact = 1.0;
    for (int j = 0; j <= degree; ++j) {
        // e^c / j! * T_{D-j}(-c), the tail-corrected coefficient.
        double partial = 1.0, term = 1.0;
        for (int r = 1; r <= degree - j; ++r) {
            term *= -center / r;
            partial += term;
        }
        E[j] = ec * inv_fact * partial;
        inv_fact /= (j + 1.0);
    }
    return E;
}

Matrix build_bk_matrix(const BkModel& model, int k, double x0, double center, int degree) {
    const Vector E = exp_series_coefficients(center, degree);
    Matrix A = Matrix::Zero(k, k);
    for (int i = 0; i < k; ++i) {
        Vector poly = Vector::Zero(degree + 1);
        poly[i] -= model.theta * i;
        if (i >= 1) poly[i - 1] += model.theta * model.mu * i;
        if (i >= 2) poly[i - 2] += 0.5 * model.sigma * model.sigma * i * (i - 1.0);
        if (model.discounted) {
            for (int j = 0; j + i <= degree; ++j) poly[i + j] -= E[j];
        }
        A.col(i) = reduce_degree(poly, k, x0);
    }
    return A;
}

int resolve_bk_degree(const BkModel& model, int k, double x0, double center, int guard) {
    if (guard > 0) return k - 1 + guard;
    // Self-consistent depth: deepen until the entries stop moving.
    const int step = std::max(k, 8);
    int degree = 2 * k - 1;
    Matrix prev = build_bk_matrix(model, k, x0, center, degree);
    while (degree < 600) {
        const Matrix next = build_bk_matrix(model, k, x0, center, degree + step);
        const double scale = std::max(1.0, next.cwiseAbs().maxCoeff());
        const double change = (next - prev).cwiseAbs().maxCoeff();
        prev = next;
        degree += step;
        if (change <= 1e-12 * scale) break;
    }
    return degree;
}

template <typename T>
using MatT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using VecT = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
std::vector<T> taylor_overflow_coeffs(int power, T x0) {
    std::vector<double> binom(static_cast<size_t>(power));
    binom[0] = 1.0;
    for (int i = 1; i < power; ++i) {
        binom[static_cast<size_t>(i)] =
            binom[static_cast<size_t>(i - 1)] * static_cast<double>(power - i + 1) / i;
    }
    std::vector<T> coeffs(static_cast<size_t>(power));
    T q = -x0;
    for (int i = power - 1; i >= 0; --i) {
        coeffs[static_cast<size_t>(i)] = -binom[static_cast<size_t>(i)] * q;
        q *= -x0;
    }
    return coeffs;
}

}  // namespace

void validate_credit_model(const CreditModel& model) {
    const int n = model.factors();
    const int m = model.ratings;
    require(n >= 1, "credit model: at least one factor required");
    require(m >= 1, "credit model: at least one rating required");
    require(model.K.rows() == n && model.K.cols() == n, "credit model: K must be n x n");
    require(model.sigma.size() == n, "credit model: sigma must have one entry per factor");
    require(static_cast<int>(model.Q.size()) == n, "credit model: one Q matrix per factor required");
    require(model.K.allFinite() && model.mu.allFinite() && model.sigma.allFinite(),
            "credit model: non-finite parameter");
    for (int i = 0; i < n; ++i) {
        require(model.K(i, i) > 0.0, "credit model: K must have positive diagonal");
        require(model.sigma(i) >= 0.0, "credit model: sigma must be non-negative");
    }
    for (int i = 0; i < n; ++i) {
        const Matrix& Q = model.Q[static_cast<size_t>(i)];
        if (Q.rows() != m || Q.cols() != m) {
            std::ostringstream msg;
            msg << "credit model: Q[" << i << "] must be " << m << " x " << m;
            throw std::invalid_argument(msg.str());
        }
        for (int r = 0; r < m; ++r) {
            const double row_sum = Q.row(r).sum();
            if (std::abs(row_sum) > 1e-12) {
                std::ostringstream msg;
                msg << "credit model: Q[" << i << "] row " << r << " sums to " << row_sum
                    << ", not a generator matrix";
                throw std::invalid_argument(msg.str());
            }
            for (int c = 0; c < m; ++c) {
                if (r != c && Q(r, c) < -1e-12) {
                    std::ostringstream msg;
                    msg << "credit model: Q[" << i << "] has negative off-diagonal at (" << r << ","
                        << c << ")";
                    throw std::invalid_argument(msg.str());
                }
            }
        }
    }
}

template <typename T>
MatT<T> assemble_credit_generator(const BasisLayout& layout, const MatT<T>& K, const VecT<T>& mu,
                                  const VecT<T>& sigma, const std::vector<Matrix>& Q) {
    const int n = layout.state_dim();
    const int m = layout.rating_count();
    const int ell = layout.max_order();
    const int mono_count = layout.monomial_count();
    const int dim = layout.dimension();

    const VecT<T> kmu = K * mu;
    VecT<T> half_sig2(n);
    for (int i = 0; i < n; ++i) half_sig2(i) = 0.5 * sigma(i) * sigma(i);

    MatT<T> A = MatT<T>::Zero(dim, dim);
    for (int a = 0; a < mono_count; ++a) {
        const int col0 = a * m;
        const MultiIndex& alpha = layout.entry(col0).mono;

        // Factor generator: degree-preserving or degree-lowering, block
        // diagonal in the rating index.
        for (int i = 0; i < n; ++i) {
            const int ai = alpha.exponents[static_cast<size_t>(i)];
            if (ai < 1) continue;

            MultiIndex beta = alpha;
            beta.exponents[static_cast<size_t>(i)] -= 1;
            const int down0 = layout.index_of(beta, 0);
            const T w = static_cast<double>(ai) * kmu(i) +
                        half_sig2(i) * static_cast<double>(ai) * static_cast<double>(ai - 1);
            for (int r = 0; r < m; ++r) A(down0 + r, col0 + r) += w;

            for (int j = 0; j < n; ++j) {
                MultiIndex gamma = beta;
                gamma.exponents[static_cast<size_t>(j)] += 1;
                const int same0 = layout.index_of(gamma, 0);
                const T w2 = -static_cast<double>(ai) * K(i, j);
                for (int r = 0; r < m; ++r) A(same0 + r, col0 + r) += w2;
            }
        }

        // Rating-jump part: multiplies by y_i and mixes ratings through Q_i.
        for (int i = 0; i < n; ++i) {
            MultiIndex beta = alpha;
            beta.exponents[static_cast<size_t>(i)] += 1;
            const Matrix& Qi = Q[static_cast<size_t>(i)];
            if (beta.degree() <= ell - 1) {
                const int up0 = layout.index_of(beta, 0);
                for (int r = 0; r < m; ++r) {
                    for (int s = 0; s < m; ++s) A(up0 + s, col0 + r) += Qi(s, r);
                }
            } else {
                // Overflow monomial of total degree ell: reduce its largest
                // coordinate power (ties broken by lowest index) with the
                // Taylor truncation at the factor mean.
                int c = 0;
                for (int d = 1; d < n; ++d) {
                    if (beta.exponents[static_cast<size_t>(d)] > beta.exponents[static_cast<size_t>(c)]) c = d;
                }
                const int pc = beta.exponents[static_cast<size_t>(c)];
                const std::vector<T> tc = taylor_overflow_coeffs<T>(pc, mu(c));
                for (int q = 0; q < pc; ++q) {
                    MultiIndex gamma = beta;
                    gamma.exponents[static_cast<size_t>(c)] = q;
                    const int g0 = layout.index_of(gamma, 0);
                    for (int r = 0; r < m; ++r) {
                        for (int s = 0; s < m; ++s) A(g0 + s, col0 + r) += tc[static_cast<size_t>(q)] * Qi(s, r);
                    }
                }
            }
        }
    }
    return A;
}

}  // namespace

MatrixGenerator build_cir(const CirModel& model, int k, const ProjectionSpec& proj) {
    require(k >= 2, "build_cir: order k must be >= 2");
    require(model.theta >= 0.0 && model.sigma >= 0.0 && model.mu >= 0.0,
            "build_cir: theta, mu, sigma must be non-negative");
    require(std::isfinite(model.theta) && std::isfinite(model.mu) && std::isfinite(model.sigma),
            "build_cir: non-finite parameter");
    check_projection_point(proj, 1, "build_cir");

    Matrix A = Matrix::Zero(k, k);
    for (int i = 0; i < k; ++i) {
        if (i >= 1) A(i - 1, i) = model.theta * model.mu * i + 0.5 * model.sigma * model.sigma * i * (i - 1.0);
        A(i, i) = -model.theta * i;
        if (model.discounted) {
            if (i + 1 < k) {
                A(i + 1, i) -= 1.0;
            } else if (proj.kind == ProjectionSpec::Kind::Taylor) {
                A.col(i) -= taylor_overflow(k, proj.x0(0)).coeffs;
            }
            // Finite section: the overflow power -x^k is dropped.
        }
    }

    MatrixGenerator gen;
    gen.A = std::move(A);
    gen.layout = BasisLayout::enumerate(1, k, 1);
    gen.model = model;
    gen.projection = proj;
    return gen;
}

MatrixGenerator build_bk(const BkModel& model, int k, const ProjectionSpec& proj, int guard,
                         double series_center) {
    require(k >= 2, "build_bk: order k must be >= 2");
    require(model.theta >= 0.0 && model.sigma >= 0.0, "build_bk: theta and sigma must be non-negative");
    require(std::isfinite(model.theta) && std::isfinite(model.mu) && std::isfinite(model.sigma),
            "build_bk: non-finite parameter");
    if (proj.kind != ProjectionSpec::Kind::Taylor) {
        throw std::invalid_argument(
            "build_bk: finite section projection rejected; the truncated exponential series "
            "diverges over the state range without re-centering, use a Taylor projection");
    }
    check_projection_point(proj, 1, "build_bk");
    require(guard >= 0, "build_bk: guard must be >= 0 (0 selects adaptively)");

    const double x0 = proj.x0(0);
    const int degree = resolve_bk_degree(model, k, x0, series_center, guard);

    MatrixGenerator gen;
    gen.A = build_bk_matrix(model, k, x0, series_center, degree);
    gen.layout = BasisLayout::enumerate(1, k, 1);
    gen.model = model;
    gen.projection = proj;
    return gen;
}

Matrix build_ay_univariate(double K, double mu, double sigma, int k) {
    require(k >= 2, "build_ay_univariate: order k must be >= 2");
    const double kmu = K * mu;
    const double half_sig2 = 0.5 * sigma * sigma;
    Matrix A = Matrix::Zero(k, k);
    for (int i = 1; i < k; ++i) {
        A(i - 1, i) = i * kmu + half_sig2 * i * (i - 1.0);
        A(i, i) = -static_cast<double>(i) * K;
    }
    return A;
}

MatrixGenerator build_credit(const CreditModel& model, int ell, const ProjectionSpec& proj) {
    validate_credit_model(model);
    require(ell >= 2, "build_credit: order ell must be >= 2");
    if (proj.kind != ProjectionSpec::Kind::Taylor) {
        throw std::invalid_argument("build_credit: Taylor projection at the factor means required");
    }
    if (proj.x0.size() != 0) {
        if (proj.x0.size() != model.factors() || proj.x0 != model.mu) {
            throw std::invalid_argument("build_credit: Taylor point must equal the factor means");
        }
    }

    const int n = model.factors();
    MatrixGenerator gen;
    gen.layout = BasisLayout::enumerate(n, ell, model.ratings);
    gen.A = assemble_credit_generator<double>(gen.layout, model.K, model.mu, model.sigma, model.Q);
    gen.model = model;
    gen.projection = ProjectionSpec::taylor(model.mu);
    return gen;
}

namespace {

Matrix perturb_cir(const CirModel& model, const std::string& which, int k,
                   const ProjectionSpec& proj) {
    Matrix D = Matrix::Zero(k, k);
    const bool taylor = proj.kind == ProjectionSpec::Kind::Taylor;
    const bool tied = taylor && proj.x0.size() >= 1 && proj.x0(0) == model.mu;
    if (which == "theta") {
        for (int i = 1; i < k; ++i) {
            D(i - 1, i) = model.mu * i;
            D(i, i) = -static_cast<double>(i);
        }
    } else if (which == "mu") {
        for (int i = 1; i < k; ++i) D(i - 1, i) = model.theta * i;
        if (model.discounted && taylor && tied) {
            D.col(k - 1) -= taylor_overflow_dx0(k, proj.x0(0));
        }
    } else if (which == "sigma") {
        for (int i = 2; i < k; ++i) D(i - 1, i) = model.sigma * i * (i - 1.0);
    } else {
        throw std::invalid_argument("perturb_generator: unknown parameter '" + which + "' for cir");
    }
    return D;
}

Matrix perturb_bk(const BkModel& model, const std::string& which, int k,
                  const ProjectionSpec& proj) {
    double BkModel::* field = nullptr;
    if (which == "theta") field = &BkModel::theta;
    else if (which == "mu") field = &BkModel::mu;
    else if (which == "sigma") field = &BkModel::sigma;
    else throw std::invalid_argument("perturb_generator: unknown parameter '" + which + "' for bk");

    if (proj.kind != ProjectionSpec::Kind::Taylor || proj.x0.size() < 1) {
        throw std::invalid_argument("perturb_generator: bk requires a Taylor projection");
    }
    const double base = model.*field;
    const double h = std::max(1e-6, 1e-6 * std::abs(base));
    const bool tied = which == "mu" && proj.x0(0) == model.mu;

    // Freeze the series depth across the two evaluations.
    const int degree = resolve_bk_degree(model, k, proj.x0(0), 0.0, 0);
    const int guard = degree - (k - 1);

    BkModel up = model;
    up.*field = base + h;
    BkModel dn = model;
    dn.*field = base - h;
    const ProjectionSpec pu = tied ? ProjectionSpec::taylor(base + h) : proj;
    const ProjectionSpec pd = tied ? ProjectionSpec::taylor(base - h) : proj;
    const Matrix Au = build_bk(up, k, pu, guard).A;
    const Matrix Ad = build_bk(dn, k, pd, guard).A;
    return (Au - Ad) / (2.0 * h);
}

struct CreditParamRef {
    enum class Field { K, Mu, Sigma } field;
    int row = 0;
    int col = 0;
};

CreditParamRef parse_credit_param(const std::string& which, int n) {
    auto parse_indices = [&](const std::string& s, size_t pos, int count) {
        std::vector<int> idx;
        while (pos < s.size()) {
            if (s[pos] != '[') throw std::invalid_argument("perturb_generator: malformed parameter '" + s + "'");
            size_t end = s.find(']', pos);
            if (end == std::string::npos) {
                throw std::invalid_argument("perturb_generator: malformed parameter '" + s + "'");
            }
            idx.push_back(std::stoi(s.substr(pos + 1, end - pos - 1)));
            pos = end + 1;
        }
        if (static_cast<int>(idx.size()) != count) {
            throw std::invalid_argument("perturb_generator: wrong index count in '" + s + "'");
        }
        for (int v : idx) {
            if (v < 0 || v >= n) throw std::invalid_argument("perturb_generator: index out of range in '" + s + "'");
        }
        return idx;
    };

    if (which == "K" || which.rfind("K[", 0) == 0) {
        if (which == "K") {
            if (n != 1) throw std::invalid_argument("perturb_generator: 'K' without indices needs n = 1");
            return {CreditParamRef::Field::K, 0, 0};
        }
        auto idx = parse_indices(which, 1, 2);
        return {CreditParamRef::Field::K, idx[0], idx[1]};
    }
    if (which == "mu" || which.rfind("mu[", 0) == 0) {
        if (which == "mu") {
            if (n != 1) throw std::invalid_argument("perturb_generator: 'mu' without index needs n = 1");
            return {CreditParamRef::Field::Mu, 0, 0};
        }
        auto idx = parse_indices(which, 2, 1);
        return {CreditParamRef::Field::Mu, idx[0], 0};
    }
    if (which == "sigma" || which.rfind("sigma[", 0) == 0) {
        if (which == "sigma") {
            if (n != 1) throw std::invalid_argument("perturb_generator: 'sigma' without index needs n = 1");
            return {CreditParamRef::Field::Sigma, 0, 0};
        }
        auto idx = parse_indices(which, 5, 1);
        return {CreditParamRef::Field::Sigma, idx[0], 0};
    }
    throw std::invalid_argument("perturb_generator: unknown parameter '" + which + "' for credit");
}

Matrix perturb_credit(const CreditModel& model, const std::string& which, int ell) {
    validate_credit_model(model);
    require(ell >= 2, "perturb_generator: order ell must be >= 2");
    const int n = model.factors();
    const CreditParamRef ref = parse_credit_param(which, n);

    using C = std::complex<double>;
    const double h = 1e-100;
    MatT<C> K = model.K.cast<C>();
    VecT<C> mu = model.mu.cast<C>();
    VecT<C> sigma = model.sigma.cast<C>();
    switch (ref.field) {
        case CreditParamRef::Field::K: K(ref.row, ref.col) += C(0.0, h); break;
        case CreditParamRef::Field::Mu: mu(ref.row) += C(0.0, h); break;
        case CreditParamRef::Field::Sigma: sigma(ref.row) += C(0.0, h); break;
    }

    const BasisLayout layout = BasisLayout::enumerate(n, ell, model.ratings);
    const MatT<C> Ac = assemble_credit_generator<C>(layout, K, mu, sigma, model.Q);
    return Ac.imag() / h;
}

}  // namespace

Matrix perturb_generator(const ModelSpec& model, const std::string& which, int order,
                         const ProjectionSpec& proj) {
    if (const auto* cir = std::get_if<CirModel>(&model)) {
        require(order >= 2, "perturb_generator: order must be >= 2");
        return perturb_cir(*cir, which, order, proj);
    }
    if (const auto* bk = std::get_if<BkModel>(&model)) {
        require(order >= 2, "perturb_generator: order must be >= 2");
        return perturb_bk(*bk, which, order, proj);
    }
    return perturb_credit(std::get<CreditModel>(model), which, order);
}

}  // namespace polymoment
