#include "polymoment/basis.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace polymoment {

int MultiIndex::degree() const {
    return std::accumulate(exponents.begin(), exponents.end(), 0);
}

namespace {

// Appends, in lexicographic order with the first coordinate most significant,
// all exponent vectors of the given total degree.
void enumerate_degree(int dims, int degree, std::vector<int>& prefix,
                      std::vector<MultiIndex>& out) {
    if (dims == 1) {
        prefix.push_back(degree);
        out.push_back(MultiIndex{prefix});
        prefix.pop_back();
        return;
    }
    for (int e = degree; e >= 0; --e) {
        prefix.push_back(e);
        enumerate_degree(dims - 1, degree - e, prefix, out);
        prefix.pop_back();
    }
}

}  // namespace

BasisLayout BasisLayout::enumerate(int state_dim, int max_order, int rating_count) {
    if (state_dim < 1) throw std::invalid_argument("basis: state_dim must be >= 1");
    if (max_order < 1) throw std::invalid_argument("basis: max_order must be >= 1");
    if (rating_count < 1) throw std::invalid_argument("basis: rating_count must be >= 1");

    BasisLayout layout;
    layout.state_dim_ = state_dim;
    layout.max_order_ = max_order;
    layout.rating_count_ = rating_count;
    if (rating_count > 1) {
        layout.kind_ = BasisKind::MonomialKronRating;
    } else if (state_dim > 1) {
        layout.kind_ = BasisKind::GradedMultivariate;
    } else {
        layout.kind_ = BasisKind::UnivariateMonomial;
    }

    std::vector<MultiIndex> monomials;
    std::vector<int> prefix;
    for (int d = 0; d < max_order; ++d) {
        enumerate_degree(state_dim, d, prefix, monomials);
    }

    layout.entries_.reserve(monomials.size() * static_cast<size_t>(rating_count));
    for (const MultiIndex& mono : monomials) {
        for (int r = 0; r < rating_count; ++r) {
            int idx = static_cast<int>(layout.entries_.size());
            layout.entries_.push_back(BasisEntry{mono, r});
            layout.index_.emplace(std::make_pair(mono.exponents, r), idx);
        }
    }
    return layout;
}

int BasisLayout::index_of(const MultiIndex& mono, int rating) const {
    auto it = index_.find(std::make_pair(mono.exponents, rating));
    return it == index_.end() ? -1 : it->second;
}

TaylorCoefficients taylor_overflow(int power, double x0) {
    if (power < 1) throw std::invalid_argument("taylor_overflow: power must be >= 1");
    TaylorCoefficients tc;
    tc.x0 = x0;
    tc.power = power;
    tc.coeffs = Vector::Zero(power);

    // Binomials C(power, i) by the multiplicative recurrence.
    std::vector<double> binom(static_cast<size_t>(power));
    binom[0] = 1.0;
    for (int i = 1; i < power; ++i) {
        binom[static_cast<size_t>(i)] =
            binom[static_cast<size_t>(i - 1)] * static_cast<double>(power - i + 1) / i;
    }

    double q = -x0;  // (-x0)^(power - i), accumulated downward from i = power-1
    for (int i = power - 1; i >= 0; --i) {
        tc.coeffs[i] = -binom[static_cast<size_t>(i)] * q;
        q *= -x0;
    }
    return tc;
}

Vector taylor_overflow_dx0(int power, double x0) {
    if (power < 1) throw std::invalid_argument("taylor_overflow_dx0: power must be >= 1");
    Vector d = Vector::Zero(power);
    std::vector<double> binom(static_cast<size_t>(power));
    binom[0] = 1.0;
    for (int i = 1; i < power; ++i) {
        binom[static_cast<size_t>(i)] =
            binom[static_cast<size_t>(i - 1)] * static_cast<double>(power - i + 1) / i;
    }
    // d/dx0 [ -C(power,i) (-x0)^(power-i) ] = C(power,i) (power-i) (-x0)^(power-i-1)
    double q = 1.0;  // (-x0)^(power - i - 1) for i = power-1
    for (int i = power - 1; i >= 0; --i) {
        d[i] = binom[static_cast<size_t>(i)] * static_cast<double>(power - i) * q;
        q *= -x0;
    }
    return d;
}

Vector reduce_degree(const Vector& poly, int k, double x0) {
    if (k < 1) throw std::invalid_argument("reduce_degree: k must be >= 1");
    const int n = static_cast<int>(poly.size());
    Vector work = Vector::Zero(std::max(n, k));
    work.head(n) = poly;

    for (int j = static_cast<int>(work.size()) - 1; j >= k; --j) {
        const double c = work[j];
        if (c == 0.0) continue;
        work[j] = 0.0;
        const TaylorCoefficients tc = taylor_overflow(j, x0);
        work.head(j) += c * tc.coeffs;
    }
    return work.head(k);
}

double evaluate(const BasisLayout& layout, const Vector& coeffs, const Vector& point,
                std::optional<int> rating) {
    if (coeffs.size() != layout.dimension()) {
        throw std::invalid_argument("evaluate: coefficient length does not match layout dimension");
    }
    if (point.size() != layout.state_dim()) {
        throw std::invalid_argument("evaluate: point dimension does not match layout");
    }
    const int m = layout.rating_count();
    if (m > 1 && !rating.has_value()) {
        throw std::invalid_argument("evaluate: layout has ratings, rating index required");
    }
    if (m == 1 && rating.has_value() && *rating != 0) {
        throw std::invalid_argument("evaluate: layout has no ratings");
    }
    const int r = rating.value_or(0);
    if (r < 0 || r >= m) throw std::invalid_argument("evaluate: rating index out of range");

    if (layout.state_dim() == 1) {
        // Horner over the rating slice: entries (degree d, rating r) sit at d*m + r.
        const double x = point[0];
        const int ell = layout.max_order();
        double acc = 0.0;
        for (int d = ell - 1; d >= 0; --d) {
            acc = acc * x + coeffs[d * m + r];
        }
        return acc;
    }

    // Multivariate: per-dimension power tables, then term sums.
    const int n = layout.state_dim();
    const int ell = layout.max_order();
    std::vector<std::vector<double>> pow_tab(static_cast<size_t>(n));
    for (int d = 0; d < n; ++d) {
        auto& tab = pow_tab[static_cast<size_t>(d)];
        tab.resize(static_cast<size_t>(ell));
        tab[0] = 1.0;
        for (int e = 1; e < ell; ++e) tab[static_cast<size_t>(e)] = tab[static_cast<size_t>(e - 1)] * point[d];
    }
    double acc = 0.0;
    for (int i = 0; i < layout.dimension(); ++i) {
        const BasisEntry& b = layout.entry(i);
        if (b.rating != r) continue;
        const double c = coeffs[i];
        if (c == 0.0) continue;
        double term = c;
        for (int d = 0; d < n; ++d) {
            term *= pow_tab[static_cast<size_t>(d)][static_cast<size_t>(b.mono.exponents[static_cast<size_t>(d)])];
        }
        acc += term;
    }
    return acc;
}

double evaluate(const CoefficientVector& f, const Vector& point, std::optional<int> rating) {
    return evaluate(f.layout, f.coeffs, point, rating);
}

}  // namespace polymoment
