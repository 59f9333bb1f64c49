#ifndef POLYMOMENT_BASIS_HPP
#define POLYMOMENT_BASIS_HPP

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <utility>
#include <vector>

namespace polymoment {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Exponent vector of a multivariate monomial, one entry per state dimension.
struct MultiIndex {
    std::vector<int> exponents;

    int degree() const;
    bool operator==(const MultiIndex& other) const { return exponents == other.exponents; }
};

enum class BasisKind {
    UnivariateMonomial,   // n = 1, no ratings
    GradedMultivariate,   // n >= 2, no ratings
    MonomialKronRating,   // monomials tensored with rating indicators
};

/// One ordered basis element: a monomial paired with a rating index (0 when
/// the layout carries no ratings).
struct BasisEntry {
    MultiIndex mono;
    int rating = 0;
};

/// Ordered enumeration of basis functions.
///
/// The ordering is graded: all monomials of total degree d precede those of
/// degree d+1; within a degree, exponent vectors are sorted lexicographically
/// with the first coordinate most significant; within a monomial, rating
/// indices 0..m-1 are consecutive. This makes the rating-block structure of
/// operators on the basis a literal Kronecker product with I_m.
class BasisLayout {
public:
    /// Enumerates the basis for `state_dim` state variables, monomial degrees
    /// 0..max_order-1 and `rating_count` ratings. Throws std::invalid_argument
    /// if any argument is < 1.
    static BasisLayout enumerate(int state_dim, int max_order, int rating_count);

    BasisKind kind() const { return kind_; }
    int state_dim() const { return state_dim_; }
    int max_order() const { return max_order_; }
    int rating_count() const { return rating_count_; }

    int dimension() const { return static_cast<int>(entries_.size()); }
    int monomial_count() const { return dimension() / rating_count_; }

    const std::vector<BasisEntry>& entries() const { return entries_; }
    const BasisEntry& entry(int i) const { return entries_.at(static_cast<size_t>(i)); }

    /// Position of (monomial, rating) in the ordering, or -1 when absent.
    int index_of(const MultiIndex& mono, int rating = 0) const;

private:
    BasisKind kind_ = BasisKind::UnivariateMonomial;
    int state_dim_ = 1;
    int max_order_ = 1;
    int rating_count_ = 1;
    std::vector<BasisEntry> entries_;
    std::map<std::pair<std::vector<int>, int>, int> index_;
};

/// A function represented by its coefficients against an ordered basis.
struct CoefficientVector {
    Vector coeffs;
    BasisLayout layout;
};

/// Coefficients of the degree-(power-1) polynomial x^power - (x - x0)^power,
/// the Taylor truncation of x^power around x0. coeffs[i] multiplies x^i.
struct TaylorCoefficients {
    double x0 = 0.0;
    int power = 0;
    Vector coeffs;
};

/// Taylor truncation of the overflow power x^power around x0:
/// coeffs[i] = -C(power, i) * (-x0)^(power-i), i = 0..power-1.
/// Evaluating the returned polynomial at x = x0 yields x0^power exactly.
TaylorCoefficients taylor_overflow(int power, double x0);

/// d/dx0 of taylor_overflow(power, x0).coeffs.
Vector taylor_overflow_dx0(int power, double x0);

/// Reduces a dense univariate polynomial (coefficient of x^i at position i)
/// to degree < k by repeatedly replacing the current highest power x^j,
/// j >= k, with taylor_overflow(j, x0) -- one substitution per power, highest
/// first. The result preserves the polynomial's value at x = x0 exactly.
Vector reduce_degree(const Vector& poly, int k, double x0);

/// Evaluates sum_i coeffs[i] * b_i(point, rating). The univariate path uses
/// Horner's scheme. `rating` must be given iff the layout has ratings.
double evaluate(const BasisLayout& layout, const Vector& coeffs, const Vector& point,
                std::optional<int> rating = std::nullopt);

double evaluate(const CoefficientVector& f, const Vector& point,
                std::optional<int> rating = std::nullopt);

}  // namespace polymoment

#endif
