#include "polymoment/expmv.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace polymoment {

namespace {

constexpr int kMaxTaylorDegree = 55;
constexpr int kMaxNormPower = 8;
constexpr long kMaxSegments = 10'000'000;

double matrix_one_norm(const Matrix& M) {
    if (M.size() == 0) return 0.0;
    return M.cwiseAbs().colwise().sum().maxCoeff();
}

// phi(theta) = sum_{j>m} C(j-1, m)/j! * theta^j, the absolute-coefficient
// remainder of exp(-x) * T_m(x) - 1. The truncated segment satisfies
// T_m(X) = exp(X + E) with ||E|| <= -log(1 - phi(theta)) whenever the power
// norms of X are bounded by theta.
double remainder_series(int m, double theta) {
    const double log_first =
        (m + 1) * std::log(theta) - std::lgamma(static_cast<double>(m + 2));
    if (log_first < -745.0) return 0.0;
    double term = std::exp(log_first);
    double sum = term;
    for (int j = m + 1; j < m + 400; ++j) {
        // term_{j+1} / term_j = theta * j / ((j - m) * (j + 1))
        term *= theta * j / (static_cast<double>(j - m) * (j + 1));
        sum += term;
        if (term < sum * 1e-18) break;
    }
    return sum;
}

// Largest theta with -log(1 - phi(theta)) <= tol * theta.
double theta_for_degree(int m, double tol) {
    auto ok = [&](double theta) {
        const double phi = remainder_series(m, theta);
        if (phi >= 1.0) return false;
        return -std::log1p(-phi) <= tol * theta;
    };
    double lo = 1e-12, hi = 1e-12;
    while (hi < 100.0 && ok(hi)) hi *= 2.0;
    if (hi >= 100.0) return 100.0;
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        (ok(mid) ? lo : hi) = mid;
    }
    return lo;
}

struct ActionPlan {
    Matrix B;                 // trace-shifted matrix
    double shift = 0.0;       // removed diagonal shift
    std::vector<double> d;    // d[p] = ||B^p||_1^{1/p}, p = 1..kMaxNormPower+1
    std::vector<double> theta;  // theta[m], m = 1..kMaxTaylorDegree
};

ActionPlan make_plan(const Matrix& A, double horizon, double tol) {
    const Eigen::Index n = A.rows();
    ActionPlan plan;
    double mu = A.trace() / static_cast<double>(n);
    // Keep the scalar factors e^{t*mu} representable over the whole horizon.
    if (horizon > 0.0 && std::abs(mu) * horizon > 250.0) {
        mu = (mu < 0.0 ? -250.0 : 250.0) / horizon;
    }
    plan.shift = mu;
    plan.B = A - mu * Matrix::Identity(n, n);

    plan.d.assign(kMaxNormPower + 2, 0.0);
    plan.d[1] = matrix_one_norm(plan.B);
    if (plan.d[1] > 0.0) {
        Matrix P = plan.B;
        for (int p = 2; p <= kMaxNormPower + 1; ++p) {
            P = P * plan.B;
            const double np = matrix_one_norm(P);
            if (!std::isfinite(np)) {
                for (int r = p; r <= kMaxNormPower + 1; ++r) plan.d[r] = plan.d[p - 1];
                break;
            }
            plan.d[p] = np == 0.0 ? 0.0 : std::pow(np, 1.0 / p);
            if (np == 0.0) break;  // nilpotent from here on
        }
    }

    plan.theta.assign(kMaxTaylorDegree + 1, 0.0);
    for (int m = 1; m <= kMaxTaylorDegree; ++m) plan.theta[m] = theta_for_degree(m, tol);
    return plan;
}

struct StepChoice {
    int degree = 1;
    long segments = 1;
};

StepChoice select_step(const ActionPlan& plan, double dt) {
    StepChoice best;
    long best_cost = std::numeric_limits<long>::max();
    for (int p = 1; p <= kMaxNormPower; ++p) {
        const double alpha = std::max(plan.d[p], plan.d[p + 1]);
        const int m_min = std::max(p * (p - 1) - 1, 1);
        for (int m = m_min; m <= kMaxTaylorDegree; ++m) {
            const double need = dt * alpha / plan.theta[m];
            long s = 1;
            if (need > 1.0) {
                if (need > static_cast<double>(kMaxSegments)) continue;
                s = static_cast<long>(std::ceil(need));
            }
            const long cost = static_cast<long>(m) * s;
            if (cost < best_cost) {
                best_cost = cost;
                best = StepChoice{m, s};
            }
        }
    }
    if (best_cost == std::numeric_limits<long>::max()) {
        throw std::runtime_error(
            "expmv: required scaling exceeds practical bounds (matrix norm too large)");
    }
    return best;
}

void apply_interval(const ActionPlan& plan, double dt, double tol, Matrix& V, long& matvecs) {
    if (dt == 0.0 || V.size() == 0) return;
    if (plan.d[1] == 0.0) {
        V *= std::exp(dt * plan.shift);
        return;
    }
    const StepChoice choice = select_step(plan, dt);
    const double tau = dt / static_cast<double>(choice.segments);
    const double eta = std::exp(tau * plan.shift);
    Matrix W, S;
    for (long seg = 0; seg < choice.segments; ++seg) {
        W = V;
        S = V;
        double prev = std::numeric_limits<double>::infinity();
        for (int j = 1; j <= choice.degree; ++j) {
            W = (tau / j) * (plan.B * W);
            S += W;
            matvecs += static_cast<long>(W.cols());
            const double c = matrix_one_norm(W);
            if (c + prev <= tol * matrix_one_norm(S)) break;
            prev = c;
        }
        V = eta * S;
    }
}

void check_finite(const Matrix& M, const char* what) {
    if (!M.allFinite()) {
        throw std::invalid_argument(std::string("expmv: non-finite entries in ") + what);
    }
}

}  // namespace

TimeGrid::TimeGrid(std::vector<double> t) : times(std::move(t)) {
    if (times.empty()) throw std::invalid_argument("TimeGrid: grid must be non-empty");
    double prev = -std::numeric_limits<double>::infinity();
    for (double v : times) {
        if (!std::isfinite(v)) throw std::invalid_argument("TimeGrid: non-finite time");
        if (v < 0.0) throw std::invalid_argument("TimeGrid: times must be >= 0");
        if (v <= prev) throw std::invalid_argument("TimeGrid: times must be strictly increasing");
        prev = v;
    }
}

ExpmvResult expmv_grid(const Matrix& A, const Matrix& F, const TimeGrid& grid, double tol) {
    if (A.rows() != A.cols()) throw std::invalid_argument("expmv: matrix must be square");
    if (F.rows() != A.rows()) throw std::invalid_argument("expmv: dimension mismatch between A and F");
    if (!(tol >= 1e-15 && tol <= 1e-6)) {
        throw std::invalid_argument("expmv: tolerance out of range [1e-15, 1e-6]");
    }
    check_finite(A, "A");
    check_finite(F, "F");

    ExpmvResult result;
    result.tolerance = tol;
    const ActionPlan plan = make_plan(A, grid.times.back(), tol);

    Matrix V = F;
    double prev_t = 0.0;
    for (double t : grid.times) {
        apply_interval(plan, t - prev_t, tol, V, result.matvecs);
        prev_t = t;
        result.values.push_back(V);
    }
    return result;
}

Vector sensitivity(const Matrix& A, const Matrix& dA, const Vector& f, double t, int quad_steps) {
    if (A.rows() != A.cols() || dA.rows() != dA.cols() || A.rows() != dA.rows()) {
        throw std::invalid_argument("sensitivity: matrices must be square and same size");
    }
    if (f.size() != A.rows()) throw std::invalid_argument("sensitivity: vector dimension mismatch");
    if (t < 0.0) throw std::invalid_argument("sensitivity: t must be >= 0");
    if (quad_steps < 8) throw std::invalid_argument("sensitivity: quad_steps must be >= 8");
    check_finite(A, "A");
    check_finite(dA, "dA");

    const Eigen::Index n = f.size();
    if (t == 0.0) return Vector::Zero(n);

    const double tol = 1e-12;
    const ActionPlan plan = make_plan(A, t, tol);
    const double h = t / quad_steps;
    long matvecs = 0;

    std::vector<Vector> w(static_cast<size_t>(quad_steps) + 1);
    Matrix u = f;
    w[0] = dA * u;
    for (int j = 1; j <= quad_steps; ++j) {
        apply_interval(plan, h, tol, u, matvecs);
        w[static_cast<size_t>(j)] = dA * u;
    }

    Matrix acc = 0.5 * h * w[static_cast<size_t>(quad_steps)];
    for (int j = quad_steps - 1; j >= 0; --j) {
        apply_interval(plan, h, tol, acc, matvecs);
        acc += (j == 0 ? 0.5 * h : h) * w[static_cast<size_t>(j)];
    }
    return acc.col(0);
}

double resolvent_norm(const Matrix& A, double lambda) {
    if (A.rows() != A.cols()) throw std::invalid_argument("resolvent_norm: matrix must be square");
    check_finite(A, "A");
    const Eigen::Index n = A.rows();
    const Matrix M = lambda * Matrix::Identity(n, n) - A;
    double sigma_min;
    if (n <= 120) {
        Eigen::JacobiSVD<Matrix> svd(M);
        sigma_min = svd.singularValues()(n - 1);
    } else {
        Eigen::BDCSVD<Matrix> svd(M);
        sigma_min = svd.singularValues()(n - 1);
    }
    if (sigma_min < 1e-300) return std::numeric_limits<double>::infinity();
    return 1.0 / sigma_min;
}

Vector phragmen_series(const Matrix& A, const Vector& f, double t, double lambda, int max_terms) {
    if (A.rows() != A.cols()) throw std::invalid_argument("phragmen_series: matrix must be square");
    if (f.size() != A.rows()) throw std::invalid_argument("phragmen_series: dimension mismatch");
    if (!(t > 0.0)) throw std::invalid_argument("phragmen_series: t must be > 0");
    if (!(lambda > 0.0)) throw std::invalid_argument("phragmen_series: lambda must be > 0");
    if (max_terms < 1) throw std::invalid_argument("phragmen_series: max_terms must be >= 1");
    check_finite(A, "A");

    const Eigen::Index n = A.rows();
    Vector sum = Vector::Zero(n);
    for (int j = 1; j <= max_terms; ++j) {
        const double a = j * lambda * t;
        if (a > 700.0) {
            throw std::range_error(
                "phragmen_series: e^{n lambda t} overflows double before convergence "
                "(n lambda t > 700); reduce lambda * t");
        }
        const Matrix R = j * lambda * Matrix::Identity(n, n) - A;
        Eigen::FullPivLU<Matrix> lu(R);
        if (!lu.isInvertible()) {
            throw std::runtime_error("phragmen_series: singular resolvent at n = " + std::to_string(j));
        }
        const Vector x = lu.solve(f);
        const double magnitude = lambda * std::exp(a - std::lgamma(static_cast<double>(j)));
        const double sign = (j % 2 == 1) ? 1.0 : -1.0;
        sum += sign * magnitude * x;
        if (magnitude * x.norm() <= 1e-16 * sum.norm()) return sum;
    }
    return sum;
}

Matrix dense_expm(const Matrix& A) {
    if (A.rows() != A.cols()) throw std::invalid_argument("dense_expm: matrix must be square");
    check_finite(A, "A");
    const Eigen::Index n = A.rows();
    const double norm = matrix_one_norm(A);
    int s = 0;
    if (norm > 0.25) {
        s = static_cast<int>(std::ceil(std::log2(norm / 0.25)));
        s = std::clamp(s, 0, 64);
    }
    const Matrix As = A / std::ldexp(1.0, s);
    Matrix total = Matrix::Identity(n, n);
    Matrix term = Matrix::Identity(n, n);
    for (int j = 1; j <= 120; ++j) {
        term = (As * term) / j;
        total += term;
        if (matrix_one_norm(term) <= 1e-17 * matrix_one_norm(total)) break;
    }
    for (int i = 0; i < s; ++i) total = total * total;
    return total;
}

}  // namespace polymoment
