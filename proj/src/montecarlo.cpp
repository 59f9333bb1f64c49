#include "polymoment/montecarlo.hpp"

#include "polymoment/detail/rng.hpp"
#include "polymoment/expmv.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <thread>
#include <unordered_map>
#include <vector>

namespace polymoment {

namespace {

void validate_config(const SimConfig& cfg) {
    if (cfg.n_paths < 100) throw std::invalid_argument("SimConfig: n_paths must be >= 100");
    if (!(cfg.dt > 0.0 && cfg.dt <= 0.25)) {
        throw std::invalid_argument("SimConfig: dt must lie in (0, 0.25]");
    }
}

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

void run_blocks(long n, int threads, const std::function<void(long, long, int)>& body) {
    threads = std::max(1, std::min<long>(threads, n));
    if (threads == 1) {
        body(0, n, 0);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(threads));
    const long chunk = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        const long begin = t * chunk;
        const long end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back(body, begin, end, t);
    }
    for (auto& th : pool) th.join();
}

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

// Two-pass reduction in fixed sample order.
MeanSe reduce(const std::vector<double>& samples) {
    const double n = static_cast<double>(samples.size());
    double sum = 0.0;
    for (double v : samples) sum += v;
    const double mean = sum / n;
    double ss = 0.0;
    for (double v : samples) ss += (v - mean) * (v - mean);
    MeanSe out;
    out.mean = mean;
    out.se = samples.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
    return out;
}

// One exact transition of the square-root process over step h: the scaled
// non-central chi-square drawn as Poisson-mixed gamma.
struct CirStepper {
    double theta, mu, sigma;
    double decay, c, dof;

    CirStepper(const CirModel& m, double h) : theta(m.theta), mu(m.mu), sigma(m.sigma) {
        decay = std::exp(-theta * h);
        if (sigma == 0.0) {
            c = 0.0;
            dof = 0.0;
        } else if (theta == 0.0) {
            c = sigma * sigma * h / 4.0;
            dof = 0.0;
        } else {
            c = sigma * sigma * (1.0 - decay) / (4.0 * theta);
            dof = 4.0 * theta * mu / (sigma * sigma);
        }
    }

    double advance(double x, detail::PathRng& rng) const {
        if (sigma == 0.0) return mu + (x - mu) * decay;
        const double lambda = x * decay / c;
        double shape = 0.5 * dof;
        if (lambda > 0.0) {
            const double half = 0.5 * lambda;
            if (half > 1e12) {
                // Counts beyond integer resolution: Gaussian fluctuation of the
                // mixing variable, indistinguishable at any tested tolerance.
                shape += std::max(0.0, half + std::sqrt(half) * rng.normal());
            } else {
                shape += static_cast<double>(rng.poisson(half));
            }
        }
        if (shape == 0.0) return 0.0;
        return c * 2.0 * rng.gamma(shape);
    }
};

}  // namespace

McEstimate mc_cir_bond(const CirModel& model, double x0, double tau, const SimConfig& cfg,
                       int threads) {
    validate_config(cfg);
    if (!(x0 >= 0.0)) throw std::invalid_argument("mc_cir_bond: x0 must be >= 0");
    if (!(tau >= 0.0)) throw std::invalid_argument("mc_cir_bond: tau must be >= 0");

    McEstimate est;
    est.n_paths = cfg.n_paths;
    est.dt = cfg.dt;
    est.seed = cfg.seed;
    if (tau == 0.0) {
        est.value = 1.0;
        est.std_error = 0.0;
        return est;
    }

    const long steps = std::max<long>(1, static_cast<long>(std::ceil(tau / cfg.dt - 1e-12)));
    const double h = tau / static_cast<double>(steps);
    const CirStepper stepper(model, h);

    std::vector<double> samples(static_cast<size_t>(cfg.n_paths));
    run_blocks(cfg.n_paths, resolve_threads(threads), [&](long begin, long end, int) {
        for (long p = begin; p < end; ++p) {
            detail::PathRng rng(cfg.seed, static_cast<uint64_t>(p));
            double x = x0;
            double integral = 0.0;
            for (long s = 0; s < steps; ++s) {
                const double xn = stepper.advance(x, rng);
                integral += 0.5 * h * (x + xn);
                x = xn;
            }
            samples[static_cast<size_t>(p)] = std::exp(-integral);
        }
    });

    const MeanSe ms = reduce(samples);
    est.value = ms.mean;
    est.std_error = ms.se;
    return est;
}

McEstimate mc_bk_yield(const BkModel& model, double x0, double tau, const SimConfig& cfg,
                       int threads) {
    validate_config(cfg);
    if (!(tau > 0.0)) throw std::invalid_argument("mc_bk_yield: tau must be > 0");
    if (cfg.antithetic && cfg.n_paths % 2 != 0) {
        throw std::invalid_argument("mc_bk_yield: antithetic pairing needs an even n_paths");
    }

    const long steps = std::max<long>(1, static_cast<long>(std::ceil(tau / cfg.dt - 1e-12)));
    const double h = tau / static_cast<double>(steps);
    const double decay = std::exp(-model.theta * h);
    const double stddev =
        model.theta == 0.0
            ? model.sigma * std::sqrt(h)
            : model.sigma * std::sqrt((1.0 - decay * decay) / (2.0 * model.theta));

    const long n_samples = cfg.antithetic ? cfg.n_paths / 2 : cfg.n_paths;
    std::vector<double> samples(static_cast<size_t>(n_samples));

    auto run_path = [&](detail::PathRng& rng, double sign) {
        double x = x0;
        double rate = std::exp(x);
        double integral = 0.0;
        for (long s = 0; s < steps; ++s) {
            const double z = stddev == 0.0 ? 0.0 : sign * rng.normal();
            const double xn = model.mu + (x - model.mu) * decay + stddev * z;
            const double rate_n = std::exp(xn);
            integral += 0.5 * h * (rate + rate_n);
            x = xn;
            rate = rate_n;
        }
        return std::exp(-integral);
    };

    run_blocks(n_samples, resolve_threads(threads), [&](long begin, long end, int) {
        for (long p = begin; p < end; ++p) {
            if (cfg.antithetic) {
                detail::PathRng rng_a(cfg.seed, static_cast<uint64_t>(p));
                const double pa = run_path(rng_a, 1.0);
                detail::PathRng rng_b(cfg.seed, static_cast<uint64_t>(p));
                const double pb = run_path(rng_b, -1.0);
                samples[static_cast<size_t>(p)] = 0.5 * (pa + pb);
            } else {
                detail::PathRng rng(cfg.seed, static_cast<uint64_t>(p));
                samples[static_cast<size_t>(p)] = run_path(rng, 1.0);
            }
        }
    });

    const MeanSe ms = reduce(samples);
    McEstimate est;
    est.n_paths = cfg.n_paths;
    est.dt = cfg.dt;
    est.seed = cfg.seed;
    est.value = -std::log(ms.mean) / tau;
    est.std_error = ms.se / (ms.mean * tau);
    return est;
}

namespace {

struct LatticeKeyHash {
    size_t operator()(const std::vector<int64_t>& key) const {
        uint64_t h = 0x9E3779B97F4A7C15ULL;
        for (int64_t v : key) {
            h ^= static_cast<uint64_t>(v) + 0x9E3779B97F4A7C15ULL + (h << 6) + (h >> 2);
        }
        return static_cast<size_t>(h);
    }
};

}  // namespace

McMatrixEstimate mc_migration(const CreditModel& model, const Vector& y0, double t,
                              const SimConfig& cfg, int threads) {
    validate_config(cfg);
    validate_credit_model(model);
    const int n = model.factors();
    const int m = model.ratings;
    if (y0.size() != n) throw std::invalid_argument("mc_migration: y0 dimension mismatch");
    for (int i = 0; i < n; ++i) {
        if (!(y0(i) >= 0.0)) throw std::invalid_argument("mc_migration: y0 must be >= 0 componentwise");
    }
    if (!(t >= 0.0)) throw std::invalid_argument("mc_migration: t must be >= 0");

    const long steps = t == 0.0 ? 0 : std::max<long>(1, static_cast<long>(std::ceil(t / cfg.dt - 1e-12)));
    const double h = steps == 0 ? 0.0 : t / static_cast<double>(steps);
    const double sqrt_h = std::sqrt(h);
    constexpr double kLattice = 1e-4;

    const int nthreads = resolve_threads(threads);
    std::vector<Eigen::MatrixXi> counts(static_cast<size_t>(std::max(1, nthreads)),
                                        Eigen::MatrixXi::Zero(m, m));

    run_blocks(cfg.n_paths, nthreads, [&](long begin, long end, int tid) {
        std::unordered_map<std::vector<int64_t>, Matrix, LatticeKeyHash> cache;
        std::vector<int64_t> key(static_cast<size_t>(n));
        Vector y(n), ypos(n);
        std::vector<int> rating(static_cast<size_t>(m));
        Eigen::MatrixXi& local = counts[static_cast<size_t>(tid)];

        for (long p = begin; p < end; ++p) {
            detail::PathRng rng(cfg.seed, static_cast<uint64_t>(p));
            y = y0;
            for (int i = 0; i < m; ++i) rating[static_cast<size_t>(i)] = i;

            for (long s = 0; s < steps; ++s) {
                for (int i = 0; i < n; ++i) {
                    ypos(i) = std::max(y(i), 0.0);
                    key[static_cast<size_t>(i)] = llround(ypos(i) / kLattice);
                }
                auto it = cache.find(key);
                if (it == cache.end()) {
                    if (cache.size() > (1u << 20)) cache.clear();
                    Matrix Qh = Matrix::Zero(m, m);
                    for (int i = 0; i < n; ++i) {
                        Qh += (static_cast<double>(key[static_cast<size_t>(i)]) * kLattice * h) *
                              model.Q[static_cast<size_t>(i)];
                    }
                    it = cache.emplace(key, dense_expm(Qh)).first;
                }
                const Matrix& Pstep = it->second;

                for (int chain = 0; chain < m; ++chain) {
                    const double u = rng.uniform();
                    const int from = rating[static_cast<size_t>(chain)];
                    double acc = 0.0;
                    int to = m - 1;
                    for (int j = 0; j < m; ++j) {
                        acc += Pstep(from, j);
                        if (u < acc) {
                            to = j;
                            break;
                        }
                    }
                    rating[static_cast<size_t>(chain)] = to;
                }

                const Vector drift = model.K * (model.mu - ypos);
                for (int i = 0; i < n; ++i) {
                    const double z = rng.normal();
                    y(i) += drift(i) * h + model.sigma(i) * std::sqrt(ypos(i)) * sqrt_h * z;
                }
            }
            for (int i = 0; i < m; ++i) local(i, rating[static_cast<size_t>(i)]) += 1;
        }
    });

    Eigen::MatrixXi total = Eigen::MatrixXi::Zero(m, m);
    for (const auto& c : counts) total += c;

    McMatrixEstimate est;
    est.n_paths = cfg.n_paths;
    est.dt = cfg.dt;
    est.seed = cfg.seed;
    est.value = Matrix::Zero(m, m);
    est.std_error = Matrix::Zero(m, m);
    const double N = static_cast<double>(cfg.n_paths);
    for (int i = 0; i < m; ++i) {
        int argmax = 0;
        for (int j = 0; j < m; ++j) {
            est.value(i, j) = static_cast<double>(total(i, j)) / N;
            if (total(i, j) > total(i, argmax)) argmax = j;
        }
        // Pin the dominant entry so the row sums to one exactly.
        double others = 0.0;
        for (int j = 0; j < m; ++j) {
            if (j != argmax) others += est.value(i, j);
        }
        est.value(i, argmax) = 1.0 - others;
        for (int j = 0; j < m; ++j) {
            const double p_hat = est.value(i, j);
            est.std_error(i, j) = std::sqrt(std::max(0.0, p_hat * (1.0 - p_hat)) / N);
        }
    }
    return est;
}

}  // namespace polymoment
