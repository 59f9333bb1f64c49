#ifndef POLYMOMENT_MONTECARLO_HPP
#define POLYMOMENT_MONTECARLO_HPP

#include "polymoment/generator.hpp"

#include <cstdint>

namespace polymoment {

/// Simulation settings. Estimates are byte-identical for identical
/// (config, model) inputs regardless of thread count: every path draws from
/// its own seeded substream and reductions run in path order.
struct SimConfig {
    long n_paths = 100000;
    double dt = 1.0 / 250.0;
    uint64_t seed = 1;
    bool antithetic = false;
};

/// Scalar Monte Carlo estimate with its standard error.
struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
    long n_paths = 0;
    double dt = 0.0;
    uint64_t seed = 0;
};

/// Matrix-valued Monte Carlo estimate (migration frequencies) with per-entry
/// binomial standard errors. Rows of `value` sum to one exactly.
struct McMatrixEstimate {
    Matrix value;
    Matrix std_error;
    long n_paths = 0;
    double dt = 0.0;
    uint64_t seed = 0;
};

/// Discounted bond price E[e^{-int X ds}] by exact square-root transition
/// sampling (non-central chi-square drawn as a Poisson mixture of gammas) and
/// trapezoid accumulation of the rate integral. The antithetic flag is
/// ignored here: the exact transition has no symmetric Gaussian driver.
/// `threads` = 0 uses all hardware threads.
McEstimate mc_cir_bond(const CirModel& model, double x0, double tau, const SimConfig& cfg,
                       int threads = 0);

/// Zero-coupon yield -log(P)/tau under the log-rate model: exact
/// Ornstein-Uhlenbeck increments, trapezoid discount integral, delta-method
/// standard error. Honors antithetic pairing.
McEstimate mc_bk_yield(const BkModel& model, double x0, double tau, const SimConfig& cfg,
                       int threads = 0);

/// Rating migration frequency matrix at horizon t: factors advance by
/// full-truncation Euler, the rating chain by sampling from the one-step
/// transition matrix e^{Q(Y) dt} (dense exponential of the small rating
/// block, cached on a quantized factor lattice).
McMatrixEstimate mc_migration(const CreditModel& model, const Vector& y0, double t,
                              const SimConfig& cfg, int threads = 0);

}  // namespace polymoment

#endif
