#ifndef POLYMOMENT_DETAIL_RNG_HPP
#define POLYMOMENT_DETAIL_RNG_HPP

#include <cmath>
#include <cstdint>

namespace polymoment::detail {

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// xoshiro256++ seeded from (seed, stream); one independent instance per
/// simulated path so results do not depend on scheduling or thread count.
class PathRng {
public:
    PathRng(uint64_t seed, uint64_t stream) {
        uint64_t sm = seed ^ (0x632BE59BD9B4E019ULL * (stream + 1));
        for (auto& word : s_) word = splitmix64(sm);
        if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 0x1ULL;
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in (0, 1].
    double uniform_pos() { return 1.0 - uniform(); }

    /// Standard normal via Box-Muller, pairs cached.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform_pos()));
        const double a = 6.283185307179586476925286766559 * uniform();
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// Gamma(shape, 1) by Marsaglia-Tsang squeeze, boosted for shape < 1.
    double gamma(double shape) {
        if (shape < 1.0) {
            const double u = uniform_pos();
            return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
        }
        const double d = shape - 1.0 / 3.0;
        const double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            const double u = uniform_pos();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    /// Poisson(mean): product inversion for small means, PTRS transformed
    /// rejection for large ones.
    long poisson(double mean) {
        if (mean <= 0.0) return 0;
        if (mean < 10.0) {
            const double limit = std::exp(-mean);
            long k = 0;
            double prod = uniform_pos();
            while (prod > limit) {
                ++k;
                prod *= uniform_pos();
            }
            return k;
        }
        const double b = 0.931 + 2.53 * std::sqrt(mean);
        const double a = -0.059 + 0.02483 * b;
        const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        const double v_r = 0.9277 - 3.6224 / (b - 2.0);
        const double log_mean = std::log(mean);
        for (;;) {
            const double u = uniform() - 0.5;
            const double v = uniform_pos();
            const double us = 0.5 - std::abs(u);
            const double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
            if (us >= 0.07 && v <= v_r) return static_cast<long>(kf);
            if (kf < 0.0 || (us < 0.013 && v > us)) continue;
            if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
                kf * log_mean - mean - std::lgamma(kf + 1.0)) {
                return static_cast<long>(kf);
            }
        }
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t s_[4];
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace polymoment::detail

#endif
