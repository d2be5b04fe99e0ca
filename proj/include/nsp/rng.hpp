#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "nsp/math.hpp"

namespace nsp {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& s) {
    std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a ^ (0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2));
    std::uint64_t x = splitmix64(s);
    s ^= b;
    return x ^ splitmix64(s);
}

}  // namespace detail

// Counter-style PCG64 (XSL-RR) stream. A (seed, stream_id) pair fully
// determines the draw sequence; distinct stream ids select distinct
// increments, so shards and chains get independent streams without
// coordination. Distribution samplers are hand-rolled so that output is
// reproducible across standard libraries.
class RngStream {
  public:
    RngStream() : RngStream(0, 0) {}

    RngStream(std::uint64_t seed, std::uint64_t stream_id)
        : seed_(seed), stream_id_(stream_id) {
        std::uint64_t s = seed;
        const std::uint64_t hi = detail::splitmix64(s);
        const std::uint64_t lo = detail::splitmix64(s);
        std::uint64_t t = stream_id ^ 0x5851f42d4c957f2dULL;
        const std::uint64_t inc_hi = detail::splitmix64(t);
        const std::uint64_t inc_lo = detail::splitmix64(t);
        inc_ = ((static_cast<u128>(inc_hi) << 64) | inc_lo) | 1;
        state_ = 0;
        step();
        state_ += (static_cast<u128>(hi) << 64) | lo;
        step();
    }

    // Derived stream for a named sub-purpose (shard, chain, ...).
    RngStream substream(std::uint64_t key) const {
        return RngStream(seed_, detail::mix64(stream_id_, key));
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }

    std::uint64_t next_u64() {
        const u128 old = state_;
        step();
        const std::uint64_t xored = static_cast<std::uint64_t>(old >> 64) ^ static_cast<std::uint64_t>(old);
        const unsigned rot = static_cast<unsigned>(old >> 122);
        return (xored >> rot) | (xored << ((-rot) & 63u));
    }

    // Uniform on [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1].
    double uniform_pos() { return 1.0 - uniform(); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        // Box-Muller; the sine partner is discarded to keep the stream simple.
        double u1 = uniform_pos();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    // Marsaglia-Tsang; boosted for shape < 1.
    double gamma(double shape, double rate) {
        if (!(shape > 0.0) || !(rate > 0.0))
            throw std::invalid_argument("gamma: shape and rate must be positive");
        if (shape < 1.0) {
            double u = uniform_pos();
            return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
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
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
            if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
        }
    }

    long poisson(double mean) {
        if (!(mean >= 0.0) || !std::isfinite(mean))
            throw std::invalid_argument("poisson: mean must be finite and nonnegative");
        if (mean == 0.0) return 0;
        if (mean < 30.0) {
            // Knuth product-of-uniforms.
            const double limit = std::exp(-mean);
            long k = 0;
            double prod = uniform_pos();
            while (prod > limit) {
                prod *= uniform_pos();
                ++k;
            }
            return k;
        }
        return poisson_ptrs(mean);
    }

    // NB(r, p) with pmf Gamma(k+r)/(k! Gamma(r)) (1-p)^r p^k. Sampled by pmf
    // inversion for small means; falls back to the gamma-Poisson mixture.
    long neg_binomial(double r, double p) {
        if (!(r >= 0.0) || !(p >= 0.0) || !(p < 1.0))
            throw std::invalid_argument("neg_binomial: need r >= 0 and p in [0, 1)");
        if (r == 0.0 || p == 0.0) return 0;
        const double mean = r * p / (1.0 - p);
        const double log_p0 = r * std::log1p(-p);
        if (mean < 50.0 && log_p0 > -700.0) {
            double u = uniform();
            double pk = std::exp(log_p0);
            double cum = pk;
            long k = 0;
            while (u > cum) {
                pk *= p * (static_cast<double>(k) + r) / (static_cast<double>(k) + 1.0);
                cum += pk;
                ++k;
                if (k > 100000) break;
            }
            return k;
        }
        return poisson(gamma(r, (1.0 - p) / p));
    }

    std::vector<double> dirichlet(std::span<const double> conc) {
        std::vector<double> out(conc.size());
        double total = 0.0;
        for (std::size_t i = 0; i < conc.size(); ++i) {
            out[i] = std::max(gamma(conc[i], 1.0), 1e-300);
            total += out[i];
        }
        for (double& x : out) x /= total;
        return out;
    }

    std::size_t categorical(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) {
            if (!(w >= 0.0)) throw std::invalid_argument("categorical: negative or NaN weight");
            total += w;
        }
        if (!(total > 0.0)) throw std::invalid_argument("categorical: all weights zero");
        double u = uniform() * total;
        for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
            if (u < weights[i]) return i;
            u -= weights[i];
        }
        return weights.size() - 1;
    }

    std::size_t categorical_log(std::span<const double> log_weights) {
        double m = kNegInf;
        for (double lw : log_weights) {
            if (std::isnan(lw)) throw std::invalid_argument("categorical_log: NaN weight");
            m = std::max(m, lw);
        }
        if (m == kNegInf) throw std::invalid_argument("categorical_log: all weights -inf");
        double total = 0.0;
        for (double lw : log_weights) total += std::exp(lw - m);
        double u = uniform() * total;
        for (std::size_t i = 0; i + 1 < log_weights.size(); ++i) {
            u -= std::exp(log_weights[i] - m);
            if (u < 0.0) return i;
        }
        return log_weights.size() - 1;
    }

  private:
    using u128 = unsigned __int128;

    static constexpr u128 mul_() {
        return (static_cast<u128>(2549297995355413924ULL) << 64) | 4865540595714422341ULL;
    }

    void step() { state_ = state_ * mul_() + inc_; }

    // Hormann's PTRS transformed rejection, exact for mean >= 10.
    long poisson_ptrs(double mean) {
        const double log_mean = std::log(mean);
        const double b = 0.931 + 2.53 * std::sqrt(mean);
        const double a = -0.059 + 0.02483 * b;
        const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        const double v_r = 0.9277 - 3.6224 / (b - 2.0);
        for (;;) {
            double u = uniform() - 0.5;
            double v = uniform_pos();
            double us = 0.5 - std::fabs(u);
            double kf = std::floor((2.0 * a / us + b) * u + mean + 0.43);
            if (us >= 0.07 && v <= v_r) return static_cast<long>(kf);
            if (kf < 0.0 || (us < 0.013 && v > us)) continue;
            if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
                kf * log_mean - mean - std::lgamma(kf + 1.0))
                return static_cast<long>(kf);
        }
    }

    u128 state_;
    u128 inc_;
    std::uint64_t seed_;
    std::uint64_t stream_id_;
};

}  // namespace nsp
