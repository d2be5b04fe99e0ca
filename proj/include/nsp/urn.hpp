#pragma once

#include <algorithm>
#include <limits>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "nsp/domain.hpp"
#include "nsp/math.hpp"
#include "nsp/partition.hpp"
#include "nsp/rng.hpp"
#include "nsp/vcoeff.hpp"

namespace nsp {

enum class UrnMode { nsp, dpmm_limit, pitman_yor, background_nsp };

// Configuration of the one-index-at-a-time partition construction. The NSP
// urn (Theorem 2) joins cluster k with weight |C_k| + alpha and opens a new
// cluster with weight alpha Lbar (beta/(1+beta))^alpha; the background variant
// (Theorem 4) adds the option C0 with weight w0 (1+beta).
struct UrnConfig {
    UrnMode mode = UrnMode::nsp;
    GammaWeightPrior prior{};
    double lbar = 0.0;    // nsp modes
    double gamma = 0.0;   // dpmm_limit / pitman_yor concentration
    double delta = 0.0;   // pitman_yor discount, < 1
    double w0 = 0.0;      // background_nsp integrated background intensity
    double new_mass = -1.0;  // explicit alpha lbar (beta/(1+beta))^alpha, for regimes
                             // where lbar itself overflows; < 0 means derive it

    static UrnConfig nsp_urn(const GammaWeightPrior& prior, double lbar_value) {
        if (!(lbar_value >= 0.0)) throw std::invalid_argument("UrnConfig: lbar must be >= 0");
        UrnConfig c;
        c.mode = UrnMode::nsp;
        c.prior = prior;
        c.lbar = lbar_value;
        return c;
    }

    static UrnConfig background_nsp_urn(const GammaWeightPrior& prior, double lbar_value, double w0) {
        UrnConfig c = nsp_urn(prior, lbar_value);
        c.mode = UrnMode::background_nsp;
        if (!(w0 >= 0.0)) throw std::invalid_argument("UrnConfig: w0 must be >= 0");
        c.w0 = w0;
        return c;
    }

    // Figure-style sweeps pin the new-cluster mass directly; at large alpha
    // the implied lbar = gamma / (alpha x) overflows a double.
    static UrnConfig nsp_urn_with_new_mass(const GammaWeightPrior& prior, double mass) {
        if (!(mass >= 0.0)) throw std::invalid_argument("UrnConfig: new-cluster mass must be >= 0");
        UrnConfig c;
        c.mode = UrnMode::nsp;
        c.prior = prior;
        c.lbar = std::numeric_limits<double>::quiet_NaN();
        c.new_mass = mass;
        return c;
    }

    static UrnConfig dpmm(double gamma) {
        if (!(gamma > 0.0)) throw std::invalid_argument("UrnConfig: gamma must be > 0");
        UrnConfig c;
        c.mode = UrnMode::dpmm_limit;
        c.gamma = gamma;
        return c;
    }

    static UrnConfig pitman_yor(double gamma, double delta) {
        if (!(delta < 1.0)) throw std::invalid_argument("UrnConfig: discount must be < 1");
        if (delta < 0.0) {
            // gamma must equal L |delta| for integer L so the new-cluster
            // weight hits exactly zero at |C| = L.
            double l = gamma / -delta;
            if (!(gamma > 0.0) || std::fabs(l - std::round(l)) > 1e-9)
                throw std::invalid_argument("UrnConfig: delta < 0 requires gamma = L |delta|, integer L");
        } else if (!(gamma > -delta)) {
            throw std::invalid_argument("UrnConfig: need gamma + delta > 0");
        }
        UrnConfig c;
        c.mode = UrnMode::pitman_yor;
        c.gamma = gamma;
        c.delta = delta;
        return c;
    }

    double nsp_new_weight() const {
        if (new_mass >= 0.0) return new_mass;
        return prior.alpha * lbar * std::exp(prior.log_empty_prob());
    }
};

// Unnormalized transition weights for placing the next index. Order:
// background option first (background_nsp only), then existing clusters in
// storage order, then the new-cluster option.
inline std::vector<double> urn_step_weights(const Partition& partition, const UrnConfig& config) {
    std::vector<double> w;
    w.reserve(partition.clusters.size() + 2);
    switch (config.mode) {
        case UrnMode::nsp:
        case UrnMode::background_nsp: {
            if (config.mode == UrnMode::background_nsp)
                w.push_back(config.w0 * (1.0 + config.prior.beta));
            for (const auto& c : partition.clusters)
                w.push_back(static_cast<double>(c.size()) + config.prior.alpha);
            w.push_back(config.nsp_new_weight());
            break;
        }
        case UrnMode::dpmm_limit: {
            for (const auto& c : partition.clusters) w.push_back(static_cast<double>(c.size()));
            w.push_back(config.gamma);
            break;
        }
        case UrnMode::pitman_yor: {
            for (const auto& c : partition.clusters) {
                double wk = static_cast<double>(c.size()) - config.delta;
                if (wk < 0.0) throw std::domain_error("pitman-yor: negative cluster weight");
                w.push_back(wk);
            }
            double wnew = config.gamma +
                          static_cast<double>(partition.num_clusters()) * config.delta;
            if (wnew < -1e-12) throw std::domain_error("pitman-yor: negative new-cluster weight");
            w.push_back(std::max(wnew, 0.0));
            break;
        }
    }
    return w;
}

// Extends a partition of [m] to [m+1]. Starting from the empty partition and
// applying this n times yields p(C | N = n) (p(C0, C | N = n) with background).
inline void urn_step(Partition& partition, const UrnConfig& config, RngStream& rng) {
    const int next = partition.n_total;
    const std::vector<double> w = urn_step_weights(partition, config);
    std::size_t pick = rng.categorical(w);
    const bool has_bg = config.mode == UrnMode::background_nsp;
    if (has_bg && pick == 0) {
        partition.background.push_back(next);
    } else {
        const std::size_t k = pick - (has_bg ? 1 : 0);
        if (k < partition.clusters.size())
            partition.clusters[k].push_back(next);
        else
            partition.clusters.push_back({next});
    }
    ++partition.n_total;
}

// The sequential urn-scheme process itself: the printed transition operator
// iterated n times from the empty partition. For dpmm_limit and pitman_yor
// this samples the partition law exactly; for the NSP modes it is the
// process the paper's figure-style urn studies depict, whose marginal is a
// biased approximation of p(C | N) (see sample_partition).
inline Partition sample_urn_trajectory(int n, const UrnConfig& config, RngStream& rng) {
    if (n < 1) throw std::invalid_argument("sample_urn_trajectory: need n >= 1");
    Partition p;
    for (int i = 0; i < n; ++i) urn_step(p, config, rng);
    return p;
}

namespace detail {

// Dirichlet-multinomial urn with a fixed number of components L: index joins
// cluster k with weight |C_k| + alpha, opens a new cluster with weight
// (L - K) alpha. Exact for the symmetric finite mixture.
inline void fixed_l_urn(Partition& p, const std::vector<int>& indices, long l, double alpha,
                        RngStream& rng) {
    std::vector<double> w;
    for (int idx : indices) {
        w.clear();
        for (const auto& c : p.clusters) w.push_back(static_cast<double>(c.size()) + alpha);
        const long unused = l - static_cast<long>(p.clusters.size());
        w.push_back(static_cast<double>(unused) * alpha);
        const std::size_t pick = rng.categorical(w);
        if (pick < p.clusters.size())
            p.clusters[pick].push_back(idx);
        else
            p.clusters.push_back({idx});
    }
}

}  // namespace detail

// Draws a partition whose law is exactly p(C | N = n) (p(C0, C | N = n) for
// background_nsp). The printed one-step operator applied n times is biased:
// its per-step normalizer depends on the running cluster count and the NSP
// conditional family is not deletion-consistent across N. Instead the latent
// event count L is drawn from its exact conditional (the Schein posterior)
// and the remaining assignment is the fixed-L Dirichlet-multinomial urn,
// whose sequential predictive is exact. dpmm_limit and pitman_yor families
// ARE deletion-consistent, so the plain chain is used for them.
inline Partition sample_partition(int n, const UrnConfig& config, RngStream& rng,
                                  const VCoefficientTable* shared_table = nullptr) {
    if (n < 1) throw std::invalid_argument("sample_partition: need n >= 1");
    Partition p;
    switch (config.mode) {
        case UrnMode::dpmm_limit:
        case UrnMode::pitman_yor: {
            return sample_urn_trajectory(n, config, rng);
        }
        case UrnMode::nsp: {
            if (config.new_mass >= 0.0)
                throw std::domain_error(
                    "sample_partition: exact sampling needs a finite lbar, not a pinned new-cluster mass");
            VCoefficientTable local(config.prior, config.lbar);
            const VCoefficientTable& table = shared_table ? *shared_table : local;
            const std::vector<double>& post = table.schein_posterior(n);
            const long l = static_cast<long>(rng.categorical(post));
            std::vector<int> indices(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i) indices[static_cast<std::size_t>(i)] = i;
            p.n_total = n;
            detail::fixed_l_urn(p, indices, l, config.prior.alpha, rng);
            return p;
        }
        case UrnMode::background_nsp: {
            // (N0, L) | N on the collapsed grid
            // w(n0, l) = e^{-w0} w0^{n0}/n0! Po(l | Lbar) NB(n - n0 | l alpha, (1+beta)^-1).
            const double p_nb = 1.0 / (1.0 + config.prior.beta);
            long l_max = 8 + static_cast<long>(config.lbar + 10.0 * std::sqrt(config.lbar) +
                                               static_cast<double>(n) / config.prior.alpha);
            std::vector<double> lw;
            std::vector<std::pair<int, long>> cells;
            for (int n0 = 0; n0 <= n; ++n0) {
                const double bg_part =
                    (n0 == 0 ? 0.0
                             : (config.w0 > 0.0 ? static_cast<double>(n0) * std::log(config.w0)
                                                : kNegInf)) -
                    std::lgamma(static_cast<double>(n0) + 1.0);
                for (long l = 0; l <= l_max; ++l) {
                    const double t = bg_part + log_poisson_pmf(l, config.lbar) +
                                     log_neg_binomial_pmf(n - n0, static_cast<double>(l) * config.prior.alpha, p_nb);
                    if (t != kNegInf) {
                        lw.push_back(t);
                        cells.emplace_back(n0, l);
                    }
                }
            }
            if (cells.empty()) throw std::domain_error("sample_partition: zero-probability N");
            const std::size_t pick = rng.categorical_log(lw);
            const auto [n0, l] = cells[pick];
            // Uniform background subset via partial Fisher-Yates.
            std::vector<int> indices(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i) indices[static_cast<std::size_t>(i)] = i;
            for (int i = 0; i < n0; ++i) {
                const int j = i + static_cast<int>(rng.uniform() * (n - i));
                std::swap(indices[static_cast<std::size_t>(i)],
                          indices[static_cast<std::size_t>(std::min(j, n - 1))]);
            }
            p.n_total = n;
            p.background.assign(indices.begin(), indices.begin() + n0);
            std::vector<int> rest(indices.begin() + n0, indices.end());
            std::sort(rest.begin(), rest.end());
            detail::fixed_l_urn(p, rest, l, config.prior.alpha, rng);
            p.canonicalize();
            return p;
        }
    }
    throw std::logic_error("unknown urn mode");
}

// Algorithm-6 size draw: Ltilde ~ Po(Lbar), N ~ NB(Ltilde alpha, (1+beta)^-1).
inline long sample_nsp_size(const UrnConfig& config, RngStream& rng) {
    if (config.mode != UrnMode::nsp && config.mode != UrnMode::background_nsp)
        throw std::domain_error("sample_nsp_size: requires an NSP-mode configuration");
    const long l = rng.poisson(config.lbar);
    return rng.neg_binomial(static_cast<double>(l) * config.prior.alpha,
                            1.0 / (1.0 + config.prior.beta));
}

// Number of latent events with zero observed points: Po(Lbar (beta/(1+beta))^alpha).
inline long sample_empty_cluster_count(const GammaWeightPrior& prior, const Domain& domain,
                                       RngStream& rng) {
    return rng.poisson(lbar(prior, domain) * std::exp(prior.log_empty_prob()));
}

}  // namespace nsp
