#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "nsp/gibbs.hpp"
#include "nsp/mask.hpp"
#include "nsp/math.hpp"

namespace nsp {

// Fraction of ordered index pairs (diagonal included) on which two labelings
// agree about co-membership. Contingency-table fast path; the O(N^2)
// reference mode evaluates the definition directly.
inline double co_occupancy_accuracy(std::span<const int> z, std::span<const int> z_ref,
                                    bool reference_mode = false) {
    if (z.size() != z_ref.size() || z.empty())
        throw std::invalid_argument("co_occupancy_accuracy: need equal nonempty labelings");
    const double n = static_cast<double>(z.size());
    if (reference_mode) {
        double agree = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i)
            for (std::size_t j = 0; j < z.size(); ++j) {
                const bool same_a = z[i] == z[j];
                const bool same_b = z_ref[i] == z_ref[j];
                agree += (same_a && same_b) || (!same_a && !same_b);
            }
        return agree / (n * n);
    }
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> rows, cols;
    for (std::size_t i = 0; i < z.size(); ++i) {
        joint[{z[i], z_ref[i]}] += 1.0;
        rows[z[i]] += 1.0;
        cols[z_ref[i]] += 1.0;
    }
    double a = 0.0, b = 0.0, c = 0.0;
    for (const auto& [k, v] : joint) a += v * v;
    for (const auto& [k, v] : rows) b += v * v;
    for (const auto& [k, v] : cols) c += v * v;
    return (n * n - b - c + 2.0 * a) / (n * n);
}

struct ClusterCountSummary {
    double mean = 0.0;
    double lo95 = 0.0;
    double hi95 = 0.0;
    double truth = 0.0;
    double bias = 0.0;
    long n_samples = 0;
    bool covers_truth = false;
};

// Pooled posterior summary of |C| across chains (records are post-warmup).
inline ClusterCountSummary summarize_cluster_counts(std::vector<int> counts, double truth) {
    if (counts.empty()) throw std::invalid_argument("summarize_cluster_counts: no samples");
    ClusterCountSummary s;
    s.n_samples = static_cast<long>(counts.size());
    double total = 0.0;
    for (int k : counts) total += k;
    s.mean = total / static_cast<double>(counts.size());
    std::sort(counts.begin(), counts.end());
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(counts.size() - 1);
        const std::size_t i = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(i);
        const double lo = counts[i];
        const double hi = counts[std::min(i + 1, counts.size() - 1)];
        return lo + frac * (hi - lo);
    };
    s.lo95 = quantile(0.025);
    s.hi95 = quantile(0.975);
    s.truth = truth;
    s.bias = s.mean - truth;
    s.covers_truth = truth >= s.lo95 - 1e-12 && truth <= s.hi95 + 1e-12;
    return s;
}

template <class Model>
ClusterCountSummary compare_cluster_count(const std::vector<ChainRecord<Model>>& chains,
                                          double truth) {
    std::vector<int> counts;
    for (const auto& chain : chains)
        for (const auto& s : chain.samples) counts.push_back(s.n_clusters);
    return summarize_cluster_counts(std::move(counts), truth);
}

struct HeldoutResult {
    double per_point = 0.0;  // nats per held-out point, integral term included
    double pooled = 0.0;     // log-mean-exp of the total masked-region log-likelihood
    long n_points = 0;
};

// Poisson-process predictive log-likelihood of held-out points on the masked
// region, averaged over retained samples as log-mean-exp. Each sample
// contributes sum_h log lambda(x_h, y_h) - integral of lambda over the mask.
// The chain must have been fit with the masked points excluded; samples must
// carry latent events. Mask regions are assumed disjoint.
template <class Model>
HeldoutResult heldout_predictive_ll(const std::vector<const ChainSample<Model>*>& samples,
                                    const Model& model,
                                    const std::vector<typename Model::Point>& all_points,
                                    const SpeckledMask& mask) {
    if (mask.empty()) throw std::invalid_argument("heldout_predictive_ll: empty mask");
    if (samples.empty()) throw std::invalid_argument("heldout_predictive_ll: no samples");
    std::vector<const typename Model::Point*> held;
    for (const auto& p : all_points)
        if (mask.contains(p.x, Model::mark_group(p.mark))) held.push_back(&p);
    if (held.empty()) throw std::invalid_argument("heldout_predictive_ll: no held-out points");

    std::vector<double> lls;
    lls.reserve(samples.size());
    for (const ChainSample<Model>* s : samples) {
        double ll = 0.0;
        for (const auto* p : held) {
            double intensity =
                s->background_rate > 0.0
                    ? s->background_rate * std::exp(model.background_mark_log_density(p->mark))
                    : 0.0;
            for (const auto& latent : s->latents) {
                if (!latent.w) throw std::invalid_argument("heldout: sample lacks latent weights");
                intensity += *latent.w * std::exp(model.log_emission(latent.params, *p));
            }
            ll += intensity > 0.0 ? std::log(intensity) : kNegInf;
        }
        for (const auto& region : mask.regions) {
            const int group = region.group ? *region.group : -1;
            double mass = s->background_rate * region.box_measure() *
                          (region.group ? model.background_group_prob(group) : 1.0);
            for (const auto& latent : s->latents)
                mass += *latent.w *
                        model.emission_box_mass(latent.params, region.lower, region.upper, group);
            ll -= mass;
        }
        lls.push_back(ll);
    }
    HeldoutResult out;
    out.n_points = static_cast<long>(held.size());
    // log-mean-exp across samples
    out.pooled = log_sum_exp(lls) - std::log(static_cast<double>(lls.size()));
    out.per_point = out.pooled / static_cast<double>(held.size());
    return out;
}

template <class Model>
HeldoutResult heldout_predictive_ll(const ChainRecord<Model>& record, const Model& model,
                                    const std::vector<typename Model::Point>& all_points,
                                    const SpeckledMask& mask) {
    std::vector<const ChainSample<Model>*> samples;
    for (const auto& s : record.samples) samples.push_back(&s);
    return heldout_predictive_ll(samples, model, all_points, mask);
}

// Points surviving fit-time masking (masked points never enter assignments).
template <class Model>
std::vector<typename Model::Point> apply_mask(const std::vector<typename Model::Point>& points,
                                              const SpeckledMask& mask) {
    std::vector<typename Model::Point> kept;
    for (const auto& p : points)
        if (!mask.contains(p.x, Model::mark_group(p.mark))) kept.push_back(p);
    return kept;
}

}  // namespace nsp
