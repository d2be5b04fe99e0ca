#pragma once

#include <sstream>
#include <stdexcept>
#include <vector>

#include "nsp/gibbs.hpp"
#include "nsp/log.hpp"

namespace nsp {

// Partition of the domain into contiguous slabs along one axis. Each point
// maps to exactly one shard: [b_i, b_{i+1}) intervals, last one closed.
struct ShardPlan {
    int n_shards = 1;
    int axis = 0;
    std::vector<double> boundaries;  // n_shards + 1 cut points

    static ShardPlan even(const Domain& domain, int p, int axis = 0) {
        if (p < 1) throw std::invalid_argument("ShardPlan: need p >= 1");
        if (axis < 0 || axis >= domain.dim()) throw std::invalid_argument("ShardPlan: bad axis");
        ShardPlan plan;
        plan.n_shards = p;
        plan.axis = axis;
        plan.boundaries.resize(static_cast<std::size_t>(p) + 1);
        const double lo = domain.lower()[axis], hi = domain.upper()[axis];
        for (int i = 0; i <= p; ++i)
            plan.boundaries[static_cast<std::size_t>(i)] =
                lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(p);
        plan.boundaries.front() = lo;
        plan.boundaries.back() = hi;
        return plan;
    }

    void validate(const Domain& domain) const {
        if (n_shards < 1 || static_cast<int>(boundaries.size()) != n_shards + 1)
            throw std::invalid_argument("ShardPlan: need n_shards + 1 boundaries");
        if (axis < 0 || axis >= domain.dim()) throw std::invalid_argument("ShardPlan: bad axis");
        if (std::fabs(boundaries.front() - domain.lower()[axis]) > 1e-12 ||
            std::fabs(boundaries.back() - domain.upper()[axis]) > 1e-12)
            throw std::invalid_argument("ShardPlan: boundaries must cover the domain axis");
        for (std::size_t i = 0; i + 1 < boundaries.size(); ++i)
            if (!(boundaries[i] < boundaries[i + 1]))
                throw std::invalid_argument("ShardPlan: boundaries must be strictly increasing");
    }

    int shard_of(const Vec& x) const {
        const double v = x[axis];
        for (int s = 0; s + 1 < n_shards; ++s)
            if (v < boundaries[static_cast<std::size_t>(s) + 1]) return s;
        return n_shards - 1;
    }

    double measure_fraction(int s) const {
        const double width = boundaries.back() - boundaries.front();
        return (boundaries[static_cast<std::size_t>(s) + 1] - boundaries[static_cast<std::size_t>(s)]) /
               width;
    }
};

// Approximate parallel MCMC: shards resample assignments against broadcast
// globals with clusters local to their slab; the coordinator then updates
// latent events, the background rate, and hyperparameters from gathered
// statistics. Exact when no cluster straddles a boundary; the background is
// the only cross-shard component and factorizes exactly.
template <class Model>
ChainRecord<Model> run_parallel_chain(const Model& model, const GammaWeightPrior& prior,
                                      const BackgroundRate& background, const GibbsOptions& options,
                                      const std::vector<typename Model::Point>& points,
                                      const ShardPlan& plan, const AnnealSchedule& schedule,
                                      int n_samples, RngStream rng, const SpeckledMask& mask = {},
                                      Model* final_model = nullptr) {
    plan.validate(model.domain());
    const double shard_width =
        (model.domain().upper()[plan.axis] - model.domain().lower()[plan.axis]) /
        static_cast<double>(plan.n_shards);
    const double scale = model.emission_scale_hint();
    if (plan.n_shards > 1 && scale * 4.0 > shard_width) {
        std::ostringstream os;
        os << "shard width " << shard_width << " is not large relative to the emission scale "
           << scale << "; cross-boundary clusters will be split";
        log_warn(os.str());
    }
    std::vector<std::vector<int>> shard_points(static_cast<std::size_t>(plan.n_shards));
    for (std::size_t i = 0; i < points.size(); ++i)
        shard_points[static_cast<std::size_t>(plan.shard_of(points[i].x))].push_back(
            static_cast<int>(i));
    CollapsedGibbsSampler<Model> sampler(model, prior, background, options, points,
                                         std::move(shard_points), rng, mask);
    std::vector<double> fractions(static_cast<std::size_t>(plan.n_shards));
    for (int s = 0; s < plan.n_shards; ++s)
        fractions[static_cast<std::size_t>(s)] = plan.measure_fraction(s);
    sampler.set_shard_measure_fractions(fractions);
    ChainRecord<Model> record = sampler.run(schedule, n_samples, /*use_threads=*/true);
    if (final_model) *final_model = sampler.model();
    return record;
}

}  // namespace nsp
