#pragma once

#include <stdexcept>
#include <type_traits>
#include <vector>

#include "nsp/domain.hpp"
#include "nsp/partition.hpp"
#include "nsp/rng.hpp"
#include "nsp/urn.hpp"

namespace nsp {

enum class Construction { v1, v2, v3, v4, v5 };

inline const char* construction_name(Construction c) {
    switch (c) {
        case Construction::v1: return "v1";
        case Construction::v2: return "v2";
        case Construction::v3: return "v3";
        case Construction::v4: return "v4";
        case Construction::v5: return "v5";
    }
    return "?";
}

// Forward draw with ground truth: points, the truth partition (background
// block + one cluster per occupied latent event, aligned with `latents`),
// and the latent events that produced nothing (so the empty-cluster law is
// testable from forward output). Weights are absent for the collapsed
// constructions v4/v5.
template <class Model>
struct GeneratedDataset {
    using Point = typename Model::Point;
    using Latent = LatentEvent<typename Model::Params>;

    std::vector<Point> points;
    Partition truth;                  // clusters ordered to match `latents`
    std::vector<Latent> latents;      // occupied latent events
    std::vector<Latent> empty_latents;
    double background_rate = 0.0;
    long n_outside = 0;  // emissions that landed outside X (untruncated mode only)

    std::vector<int> truth_labels() const { return truth.to_labels(); }
};

namespace detail {

template <class Model>
void finalize_truth(GeneratedDataset<Model>& data) {
    data.truth.n_total = static_cast<int>(data.points.size());
    data.truth.validate();
}

// Shared tail of v2/v3/v4: categorical parent assignment and emission.
template <class Model>
void assign_and_emit(const Model& model, const Domain& domain,
                     std::vector<typename GeneratedDataset<Model>::Latent>& all,
                     const std::vector<double>& weights, long n, GeneratedDataset<Model>& data,
                     RngStream& rng, bool truncate) {
    const long l = static_cast<long>(all.size());
    std::vector<std::vector<int>> members(static_cast<std::size_t>(l));
    data.points.resize(static_cast<std::size_t>(n));
    for (long j = 0; j < n; ++j) {
        const std::size_t z = rng.categorical(std::span<const double>(weights));
        members[z].push_back(static_cast<int>(j));
        data.points[static_cast<std::size_t>(j)] = model.sample_point(all[z].params, rng, truncate);
        if (!truncate && !domain.contains(data.points[static_cast<std::size_t>(j)].x)) ++data.n_outside;
    }
    for (long i = 0; i < l; ++i) {
        if (members[static_cast<std::size_t>(i)].empty())
            data.empty_latents.push_back(std::move(all[static_cast<std::size_t>(i)]));
        else {
            data.truth.clusters.push_back(std::move(members[static_cast<std::size_t>(i)]));
            data.latents.push_back(std::move(all[static_cast<std::size_t>(i)]));
        }
    }
    finalize_truth(data);
}

}  // namespace detail

// Algorithm 1: per-latent Poisson counts.
template <class Model>
GeneratedDataset<Model> sample_nsp_v1(const Model& model, const GammaWeightPrior& prior,
                                      const Domain& domain, RngStream& rng, bool truncate = true) {
    GeneratedDataset<Model> data;
    const long l = rng.poisson(lbar(prior, domain));
    for (long i = 0; i < l; ++i) {
        typename GeneratedDataset<Model>::Latent latent;
        latent.params = model.sample_prior_params(rng);
        latent.m = latent_location(latent.params);
        latent.w = rng.gamma(prior.alpha, prior.beta);
        const long n_l = rng.poisson(*latent.w);
        if (n_l == 0) {
            data.empty_latents.push_back(std::move(latent));
            continue;
        }
        std::vector<int> members;
        members.reserve(static_cast<std::size_t>(n_l));
        for (long j = 0; j < n_l; ++j) {
            members.push_back(static_cast<int>(data.points.size()));
            data.points.push_back(model.sample_point(latent.params, rng, truncate));
            if (!truncate && !domain.contains(data.points.back().x)) ++data.n_outside;
        }
        data.truth.clusters.push_back(std::move(members));
        data.latents.push_back(std::move(latent));
    }
    detail::finalize_truth(data);
    return data;
}

// Algorithm 2: total count Po(sum w), categorical parents.
template <class Model>
GeneratedDataset<Model> sample_nsp_v2(const Model& model, const GammaWeightPrior& prior,
                                      const Domain& domain, RngStream& rng, bool truncate = true) {
    GeneratedDataset<Model> data;
    const long l = rng.poisson(lbar(prior, domain));
    std::vector<typename GeneratedDataset<Model>::Latent> all(static_cast<std::size_t>(l));
    std::vector<double> w(static_cast<std::size_t>(l));
    double total = 0.0;
    for (long i = 0; i < l; ++i) {
        auto& latent = all[static_cast<std::size_t>(i)];
        latent.params = model.sample_prior_params(rng);
        latent.m = latent_location(latent.params);
        latent.w = rng.gamma(prior.alpha, prior.beta);
        w[static_cast<std::size_t>(i)] = *latent.w;
        total += *latent.w;
    }
    const long n = total > 0.0 ? rng.poisson(total) : 0;
    detail::assign_and_emit(model, domain, all, w, n, data, rng, truncate);
    return data;
}

// Algorithm 3: W ~ Ga(L alpha, beta), pi ~ Dir(alpha 1_L); the total weight
// is independent of the normalized weights.
template <class Model>
GeneratedDataset<Model> sample_nsp_v3(const Model& model, const GammaWeightPrior& prior,
                                      const Domain& domain, RngStream& rng, bool truncate = true) {
    GeneratedDataset<Model> data;
    const long l = rng.poisson(lbar(prior, domain));
    std::vector<typename GeneratedDataset<Model>::Latent> all(static_cast<std::size_t>(l));
    for (auto& latent : all) {
        latent.params = model.sample_prior_params(rng);
        latent.m = latent_location(latent.params);
    }
    long n = 0;
    std::vector<double> w(static_cast<std::size_t>(l), 0.0);
    if (l > 0) {
        const double total = rng.gamma(static_cast<double>(l) * prior.alpha, prior.beta);
        std::vector<double> conc(static_cast<std::size_t>(l), prior.alpha);
        std::vector<double> pi = rng.dirichlet(conc);
        for (long i = 0; i < l; ++i) {
            w[static_cast<std::size_t>(i)] = pi[static_cast<std::size_t>(i)];
            all[static_cast<std::size_t>(i)].w = total * pi[static_cast<std::size_t>(i)];
        }
        n = rng.poisson(total);
    }
    detail::assign_and_emit(model, domain, all, w, n, data, rng, truncate);
    return data;
}

// Algorithm 4: N ~ NB(L alpha, (1+beta)^-1); weights marginalized out.
template <class Model>
GeneratedDataset<Model> sample_nsp_v4(const Model& model, const GammaWeightPrior& prior,
                                      const Domain& domain, RngStream& rng, bool truncate = true) {
    GeneratedDataset<Model> data;
    const long l = rng.poisson(lbar(prior, domain));
    std::vector<typename GeneratedDataset<Model>::Latent> all(static_cast<std::size_t>(l));
    for (auto& latent : all) {
        latent.params = model.sample_prior_params(rng);
        latent.m = latent_location(latent.params);
    }
    long n = 0;
    std::vector<double> w(static_cast<std::size_t>(l), 0.0);
    if (l > 0) {
        n = rng.neg_binomial(static_cast<double>(l) * prior.alpha, 1.0 / (1.0 + prior.beta));
        std::vector<double> conc(static_cast<std::size_t>(l), prior.alpha);
        std::vector<double> pi = rng.dirichlet(conc);
        for (long i = 0; i < l; ++i) w[static_cast<std::size_t>(i)] = pi[static_cast<std::size_t>(i)];
    }
    detail::assign_and_emit(model, domain, all, w, n, data, rng, truncate);
    return data;
}

// Algorithm 5: sample (N, C) from the partition prior, then per-cluster
// parameters and points. Empty latent events never materialize here.
template <class Model>
GeneratedDataset<Model> sample_nsp_v5(const Model& model, const GammaWeightPrior& prior,
                                      const Domain& domain, RngStream& rng, bool truncate = true) {
    GeneratedDataset<Model> data;
    const UrnConfig urn = UrnConfig::nsp_urn(prior, lbar(prior, domain));
    const long n = sample_nsp_size(urn, rng);
    if (n > 0) {
        const Partition partition = sample_partition(static_cast<int>(n), urn, rng);
        data.points.resize(static_cast<std::size_t>(n));
        for (const auto& members : partition.clusters) {
            typename GeneratedDataset<Model>::Latent latent;
            latent.params = model.sample_prior_params(rng);
            latent.m = latent_location(latent.params);
            for (int idx : members) {
                data.points[static_cast<std::size_t>(idx)] = model.sample_point(latent.params, rng, truncate);
                if (!truncate && !domain.contains(data.points[static_cast<std::size_t>(idx)].x))
                    ++data.n_outside;
            }
            data.truth.clusters.push_back(members);
            data.latents.push_back(std::move(latent));
        }
    }
    detail::finalize_truth(data);
    return data;
}

template <class Model>
GeneratedDataset<Model> sample_nsp(Construction c, const Model& model, const GammaWeightPrior& prior,
                                   const Domain& domain, RngStream& rng, bool truncate = true) {
    switch (c) {
        case Construction::v1: return sample_nsp_v1(model, prior, domain, rng, truncate);
        case Construction::v2: return sample_nsp_v2(model, prior, domain, rng, truncate);
        case Construction::v3: return sample_nsp_v3(model, prior, domain, rng, truncate);
        case Construction::v4: return sample_nsp_v4(model, prior, domain, rng, truncate);
        case Construction::v5: return sample_nsp_v5(model, prior, domain, rng, truncate);
    }
    throw std::logic_error("unknown construction");
}

// Superposition with a homogeneous marked background process: N0 ~ Po(w0(X)),
// locations uniform on X, marks from the background mark density.
template <class Model>
GeneratedDataset<Model> sample_with_background(const Model& model, const GammaWeightPrior& prior,
                                               const BackgroundRate& background, const Domain& domain,
                                               RngStream& rng, bool truncate = true,
                                               Construction c = Construction::v1) {
    GeneratedDataset<Model> data = sample_nsp(c, model, prior, domain, rng, truncate);
    data.background_rate = background.rate;
    const long n0 = rng.poisson(background.w0(domain.measure()));
    for (long i = 0; i < n0; ++i) {
        data.truth.background.push_back(static_cast<int>(data.points.size()));
        typename Model::Point p;
        p.x = domain.sample_uniform(rng);
        p.mark = model.sample_background_mark(rng);
        data.points.push_back(std::move(p));
    }
    detail::finalize_truth(data);
    return data;
}

}  // namespace nsp
