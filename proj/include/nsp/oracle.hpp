#pragma once

#include <stdexcept>
#include <vector>

#include "nsp/domain.hpp"
#include "nsp/gibbs.hpp"
#include "nsp/math.hpp"
#include "nsp/partition.hpp"
#include "nsp/vcoeff.hpp"

namespace nsp {

struct PosteriorEnumeration {
    std::vector<Partition> configs;
    std::vector<double> probs;  // normalized, aligned with configs

    double prob_of(const Partition& p) const {
        for (std::size_t i = 0; i < configs.size(); ++i)
            if (configs[i] == p) return probs[i];
        return 0.0;
    }
};

// Exact posterior over (C0, C) for a tiny dataset, by direct enumeration of
// all labeled configurations. The exactness oracle for the Gibbs sampler.
template <class Model>
PosteriorEnumeration enumerate_posterior(const Model& model, const GammaWeightPrior& prior,
                                         const BackgroundRate& background,
                                         const std::vector<typename Model::Point>& points,
                                         SamplerMode mode = SamplerMode::nsp,
                                         double dpmm_gamma = 1.0) {
    const int n = static_cast<int>(points.size());
    if (n < 1 || n > 3) throw std::invalid_argument("enumerate_posterior: need 1..3 points");
    const double measure = model.domain().measure();
    const double w0 = background.rate * measure;
    VCoefficientTable table(prior, lbar(prior, model.domain()));

    PosteriorEnumeration out;
    std::vector<double> lps;
    for (Partition& config : enumerate_partitions_with_background(n)) {
        double lp = mode == SamplerMode::nsp
                        ? log_eppf_with_background(config, table, w0)
                        : log_eppf_dpmm_limit_with_background(config, dpmm_gamma, prior.beta, w0);
        if (!config.background.empty()) {
            if (background.rate == 0.0) {
                lp = kNegInf;
            } else {
                lp += static_cast<double>(config.background.size()) *
                      (std::log(background.rate) - std::log(w0));
                for (int i : config.background)
                    lp += model.background_mark_log_density(points[static_cast<std::size_t>(i)].mark);
            }
        }
        if (lp != kNegInf) {
            for (const auto& members : config.clusters) {
                auto stats = model.empty_stats();
                for (int i : members) model.add(stats, points[static_cast<std::size_t>(i)]);
                lp += model.log_evidence(stats);
            }
        }
        out.configs.push_back(std::move(config));
        lps.push_back(lp);
    }
    const double norm = log_sum_exp(lps);
    if (norm == kNegInf) throw std::domain_error("enumerate_posterior: all configurations impossible");
    out.probs.resize(lps.size());
    for (std::size_t i = 0; i < lps.size(); ++i) out.probs[i] = std::exp(lps[i] - norm);
    return out;
}

}  // namespace nsp
