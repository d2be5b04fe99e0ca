#pragma once

// Minimal observation model for tests that only exercise the law of
// (N, cluster sizes): uniform emissions, no marks, flat everything.

#include "nsp/domain.hpp"
#include "nsp/rng.hpp"

namespace testsupport {

class StubModel {
  public:
    struct Mark {};
    using Point = nsp::MarkedPoint<Mark>;
    struct Params {
        double m = 0.0;
    };
    struct Stats {
        int n = 0;
    };

    explicit StubModel(nsp::Domain domain) : domain_(std::move(domain)) {}

    const nsp::Domain& domain() const { return domain_; }
    Stats empty_stats() const { return {}; }
    void add(Stats& s, const Point&) const { ++s.n; }
    void remove(Stats& s, const Point&) const { --s.n; }
    double log_marginal_new(const Point&) const { return -std::log(domain_.measure()); }
    double log_predictive(const Stats&, const Point&) const { return -std::log(domain_.measure()); }
    double log_evidence(const Stats& s) const { return -s.n * std::log(domain_.measure()); }

    Params sample_prior_params(nsp::RngStream& rng) const {
        return {domain_.sample_uniform(rng)[0]};
    }
    Params sample_posterior_params(const Stats&, nsp::RngStream& rng) const {
        return sample_prior_params(rng);
    }
    Point sample_point(const Params&, nsp::RngStream& rng, bool = true) const {
        return Point{domain_.sample_uniform(rng), {}};
    }
    double log_emission(const Params&, const Point&) const { return -std::log(domain_.measure()); }
    double background_mark_log_density(const Mark&) const { return 0.0; }
    Mark sample_background_mark(nsp::RngStream&) const { return {}; }
    static int mark_group(const Mark&) { return -1; }
    double background_group_prob(int) const { return 1.0; }
    void validate_mark(const Mark&) const {}
    double emission_scale_hint() const { return domain_.measure(); }

    template <class ClusterInfo>
    void resample_globals(const std::vector<ClusterInfo>&, const std::vector<const Point*>&,
                          nsp::RngStream&) {}

  private:
    nsp::Domain domain_;
};

}  // namespace testsupport
