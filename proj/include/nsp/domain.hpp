#pragma once

#include <Eigen/Dense>
#include <optional>
#include <type_traits>
#include <stdexcept>
#include <vector>

#include "nsp/rng.hpp"

namespace nsp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Axis-aligned box observation window with finite Lebesgue measure.
class Domain {
  public:
    Domain(Vec lower, Vec upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
        if (lower_.size() == 0 || lower_.size() != upper_.size())
            throw std::invalid_argument("Domain: bounds must be nonempty and of equal dimension");
        for (Eigen::Index d = 0; d < lower_.size(); ++d) {
            if (!(upper_[d] > lower_[d]) || !std::isfinite(lower_[d]) || !std::isfinite(upper_[d]))
                throw std::invalid_argument("Domain: need finite upper > lower on every axis");
        }
    }

    static Domain interval(double lo, double hi) {
        Vec l(1), u(1);
        l << lo;
        u << hi;
        return Domain(l, u);
    }

    static Domain box(std::initializer_list<double> lo, std::initializer_list<double> hi) {
        Vec l(static_cast<Eigen::Index>(lo.size())), u(static_cast<Eigen::Index>(hi.size()));
        Eigen::Index i = 0;
        for (double x : lo) l[i++] = x;
        i = 0;
        for (double x : hi) u[i++] = x;
        return Domain(l, u);
    }

    int dim() const { return static_cast<int>(lower_.size()); }
    const Vec& lower() const { return lower_; }
    const Vec& upper() const { return upper_; }

    double measure() const {
        double m = 1.0;
        for (Eigen::Index d = 0; d < lower_.size(); ++d) m *= upper_[d] - lower_[d];
        return m;
    }

    Vec center() const { return 0.5 * (lower_ + upper_); }

    bool contains(const Vec& x) const {
        if (x.size() != lower_.size()) return false;
        for (Eigen::Index d = 0; d < x.size(); ++d)
            if (x[d] < lower_[d] || x[d] > upper_[d]) return false;
        return true;
    }

    Vec sample_uniform(RngStream& rng) const {
        Vec x(lower_.size());
        for (Eigen::Index d = 0; d < x.size(); ++d) x[d] = rng.uniform(lower_[d], upper_[d]);
        return x;
    }

  private:
    Vec lower_, upper_;
};

inline double measure(const Domain& domain) { return domain.measure(); }

// Gamma prior on latent-event weights plus the homogeneous latent-event rate.
struct GammaWeightPrior {
    double alpha = 1.0;   // shape
    double beta = 1.0;    // rate
    double nu_bar = 1.0;  // latent events per unit measure

    GammaWeightPrior() = default;
    GammaWeightPrior(double a, double b, double nu) : alpha(a), beta(b), nu_bar(nu) {
        if (!(alpha > 0.0) || !(beta > 0.0) || !(nu_bar >= 0.0))
            throw std::invalid_argument("GammaWeightPrior: need alpha > 0, beta > 0, nu_bar >= 0");
    }

    // log of (beta / (1 + beta))^alpha, the per-cluster empty probability.
    double log_empty_prob() const { return alpha * (std::log(beta) - std::log1p(beta)); }
};

inline double lbar(const GammaWeightPrior& prior, const Domain& domain) {
    return prior.nu_bar * domain.measure();
}

template <class MarkT>
struct MarkedPoint {
    Vec x;
    MarkT mark{};
};

// Constructs a point, enforcing domain containment (boundary inclusive).
template <class MarkT>
MarkedPoint<MarkT> checked_point(const Domain& domain, Vec x, MarkT mark = {}) {
    if (!domain.contains(x)) throw std::invalid_argument("point lies outside the domain");
    return MarkedPoint<MarkT>{std::move(x), std::move(mark)};
}

// Cluster seed: location, expected offspring count, model parameter.
// Weight is absent for constructions that marginalize it out.
template <class ParamsT>
struct LatentEvent {
    Vec m;
    std::optional<double> w;
    ParamsT params{};
};

// Location of a latent event, for 1-D scalar and vector param layouts.
template <class ParamsT>
Vec latent_location(const ParamsT& params) {
    if constexpr (std::is_same_v<std::decay_t<decltype(params.m)>, double>) {
        Vec v(1);
        v << params.m;
        return v;
    } else {
        return params.m;
    }
}

// Homogeneous background intensity with its conjugate gamma prior.
struct BackgroundRate {
    double rate = 0.0;
    double prior_shape = 1.0;
    double prior_rate = 1.0;

    double w0(double measure) const { return rate * measure; }
};

inline double resample_background_rate(const BackgroundRate& bg, long n_background,
                                        double measure, RngStream& rng) {
    return rng.gamma(bg.prior_shape + static_cast<double>(n_background), bg.prior_rate + measure);
}

}  // namespace nsp
