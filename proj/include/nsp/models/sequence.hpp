#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "nsp/domain.hpp"
#include "nsp/math.hpp"
#include "nsp/rng.hpp"

namespace nsp {

// Neural sequence detection on [0, T]. A latent event is a sequence with a
// time, weight, discrete type s and warp index f; a spike on neuron y is
// emitted at N(x | m + tau_f b_{y,s}, tau_f sigma^2_{y,s}). The unwarped
// model of the original formulation is the special case warp_values = {1}.
struct SequenceConfig {
    int n_neurons = 1;
    int n_types = 1;
    std::vector<double> warp_values = {1.0};  // {tau_1..tau_F}, uniform prior
    double type_conc = 1.0;                   // Dirichlet concentration for pi
    double neuron_conc = 1.0;                 // Dirichlet concentration for each a_s
    double bg_neuron_conc = 1.0;              // Dirichlet concentration for a0
    // Normal-inverse-gamma prior on (offset, width^2) per (neuron, type).
    double offset_mean0 = 0.0;
    double offset_kappa0 = 1.0;
    double width_shape0 = 2.0;
    double width_scale0 = 1.0;

    // Geometric warp grid, symmetric about 1, from 1/max_warp to max_warp.
    static std::vector<double> geometric_warp_grid(int f, double max_warp) {
        if (f < 1 || !(max_warp >= 1.0))
            throw std::invalid_argument("warp grid: need f >= 1 and max_warp >= 1");
        std::vector<double> taus(static_cast<std::size_t>(f));
        if (f == 1) {
            taus[0] = 1.0;
            return taus;
        }
        for (int i = 0; i < f; ++i)
            taus[static_cast<std::size_t>(i)] =
                std::pow(max_warp, -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(f - 1));
        return taus;
    }
};

struct SequenceGlobals {
    Vec pi;       // type probabilities, length S
    Mat a;        // a(s, y): neuron distribution per type
    Mat offset;   // b(y, s)
    Mat width2;   // sigma^2(y, s)
    Vec a0;       // background neuron distribution

    static SequenceGlobals uniform(const SequenceConfig& c) {
        SequenceGlobals g;
        g.pi = Vec::Constant(c.n_types, 1.0 / c.n_types);
        g.a = Mat::Constant(c.n_types, c.n_neurons, 1.0 / c.n_neurons);
        g.offset = Mat::Zero(c.n_neurons, c.n_types);
        g.width2 = Mat::Ones(c.n_neurons, c.n_types);
        g.a0 = Vec::Constant(c.n_neurons, 1.0 / c.n_neurons);
        return g;
    }
};

class SequenceModel {
  public:
    struct Mark {
        int neuron = 0;
    };
    using Point = MarkedPoint<Mark>;

    struct Params {
        double m = 0.0;
        int type = 0;
        int warp = 0;
    };

    // Per-(type, warp) natural parameters of the flat-prior location
    // posterior: precision J, precision-weighted mean h, quadratic term q,
    // and the log-normalizer accumulator A = sum -0.5 log(2 pi v_i).
    // b_sum[s] accumulates sum_i log a_s[y_i].
    struct Stats {
        int n = 0;
        Mat j, h, q, a;  // S x F
        Vec b_sum;       // S
    };

    SequenceModel(SequenceConfig config, SequenceGlobals globals, Domain domain)
        : config_(std::move(config)), g_(std::move(globals)), domain_(std::move(domain)) {
        if (domain_.dim() != 1) throw std::invalid_argument("sequence: domain must be 1-D");
        if (config_.n_neurons < 1 || config_.n_types < 1)
            throw std::invalid_argument("sequence: need n_neurons, n_types >= 1");
        if (config_.warp_values.empty()) throw std::invalid_argument("sequence: empty warp grid");
        for (double t : config_.warp_values)
            if (!(t > 0.0)) throw std::invalid_argument("sequence: warp values must be > 0");
        check_simplex(g_.pi, config_.n_types, "pi");
        check_simplex(g_.a0, config_.n_neurons, "a0");
        if (g_.a.rows() != config_.n_types || g_.a.cols() != config_.n_neurons)
            throw std::invalid_argument("sequence: a must be S x Y");
        for (int s = 0; s < config_.n_types; ++s) {
            Vec row = g_.a.row(s);
            check_simplex(row, config_.n_neurons, "a_s");
        }
        if (g_.offset.rows() != config_.n_neurons || g_.offset.cols() != config_.n_types ||
            g_.width2.rows() != config_.n_neurons || g_.width2.cols() != config_.n_types)
            throw std::invalid_argument("sequence: offset/width2 must be Y x S");
        if ((g_.width2.array() <= 0.0).any())
            throw std::invalid_argument("sequence: widths must be positive");
    }

    const Domain& domain() const { return domain_; }
    const SequenceConfig& config() const { return config_; }
    const SequenceGlobals& globals() const { return g_; }
    int num_warps() const { return static_cast<int>(config_.warp_values.size()); }

    void validate_mark(const Mark& mark) const {
        if (mark.neuron < 0 || mark.neuron >= config_.n_neurons)
            throw std::domain_error("sequence: unknown neuron index");
    }

    Stats empty_stats() const {
        Stats s;
        const int f = num_warps();
        s.j = Mat::Zero(config_.n_types, f);
        s.h = Mat::Zero(config_.n_types, f);
        s.q = Mat::Zero(config_.n_types, f);
        s.a = Mat::Zero(config_.n_types, f);
        s.b_sum = Vec::Zero(config_.n_types);
        return s;
    }

    void add(Stats& st, const Point& p) const { accumulate(st, p, +1.0); }

    void remove(Stats& st, const Point& p) const {
        if (st.n <= 0) throw std::logic_error("sequence: remove from empty stats");
        accumulate(st, p, -1.0);
        if (st.n == 0) {
            st.j.setZero();
            st.h.setZero();
            st.q.setZero();
            st.a.setZero();
            st.b_sum.setZero();
        }
    }

    double log_marginal_new(const Point& p) const {
        validate_mark(p.mark);
        // sum_{s,f} pi_s (1/F) a_s[y] (1/T); the location integral is 1.
        const int y = p.mark.neuron;
        double mass = 0.0;
        for (int s = 0; s < config_.n_types; ++s) mass += g_.pi[s] * g_.a(s, y);
        return std::log(mass) - std::log(domain_.measure());
    }

    double log_predictive(const Stats& st, const Point& p) const {
        if (st.n == 0) return log_marginal_new(p);
        return log_evidence_with(st, &p) - log_evidence(st);
    }

    double log_evidence(const Stats& st) const {
        if (st.n == 0) return 0.0;
        return log_evidence_with(st, nullptr);
    }

    Params sample_posterior_params(const Stats& st, RngStream& rng) const {
        const int f_count = num_warps();
        if (st.n == 0) return sample_prior_params(rng);
        std::vector<double> lw(static_cast<std::size_t>(config_.n_types * f_count));
        for (int s = 0; s < config_.n_types; ++s)
            for (int f = 0; f < f_count; ++f)
                lw[static_cast<std::size_t>(s * f_count + f)] = component_log_evidence(st, s, f);
        const std::size_t pick = rng.categorical_log(lw);
        Params out;
        out.type = static_cast<int>(pick) / f_count;
        out.warp = static_cast<int>(pick) % f_count;
        const double j = st.j(out.type, out.warp);
        const double h = st.h(out.type, out.warp);
        out.m = rng.normal(h / j, std::sqrt(1.0 / j));
        return out;
    }

    Params sample_prior_params(RngStream& rng) const {
        Params out;
        out.type = static_cast<int>(rng.categorical(
            std::span<const double>(g_.pi.data(), static_cast<std::size_t>(g_.pi.size()))));
        if (num_warps() > 1) {
            out.warp = static_cast<int>(rng.uniform() * num_warps());
            if (out.warp >= num_warps()) out.warp = num_warps() - 1;
        }
        out.m = domain_.sample_uniform(rng)[0];
        return out;
    }

    double log_emission(const Params& params, const Point& p) const {
        const double tau = config_.warp_values[static_cast<std::size_t>(params.warp)];
        const int y = p.mark.neuron;
        return std::log(g_.a(params.type, y)) +
               normal_logpdf(p.x[0], params.m + tau * g_.offset(y, params.type),
                             tau * g_.width2(y, params.type));
    }

    Point sample_point(const Params& params, RngStream& rng, bool truncate = true) const {
        const double tau = config_.warp_values[static_cast<std::size_t>(params.warp)];
        const Vec row = g_.a.row(params.type);
        for (long attempt = 0;; ++attempt) {
            const int y = static_cast<int>(rng.categorical(
                std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))));
            const double mean = params.m + tau * g_.offset(y, params.type);
            const double sd = std::sqrt(tau * g_.width2(y, params.type));
            const double x = rng.normal(mean, sd);
            if (!truncate || (x >= domain_.lower()[0] && x <= domain_.upper()[0])) {
                Vec loc(1);
                loc << x;
                return Point{std::move(loc), Mark{y}};
            }
            if (attempt > 1000000)
                throw std::runtime_error("sequence: emission rejection did not terminate");
        }
    }

    double background_mark_log_density(const Mark& mark) const {
        validate_mark(mark);
        return std::log(g_.a0[mark.neuron]);
    }

    Mark sample_background_mark(RngStream& rng) const {
        return Mark{static_cast<int>(rng.categorical(
            std::span<const double>(g_.a0.data(), static_cast<std::size_t>(g_.a0.size()))))};
    }

    static int mark_group(const Mark& mark) { return mark.neuron; }

    double background_group_prob(int group) const {
        if (group < 0 || group >= config_.n_neurons) throw std::domain_error("bad neuron group");
        return g_.a0[group];
    }

    // P(x in [lo,hi], neuron group) under the emission.
    double emission_box_mass(const Params& params, const Vec& lo, const Vec& hi, int group) const {
        const double tau = config_.warp_values[static_cast<std::size_t>(params.warp)];
        auto mass_y = [&](int y) {
            return g_.a(params.type, y) *
                   normal_box_mass(lo[0], hi[0], params.m + tau * g_.offset(y, params.type),
                                   tau * g_.width2(y, params.type));
        };
        if (group >= 0) return mass_y(group);
        double total = 0.0;
        for (int y = 0; y < config_.n_neurons; ++y) total += mass_y(y);
        return total;
    }

    double emission_scale_hint() const {
        double max_tau = 0.0;
        for (double t : config_.warp_values) max_tau = std::max(max_tau, t);
        return std::sqrt(max_tau * g_.width2.maxCoeff()) +
               max_tau * g_.offset.cwiseAbs().maxCoeff();
    }

    // Gibbs updates for pi, a_s, (b, sigma^2) from sampled cluster params and
    // residuals, and for the background neuron distribution a0.
    template <class ClusterInfo>
    void resample_globals(const std::vector<ClusterInfo>& clusters,
                          const std::vector<const Point*>& background_points, RngStream& rng) {
        const int s_count = config_.n_types;
        const int y_count = config_.n_neurons;
        // pi | type counts
        std::vector<double> type_conc(static_cast<std::size_t>(s_count), config_.type_conc);
        for (const auto& c : clusters) type_conc[static_cast<std::size_t>(c.params.type)] += 1.0;
        std::vector<double> pi = rng.dirichlet(type_conc);
        for (int s = 0; s < s_count; ++s) g_.pi[s] = pi[static_cast<std::size_t>(s)];
        // a_s | neuron counts per type
        for (int s = 0; s < s_count; ++s) {
            std::vector<double> conc(static_cast<std::size_t>(y_count), config_.neuron_conc);
            for (const auto& c : clusters) {
                if (c.params.type != s) continue;
                for (const Point* p : c.members) conc[static_cast<std::size_t>(p->mark.neuron)] += 1.0;
            }
            std::vector<double> a = rng.dirichlet(conc);
            for (int y = 0; y < y_count; ++y) g_.a(s, y) = a[static_cast<std::size_t>(y)];
        }
        // (b, sigma^2) | warp-adjusted residuals. With u = (x - m)/tau we have
        // u ~ N(b, sigma^2/tau), a weighted normal with known weight tau.
        for (int s = 0; s < s_count; ++s) {
            for (int y = 0; y < y_count; ++y) {
                double w_sum = 0.0, wu_sum = 0.0, wuu_sum = 0.0;
                long n = 0;
                for (const auto& c : clusters) {
                    if (c.params.type != s) continue;
                    const double tau = config_.warp_values[static_cast<std::size_t>(c.params.warp)];
                    for (const Point* p : c.members) {
                        if (p->mark.neuron != y) continue;
                        const double u = (p->x[0] - c.params.m) / tau;
                        w_sum += tau;
                        wu_sum += tau * u;
                        wuu_sum += tau * u * u;
                        ++n;
                    }
                }
                const double kappa_n = config_.offset_kappa0 + w_sum;
                const double mu_n = (config_.offset_kappa0 * config_.offset_mean0 + wu_sum) / kappa_n;
                const double shape_n = config_.width_shape0 + 0.5 * static_cast<double>(n);
                const double scale_n =
                    config_.width_scale0 +
                    0.5 * (wuu_sum + config_.offset_kappa0 * config_.offset_mean0 * config_.offset_mean0 -
                           kappa_n * mu_n * mu_n);
                const double sigma2 = std::max(1.0 / rng.gamma(shape_n, std::max(scale_n, 1e-12)), 1e-12);
                g_.width2(y, s) = sigma2;
                g_.offset(y, s) = rng.normal(mu_n, std::sqrt(sigma2 / kappa_n));
            }
        }
        // a0 | background neuron counts
        std::vector<double> conc0(static_cast<std::size_t>(y_count), config_.bg_neuron_conc);
        for (const Point* p : background_points) conc0[static_cast<std::size_t>(p->mark.neuron)] += 1.0;
        std::vector<double> a0 = rng.dirichlet(conc0);
        for (int y = 0; y < y_count; ++y) g_.a0[y] = a0[static_cast<std::size_t>(y)];
    }

    SequenceGlobals& mutable_globals() { return g_; }

  private:
    static void check_simplex(const Vec& v, int expected, const char* name) {
        if (v.size() != expected) throw std::invalid_argument(std::string("sequence: bad size for ") + name);
        if ((v.array() < 0.0).any() || std::fabs(v.sum() - 1.0) > 1e-8)
            throw std::invalid_argument(std::string("sequence: not a probability vector: ") + name);
    }

    void accumulate(Stats& st, const Point& p, double sign) const {
        validate_mark(p.mark);
        const int y = p.mark.neuron;
        const double x = p.x[0];
        const int f_count = num_warps();
        for (int s = 0; s < config_.n_types; ++s) {
            for (int f = 0; f < f_count; ++f) {
                const double tau = config_.warp_values[static_cast<std::size_t>(f)];
                const double v = tau * g_.width2(y, s);
                const double c = tau * g_.offset(y, s);
                const double r = x - c;
                st.j(s, f) += sign / v;
                st.h(s, f) += sign * r / v;
                st.q(s, f) += sign * r * r / v;
                st.a(s, f) += sign * -0.5 * (kLog2Pi + std::log(v));
            }
            st.b_sum[s] += sign * std::log(g_.a(s, y));
        }
        st.n += sign > 0 ? 1 : -1;
    }

    // log [pi_s (1/F) exp(b_sum) (1/T) int prod_i N(x_i | m + c_i, v_i) dm],
    // the integral evaluating to exp(a - q/2 + h^2/(2j)) sqrt(2 pi / j).
    double component_term(int s, double j, double h, double q, double a, double b_sum) const {
        return std::log(g_.pi[s]) - std::log(static_cast<double>(num_warps())) + b_sum + a -
               0.5 * q + 0.5 * h * h / j + 0.5 * (kLog2Pi - std::log(j)) -
               std::log(domain_.measure());
    }

    double component_log_evidence(const Stats& st, int s, int f) const {
        return component_term(s, st.j(s, f), st.h(s, f), st.q(s, f), st.a(s, f), st.b_sum[s]);
    }

    // Evidence of the absorbed points, optionally with one more point folded in.
    double log_evidence_with(const Stats& st, const Point* extra) const {
        const int f_count = num_warps();
        int y = 0;
        double x = 0.0;
        if (extra) {
            validate_mark(extra->mark);
            y = extra->mark.neuron;
            x = extra->x[0];
        }
        std::vector<double> lw(static_cast<std::size_t>(config_.n_types * f_count));
        for (int s = 0; s < config_.n_types; ++s) {
            for (int f = 0; f < f_count; ++f) {
                double j = st.j(s, f), h = st.h(s, f), q = st.q(s, f), a = st.a(s, f);
                double b_sum = st.b_sum[s];
                if (extra) {
                    const double tau = config_.warp_values[static_cast<std::size_t>(f)];
                    const double v = tau * g_.width2(y, s);
                    const double r = x - tau * g_.offset(y, s);
                    j += 1.0 / v;
                    h += r / v;
                    q += r * r / v;
                    a += -0.5 * (kLog2Pi + std::log(v));
                    b_sum += std::log(g_.a(s, y));
                }
                lw[static_cast<std::size_t>(s * f_count + f)] = component_term(s, j, h, q, a, b_sum);
            }
        }
        return log_sum_exp(lw);
    }

    SequenceConfig config_;
    SequenceGlobals g_;
    Domain domain_;
};

}  // namespace nsp
