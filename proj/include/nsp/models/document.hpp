#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "nsp/domain.hpp"
#include "nsp/math.hpp"
#include "nsp/rng.hpp"

namespace nsp {

// Event detection in document streams on [0, T]. A document has a timestamp,
// an author, and a sparse word-count vector. Latent events carry a time, an
// author distribution theta^(a) ~ Dir(alpha_a) and per-word Poisson rates
// theta^(c)_v ~ Ga(alpha_c, beta_c); emission times are N(x | m, sigma^2)
// with a fixed global width. The background has author-specific word rates
// phi_{a,v} and an author distribution theta0.
struct DocumentConfig {
    int n_authors = 1;
    int vocab_size = 1;
    double time_width = 1.0;    // sigma, days
    double author_conc = 1.0;   // alpha_a (symmetric Dirichlet)
    double word_shape = 1.0;    // alpha_c
    double word_rate = 1.0;     // beta_c
    double bg_author_conc = 1.0;
    double bg_word_shape = 1.0;
    double bg_word_rate = 1.0;
};

struct DocumentGlobals {
    Vec theta0;  // background author distribution, length A
    Mat phi;     // background word rates, A x V

    static DocumentGlobals flat(const DocumentConfig& c, double bg_rate_per_word = 0.1) {
        DocumentGlobals g;
        g.theta0 = Vec::Constant(c.n_authors, 1.0 / c.n_authors);
        g.phi = Mat::Constant(c.n_authors, c.vocab_size, bg_rate_per_word);
        return g;
    }
};

class DocumentModel {
  public:
    struct Mark {
        int author = 0;
        std::vector<std::pair<int, long>> words;  // sorted (index, count > 0)
    };
    using Point = MarkedPoint<Mark>;

    struct Params {
        double m = 0.0;
        Vec author_probs;
        Vec word_rates;
    };

    struct Stats {
        int n = 0;
        double sum_x = 0.0;
        double sum_x2 = 0.0;
        double sum_log_count_fact = 0.0;           // sum_i sum_v log y_iv!
        std::vector<long> author_counts;           // dense, length A
        std::unordered_map<int, long> word_sums;   // sparse; zero entries erased
    };

    DocumentModel(DocumentConfig config, DocumentGlobals globals, Domain domain)
        : config_(std::move(config)), g_(std::move(globals)), domain_(std::move(domain)) {
        if (domain_.dim() != 1) throw std::invalid_argument("document: domain must be 1-D");
        if (config_.n_authors < 1 || config_.vocab_size < 1)
            throw std::invalid_argument("document: need n_authors, vocab_size >= 1");
        if (!(config_.time_width > 0.0) || !(config_.author_conc > 0.0) ||
            !(config_.word_shape > 0.0) || !(config_.word_rate > 0.0) ||
            !(config_.bg_author_conc > 0.0) || !(config_.bg_word_shape > 0.0) ||
            !(config_.bg_word_rate > 0.0))
            throw std::invalid_argument("document: all hyperparameters must be positive");
        if (g_.theta0.size() != config_.n_authors || g_.phi.rows() != config_.n_authors ||
            g_.phi.cols() != config_.vocab_size)
            throw std::invalid_argument("document: globals shape mismatch");
        refresh_phi_rows();
    }

    const Domain& domain() const { return domain_; }
    const DocumentConfig& config() const { return config_; }
    const DocumentGlobals& globals() const { return g_; }

    void validate_mark(const Mark& mark) const {
        if (mark.author < 0 || mark.author >= config_.n_authors)
            throw std::domain_error("document: unknown author index");
        int prev = -1;
        for (const auto& [v, c] : mark.words) {
            if (v < 0 || v >= config_.vocab_size) throw std::domain_error("document: word index out of range");
            if (v <= prev) throw std::domain_error("document: word indices must be sorted and unique");
            if (c <= 0) throw std::domain_error("document: word counts must be positive");
            prev = v;
        }
    }

    Stats empty_stats() const {
        Stats s;
        s.author_counts.assign(static_cast<std::size_t>(config_.n_authors), 0);
        return s;
    }

    void add(Stats& s, const Point& p) const {
        validate_mark(p.mark);
        ++s.n;
        s.sum_x += p.x[0];
        s.sum_x2 += p.x[0] * p.x[0];
        ++s.author_counts[static_cast<std::size_t>(p.mark.author)];
        for (const auto& [v, c] : p.mark.words) {
            s.word_sums[v] += c;
            s.sum_log_count_fact += std::lgamma(static_cast<double>(c) + 1.0);
        }
    }

    void remove(Stats& s, const Point& p) const {
        if (s.n <= 0) throw std::logic_error("document: remove from empty stats");
        --s.n;
        s.sum_x -= p.x[0];
        s.sum_x2 -= p.x[0] * p.x[0];
        --s.author_counts[static_cast<std::size_t>(p.mark.author)];
        for (const auto& [v, c] : p.mark.words) {
            auto it = s.word_sums.find(v);
            if (it == s.word_sums.end() || it->second < c)
                throw std::logic_error("document: removing counts never added");
            it->second -= c;
            if (it->second == 0) s.word_sums.erase(it);
            s.sum_log_count_fact -= std::lgamma(static_cast<double>(c) + 1.0);
        }
        if (s.n == 0) {
            s.sum_x = 0.0;
            s.sum_x2 = 0.0;
            s.sum_log_count_fact = 0.0;
        }
    }

    double log_marginal_new(const Point& p) const { return log_predictive(empty_stats(), p); }

    double log_predictive(const Stats& s, const Point& p) const {
        validate_mark(p.mark);
        const double n = static_cast<double>(s.n);
        double lp;
        // Time: flat-prior posterior m ~ N(xbar, sigma^2/n); marginal keeps 1/T.
        if (s.n == 0) {
            lp = -std::log(domain_.measure());
        } else {
            const double xbar = s.sum_x / n;
            lp = normal_logpdf(p.x[0], xbar, config_.time_width * config_.time_width * (1.0 + 1.0 / n));
        }
        // Author: Dirichlet-multinomial.
        const double ac = config_.author_conc;
        lp += std::log(ac + static_cast<double>(s.author_counts[static_cast<std::size_t>(p.mark.author)])) -
              std::log(static_cast<double>(config_.n_authors) * ac + n);
        // Words: per-word negative binomial with posterior (alpha_c + s_v, beta_c + n).
        const double bpost = config_.word_rate + n;
        const double log_p = -std::log1p(bpost);          // log 1/(1+beta')
        const double log_1mp = std::log(bpost) - std::log1p(bpost);
        // Words untouched by both the cluster and the document:
        const double base = config_.word_shape * log_1mp;
        long overlap = 0;
        for (const auto& [v, c] : p.mark.words) {
            auto it = s.word_sums.find(v);
            const double r = config_.word_shape + static_cast<double>(it == s.word_sums.end() ? 0 : it->second);
            if (it != s.word_sums.end()) ++overlap;
            lp += std::lgamma(static_cast<double>(c) + r) - std::lgamma(r) -
                  std::lgamma(static_cast<double>(c) + 1.0) + r * log_1mp +
                  static_cast<double>(c) * log_p;
        }
        // Cluster-touched words absent from this document: NB(0 | r_v, p).
        for (const auto& [v, sv] : s.word_sums) {
            if (std::binary_search(p.mark.words.begin(), p.mark.words.end(), std::make_pair(v, 0L),
                                   [](const auto& a, const auto& b) { return a.first < b.first; }))
                continue;
            lp += (config_.word_shape + static_cast<double>(sv)) * log_1mp;
        }
        const long untouched = config_.vocab_size - static_cast<long>(s.word_sums.size()) -
                               (static_cast<long>(p.mark.words.size()) - overlap);
        lp += static_cast<double>(untouched) * base;
        return lp;
    }

    double log_evidence(const Stats& s) const {
        if (s.n == 0) return 0.0;
        const double n = static_cast<double>(s.n);
        const double sigma2 = config_.time_width * config_.time_width;
        // Time: (1/T) (2 pi sigma^2)^{-(n-1)/2} n^{-1/2} exp(-ssd / (2 sigma^2)).
        const double ssd = s.sum_x2 - s.sum_x * s.sum_x / n;
        double lp = -std::log(domain_.measure()) -
                    0.5 * (n - 1.0) * (kLog2Pi + std::log(sigma2)) - 0.5 * std::log(n) -
                    0.5 * ssd / sigma2;
        // Author: Dirichlet-multinomial evidence.
        const double ac = config_.author_conc;
        lp += std::lgamma(static_cast<double>(config_.n_authors) * ac) -
              std::lgamma(static_cast<double>(config_.n_authors) * ac + n);
        for (long cnt : s.author_counts)
            if (cnt > 0) lp += std::lgamma(ac + static_cast<double>(cnt)) - std::lgamma(ac);
        // Words: gamma-Poisson evidence; untouched words contribute the bulk term.
        const double a_c = config_.word_shape, b_c = config_.word_rate;
        const double base = a_c * (std::log(b_c) - std::log(b_c + n));
        lp += static_cast<double>(config_.vocab_size - static_cast<long>(s.word_sums.size())) * base;
        for (const auto& [v, sv] : s.word_sums) {
            lp += std::lgamma(a_c + static_cast<double>(sv)) - std::lgamma(a_c) + a_c * std::log(b_c) -
                  (a_c + static_cast<double>(sv)) * std::log(b_c + n);
        }
        lp -= s.sum_log_count_fact;
        return lp;
    }

    Params sample_posterior_params(const Stats& s, RngStream& rng) const {
        Params out;
        if (s.n == 0) return sample_prior_params(rng);
        const double n = static_cast<double>(s.n);
        const double sigma2 = config_.time_width * config_.time_width;
        out.m = rng.normal(s.sum_x / n, std::sqrt(sigma2 / n));
        std::vector<double> conc(static_cast<std::size_t>(config_.n_authors), config_.author_conc);
        for (int a = 0; a < config_.n_authors; ++a)
            conc[static_cast<std::size_t>(a)] += static_cast<double>(s.author_counts[static_cast<std::size_t>(a)]);
        std::vector<double> ap = rng.dirichlet(conc);
        out.author_probs = Eigen::Map<Vec>(ap.data(), static_cast<Eigen::Index>(ap.size()));
        out.word_rates = Vec(config_.vocab_size);
        for (int v = 0; v < config_.vocab_size; ++v) {
            auto it = s.word_sums.find(v);
            const double sv = it == s.word_sums.end() ? 0.0 : static_cast<double>(it->second);
            out.word_rates[v] = rng.gamma(config_.word_shape + sv, config_.word_rate + n);
        }
        return out;
    }

    Params sample_prior_params(RngStream& rng) const {
        Params out;
        out.m = domain_.sample_uniform(rng)[0];
        std::vector<double> conc(static_cast<std::size_t>(config_.n_authors), config_.author_conc);
        std::vector<double> ap = rng.dirichlet(conc);
        out.author_probs = Eigen::Map<Vec>(ap.data(), static_cast<Eigen::Index>(ap.size()));
        out.word_rates = Vec(config_.vocab_size);
        for (int v = 0; v < config_.vocab_size; ++v)
            out.word_rates[v] = rng.gamma(config_.word_shape, config_.word_rate);
        return out;
    }

    double log_emission(const Params& params, const Point& p) const {
        double lp = normal_logpdf(p.x[0], params.m, config_.time_width * config_.time_width) +
                    std::log(params.author_probs[p.mark.author]);
        for (const auto& [v, c] : p.mark.words)
            lp += static_cast<double>(c) * std::log(params.word_rates[v]) -
                  std::lgamma(static_cast<double>(c) + 1.0);
        lp -= params.word_rates.sum();
        return lp;
    }

    Point sample_point(const Params& params, RngStream& rng, bool truncate = true) const {
        for (long attempt = 0;; ++attempt) {
            const double x = rng.normal(params.m, config_.time_width);
            if (truncate && !(x >= domain_.lower()[0] && x <= domain_.upper()[0])) {
                if (attempt > 1000000)
                    throw std::runtime_error("document: emission rejection did not terminate");
                continue;
            }
            Mark mark;
            mark.author = static_cast<int>(rng.categorical(std::span<const double>(
                params.author_probs.data(), static_cast<std::size_t>(params.author_probs.size()))));
            for (int v = 0; v < config_.vocab_size; ++v) {
                const long c = rng.poisson(params.word_rates[v]);
                if (c > 0) mark.words.emplace_back(v, c);
            }
            Vec loc(1);
            loc << x;
            return Point{std::move(loc), std::move(mark)};
        }
    }

    double background_mark_log_density(const Mark& mark) const {
        validate_mark(mark);
        const int a = mark.author;
        double lp = std::log(g_.theta0[a]) - phi_row_sum_[static_cast<std::size_t>(a)];
        for (const auto& [v, c] : mark.words)
            lp += static_cast<double>(c) * std::log(g_.phi(a, v)) -
                  std::lgamma(static_cast<double>(c) + 1.0);
        return lp;
    }

    Mark sample_background_mark(RngStream& rng) const {
        Mark mark;
        mark.author = static_cast<int>(rng.categorical(std::span<const double>(
            g_.theta0.data(), static_cast<std::size_t>(g_.theta0.size()))));
        for (int v = 0; v < config_.vocab_size; ++v) {
            const long c = rng.poisson(g_.phi(mark.author, v));
            if (c > 0) mark.words.emplace_back(v, c);
        }
        return mark;
    }

    static int mark_group(const Mark& mark) { return mark.author; }

    double background_group_prob(int group) const {
        if (group < 0 || group >= config_.n_authors) throw std::domain_error("bad author group");
        return g_.theta0[group];
    }

    double emission_box_mass(const Params& params, const Vec& lo, const Vec& hi, int group) const {
        const double time_mass =
            normal_box_mass(lo[0], hi[0], params.m, config_.time_width * config_.time_width);
        if (group >= 0) return params.author_probs[group] * time_mass;
        return time_mass;
    }

    double emission_scale_hint() const { return config_.time_width; }

    template <class ClusterInfo>
    void resample_globals(const std::vector<ClusterInfo>&,
                          const std::vector<const Point*>& background_points, RngStream& rng) {
        // theta0 | background author counts
        std::vector<double> conc(static_cast<std::size_t>(config_.n_authors), config_.bg_author_conc);
        std::vector<long> doc_counts(static_cast<std::size_t>(config_.n_authors), 0);
        Mat word_counts = Mat::Zero(config_.n_authors, config_.vocab_size);
        for (const Point* p : background_points) {
            conc[static_cast<std::size_t>(p->mark.author)] += 1.0;
            ++doc_counts[static_cast<std::size_t>(p->mark.author)];
            for (const auto& [v, c] : p->mark.words)
                word_counts(p->mark.author, v) += static_cast<double>(c);
        }
        std::vector<double> t0 = rng.dirichlet(conc);
        for (int a = 0; a < config_.n_authors; ++a) g_.theta0[a] = t0[static_cast<std::size_t>(a)];
        // phi_{a,v} | background word counts
        for (int a = 0; a < config_.n_authors; ++a)
            for (int v = 0; v < config_.vocab_size; ++v)
                g_.phi(a, v) = rng.gamma(config_.bg_word_shape + word_counts(a, v),
                                         config_.bg_word_rate + static_cast<double>(doc_counts[static_cast<std::size_t>(a)]));
        refresh_phi_rows();
    }

    DocumentGlobals& mutable_globals() { return g_; }
    void refresh_phi_rows() {
        phi_row_sum_.resize(static_cast<std::size_t>(config_.n_authors));
        for (int a = 0; a < config_.n_authors; ++a) phi_row_sum_[static_cast<std::size_t>(a)] = g_.phi.row(a).sum();
    }

  private:
    DocumentConfig config_;
    DocumentGlobals g_;
    Domain domain_;
    std::vector<double> phi_row_sum_;
};

}  // namespace nsp
