#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "nsp/domain.hpp"
#include "nsp/math.hpp"
#include "nsp/partition.hpp"

namespace nsp {

// Joint partition prior p(N, C) = V_{N,|C|} prod_k Gamma(|C_k|+alpha)/Gamma(alpha),
// with
//   V_{N,K} = (1/N!) (1/(1+beta))^N sum_{L>=K} Po(L|Lbar) L!/(L-K)! (beta/(1+beta))^{L alpha}.
//
// The series is summed with a relative-tolerance truncation: stop once the next
// term falls below truncation_tol times the running sum AND L exceeds
// Lbar + 10 sqrt(Lbar) + K, past which the Poisson factor dominates the decay.
// Results are memoized by (N, K); the memo is not safe for concurrent writes
// (use one table per thread).
class VCoefficientTable {
  public:
    VCoefficientTable(GammaWeightPrior prior, double lbar_value, double truncation_tol = 1e-12)
        : prior_(prior), lbar_(lbar_value), tol_(truncation_tol) {
        if (!(lbar_ >= 0.0)) throw std::invalid_argument("VCoefficientTable: lbar must be >= 0");
        if (!(tol_ > 0.0)) throw std::invalid_argument("VCoefficientTable: tolerance must be > 0");
    }

    VCoefficientTable(const GammaWeightPrior& prior, const Domain& domain, double truncation_tol = 1e-12)
        : VCoefficientTable(prior, lbar(prior, domain), truncation_tol) {}

    const GammaWeightPrior& prior() const { return prior_; }
    double lbar_value() const { return lbar_; }
    double truncation_tol() const { return tol_; }

    // Lemma-3 constant: log of V_{N,K+1} / V_{N,K} = Lbar (beta/(1+beta))^alpha.
    double log_v_ratio() const { return std::log(lbar_) + prior_.log_empty_prob(); }

    double log_v(int n, int k) const {
        if (k < 0 || n < 0 || k > n) throw std::domain_error("log_v: need 0 <= k <= n");
        const std::uint64_t key = (static_cast<std::uint64_t>(n) << 32) | static_cast<std::uint64_t>(k);
        auto it = memo_v_.find(key);
        if (it != memo_v_.end()) return it->second;
        double value = compute_log_v(n, k);
        memo_v_.emplace(key, value);
        return value;
    }

    // log p(N = n), the Poisson-mixed negative binomial of Theorem 1.
    double log_p_n(int n) const {
        if (n < 0) throw std::domain_error("log_p_n: need n >= 0");
        auto it = memo_pn_.find(n);
        if (it != memo_pn_.end()) return it->second;
        double value = compute_log_p_n(n);
        memo_pn_.emplace(n, value);
        return value;
    }

    struct LatentCountPosterior {
        std::vector<double> probs;  // P(L = l | N), l = 0..l_max
        bool tail_warning = false;  // mass beyond l_max exceeded the tolerance
    };

    // Unnormalized Schein posterior Po(L|Lbar) NB(N|L alpha, (1+beta)^-1), normalized over 0..l_max.
    LatentCountPosterior latent_count_posterior(int n, int l_max) const {
        if (n < 0 || l_max < 0) throw std::domain_error("latent_count_posterior: bad arguments");
        LatentCountPosterior out;
        std::vector<double> logs(static_cast<std::size_t>(l_max) + 1);
        for (int l = 0; l <= l_max; ++l) logs[static_cast<std::size_t>(l)] = log_joint_term(n, l);
        const double log_trunc = log_sum_exp(logs);
        // Extend past l_max to estimate the neglected tail mass.
        double log_tail = kNegInf;
        const double stop_after = lbar_ + 10.0 * std::sqrt(lbar_) +
                                  static_cast<double>(n) / prior_.alpha + 10.0;
        for (long l = static_cast<long>(l_max) + 1;; ++l) {
            const double t = log_joint_term(n, l);
            log_tail = log_add(log_tail, t);
            const double total = log_add(log_trunc, log_tail);
            if (t - total < std::log(tol_) && static_cast<double>(l) > stop_after) break;
            if (l > 2000000) throw std::runtime_error("latent_count_posterior: series did not converge");
        }
        const double log_total = log_add(log_trunc, log_tail);
        out.tail_warning = (log_tail - log_total) > std::log(tol_);
        out.probs.resize(logs.size());
        for (std::size_t i = 0; i < logs.size(); ++i) out.probs[i] = std::exp(logs[i] - log_trunc);
        // Normalize over the truncated support.
        double s = 0.0;
        for (double p : out.probs) s += p;
        for (double& p : out.probs) p /= s;
        return out;
    }

    // Schein posterior over L with adaptive support: extends until the tail
    // is below the truncation tolerance. probs[l] = P(L = l | N = n).
    // Memoized; the returned reference stays valid until clear().
    const std::vector<double>& schein_posterior(int n) const {
        if (n < 0) throw std::domain_error("schein_posterior: need n >= 0");
        auto it = memo_schein_.find(n);
        if (it != memo_schein_.end()) return it->second;
        return memo_schein_.emplace(n, compute_schein(n)).first->second;
    }

  private:
    std::vector<double> compute_schein(int n) const {
        if (lbar_ == 0.0) {
            if (n > 0) throw std::domain_error("schein_posterior: p(N) = 0 when lbar = 0");
            return {1.0};
        }
        const double stop_after = lbar_ + 10.0 * std::sqrt(lbar_) +
                                  static_cast<double>(n) / prior_.alpha + 10.0;
        std::vector<double> logs;
        double log_sum = kNegInf;
        for (long l = 0;; ++l) {
            const double t = log_joint_term(n, l);
            logs.push_back(t);
            log_sum = log_add(log_sum, t);
            if (t != kNegInf && t - log_sum < std::log(tol_) && static_cast<double>(l) > stop_after)
                break;
            if (l > 2000000) throw std::runtime_error("schein_posterior: series did not converge");
        }
        if (log_sum == kNegInf) throw std::domain_error("schein_posterior: zero-probability N");
        std::vector<double> probs(logs.size());
        double s = 0.0;
        for (std::size_t i = 0; i < logs.size(); ++i) s += probs[i] = std::exp(logs[i] - log_sum);
        for (double& p : probs) p /= s;
        return probs;
    }

  public:
    void clear() {
        memo_v_.clear();
        memo_pn_.clear();
        memo_schein_.clear();
    }

  private:
    // One series term: log Po(L|Lbar) + log L!/(L-K)! + L alpha log(beta/(1+beta)).
    double log_series_term(long l, int k) const {
        if (l < k) return kNegInf;
        if (lbar_ == 0.0) return l == 0 ? 0.0 : kNegInf;
        return -lbar_ + static_cast<double>(l) * (std::log(lbar_) + prior_.log_empty_prob()) -
               std::lgamma(static_cast<double>(l - k) + 1.0);
    }

    double compute_log_v(int n, int k) const {
        const double lead = -std::lgamma(static_cast<double>(n) + 1.0) -
                            static_cast<double>(n) * std::log1p(prior_.beta);
        if (lbar_ == 0.0) return k == 0 ? lead : kNegInf;
        const double stop_after = lbar_ + 10.0 * std::sqrt(lbar_) + static_cast<double>(k);
        double log_sum = kNegInf;
        for (long l = k;; ++l) {
            const double t = log_series_term(l, k);
            log_sum = log_add(log_sum, t);
            if (t - log_sum < std::log(tol_) && static_cast<double>(l) > stop_after) break;
            if (l - k > 2000000) throw std::runtime_error("log_v: series did not converge");
        }
        return lead + log_sum;
    }

    double log_joint_term(int n, long l) const {
        const double log_po = log_poisson_pmf(l, lbar_);
        if (log_po == kNegInf) return kNegInf;
        return log_po + log_neg_binomial_pmf(n, static_cast<double>(l) * prior_.alpha,
                                             1.0 / (1.0 + prior_.beta));
    }

    double compute_log_p_n(int n) const {
        if (lbar_ == 0.0) return n == 0 ? 0.0 : kNegInf;
        const double stop_after = lbar_ + 10.0 * std::sqrt(lbar_) +
                                  static_cast<double>(n) / prior_.alpha + 10.0;
        double log_sum = kNegInf;
        for (long l = 0;; ++l) {
            const double t = log_joint_term(n, l);
            log_sum = log_add(log_sum, t);
            if (t != kNegInf && t - log_sum < std::log(tol_) && static_cast<double>(l) > stop_after)
                break;
            if (l > 2000000) throw std::runtime_error("log_p_n: series did not converge");
        }
        return log_sum;
    }

    GammaWeightPrior prior_;
    double lbar_;
    double tol_;
    mutable std::unordered_map<std::uint64_t, double> memo_v_;
    mutable std::unordered_map<int, double> memo_pn_;
    mutable std::unordered_map<int, std::vector<double>> memo_schein_;
};

// log p(N, C) for a partition with no background block (Theorem 1).
inline double log_eppf(const Partition& partition, const VCoefficientTable& table) {
    if (!partition.background.empty())
        throw std::logic_error("log_eppf: partition has a background block; use log_eppf_with_background");
    const double alpha = table.prior().alpha;
    double lp = table.log_v(partition.n_total, partition.num_clusters());
    for (const auto& c : partition.clusters)
        lp += std::lgamma(static_cast<double>(c.size()) + alpha) - std::lgamma(alpha);
    return lp;
}

// log p(N, C0, C) with an additive background of integrated intensity w0 (Theorem 4).
inline double log_eppf_with_background(const Partition& partition, const VCoefficientTable& table,
                                       double w0) {
    if (!(w0 >= 0.0)) throw std::invalid_argument("log_eppf_with_background: need w0 >= 0");
    const double alpha = table.prior().alpha;
    const int n = partition.n_total;
    const int n0 = static_cast<int>(partition.background.size());
    const int n_rest = n - n0;
    double lp = std::lgamma(static_cast<double>(n_rest) + 1.0) -
                std::lgamma(static_cast<double>(n) + 1.0) - w0;
    if (n0 > 0) {
        if (w0 == 0.0) return kNegInf;
        lp += static_cast<double>(n0) * std::log(w0);
    }
    lp += table.log_v(n_rest, partition.num_clusters());
    for (const auto& c : partition.clusters)
        lp += std::lgamma(static_cast<double>(c.size()) + alpha) - std::lgamma(alpha);
    return lp;
}

// alpha -> 0, alpha Lbar (beta/(1+beta))^alpha -> gamma limit of Theorem 1:
// p(N, C) -> (1/N!) (1+beta)^-N (beta/(1+beta))^gamma gamma^K prod_k (|C_k|-1)!.
// Used so Gibbs traces stay well defined when fitting in the DPMM limit.
inline double log_eppf_dpmm_limit(const Partition& partition, double gamma, double beta) {
    if (!partition.background.empty())
        throw std::logic_error("log_eppf_dpmm_limit: partition has a background block");
    double lp = -std::lgamma(static_cast<double>(partition.n_total) + 1.0) -
                static_cast<double>(partition.n_total) * std::log1p(beta) +
                gamma * (std::log(beta) - std::log1p(beta)) +
                static_cast<double>(partition.num_clusters()) * std::log(gamma);
    for (const auto& c : partition.clusters) lp += std::lgamma(static_cast<double>(c.size()));
    return lp;
}

inline double log_eppf_dpmm_limit_with_background(const Partition& partition, double gamma,
                                                  double beta, double w0) {
    if (!(w0 >= 0.0)) throw std::invalid_argument("need w0 >= 0");
    const int n = partition.n_total;
    const int n0 = static_cast<int>(partition.background.size());
    Partition rest = partition;
    rest.background.clear();
    rest.n_total = n - n0;
    double lp = std::lgamma(static_cast<double>(n - n0) + 1.0) -
                std::lgamma(static_cast<double>(n) + 1.0) - w0;
    if (n0 > 0) {
        if (w0 == 0.0) return kNegInf;
        lp += static_cast<double>(n0) * std::log(w0);
    }
    return lp + log_eppf_dpmm_limit(rest, gamma, beta);
}

}  // namespace nsp
