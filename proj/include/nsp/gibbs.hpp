#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "nsp/domain.hpp"
#include "nsp/mask.hpp"
#include "nsp/math.hpp"
#include "nsp/partition.hpp"
#include "nsp/rng.hpp"
#include "nsp/vcoeff.hpp"

namespace nsp {

enum class SamplerMode { nsp, dpmm_limit };

// Annealing: the weight-prior mean alpha/beta is held fixed while its
// variance is scaled by a temperature that relaxes exponentially to one,
// i.e. (alpha, beta) -> (alpha/T, beta/T) per stage.
struct AnnealSchedule {
    int stages = 0;
    int sweeps_per_stage = 0;
    double initial_temperature = 1.0;

    double temperature(int stage) const {
        if (stages <= 1) return 1.0;
        const double frac = static_cast<double>(stage) / static_cast<double>(stages - 1);
        return std::pow(initial_temperature, 1.0 - frac);
    }

    static AnnealSchedule none() { return {}; }
};

struct HyperPriors {
    double nu_shape = 1.0, nu_rate = 1.0;      // Ga prior on the latent event rate
    double beta_shape = 1.0, beta_rate = 1.0;  // Ga prior on the weight rate beta
};

struct GibbsOptions {
    SamplerMode mode = SamplerMode::nsp;
    double dpmm_gamma = 1.0;

    bool step4 = true;               // hyperparameter moves (Algorithm step 4)
    bool resample_globals = true;    // model p(m, theta) hyperparameters
    bool resample_rate = true;       // latent event rate nu_bar
    bool resample_beta = true;       // weight rate beta (suppressed while annealed)
    bool resample_background = true; // background rate lambda0
    bool mh_alpha = false;           // optional random-walk MH on log alpha
    double mh_alpha_step = 0.25;

    bool random_scan = false;        // fixed index order by default (determinism)
    bool rescale_lbar_per_shard = false;
    int audit_interval = 100;
    double warmup_fraction = 0.5;
    bool record_latents = true;
    HyperPriors hyper;
};

template <class Model>
struct ChainSample {
    int sweep = 0;
    std::vector<int> z;  // canonical labels, 0 = background
    int n_clusters = 0;
    double background_rate = 0.0;
    double nu_bar = 0.0;
    double beta = 0.0;
    double alpha = 0.0;
    double joint_log_density = 0.0;
    std::vector<LatentEvent<typename Model::Params>> latents;  // cluster order = labels 1..K
};

template <class Model>
struct ChainRecord {
    std::vector<ChainSample<Model>> samples;
};

// Collapsed Gibbs sampler operating on the partition, marginalizing latent
// events. One instance owns one chain; shards partition the points and each
// shard keeps private clusters (a point can only join clusters of its own
// shard). A single whole-domain shard is the sequential algorithm.
template <class Model>
class CollapsedGibbsSampler {
  public:
    using Point = typename Model::Point;
    using Params = typename Model::Params;
    using Stats = typename Model::Stats;

    CollapsedGibbsSampler(Model model, GammaWeightPrior prior, BackgroundRate background,
                          GibbsOptions options, std::vector<Point> points,
                          std::vector<std::vector<int>> shard_points, RngStream rng,
                          SpeckledMask mask = {})
        : model_(std::move(model)),
          prior_(prior),
          target_prior_(prior),
          bg_(background),
          options_(options),
          points_(std::move(points)),
          mask_(std::move(mask)),
          global_rng_(rng.substream(0x67lu)) {
        mask_.validate(model_.domain());
        for (const auto& p : points_) {
            if (!model_.domain().contains(p.x))
                throw std::invalid_argument("gibbs: point outside the domain");
            model_.validate_mark(p.mark);
        }
        if (shard_points.empty()) throw std::invalid_argument("gibbs: need at least one shard");
        std::vector<char> seen(points_.size(), 0);
        shards_.resize(shard_points.size());
        for (std::size_t s = 0; s < shard_points.size(); ++s) {
            shards_[s].point_ids = std::move(shard_points[s]);
            shards_[s].rng = rng.substream(0x5000lu + s);
            for (int i : shards_[s].point_ids) {
                if (i < 0 || i >= static_cast<int>(points_.size()) || seen[static_cast<std::size_t>(i)])
                    throw std::invalid_argument("gibbs: shard point lists must partition the dataset");
                seen[static_cast<std::size_t>(i)] = 1;
            }
        }
        for (char c : seen)
            if (!c) throw std::invalid_argument("gibbs: shard point lists must partition the dataset");
        // Algorithm start: all points in the background.
        z_.assign(points_.size(), kBackground);
        for (auto& shard : shards_) shard.n_bg = static_cast<long>(shard.point_ids.size());
    }

    // Anneal, then draw n_samples sweeps, recording the post-warmup tail.
    ChainRecord<Model> run(const AnnealSchedule& schedule, int n_samples, bool use_threads = false) {
        ChainRecord<Model> record;
        int sweep_index = 0;
        for (int stage = 0; stage < schedule.stages; ++stage) {
            const double t = schedule.temperature(stage);
            prior_.alpha = target_prior_.alpha / t;
            prior_.beta = target_prior_.beta / t;
            annealed_ = t > 1.0;
            for (int i = 0; i < schedule.sweeps_per_stage; ++i) sweep(sweep_index++, use_threads);
        }
        prior_.alpha = target_prior_.alpha;
        prior_.beta = target_prior_.beta;
        annealed_ = false;
        const int warmup = static_cast<int>(std::floor(options_.warmup_fraction * n_samples));
        for (int i = 0; i < n_samples; ++i) {
            sweep(sweep_index++, use_threads);
            if (i >= warmup) record.samples.push_back(snapshot(sweep_index - 1));
        }
        return record;
    }

    void sweep(int sweep_index, bool use_threads = false) {
        sweep_assignments(use_threads);
        if (options_.resample_background)
            bg_.rate = resample_background_rate(bg_, background_count(), effective_measure(), global_rng_);
        resample_latent_events();
        if (options_.step4) {
            if (options_.resample_globals) resample_model_globals();
            if (options_.mode == SamplerMode::nsp) resample_hyperparameters();
        }
        if (options_.audit_interval > 0 && (sweep_index + 1) % options_.audit_interval == 0) audit();
    }

    void sweep_assignments(bool use_threads = false) {
        if (use_threads && shards_.size() > 1) {
            std::vector<std::thread> workers;
            workers.reserve(shards_.size());
            for (auto& shard : shards_)
                workers.emplace_back([this, &shard] { sweep_shard(shard); });
            for (auto& w : workers) w.join();
        } else if (use_threads && shards_.size() == 1) {
            std::thread worker([this] { sweep_shard(shards_[0]); });
            worker.join();
        } else {
            for (auto& shard : shards_) sweep_shard(shard);
        }
        for (auto& shard : shards_) {
            for (int id : shard.freed_this_sweep) shard.free_slots.push_back(id);
            shard.freed_this_sweep.clear();
        }
    }

    // Sample (m_k, theta_k) and w_k ~ Ga(alpha + |C_k|, beta + 1) per cluster.
    void resample_latent_events() {
        latents_.clear();
        for (std::size_t s = 0; s < shards_.size(); ++s) {
            for (std::size_t id = 0; id < shards_[s].slots.size(); ++id) {
                auto& slot = shards_[s].slots[id];
                if (!slot.live) continue;
                const double shape = options_.mode == SamplerMode::nsp
                                         ? prior_.alpha + static_cast<double>(slot.size)
                                         : static_cast<double>(slot.size);
                LatentDraw draw;
                draw.shard = static_cast<int>(s);
                draw.slot = static_cast<int>(id);
                draw.params = model_.sample_posterior_params(slot.stats, global_rng_);
                draw.w = global_rng_.gamma(shape, prior_.beta + 1.0);
                latents_.push_back(std::move(draw));
            }
        }
    }

    // Step 4: E ~ Po(Lbar x), L = |C| + E, nu | L, empty weights, beta | weights.
    void resample_hyperparameters() {
        const double lbar_v = lbar(prior_, model_.domain());
        const long empties = global_rng_.poisson(lbar_v * std::exp(prior_.log_empty_prob()));
        const long l_total = total_clusters() + empties;
        if (options_.resample_rate) {
            prior_.nu_bar = global_rng_.gamma(options_.hyper.nu_shape + static_cast<double>(l_total),
                                              options_.hyper.nu_rate + model_.domain().measure());
            target_prior_.nu_bar = prior_.nu_bar;
        }
        std::vector<double> empty_w(static_cast<std::size_t>(empties));
        for (double& w : empty_w) w = global_rng_.gamma(prior_.alpha, prior_.beta + 1.0);
        if (options_.resample_beta && !annealed_) {
            double w_sum = 0.0;
            for (const auto& d : latents_) w_sum += d.w;
            for (double w : empty_w) w_sum += w;
            prior_.beta = global_rng_.gamma(options_.hyper.beta_shape + static_cast<double>(l_total) * prior_.alpha,
                                            options_.hyper.beta_rate + w_sum);
            target_prior_.beta = prior_.beta;
        }
        if (options_.mh_alpha && !annealed_) mh_alpha_move(empty_w);
    }

    // Collapsed joint p(N, C0, C, data) at the current state; assembled from
    // the background partition prior, per-cluster marginal likelihoods, and
    // background point densities (normalized per unit background mass).
    double joint_log_density() const {
        const Partition partition = current_partition();
        const double w0 = bg_.rate * effective_measure();
        double lp;
        if (options_.mode == SamplerMode::nsp) {
            VCoefficientTable table(prior_, lbar(prior_, model_.domain()));
            lp = log_eppf_with_background(partition, table, w0);
        } else {
            lp = log_eppf_dpmm_limit_with_background(partition, options_.dpmm_gamma, prior_.beta, w0);
        }
        const long n0 = static_cast<long>(partition.background.size());
        if (n0 > 0) {
            if (bg_.rate == 0.0) return kNegInf;
            lp += static_cast<double>(n0) * (std::log(bg_.rate) - std::log(w0));
            for (int i : partition.background)
                lp += model_.background_mark_log_density(points_[static_cast<std::size_t>(i)].mark);
        }
        for (const auto& shard : shards_)
            for (const auto& slot : shard.slots)
                if (slot.live) lp += model_.log_evidence(slot.stats);
        return lp;
    }

    // Rebuilds every cluster's statistics from scratch, verifies agreement,
    // and swaps in the fresh accumulators to arrest float drift.
    void audit() {
        std::vector<long> sizes;
        for (auto& shard : shards_) {
            std::vector<Stats> rebuilt(shard.slots.size());
            std::vector<int> counts(shard.slots.size(), 0);
            for (auto& s : rebuilt) s = model_.empty_stats();
            for (int i : shard.point_ids) {
                const int zi = z_[static_cast<std::size_t>(i)];
                if (zi == kBackground) continue;
                if (zi < 0 || zi >= static_cast<int>(shard.slots.size()) ||
                    !shard.slots[static_cast<std::size_t>(zi)].live)
                    throw std::runtime_error("gibbs audit: dangling assignment");
                model_.add(rebuilt[static_cast<std::size_t>(zi)], points_[static_cast<std::size_t>(i)]);
                ++counts[static_cast<std::size_t>(zi)];
            }
            for (std::size_t id = 0; id < shard.slots.size(); ++id) {
                auto& slot = shard.slots[id];
                if (!slot.live) continue;
                if (counts[id] != slot.size) throw std::runtime_error("gibbs audit: size mismatch");
                const double drift =
                    std::fabs(model_.log_evidence(slot.stats) - model_.log_evidence(rebuilt[id]));
                if (drift > 1e-6) throw std::runtime_error("gibbs audit: sufficient statistics drifted");
                slot.stats = std::move(rebuilt[id]);
            }
        }
    }

    ChainSample<Model> snapshot(int sweep_index) const {
        ChainSample<Model> s;
        s.sweep = sweep_index;
        const Partition partition = current_partition();
        s.z = partition.to_labels();
        s.n_clusters = partition.num_clusters();
        s.background_rate = bg_.rate;
        s.nu_bar = prior_.nu_bar;
        s.beta = prior_.beta;
        s.alpha = prior_.alpha;
        s.joint_log_density = joint_log_density();
        if (options_.record_latents) {
            // Canonical cluster order: by minimum member index.
            std::vector<std::pair<int, const LatentDraw*>> order;
            for (const auto& d : latents_) {
                int min_member = std::numeric_limits<int>::max();
                for (int i : shards_[static_cast<std::size_t>(d.shard)].point_ids)
                    if (z_[static_cast<std::size_t>(i)] == d.slot && i < min_member) min_member = i;
                order.emplace_back(min_member, &d);
            }
            std::sort(order.begin(), order.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            for (const auto& [min_member, d] : order) {
                LatentEvent<Params> e;
                e.params = d->params;
                e.m = latent_location(d->params);
                e.w = d->w;
                s.latents.push_back(std::move(e));
            }
        }
        return s;
    }

    Partition current_partition() const {
        Partition p;
        p.n_total = static_cast<int>(points_.size());
        for (std::size_t s = 0; s < shards_.size(); ++s) {
            std::vector<std::vector<int>> blocks(shards_[s].slots.size());
            for (int i : shards_[s].point_ids) {
                const int zi = z_[static_cast<std::size_t>(i)];
                if (zi == kBackground)
                    p.background.push_back(i);
                else
                    blocks[static_cast<std::size_t>(zi)].push_back(i);
            }
            for (auto& b : blocks)
                if (!b.empty()) p.clusters.push_back(std::move(b));
        }
        p.canonicalize();
        return p;
    }

    double effective_measure() const {
        return model_.domain().measure() -
               (mask_.empty() ? 0.0 : mask_.background_measure_deficit(model_));
    }

    long total_clusters() const {
        long k = 0;
        for (const auto& shard : shards_) k += shard.k_live;
        return k;
    }

    const Model& model() const { return model_; }
    Model& mutable_model() { return model_; }
    const GammaWeightPrior& prior() const { return prior_; }
    const BackgroundRate& background() const { return bg_; }
    const std::vector<int>& assignments() const { return z_; }
    long background_count() const {
        long n = 0;
        for (const auto& shard : shards_) n += shard.n_bg;
        return n;
    }

  private:
    static constexpr int kBackground = -1;

    struct Slot {
        Stats stats;
        int size = 0;
        bool live = false;
    };

    struct Shard {
        std::vector<int> point_ids;
        std::vector<Slot> slots;
        std::vector<int> free_slots;
        std::vector<int> freed_this_sweep;
        long k_live = 0;
        long n_bg = 0;
        double measure_fraction = 1.0;
        RngStream rng;
        // scratch for the categorical draw; shard-local so threads don't share
        std::vector<double> lw;
        std::vector<int> ids;
    };

    struct LatentDraw {
        Params params;
        double w = 0.0;
        int shard = 0;
        int slot = 0;
    };

    void sweep_shard(Shard& shard) {
        if (options_.random_scan) {
            std::vector<int> order = shard.point_ids;
            for (std::size_t i = order.size(); i > 1; --i) {
                const std::size_t j = static_cast<std::size_t>(shard.rng.uniform() * i);
                std::swap(order[i - 1], order[std::min(j, i - 1)]);
            }
            for (int i : order) move_point(shard, i);
        } else {
            for (int i : shard.point_ids) move_point(shard, i);
        }
    }

    void move_point(Shard& shard, int i) {
        const Point& pt = points_[static_cast<std::size_t>(i)];
        // Remove from the current block, dropping the cluster if emptied.
        const int old = z_[static_cast<std::size_t>(i)];
        if (old == kBackground) {
            --shard.n_bg;
        } else {
            Slot& slot = shard.slots[static_cast<std::size_t>(old)];
            model_.remove(slot.stats, pt);
            if (--slot.size == 0) {
                slot.live = false;
                slot.stats = model_.empty_stats();
                shard.freed_this_sweep.push_back(old);
                --shard.k_live;
            }
        }
        // Background, existing clusters of this shard, then a new cluster.
        shard.lw.clear();
        shard.ids.clear();
        const double lw_bg =
            bg_.rate > 0.0 ? std::log(bg_.rate) + model_.background_mark_log_density(pt.mark) +
                                 std::log1p(prior_.beta)
                           : kNegInf;
        shard.lw.push_back(lw_bg);
        shard.ids.push_back(kBackground);
        for (std::size_t id = 0; id < shard.slots.size(); ++id) {
            const Slot& slot = shard.slots[id];
            if (!slot.live) continue;
            const double prior_w = options_.mode == SamplerMode::nsp
                                       ? std::log(static_cast<double>(slot.size) + prior_.alpha)
                                       : std::log(static_cast<double>(slot.size));
            shard.lw.push_back(prior_w + model_.log_predictive(slot.stats, pt));
            shard.ids.push_back(static_cast<int>(id));
        }
        double lw_new;
        if (options_.mode == SamplerMode::nsp) {
            double lbar_v = lbar(prior_, model_.domain());
            if (options_.rescale_lbar_per_shard) lbar_v *= shard.measure_fraction;
            lw_new = std::log(prior_.alpha) + std::log(lbar_v) + prior_.log_empty_prob() +
                     model_.log_marginal_new(pt);
        } else {
            lw_new = std::log(options_.dpmm_gamma) + model_.log_marginal_new(pt);
        }
        shard.lw.push_back(lw_new);
        shard.ids.push_back(kNewCluster);
        for (std::size_t j = 0; j < shard.lw.size(); ++j) {
            if (std::isnan(shard.lw[j]))
                throw std::runtime_error("gibbs: NaN assignment weight at point index " +
                                         std::to_string(i));
        }
        const std::size_t pick = shard.rng.categorical_log(shard.lw);
        const int choice = shard.ids[pick];
        if (choice == kBackground) {
            z_[static_cast<std::size_t>(i)] = kBackground;
            ++shard.n_bg;
            return;
        }
        int id = choice;
        if (choice == kNewCluster) {
            if (!shard.free_slots.empty()) {
                id = shard.free_slots.back();
                shard.free_slots.pop_back();
            } else {
                id = static_cast<int>(shard.slots.size());
                shard.slots.push_back(Slot{model_.empty_stats(), 0, false});
            }
            shard.slots[static_cast<std::size_t>(id)].live = true;
            ++shard.k_live;
        }
        Slot& slot = shard.slots[static_cast<std::size_t>(id)];
        model_.add(slot.stats, pt);
        ++slot.size;
        z_[static_cast<std::size_t>(i)] = id;
    }

    void resample_model_globals() {
        struct ClusterInfo {
            Params params;
            std::vector<const Point*> members;
        };
        std::vector<ClusterInfo> clusters(latents_.size());
        for (std::size_t c = 0; c < latents_.size(); ++c) clusters[c].params = latents_[c].params;
        std::vector<const Point*> background_points;
        // latents_ are ordered by (shard, slot); map each to its members.
        for (std::size_t s = 0; s < shards_.size(); ++s) {
            for (int i : shards_[s].point_ids) {
                const int zi = z_[static_cast<std::size_t>(i)];
                if (zi == kBackground) {
                    background_points.push_back(&points_[static_cast<std::size_t>(i)]);
                    continue;
                }
                for (std::size_t c = 0; c < latents_.size(); ++c) {
                    if (latents_[c].shard == static_cast<int>(s) && latents_[c].slot == zi) {
                        clusters[c].members.push_back(&points_[static_cast<std::size_t>(i)]);
                        break;
                    }
                }
            }
        }
        model_.resample_globals(clusters, background_points, global_rng_);
        // Sufficient statistics can depend on the globals (the sequence
        // model's natural parameters involve the widths and offsets), so
        // every cluster accumulator is rebuilt under the new values.
        rebuild_cluster_stats();
    }

    void rebuild_cluster_stats() {
        for (auto& shard : shards_) {
            for (auto& slot : shard.slots)
                if (slot.live) slot.stats = model_.empty_stats();
            for (int i : shard.point_ids) {
                const int zi = z_[static_cast<std::size_t>(i)];
                if (zi != kBackground)
                    model_.add(shard.slots[static_cast<std::size_t>(zi)].stats,
                               points_[static_cast<std::size_t>(i)]);
            }
        }
    }

    void mh_alpha_move(const std::vector<double>& empty_w) {
        std::vector<double> all_w;
        for (const auto& d : latents_) all_w.push_back(d.w);
        for (double w : empty_w) all_w.push_back(w);
        if (all_w.empty()) return;
        const double proposal = prior_.alpha * std::exp(options_.mh_alpha_step * global_rng_.normal());
        if (!(proposal > 1e-6) || !(proposal < 1e6)) return;
        double log_ratio = 0.0;
        for (double w : all_w)
            log_ratio += log_gamma_pdf(w, proposal, prior_.beta) - log_gamma_pdf(w, prior_.alpha, prior_.beta);
        if (std::log(global_rng_.uniform_pos()) < log_ratio) {
            prior_.alpha = proposal;
            target_prior_.alpha = proposal;
        }
    }

    Model model_;
    GammaWeightPrior prior_;
    GammaWeightPrior target_prior_;
    BackgroundRate bg_;
    GibbsOptions options_;
    std::vector<Point> points_;
    SpeckledMask mask_;
    std::vector<Shard> shards_;
    std::vector<int> z_;
    std::vector<LatentDraw> latents_;
    bool annealed_ = false;
    RngStream global_rng_;

    static constexpr int kNewCluster = -2;

  public:
    // Exposed for the parallel runner.
    void set_shard_measure_fractions(const std::vector<double>& fractions) {
        if (fractions.size() != shards_.size()) throw std::invalid_argument("bad fraction count");
        for (std::size_t s = 0; s < shards_.size(); ++s) shards_[s].measure_fraction = fractions[s];
    }

    // Overwrite the partition state from a label vector (0 = background,
    // 1..K = clusters). Clusters are split along shard boundaries, matching
    // the sampler's cluster-locality invariant.
    void force_assignments(const std::vector<int>& labels) {
        if (labels.size() != points_.size())
            throw std::invalid_argument("force_assignments: label count mismatch");
        for (auto& shard : shards_) {
            shard.slots.clear();
            shard.free_slots.clear();
            shard.freed_this_sweep.clear();
            shard.k_live = 0;
            shard.n_bg = 0;
            std::map<int, int> label_to_slot;
            for (int i : shard.point_ids) {
                const int label = labels[static_cast<std::size_t>(i)];
                if (label == 0) {
                    z_[static_cast<std::size_t>(i)] = kBackground;
                    ++shard.n_bg;
                    continue;
                }
                auto it = label_to_slot.find(label);
                if (it == label_to_slot.end()) {
                    const int id = static_cast<int>(shard.slots.size());
                    shard.slots.push_back(Slot{model_.empty_stats(), 0, true});
                    ++shard.k_live;
                    it = label_to_slot.emplace(label, id).first;
                }
                Slot& slot = shard.slots[static_cast<std::size_t>(it->second)];
                model_.add(slot.stats, points_[static_cast<std::size_t>(i)]);
                ++slot.size;
                z_[static_cast<std::size_t>(i)] = it->second;
            }
        }
        resample_latent_events();
    }
};

// Sequential Algorithm-7 driver: one whole-domain shard, no threads.
template <class Model>
ChainRecord<Model> run_chain(const Model& model, const GammaWeightPrior& prior,
                             const BackgroundRate& background, const GibbsOptions& options,
                             const std::vector<typename Model::Point>& points,
                             const AnnealSchedule& schedule, int n_samples, RngStream rng,
                             const SpeckledMask& mask = {}) {
    std::vector<std::vector<int>> shard_points(1);
    shard_points[0].resize(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) shard_points[0][i] = static_cast<int>(i);
    CollapsedGibbsSampler<Model> sampler(model, prior, background, options, points,
                                         std::move(shard_points), rng, mask);
    return sampler.run(schedule, n_samples, /*use_threads=*/false);
}

}  // namespace nsp
