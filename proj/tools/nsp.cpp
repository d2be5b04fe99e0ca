// Command-line driver: data generation, fitting, evaluation, urn studies,
// and exact-computation utilities.

#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "nsp/nsp.hpp"

namespace {

using namespace nsp;

constexpr int kExitError = 1;
constexpr int kExitConfig = 2;

template <class F>
int with_model(const RunConfig& cfg, F&& f) {
    if (cfg.model == "gaussian2d") return f(cfg.build_gaussian());
    if (cfg.model == "sequence") return f(cfg.build_sequence());
    return f(cfg.build_document());
}

struct CommonFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> chains, samples, shards;
    std::optional<std::string> mode;
    std::optional<std::string> construction;

    RunConfig load() const {
        RunConfig cfg = RunConfig::load(config_path);
        if (seed) cfg.seed = *seed;
        if (chains) cfg.chains = *chains;
        if (samples) cfg.samples = *samples;
        if (shards) cfg.shards = *shards;
        if (mode) {
            if (*mode == "nsp") cfg.fit.mode = SamplerMode::nsp;
            else if (*mode == "dpmm-limit") cfg.fit.mode = SamplerMode::dpmm_limit;
            else throw ConfigError("--mode", "must be nsp or dpmm-limit");
        }
        if (construction) {
            const std::string& c = *construction;
            if (c == "v1") cfg.construction = Construction::v1;
            else if (c == "v2") cfg.construction = Construction::v2;
            else if (c == "v3") cfg.construction = Construction::v3;
            else if (c == "v4") cfg.construction = Construction::v4;
            else if (c == "v5") cfg.construction = Construction::v5;
            else throw ConfigError("--construction", "must be one of v1..v5");
        }
        return cfg;
    }
};

int cmd_generate(const CommonFlags& flags, const std::string& out_path) {
    RunConfig cfg = flags.load();
    return with_model(cfg, [&](auto model) {
        RngStream rng = streams::for_generate(cfg.seed);
        auto data = sample_with_background(model, cfg.prior, cfg.background, cfg.domain, rng,
                                           /*truncate=*/true, cfg.construction);
        write_text_file(out_path, dataset_to_json(data).dump(2) + "\n");
        std::cout << "wrote " << data.points.size() << " points (" << data.truth.num_clusters()
                  << " clusters, " << data.truth.background.size() << " background) to " << out_path
                  << "\n";
        return 0;
    });
}

int cmd_fit(const CommonFlags& flags, const std::string& data_path, const std::string& out_prefix,
            const std::string& mask_path) {
    RunConfig cfg = flags.load();
    return with_model(cfg, [&](auto model) {
        using Model = decltype(model);
        auto data = dataset_from_json(load_json_file(data_path), model, data_path);
        SpeckledMask mask;
        if (!mask_path.empty()) {
            mask = mask_from_json(load_json_file(mask_path), mask_path);
            mask.validate(cfg.domain);
        }
        auto points = mask.empty() ? data.points : apply_mask<Model>(data.points, mask);
        if (!mask.empty())
            std::cout << "masked " << data.points.size() - points.size() << " of "
                      << data.points.size() << " points for fitting\n";
        for (int chain = 0; chain < cfg.chains; ++chain) {
            RngStream rng = streams::for_chain(cfg.seed, chain);
            ChainRecord<Model> record;
            Model fitted = model;
            if (cfg.shards > 1) {
                record = run_parallel_chain(model, cfg.prior, cfg.background, cfg.fit, points,
                                            ShardPlan::even(cfg.domain, cfg.shards), cfg.anneal,
                                            cfg.samples, rng, mask, &fitted);
            } else {
                std::vector<std::vector<int>> shard(1);
                for (std::size_t i = 0; i < points.size(); ++i) shard[0].push_back(static_cast<int>(i));
                CollapsedGibbsSampler<Model> sampler(model, cfg.prior, cfg.background, cfg.fit,
                                                     points, std::move(shard), rng, mask);
                record = sampler.run(cfg.anneal, cfg.samples);
                fitted = sampler.model();
            }
            const std::string base = out_prefix + ".chain" + std::to_string(chain);
            std::ostringstream jsonl, csv;
            write_chain_jsonl(record, jsonl);
            write_chain_csv(record, csv);
            write_text_file(base + ".jsonl", jsonl.str());
            write_text_file(base + ".csv", csv.str());
            write_text_file(base + ".globals.json", model_globals_to_json(fitted).dump(2) + "\n");
            std::cout << "chain " << chain << ": " << record.samples.size()
                      << " retained samples -> " << base << ".jsonl\n";
        }
        return 0;
    });
}

int cmd_eval(const CommonFlags& flags, const std::string& data_path,
             const std::vector<std::string>& chain_paths, const std::string& out_path,
             const std::string& mask_path, bool use_truth) {
    RunConfig cfg = flags.load();
    if (!use_truth && mask_path.empty())
        throw ConfigError("eval", "nothing to evaluate: provide --truth and/or --mask");
    return with_model(cfg, [&](auto model) {
        using Model = decltype(model);
        auto data = dataset_from_json(load_json_file(data_path), model, data_path);
        std::vector<ChainRecord<Model>> records;
        for (const auto& path : chain_paths) {
            std::ifstream in(path);
            if (!in) throw std::runtime_error("cannot open " + path);
            records.push_back(read_chain_jsonl<Model>(in, path));
            const std::string gpath = path.size() > 6 ? path.substr(0, path.size() - 6) + ".globals.json"
                                                      : "";
            if (!gpath.empty() && std::filesystem::exists(gpath))
                apply_globals_json(model, load_json_file(gpath));
        }
        std::ostringstream csv;
        csv << "metric,value\n";
        long pooled_samples = 0;
        for (const auto& r : records) pooled_samples += static_cast<long>(r.samples.size());
        csv << "n_chains," << records.size() << "\n";
        csv << "n_samples," << pooled_samples << "\n";
        if (use_truth) {
            std::vector<int> truth = data.truth_labels();
            if (!mask_path.empty()) {
                // The chains were fit on the unmasked points only; restrict the
                // truth labels to the same index set.
                SpeckledMask mask = mask_from_json(load_json_file(mask_path), mask_path);
                mask.validate(cfg.domain);
                std::vector<int> kept;
                for (std::size_t i = 0; i < data.points.size(); ++i)
                    if (!mask.contains(data.points[i].x, Model::mark_group(data.points[i].mark)))
                        kept.push_back(truth[i]);
                truth = std::move(kept);
            }
            double acc = 0.0;
            long count = 0;
            for (const auto& r : records)
                for (const auto& s : r.samples) {
                    acc += co_occupancy_accuracy(s.z, truth);
                    ++count;
                }
            csv << "co_occupancy_mean," << acc / static_cast<double>(count) << "\n";
            auto summary = compare_cluster_count(records, data.truth.num_clusters());
            csv << "cluster_count_mean," << summary.mean << "\n";
            csv << "cluster_count_lo95," << summary.lo95 << "\n";
            csv << "cluster_count_hi95," << summary.hi95 << "\n";
            csv << "cluster_count_truth," << summary.truth << "\n";
            csv << "cluster_count_bias," << summary.bias << "\n";
            csv << "cluster_count_covers_truth," << (summary.covers_truth ? 1 : 0) << "\n";
        }
        if (!mask_path.empty()) {
            SpeckledMask mask = mask_from_json(load_json_file(mask_path), mask_path);
            mask.validate(cfg.domain);
            std::vector<const ChainSample<Model>*> samples;
            for (const auto& r : records)
                for (const auto& s : r.samples) samples.push_back(&s);
            auto heldout = heldout_predictive_ll(samples, model, data.points, mask);
            csv << "heldout_points," << heldout.n_points << "\n";
            csv << "heldout_ll_per_point," << heldout.per_point << "\n";
            csv << "heldout_ll_pooled," << heldout.pooled << "\n";
        }
        write_text_file(out_path, csv.str());
        std::cout << "wrote metrics to " << out_path << "\n";
        return 0;
    });
}

int cmd_urns(std::uint64_t seed, int n, int draws, double beta, const std::string& out_path) {
    std::ostringstream csv;
    csv << "mode,alpha,gamma,delta,mean_k,sd_k,example_labels\n";
    RngStream rng(seed, 0xbeef);
    auto run_study = [&](const std::string& mode_name, double alpha, double gamma, double delta,
                         const UrnConfig& urn_cfg) {
        double s1 = 0.0, s2 = 0.0;
        std::string example;
        for (int i = 0; i < draws; ++i) {
            Partition p = sample_urn_trajectory(n, urn_cfg, rng);
            const double k = p.num_clusters();
            s1 += k;
            s2 += k * k;
            if (i == 0) {
                std::ostringstream os;
                for (int label : p.to_labels()) os << label << "|";
                example = os.str();
            }
        }
        const double mean = s1 / draws;
        const double var = std::max(0.0, s2 / draws - mean * mean);
        csv << mode_name << "," << alpha << "," << gamma << "," << delta << "," << mean << ","
            << std::sqrt(var) << "," << example << "\n";
    };
    for (double gamma : {1.0, 10.0}) {
        run_study("dpmm-limit", 0.0, gamma, 0.0, UrnConfig::dpmm(gamma));
        for (double alpha : {1.0, 100.0, 10000.0}) {
            run_study("nsp", alpha, gamma, 0.0,
                      UrnConfig::nsp_urn_with_new_mass(GammaWeightPrior(alpha, beta, 1.0), gamma));
        }
        run_study("pitman-yor", 0.0, gamma, 0.3, UrnConfig::pitman_yor(gamma, 0.3));
        run_study("pitman-yor", 0.0, gamma, -0.5, UrnConfig::pitman_yor(gamma, -0.5));
    }
    write_text_file(out_path, csv.str());
    std::cout << "wrote urn study to " << out_path << "\n";
    return 0;
}

int cmd_oracle_partitions(int n) {
    auto parts = enumerate_partitions(n);
    for (const auto& p : parts) {
        for (int label : p.to_labels()) std::cout << label << " ";
        std::cout << "\n";
    }
    std::cout << "count " << parts.size() << "\n";
    return 0;
}

int cmd_oracle_vcoeff(int n, int k, double alpha, double beta, double lbar, double tol) {
    VCoefficientTable table(GammaWeightPrior(alpha, beta, 1.0), lbar, tol);
    std::cout << "log_v " << table.log_v(n, k) << "\n";
    std::cout << "v " << std::exp(table.log_v(n, k)) << "\n";
    std::cout << "lemma3_ratio " << lbar * std::pow(beta / (1.0 + beta), alpha) << "\n";
    return 0;
}

int cmd_oracle_pn(int n, double alpha, double beta, double lbar, double tol) {
    VCoefficientTable table(GammaWeightPrior(alpha, beta, 1.0), lbar, tol);
    std::cout << "log_p_n " << table.log_p_n(n) << "\n";
    std::cout << "p_n " << std::exp(table.log_p_n(n)) << "\n";
    return 0;
}

int cmd_oracle_schein(int n, int l_max, double alpha, double beta, double lbar) {
    VCoefficientTable table(GammaWeightPrior(alpha, beta, 1.0), lbar);
    auto post = table.latent_count_posterior(n, l_max);
    for (std::size_t l = 0; l < post.probs.size(); ++l)
        std::cout << l << " " << post.probs[l] << "\n";
    if (post.tail_warning) std::cout << "warning: tail mass beyond l_max exceeds tolerance\n";
    return 0;
}

int cmd_oracle_posterior(const CommonFlags& flags, const std::string& data_path) {
    RunConfig cfg = flags.load();
    return with_model(cfg, [&](auto model) {
        auto data = dataset_from_json(load_json_file(data_path), model, data_path);
        auto post = enumerate_posterior(model, cfg.prior, cfg.background, data.points, cfg.fit.mode,
                                        cfg.fit.dpmm_gamma);
        for (std::size_t i = 0; i < post.configs.size(); ++i) {
            for (int label : post.configs[i].to_labels()) std::cout << label << " ";
            std::cout << " p=" << post.probs[i] << "\n";
        }
        return 0;
    });
}

}  // namespace

int main(int argc, char** argv) {
    std::cout.precision(15);
    CLI::App app{"Neyman-Scott process toolkit: simulation, exact partition computations, and "
                 "collapsed Gibbs inference"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string data_path, out_path, mask_path;
    std::vector<std::string> chain_paths;
    bool use_truth = false;

    auto add_common = [&](CLI::App* cmd, bool needs_config = true) {
        auto* opt = cmd->add_option("--config", flags.config_path, "run configuration (JSON)");
        if (needs_config) opt->required()->check(CLI::ExistingFile);
        cmd->add_option("--seed", flags.seed, "override the configuration seed");
    };

    auto* generate = app.add_subcommand("generate", "sample a dataset from the generative model");
    add_common(generate);
    generate->add_option("--out", out_path, "output dataset path")->required();
    generate->add_option("--construction", flags.construction, "sampling construction v1..v5");

    auto* fit = app.add_subcommand("fit", "run collapsed Gibbs chains");
    add_common(fit);
    fit->add_option("--data", data_path, "dataset path")->required()->check(CLI::ExistingFile);
    fit->add_option("--out", out_path, "output prefix for chain files")->required();
    fit->add_option("--chains", flags.chains, "number of independent chains");
    fit->add_option("--samples", flags.samples, "post-anneal sweeps per chain");
    fit->add_option("--shards", flags.shards, "parallel shards (approximate MCMC)");
    fit->add_option("--mode", flags.mode, "nsp or dpmm-limit");
    fit->add_option("--mask", mask_path, "speckled holdout mask (JSON)")->check(CLI::ExistingFile);

    auto* eval = app.add_subcommand("eval", "evaluate chains against truth and/or held-out data");
    add_common(eval);
    eval->add_option("--data", data_path, "dataset path")->required()->check(CLI::ExistingFile);
    eval->add_option("--chains-files", chain_paths, "chain .jsonl files")
        ->required()
        ->check(CLI::ExistingFile);
    eval->add_option("--out", out_path, "metrics CSV path")->required();
    eval->add_option("--mask", mask_path, "speckled holdout mask (JSON)")->check(CLI::ExistingFile);
    eval->add_flag("--truth", use_truth, "score against the dataset's ground-truth labels");

    auto* urns = app.add_subcommand("urns", "urn-scheme cluster-count study over an alpha grid");
    std::uint64_t urn_seed = 0;
    int urn_n = 100, urn_draws = 1000;
    double urn_beta = 2.0;
    urns->add_option("--seed", urn_seed, "rng seed");
    urns->add_option("--n", urn_n, "points per partition")->check(CLI::PositiveNumber);
    urns->add_option("--draws", urn_draws, "partitions per configuration")->check(CLI::PositiveNumber);
    urns->add_option("--beta", urn_beta, "weight rate beta")->check(CLI::PositiveNumber);
    urns->add_option("--out", out_path, "output CSV")->required();

    auto* oracle = app.add_subcommand("oracle", "exact computations for scripting and CI");
    oracle->require_subcommand(1);
    int o_n = 3, o_k = 1, o_lmax = 20;
    double o_alpha = 1.0, o_beta = 1.0, o_lbar = 1.0, o_tol = 1e-12;
    auto* o_partitions = oracle->add_subcommand("partitions", "enumerate set partitions of [n]");
    o_partitions->add_option("--n", o_n, "set size (<= 10)")->required();
    auto* o_vcoeff = oracle->add_subcommand("vcoeff", "V coefficient of the partition prior");
    o_vcoeff->add_option("--n", o_n)->required();
    o_vcoeff->add_option("--k", o_k)->required();
    o_vcoeff->add_option("--alpha", o_alpha);
    o_vcoeff->add_option("--beta", o_beta);
    o_vcoeff->add_option("--lbar", o_lbar);
    o_vcoeff->add_option("--tol", o_tol);
    auto* o_pn = oracle->add_subcommand("pn", "marginal point-count probability p(N = n)");
    o_pn->add_option("--n", o_n)->required();
    o_pn->add_option("--alpha", o_alpha);
    o_pn->add_option("--beta", o_beta);
    o_pn->add_option("--lbar", o_lbar);
    o_pn->add_option("--tol", o_tol);
    auto* o_schein = oracle->add_subcommand("schein", "latent-count posterior p(L | N = n)");
    o_schein->add_option("--n", o_n)->required();
    o_schein->add_option("--lmax", o_lmax);
    o_schein->add_option("--alpha", o_alpha);
    o_schein->add_option("--beta", o_beta);
    o_schein->add_option("--lbar", o_lbar);
    auto* o_posterior =
        oracle->add_subcommand("posterior", "exact partition posterior for a tiny dataset");
    add_common(o_posterior);
    o_posterior->add_option("--data", data_path, "dataset path (<= 3 points)")
        ->required()
        ->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate->parsed()) return cmd_generate(flags, out_path);
        if (fit->parsed()) return cmd_fit(flags, data_path, out_path, mask_path);
        if (eval->parsed()) return cmd_eval(flags, data_path, chain_paths, out_path, mask_path, use_truth);
        if (urns->parsed()) return cmd_urns(urn_seed, urn_n, urn_draws, urn_beta, out_path);
        if (oracle->parsed()) {
            if (o_partitions->parsed()) return cmd_oracle_partitions(o_n);
            if (o_vcoeff->parsed()) return cmd_oracle_vcoeff(o_n, o_k, o_alpha, o_beta, o_lbar, o_tol);
            if (o_pn->parsed()) return cmd_oracle_pn(o_n, o_alpha, o_beta, o_lbar, o_tol);
            if (o_schein->parsed()) return cmd_oracle_schein(o_n, o_lmax, o_alpha, o_beta, o_lbar);
            if (o_posterior->parsed()) return cmd_oracle_posterior(flags, data_path);
        }
    } catch (const nsp::ConfigError& e) {
        std::cerr << e.what() << "\n";
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
