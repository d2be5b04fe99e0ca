#pragma once

#include <cstdint>
#include <string>

#include "nsp/io.hpp"

namespace nsp {

// One configuration file drives generation, fitting, and evaluation. All
// randomness flows from `seed`, expanded into named substreams per purpose.
struct RunConfig {
    std::string model;  // gaussian2d | sequence | document
    Domain domain = Domain::interval(0.0, 1.0);
    GammaWeightPrior prior;
    BackgroundRate background;
    json model_config;  // parsed lazily per model
    AnnealSchedule anneal;
    GibbsOptions fit;
    std::uint64_t seed = 0;
    int chains = 3;
    int samples = 1000;
    int shards = 1;
    Construction construction = Construction::v1;

    static RunConfig parse(const json& j) {
        jio::check_keys(j, "", {"model", "domain", "prior", "model_config"},
                        {"background", "anneal", "fit", "seed", "chains", "samples", "shards",
                         "construction", "mode", "dpmm_gamma"});
        RunConfig cfg;
        cfg.model = jio::get<std::string>(j, "model", "");
        if (cfg.model != "gaussian2d" && cfg.model != "sequence" && cfg.model != "document")
            throw ConfigError("model", "must be one of gaussian2d, sequence, document");
        cfg.domain = domain_from_json(j.at("domain"));
        cfg.prior = prior_from_json(j.at("prior"));
        if (j.contains("background")) cfg.background = background_from_json(j.at("background"));
        cfg.model_config = j.at("model_config");
        if (j.contains("anneal")) {
            const auto& a = j.at("anneal");
            jio::check_keys(a, "anneal", {}, {"stages", "sweeps_per_stage", "initial_temperature"});
            cfg.anneal.stages = jio::get_or<int>(a, "stages", "anneal", 0);
            cfg.anneal.sweeps_per_stage = jio::get_or<int>(a, "sweeps_per_stage", "anneal", 100);
            cfg.anneal.initial_temperature =
                jio::get_or<double>(a, "initial_temperature", "anneal", 500.0);
            if (cfg.anneal.stages < 0 || cfg.anneal.sweeps_per_stage < 0 ||
                cfg.anneal.initial_temperature < 1.0)
                throw ConfigError("anneal", "need stages, sweeps >= 0 and temperature >= 1");
        }
        if (j.contains("fit")) {
            const auto& f = j.at("fit");
            jio::check_keys(f, "fit", {},
                            {"step4", "resample_globals", "resample_rate", "resample_beta",
                             "resample_background", "mh_alpha", "mh_alpha_step", "random_scan",
                             "rescale_lbar_per_shard", "audit_interval", "warmup_fraction",
                             "record_latents", "hyper"});
            cfg.fit.step4 = jio::get_or<bool>(f, "step4", "fit", cfg.fit.step4);
            cfg.fit.resample_globals =
                jio::get_or<bool>(f, "resample_globals", "fit", cfg.fit.resample_globals);
            cfg.fit.resample_rate = jio::get_or<bool>(f, "resample_rate", "fit", cfg.fit.resample_rate);
            cfg.fit.resample_beta = jio::get_or<bool>(f, "resample_beta", "fit", cfg.fit.resample_beta);
            cfg.fit.resample_background =
                jio::get_or<bool>(f, "resample_background", "fit", cfg.fit.resample_background);
            cfg.fit.mh_alpha = jio::get_or<bool>(f, "mh_alpha", "fit", cfg.fit.mh_alpha);
            cfg.fit.mh_alpha_step = jio::get_or<double>(f, "mh_alpha_step", "fit", cfg.fit.mh_alpha_step);
            cfg.fit.random_scan = jio::get_or<bool>(f, "random_scan", "fit", cfg.fit.random_scan);
            cfg.fit.rescale_lbar_per_shard = jio::get_or<bool>(f, "rescale_lbar_per_shard", "fit",
                                                               cfg.fit.rescale_lbar_per_shard);
            cfg.fit.audit_interval = jio::get_or<int>(f, "audit_interval", "fit", cfg.fit.audit_interval);
            cfg.fit.warmup_fraction =
                jio::get_or<double>(f, "warmup_fraction", "fit", cfg.fit.warmup_fraction);
            if (cfg.fit.warmup_fraction < 0.0 || cfg.fit.warmup_fraction >= 1.0)
                throw ConfigError("fit/warmup_fraction", "must lie in [0, 1)");
            cfg.fit.record_latents = jio::get_or<bool>(f, "record_latents", "fit", cfg.fit.record_latents);
            if (f.contains("hyper")) {
                const auto& h = f.at("hyper");
                jio::check_keys(h, "fit/hyper", {}, {"nu_shape", "nu_rate", "beta_shape", "beta_rate"});
                cfg.fit.hyper.nu_shape = jio::get_or<double>(h, "nu_shape", "fit/hyper", 1.0);
                cfg.fit.hyper.nu_rate = jio::get_or<double>(h, "nu_rate", "fit/hyper", 1.0);
                cfg.fit.hyper.beta_shape = jio::get_or<double>(h, "beta_shape", "fit/hyper", 1.0);
                cfg.fit.hyper.beta_rate = jio::get_or<double>(h, "beta_rate", "fit/hyper", 1.0);
            }
        }
        const std::string mode = jio::get_or<std::string>(j, "mode", "", "nsp");
        if (mode == "nsp") {
            cfg.fit.mode = SamplerMode::nsp;
        } else if (mode == "dpmm-limit") {
            cfg.fit.mode = SamplerMode::dpmm_limit;
        } else {
            throw ConfigError("mode", "must be nsp or dpmm-limit");
        }
        cfg.fit.dpmm_gamma = jio::get_or<double>(j, "dpmm_gamma", "", 1.0);
        if (!(cfg.fit.dpmm_gamma > 0.0)) throw ConfigError("dpmm_gamma", "must be > 0");
        cfg.seed = jio::get_or<std::uint64_t>(j, "seed", "", 0);
        cfg.chains = jio::get_or<int>(j, "chains", "", 3);
        cfg.samples = jio::get_or<int>(j, "samples", "", 1000);
        cfg.shards = jio::get_or<int>(j, "shards", "", 1);
        if (cfg.chains < 1 || cfg.samples < 1 || cfg.shards < 1)
            throw ConfigError("", "chains, samples, and shards must be positive");
        const std::string c = jio::get_or<std::string>(j, "construction", "", "v1");
        if (c == "v1") cfg.construction = Construction::v1;
        else if (c == "v2") cfg.construction = Construction::v2;
        else if (c == "v3") cfg.construction = Construction::v3;
        else if (c == "v4") cfg.construction = Construction::v4;
        else if (c == "v5") cfg.construction = Construction::v5;
        else throw ConfigError("construction", "must be one of v1..v5");
        return cfg;
    }

    static RunConfig load(const std::string& file) { return parse(load_json_file(file)); }

    GaussianModel build_gaussian() const { return gaussian_from_json(model_config, domain); }
    SequenceModel build_sequence() const { return sequence_from_json(model_config, domain); }
    DocumentModel build_document() const { return document_from_json(model_config, domain); }
};

// Named stream ids for the seed expansion; every pipeline stage draws from
// seed x (purpose, index) so runs are reproducible end to end.
namespace streams {
inline constexpr std::uint64_t generate = 0x9e01;
inline constexpr std::uint64_t fit_chain_base = 0xc0de0000;  // + chain index

inline RngStream for_generate(std::uint64_t seed) { return RngStream(seed, generate); }
inline RngStream for_chain(std::uint64_t seed, int chain) {
    return RngStream(seed, fit_chain_base + static_cast<std::uint64_t>(chain));
}
}  // namespace streams

}  // namespace nsp
