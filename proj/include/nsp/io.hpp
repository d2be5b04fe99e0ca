#pragma once

#include <fstream>
#include <json.hpp>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "nsp/domain.hpp"
#include "nsp/gibbs.hpp"
#include "nsp/mask.hpp"
#include "nsp/models/document.hpp"
#include "nsp/models/gaussian.hpp"
#include "nsp/models/sequence.hpp"
#include "nsp/samplers.hpp"

namespace nsp {

using json = nlohmann::json;

// Schema violations carry the JSON path of the offending field.
class ConfigError : public std::runtime_error {
  public:
    ConfigError(const std::string& path, const std::string& message)
        : std::runtime_error("config error at " + (path.empty() ? "<root>" : path) + ": " + message),
          path_(path) {}
    const std::string& path() const { return path_; }

  private:
    std::string path_;
};

namespace jio {

inline void require_object(const json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError(path, "expected an object");
}

// Unknown keys are rejected so typos fail loudly.
inline void check_keys(const json& j, const std::string& path, const std::set<std::string>& required,
                       const std::set<std::string>& optional = {}) {
    require_object(j, path);
    for (const auto& key : required)
        if (!j.contains(key)) throw ConfigError(path, "missing required field '" + key + "'");
    for (const auto& [key, value] : j.items())
        if (!required.count(key) && !optional.count(key))
            throw ConfigError(path + "/" + key, "unknown field");
}

template <class T>
T get(const json& j, const std::string& key, const std::string& path) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(path + "/" + key, e.what());
    }
}

template <class T>
T get_or(const json& j, const std::string& key, const std::string& path, T fallback) {
    if (!j.contains(key)) return fallback;
    return get<T>(j, key, path);
}

inline Vec to_vec(const json& j, const std::string& path) {
    if (!j.is_array()) throw ConfigError(path, "expected an array of numbers");
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ConfigError(path, "expected an array of numbers");
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    }
    return v;
}

inline Mat to_mat(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a nonempty array of rows");
    const std::size_t cols = j[0].size();
    Mat m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < j.size(); ++r) {
        if (!j[r].is_array() || j[r].size() != cols) throw ConfigError(path, "ragged matrix rows");
        for (std::size_t c = 0; c < cols; ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
    return m;
}

inline json from_vec(const Vec& v) {
    json j = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
    return j;
}

inline json from_mat(const Mat& m) {
    json j = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        j.push_back(row);
    }
    return j;
}

}  // namespace jio

// ---------------------------------------------------------------- domain etc.

inline Domain domain_from_json(const json& j, const std::string& path = "domain") {
    jio::check_keys(j, path, {"lower", "upper"});
    return Domain(jio::to_vec(j.at("lower"), path + "/lower"),
                  jio::to_vec(j.at("upper"), path + "/upper"));
}

inline json domain_to_json(const Domain& d) {
    return json{{"lower", jio::from_vec(d.lower())}, {"upper", jio::from_vec(d.upper())}};
}

inline GammaWeightPrior prior_from_json(const json& j, const std::string& path = "prior") {
    jio::check_keys(j, path, {"alpha", "beta", "nu_bar"});
    try {
        return GammaWeightPrior(jio::get<double>(j, "alpha", path), jio::get<double>(j, "beta", path),
                                jio::get<double>(j, "nu_bar", path));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path, e.what());
    }
}

inline json prior_to_json(const GammaWeightPrior& p) {
    return json{{"alpha", p.alpha}, {"beta", p.beta}, {"nu_bar", p.nu_bar}};
}

inline BackgroundRate background_from_json(const json& j, const std::string& path = "background") {
    jio::check_keys(j, path, {"rate"}, {"prior_shape", "prior_rate"});
    BackgroundRate bg;
    bg.rate = jio::get<double>(j, "rate", path);
    bg.prior_shape = jio::get_or<double>(j, "prior_shape", path, 1.0);
    bg.prior_rate = jio::get_or<double>(j, "prior_rate", path, 1.0);
    if (bg.rate < 0.0) throw ConfigError(path + "/rate", "must be >= 0");
    return bg;
}

inline SpeckledMask mask_from_json(const json& j, const std::string& path = "mask") {
    jio::check_keys(j, path, {"regions"});
    SpeckledMask mask;
    const auto& regions = j.at("regions");
    if (!regions.is_array()) throw ConfigError(path + "/regions", "expected an array");
    for (std::size_t i = 0; i < regions.size(); ++i) {
        const std::string rpath = path + "/regions/" + std::to_string(i);
        jio::check_keys(regions[i], rpath, {"lower", "upper"}, {"group"});
        MaskRegion r;
        r.lower = jio::to_vec(regions[i].at("lower"), rpath + "/lower");
        r.upper = jio::to_vec(regions[i].at("upper"), rpath + "/upper");
        if (regions[i].contains("group")) r.group = jio::get<int>(regions[i], "group", rpath);
        mask.regions.push_back(std::move(r));
    }
    return mask;
}

inline json mask_to_json(const SpeckledMask& mask) {
    json regions = json::array();
    for (const auto& r : mask.regions) {
        json jr{{"lower", jio::from_vec(r.lower)}, {"upper", jio::from_vec(r.upper)}};
        if (r.group) jr["group"] = *r.group;
        regions.push_back(std::move(jr));
    }
    return json{{"regions", std::move(regions)}};
}

// ------------------------------------------------------------------- marks

inline json mark_to_json(const GaussianModel::Mark&) { return json::object(); }

inline json mark_to_json(const SequenceModel::Mark& m) { return json{{"neuron", m.neuron}}; }

inline json mark_to_json(const DocumentModel::Mark& m) {
    json words = json::object();
    for (const auto& [v, c] : m.words) words[std::to_string(v)] = c;
    return json{{"author", m.author}, {"words", std::move(words)}};
}

inline void mark_from_json(const json& j, const std::string& path, GaussianModel::Mark&) {
    if (!j.is_null() && !(j.is_object() && j.empty()))
        throw ConfigError(path, "gaussian points carry no mark");
}

inline void mark_from_json(const json& j, const std::string& path, SequenceModel::Mark& m) {
    jio::check_keys(j, path, {"neuron"});
    m.neuron = jio::get<int>(j, "neuron", path);
}

inline void mark_from_json(const json& j, const std::string& path, DocumentModel::Mark& m) {
    jio::check_keys(j, path, {"author", "words"});
    m.author = jio::get<int>(j, "author", path);
    const auto& words = j.at("words");
    if (!words.is_object()) throw ConfigError(path + "/words", "expected an object");
    for (const auto& [key, value] : words.items()) {
        try {
            m.words.emplace_back(std::stoi(key), value.get<long>());
        } catch (const std::exception&) {
            throw ConfigError(path + "/words/" + key, "expected integer index and count");
        }
    }
    std::sort(m.words.begin(), m.words.end());
}

// ------------------------------------------------------------------ params

inline json params_to_json(const GaussianModel::Params& p) {
    return json{{"cov", jio::from_mat(p.cov)}};
}

inline json params_to_json(const SequenceModel::Params& p) {
    return json{{"type", p.type}, {"warp_index", p.warp}};
}

inline json params_to_json(const DocumentModel::Params& p) {
    return json{{"author_probs", jio::from_vec(p.author_probs)},
                {"word_rates", jio::from_vec(p.word_rates)}};
}

inline void params_from_json(const json& j, const std::string& path, const Vec& m,
                             GaussianModel::Params& p) {
    jio::check_keys(j, path, {"cov"});
    p.m = m;
    p.cov = jio::to_mat(j.at("cov"), path + "/cov");
}

inline void params_from_json(const json& j, const std::string& path, const Vec& m,
                             SequenceModel::Params& p) {
    jio::check_keys(j, path, {"type", "warp_index"});
    p.m = m[0];
    p.type = jio::get<int>(j, "type", path);
    p.warp = jio::get<int>(j, "warp_index", path);
}

inline void params_from_json(const json& j, const std::string& path, const Vec& m,
                             DocumentModel::Params& p) {
    jio::check_keys(j, path, {"author_probs", "word_rates"});
    p.m = m[0];
    p.author_probs = jio::to_vec(j.at("author_probs"), path + "/author_probs");
    p.word_rates = jio::to_vec(j.at("word_rates"), path + "/word_rates");
}

// ------------------------------------------------------------------ dataset

template <class Model>
json dataset_to_json(const GeneratedDataset<Model>& data) {
    json points = json::array();
    for (const auto& p : data.points) {
        json jp{{"x", jio::from_vec(p.x)}};
        json mark = mark_to_json(p.mark);
        if (!mark.empty()) jp["mark"] = std::move(mark);
        points.push_back(std::move(jp));
    }
    auto latents_to_json = [&](const std::vector<typename GeneratedDataset<Model>::Latent>& ls) {
        json out = json::array();
        for (const auto& l : ls) {
            json jl{{"m", jio::from_vec(l.m)}, {"theta", params_to_json(l.params)}};
            if (l.w) jl["w"] = *l.w;
            out.push_back(std::move(jl));
        }
        return out;
    };
    return json{{"points", std::move(points)},
                {"z", data.truth_labels()},
                {"latents", latents_to_json(data.latents)},
                {"empty_latents", latents_to_json(data.empty_latents)},
                {"background_rate", data.background_rate}};
}

template <class Model>
GeneratedDataset<Model> dataset_from_json(const json& j, const Model& model,
                                          const std::string& path = "dataset") {
    jio::check_keys(j, path, {"points", "z"}, {"latents", "empty_latents", "background_rate"});
    GeneratedDataset<Model> data;
    const auto& points = j.at("points");
    if (!points.is_array()) throw ConfigError(path + "/points", "expected an array");
    for (std::size_t i = 0; i < points.size(); ++i) {
        const std::string ppath = path + "/points/" + std::to_string(i);
        jio::check_keys(points[i], ppath, {"x"}, {"mark"});
        typename Model::Point p;
        p.x = jio::to_vec(points[i].at("x"), ppath + "/x");
        if (!model.domain().contains(p.x)) throw ConfigError(ppath + "/x", "point outside the domain");
        mark_from_json(points[i].contains("mark") ? points[i].at("mark") : json(nullptr),
                       ppath + "/mark", p.mark);
        try {
            model.validate_mark(p.mark);
        } catch (const std::exception& e) {
            throw ConfigError(ppath + "/mark", e.what());
        }
        data.points.push_back(std::move(p));
    }
    std::vector<int> z = jio::get<std::vector<int>>(j, "z", path);
    if (z.size() != data.points.size()) throw ConfigError(path + "/z", "label count mismatch");
    try {
        data.truth = Partition::from_labels(z);
    } catch (const std::exception& e) {
        throw ConfigError(path + "/z", e.what());
    }
    auto read_latents = [&](const char* key, std::vector<typename GeneratedDataset<Model>::Latent>& out) {
        if (!j.contains(key)) return;
        const auto& arr = j.at(key);
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string lpath = path + "/" + key + "/" + std::to_string(i);
            jio::check_keys(arr[i], lpath, {"m", "theta"}, {"w"});
            typename GeneratedDataset<Model>::Latent l;
            l.m = jio::to_vec(arr[i].at("m"), lpath + "/m");
            if (arr[i].contains("w")) l.w = jio::get<double>(arr[i], "w", lpath);
            params_from_json(arr[i].at("theta"), lpath + "/theta", l.m, l.params);
            out.push_back(std::move(l));
        }
    };
    read_latents("latents", data.latents);
    read_latents("empty_latents", data.empty_latents);
    data.background_rate = jio::get_or<double>(j, "background_rate", path, 0.0);
    return data;
}

// -------------------------------------------------------------- chain record

template <class Model>
json chain_sample_to_json(const ChainSample<Model>& s) {
    json latents = json::array();
    for (const auto& l : s.latents) {
        json jl{{"m", jio::from_vec(l.m)}, {"theta", params_to_json(l.params)}};
        if (l.w) jl["w"] = *l.w;
        latents.push_back(std::move(jl));
    }
    return json{{"sweep", s.sweep},
                {"z", s.z},
                {"k", s.n_clusters},
                {"background_rate", s.background_rate},
                {"nu_bar", s.nu_bar},
                {"beta", s.beta},
                {"alpha", s.alpha},
                {"joint_log_density", s.joint_log_density},
                {"latents", std::move(latents)}};
}

template <class Model>
ChainSample<Model> chain_sample_from_json(const json& j, const std::string& path = "sample") {
    jio::check_keys(j, path,
                    {"sweep", "z", "k", "background_rate", "nu_bar", "beta", "alpha",
                     "joint_log_density", "latents"});
    ChainSample<Model> s;
    s.sweep = jio::get<int>(j, "sweep", path);
    s.z = jio::get<std::vector<int>>(j, "z", path);
    s.n_clusters = jio::get<int>(j, "k", path);
    s.background_rate = jio::get<double>(j, "background_rate", path);
    s.nu_bar = jio::get<double>(j, "nu_bar", path);
    s.beta = jio::get<double>(j, "beta", path);
    s.alpha = jio::get<double>(j, "alpha", path);
    s.joint_log_density = jio::get<double>(j, "joint_log_density", path);
    const auto& latents = j.at("latents");
    for (std::size_t i = 0; i < latents.size(); ++i) {
        const std::string lpath = path + "/latents/" + std::to_string(i);
        jio::check_keys(latents[i], lpath, {"m", "theta"}, {"w"});
        LatentEvent<typename Model::Params> l;
        l.m = jio::to_vec(latents[i].at("m"), lpath + "/m");
        if (latents[i].contains("w")) l.w = jio::get<double>(latents[i], "w", lpath);
        params_from_json(latents[i].at("theta"), lpath + "/theta", l.m, l.params);
        s.latents.push_back(std::move(l));
    }
    return s;
}

// JSON-lines, one retained sample per line.
template <class Model>
void write_chain_jsonl(const ChainRecord<Model>& record, std::ostream& os) {
    for (const auto& s : record.samples) os << chain_sample_to_json<Model>(s).dump() << "\n";
}

template <class Model>
ChainRecord<Model> read_chain_jsonl(std::istream& is, const std::string& path = "chain") {
    ChainRecord<Model> record;
    std::string line;
    long line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ConfigError(path + ":line " + std::to_string(line_no), e.what());
        }
        record.samples.push_back(
            chain_sample_from_json<Model>(j, path + ":line " + std::to_string(line_no)));
    }
    return record;
}

// Summary CSV: sweep, |C|, joint log density, background rate, nu_bar, beta.
template <class Model>
void write_chain_csv(const ChainRecord<Model>& record, std::ostream& os) {
    os << "sweep,k,joint_log_density,background_rate,nu_bar,beta\n";
    for (const auto& s : record.samples)
        os << s.sweep << "," << s.n_clusters << "," << s.joint_log_density << ","
           << s.background_rate << "," << s.nu_bar << "," << s.beta << "\n";
}

// --------------------------------------------------------------- model configs

inline GaussianModel gaussian_from_json(const json& j, const Domain& domain,
                                        const std::string& path = "model_config") {
    jio::check_keys(j, path, {"iw_dof", "iw_scale"}, {"dim", "niw_kappa", "niw_mu"});
    GaussianConfig c;
    c.dim = jio::get_or<int>(j, "dim", path, domain.dim());
    c.iw_dof = jio::get<double>(j, "iw_dof", path);
    const auto& scale = j.at("iw_scale");
    c.iw_scale = scale.is_number() ? Mat::Identity(c.dim, c.dim) * scale.get<double>()
                                   : jio::to_mat(scale, path + "/iw_scale");
    c.niw_kappa = jio::get_or<double>(j, "niw_kappa", path, 0.01);
    c.niw_mu = j.contains("niw_mu") ? jio::to_vec(j.at("niw_mu"), path + "/niw_mu") : domain.center();
    try {
        return GaussianModel(c, domain);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path, e.what());
    }
}

inline SequenceModel sequence_from_json(const json& j, const Domain& domain,
                                        const std::string& path = "model_config") {
    jio::check_keys(j, path, {"n_neurons", "n_types"},
                    {"warp_values", "n_warps", "max_warp", "type_conc", "neuron_conc",
                     "bg_neuron_conc", "offset_mean0", "offset_kappa0", "width_shape0",
                     "width_scale0", "globals"});
    SequenceConfig c;
    c.n_neurons = jio::get<int>(j, "n_neurons", path);
    c.n_types = jio::get<int>(j, "n_types", path);
    if (j.contains("warp_values")) {
        c.warp_values = jio::get<std::vector<double>>(j, "warp_values", path);
    } else if (j.contains("n_warps")) {
        c.warp_values = SequenceConfig::geometric_warp_grid(
            jio::get<int>(j, "n_warps", path), jio::get_or<double>(j, "max_warp", path, 1.0));
    }
    c.type_conc = jio::get_or<double>(j, "type_conc", path, 1.0);
    c.neuron_conc = jio::get_or<double>(j, "neuron_conc", path, 1.0);
    c.bg_neuron_conc = jio::get_or<double>(j, "bg_neuron_conc", path, 1.0);
    c.offset_mean0 = jio::get_or<double>(j, "offset_mean0", path, 0.0);
    c.offset_kappa0 = jio::get_or<double>(j, "offset_kappa0", path, 1.0);
    c.width_shape0 = jio::get_or<double>(j, "width_shape0", path, 2.0);
    c.width_scale0 = jio::get_or<double>(j, "width_scale0", path, 1.0);
    SequenceGlobals g = SequenceGlobals::uniform(c);
    if (j.contains("globals")) {
        const std::string gpath = path + "/globals";
        const auto& gj = j.at("globals");
        jio::check_keys(gj, gpath, {}, {"pi", "a", "offset", "width2", "a0"});
        if (gj.contains("pi")) g.pi = jio::to_vec(gj.at("pi"), gpath + "/pi");
        if (gj.contains("a")) g.a = jio::to_mat(gj.at("a"), gpath + "/a");
        if (gj.contains("offset")) g.offset = jio::to_mat(gj.at("offset"), gpath + "/offset");
        if (gj.contains("width2")) g.width2 = jio::to_mat(gj.at("width2"), gpath + "/width2");
        if (gj.contains("a0")) g.a0 = jio::to_vec(gj.at("a0"), gpath + "/a0");
    }
    try {
        return SequenceModel(c, g, domain);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path, e.what());
    }
}

inline DocumentModel document_from_json(const json& j, const Domain& domain,
                                        const std::string& path = "model_config") {
    jio::check_keys(j, path, {"n_authors", "vocab_size", "time_width"},
                    {"author_conc", "word_shape", "word_rate", "bg_author_conc", "bg_word_shape",
                     "bg_word_rate", "globals"});
    DocumentConfig c;
    c.n_authors = jio::get<int>(j, "n_authors", path);
    c.vocab_size = jio::get<int>(j, "vocab_size", path);
    c.time_width = jio::get<double>(j, "time_width", path);
    c.author_conc = jio::get_or<double>(j, "author_conc", path, 1.0);
    c.word_shape = jio::get_or<double>(j, "word_shape", path, 1.0);
    c.word_rate = jio::get_or<double>(j, "word_rate", path, 1.0);
    c.bg_author_conc = jio::get_or<double>(j, "bg_author_conc", path, 1.0);
    c.bg_word_shape = jio::get_or<double>(j, "bg_word_shape", path, 1.0);
    c.bg_word_rate = jio::get_or<double>(j, "bg_word_rate", path, 1.0);
    DocumentGlobals g = DocumentGlobals::flat(c);
    if (j.contains("globals")) {
        const std::string gpath = path + "/globals";
        const auto& gj = j.at("globals");
        jio::check_keys(gj, gpath, {}, {"theta0", "phi", "phi_init"});
        if (gj.contains("theta0")) g.theta0 = jio::to_vec(gj.at("theta0"), gpath + "/theta0");
        if (gj.contains("phi_init"))
            g.phi = Mat::Constant(c.n_authors, c.vocab_size, gj.at("phi_init").get<double>());
        if (gj.contains("phi")) g.phi = jio::to_mat(gj.at("phi"), gpath + "/phi");
    }
    try {
        return DocumentModel(c, g, domain);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path, e.what());
    }
}

// ------------------------------------------------------- globals snapshots
// Model globals evolve during fitting when step 4 is on; fits persist the
// final state so held-out evaluation can use it.

inline json model_globals_to_json(const GaussianModel&) { return json::object(); }

inline json model_globals_to_json(const SequenceModel& m) {
    const auto& g = m.globals();
    return json{{"pi", jio::from_vec(g.pi)},
                {"a", jio::from_mat(g.a)},
                {"offset", jio::from_mat(g.offset)},
                {"width2", jio::from_mat(g.width2)},
                {"a0", jio::from_vec(g.a0)}};
}

inline json model_globals_to_json(const DocumentModel& m) {
    const auto& g = m.globals();
    return json{{"theta0", jio::from_vec(g.theta0)}, {"phi", jio::from_mat(g.phi)}};
}

inline void apply_globals_json(GaussianModel&, const json&) {}

inline void apply_globals_json(SequenceModel& m, const json& j) {
    jio::check_keys(j, "globals", {"pi", "a", "offset", "width2", "a0"});
    auto& g = m.mutable_globals();
    g.pi = jio::to_vec(j.at("pi"), "globals/pi");
    g.a = jio::to_mat(j.at("a"), "globals/a");
    g.offset = jio::to_mat(j.at("offset"), "globals/offset");
    g.width2 = jio::to_mat(j.at("width2"), "globals/width2");
    g.a0 = jio::to_vec(j.at("a0"), "globals/a0");
}

inline void apply_globals_json(DocumentModel& m, const json& j) {
    jio::check_keys(j, "globals", {"theta0", "phi"});
    auto& g = m.mutable_globals();
    g.theta0 = jio::to_vec(j.at("theta0"), "globals/theta0");
    g.phi = jio::to_mat(j.at("phi"), "globals/phi");
    m.refresh_phi_rows();
}

// ------------------------------------------------------------------ file io

inline json load_json_file(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open " + file);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        // byte offset -> line number for the diagnostic
        std::ifstream again(file);
        std::string contents((std::istreambuf_iterator<char>(again)),
                             std::istreambuf_iterator<char>());
        long line = 1;
        for (std::size_t i = 0; i < std::min(contents.size(), static_cast<std::size_t>(e.byte)); ++i)
            if (contents[i] == '\n') ++line;
        throw ConfigError(file + ":line " + std::to_string(line), e.what());
    }
}

inline void write_text_file(const std::string& file, const std::string& contents) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot write " + file);
    out << contents;
}

}  // namespace nsp
