#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct CmdResult {
    int exit_code = -1;
    std::string output;
};

CmdResult run_cli(const std::string& args) {
    const char* bin = std::getenv("NSP_CLI");
    REQUIRE(bin != nullptr);
    const std::string cmd = std::string(bin) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CmdResult result;
    char buffer[4096];
    while (fgets(buffer, sizeof(buffer), pipe)) result.output += buffer;
    const int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

fs::path work_dir() {
    static fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "nsp_cli_tests";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string config_path(const std::string& name) {
    return std::string(NSP_SOURCE_DIR) + "/configs/" + name;
}

}  // namespace

TEST_CASE("help exits zero") {
    CHECK(run_cli("--help").exit_code == 0);
    CHECK(run_cli("generate --help").exit_code == 0);
    CHECK(run_cli("oracle --help").exit_code == 0);
}

TEST_CASE("generate is deterministic under a fixed seed") {
    const auto out1 = work_dir() / "g1.json";
    const auto out2 = work_dir() / "g2.json";
    auto r1 = run_cli("generate --config " + config_path("gaussian_synth.json") + " --out " +
                      out1.string() + " --seed 42");
    INFO(r1.output);
    REQUIRE(r1.exit_code == 0);
    auto r2 = run_cli("generate --config " + config_path("gaussian_synth.json") + " --out " +
                      out2.string() + " --seed 42");
    REQUIRE(r2.exit_code == 0);
    CHECK(slurp(out1) == slurp(out2));
    auto r3 = run_cli("generate --config " + config_path("gaussian_synth.json") + " --out " +
                      out2.string() + " --seed 43");
    REQUIRE(r3.exit_code == 0);
    CHECK(slurp(out1) != slurp(out2));
}

TEST_CASE("schema violations exit 2 with a field diagnostic") {
    const auto bad = work_dir() / "bad_config.json";
    std::ofstream(bad) << R"({"model":"gaussian2d","domain":{"lower":[0,0],"upper":[1,1]},)"
                       << R"("prior":{"alpha":1,"beta":1,"nu_bar":1},"model_config":{"iw_dof":5,"iw_scale":0.01},)"
                       << R"("surprise":true})";
    auto r = run_cli("generate --config " + bad.string() + " --out " + (work_dir() / "x.json").string());
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("surprise") != std::string::npos);

    const auto bad_json = work_dir() / "bad_syntax.json";
    std::ofstream(bad_json) << "{\n  \"model\": \"gaussian2d\",\n  !!!\n}";
    auto r2 = run_cli("generate --config " + bad_json.string() + " --out " +
                      (work_dir() / "y.json").string());
    CHECK(r2.exit_code == 2);
    CHECK(r2.output.find("line") != std::string::npos);
}

TEST_CASE("paper-scale sequence generation runs") {
    // S=1, Y=100, T=2000, nu_bar=0.02, alpha=225, beta=7.5, lambda0=3.
    nlohmann::json a_row = nlohmann::json::array();
    nlohmann::json offset = nlohmann::json::array();
    nlohmann::json width2 = nlohmann::json::array();
    for (int y = 0; y < 100; ++y) {
        a_row.push_back(0.01);
        offset.push_back({0.1 * y});
        width2.push_back({0.04});
    }
    nlohmann::json cfg{
        {"model", "sequence"},
        {"domain", {{"lower", {0.0}}, {"upper", {2000.0}}}},
        {"prior", {{"alpha", 225.0}, {"beta", 7.5}, {"nu_bar", 0.02}}},
        {"background", {{"rate", 3.0}}},
        {"model_config",
         {{"n_neurons", 100},
          {"n_types", 1},
          {"globals", {{"pi", {1.0}}, {"a", nlohmann::json::array({a_row})}, {"offset", offset}, {"width2", width2}}}}},
        {"seed", 5}};
    const auto cfg_path = work_dir() / "seq_paper.json";
    std::ofstream(cfg_path) << cfg.dump(2);
    const auto out = work_dir() / "seq_paper_data.json";
    auto r = run_cli("generate --config " + cfg_path.string() + " --out " + out.string());
    INFO(r.output);
    REQUIRE(r.exit_code == 0);
    auto data = nlohmann::json::parse(slurp(out));
    // E[N] = 40 * 30 + 6000 background; allow a wide band.
    CHECK(data["points"].size() > 5000);
    CHECK(data["z"].size() == data["points"].size());
}

TEST_CASE("fit, sharded fit, dpmm-limit fit, and eval round trip") {
    const auto cfg = config_path("gaussian_synth.json");
    const auto data = work_dir() / "fit_data.json";
    REQUIRE(run_cli("generate --config " + cfg + " --out " + data.string() + " --seed 9").exit_code == 0);

    const auto chains = work_dir() / "run";
    auto fit = run_cli("fit --config " + cfg + " --data " + data.string() + " --out " +
                       chains.string() + " --chains 2 --samples 60 --seed 9");
    INFO(fit.output);
    REQUIRE(fit.exit_code == 0);
    REQUIRE(fs::exists(chains.string() + ".chain0.jsonl"));
    REQUIRE(fs::exists(chains.string() + ".chain1.csv"));

    // Each retained sample is a JSON line.
    std::ifstream jsonl(chains.string() + ".chain0.jsonl");
    std::string line;
    long lines = 0;
    while (std::getline(jsonl, line))
        if (!line.empty()) {
            auto j = nlohmann::json::parse(line);
            CHECK(j.contains("z"));
            ++lines;
        }
    CHECK(lines == 30);  // warmup half of 60

    auto fit_dpmm = run_cli("fit --config " + cfg + " --data " + data.string() + " --out " +
                            (work_dir() / "run_dpmm").string() +
                            " --chains 1 --samples 40 --mode dpmm-limit --seed 9");
    REQUIRE(fit_dpmm.exit_code == 0);

    auto fit_shards = run_cli("fit --config " + cfg + " --data " + data.string() + " --out " +
                              (work_dir() / "run_shard").string() +
                              " --chains 1 --samples 40 --shards 4 --seed 9");
    INFO(fit_shards.output);
    REQUIRE(fit_shards.exit_code == 0);

    const auto metrics = work_dir() / "metrics.csv";
    auto eval = run_cli("eval --config " + cfg + " --data " + data.string() + " --chains-files " +
                        chains.string() + ".chain0.jsonl " + chains.string() + ".chain1.jsonl" +
                        " --out " + metrics.string() + " --truth");
    INFO(eval.output);
    REQUIRE(eval.exit_code == 0);
    const std::string csv = slurp(metrics);
    CHECK(csv.find("co_occupancy_mean") != std::string::npos);
    CHECK(csv.find("cluster_count_mean") != std::string::npos);

    // nothing to evaluate -> exit 2
    auto nothing = run_cli("eval --config " + cfg + " --data " + data.string() + " --chains-files " +
                           chains.string() + ".chain0.jsonl --out " + metrics.string());
    CHECK(nothing.exit_code == 2);

    // malformed dataset -> nonzero with message
    const auto broken = work_dir() / "broken.json";
    std::ofstream(broken) << R"({"points":[{"x":[5.0,5.0]}],"z":[1]})";
    auto bad = run_cli("fit --config " + cfg + " --data " + broken.string() + " --out " +
                       (work_dir() / "nope").string());
    CHECK(bad.exit_code != 0);
    CHECK(bad.output.find("outside") != std::string::npos);
}

TEST_CASE("masked fit and held-out evaluation") {
    const auto cfg_path = work_dir() / "doc_cfg.json";
    {
        auto j = nlohmann::json::parse(slurp(config_path("document_synth.json")));
        j["samples"] = 40;
        j["chains"] = 1;
        j["anneal"] = {{"stages", 2}, {"sweeps_per_stage", 10}, {"initial_temperature", 10.0}};
        std::ofstream(cfg_path) << j.dump(2);
    }
    const auto data = work_dir() / "doc_data.json";
    REQUIRE(run_cli("generate --config " + cfg_path.string() + " --out " + data.string()).exit_code == 0);
    const auto mask = work_dir() / "doc_mask.json";
    std::ofstream(mask) << R"({"regions":[{"lower":[10.0],"upper":[14.0]},{"lower":[22.0],"upper":[26.0],"group":1}]})";
    const auto prefix = work_dir() / "doc_run";
    auto fit = run_cli("fit --config " + cfg_path.string() + " --data " + data.string() + " --out " +
                       prefix.string() + " --mask " + mask.string());
    INFO(fit.output);
    REQUIRE(fit.exit_code == 0);
    const auto metrics = work_dir() / "doc_metrics.csv";
    auto eval = run_cli("eval --config " + cfg_path.string() + " --data " + data.string() +
                        " --chains-files " + prefix.string() + ".chain0.jsonl --out " +
                        metrics.string() + " --mask " + mask.string() + " --truth");
    INFO(eval.output);
    REQUIRE(eval.exit_code == 0);
    CHECK(slurp(metrics).find("heldout_ll_per_point") != std::string::npos);
}

TEST_CASE("urn study output") {
    const auto out = work_dir() / "urns.csv";
    auto r = run_cli("urns --n 100 --draws 400 --seed 3 --out " + out.string());
    INFO(r.output);
    REQUIRE(r.exit_code == 0);
    std::ifstream csv(out);
    std::string header;
    std::getline(csv, header);
    CHECK(header == "mode,alpha,gamma,delta,mean_k,sd_k,example_labels");
    std::map<std::pair<std::string, double>, std::map<double, double>> mean_k;  // (mode,gamma)->alpha->mean
    std::string line;
    while (std::getline(csv, line)) {
        std::stringstream ss(line);
        std::string mode, field;
        std::getline(ss, mode, ',');
        std::getline(ss, field, ',');
        const double alpha = std::stod(field);
        std::getline(ss, field, ',');
        const double gamma = std::stod(field);
        std::getline(ss, field, ',');  // delta
        std::getline(ss, field, ',');
        const double mean = std::stod(field);
        mean_k[{mode, gamma}][alpha] = mean;
    }
    // CRP mean cluster count at gamma=1, n=100 is roughly H_100 ~ 5.19.
    CHECK(std::fabs(mean_k[{"dpmm-limit", 1.0}][0.0] - 5.19) < 0.6);
    // increasing alpha decreases mean |C| along the urn trajectories
    for (double gamma : {1.0, 10.0}) {
        const double a0 = mean_k[{"dpmm-limit", gamma}][0.0];
        const double a1 = mean_k[{"nsp", gamma}][1.0];
        const double a100 = mean_k[{"nsp", gamma}][100.0];
        const double a10000 = mean_k[{"nsp", gamma}][10000.0];
        INFO("gamma " << gamma << ": " << a0 << " " << a1 << " " << a100 << " " << a10000);
        CHECK(a0 > a1);
        CHECK(a1 > a100);
        CHECK(a100 > a10000);
    }
    // gamma ordering at alpha = 0
    CHECK(mean_k[{"dpmm-limit", 10.0}][0.0] > mean_k[{"dpmm-limit", 1.0}][0.0]);
}

TEST_CASE("oracle subcommands") {
    auto parts = run_cli("oracle partitions --n 5");
    REQUIRE(parts.exit_code == 0);
    CHECK(parts.output.find("count 52") != std::string::npos);
    CHECK(run_cli("oracle partitions --n 11").exit_code == 2);

    auto v = run_cli("oracle vcoeff --n 1 --k 1 --alpha 1 --beta 1 --lbar 1");
    REQUIRE(v.exit_code == 0);
    CHECK(v.output.find("0.151632") != std::string::npos);

    auto pn = run_cli("oracle pn --n 1 --alpha 1 --beta 1 --lbar 1");
    REQUIRE(pn.exit_code == 0);
    CHECK(pn.output.find("0.151632") != std::string::npos);

    auto schein = run_cli("oracle schein --n 1 --lmax 10 --alpha 1 --beta 1 --lbar 1");
    REQUIRE(schein.exit_code == 0);
    CHECK(schein.output.find("0 0\n") != std::string::npos);

    // tiny-posterior oracle
    const auto tiny = work_dir() / "tiny.json";
    std::ofstream(tiny) << R"({"points":[{"x":[0.4,0.5]},{"x":[0.6,0.5]}],"z":[1,2]})";
    auto post = run_cli("oracle posterior --config " + config_path("gaussian_synth.json") +
                        " --data " + tiny.string());
    INFO(post.output);
    REQUIRE(post.exit_code == 0);
    CHECK(post.output.find("p=") != std::string::npos);
}
