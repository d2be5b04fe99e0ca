#include <catch2/catch_amalgamated.hpp>
#include <map>
#include <set>

#include "nsp/models/gaussian.hpp"
#include "nsp/parallel.hpp"
#include "nsp/samplers.hpp"
#include "support/stats.hpp"

using namespace nsp;

namespace {

GaussianModel well_separated_model() {
    Domain domain = Domain::box({0.0, 0.0}, {1.0, 1.0});
    return GaussianModel(GaussianConfig::isotropic(domain, 8.0, 0.0006), domain);
}

}  // namespace

TEST_CASE("shard plan validation and mapping") {
    Domain domain = Domain::box({0.0, 0.0}, {1.0, 1.0});
    auto plan = ShardPlan::even(domain, 4, 0);
    plan.validate(domain);
    CHECK(plan.measure_fraction(0) == Catch::Approx(0.25));

    RngStream rng(601, 0);
    for (int i = 0; i < 200; ++i) {
        Vec x = domain.sample_uniform(rng);
        const int s = plan.shard_of(x);
        CHECK(s == plan.shard_of(x));  // function of location only
        CHECK(s >= 0);
        CHECK(s < 4);
        CHECK(x[0] >= plan.boundaries[static_cast<std::size_t>(s)]);
    }
    Vec edge(2);
    edge << 1.0, 0.3;
    CHECK(plan.shard_of(edge) == 3);  // last interval closed

    ShardPlan bad = plan;
    bad.boundaries.back() = 0.9;
    CHECK_THROWS_AS(bad.validate(domain), std::invalid_argument);
    ShardPlan bad2 = plan;
    bad2.boundaries[1] = bad2.boundaries[2];
    CHECK_THROWS_AS(bad2.validate(domain), std::invalid_argument);
}

TEST_CASE("single shard reproduces the sequential chain bitwise") {
    auto model = well_separated_model();
    GammaWeightPrior prior(3.0, 0.15, 5.0);
    BackgroundRate bg{0.5, 1.0, 1.0};
    RngStream gen(602, 0);
    auto data = sample_with_background(model, prior, bg, model.domain(), gen);
    REQUIRE(data.points.size() > 10);

    GibbsOptions options;
    options.audit_interval = 20;
    AnnealSchedule schedule{3, 5, 20.0};
    auto sequential =
        run_chain(model, prior, bg, options, data.points, schedule, 40, RngStream(77, 3));
    auto parallel = run_parallel_chain(model, prior, bg, options, data.points,
                                       ShardPlan::even(model.domain(), 1), schedule, 40,
                                       RngStream(77, 3));
    REQUIRE(sequential.samples.size() == parallel.samples.size());
    for (std::size_t i = 0; i < sequential.samples.size(); ++i) {
        CHECK(sequential.samples[i].z == parallel.samples[i].z);
        CHECK(sequential.samples[i].joint_log_density == parallel.samples[i].joint_log_density);
        CHECK(sequential.samples[i].nu_bar == parallel.samples[i].nu_bar);
        CHECK(sequential.samples[i].beta == parallel.samples[i].beta);
        CHECK(sequential.samples[i].background_rate == parallel.samples[i].background_rate);
    }
}

TEST_CASE("clusters never straddle shard boundaries") {
    auto model = well_separated_model();
    GammaWeightPrior prior(3.0, 0.15, 5.0);
    RngStream gen(603, 0);
    auto data = sample_nsp_v1(model, prior, model.domain(), gen);
    REQUIRE(data.points.size() > 10);
    auto plan = ShardPlan::even(model.domain(), 2);
    GibbsOptions options;
    options.resample_background = false;
    auto record = run_parallel_chain(model, prior, BackgroundRate{0.0, 1.0, 1.0}, options,
                                     data.points, plan, AnnealSchedule{2, 5, 10.0}, 30,
                                     RngStream(604, 0));
    for (const auto& s : record.samples) {
        std::map<int, std::set<int>> cluster_shards;
        for (std::size_t i = 0; i < s.z.size(); ++i) {
            if (s.z[i] == 0) continue;
            cluster_shards[s.z[i]].insert(plan.shard_of(data.points[i].x));
        }
        for (const auto& [label, shards] : cluster_shards) CHECK(shards.size() == 1);
    }
}

TEST_CASE("four shards approximate the sequential cluster-count posterior") {
    auto model = well_separated_model();
    GammaWeightPrior prior(3.0, 0.12, 6.0);
    // One tight cluster in the interior of each of the four slabs.
    RngStream gen(605, 0);
    std::vector<GaussianModel::Point> pts;
    for (double cx : {0.12, 0.38, 0.62, 0.88}) {
        for (int i = 0; i < 20; ++i) {
            Vec v(2);
            v << cx + 0.02 * gen.normal(), 0.5 + 0.02 * gen.normal();
            if (v[0] < 0.0 || v[0] > 1.0 || v[1] < 0.0 || v[1] > 1.0) {
                --i;
                continue;
            }
            pts.push_back({v, {}});
        }
    }

    GibbsOptions options;
    options.resample_background = false;
    options.resample_beta = false;
    options.resample_rate = false;
    AnnealSchedule schedule{4, 10, 50.0};
    auto seq = run_chain(model, prior, BackgroundRate{0.0, 1.0, 1.0}, options, pts, schedule, 400,
                         RngStream(606, 1));
    auto par = run_parallel_chain(model, prior, BackgroundRate{0.0, 1.0, 1.0}, options, pts,
                                  ShardPlan::even(model.domain(), 4), schedule, 400,
                                  RngStream(606, 2));
    std::map<int, long> ka, kb;
    for (const auto& s : seq.samples) ++ka[s.n_clusters];
    for (const auto& s : par.samples) ++kb[s.n_clusters];
    std::map<int, double> pb;
    for (const auto& [k, c] : kb) pb[k] = static_cast<double>(c) / par.samples.size();
    const double tv = testsupport::total_variation(ka, pb, static_cast<long>(seq.samples.size()));
    INFO("TV = " << tv);
    CHECK(tv < 0.1);
}

TEST_CASE("empty shards are legal") {
    auto model = well_separated_model();
    std::vector<GaussianModel::Point> pts;
    Vec v(2);
    v << 0.1, 0.1;  // everything in shard 0 of 4
    pts.push_back({v, {}});
    GibbsOptions options;
    auto record = run_parallel_chain(model, GammaWeightPrior(1.0, 1.0, 2.0),
                                     BackgroundRate{0.1, 1.0, 1.0}, options, pts,
                                     ShardPlan::even(model.domain(), 4), AnnealSchedule::none(), 10,
                                     RngStream(607, 0));
    CHECK(record.samples.size() == 5);
}
