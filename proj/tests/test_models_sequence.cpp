#include <catch2/catch_amalgamated.hpp>
#include <algorithm>
#include <cmath>
#include <random>

#include "nsp/models/sequence.hpp"
#include "support/stats.hpp"

using namespace nsp;

namespace {

SequenceModel::Point spike(double t, int neuron) {
    Vec v(1);
    v << t;
    return {v, {neuron}};
}

SequenceModel small_model(std::vector<double> warps, double t_max = 10.0) {
    SequenceConfig c;
    c.n_neurons = 3;
    c.n_types = 2;
    c.warp_values = std::move(warps);
    SequenceGlobals g = SequenceGlobals::uniform(c);
    g.pi << 0.6, 0.4;
    g.a.row(0) << 0.5, 0.3, 0.2;
    g.a.row(1) << 0.1, 0.2, 0.7;
    g.offset << 0.0, 0.5, -0.3, 0.8, 0.1, 0.0;
    g.width2 << 0.04, 0.09, 0.25, 0.16, 0.04, 0.09;
    g.a0 << 0.25, 0.25, 0.5;
    return SequenceModel(c, g, Domain::interval(0.0, t_max));
}

}  // namespace

TEST_CASE("single type, single warp: marginal collapses to a[y]/T") {
    SequenceConfig c;
    c.n_neurons = 4;
    c.n_types = 1;
    SequenceGlobals g = SequenceGlobals::uniform(c);
    SequenceModel model(c, g, Domain::interval(0.0, 20.0));
    CHECK(model.log_marginal_new(spike(3.0, 2)) ==
          Catch::Approx(std::log(0.25 / 20.0)).epsilon(1e-12));
    CHECK_THROWS_AS(model.log_marginal_new(spike(3.0, 7)), std::domain_error);
}

TEST_CASE("empty predictive equals marginal; add/remove inverse") {
    auto model = small_model({0.5, 1.0, 2.0});
    auto p = spike(4.2, 1);
    CHECK(model.log_predictive(model.empty_stats(), p) ==
          Catch::Approx(model.log_marginal_new(p)).epsilon(1e-12));

    auto stats = model.empty_stats();
    model.add(stats, spike(3.0, 0));
    model.add(stats, spike(3.6, 2));
    auto snapshot = stats;
    model.add(stats, p);
    model.remove(stats, p);
    CHECK(stats.n == snapshot.n);
    CHECK((stats.j - snapshot.j).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((stats.h - snapshot.h).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((stats.q - snapshot.q).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((stats.b_sum - snapshot.b_sum).cwiseAbs().maxCoeff() < 1e-12);
    auto empty = model.empty_stats();
    CHECK_THROWS_AS(model.remove(empty, p), std::logic_error);
}

TEST_CASE("chain-rule total is permutation invariant and equals evidence") {
    auto model = small_model({0.5, 1.0, 2.0});
    std::vector<SequenceModel::Point> pts = {spike(2.0, 0), spike(2.4, 1), spike(2.1, 2),
                                             spike(2.7, 0), spike(1.9, 1), spike(2.2, 2)};
    auto chain_total = [&](const std::vector<SequenceModel::Point>& order) {
        auto stats = model.empty_stats();
        double total = 0.0;
        for (const auto& p : order) {
            total += model.log_predictive(stats, p);
            model.add(stats, p);
        }
        return total;
    };
    const double reference = chain_total(pts);
    auto full = model.empty_stats();
    for (const auto& p : pts) model.add(full, p);
    CHECK(reference == Catch::Approx(model.log_evidence(full)).margin(1e-10));
    std::mt19937 shuffler(11);
    for (int rep = 0; rep < 50; ++rep) {
        auto order = pts;
        std::shuffle(order.begin(), order.end(), shuffler);
        CHECK(chain_total(order) == Catch::Approx(reference).margin(1e-8));
    }
}

TEST_CASE("one-spike predictive matches a Monte-Carlo of the generative joint") {
    auto model = small_model({0.5, 1.0, 2.0}, 10.0);
    const auto p1 = spike(5.0, 1);
    const auto p2 = spike(5.4, 2);
    auto stats = model.empty_stats();
    model.add(stats, p1);
    const double closed = model.log_predictive(stats, p2);

    // MC of the joint and the marginal: m ~ Unif(0,T), (s,f) ~ prior.
    RngStream rng(301, 0);
    const auto& g = model.globals();
    const auto& c = model.config();
    double joint = 0.0, marg = 0.0;
    const long draws = 2000000;
    for (long i = 0; i < draws; ++i) {
        const int s = rng.uniform() < g.pi[0] ? 0 : 1;
        const int f = static_cast<int>(rng.uniform() * 3.0);
        const double tau = c.warp_values[static_cast<std::size_t>(f)];
        const double m = rng.uniform(0.0, 10.0);
        auto emission = [&](const SequenceModel::Point& p) {
            const int y = p.mark.neuron;
            return g.a(s, y) *
                   std::exp(normal_logpdf(p.x[0], m + tau * g.offset(y, s), tau * g.width2(y, s)));
        };
        const double e1 = emission(p1);
        joint += e1 * emission(p2);
        marg += e1;
    }
    const double mc = std::log(joint / marg);
    CHECK(closed == Catch::Approx(mc).margin(0.02));
}

TEST_CASE("warp grid helper") {
    auto g1 = SequenceConfig::geometric_warp_grid(1, 3.0);
    CHECK(g1 == std::vector<double>{1.0});
    auto g5 = SequenceConfig::geometric_warp_grid(5, 2.0);
    REQUIRE(g5.size() == 5);
    CHECK(g5.front() == Catch::Approx(0.5));
    CHECK(g5[2] == Catch::Approx(1.0));
    CHECK(g5.back() == Catch::Approx(2.0));
    for (std::size_t i = 0; i + 1 < g5.size(); ++i) CHECK(g5[i] < g5[i + 1]);
}

TEST_CASE("trivial warp grid is bitwise-consistent with the unwarped computation") {
    auto model = small_model({1.0});
    const auto& g = model.globals();
    const double t_measure = 10.0;
    std::vector<SequenceModel::Point> pts = {spike(2.0, 0), spike(2.4, 1), spike(2.1, 2),
                                             spike(6.5, 0)};
    // Reference unwarped evidence: same accumulation order, no warp factors.
    auto unwarped_evidence = [&](const std::vector<SequenceModel::Point>& order) {
        const int s_count = 2;
        std::vector<double> j(s_count, 0.0), h(s_count, 0.0), q(s_count, 0.0), a(s_count, 0.0),
            b(s_count, 0.0);
        for (const auto& p : order) {
            const int y = p.mark.neuron;
            const double x = p.x[0];
            for (int s = 0; s < s_count; ++s) {
                const double v = g.width2(y, s);
                const double cc = g.offset(y, s);
                const double r = x - cc;
                j[static_cast<std::size_t>(s)] += 1.0 / v;
                h[static_cast<std::size_t>(s)] += r / v;
                q[static_cast<std::size_t>(s)] += r * r / v;
                a[static_cast<std::size_t>(s)] += -0.5 * (kLog2Pi + std::log(v));
                b[static_cast<std::size_t>(s)] += std::log(g.a(s, y));
            }
        }
        std::vector<double> lw(s_count);
        for (int s = 0; s < s_count; ++s) {
            const auto si = static_cast<std::size_t>(s);
            lw[si] = std::log(g.pi[s]) - std::log(1.0) + b[si] + a[si] - 0.5 * q[si] +
                     0.5 * h[si] * h[si] / j[si] + 0.5 * (kLog2Pi - std::log(j[si])) -
                     std::log(t_measure);
        }
        return log_sum_exp(lw);
    };
    auto stats = model.empty_stats();
    for (const auto& p : pts) model.add(stats, p);
    CHECK(model.log_evidence(stats) == unwarped_evidence(pts));  // bitwise
    for (const auto& p : pts)
        CHECK(model.log_marginal_new(p) ==
              std::log(g.pi[0] * g.a(0, p.mark.neuron) + g.pi[1] * g.a(1, p.mark.neuron)) -
                  std::log(t_measure));
}

TEST_CASE("emission sampling with a warp factor of two") {
    auto model = small_model({2.0}, 1000.0);
    RngStream rng(302, 0);
    SequenceModel::Params params{500.0, 1, 0};
    std::vector<double> xs;
    long y1_count = 0;
    const long draws = 200000;
    for (long i = 0; i < draws; ++i) {
        auto p = model.sample_point(params, rng);
        if (p.mark.neuron == 1) {
            xs.push_back(p.x[0]);
            ++y1_count;
        }
    }
    // neuron 1 under type 1: offset 0.8, width2 0.16; warped mean m + 2b, var 2 sigma^2.
    auto ms = testsupport::mean_se(xs);
    CHECK(std::fabs(ms.mean - 501.6) < 4.0 * ms.se);
    double var = 0.0;
    for (double x : xs) var += (x - ms.mean) * (x - ms.mean);
    var /= (static_cast<double>(xs.size()) - 1.0);
    CHECK(var == Catch::Approx(0.32).margin(0.008));
    CHECK(std::fabs(static_cast<double>(y1_count) / draws - 0.2) < 0.01);
}

TEST_CASE("global resampling concentrates where the data sit") {
    SequenceConfig c;
    c.n_neurons = 3;
    c.n_types = 1;
    SequenceGlobals g = SequenceGlobals::uniform(c);
    SequenceModel model(c, g, Domain::interval(0.0, 10.0));
    struct ClusterInfo {
        SequenceModel::Params params;
        std::vector<const SequenceModel::Point*> members;
    };
    std::vector<SequenceModel::Point> storage;
    for (int i = 0; i < 50; ++i) storage.push_back(spike(5.0 + 0.01 * i, 1));
    std::vector<ClusterInfo> clusters(1);
    clusters[0].params = {5.0, 0, 0};
    for (const auto& p : storage) clusters[0].members.push_back(&p);
    RngStream rng(303, 0);
    double a1_sum = 0.0;
    const int reps = 2000;
    for (int i = 0; i < reps; ++i) {
        model.resample_globals(clusters, {}, rng);
        a1_sum += model.globals().a(0, 1);
    }
    CHECK(a1_sum / reps > 0.9);  // 50 spikes vs a symmetric prior of total mass 3
}

TEST_CASE("prior moments of pi are preserved by generate-resample cycling") {
    // Successive-conditional check of the global updates: cycle
    // (clusters | globals) then (globals | clusters) and track pi.
    SequenceConfig c;
    c.n_neurons = 2;
    c.n_types = 2;
    c.type_conc = 1.5;
    SequenceGlobals g = SequenceGlobals::uniform(c);
    SequenceModel model(c, g, Domain::interval(0.0, 10.0));
    struct ClusterInfo {
        SequenceModel::Params params;
        std::vector<const SequenceModel::Point*> members;
    };
    RngStream rng(304, 0);
    std::vector<double> pi_draws;
    std::vector<SequenceModel::Point> storage;
    for (int cycle = 0; cycle < 20000; ++cycle) {
        storage.clear();
        storage.reserve(6);
        std::vector<SequenceModel::Params> params(3);
        for (auto& prm : params) {
            prm = model.sample_prior_params(rng);
            storage.push_back(model.sample_point(prm, rng));
            storage.push_back(model.sample_point(prm, rng));
        }
        std::vector<ClusterInfo> clusters(3);
        for (int k = 0; k < 3; ++k) {
            clusters[static_cast<std::size_t>(k)].params = params[static_cast<std::size_t>(k)];
            clusters[static_cast<std::size_t>(k)].members = {
                &storage[static_cast<std::size_t>(2 * k)],
                &storage[static_cast<std::size_t>(2 * k + 1)]};
        }
        model.resample_globals(clusters, {}, rng);
        pi_draws.push_back(model.globals().pi[0]);
    }
    auto ms = testsupport::batch_mean_se(pi_draws);
    CHECK(std::fabs(ms.mean - 0.5) < 4.0 * ms.se);
    std::vector<double> sq(pi_draws.size());
    for (std::size_t i = 0; i < pi_draws.size(); ++i) sq[i] = pi_draws[i] * pi_draws[i];
    auto ms2 = testsupport::batch_mean_se(sq);
    // Dir(1.5, 1.5): Var(pi_1) = 0.0625, so E[pi^2] = 0.3125.
    CHECK(std::fabs(ms2.mean - 0.3125) < 4.0 * ms2.se);
}
