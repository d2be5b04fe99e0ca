#include <catch2/catch_amalgamated.hpp>
#include <map>
#include <sstream>

#include "nsp/models/gaussian.hpp"
#include "nsp/samplers.hpp"
#include "support/stats.hpp"
#include "support/stub_model.hpp"

using namespace nsp;
using testsupport::StubModel;

namespace {

template <class Model>
std::string size_key(const GeneratedDataset<Model>& d) {
    std::ostringstream os;
    os << d.points.size() << ":";
    for (int s : d.truth.size_multiset()) os << s << ",";
    return os.str();
}

}  // namespace

TEST_CASE("zero latent rate gives an empty dataset") {
    StubModel model(Domain::interval(0.0, 1.0));
    RngStream rng(101, 0);
    auto d = sample_nsp_v1(model, GammaWeightPrior(1.0, 1.0, 0.0), model.domain(), rng);
    CHECK(d.points.empty());
    CHECK(d.latents.empty());
    CHECK(d.empty_latents.empty());
}

TEST_CASE("mean point count is lbar alpha / beta") {
    StubModel model(Domain::interval(0.0, 2.0));
    GammaWeightPrior prior(2.0, 1.5, 1.5);  // lbar = 3, E[N] = 3*2/1.5 = 4
    RngStream rng(102, 0);
    std::vector<double> ns(100000);
    for (double& n : ns)
        n = static_cast<double>(sample_nsp_v1(model, prior, model.domain(), rng).points.size());
    auto ms = testsupport::mean_se(ns);
    CHECK(std::fabs(ms.mean - 4.0) < 4.0 * ms.se);
}

TEST_CASE("variance of N matches the law of total variance through Po-Ga") {
    StubModel model(Domain::interval(0.0, 1.0));
    GammaWeightPrior prior(1.5, 1.0, 2.0);
    RngStream rng(103, 0);
    const long draws = 1000000;
    double s1 = 0.0, s2 = 0.0;
    for (long i = 0; i < draws; ++i) {
        const double n =
            static_cast<double>(sample_nsp_v1(model, prior, model.domain(), rng).points.size());
        s1 += n;
        s2 += n * n;
    }
    const double mean = s1 / draws;
    const double var = s2 / draws - mean * mean;
    const double lbar_v = 2.0, a = 1.5, b = 1.0;
    const double expected = lbar_v * a / b + lbar_v * a * (1.0 + a) / (b * b);
    CHECK(std::fabs(var - expected) / expected < 0.02);
}

TEST_CASE("pairwise construction equivalence on (N, sorted sizes)") {
    StubModel model(Domain::interval(0.0, 1.0));
    GammaWeightPrior prior(1.5, 1.0, 2.0);
    const long draws = 60000;
    auto collect = [&](Construction c, std::uint64_t stream) {
        RngStream rng(104, stream);
        std::map<std::string, long> counts;
        for (long i = 0; i < draws; ++i)
            ++counts[size_key(sample_nsp(c, model, prior, model.domain(), rng))];
        return counts;
    };
    auto c1 = collect(Construction::v1, 1);
    auto c2 = collect(Construction::v2, 2);
    auto c4 = collect(Construction::v4, 4);
    auto c5 = collect(Construction::v5, 5);
    CHECK(testsupport::two_sample_chi_square_pvalue(c1, c2) > 0.01);
    CHECK(testsupport::two_sample_chi_square_pvalue(c1, c5) > 0.01);
    CHECK(testsupport::two_sample_chi_square_pvalue(c4, c5) > 0.01);
}

TEST_CASE("conditioned on one latent event, N is negative binomial") {
    StubModel model(Domain::interval(0.0, 1.0));
    GammaWeightPrior prior(2.0, 1.0, 0.25);
    RngStream rng(105, 0);
    std::map<long, long> counts;
    long hits = 0;
    for (long i = 0; i < 400000; ++i) {
        auto d = sample_nsp_v2(model, prior, model.domain(), rng);
        if (d.latents.size() + d.empty_latents.size() == 1) {
            ++counts[static_cast<long>(d.points.size())];
            ++hits;
        }
    }
    std::map<long, double> probs;
    for (long k = 0; k < 100; ++k) probs[k] = std::exp(log_neg_binomial_pmf(k, 2.0, 0.5));
    CHECK(testsupport::chi_square_vs_exact_pvalue(counts, probs, hits) > 0.001);
}

TEST_CASE("P(N = 0) matches the collapsed closed form") {
    StubModel model(Domain::interval(0.0, 1.0));
    GammaWeightPrior prior(1.5, 1.0, 2.0);
    RngStream rng(106, 0);
    const double x = std::pow(0.5, 1.5);
    const double expected = std::exp(-2.0 * (1.0 - x));
    long zeros = 0;
    const long draws = 300000;
    for (long i = 0; i < draws; ++i)
        zeros += sample_nsp_v4(model, prior, model.domain(), rng).points.empty();
    const double freq = static_cast<double>(zeros) / draws;
    CHECK(std::fabs(freq - expected) < 4.0 * std::sqrt(expected * (1.0 - expected) / draws));
}

TEST_CASE("v5 structure: N equals the sum of cluster sizes") {
    StubModel model(Domain::interval(0.0, 1.0));
    GammaWeightPrior prior(1.5, 1.0, 2.0);
    RngStream rng(107, 0);
    for (int i = 0; i < 200; ++i) {
        auto d = sample_nsp_v5(model, prior, model.domain(), rng);
        long total = 0;
        for (int s : d.truth.size_multiset()) total += s;
        CHECK(total == static_cast<long>(d.points.size()));
        CHECK(d.empty_latents.empty());
        d.truth.validate();
    }
}

TEST_CASE("empty-latent count from forward draws matches the Poisson mean") {
    StubModel model(Domain::interval(0.0, 4.0));
    GammaWeightPrior prior(1.0, 1.0, 1.0);  // lbar = 4, mean empties = 2
    RngStream rng(108, 0);
    std::vector<double> v1_counts(30000), v3_counts(30000);
    for (double& c : v1_counts)
        c = static_cast<double>(sample_nsp_v1(model, prior, model.domain(), rng).empty_latents.size());
    for (double& c : v3_counts)
        c = static_cast<double>(sample_nsp_v3(model, prior, model.domain(), rng).empty_latents.size());
    auto m1 = testsupport::mean_se(v1_counts);
    auto m3 = testsupport::mean_se(v3_counts);
    CHECK(std::fabs(m1.mean - 2.0) < 4.0 * m1.se);
    CHECK(std::fabs(m3.mean - 2.0) < 4.0 * m3.se);
}

TEST_CASE("background superposition") {
    StubModel model(Domain::interval(0.0, 2.0));
    GammaWeightPrior prior(1.5, 1.0, 2.0);

    SECTION("zero background rate reproduces the plain draw bitwise") {
        RngStream rng_a(109, 0), rng_b(109, 0);
        auto plain = sample_nsp_v1(model, prior, model.domain(), rng_a);
        auto with_bg = sample_with_background(model, prior, BackgroundRate{0.0, 1.0, 1.0},
                                              model.domain(), rng_b);
        CHECK(with_bg.truth.background.empty());
        REQUIRE(with_bg.points.size() == plain.points.size());
        for (std::size_t i = 0; i < plain.points.size(); ++i)
            CHECK(with_bg.points[i].x[0] == plain.points[i].x[0]);
    }

    SECTION("zero latent rate gives pure Poisson background") {
        GammaWeightPrior empty_prior(1.0, 1.0, 0.0);
        BackgroundRate bg{1.5, 1.0, 1.0};  // w0 = 3
        RngStream rng(110, 0);
        std::map<long, long> counts;
        const long draws = 200000;
        for (long i = 0; i < draws; ++i) {
            auto d = sample_with_background(model, empty_prior, bg, model.domain(), rng);
            CHECK(d.truth.background.size() == d.points.size());
            ++counts[static_cast<long>(d.points.size())];
        }
        std::map<long, double> probs;
        for (long k = 0; k < 60; ++k) probs[k] = std::exp(log_poisson_pmf(k, 3.0));
        CHECK(testsupport::chi_square_vs_exact_pvalue(counts, probs, draws) > 0.001);
    }

    SECTION("background fraction matches the ratio of means") {
        BackgroundRate bg{1.0, 1.0, 1.0};  // w0 = 2
        RngStream rng(111, 0);
        double bg_sum = 0.0, n_sum = 0.0;
        for (long i = 0; i < 100000; ++i) {
            auto d = sample_with_background(model, prior, bg, model.domain(), rng);
            bg_sum += static_cast<double>(d.truth.background.size());
            n_sum += static_cast<double>(d.points.size());
        }
        // E[|C0|] / E[N] = w0 / (w0 + lbar alpha / beta) = 2 / (2 + 6) = 0.25.
        CHECK(bg_sum / n_sum == Catch::Approx(0.25).margin(0.01));
    }
}

TEST_CASE("emission truncation") {
    Domain domain = Domain::box({0.0, 0.0}, {1.0, 1.0});
    auto config = GaussianConfig::isotropic(domain, 6.0, 0.5);  // wide clusters, frequent overflow
    GaussianModel model(config, domain);
    GammaWeightPrior prior(3.0, 0.5, 3.0);
    RngStream rng(112, 0);
    long n_points = 0;
    for (int i = 0; i < 50; ++i) {
        auto d = sample_nsp_v1(model, prior, domain, rng, /*truncate=*/true);
        for (const auto& p : d.points) CHECK(domain.contains(p.x));
        CHECK(d.n_outside == 0);
        n_points += static_cast<long>(d.points.size());
    }
    REQUIRE(n_points > 0);
    long outside = 0;
    for (int i = 0; i < 50; ++i)
        outside += sample_nsp_v1(model, prior, domain, rng, /*truncate=*/false).n_outside;
    CHECK(outside > 0);
}
