#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "fjup/chunk_cdf.hpp"
#include "fjup/rng.hpp"
#include "fjup/service_model.hpp"

using namespace fjup;

TEST_CASE("exponential chunks are Erlang with textbook CDF values") {
    ChunkCdf f = chunk_cdf(Exponential{1.0}, 3);
    REQUIRE(std::holds_alternative<ErlangCdf>(f));
    // F(x) = 1 - e^{-x}(1 + x + x^2/2)
    for (double x : {0.0, 0.5, 1.0, 2.0, 7.0}) {
        double expected = 1.0 - std::exp(-x) * (1.0 + x + x * x / 2.0);
        CHECK(cdf(f, x) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("k = 1 exponential chunk is the exponential itself") {
    ChunkCdf f = chunk_cdf(Exponential{2.0}, 1);
    CHECK(cdf(f, 1.0) == doctest::Approx(1.0 - std::exp(-2.0)).epsilon(1e-12));
    CHECK(chunk_mean(f) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("gamma chunks stay analytic with shape k*alpha") {
    // integer total shape collapses to the Erlang representation
    ChunkCdf f = chunk_cdf(GammaService{2.0, 40.0}, 3);
    REQUIRE(std::holds_alternative<ErlangCdf>(f));
    CHECK(std::get<ErlangCdf>(f).shape == 6);
    CHECK(chunk_mean(f) == doctest::Approx(6.0 / 40.0).epsilon(1e-12));

    // fractional total shape stays a gamma
    ChunkCdf g = chunk_cdf(GammaService{0.9, 40.0}, 3);
    REQUIRE(std::holds_alternative<GammaCdf>(g));
    CHECK(std::get<GammaCdf>(g).shape == doctest::Approx(2.7));
    CHECK(chunk_mean(g) == doctest::Approx(2.7 / 40.0).epsilon(1e-10));
}

TEST_CASE("shape-1 Weibull convolution matches the analytic Erlang on the grid") {
    // Weibull(scale=1, shape=1) is Exp(1); its 2-fold numeric convolution
    // must track Erlang(2,1) to within a grid step
    GridSpec grid;
    ChunkCdf numeric = chunk_cdf(WeibullService{1.0, 1.0}, 2, grid);
    REQUIRE(std::holds_alternative<DiscretizedCdf>(numeric));
    const auto& d = std::get<DiscretizedCdf>(numeric);
    ChunkCdf exact = chunk_cdf(Exponential{1.0}, 2);
    double worst = 0.0;
    for (std::size_t i = 0; i < d.values.size(); i += 7) {
        double x = d.step * i;
        worst = std::max(worst, std::abs(d.values[i] - cdf(exact, x)));
    }
    CHECK(worst < d.step);
}

TEST_CASE("chunk_cdf rejects k = 0 and impossible grids") {
    CHECK_THROWS_AS(chunk_cdf(Exponential{1.0}, 0), std::invalid_argument);
}

TEST_CASE("mgf_log matches closed forms for exponential and gamma") {
    CHECK(mgf_log(Exponential{2.0}, 1, 1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(mgf_log(Exponential{5.0}, 4, 0.0) == doctest::Approx(0.0));
    // scaled-up gamma: -2 ln(1 - 10/40)
    CHECK(mgf_log(GammaService{2.0, 40.0}, 1, 10.0) ==
          doctest::Approx(-2.0 * std::log(0.75)).epsilon(1e-12));
}

TEST_CASE("mgf_log is additive in k for i.i.d. models") {
    for (int k : {2, 3, 7}) {
        CHECK(mgf_log(Exponential{3.0}, k, 1.2) ==
              doctest::Approx(k * mgf_log(Exponential{3.0}, 1, 1.2)).epsilon(1e-12));
        CHECK(mgf_log(GammaService{1.5, 6.0}, k, 2.0) ==
              doctest::Approx(k * mgf_log(GammaService{1.5, 6.0}, 1, 2.0)).epsilon(1e-12));
    }
}

TEST_CASE("mgf_log rejects theta at or beyond the boundary") {
    CHECK_THROWS_AS(mgf_log(Exponential{2.0}, 1, 2.0), std::domain_error);
    CHECK_THROWS_AS(mgf_log(Exponential{2.0}, 1, 3.0), std::domain_error);
}

TEST_CASE("chunk CDFs are monotone and bounded for random parameters") {
    KeyedRng rng(20260815);
    for (int trial = 0; trial < 30; ++trial) {
        ServiceModel model;
        int k = 1 + static_cast<int>(rng.uniform() * 4);
        switch (trial % 4) {
            case 0: model = Exponential{0.2 + 5.0 * rng.uniform()}; break;
            case 1: model = GammaService{0.5 + 2.0 * rng.uniform(), 0.5 + 4.0 * rng.uniform()}; break;
            case 2: model = WeibullService{0.3 + 2.0 * rng.uniform(), 0.8 + 1.5 * rng.uniform()}; break;
            default: model = LogNormalService{rng.uniform() - 0.5, 0.1 + 0.6 * rng.uniform()}; break;
        }
        ChunkCdf f = chunk_cdf(model, k);
        double upper = upper_support(f);
        double prev = -1.0;
        bool ok = true;
        for (int i = 0; i <= 64; ++i) {
            double x = upper * i / 64.0;
            double v = cdf(f, x);
            if (v < prev - 1e-12 || v < 0.0 || v > 1.0) ok = false;
            prev = v;
        }
        CHECK(ok);
        CHECK(cdf(f, upper) > 1.0 - 1e-6);
    }
}

TEST_CASE("chunk mean equals k times the packet mean for every model") {
    GridSpec grid;
    ServiceModel models[] = {Exponential{2.0}, GammaService{2.0, 5.0}, WeibullService{0.9, 1.5},
                             LogNormalService{0.0, 0.25}};
    for (const auto& m : models) {
        for (int k : {1, 2, 5}) {
            double mean = chunk_mean(chunk_cdf(m, k, grid));
            CHECK(mean == doctest::Approx(k * packet_mean(m)).epsilon(1e-4));
        }
    }
}

TEST_CASE("modulated models cannot produce chunk CDFs") {
    MmppParams p;
    p.initial = {0.5, 0.5};
    p.trans = {{0.9, 0.1}, {0.1, 0.9}};
    p.rates = {1.0, 3.0};
    CHECK_THROWS_AS(chunk_cdf(MarkovModulatedExp{p}, 2), std::invalid_argument);
}
