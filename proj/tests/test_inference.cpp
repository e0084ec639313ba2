#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "fjup/inference.hpp"
#include "fjup/rng.hpp"
#include "fjup/service_model.hpp"
#include "test_util.hpp"

using namespace fjup;
using fjup::testutil::mean_se;

namespace {

// joint log-probability of (state path, observations) under the model; the
// reference the MAP decoder has to beat
double path_logprob(const std::vector<double>& x, const std::vector<int>& m,
                    const MmppParams& p, const std::vector<int>& z) {
    auto emit = [&](double xi, int mi, double lam) {
        return mi * std::log(lam) + (mi - 1) * std::log(xi) - lam * xi - std::lgamma(mi);
    };
    double lp = std::log(p.initial[z[0]]) + emit(x[0], m[0], p.rates[z[0]]);
    for (std::size_t i = 1; i < x.size(); ++i) {
        lp += std::log(p.trans[z[i - 1]][z[i]]) + emit(x[i], m[i], p.rates[z[i]]);
    }
    return lp;
}

// two-sample Kolmogorov-Smirnov statistic
double ks_statistic(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j]) {
            ++i;
        } else {
            ++j;
        }
        d = std::max(d, std::fabs(static_cast<double>(i) / a.size() -
                                  static_cast<double>(j) / b.size()));
    }
    return d;
}

MmppParams sticky_two_state(double stay, double rate0, double rate1) {
    MmppParams p;
    p.initial = {0.5, 0.5};
    p.trans = {{stay, 1.0 - stay}, {1.0 - stay, stay}};
    p.rates = {rate0, rate1};
    return p;
}

// synthetic chunk observations from a modulated chain, one transition per chunk
void draw_chain(const MmppParams& p, int n, std::uint64_t seed, std::vector<double>& x,
                std::vector<int>& m, std::vector<int>& z, int max_shape = 1) {
    KeyedRng rng(seed);
    x.resize(n);
    m.resize(n);
    z.resize(n);
    int state = rng.categorical(p.initial);
    for (int i = 0; i < n; ++i) {
        z[i] = state;
        m[i] = 1 + static_cast<int>(rng.uniform() * max_shape) % max_shape;
        x[i] = rng.gamma(static_cast<double>(m[i]), p.rates[state]);
        state = rng.categorical(p.trans[state]);
    }
}

}  // namespace

TEST_CASE("posterior update is plain accumulation") {
    GammaPosterior prior{1.0, 1.0};
    GammaPosterior post = posterior_update(prior, 2, 3.0);
    CHECK(post.shape == doctest::Approx(3.0));
    CHECK(post.rate == doctest::Approx(4.0));
    CHECK_THROWS_AS(posterior_update(prior, 0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(posterior_update(prior, 1, 0.0), std::invalid_argument);
}

TEST_CASE("posterior update order does not matter") {
    GammaPosterior a{1.0, 1.0}, b{1.0, 1.0};
    std::vector<std::pair<int, double>> obs = {{2, 1.3}, {1, 0.7}, {3, 2.9}};
    for (auto [k, s] : obs) a = posterior_update(a, k, s);
    for (auto it = obs.rbegin(); it != obs.rend(); ++it) {
        b = posterior_update(b, it->first, it->second);
    }
    CHECK(a.shape == doctest::Approx(b.shape));
    CHECK(a.rate == doctest::Approx(b.rate));
}

TEST_CASE("conjugate arithmetic matches a quadrature of likelihood times prior") {
    GammaPosterior post{1.0, 1.0};
    std::vector<std::pair<int, double>> obs = {{2, 1.3}, {1, 0.7}, {3, 2.9}};
    for (auto [k, s] : obs) post = posterior_update(post, k, s);

    // numeric posterior mean of lambda on a fine grid; the x-dependent
    // factors of the likelihood cancel in the normalization
    auto log_unnorm = [&](double lam) {
        double lp = -lam;  // prior (1,1)
        for (auto [k, s] : obs) lp += k * std::log(lam) - lam * s;
        return lp;
    };
    double num = 0.0, den = 0.0;
    const double dl = 1e-4;
    for (double lam = dl / 2; lam < 25.0; lam += dl) {
        double w = std::exp(log_unnorm(lam));
        num += lam * w;
        den += w;
    }
    CHECK(num / den == doctest::Approx(post.shape / post.rate).epsilon(1e-6));
}

TEST_CASE("predictive mean formula and Monte-Carlo agreement") {
    GammaPosterior post{5.0, 8.0};
    CHECK(predictive_mean(post, 3) == doctest::Approx(3.0 * 8.0 / 4.0).epsilon(1e-12));
    CHECK_THROWS_AS(predictive_mean(GammaPosterior{1.0, 1.0}, 3), std::invalid_argument);
    CHECK_THROWS_AS(predictive_mean(post, 0), std::invalid_argument);

    KeyedRng rng(77);
    const int n = 200000;
    std::vector<double> draws(n);
    for (int i = 0; i < n; ++i) draws[i] = sample_predictive(post, 3, rng);
    auto ms = mean_se(draws);
    CHECK(std::abs(ms.mean - predictive_mean(post, 3)) < 3.0 * ms.se);
}

TEST_CASE("a sharp posterior concentrates the predictive at K*/rate") {
    GammaPosterior sharp{1e6, 5e5};  // lambda pinned near 2
    KeyedRng rng(5);
    const int n = 100000;
    std::vector<double> draws(n);
    for (int i = 0; i < n; ++i) draws[i] = sample_predictive(sharp, 4, rng);
    auto ms = mean_se(draws);
    CHECK(std::abs(ms.mean - 2.0) < 3.0 * ms.se + 1e-4);
}

TEST_CASE("predictive sampling rejects empty chunks") {
    KeyedRng rng(1);
    CHECK_THROWS_AS(sample_predictive(GammaPosterior{2.0, 2.0}, 0, rng), std::invalid_argument);
}

TEST_CASE("one-state EM is the known-shape rate estimator") {
    std::vector<double> x = {0.4, 1.7, 0.9, 2.2};
    std::vector<int> m = {1, 2, 1, 3};
    EmResult fit = em_fit(x, m, 1);
    double expected = (1 + 2 + 1 + 3) / (0.4 + 1.7 + 0.9 + 2.2);
    CHECK(fit.params.rates[0] == doctest::Approx(expected).epsilon(1e-9));
    CHECK(fit.params.initial[0] == doctest::Approx(1.0));
    CHECK(fit.params.trans[0][0] == doctest::Approx(1.0));
}

TEST_CASE("one-state EM recovers a synthetic rate within sampling error") {
    const double lambda = 3.0;
    const int n = 4000;
    KeyedRng rng(12);
    std::vector<double> x(n);
    std::vector<int> m(n, 1);
    for (int i = 0; i < n; ++i) x[i] = rng.exponential(lambda);
    EmResult fit = em_fit(x, m, 1);
    double se = lambda / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(fit.params.rates[0] - lambda) < 3.0 * se);
}

TEST_CASE("EM log-likelihood never decreases") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        std::vector<double> x;
        std::vector<int> m, z;
        draw_chain(sticky_two_state(0.9, 2.0, 10.0), 300, seed, x, m, z, 3);
        EmResult fit = em_fit(x, m, 2, 100, 1e-8, seed);
        REQUIRE(!fit.loglik.empty());
        for (std::size_t i = 1; i < fit.loglik.size(); ++i) {
            CHECK(fit.loglik[i] >= fit.loglik[i - 1] - 1e-9);
        }
    }
}

TEST_CASE("EM separates two sticky states within ten percent") {
    std::vector<double> x;
    std::vector<int> m, z;
    draw_chain(sticky_two_state(0.95, 1.0, 20.0), 2000, 2026, x, m, z, 3);
    EmResult fit = em_fit(x, m, 2, 200, 1e-8, 4);
    REQUIRE(fit.params.states() == 2);
    // states come back sorted by rate
    CHECK(fit.params.rates[0] == doctest::Approx(1.0).epsilon(0.10));
    CHECK(fit.params.rates[1] == doctest::Approx(20.0).epsilon(0.10));
    CHECK(fit.params.trans[0][0] > 0.85);
    CHECK(fit.params.trans[1][1] > 0.85);
}

TEST_CASE("single-state MAP decoding is constant") {
    MmppParams p;
    p.initial = {1.0};
    p.trans = {{1.0}};
    p.rates = {2.0};
    auto path = viterbi_map({0.5, 1.0, 2.0}, {1, 1, 1}, p);
    CHECK(path == std::vector<int>{0, 0, 0});
}

TEST_CASE("far-apart rates decode exactly") {
    // observations pinned at the state means: with rates three orders of
    // magnitude apart the emission term dwarfs any transition penalty
    MmppParams p = sticky_two_state(0.9, 1.0, 1000.0);
    std::vector<int> z = {0, 0, 1, 1, 1, 0, 0, 1, 0, 0};
    std::vector<int> m = {1, 2, 1, 3, 1, 2, 1, 1, 2, 1};
    std::vector<double> x(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) x[i] = m[i] / p.rates[z[i]];
    auto decoded = viterbi_map(x, m, p);
    CHECK(decoded == z);
}

TEST_CASE("sticky-chain decoding accuracy exceeds ninety percent") {
    MmppParams p = sticky_two_state(0.95, 1.0, 20.0);
    double correct = 0.0, total = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        std::vector<double> x;
        std::vector<int> m, z;
        draw_chain(p, 500, 1000 + seed, x, m, z, 1);
        auto decoded = viterbi_map(x, m, p);
        for (std::size_t i = 0; i < z.size(); ++i) {
            total += 1.0;
            if (decoded[i] == z[i]) correct += 1.0;
        }
    }
    CHECK(correct / total > 0.90);
}

TEST_CASE("the decoded path is at least as probable as the generating path") {
    MmppParams p = sticky_two_state(0.9, 1.5, 12.0);
    for (std::uint64_t seed = 50; seed < 60; ++seed) {
        std::vector<double> x;
        std::vector<int> m, z;
        draw_chain(p, 200, seed, x, m, z, 3);
        auto decoded = viterbi_map(x, m, p);
        CHECK(path_logprob(x, m, p, decoded) >= path_logprob(x, m, p, z) - 1e-9);
    }
}

TEST_CASE("missing observations decode through transitions alone") {
    // shape 0 marks gaps; a single observation pins the neighborhood via
    // the sticky prior
    MmppParams p = sticky_two_state(0.99, 1.0, 1000.0);
    std::vector<double> x = {1.0, 1.0, 2.0, 1.0, 1.0};
    std::vector<int> m = {0, 0, 1, 0, 0};
    auto decoded = viterbi_map(x, m, p);
    CHECK(decoded == std::vector<int>{0, 0, 0, 0, 0});
}

TEST_CASE("conditioned single-packet resamples have the state's mean") {
    MmppParams p = sticky_two_state(0.8, 2.0, 8.0);
    KeyedRng rng(33);
    const int n = 100000;
    for (int state : {0, 1}) {
        std::vector<double> draws(n);
        for (int i = 0; i < n; ++i) {
            draws[i] = resample_mm_service(p, state, 1, MmStepping::PerChunk, rng);
        }
        auto ms = mean_se(draws);
        CHECK(std::abs(ms.mean - 1.0 / p.rates[state]) < 3.0 * ms.se);
    }
}

TEST_CASE("a frozen chain makes the stepping modes indistinguishable") {
    MmppParams p;
    p.initial = {1.0, 0.0};
    p.trans = {{1.0, 0.0}, {0.0, 1.0}};  // absorbing everywhere
    p.rates = {3.0, 30.0};
    KeyedRng r1(4), r2(5);
    const int n = 4000;
    std::vector<double> a(n), b(n);
    for (int i = 0; i < n; ++i) {
        a[i] = resample_mm_service(p, 0, 10, MmStepping::PerPacket, r1);
        b[i] = resample_mm_service(p, 0, 10, MmStepping::PerChunk, r2);
    }
    // both are Gamma(10, 3); KS well under the 0.1% critical value
    CHECK(ks_statistic(a, b) < 1.95 * std::sqrt(2.0 / n));
}

TEST_CASE("a fast-mixing chain distinguishes the stepping modes") {
    MmppParams p = sticky_two_state(0.5, 0.5, 50.0);
    KeyedRng r1(6), r2(7);
    const int n = 4000;
    std::vector<double> a(n), b(n);
    for (int i = 0; i < n; ++i) {
        a[i] = resample_mm_service(p, 0, 20, MmStepping::PerPacket, r1);
        b[i] = resample_mm_service(p, 0, 20, MmStepping::PerChunk, r2);
    }
    // per-chunk stays in the slow state for the whole chunk; per-packet
    // averages the two rates, so the laws are far apart
    CHECK(ks_statistic(a, b) > 0.3);
}

TEST_CASE("fitted parameters survive a save/load round trip") {
    MmppParams p = sticky_two_state(0.9, 1.5, 12.0);
    auto path = (std::filesystem::temp_directory_path() / "fjup_test_params.mm").string();
    save_mmpp(path, p);
    MmppParams q = load_mmpp(path);
    REQUIRE(q.states() == 2);
    for (int i = 0; i < 2; ++i) {
        CHECK(q.initial[i] == doctest::Approx(p.initial[i]).epsilon(1e-15));
        CHECK(q.rates[i] == doctest::Approx(p.rates[i]).epsilon(1e-15));
        for (int j = 0; j < 2; ++j) {
            CHECK(q.trans[i][j] == doctest::Approx(p.trans[i][j]).epsilon(1e-15));
        }
    }
    std::remove(path.c_str());
}

TEST_CASE("malformed parameter files are rejected") {
    auto dir = std::filesystem::temp_directory_path();
    auto bad = (dir / "fjup_test_bad.mm").string();
    {
        std::ofstream out(bad);
        out << "states 2\ninitial 0.5 0.5\nrates 1.0\n";  // rates row too short
    }
    CHECK_THROWS_AS(load_mmpp(bad), std::invalid_argument);
    std::remove(bad.c_str());
    CHECK_THROWS_AS(load_mmpp((dir / "fjup_no_such_file.mm").string()),
                    std::invalid_argument);
}
