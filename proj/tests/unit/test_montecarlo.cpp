#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <string>

#include <boost/math/distributions/binomial.hpp>

#include "coopuplink/errors.hpp"
#include "coopuplink/montecarlo.hpp"
#include "oracles.hpp"

using namespace coopuplink;
using namespace coopuplink::mc;

namespace {
const double kGammaBar = std::pow(10.0, -1.5);

ClusterConfig cfg_of(double nu, int n) {
    return ClusterConfig{kGammaBar, nu, n, n, PowerScaling::ConstantTotal};
}

std::filesystem::path scratch(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("coopuplink_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}
}  // namespace

TEST_CASE("single-sample run is a step") {
    const auto c = run(Scenario::Ckm, cfg_of(1.0, 4), SideInfo{}, 1, 3);
    REQUIRE(c.count() == 1);
    const double x = c.sorted_samples().at(0);
    CHECK(c(x) == 1.0);
    CHECK(c(std::nextafter(x, 0.0)) == 0.0);
    CHECK_THROWS_AS(run(Scenario::Ckm, cfg_of(1.0, 4), SideInfo{}, 0, 3), DomainError);
}

TEST_CASE("identical seeds give identical digests") {
    const SideInfo side{CkmSideInfo{0.2}, FeedbackSideInfo{2, 0.05}};
    for (auto s : {Scenario::Ckm, Scenario::Feedback, Scenario::Selection}) {
        const auto a = run(s, cfg_of(2.0, 10), side, 5000, 9);
        const auto b = run(s, cfg_of(2.0, 10), side, 5000, 9);
        const auto c = run(s, cfg_of(2.0, 10), side, 5000, 10);
        CHECK(a.digest() == b.digest());
        CHECK(a.digest() != c.digest());
        CHECK(a.fingerprint() == config_fingerprint(s, cfg_of(2.0, 10), side));
    }
}

TEST_CASE("block and thread partitioning does not change the samples") {
    const SideInfo side{CkmSideInfo{0.3}, FeedbackSideInfo{2, 0.1}};
    constexpr std::uint64_t n = 64 * 1000;
    for (auto s : {Scenario::Ckm, Scenario::Feedback, Scenario::Selection}) {
        RunOptions one;
        one.block_size = n;
        one.threads = 1;
        RunOptions many;
        many.block_size = n / 64;
        many.threads = 4;
        RunOptions odd;
        odd.block_size = 777;
        odd.threads = 3;
        const auto a = run(s, cfg_of(2.0, 12), side, n, 5, one);
        const auto b = run(s, cfg_of(2.0, 12), side, n, 5, many);
        const auto c = run(s, cfg_of(2.0, 12), side, n, 5, odd);
        CHECK(a.sorted_samples() == b.sorted_samples());
        CHECK(a.sorted_samples() == c.sorted_samples());
    }
}

TEST_CASE("fingerprint separates configurations") {
    const SideInfo side{CkmSideInfo{0.3}, FeedbackSideInfo{2, 0.1}};
    const auto f = config_fingerprint(Scenario::Ckm, cfg_of(2.0, 12), side);
    CHECK(f.size() == 16);
    CHECK(f != config_fingerprint(Scenario::Ckm, cfg_of(2.0, 13), side));
    CHECK(f != config_fingerprint(Scenario::Ckm, cfg_of(2.0, 12), SideInfo{CkmSideInfo{0.31}, {}}));
    CHECK(f != config_fingerprint(Scenario::Feedback, cfg_of(2.0, 12), side));
}

TEST_CASE("CKM with Rayleigh fading passes a KS test against the exponential law") {
    constexpr std::uint64_t n = 200000;
    const auto c = run(Scenario::Ckm, cfg_of(0.0, 20), SideInfo{CkmSideInfo{0.35}, {}}, n, 1);
    const double d = oracle::ks_distance(c.sorted_samples(),
                                         [](double x) { return -std::expm1(-x / kGammaBar); });
    CHECK(d < 1.63 / std::sqrt(double(n)));
}

TEST_CASE("quantiles flag thin tails") {
    const auto c = run(Scenario::Ckm, cfg_of(1.0, 4), SideInfo{}, 1000, 3);
    CHECK(c.quantile(0.005).low_confidence);
    const auto q = c.quantile(0.5);
    CHECK_FALSE(q.low_confidence);
    CHECK(q.value == c.sorted_samples()[499]);
    CHECK_THROWS_AS(c.quantile(0.0), DomainError);
}

TEST_CASE("histogram mode tracks exact mode") {
    const auto cfg = cfg_of(2.0, 20);
    const SideInfo side{CkmSideInfo{0.35}, {}};
    constexpr std::uint64_t n = 300000;
    RunOptions hist;
    hist.sorted_cap = 1000;
    const auto e = run(Scenario::Ckm, cfg, side, n, 4);
    const auto h = run(Scenario::Ckm, cfg, side, n, 4, hist);
    CHECK_FALSE(e.is_histogram());
    REQUIRE(h.is_histogram());
    CHECK(h.count() == n);
    CHECK(h.sorted_samples().size() == 300);
    // exact below the 1e-3 quantile
    for (std::size_t i = 0; i < 300; i += 17) CHECK(h(e.sorted_samples()[i]) == e(e.sorted_samples()[i]));
    for (double p : {0.002, 0.01, 0.1, 0.5, 0.9, 0.999}) {
        const double g = e.sorted_samples()[static_cast<std::size_t>(p * n)];
        INFO("p=" << p);
        CHECK(std::abs(h(g) - e(g)) < 1e-3);
        CHECK(h.quantile(p).value == doctest::Approx(e.quantile(p).value).epsilon(2e-3));
    }
    CHECK(h(0.0) == 0.0);
    CHECK(h(1e40) == 1.0);
}

TEST_CASE("cache round trip") {
    const auto dir = scratch("cache");
    const auto cfg = cfg_of(2.0, 8);
    const SideInfo side{CkmSideInfo{0.2}, {}};
    const auto a = run(Scenario::Ckm, cfg, side, 4000, 12);
    const auto file = cache_path(dir, a.fingerprint(), 12, 4000);
    save_cache(file, a);
    EmpiricalCdf b;
    REQUIRE(load_cache(file, a.fingerprint(), 12, 4000, b));
    CHECK(b.digest() == a.digest());
    CHECK(b.sorted_samples() == a.sorted_samples());
    EmpiricalCdf other;
    CHECK_FALSE(load_cache(file, a.fingerprint(), 13, 4000, other));
    CHECK_FALSE(load_cache(file, a.fingerprint(), 12, 4001, other));
    CHECK_FALSE(load_cache(file, "0000000000000000", 12, 4000, other));
    CHECK_FALSE(load_cache(dir / "missing.ecdf", a.fingerprint(), 12, 4000, other));

    RunOptions hist;
    hist.sorted_cap = 100;
    const auto h = run(Scenario::Ckm, cfg, side, 50000, 12, hist);
    const auto hfile = dir / "hist.ecdf";
    save_cache(hfile, h);
    EmpiricalCdf h2;
    REQUIRE(load_cache(hfile, h.fingerprint(), 12, 50000, h2));
    CHECK(h2.is_histogram());
    CHECK(h2.digest() == h.digest());
    hist.cache_dir = dir;
    const auto h3 = run(Scenario::Ckm, cfg, side, 50000, 12, hist);
    CHECK(h3.digest() == h.digest());
    CHECK(std::filesystem::exists(cache_path(dir, h.fingerprint(), 12, 50000)));
    EmpiricalCdf h4;
    REQUIRE(load_cache(cache_path(dir, h.fingerprint(), 12, 50000), h.fingerprint(), 12, 50000, h4));
    CHECK(h4.digest() == h.digest());

    RunOptions cached;
    cached.cache_dir = dir;
    const auto c1 = run(Scenario::Feedback, cfg, SideInfo{{}, FeedbackSideInfo{2, 0.05}}, 3000, 2, cached);
    CHECK(std::filesystem::exists(cache_path(dir, c1.fingerprint(), 2, 3000)));
    const auto c2 = run(Scenario::Feedback, cfg, SideInfo{{}, FeedbackSideInfo{2, 0.05}}, 3000, 2, cached);
    CHECK(c1.digest() == c2.digest());
    std::filesystem::remove_all(dir);
}

TEST_CASE("streamed counts agree with the stored CDF") {
    const auto cfg = cfg_of(3.0, 16);
    const SideInfo side{CkmSideInfo{0.3}, {}};
    const auto c = run(Scenario::Ckm, cfg, side, 100000, 6);
    for (double p : {1e-3, 0.05, 0.5}) {
        const double g = c.quantile(p).value;
        CHECK(double(count_at_or_below(Scenario::Ckm, cfg, side, g, 100000, 6)) == c.count_below(g));
    }
    const ServiceSpec svc{100, 200e3, 2e-3, 0};
    const auto r = simulate_dor(Scenario::Ckm, cfg, side, svc, 100000, 6);
    CHECK(r.trials == 100000);
    CHECK(double(r.hits) == c.count_below(dor_threshold(100, 200e3, 2e-3).value));
    CHECK(r.lower <= r.value);
    CHECK(r.value <= r.upper);
}

TEST_CASE("binomial helpers") {
    const auto z = binomial_rate(0, 1000);
    CHECK(z.value == 0.0);
    CHECK(z.lower == 0.0);
    CHECK(z.upper == doctest::Approx(1.0 - std::pow(0.005, 1.0 / 1000)).epsilon(1e-8));
    const auto a = binomial_rate(1000, 1000);
    CHECK(a.upper == 1.0);
    CHECK(a.lower == doctest::Approx(std::pow(0.005, 1.0 / 1000)).epsilon(1e-8));
    const auto m = binomial_rate(37, 10000);
    boost::math::binomial_distribution<double> lo(10000, m.lower), hi(10000, m.upper);
    CHECK(boost::math::cdf(boost::math::complement(lo, 36)) == doctest::Approx(0.005).epsilon(1e-6));
    CHECK(boost::math::cdf(hi, 37) == doctest::Approx(0.005).epsilon(1e-6));

    for (double p : {1e-4, 0.01, 0.3}) {
        const auto iv = binomial_hit_interval(100000, p);
        boost::math::binomial_distribution<double> d(100000, p);
        const double cover = boost::math::cdf(d, double(iv.hi)) -
                             (iv.lo == 0 ? 0.0 : boost::math::cdf(d, double(iv.lo - 1)));
        CHECK(cover >= 0.99);
        CHECK(double(iv.lo) <= 100000 * p);
        CHECK(double(iv.hi) >= 100000 * p);
    }
}

TEST_CASE("device search: trivial target") {
    const auto r = min_devices(Scenario::Ckm, cfg_of(1.0, 1), SideInfo{}, ServiceSpec{100, 200e3, 1e-3, 0},
                               1.0, 1000, 1);
    CHECK(r.devices == 1);
    CHECK(r.feasible);
    CHECK_FALSE(r.uncertain);
}

TEST_CASE("device search: deterministic channel") {
    // nu -> inf, no phase error, gamma_bar = 1, ConstantTotal: SNR = |delta|
    const ClusterConfig cfg{1.0, 1e12, 1, 1, PowerScaling::ConstantTotal};
    const double g_th = 10.5;
    const ServiceSpec svc{100, 200e3, 100 / (200e3 * std::log2(1 + g_th)), 0};
    for (int hint : {0, 40}) {
        // 0 hits in 20000 trials certifies 1e-3 at 99%
        const auto r = min_devices(Scenario::Ckm, cfg, SideInfo{CkmSideInfo{0.0}, {}}, svc, 1e-3, 20000, 4,
                                   RunOptions{}, hint);
        CHECK(r.feasible);
        CHECK(r.devices == 11);
        CHECK_FALSE(r.uncertain);
    }
}

TEST_CASE("device search: infeasible target") {
    // Rayleigh fading under ConstantTotal does not improve with more devices
    const auto r = min_devices(Scenario::Ckm, cfg_of(0.0, 1), SideInfo{CkmSideInfo{0.0}, {}},
                               ServiceSpec{100, 200e3, 1e-3, 0}, 1e-2, 2000, 4);
    CHECK_FALSE(r.feasible);
    CHECK(r.devices == 0);
}
