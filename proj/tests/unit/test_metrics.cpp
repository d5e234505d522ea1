#include <doctest.h>

#include <cmath>

#include "coopuplink/analytic_ckm.hpp"
#include "coopuplink/analytic_feedback.hpp"
#include "coopuplink/errors.hpp"
#include "coopuplink/metrics.hpp"

using namespace coopuplink;

namespace {
SnrCdf exponential(double mean) {
    return SnrCdf([mean](double g) { return -std::expm1(-g / mean); }, mean, "exp");
}
}  // namespace

TEST_CASE("outage threshold") {
    CHECK(outage_threshold(0.0, 5.0).value == 0.0);
    CHECK(outage_threshold(5.0, 5.0).value == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(outage_threshold(200e3, 200e3).value == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(outage_threshold(3e6, 1e6).value == doctest::Approx(7.0).epsilon(1e-15));
    CHECK(outage_threshold(1e-9, 1.0).value > 0.0);
    CHECK_FALSE(outage_threshold(64.0, 1.0).saturated);
    CHECK(outage_threshold(100.0, 1.0).saturated);
    CHECK_THROWS_AS(outage_threshold(1.0, 0.0), DomainError);
}

TEST_CASE("delay threshold") {
    CHECK(dor_threshold(0.0, 200e3, 1e-3).value == 0.0);
    CHECK(dor_threshold(200.0, 200e3, 1e-3).value == doctest::Approx(1.0).epsilon(1e-15));
    const auto sat = dor_threshold(100.0, 200e3, 5e-6);
    CHECK(sat.saturated);
    CHECK(std::isinf(sat.value));
    CHECK(dor_threshold(100.0, 200e3, 0.0).saturated);
    CHECK_THROWS_AS(dor_threshold(100.0, -1.0, 1.0), DomainError);
}

TEST_CASE("outage probability and dor on a known law") {
    const auto cdf = exponential(2.0);
    CHECK(outage_probability(cdf, 0.0, 1.0) == 0.0);
    CHECK(outage_probability(cdf, 1.0, 1.0) == doctest::Approx(-std::expm1(-0.5)));
    CHECK(outage_probability(cdf, 1000.0, 1.0) == 1.0);
    ServiceSpec svc{100.0, 200e3, 1e-3, 0.0};
    const double th = std::pow(2.0, 0.5) - 1;
    CHECK(dor(cdf, svc) == doctest::Approx(-std::expm1(-th / 2.0)).epsilon(1e-14));
    svc.delay_threshold = 1e9;
    CHECK(dor(cdf, svc) < 1e-9);
    svc.data_bits = 0.0;
    CHECK(dor(cdf, svc) == 0.0);
    svc = ServiceSpec{100.0, 200e3, 5e-6, 0.0};
    CHECK(dor(cdf, svc) == 1.0);
    svc.delay_threshold = 0.0;
    CHECK_THROWS_AS(dor(cdf, svc), DomainError);
}

TEST_CASE("dor is monotone in delay, bandwidth and data size") {
    const ClusterConfig cfg{0.0316, 2.0, 20, 20, PowerScaling::ConstantTotal};
    const auto a = ckm::make_cdf(cfg, CkmSideInfo{0.349});
    const auto b = feedback::make_cdf(cfg, FeedbackSideInfo{2, 0.05});
    for (const SnrCdf* c : {&a, &b}) {
        double prev = 2.0;
        for (double t = 2e-4; t < 0.1; t *= 1.5) {
            const double d = dor(*c, ServiceSpec{100, 200e3, t, 0});
            CHECK(d <= prev + 1e-15);
            prev = d;
        }
        prev = 2.0;
        for (double w = 5e4; w < 2e6; w *= 1.5) {
            const double d = dor(*c, ServiceSpec{100, w, 2e-3, 0});
            CHECK(d <= prev + 1e-15);
            prev = d;
        }
        prev = -1.0;
        for (double bits = 10; bits < 2000; bits *= 1.5) {
            const double d = dor(*c, ServiceSpec{bits, 200e3, 2e-3, 0});
            CHECK(d >= prev - 1e-15);
            prev = d;
        }
    }
}

TEST_CASE("quantile inversion") {
    const auto cdf = exponential(1.0);
    CHECK(quantile(cdf, 1.0 - std::exp(-1.0)) == doctest::Approx(1.0).epsilon(1e-10));
    // symmetric in dB: log-logistic with median 10
    auto ll = [](double g) { return g * g / (g * g + 100.0); };
    CHECK(quantile(ll, 0.5, 1.0) == doctest::Approx(10.0).epsilon(1e-10));
    for (double p : {1e-4, 1e-3, 0.01, 0.1, 0.5, 0.9, 0.99})
        CHECK(std::abs(cdf(quantile(cdf, p)) - p) < 1e-6 * p + 1e-12);
    CHECK_THROWS_AS(quantile(cdf, 0.0), DomainError);
    CHECK_THROWS_AS(quantile(cdf, 1.0), DomainError);
    auto capped = [](double g) { return std::min(0.5, g); };
    CHECK_THROWS_AS(quantile(capped, 0.7, 1.0), DomainError);
}

TEST_CASE("SnrCdf registration spot-checks") {
    CHECK_THROWS_AS(SnrCdf([](double) { return 1.5; }, 1.0, "bad"), DomainError);
    CHECK_THROWS_AS(SnrCdf([](double g) { return g < 1.0 ? 0.9 : 0.1; }, 1.0, "bad"), DomainError);
    CHECK_THROWS_AS(SnrCdf([](double) { return 0.5; }, 0.0, "bad"), DomainError);
    const auto c = exponential(3.0);
    CHECK(c.scenario() == "exp");
    CHECK(c.scale() == 3.0);
}

TEST_CASE("dB conversions") {
    CHECK(db_to_linear(-15.0) == doctest::Approx(0.0316227766).epsilon(1e-9));
    CHECK(linear_to_db(db_to_linear(7.3)) == doctest::Approx(7.3).epsilon(1e-14));
}
