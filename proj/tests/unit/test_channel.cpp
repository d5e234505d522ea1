#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <boost/math/distributions/non_central_chi_squared.hpp>

#include "coopuplink/channel.hpp"
#include "coopuplink/errors.hpp"
#include "oracles.hpp"

using namespace coopuplink;

namespace {

ClusterConfig cluster(double mean, double nu, int n, PowerScaling s = PowerScaling::ConstantTotal) {
    return ClusterConfig{mean, nu, n, n, s};
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double var_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

}  // namespace

TEST_CASE("config validation") {
    CHECK_THROWS_AS(cluster(0.0, 1.0, 2).validate(), DomainError);
    CHECK_THROWS_AS(cluster(1.0, -1.0, 2).validate(), DomainError);
    CHECK_THROWS_AS((ClusterConfig{1.0, 1.0, 5, 4}).validate(), DomainError);
    CHECK_THROWS_AS(cluster(1.0, 1.0, 0).validate(), DomainError);
    CHECK_THROWS_AS((CkmSideInfo{-0.1}).validate(), DomainError);
    CHECK_THROWS_AS((FeedbackSideInfo{0, 0.1}).validate(), DomainError);
    CHECK_THROWS_AS((FeedbackSideInfo{31, 0.1}).validate(), DomainError);
    CHECK_THROWS_AS((FeedbackSideInfo{2, 1.5}).validate(), DomainError);
    const auto c = cluster(1.0, 1.0, 4).with_active(9);
    CHECK(c.active_devices == 9);
    CHECK(c.total_devices == 9);
}

TEST_CASE("derived powers") {
    const auto p = derive_powers(cluster(2.0, 3.0, 4));
    CHECK(p.gamma_d == doctest::Approx(1.5));
    CHECK(p.gamma_s == doctest::Approx(0.5));
    CHECK(p.per_device_power_factor == doctest::Approx(0.25));
    CHECK(derive_powers(cluster(2.0, 3.0, 4, PowerScaling::ConstantPerDevice)).per_device_power_factor == 1.0);
    CHECK(derive_powers(cluster(1.0, 0.0, 1)).gamma_d == 0.0);
}

TEST_CASE("phase quantiser picks the nearest codeword") {
    const double two_pi = 2 * std::numbers::pi;
    for (int bits : {1, 2, 3, 8}) {
        const int cb = 1 << bits;
        const double step = two_pi / cb;
        for (double ph = -7.0; ph < 7.0; ph += 0.0137) {
            const int idx = quantize_phase_index(ph, bits);
            REQUIRE(idx >= 1);
            REQUIRE(idx <= cb);
            const double r = std::remainder(ph - idx * step, two_pi);
            CHECK(std::abs(r) <= step / 2 + 1e-12);
        }
        CHECK(quantize_phase_index(0.0, bits) == cb);
    }
}

TEST_CASE("feedback residual phase is uniform over one quantisation cell") {
    for (int bits : {1, 2, 4}) {
        std::vector<double> r(40000);
        sample_feedback_residuals(FeedbackSideInfo{bits, 0.0}, rng::Stream{3, 77, 0}, r);
        std::sort(r.begin(), r.end());
        const double half = std::numbers::pi / (1 << bits);
        const double d = oracle::ks_distance(r, [&](double x) {
            return std::clamp((x + half) / (2 * half), 0.0, 1.0);
        });
        CHECK(d < 1.63 / std::sqrt(static_cast<double>(r.size())));
    }
    // With p_w = 1 the residual is uniform over the whole circle.
    std::vector<double> r(40000);
    sample_feedback_residuals(FeedbackSideInfo{2, 1.0}, rng::Stream{3, 78, 0}, r);
    std::sort(r.begin(), r.end());
    const double d = oracle::ks_distance(r, [](double x) {
        return std::clamp((x + std::numbers::pi) / (2 * std::numbers::pi), 0.0, 1.0);
    });
    CHECK(d < 1.63 / std::sqrt(static_cast<double>(r.size())));
}

TEST_CASE("CKM sampler with Rayleigh fading gives an exponential SNR") {
    const auto cfg = cluster(0.0316, 0.0, 20);
    auto s = sample_snr_ckm(cfg, CkmSideInfo{0.35}, rng::Stream{1, 1, 0}, 100000);
    std::sort(s.begin(), s.end());
    // |delta| * gamma_bar * P with P = 1/|delta|
    const double mean = 0.0316;
    const double d = oracle::ks_distance(s, [&](double x) { return -std::expm1(-x / mean); });
    CHECK(d < 1.63 / std::sqrt(static_cast<double>(s.size())));
}

TEST_CASE("CKM sampler mean power matches the phase-perturbed static sum") {
    const double sigma = 20.0 * std::numbers::pi / 180;
    for (double nu : {0.5, 4.0}) {
        const auto cfg = cluster(0.0316, nu, 20);
        const auto s = sample_snr_ckm(cfg, CkmSideInfo{sigma}, rng::Stream{2, 1, 0}, 200000);
        const auto p = derive_powers(cfg);
        const double n = 20;
        // E|sum e^{j eps}|^2 = n + n(n-1) (E cos eps)^2
        const double ec = std::exp(-sigma * sigma / 2);
        const double want = p.per_device_power_factor * (p.gamma_d * (n + n * (n - 1) * ec * ec) + n * p.gamma_s);
        const double se = std::sqrt(var_of(s) / s.size());
        CHECK(std::abs(mean_of(s) - want) < 4 * se);
    }
}

TEST_CASE("CKM sampler without phase error is Rician") {
    // sigma = 0: static parts add coherently, SNR = |n sqrt(gd P) + CN(0, n gs P)|^2
    const auto cfg = cluster(0.1, 2.0, 8);
    auto s = sample_snr_ckm(cfg, CkmSideInfo{0.0}, rng::Stream{9, 1, 0}, 50000);
    std::sort(s.begin(), s.end());
    const auto p = derive_powers(cfg);
    const double los = 64 * p.gamma_d * p.per_device_power_factor;
    const double var = 8 * p.gamma_s * p.per_device_power_factor;  // total scattered power
    boost::math::non_central_chi_squared_distribution<double> d(2.0, 2 * los / var);
    const double ks = oracle::ks_distance(s, [&](double x) { return boost::math::cdf(d, 2 * x / var); });
    CHECK(ks < 1.63 / std::sqrt(static_cast<double>(s.size())));
}

TEST_CASE("selection sampler matches the max of Rician powers") {
    const auto cfg = cluster(1.0, 3.0, 5);
    auto s = sample_snr_selection(cfg, rng::Stream{4, 1, 0}, 50000);
    std::sort(s.begin(), s.end());
    const double nu = 3.0;
    boost::math::non_central_chi_squared_distribution<double> d(2.0, 2 * nu);
    const double ks = oracle::ks_distance(s, [&](double x) {
        return std::pow(boost::math::cdf(d, 2 * (1 + nu) * x), 5);
    });
    CHECK(ks < 1.63 / std::sqrt(static_cast<double>(s.size())));
}

TEST_CASE("feedback sampler with every word wrong is an incoherent sum") {
    const auto cfg = cluster(0.5, 2.0, 10);
    const auto s = sample_snr_feedback(cfg, FeedbackSideInfo{2, 1.0}, rng::Stream{5, 1, 0}, 200000);
    // E|sum|^2 = n gamma_bar P = gamma_bar under ConstantTotal
    const double se = std::sqrt(var_of(s) / s.size());
    CHECK(std::abs(mean_of(s) - 0.5) < 4 * se);
}

TEST_CASE("samplers are independent of call partitioning") {
    const auto cfg = cluster(0.1, 1.0, 7);
    const rng::Stream st{8, 5, 100};
    const auto whole = sample_snr_feedback(cfg, FeedbackSideInfo{2, 0.1}, st, 3000);
    std::vector<double> parts(3000);
    sample_snr_feedback(cfg, FeedbackSideInfo{2, 0.1}, st, std::span(parts).first(1234));
    sample_snr_feedback(cfg, FeedbackSideInfo{2, 0.1}, rng::Stream{8, 5, 1334},
                        std::span(parts).subspan(1234));
    CHECK(whole == parts);

    const auto a = sample_snr_ckm(cfg, CkmSideInfo{0.2}, st, 500);
    const auto b = sample_snr_ckm(cfg, CkmSideInfo{0.2}, rng::Stream{8, 5, 350}, 150);
    CHECK(std::equal(b.begin(), b.end(), a.begin() + 250));
}

TEST_CASE("forced error count is validated") {
    std::vector<std::complex<double>> out(4);
    CHECK_THROWS_AS(sample_sum_feedback(cluster(1.0, 1.0, 3), FeedbackSideInfo{1, 0.0},
                                        rng::Stream{}, out, 4),
                    DomainError);
}
