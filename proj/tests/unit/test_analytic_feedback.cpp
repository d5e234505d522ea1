#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "coopuplink/analytic_feedback.hpp"
#include "coopuplink/channel.hpp"
#include "coopuplink/errors.hpp"
#include "coopuplink/specfun.hpp"
#include "oracles.hpp"

using namespace coopuplink;
using namespace coopuplink::feedback;

namespace {
const double kGammaBar = std::pow(10.0, -1.5);

ClusterConfig cfg_of(double nu_db, int n = 20) {
    return ClusterConfig{kGammaBar, std::pow(10.0, nu_db / 10), n, n, PowerScaling::ConstantTotal};
}

std::vector<double> conditional_snr(const ClusterConfig& cfg, const FeedbackSideInfo& side, int m,
                                    std::uint64_t seed, std::size_t n) {
    std::vector<std::complex<double>> z(n);
    sample_sum_feedback(cfg, side, rng::Stream{seed, 2, 0}, z, m);
    std::vector<double> s(n);
    std::transform(z.begin(), z.end(), s.begin(), [](std::complex<double> v) { return std::norm(v); });
    std::sort(s.begin(), s.end());
    return s;
}
}  // namespace

TEST_CASE("moments with every word wrong are circular") {
    const auto cfg = cfg_of(6.0);
    const auto mom = moments(cfg, FeedbackSideInfo{2, 0.05}, 20);
    CHECK(mom.mu_r == 0.0);
    // P |delta| gamma_bar / 2 with P = 1/|delta|
    CHECK(mom.sigma_r * mom.sigma_r == doctest::Approx(kGammaBar / 2).epsilon(1e-13));
    CHECK(mom.sigma_i * mom.sigma_i == doctest::Approx(kGammaBar / 2).epsilon(1e-13));
    CHECK(mom.noncentrality == mom.mu_r * mom.mu_r);
}

TEST_CASE("moments with near-perfect phasing") {
    const auto rayleigh = ClusterConfig{kGammaBar, 0.0, 20, 20, PowerScaling::ConstantTotal};
    const auto mom = moments(rayleigh, FeedbackSideInfo{30, 0.0}, 0);
    const double p = 1.0 / 20;
    CHECK(mom.mu_r == doctest::Approx(20 * std::sqrt(std::numbers::pi * kGammaBar * p / 4)).epsilon(1e-12));
    CHECK(mom.sigma_i > 0.0);
    CHECK(mom.sigma_i * mom.sigma_i < 1e-15 * kGammaBar);
}

TEST_CASE("moments validate the error count") {
    const auto cfg = cfg_of(6.0);
    CHECK_THROWS_AS(moments(cfg, FeedbackSideInfo{2, 0.05}, -1), DomainError);
    CHECK_THROWS_AS(moments(cfg, FeedbackSideInfo{2, 0.05}, 21), DomainError);
}

TEST_CASE("moments match the conditional sampler within 3 standard errors") {
    const auto cfg = cfg_of(6.0);
    const FeedbackSideInfo side{2, 0.05};
    const auto mom = moments(cfg, side, 1);
    constexpr std::size_t n = 10000000;
    std::vector<std::complex<double>> z(n);
    sample_sum_feedback(cfg, side, rng::Stream{31, 2, 0}, z, 1);
    double sr = 0, si = 0;
    for (auto v : z) {
        sr += v.real();
        si += v.imag();
    }
    const double mr = sr / n, mi = si / n;
    double vr = 0, vi = 0, m4r = 0, m4i = 0;
    for (auto v : z) {
        const double a = (v.real() - mr) * (v.real() - mr), b = (v.imag() - mi) * (v.imag() - mi);
        vr += a;
        vi += b;
        m4r += a * a;
        m4i += b * b;
    }
    vr /= n;
    vi /= n;
    m4r /= n;
    m4i /= n;
    CHECK(std::abs(mr - mom.mu_r) < 3 * std::sqrt(vr / n));
    CHECK(std::abs(mi) < 3 * std::sqrt(vi / n));
    CHECK(std::abs(vr - mom.sigma_r * mom.sigma_r) < 3 * std::sqrt((m4r - vr * vr) / n));
    CHECK(std::abs(vi - mom.sigma_i * mom.sigma_i) < 3 * std::sqrt((m4i - vi * vi) / n));
}

TEST_CASE("equal variances collapse to a single Rician term") {
    const GaussianSumMoments mom{1.3, 0.7, 0.7, 1.69};
    const auto w = mixture_weights(mom);
    REQUIRE(w.size() == 1);
    CHECK(w[0] == 1.0);
    for (double g : {0.1, 1.0, 2.0, 5.0}) {
        const auto v = mixture_cdf(mom, g);
        CHECK(v.branch == CdfBranch::Series);
        CHECK(v.value == doctest::Approx(oracle::marcum_cdf(1, 1.3 / 0.7, std::sqrt(g) / 0.7)).epsilon(1e-12));
    }
    const GaussianSumMoments zero{0.0, 0.5, 0.5, 0.0};
    for (double g : {1e-3, 0.1, 0.5, 3.0}) {
        const double want = -std::expm1(-g / 0.5);
        CHECK(std::abs(mixture_cdf(zero, g).value - want) < 1e-12);
        CHECK(std::abs(quadrature_cdf(zero, g) - want) < 1e-10);
    }
    CHECK(quadrature_cdf(mom, 0.0) == 0.0);
    CHECK(mixture_cdf(mom, 0.0).value == 0.0);
}

TEST_CASE("mixture weights sum to one") {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u(0.05, 3.0);
    for (int i = 0; i < 100; ++i) {
        const double sr = u(gen), si = u(gen);
        const GaussianSumMoments mom{0.0, sr, si, 0.0};
        if (!(std::abs(series_parameter(mom)) < 1.0)) continue;
        const auto w = mixture_weights(mom);
        double s = 0.0;
        for (auto it = w.rbegin(); it != w.rend(); ++it) s += *it;
        INFO("sr=" << sr << " si=" << si << " terms=" << w.size());
        CHECK(std::abs(s - 1.0) < 1e-10);
    }
    CHECK_THROWS_AS(mixture_weights(GaussianSumMoments{0.0, 2.0, 1.0, 0.0}), DomainError);
}

TEST_CASE("series and quadrature branches agree on random draws") {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int compared = 0;
    while (compared < 100) {
        const double si = 0.1 + 2.0 * u(gen);
        // sigma_r^2 = (1 - t) sigma_i^2 with |t| < 0.95
        const double t = -0.95 + 1.9 * u(gen);
        const double sr = si * std::sqrt(1.0 - t);
        const double mu = 4.0 * u(gen) * std::max(sr, si);
        const GaussianSumMoments mom{mu, sr, si, mu * mu};
        const double scale = mu * mu + sr * sr + si * si;
        const double g = scale * std::pow(10.0, -3.0 + 3.5 * u(gen));
        const auto a = mixture_cdf(mom, g);
        if (a.branch != CdfBranch::Series) continue;
        ++compared;
        const double b = quadrature_cdf(mom, g);
        INFO("mu=" << mu << " sr=" << sr << " si=" << si << " g=" << g);
        CHECK(std::abs(a.value - b) < 1e-8);
    }
}

TEST_CASE("mixture matches a two-dimensional quadrature oracle") {
    const std::vector<GaussianSumMoments> cases{
        {1.0, 0.4, 0.9, 1.0}, {0.5, 1.1, 0.8, 0.25}, {2.5, 0.3, 0.35, 6.25}, {0.0, 0.6, 1.0, 0.0}};
    for (const auto& mom : cases)
        for (double g : {0.05, 0.5, 2.0, 8.0}) {
            INFO("mu=" << mom.mu_r << " g=" << g);
            CHECK(std::abs(mixture_cdf(mom, g).value -
                           oracle::gaussian_power_cdf(mom.mu_r, mom.sigma_r, mom.sigma_i, g)) < 1e-8);
        }
}

TEST_CASE("quadrature branch is used near the radius of convergence") {
    const GaussianSumMoments wide{0.3, 0.1, 1.0, 0.09};  // t = 0.99
    const auto v = mixture_cdf(wide, 0.2);
    CHECK(v.branch == CdfBranch::Quadrature);
    CHECK(v.terms == 0);
    CHECK(std::abs(v.value - oracle::gaussian_power_cdf(0.3, 0.1, 1.0, 0.2)) < 1e-8);
    const GaussianSumMoments tall{0.3, 1.5, 0.1, 0.09};  // t = -224
    CHECK(mixture_cdf(tall, 0.2).branch == CdfBranch::Quadrature);
}

TEST_CASE("mixture CDF is monotone in gamma") {
    const auto mom = moments(cfg_of(6.0), FeedbackSideInfo{2, 0.05}, 1);
    double prev = 0.0;
    for (double g = 1e-5; g < 1.0; g *= 1.1) {
        const double v = mixture_cdf(mom, g).value;
        CHECK(v >= prev - 1e-15);
        CHECK(v <= 1.0);
        prev = v;
    }
}

TEST_CASE("binomial error weights") {
    for (int n : {1, 5, 20, 200})
        for (double p : {0.0, 0.01, 0.2, 0.5, 1.0}) {
            const auto w = error_count_weights(n, p);
            REQUIRE(w.size() == static_cast<std::size_t>(n + 1));
            double s = 0.0;
            for (double x : w) s += x;
            CHECK(std::abs(s - 1.0) < 1e-12);
        }
    CHECK(error_count_weights(20, 0.0)[0] == 1.0);
    CHECK(error_count_weights(20, 1.0)[20] == 1.0);
    CHECK(error_count_weights(3, 0.5)[1] == doctest::Approx(0.375).epsilon(1e-15));
    CHECK_THROWS_AS(error_count_weights(3, 1.5), DomainError);
}

TEST_CASE("error mixture degenerates at p_w = 0 and 1") {
    const auto cfg = cfg_of(6.0);
    for (double g : {1e-3, 0.01, 0.1, 0.5}) {
        CHECK(snr_cdf_with_errors(cfg, FeedbackSideInfo{2, 0.0}, g) ==
              doctest::Approx(mixture_cdf(moments(cfg, FeedbackSideInfo{2, 0.0}, 0), g).value).epsilon(1e-14));
        // all words wrong: incoherent sum with mean power gamma_bar
        CHECK(std::abs(snr_cdf_with_errors(cfg, FeedbackSideInfo{2, 1.0}, g) - (-std::expm1(-g / kGammaBar))) <
              1e-12);
    }
    const ServiceSpec svc{100, 200e3, 1e-3, 0};
    const double th = dor_threshold(100, 200e3, 1e-3).value;
    CHECK(dor_feedback(cfg, FeedbackSideInfo{2, 1.0}, svc) ==
          doctest::Approx(-std::expm1(-th / kGammaBar)).epsilon(1e-12));
    CHECK(dor_feedback(cfg, FeedbackSideInfo{2, 0.05}, ServiceSpec{100, 200e3, 1e6, 0}) < 1e-12);
}

TEST_CASE("more word errors are stochastically worse in the low-SNR tail") {
    const auto cfg = cfg_of(6.0);
    for (double g = 1e-5; g < 0.02; g *= 2.0) {
        double prev = 0.0;
        for (double pw : {0.0, 0.01, 0.05, 0.1, 0.2, 0.5}) {
            const double v = snr_cdf_with_errors(cfg, FeedbackSideInfo{2, pw}, g);
            INFO("g=" << g << " pw=" << pw);
            CHECK(v >= prev);
            prev = v;
        }
    }
}

TEST_CASE("component failures report the offending error count") {
    specfun::Tolerance tight;
    tight.max_terms = 1;
    const auto cfg = cfg_of(6.0);
    const FeedbackSideInfo side{2, 0.0};
    REQUIRE(std::abs(series_parameter(moments(cfg, side, 0))) < kSeriesRadius);
    try {
        snr_cdf_with_errors(cfg, side, 0.01, tight);
        FAIL("expected NumericFailure");
    } catch (const NumericFailure& e) {
        CHECK(std::string(e.what()).find("error_count=0") != std::string::npos);
    }
}

TEST_CASE("conditional CDF stays close to the conditional sampler") {
    // Gaussian approximation error is bounded, not zero
    for (double nu_db : {-3.0, 9.0})
        for (int bits : {1, 2}) {
            const auto cfg = cfg_of(nu_db);
            const FeedbackSideInfo side{bits, 0.05};
            for (int m : {0, 1, 5, 20}) {
                const auto s = conditional_snr(cfg, side, m, 40 + m, 1000000);
                const auto mom = moments(cfg, side, m);
                // every 100th jump; the skipped steps move either side by at most 1e-4
                double d = 0.0;
                for (std::size_t i = 0; i < s.size(); i += 100) {
                    const double f = mixture_cdf(mom, s[i]).value;
                    d = std::max({d, (i + 1.0) / s.size() - f, f - double(i) / s.size()});
                }
                INFO("nu_db=" << nu_db << " bits=" << bits << " m=" << m << " sup=" << d);
                CHECK(d < 0.015);
            }
        }
}
