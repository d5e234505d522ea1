#include "coopuplink/analytic_feedback.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "coopuplink/errors.hpp"

namespace coopuplink::feedback {

GaussianSumMoments moments(const ClusterConfig& cfg, const FeedbackSideInfo& side,
                           int error_count) {
    side.validate();
    const auto p = derive_powers(cfg);
    const int n = cfg.active_devices;
    if (error_count < 0 || error_count > n)
        throw DomainError("feedback::moments: error_count must be in [0, active_devices]");

    const double f = p.per_device_power_factor;
    const double m = error_count;
    const double good = n - m;
    const double mean_power = cfg.mean_snr;
    const double amp = specfun::rice_amplitude_mean(mean_power, cfg.rice_factor);
    const double half_step = std::ldexp(1.0, -side.bits);      // 2^-N
    const double full_step = std::ldexp(1.0, 1 - side.bits);   // 2^(1-N)
    const double c1 = specfun::sinc_norm(half_step);
    const double c2 = specfun::sinc_norm(full_step);
    const double one_minus_c2 = specfun::one_minus_sinc_norm(full_step);

    const double mu_r = std::sqrt(f) * good * amp * c1;
    // E[Re^2] - mu_r^2 with the (good)^2 cross terms cancelled analytically.
    const double var_r =
        f * (0.5 * m * mean_power + good * (0.5 * mean_power * (1.0 + c2) - amp * amp * c1 * c1));
    const double var_i = f * (0.5 * m * mean_power + 0.5 * good * mean_power * one_minus_c2);
    if (!(var_r > 0.0) || !(var_i > 0.0))
        throw NumericFailure("feedback::moments: non-positive variance (error_count=" +
                                 std::to_string(error_count) + ")",
                             std::min(var_r, var_i));
    return {mu_r, std::sqrt(var_r), std::sqrt(var_i), mu_r * mu_r};
}

double series_parameter(const GaussianSumMoments& mom) {
    const double vr = mom.sigma_r * mom.sigma_r;
    const double vi = mom.sigma_i * mom.sigma_i;
    return (vi - vr) / vi;
}

std::vector<double> mixture_weights(const GaussianSumMoments& mom, const specfun::Tolerance& tol) {
    tol.validate();
    const double t = series_parameter(mom);
    if (!(std::abs(t) < 1.0)) throw DomainError("mixture_weights: |t| must be < 1");
    const double at = std::abs(t);
    std::vector<double> w{mom.sigma_r / mom.sigma_i};
    if (t == 0.0) return w;
    // |a_{k+1} / a_k| < |t|, so the tail after a_n is below |a_n| |t| / (1 - |t|).
    const double target = 1e-2 * tol.abs_tol;
    double a = w.front();
    for (int k = 0;; ++k) {
        if (std::abs(a) * at / (1.0 - at) <= target) break;
        if (k + 1 >= tol.max_terms) {
            double partial = 0.0;
            for (double v : w) partial += v;
            throw NumericFailure("mixture_weights: exceeded max_terms", partial);
        }
        a *= t * (k + 0.5) / (k + 1.0);
        w.push_back(a);
    }
    return w;
}

double quadrature_cdf(const GaussianSumMoments& mom, double gamma) {
    if (!(gamma >= 0.0)) throw DomainError("quadrature_cdf: gamma must be >= 0");
    if (!(mom.sigma_r > 0.0) || !(mom.sigma_i > 0.0))
        throw DomainError("quadrature_cdf: standard deviations must be > 0");
    if (gamma == 0.0) return 0.0;
    if (std::isinf(gamma)) return 1.0;
    const double r = std::sqrt(gamma);
    const double sr = mom.sigma_r;
    const double si = mom.sigma_i;
    const double mu = mom.mu_r;
    constexpr double half_pi = 0.5 * std::numbers::pi;
    const double inv_sqrt_2pi = 0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2;

    // Integrate over x = r sin(theta): density of X times P(|Y| <= r cos(theta)).
    auto f = [&](double th) {
        const double c = std::cos(th);
        const double z = (r * std::sin(th) - mu) / sr;
        return inv_sqrt_2pi / sr * std::exp(-0.5 * z * z) *
               std::erf(r * c / (std::numbers::sqrt2 * si)) * r * c;
    };

    // Break the range around the peak of the X density.
    const double th0 = std::asin(std::clamp(mu / r, -1.0, 1.0));
    const double width = sr / (r * std::max(std::cos(th0), 1e-3));
    std::vector<double> pts{-half_pi, half_pi};
    for (double k : {-10.0, -3.0, 0.0, 3.0, 10.0}) {
        const double p = th0 + k * width;
        if (p > -half_pi && p < half_pi) pts.push_back(p);
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

    double total = 0.0;
    double err_total = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        double err = 0.0;
        total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
            f, pts[i], pts[i + 1], 15, 1e-13, &err);
        err_total += err;
    }
    if (!std::isfinite(total) || err_total > 1e-6 * std::abs(total) + 1e-14)
        throw NumericFailure("quadrature_cdf: integration did not converge", total);
    return std::clamp(total, 0.0, 1.0);
}

CdfValue mixture_cdf(const GaussianSumMoments& mom, double gamma, const specfun::Tolerance& tol) {
    if (!(gamma >= 0.0)) throw DomainError("mixture_cdf: gamma must be >= 0");
    if (!(mom.sigma_r > 0.0) || !(mom.sigma_i > 0.0))
        throw DomainError("mixture_cdf: standard deviations must be > 0");
    if (std::isinf(gamma)) return {1.0, CdfBranch::Series, 0};
    const double t = series_parameter(mom);
    if (!(std::abs(t) < kSeriesRadius))
        return {quadrature_cdf(mom, gamma), CdfBranch::Quadrature, 0};
    if (gamma == 0.0) return {0.0, CdfBranch::Series, 1};

    const auto w = mixture_weights(mom, tol);
    const int terms = static_cast<int>(w.size());
    const auto cdfs = specfun::marcum_cdf_orders(terms, std::sqrt(mom.noncentrality) / mom.sigma_r,
                                                 std::sqrt(gamma) / mom.sigma_r, tol);
    double sum = 0.0;
    for (int k = terms - 1; k >= 0; --k) sum += w[k] * cdfs[k];
    if (!(sum > -1e-12 && sum < 1.0 + 1e-12))
        throw NumericFailure("mixture_cdf: series left [0, 1]", sum);
    return {std::clamp(sum, 0.0, 1.0), CdfBranch::Series, terms};
}

std::vector<double> error_count_weights(int active_devices, double word_error_prob) {
    if (active_devices < 1) throw DomainError("error_count_weights: active_devices must be >= 1");
    if (!(word_error_prob >= 0.0 && word_error_prob <= 1.0))
        throw DomainError("error_count_weights: word_error_prob must be in [0, 1]");
    const int n = active_devices;
    std::vector<double> w(n + 1, 0.0);
    if (word_error_prob == 0.0) {
        w[0] = 1.0;
        return w;
    }
    if (word_error_prob == 1.0) {
        w[n] = 1.0;
        return w;
    }
    const double lp = std::log(word_error_prob);
    const double lq = std::log1p(-word_error_prob);
    const double ln_fact = std::lgamma(n + 1.0);
    for (int m = 0; m <= n; ++m)
        w[m] = std::exp(ln_fact - std::lgamma(m + 1.0) - std::lgamma(n - m + 1.0) + m * lp +
                        (n - m) * lq);
    return w;
}

double snr_cdf_with_errors(const ClusterConfig& cfg, const FeedbackSideInfo& side, double gamma,
                           const specfun::Tolerance& tol) {
    cfg.validate();
    side.validate();
    tol.validate();
    if (!(gamma >= 0.0)) throw DomainError("feedback::snr_cdf: gamma must be >= 0");
    if (std::isinf(gamma)) return 1.0;
    const auto w = error_count_weights(cfg.active_devices, side.word_error_prob);
    const double skip = 1e-3 * tol.abs_tol;
    // Neumaier summation, ascending error count.
    double sum = 0.0;
    double comp = 0.0;
    for (int m = 0; m <= cfg.active_devices; ++m) {
        if (w[m] < skip) continue;
        double term;
        try {
            term = w[m] * mixture_cdf(moments(cfg, side, m), gamma, tol).value;
        } catch (const NumericFailure& e) {
            throw NumericFailure(std::string(e.what()) + " (error_count=" + std::to_string(m) + ")",
                                 sum + comp);
        }
        const double s = sum + term;
        if (std::abs(sum) >= std::abs(term))
            comp += (sum - s) + term;
        else
            comp += (term - s) + sum;
        sum = s;
    }
    return std::clamp(sum + comp, 0.0, 1.0);
}

double dor_feedback(const ClusterConfig& cfg, const FeedbackSideInfo& side,
                    const ServiceSpec& svc, const specfun::Tolerance& tol) {
    svc.validate();
    const auto th = dor_threshold(svc.data_bits, svc.bandwidth, svc.delay_threshold);
    if (th.saturated) return 1.0;
    return snr_cdf_with_errors(cfg, side, th.value, tol);
}

SnrCdf make_cdf(const ClusterConfig& cfg, const FeedbackSideInfo& side) {
    const auto m0 = moments(cfg, side, 0);
    const double scale =
        m0.noncentrality + m0.sigma_r * m0.sigma_r + m0.sigma_i * m0.sigma_i;
    return SnrCdf([cfg, side](double g) { return snr_cdf_with_errors(cfg, side, g); }, scale,
                  "feedback",
                  {{"bits", std::to_string(side.bits)},
                   {"word_error_prob", std::to_string(side.word_error_prob)},
                   {"approximation", "gaussian"}});
}

}  // namespace coopuplink::feedback
