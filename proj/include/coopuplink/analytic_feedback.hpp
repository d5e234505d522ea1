#pragma once

#include <vector>

#include "coopuplink/channel.hpp"
#include "coopuplink/metrics.hpp"
#include "coopuplink/specfun.hpp"

/// Closed-form analysis of quantised-feedback phasing. Real and imaginary
/// parts of the received sum are approximated by independent Gaussians
/// (central limit approximation), conditioned on the number of devices whose
/// phasing word was corrupted.
namespace coopuplink::feedback {

/// Gaussian approximation of the received sum given `error_count` bad words.
/// The imaginary mean is zero by symmetry.
struct GaussianSumMoments {
    double mu_r;
    double sigma_r;
    double sigma_i;
    double noncentrality;  ///< mu_r^2
};

/// Throws DomainError for error_count outside [0, active_devices] and
/// NumericFailure if a variance is not positive.
GaussianSumMoments moments(const ClusterConfig& cfg, const FeedbackSideInfo& side,
                           int error_count);

enum class CdfBranch { Series, Quadrature };

struct CdfValue {
    double value;
    CdfBranch branch;
    int terms;  ///< mixture terms used; 0 for quadrature
};

/// The series runs while |t| < kSeriesRadius, t = (sigma_i^2 - sigma_r^2) / sigma_i^2.
inline constexpr double kSeriesRadius = 0.95;

double series_parameter(const GaussianSumMoments& mom);

/// Mixture weights a_n = Gamma(n+1/2) / (Gamma(n+1) Gamma(1/2)) (sigma_r/sigma_i) t^n,
/// truncated once the remaining absolute mass is below tol.abs_tol / 100.
/// Throws DomainError if |t| >= 1.
std::vector<double> mixture_weights(const GaussianSumMoments& mom,
                                    const specfun::Tolerance& tol = {});

/// P(X^2 + Y^2 <= gamma), X ~ N(mu_r, sigma_r^2), Y ~ N(0, sigma_i^2), by the
/// chi-square mixture sum_n a_n (1 - Q_{n+1}(sqrt(lambda)/sigma_r, sqrt(gamma)/sigma_r)).
/// Falls back to quadrature_cdf when |t| >= kSeriesRadius.
CdfValue mixture_cdf(const GaussianSumMoments& mom, double gamma,
                     const specfun::Tolerance& tol = {});

/// Same probability by adaptive Gauss-Kronrod quadrature over the circle
/// x^2 + y^2 <= gamma.
double quadrature_cdf(const GaussianSumMoments& mom, double gamma);

/// Binomial(active, p_w) probabilities of m = 0..active word errors.
std::vector<double> error_count_weights(int active_devices, double word_error_prob);

/// Binomially mixed conditional CDFs over the error count.
double snr_cdf_with_errors(const ClusterConfig& cfg, const FeedbackSideInfo& side, double gamma,
                           const specfun::Tolerance& tol = {});

double dor_feedback(const ClusterConfig& cfg, const FeedbackSideInfo& side,
                    const ServiceSpec& svc, const specfun::Tolerance& tol = {});

SnrCdf make_cdf(const ClusterConfig& cfg, const FeedbackSideInfo& side);

}  // namespace coopuplink::feedback
