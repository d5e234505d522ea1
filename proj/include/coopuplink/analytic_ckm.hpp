#pragma once

#include "coopuplink/channel.hpp"
#include "coopuplink/metrics.hpp"
#include "coopuplink/specfun.hpp"

/// Closed-form analysis of location-map (CKM) phasing. The cooperative sum
/// channel is approximated by a Rician channel whose static power is the mean
/// power of the phase-perturbed static sum. This is a model approximation:
/// its error grows with the phase-error spread and the Rice factor.
namespace coopuplink::ckm {

/// Parameters of the approximating Rician law of the received SNR.
struct Scenario1Dist {
    double agg_static_power;  ///< mean power of the phased static sum
    double sigma_sum;         ///< per-dimension std of the scattered sum
    double effective_rice;    ///< agg_static_power / (2 sigma_sum^2)
};

/// nu * (1 + (active - 1) exp(-sigma_eps^2)).
double effective_rice_factor(double rice_factor, int active_devices, double sigma_eps);

Scenario1Dist build_dist(const ClusterConfig& cfg, const CkmSideInfo& side);

/// 1 - Q_1(sqrt(agg_static_power) / sigma_sum, sqrt(gamma) / sigma_sum).
double snr_cdf(const Scenario1Dist& d, double gamma, const specfun::Tolerance& tol = {});

/// snr_cdf at the delay threshold SNR; 1 when the threshold saturates.
double dor(const Scenario1Dist& d, const ServiceSpec& svc, const specfun::Tolerance& tol = {});

/// Real-valued right-hand side of the device-count requirement.
/// Throws DomainError unless 0 < target_dor < 1/2, UnsupportedRegime when
/// rice_factor == 0, and NoFiniteBound if the inner square root is negative.
double required_devices_bound(double target_dor, double gamma_req, double rice_factor,
                              double mean_snr, double sigma_eps, PowerScaling scaling);

/// Smallest integer strictly greater than required_devices_bound.
int required_devices(double target_dor, double gamma_req, double rice_factor, double mean_snr,
                     double sigma_eps, PowerScaling scaling);

/// Whether the Marcum bound behind required_devices applies at
/// cfg.active_devices: the approximated static power
/// gamma_d * P * |active|^2 * exp(-sigma_eps^2) must exceed the threshold SNR.
bool bound_validity(const ServiceSpec& svc, const ClusterConfig& cfg, const CkmSideInfo& side);

/// Analytic CDF wrapped for the metrics module.
SnrCdf make_cdf(const ClusterConfig& cfg, const CkmSideInfo& side);

}  // namespace coopuplink::ckm
