#pragma once

#include "coopuplink/channel.hpp"
#include "coopuplink/metrics.hpp"

// Single-device reference laws used as comparison curves.
namespace coopuplink::baseline {

/// CDF of the power of one Rician channel with mean `mean_power`.
double rician_power_cdf(double mean_power, double rice_factor, double gamma);

/// Ideal selection of the strongest of cfg.active_devices full-power
/// channels: rician_power_cdf(mean_snr, rice_factor, gamma)^active.
double selection_cdf(const ClusterConfig& cfg, double gamma);

SnrCdf make_selection_cdf(const ClusterConfig& cfg);

}  // namespace coopuplink::baseline
