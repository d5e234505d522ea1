#include "coopuplink/baseline.hpp"

#include <cmath>

#include "coopuplink/errors.hpp"
#include "coopuplink/specfun.hpp"

namespace coopuplink::baseline {

double rician_power_cdf(double mean_power, double rice_factor, double gamma) {
    if (!(mean_power > 0.0)) throw DomainError("rician_power_cdf: mean_power must be > 0");
    if (!(rice_factor >= 0.0)) throw DomainError("rician_power_cdf: rice_factor must be >= 0");
    if (!(gamma >= 0.0)) throw DomainError("rician_power_cdf: gamma must be >= 0");
    if (std::isinf(gamma)) return 1.0;
    return specfun::marcum_cdf(1, std::sqrt(2.0 * rice_factor),
                               std::sqrt(2.0 * (1.0 + rice_factor) * gamma / mean_power));
}

double selection_cdf(const ClusterConfig& cfg, double gamma) {
    cfg.validate();
    return std::pow(rician_power_cdf(cfg.mean_snr, cfg.rice_factor, gamma), cfg.active_devices);
}

SnrCdf make_selection_cdf(const ClusterConfig& cfg) {
    cfg.validate();
    return SnrCdf([cfg](double g) { return selection_cdf(cfg, g); }, cfg.mean_snr, "selection");
}

}  // namespace coopuplink::baseline
