#include "coopuplink/analytic_ckm.hpp"

#include <climits>
#include <cmath>
#include <string>

#include "coopuplink/errors.hpp"

namespace coopuplink::ckm {

double effective_rice_factor(double rice_factor, int active_devices, double sigma_eps) {
    if (!(rice_factor >= 0.0)) throw DomainError("effective_rice_factor: rice_factor must be >= 0");
    if (active_devices < 1) throw DomainError("effective_rice_factor: active_devices must be >= 1");
    if (!(sigma_eps >= 0.0)) throw DomainError("effective_rice_factor: sigma_eps must be >= 0");
    return rice_factor * (1.0 + (active_devices - 1.0) * std::exp(-sigma_eps * sigma_eps));
}

Scenario1Dist build_dist(const ClusterConfig& cfg, const CkmSideInfo& side) {
    side.validate();
    const auto p = derive_powers(cfg);
    const double n = cfg.active_devices;
    const double s = side.sigma_eps;
    // E|sum_k e^{j eps_k}|^2 = E<1,cos eps>^2 + E<1,sin eps>^2
    const double mean_cos = specfun::gauss_cos_moment(s);
    const double cos_part = n * specfun::gauss_cos2_moment(s) + n * (n - 1.0) * mean_cos * mean_cos;
    const double sin_part = n * specfun::gauss_sin2_moment(s);
    const double agg = p.gamma_d * p.per_device_power_factor * (cos_part + sin_part);
    const double scattered = n * p.gamma_s * p.per_device_power_factor;
    return {agg, std::sqrt(0.5 * scattered), agg / scattered};
}

double snr_cdf(const Scenario1Dist& d, double gamma, const specfun::Tolerance& tol) {
    if (!(gamma >= 0.0)) throw DomainError("ckm::snr_cdf: gamma must be >= 0");
    if (std::isinf(gamma)) return 1.0;
    return specfun::marcum_cdf(1, std::sqrt(d.agg_static_power) / d.sigma_sum,
                               std::sqrt(gamma) / d.sigma_sum, tol);
}

double dor(const Scenario1Dist& d, const ServiceSpec& svc, const specfun::Tolerance& tol) {
    svc.validate();
    const auto th = dor_threshold(svc.data_bits, svc.bandwidth, svc.delay_threshold);
    if (th.saturated) return 1.0;
    return snr_cdf(d, th.value, tol);
}

double required_devices_bound(double target_dor, double gamma_req, double rice_factor,
                              double mean_snr, double sigma_eps, PowerScaling scaling) {
    if (!(target_dor > 0.0 && target_dor < 0.5))
        throw DomainError("required_devices: target_dor must be in (0, 1/2)");
    if (!(gamma_req >= 0.0) || !std::isfinite(gamma_req))
        throw DomainError("required_devices: gamma_req must be finite and >= 0");
    if (!(mean_snr > 0.0)) throw DomainError("required_devices: mean_snr must be > 0");
    if (!(sigma_eps >= 0.0)) throw DomainError("required_devices: sigma_eps must be >= 0");
    if (!(rice_factor >= 0.0)) throw DomainError("required_devices: rice_factor must be >= 0");
    if (rice_factor == 0.0)
        throw UnsupportedRegime("required_devices: bound needs a non-zero Rice factor");

    const double nu = rice_factor;
    const double log2p = std::log(2.0 * target_dor);  // < 0
    const double ratio = gamma_req / mean_snr;
    const double s2 = sigma_eps * sigma_eps;

    if (scaling == PowerScaling::ConstantTotal) {
        const double root = std::sqrt(-log2p / nu) + std::sqrt((1.0 + nu) / nu * ratio);
        return std::exp(s2) * root * root;
    }
    const double inner =
        1.0 - 4.0 * std::exp(-0.5 * s2) * std::sqrt(nu * (1.0 + nu) * ratio) / log2p;
    if (inner < 0.0) throw NoFiniteBound("required_devices: negative discriminant");
    const double root = 1.0 + std::sqrt(inner);
    return -std::exp(s2) / (4.0 * nu) * log2p * root * root;
}

int required_devices(double target_dor, double gamma_req, double rice_factor, double mean_snr,
                     double sigma_eps, PowerScaling scaling) {
    const double bound =
        required_devices_bound(target_dor, gamma_req, rice_factor, mean_snr, sigma_eps, scaling);
    if (!(bound < static_cast<double>(INT_MAX) - 1.0))
        throw NoFiniteBound("required_devices: bound exceeds representable device count");
    return static_cast<int>(std::floor(bound)) + 1;
}

bool bound_validity(const ServiceSpec& svc, const ClusterConfig& cfg, const CkmSideInfo& side) {
    side.validate();
    const auto th = dor_threshold(svc.data_bits, svc.bandwidth, svc.delay_threshold);
    if (th.saturated) return false;
    const auto p = derive_powers(cfg);
    const double n = cfg.active_devices;
    const double static_power =
        p.gamma_d * p.per_device_power_factor * n * n * std::exp(-side.sigma_eps * side.sigma_eps);
    return static_power > th.value;
}

SnrCdf make_cdf(const ClusterConfig& cfg, const CkmSideInfo& side) {
    const auto d = build_dist(cfg, side);
    const double mean = d.agg_static_power + 2.0 * d.sigma_sum * d.sigma_sum;
    return SnrCdf([d](double g) { return snr_cdf(d, g); }, mean, "ckm",
                  {{"effective_rice", std::to_string(d.effective_rice)},
                   {"approximation", "rician"}});
}

}  // namespace coopuplink::ckm
