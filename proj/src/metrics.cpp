#include "coopuplink/metrics.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <utility>

#include "coopuplink/errors.hpp"

namespace coopuplink {

namespace {

SnrThreshold threshold_from_efficiency(double efficiency) {
    if (!(efficiency <= kMaxSpectralEfficiency))
        return {std::numeric_limits<double>::infinity(), true};
    return {std::expm1(efficiency * std::numbers::ln2), false};
}

}  // namespace

void ServiceSpec::validate() const {
    if (!(data_bits >= 0.0) || !std::isfinite(data_bits))
        throw DomainError("ServiceSpec: data_bits must be >= 0");
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
        throw DomainError("ServiceSpec: bandwidth must be > 0");
    if (!(delay_threshold > 0.0)) throw DomainError("ServiceSpec: delay_threshold must be > 0");
    if (!(min_rate >= 0.0) || !std::isfinite(min_rate))
        throw DomainError("ServiceSpec: min_rate must be >= 0");
}

SnrThreshold outage_threshold(double min_rate, double bandwidth) {
    if (!(bandwidth > 0.0)) throw DomainError("outage_threshold: bandwidth must be > 0");
    if (!(min_rate >= 0.0)) throw DomainError("outage_threshold: min_rate must be >= 0");
    return threshold_from_efficiency(min_rate / bandwidth);
}

SnrThreshold dor_threshold(double data_bits, double bandwidth, double delay_threshold) {
    if (!(bandwidth > 0.0)) throw DomainError("dor_threshold: bandwidth must be > 0");
    if (!(data_bits >= 0.0)) throw DomainError("dor_threshold: data_bits must be >= 0");
    if (data_bits == 0.0) return {0.0, false};
    if (!(delay_threshold > 0.0)) return {std::numeric_limits<double>::infinity(), true};
    return threshold_from_efficiency(data_bits / (bandwidth * delay_threshold));
}

SnrCdf::SnrCdf(Function f, double scale, std::string scenario,
               std::map<std::string, std::string> metadata)
    : f_(std::move(f)), scale_(scale), scenario_(std::move(scenario)),
      metadata_(std::move(metadata)) {
    if (!(scale > 0.0) || !std::isfinite(scale)) throw DomainError("SnrCdf: scale must be > 0");
    double prev = 0.0;
    for (int i = 0; i < 64; ++i) {
        const double gamma = scale * std::pow(10.0, -4.0 + 8.0 * i / 63.0);
        const double v = f_(gamma);
        if (!(v >= 0.0 && v <= 1.0)) throw DomainError("SnrCdf: value outside [0, 1]");
        if (v < prev - 1e-12) throw DomainError("SnrCdf: not non-decreasing");
        prev = v;
    }
}

double outage_probability(const SnrCdf& cdf, double min_rate, double bandwidth) {
    const auto th = outage_threshold(min_rate, bandwidth);
    if (th.saturated) return 1.0;
    return cdf(th.value);
}

double dor(const SnrCdf& cdf, const ServiceSpec& svc) {
    svc.validate();
    const auto th = dor_threshold(svc.data_bits, svc.bandwidth, svc.delay_threshold);
    if (th.saturated) return 1.0;
    return cdf(th.value);
}

double quantile(const std::function<double(double)>& cdf, double p, double scale) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("quantile: p must be in (0, 1)");
    double lo = scale;
    double hi = scale;
    while (cdf(hi) < p) {
        hi *= 2.0;
        if (hi > 1e300) throw DomainError("quantile: cannot bracket from above");
    }
    while (cdf(lo) >= p) {
        lo *= 0.5;
        if (lo < 1e-300) throw DomainError("quantile: cannot bracket from below");
    }
    for (int it = 0; it < 400 && hi > lo * (1.0 + 1e-12); ++it) {
        const double mid = std::sqrt(lo * hi);
        if (mid <= lo || mid >= hi) break;
        if (cdf(mid) >= p)
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

double quantile(const SnrCdf& cdf, double p) {
    return quantile([&](double g) { return cdf(g); }, p, cdf.scale());
}

}  // namespace coopuplink
