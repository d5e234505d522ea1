#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <string>

namespace coopuplink {

/// Service requirement: deliver data_bits within delay_threshold over
/// bandwidth, or sustain min_rate (outage mode).
struct ServiceSpec {
    double data_bits = 0.0;        ///< bits
    double bandwidth = 1.0;        ///< Hz
    double delay_threshold = 1.0;  ///< seconds
    double min_rate = 0.0;         ///< bits/s

    void validate() const;
};

/// Spectral efficiencies above this saturate: the threshold SNR 2^x - 1 is
/// treated as unreachable and the outage as certain.
inline constexpr double kMaxSpectralEfficiency = 64.0;

struct SnrThreshold {
    double value;    ///< linear SNR; +inf when saturated
    bool saturated;
};

/// 2^(min_rate / bandwidth) - 1.
SnrThreshold outage_threshold(double min_rate, double bandwidth);

/// 2^(data_bits / (bandwidth * delay_threshold)) - 1. A non-positive delay
/// threshold saturates.
SnrThreshold dor_threshold(double data_bits, double bandwidth, double delay_threshold);

/// Type-erased SNR CDF (analytic or empirical) with descriptive metadata.
/// Construction spot-checks range and monotonicity on a 64-point grid
/// spanning scale * [1e-4, 1e4] and throws DomainError on violation.
class SnrCdf {
public:
    using Function = std::function<double(double)>;

    SnrCdf(Function f, double scale, std::string scenario,
           std::map<std::string, std::string> metadata = {});

    double operator()(double gamma) const { return f_(gamma); }
    double scale() const { return scale_; }
    const std::string& scenario() const { return scenario_; }
    const std::map<std::string, std::string>& metadata() const { return metadata_; }

private:
    Function f_;
    double scale_;
    std::string scenario_;
    std::map<std::string, std::string> metadata_;
};

double outage_probability(const SnrCdf& cdf, double min_rate, double bandwidth);

/// Delay outage rate: cdf evaluated at dor_threshold, or 1 when saturated.
double dor(const SnrCdf& cdf, const ServiceSpec& svc);

/// Smallest SNR with cdf >= p, by geometric bisection (relative width 1e-12).
/// Throws DomainError if p is outside (0, 1) or cannot be bracketed.
double quantile(const SnrCdf& cdf, double p);

/// Same search over a plain callable, starting the bracket at `scale`.
double quantile(const std::function<double(double)>& cdf, double p, double scale);

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double v) { return 10.0 * std::log10(v); }

}  // namespace coopuplink
