#pragma once

#include <complex>
#include <optional>
#include <span>
#include <vector>

#include "coopuplink/rng.hpp"

namespace coopuplink {

/// How per-device transmit power depends on the number of active devices.
enum class PowerScaling {
    ConstantPerDevice,  ///< every device transmits at full power
    ConstantTotal,      ///< per-device power divided by the active count
};

/// Statistics of the cluster-to-receiver channels. Noise power is normalised
/// to one, so every power below is an SNR (linear ratio).
struct ClusterConfig {
    double mean_snr = 1.0;     ///< per-device mean received SNR
    double rice_factor = 0.0;  ///< static-to-scattered power ratio
    int active_devices = 1;
    int total_devices = 1;
    PowerScaling power_scaling = PowerScaling::ConstantPerDevice;

    void validate() const;
    /// Copy with a different active count; total_devices grows if needed.
    ClusterConfig with_active(int devices) const;
};

/// Location-map phasing: Gaussian phase error on the static component.
struct CkmSideInfo {
    double sigma_eps = 0.0;  ///< radians
    void validate() const;
};

/// Quantised-feedback phasing with per-device word errors.
struct FeedbackSideInfo {
    int bits = 1;
    double word_error_prob = 0.0;
    void validate() const;
};

struct DerivedPowers {
    double gamma_d;                  ///< static-part power
    double gamma_s;                  ///< scattered-part mean power
    double per_device_power_factor;  ///< 1, or 1/|active| under ConstantTotal
};

DerivedPowers derive_powers(const ClusterConfig& cfg);

/// Nearest codeword n * pi / 2^(bits-1), n = 1..2^bits, for a phase in radians.
/// Returned as the codeword index in [1, 2^bits].
int quantize_phase_index(double phase, int bits);

// Samplers. Each fills `out` with i.i.d. linear SNR samples; sample i of the
// span uses counter index stream.first_sample + i. Results do not depend on how
// a run is partitioned across calls.

/// |sqrt(P) (sum_k g_k + sqrt(gamma_d) sum_k e^{j eps_k})|^2. The scattered
/// sum of |active| independent complex Gaussians is drawn as one complex
/// Gaussian of the summed power, which has the same law.
void sample_snr_ckm(const ClusterConfig& cfg, const CkmSideInfo& side, const rng::Stream& stream,
                    std::span<double> out);

/// Complex received amplitude sum under quantised feedback. When
/// `forced_errors` is set, exactly that many devices (the first ones) carry a
/// random phasing word; otherwise each device errs with word_error_prob.
void sample_sum_feedback(const ClusterConfig& cfg, const FeedbackSideInfo& side,
                         const rng::Stream& stream, std::span<std::complex<double>> out,
                         std::optional<int> forced_errors = std::nullopt);

/// |sample_sum_feedback|^2.
void sample_snr_feedback(const ClusterConfig& cfg, const FeedbackSideInfo& side,
                         const rng::Stream& stream, std::span<double> out);

/// Residual phase (channel phase minus applied codeword, wrapped to (-pi, pi])
/// of device 0, drawn exactly as sample_sum_feedback draws it.
void sample_feedback_residuals(const FeedbackSideInfo& side, const rng::Stream& stream,
                               std::span<double> out);

/// Best of |active| independent full-power Rician channels of mean mean_snr.
/// Power scaling is ignored: a single selected device cannot borrow power.
void sample_snr_selection(const ClusterConfig& cfg, const rng::Stream& stream,
                          std::span<double> out);

std::vector<double> sample_snr_ckm(const ClusterConfig& cfg, const CkmSideInfo& side,
                                   const rng::Stream& stream, std::size_t n);
std::vector<double> sample_snr_feedback(const ClusterConfig& cfg, const FeedbackSideInfo& side,
                                        const rng::Stream& stream, std::size_t n);
std::vector<double> sample_snr_selection(const ClusterConfig& cfg, const rng::Stream& stream,
                                         std::size_t n);

}  // namespace coopuplink
