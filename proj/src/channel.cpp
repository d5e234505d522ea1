#include "coopuplink/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "coopuplink/errors.hpp"

namespace coopuplink {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Device slot reserved for the aggregated scattered component.
constexpr std::uint32_t kScatterSlot = 0xFFFFFFFFu;

double wrap_pi(double phase) {
    double r = std::remainder(phase, kTwoPi);
    if (r <= -std::numbers::pi) r += kTwoPi;
    return r;
}

struct FeedbackDevice {
    double amplitude;
    double residual;
};

// One device of the feedback scenario. Words: (0,1) scattered Gaussian,
// 2 channel phase, 3 word-error decision and, on error, the random codeword.
FeedbackDevice feedback_device(const rng::Philox4x32& eng, std::uint64_t sample, std::uint32_t k,
                               double scatter_sd, double static_amp, int bits, double p_w,
                               bool forced, bool force_error) {
    const auto w = rng::draw(eng, sample, k);
    const auto g = rng::normal_pair(w[0], w[1]);
    const double re = scatter_sd * g[0] + static_amp;
    const double im = scatter_sd * g[1];
    const double amplitude = std::hypot(re, im);

    const double phase = kTwoPi * rng::to_unit(w[2]);
    const int codebook = 1 << bits;
    const double step = kTwoPi / codebook;
    const double u = rng::to_unit(w[3]);

    bool error = false;
    double pick = 0.0;
    if (forced) {
        error = force_error;
        pick = u;
    } else if (u < p_w) {
        error = true;
        pick = u / p_w;
    }
    int index;
    if (error) {
        index = 1 + std::min(codebook - 1, static_cast<int>(pick * codebook));
    } else {
        index = quantize_phase_index(phase, bits);
    }
    return {amplitude, wrap_pi(phase - index * step)};
}

}  // namespace

void ClusterConfig::validate() const {
    if (!(mean_snr > 0.0) || !std::isfinite(mean_snr))
        throw DomainError("ClusterConfig: mean_snr must be > 0");
    if (!(rice_factor >= 0.0) || !std::isfinite(rice_factor))
        throw DomainError("ClusterConfig: rice_factor must be >= 0");
    if (active_devices < 1 || active_devices > total_devices)
        throw DomainError("ClusterConfig: need 1 <= active_devices <= total_devices");
}

ClusterConfig ClusterConfig::with_active(int devices) const {
    ClusterConfig c = *this;
    c.active_devices = devices;
    c.total_devices = std::max(total_devices, devices);
    return c;
}

void CkmSideInfo::validate() const {
    if (!(sigma_eps >= 0.0) || !std::isfinite(sigma_eps))
        throw DomainError("CkmSideInfo: sigma_eps must be >= 0");
}

void FeedbackSideInfo::validate() const {
    if (bits < 1 || bits > 30) throw DomainError("FeedbackSideInfo: bits must be in [1, 30]");
    if (!(word_error_prob >= 0.0 && word_error_prob <= 1.0))
        throw DomainError("FeedbackSideInfo: word_error_prob must be in [0, 1]");
}

DerivedPowers derive_powers(const ClusterConfig& cfg) {
    cfg.validate();
    const double nu = cfg.rice_factor;
    const double factor = cfg.power_scaling == PowerScaling::ConstantTotal
                              ? 1.0 / static_cast<double>(cfg.active_devices)
                              : 1.0;
    return {cfg.mean_snr * nu / (1.0 + nu), cfg.mean_snr / (1.0 + nu), factor};
}

int quantize_phase_index(double phase, int bits) {
    const int codebook = 1 << bits;
    const double step = kTwoPi / codebook;
    long n = std::lround(phase / step) % codebook;
    if (n < 0) n += codebook;
    return n == 0 ? codebook : static_cast<int>(n);
}

void sample_snr_ckm(const ClusterConfig& cfg, const CkmSideInfo& side, const rng::Stream& stream,
                    std::span<double> out) {
    side.validate();
    const auto p = derive_powers(cfg);
    const int devices = cfg.active_devices;
    const double static_amp = std::sqrt(p.gamma_d * p.per_device_power_factor);
    const double scatter_sd = std::sqrt(0.5 * devices * p.gamma_s * p.per_device_power_factor);
    const double sigma = side.sigma_eps;
    const auto eng = stream.engine();

    for (std::size_t i = 0; i < out.size(); ++i) {
        const std::uint64_t sample = stream.first_sample + i;
        double sum_re = 0.0;
        double sum_im = 0.0;
        if (static_amp > 0.0) {
            for (int k = 0; k < devices; k += 4) {
                const auto w = rng::draw(eng, sample, static_cast<std::uint32_t>(k / 4));
                const auto e01 = rng::normal_pair(w[0], w[1]);
                const auto e23 = rng::normal_pair(w[2], w[3]);
                const double eps[4] = {e01[0], e01[1], e23[0], e23[1]};
                const int last = std::min(4, devices - k);
                for (int j = 0; j < last; ++j) {
                    const double e = sigma * eps[j];
                    sum_re += std::cos(e);
                    sum_im += std::sin(e);
                }
            }
        }
        const auto w = rng::draw(eng, sample, kScatterSlot);
        const auto g = rng::normal_pair(w[0], w[1]);
        const double re = static_amp * sum_re + scatter_sd * g[0];
        const double im = static_amp * sum_im + scatter_sd * g[1];
        out[i] = re * re + im * im;
    }
}

void sample_sum_feedback(const ClusterConfig& cfg, const FeedbackSideInfo& side,
                         const rng::Stream& stream, std::span<std::complex<double>> out,
                         std::optional<int> forced_errors) {
    side.validate();
    const auto p = derive_powers(cfg);
    const int devices = cfg.active_devices;
    if (forced_errors && (*forced_errors < 0 || *forced_errors > devices))
        throw DomainError("sample_sum_feedback: forced error count outside [0, active_devices]");
    const double power = p.per_device_power_factor;
    const double static_amp = std::sqrt(p.gamma_d * power);
    const double scatter_sd = std::sqrt(0.5 * p.gamma_s * power);
    const auto eng = stream.engine();
    const bool forced = forced_errors.has_value();
    const int m = forced ? *forced_errors : 0;

    for (std::size_t i = 0; i < out.size(); ++i) {
        const std::uint64_t sample = stream.first_sample + i;
        double re = 0.0;
        double im = 0.0;
        for (int k = 0; k < devices; ++k) {
            const auto d = feedback_device(eng, sample, static_cast<std::uint32_t>(k), scatter_sd,
                                           static_amp, side.bits, side.word_error_prob, forced,
                                           k < m);
            re += d.amplitude * std::cos(d.residual);
            im += d.amplitude * std::sin(d.residual);
        }
        out[i] = {re, im};
    }
}

void sample_snr_feedback(const ClusterConfig& cfg, const FeedbackSideInfo& side,
                         const rng::Stream& stream, std::span<double> out) {
    constexpr std::size_t kChunk = 1024;
    std::complex<double> buf[kChunk];
    for (std::size_t start = 0; start < out.size(); start += kChunk) {
        const std::size_t len = std::min(kChunk, out.size() - start);
        rng::Stream s = stream;
        s.first_sample += start;
        sample_sum_feedback(cfg, side, s, std::span(buf, len));
        for (std::size_t j = 0; j < len; ++j) out[start + j] = std::norm(buf[j]);
    }
}

void sample_feedback_residuals(const FeedbackSideInfo& side, const rng::Stream& stream,
                               std::span<double> out) {
    side.validate();
    const auto eng = stream.engine();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = feedback_device(eng, stream.first_sample + i, 0, 1.0, 0.0, side.bits,
                                 side.word_error_prob, false, false)
                     .residual;
    }
}

void sample_snr_selection(const ClusterConfig& cfg, const rng::Stream& stream,
                          std::span<double> out) {
    const auto p = derive_powers(cfg);
    const double static_amp = std::sqrt(p.gamma_d);
    const double scatter_sd = std::sqrt(0.5 * p.gamma_s);
    const auto eng = stream.engine();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const std::uint64_t sample = stream.first_sample + i;
        double best = 0.0;
        for (int k = 0; k < cfg.active_devices; ++k) {
            const auto w = rng::draw(eng, sample, static_cast<std::uint32_t>(k));
            const auto g = rng::normal_pair(w[0], w[1]);
            const double re = scatter_sd * g[0] + static_amp;
            const double im = scatter_sd * g[1];
            best = std::max(best, re * re + im * im);
        }
        out[i] = best;
    }
}

std::vector<double> sample_snr_ckm(const ClusterConfig& cfg, const CkmSideInfo& side,
                                   const rng::Stream& stream, std::size_t n) {
    std::vector<double> v(n);
    sample_snr_ckm(cfg, side, stream, v);
    return v;
}

std::vector<double> sample_snr_feedback(const ClusterConfig& cfg, const FeedbackSideInfo& side,
                                        const rng::Stream& stream, std::size_t n) {
    std::vector<double> v(n);
    sample_snr_feedback(cfg, side, stream, v);
    return v;
}

std::vector<double> sample_snr_selection(const ClusterConfig& cfg, const rng::Stream& stream,
                                         std::size_t n) {
    std::vector<double> v(n);
    sample_snr_selection(cfg, stream, v);
    return v;
}

}  // namespace coopuplink
