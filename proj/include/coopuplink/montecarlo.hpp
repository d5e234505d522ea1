#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "coopuplink/channel.hpp"
#include "coopuplink/metrics.hpp"

namespace coopuplink::mc {

enum class Scenario { Ckm, Feedback, Selection };

const char* scenario_name(Scenario s);

/// Side information for every scenario; each scenario reads only its part.
struct SideInfo {
    CkmSideInfo ckm{};
    FeedbackSideInfo feedback{};
};

struct RunOptions {
    /// Samples generated per work item. Results do not depend on it.
    std::size_t block_size = std::size_t{1} << 16;
    /// Worker threads; 0 picks std::thread::hardware_concurrency().
    unsigned threads = 0;
    /// Above this many samples the CDF is stored as a histogram.
    std::uint64_t sorted_cap = 100'000'000;
    /// Directory for cached runs; empty disables caching.
    std::filesystem::path cache_dir{};
};

/// 64-bit FNV-1a of the canonical description of (scenario, cfg, side),
/// as 16 lowercase hex digits.
std::string config_fingerprint(Scenario s, const ClusterConfig& cfg, const SideInfo& side);

/// Fill `out` with samples first..first+out.size()-1 of the scenario's stream.
void sample(Scenario s, const ClusterConfig& cfg, const SideInfo& side, std::uint64_t seed,
            std::uint64_t first, std::span<double> out);

struct QuantileEstimate {
    double value;
    bool low_confidence;  ///< p below 10 / count
};

/// Empirical SNR CDF F(g) = #(samples <= g) / count.
///
/// Exact mode keeps every sample sorted. Histogram mode (count above
/// RunOptions::sorted_cap) keeps the smallest ceil(1e-3 count) samples exactly
/// and bins the rest into kHistogramBins logarithmic bins.
class EmpiricalCdf {
public:
    static constexpr int kHistogramBins = 100'000;
    static constexpr double kLog10Lo = -30.0;
    static constexpr double kLog10Hi = 30.0;

    EmpiricalCdf() = default;
    /// Exact mode; `samples` need not be sorted.
    EmpiricalCdf(std::vector<double> samples, std::uint64_t seed, std::string fingerprint);
    /// Histogram mode.
    EmpiricalCdf(std::uint64_t count, std::vector<double> sorted_tail,
                 std::vector<std::uint64_t> bins, std::uint64_t underflow, std::uint64_t seed,
                 std::string fingerprint);

    double operator()(double gamma) const;
    /// Number of samples <= gamma (interpolated inside a histogram bin).
    double count_below(double gamma) const;
    QuantileEstimate quantile(double p) const;

    std::uint64_t count() const { return count_; }
    std::uint64_t seed() const { return seed_; }
    const std::string& fingerprint() const { return fingerprint_; }
    bool is_histogram() const { return histogram_; }
    /// All samples in exact mode, the exact lower tail in histogram mode.
    const std::vector<double>& sorted_samples() const { return sorted_; }
    /// Histogram mode only: samples below the first bin, and per-bin counts.
    std::uint64_t underflow() const { return cum_.empty() ? 0 : cum_.front(); }
    std::vector<std::uint64_t> histogram_bins() const;
    /// FNV-1a over the stored sample bits (and bins in histogram mode).
    std::uint64_t digest() const;

    SnrCdf as_snr_cdf() const;

private:
    double bin_edge(int i) const;

    std::vector<double> sorted_;
    std::uint64_t count_ = 0;
    std::uint64_t seed_ = 0;
    std::string fingerprint_;
    bool histogram_ = false;
    std::vector<std::uint64_t> cum_;  // cum_[i] = samples in underflow and bins < i
};

/// n i.i.d. samples of the scenario's SNR, generated block-parallel.
/// Bit-identical for any block_size and thread count. Throws DomainError if n == 0.
EmpiricalCdf run(Scenario s, const ClusterConfig& cfg, const SideInfo& side, std::uint64_t n,
                 std::uint64_t seed, const RunOptions& opts = {});

/// Binary cache I/O. load_cache returns false when the file is missing or its
/// header does not match (fingerprint, seed, n).
void save_cache(const std::filesystem::path& file, const EmpiricalCdf& cdf);
bool load_cache(const std::filesystem::path& file, const std::string& fingerprint,
                std::uint64_t seed, std::uint64_t n, EmpiricalCdf& out);
std::filesystem::path cache_path(const std::filesystem::path& dir, const std::string& fingerprint,
                                 std::uint64_t seed, std::uint64_t n);

/// Number of samples with SNR <= threshold, without storing the samples.
std::uint64_t count_at_or_below(Scenario s, const ClusterConfig& cfg, const SideInfo& side,
                                double threshold, std::uint64_t n, std::uint64_t seed,
                                const RunOptions& opts = {});

/// Exact (Clopper-Pearson) two-sided confidence interval for a binomial rate.
struct RateEstimate {
    double value;
    double lower;
    double upper;
    std::uint64_t hits;
    std::uint64_t trials;
};
RateEstimate binomial_rate(std::uint64_t hits, std::uint64_t trials, double confidence = 0.99);

/// Central interval [lo, hi] holding at least `confidence` of Binomial(trials, p).
struct HitInterval {
    std::uint64_t lo;
    std::uint64_t hi;
};
HitInterval binomial_hit_interval(std::uint64_t trials, double p, double confidence = 0.99);

/// Simulated delay outage rate with its 99% interval.
RateEstimate simulate_dor(Scenario s, const ClusterConfig& cfg, const SideInfo& side,
                          const ServiceSpec& svc, std::uint64_t n, std::uint64_t seed,
                          const RunOptions& opts = {});

struct DeviceSearch {
    int devices;      ///< smallest passing count; 0 when infeasible
    bool feasible;
    bool uncertain;   ///< target inside the 99% interval at the decision boundary
    int evaluations;  ///< simulated DOR estimates made
};

inline constexpr int kMaxDevices = 4096;

/// Smallest active count whose simulated DOR is <= target_dor, by exponential
/// bracketing then integer bisection. All counts share one seed so estimates at
/// neighbouring counts use common random numbers. `upper_hint`, when positive
/// and passing, replaces the exponential bracket.
DeviceSearch min_devices(Scenario s, const ClusterConfig& cfg_template, const SideInfo& side,
                         const ServiceSpec& svc, double target_dor, std::uint64_t n,
                         std::uint64_t seed, const RunOptions& opts = {}, int upper_hint = 0);

}  // namespace coopuplink::mc
