#include "coopuplink/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <exception>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

#include <boost/math/distributions/binomial.hpp>

#include "coopuplink/errors.hpp"

namespace coopuplink::mc {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;
constexpr char kMagic[8] = {'C', 'U', 'E', 'C', 'D', 'F', '0', '1'};

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= kFnvPrime;
    }
    return h;
}

std::uint64_t fnv1a_u64(std::uint64_t h, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xffu;
        h *= kFnvPrime;
    }
    return h;
}

std::uint64_t stream_id(Scenario s) {
    switch (s) {
        case Scenario::Ckm: return 1;
        case Scenario::Feedback: return 2;
        case Scenario::Selection: return 3;
    }
    return 0;
}

unsigned resolve_threads(unsigned requested, std::uint64_t blocks) {
    unsigned t = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
    return static_cast<unsigned>(std::min<std::uint64_t>(t, blocks));
}

// Calls fn(block, worker) for every block; blocks are claimed dynamically.
template <class Fn>
void for_each_block(std::uint64_t blocks, unsigned threads, Fn&& fn) {
    if (threads <= 1) {
        for (std::uint64_t b = 0; b < blocks; ++b) fn(b, 0u);
        return;
    }
    std::atomic<std::uint64_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::uint64_t b = next++; b < blocks; b = next++) fn(b, w);
            } catch (...) {
                std::lock_guard lock(failure_mu);
                if (!failure) failure = std::current_exception();
                next = blocks;
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

void validate_inputs(Scenario s, const ClusterConfig& cfg, const SideInfo& side) {
    cfg.validate();
    if (s == Scenario::Ckm) side.ckm.validate();
    if (s == Scenario::Feedback) side.feedback.validate();
}

void write_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

bool read_u64(std::istream& is, std::uint64_t& v) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) return false;
    v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{b[i]} << (8 * i);
    return true;
}

}  // namespace

const char* scenario_name(Scenario s) {
    switch (s) {
        case Scenario::Ckm: return "ckm";
        case Scenario::Feedback: return "feedback";
        case Scenario::Selection: return "selection";
    }
    return "unknown";
}

std::string config_fingerprint(Scenario s, const ClusterConfig& cfg, const SideInfo& side) {
    char buf[512];
    int len = std::snprintf(buf, sizeof buf,
                            "scenario=%s;mean_snr=%.17g;rice_factor=%.17g;active=%d;total=%d;"
                            "scaling=%d",
                            scenario_name(s), cfg.mean_snr, cfg.rice_factor, cfg.active_devices,
                            cfg.total_devices, static_cast<int>(cfg.power_scaling));
    std::string canon(buf, static_cast<std::size_t>(len));
    if (s == Scenario::Ckm) {
        len = std::snprintf(buf, sizeof buf, ";sigma_eps=%.17g", side.ckm.sigma_eps);
        canon.append(buf, static_cast<std::size_t>(len));
    } else if (s == Scenario::Feedback) {
        len = std::snprintf(buf, sizeof buf, ";bits=%d;word_error_prob=%.17g", side.feedback.bits,
                            side.feedback.word_error_prob);
        canon.append(buf, static_cast<std::size_t>(len));
    }
    const std::uint64_t h = fnv1a(kFnvOffset, canon.data(), canon.size());
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void sample(Scenario s, const ClusterConfig& cfg, const SideInfo& side, std::uint64_t seed,
            std::uint64_t first, std::span<double> out) {
    const rng::Stream stream{seed, stream_id(s), first};
    switch (s) {
        case Scenario::Ckm: sample_snr_ckm(cfg, side.ckm, stream, out); break;
        case Scenario::Feedback: sample_snr_feedback(cfg, side.feedback, stream, out); break;
        case Scenario::Selection: sample_snr_selection(cfg, stream, out); break;
    }
}

// ---------------------------------------------------------------- EmpiricalCdf

EmpiricalCdf::EmpiricalCdf(std::vector<double> samples, std::uint64_t seed,
                           std::string fingerprint)
    : sorted_(std::move(samples)),
      count_(sorted_.size()),
      seed_(seed),
      fingerprint_(std::move(fingerprint)) {
    std::sort(sorted_.begin(), sorted_.end());
}

EmpiricalCdf::EmpiricalCdf(std::uint64_t count, std::vector<double> sorted_tail,
                           std::vector<std::uint64_t> bins, std::uint64_t underflow,
                           std::uint64_t seed, std::string fingerprint)
    : sorted_(std::move(sorted_tail)),
      count_(count),
      seed_(seed),
      fingerprint_(std::move(fingerprint)),
      histogram_(true) {
    if (bins.size() != static_cast<std::size_t>(kHistogramBins))
        throw DomainError("EmpiricalCdf: wrong histogram size");
    cum_.resize(bins.size() + 1);
    cum_[0] = underflow;
    for (std::size_t i = 0; i < bins.size(); ++i) cum_[i + 1] = cum_[i] + bins[i];
    if (cum_.back() != count_) throw DomainError("EmpiricalCdf: histogram total != count");
    std::sort(sorted_.begin(), sorted_.end());
}

double EmpiricalCdf::bin_edge(int i) const {
    return std::pow(10.0, kLog10Lo + (kLog10Hi - kLog10Lo) * i / kHistogramBins);
}

double EmpiricalCdf::count_below(double gamma) const {
    if (std::isnan(gamma)) throw DomainError("EmpiricalCdf: gamma is NaN");
    const auto exact = static_cast<double>(
        std::upper_bound(sorted_.begin(), sorted_.end(), gamma) - sorted_.begin());
    if (!histogram_ || sorted_.empty() || gamma < sorted_.back()) return exact;
    if (!(gamma > 0.0)) return exact;
    const double pos = (std::log10(gamma) - kLog10Lo) / (kLog10Hi - kLog10Lo) * kHistogramBins;
    if (pos < 0.0) return exact;
    if (pos >= kHistogramBins) return static_cast<double>(count_);
    const auto i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    const double binned = static_cast<double>(cum_[i]) +
                          frac * static_cast<double>(cum_[i + 1] - cum_[i]);
    return std::max(binned, exact);
}

double EmpiricalCdf::operator()(double gamma) const {
    if (count_ == 0) throw DomainError("EmpiricalCdf: empty");
    return count_below(gamma) / static_cast<double>(count_);
}

QuantileEstimate EmpiricalCdf::quantile(double p) const {
    if (!(p > 0.0 && p <= 1.0)) throw DomainError("EmpiricalCdf::quantile: p must be in (0, 1]");
    if (count_ == 0) throw DomainError("EmpiricalCdf: empty");
    const double n = static_cast<double>(count_);
    const bool low = p < 10.0 / n;
    const auto rank = static_cast<std::uint64_t>(std::max(1.0, std::ceil(p * n)));
    if (rank <= sorted_.size()) return {sorted_[rank - 1], low};
    const auto it = std::lower_bound(cum_.begin() + 1, cum_.end(), rank);
    const int bin = static_cast<int>(it - cum_.begin());
    return {bin_edge(bin), low};
}

std::uint64_t EmpiricalCdf::digest() const {
    std::uint64_t h = kFnvOffset;
    h = fnv1a_u64(h, count_);
    for (double v : sorted_) h = fnv1a_u64(h, std::bit_cast<std::uint64_t>(v));
    for (std::uint64_t c : cum_) h = fnv1a_u64(h, c);
    return h;
}

std::vector<std::uint64_t> EmpiricalCdf::histogram_bins() const {
    std::vector<std::uint64_t> bins;
    if (!histogram_) return bins;
    bins.resize(cum_.size() - 1);
    for (std::size_t i = 0; i + 1 < cum_.size(); ++i) bins[i] = cum_[i + 1] - cum_[i];
    return bins;
}

SnrCdf EmpiricalCdf::as_snr_cdf() const {
    auto self = std::make_shared<const EmpiricalCdf>(*this);
    const double scale = quantile(0.5).value;
    return SnrCdf([self](double g) { return (*self)(g); }, scale > 0.0 ? scale : 1.0,
                  "empirical", {{"fingerprint", fingerprint_}, {"seed", std::to_string(seed_)}});
}

// ---------------------------------------------------------------- runs

std::filesystem::path cache_path(const std::filesystem::path& dir, const std::string& fingerprint,
                                 std::uint64_t seed, std::uint64_t n) {
    return dir / (fingerprint + "_s" + std::to_string(seed) + "_n" + std::to_string(n) + ".ecdf");
}

void save_cache(const std::filesystem::path& file, const EmpiricalCdf& cdf) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    const auto tmp = std::filesystem::path(file.string() + ".tmp");
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw DomainError("cannot write cache file " + tmp.string());
        os.write(kMagic, sizeof kMagic);
        write_u64(os, cdf.fingerprint().size());
        os.write(cdf.fingerprint().data(), static_cast<std::streamsize>(cdf.fingerprint().size()));
        write_u64(os, cdf.seed());
        write_u64(os, cdf.count());
        write_u64(os, cdf.is_histogram() ? 1 : 0);
        const auto& s = cdf.sorted_samples();
        write_u64(os, s.size());
        for (double v : s) write_u64(os, std::bit_cast<std::uint64_t>(v));
        if (cdf.is_histogram()) {
            write_u64(os, cdf.underflow());
            for (std::uint64_t c : cdf.histogram_bins()) write_u64(os, c);
        }
        if (!os) throw DomainError("short write to cache file " + tmp.string());
    }
    std::filesystem::rename(tmp, file);
}

bool load_cache(const std::filesystem::path& file, const std::string& fingerprint,
                std::uint64_t seed, std::uint64_t n, EmpiricalCdf& out) {
    std::ifstream is(file, std::ios::binary);
    if (!is) return false;
    char magic[sizeof kMagic];
    if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        return false;
    std::uint64_t len = 0;
    if (!read_u64(is, len) || len != fingerprint.size()) return false;
    std::string fp(len, '\0');
    if (!is.read(fp.data(), static_cast<std::streamsize>(len)) || fp != fingerprint) return false;
    std::uint64_t file_seed = 0, count = 0, mode = 0, stored = 0;
    if (!read_u64(is, file_seed) || file_seed != seed) return false;
    if (!read_u64(is, count) || count != n) return false;
    if (!read_u64(is, mode) || mode > 1) return false;
    if (!read_u64(is, stored) || stored > count || (mode == 0 && stored != count)) return false;
    std::vector<double> samples(stored);
    for (auto& v : samples) {
        std::uint64_t bits = 0;
        if (!read_u64(is, bits)) return false;
        v = std::bit_cast<double>(bits);
    }
    if (!std::is_sorted(samples.begin(), samples.end())) return false;
    if (mode == 0) {
        out = EmpiricalCdf(std::move(samples), seed, fingerprint);
        return true;
    }
    std::uint64_t underflow = 0, total = 0;
    if (!read_u64(is, underflow)) return false;
    std::vector<std::uint64_t> bins(EmpiricalCdf::kHistogramBins);
    for (auto& c : bins) {
        if (!read_u64(is, c)) return false;
        total += c;
    }
    if (total + underflow != count) return false;
    out = EmpiricalCdf(count, std::move(samples), std::move(bins), underflow, seed, fingerprint);
    return true;
}

EmpiricalCdf run(Scenario s, const ClusterConfig& cfg, const SideInfo& side, std::uint64_t n,
                 std::uint64_t seed, const RunOptions& opts) {
    if (n == 0) throw DomainError("mc::run: n must be >= 1");
    if (opts.block_size == 0) throw DomainError("mc::run: block_size must be >= 1");
    validate_inputs(s, cfg, side);
    const std::string fp = config_fingerprint(s, cfg, side);
    const std::uint64_t bs = opts.block_size;
    const std::uint64_t blocks = (n + bs - 1) / bs;
    const unsigned threads = resolve_threads(opts.threads, blocks);
    auto block_len = [&](std::uint64_t b) { return std::min(bs, n - b * bs); };

    std::filesystem::path file;
    if (!opts.cache_dir.empty()) {
        file = cache_path(opts.cache_dir, fp, seed, n);
        EmpiricalCdf cached;
        if (load_cache(file, fp, seed, n, cached)) return cached;
    }
    if (n <= opts.sorted_cap) {
        std::vector<double> all(n);
        for_each_block(blocks, threads, [&](std::uint64_t b, unsigned) {
            sample(s, cfg, side, seed, b * bs, std::span(all.data() + b * bs, block_len(b)));
        });
        EmpiricalCdf cdf(std::move(all), seed, fp);
        if (!file.empty()) save_cache(file, cdf);
        return cdf;
    }

    // Histogram mode: per-worker bins and a bounded exact lower tail.
    const auto keep = static_cast<std::size_t>(std::ceil(1e-3 * static_cast<double>(n)));
    const double per_decade = EmpiricalCdf::kHistogramBins /
                              (EmpiricalCdf::kLog10Hi - EmpiricalCdf::kLog10Lo);
    struct Worker {
        std::vector<std::uint64_t> bins;
        std::uint64_t underflow = 0;
        std::vector<double> tail;
        std::vector<double> buf;
    };
    std::vector<Worker> workers(threads);
    for (auto& w : workers) w.bins.assign(EmpiricalCdf::kHistogramBins, 0);
    auto trim = [keep](std::vector<double>& t) {
        if (t.size() <= keep) return;
        std::nth_element(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(keep - 1), t.end());
        t.resize(keep);
    };
    for_each_block(blocks, threads, [&](std::uint64_t b, unsigned wi) {
        Worker& w = workers[wi];
        w.buf.resize(block_len(b));
        sample(s, cfg, side, seed, b * bs, w.buf);
        for (double v : w.buf) {
            const double pos = v > 0.0 ? (std::log10(v) - EmpiricalCdf::kLog10Lo) * per_decade
                                       : -1.0;
            if (pos < 0.0) {
                ++w.underflow;
            } else {
                const auto i = std::min<std::size_t>(static_cast<std::size_t>(pos),
                                                     EmpiricalCdf::kHistogramBins - 1);
                ++w.bins[i];
            }
        }
        w.tail.insert(w.tail.end(), w.buf.begin(), w.buf.end());
        if (w.tail.size() > 2 * keep) trim(w.tail);
    });
    std::vector<std::uint64_t> bins(EmpiricalCdf::kHistogramBins, 0);
    std::uint64_t underflow = 0;
    std::vector<double> tail;
    for (auto& w : workers) {
        for (std::size_t i = 0; i < bins.size(); ++i) bins[i] += w.bins[i];
        underflow += w.underflow;
        trim(w.tail);
        tail.insert(tail.end(), w.tail.begin(), w.tail.end());
    }
    trim(tail);
    EmpiricalCdf cdf(n, std::move(tail), std::move(bins), underflow, seed, fp);
    if (!file.empty()) save_cache(file, cdf);
    return cdf;
}

std::uint64_t count_at_or_below(Scenario s, const ClusterConfig& cfg, const SideInfo& side,
                                double threshold, std::uint64_t n, std::uint64_t seed,
                                const RunOptions& opts) {
    if (n == 0) throw DomainError("mc::count_at_or_below: n must be >= 1");
    validate_inputs(s, cfg, side);
    const std::uint64_t bs = opts.block_size ? opts.block_size : 1;
    const std::uint64_t blocks = (n + bs - 1) / bs;
    const unsigned threads = resolve_threads(opts.threads, blocks);
    std::vector<std::uint64_t> hits(threads, 0);
    std::vector<std::vector<double>> bufs(threads);
    for_each_block(blocks, threads, [&](std::uint64_t b, unsigned w) {
        auto& buf = bufs[w];
        buf.resize(std::min(bs, n - b * bs));
        sample(s, cfg, side, seed, b * bs, buf);
        for (double v : buf) hits[w] += v <= threshold;
    });
    std::uint64_t total = 0;
    for (auto h : hits) total += h;
    return total;
}

RateEstimate binomial_rate(std::uint64_t hits, std::uint64_t trials, double confidence) {
    if (trials == 0 || hits > trials) throw DomainError("binomial_rate: need 0 <= hits <= trials");
    if (!(confidence > 0.0 && confidence < 1.0))
        throw DomainError("binomial_rate: confidence must be in (0, 1)");
    using boost::math::binomial_distribution;
    const double alpha = 0.5 * (1.0 - confidence);
    const auto n = static_cast<double>(trials);
    const auto k = static_cast<double>(hits);
    return {k / n, binomial_distribution<>::find_lower_bound_on_p(n, k, alpha),
            binomial_distribution<>::find_upper_bound_on_p(n, k, alpha), hits, trials};
}

HitInterval binomial_hit_interval(std::uint64_t trials, double p, double confidence) {
    if (trials == 0) throw DomainError("binomial_hit_interval: trials must be >= 1");
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("binomial_hit_interval: p must be in [0, 1]");
    if (!(confidence > 0.0 && confidence < 1.0))
        throw DomainError("binomial_hit_interval: confidence must be in (0, 1)");
    if (p == 0.0) return {0, 0};
    if (p == 1.0) return {trials, trials};
    const double alpha = 0.5 * (1.0 - confidence);
    boost::math::binomial_distribution<> dist(static_cast<double>(trials), p);
    const double lo = boost::math::quantile(dist, alpha);
    const double hi = boost::math::quantile(boost::math::complement(dist, alpha));
    return {static_cast<std::uint64_t>(lo), static_cast<std::uint64_t>(hi)};
}

RateEstimate simulate_dor(Scenario s, const ClusterConfig& cfg, const SideInfo& side,
                          const ServiceSpec& svc, std::uint64_t n, std::uint64_t seed,
                          const RunOptions& opts) {
    svc.validate();
    const auto th = dor_threshold(svc.data_bits, svc.bandwidth, svc.delay_threshold);
    const std::uint64_t hits =
        th.saturated ? n : count_at_or_below(s, cfg, side, th.value, n, seed, opts);
    return binomial_rate(hits, n);
}

DeviceSearch min_devices(Scenario s, const ClusterConfig& cfg_template, const SideInfo& side,
                         const ServiceSpec& svc, double target_dor, std::uint64_t n,
                         std::uint64_t seed, const RunOptions& opts, int upper_hint) {
    if (!(target_dor > 0.0 && target_dor <= 1.0))
        throw DomainError("min_devices: target_dor must be in (0, 1]");
    if (n == 0) throw DomainError("min_devices: n must be >= 1");
    if (target_dor >= 1.0) return {1, true, false, 0};

    std::map<int, RateEstimate> memo;
    auto eval = [&](int d) -> const RateEstimate& {
        auto it = memo.find(d);
        if (it == memo.end())
            it = memo.emplace(d, simulate_dor(s, cfg_template.with_active(d), side, svc, n, seed,
                                              opts))
                     .first;
        return it->second;
    };
    auto pass = [&](int d) { return eval(d).value <= target_dor; };
    auto ambiguous = [&](int d) {
        const auto it = memo.find(d);
        return it != memo.end() && it->second.lower <= target_dor &&
               target_dor <= it->second.upper;
    };

    int lo = 0;  // largest count known to fail (0: none)
    int hi = 0;  // smallest count known to pass
    if (upper_hint > 0 && upper_hint <= kMaxDevices && pass(upper_hint)) {
        hi = upper_hint;
    } else {
        for (int d = 1;; d = std::min(2 * d, kMaxDevices)) {
            if (d > lo && pass(d)) {
                hi = d;
                break;
            }
            lo = std::max(lo, d);
            if (d == kMaxDevices)
                return {0, false, ambiguous(kMaxDevices), static_cast<int>(memo.size())};
        }
    }
    while (hi - lo > 1) {
        const int mid = lo + (hi - lo) / 2;
        if (pass(mid))
            hi = mid;
        else
            lo = mid;
    }
    const bool uncertain = ambiguous(hi) || (lo > 0 && ambiguous(lo));
    return {hi, true, uncertain, static_cast<int>(memo.size())};
}

}  // namespace coopuplink::mc
