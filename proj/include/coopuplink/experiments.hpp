#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "coopuplink/errors.hpp"
#include "coopuplink/metrics.hpp"
#include "coopuplink/montecarlo.hpp"

// Parameter sweeps and the stock figures: config parsing, evaluation of
// analytic and simulated columns, CSV/SVG/JSON output.
namespace coopuplink::experiments {

/// A configuration value failed validation. `key()` names the offending key.
class ConfigError : public DomainError {
public:
    ConfigError(std::string key, const std::string& message)
        : DomainError(key + ": " + message), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

enum class Metric { Outage, Dor, Devices };

enum class SweepAxis {
    MeanSnrDb,
    DelayThresholdS,
    RiceFactorDb,
    SigmaEpsDeg,
    WordErrorProb,
    DeviceCount,
};

const char* metric_name(Metric m);
const char* axis_name(SweepAxis a);

/// One curve: a scenario and its parameters in library (linear) units.
struct CurveSpec {
    std::string name;
    mc::Scenario scenario = mc::Scenario::Ckm;
    ClusterConfig cluster{};
    mc::SideInfo side{};
};

struct ExperimentConfig {
    std::string name = "sweep";
    Metric metric = Metric::Outage;
    SweepAxis axis = SweepAxis::MeanSnrDb;
    std::vector<double> values;  ///< sweep points in boundary units (dB, s, deg, ...)
    std::vector<CurveSpec> curves;
    ServiceSpec service{};
    double spectral_efficiency = 1.0;  ///< outage threshold R_min / W
    double target_dor = 1e-4;          ///< devices metric
    std::uint64_t samples = 1'000'000;
    std::uint64_t seed = 1;
    bool analytic_only = false;
    std::string source;  ///< canonical config text this was parsed from
};

/// Parse INI-style text: flat key = value pairs plus one [sweep] section.
/// Full-line comments start with ';'. Throws ConfigError.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& file);

std::vector<std::string> figure_ids();
/// Config text of a stock figure; throws ConfigError for an unknown id.
std::string figure_config_text(const std::string& id);
ExperimentConfig figure_config(const std::string& id);

/// Apply the sweep axis at `value` to a curve and service.
void apply_axis(SweepAxis axis, double value, CurveSpec& curve, ServiceSpec& service);

/// Analytic value of the metric for one curve at one sweep point. NaN when
/// the scenario has no analytic form for the metric.
double analytic_value(const ExperimentConfig& cfg, const CurveSpec& curve,
                      const ServiceSpec& service);

struct RunControl {
    std::optional<std::uint64_t> samples;
    std::optional<std::uint64_t> seed;
    std::optional<bool> analytic_only;
    std::filesystem::path cache_dir;
    std::filesystem::path out_dir = ".";
    unsigned threads = 0;
};

/// Numeric table; NaN cells are written empty.
struct ResultTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::string csv() const;
    /// Column index by header name, or -1.
    int column(const std::string& name) const;
};

ResultTable evaluate(const ExperimentConfig& cfg, const RunControl& ctl = {});

std::string render_svg(const ExperimentConfig& cfg, const ResultTable& table);

struct Outputs {
    std::filesystem::path csv;
    std::filesystem::path svg;
    std::filesystem::path metadata;
};

/// Evaluate and write <out_dir>/<name>.csv, .svg and .json.
Outputs run_experiment(const ExperimentConfig& cfg, const RunControl& ctl = {});

}  // namespace coopuplink::experiments
