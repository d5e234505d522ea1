#include "coopuplink/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>
#include <utility>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "coopuplink/analytic_ckm.hpp"
#include "coopuplink/analytic_feedback.hpp"
#include "coopuplink/baseline.hpp"

namespace coopuplink::experiments {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kDeg = std::numbers::pi / 180.0;

using KeyValues = std::vector<std::pair<std::string, std::string>>;

const std::set<std::string> kRootKeys = {
    "name",          "metric",         "scenario",       "curves",
    "samples",       "seed",           "analytic_only",  "mean_snr_db",
    "rice_factor_db", "active_devices", "total_devices",  "power_scaling",
    "sigma_eps_deg", "bits",           "word_error_prob", "data_bits",
    "bandwidth_hz",  "delay_threshold_s", "spectral_efficiency", "target_dor",
};

// Keys a single curve may override.
const std::set<std::string> kCurveKeys = {
    "name",          "mean_snr_db", "rice_factor_db", "active_devices", "total_devices",
    "power_scaling", "sigma_eps_deg", "bits",         "word_error_prob",
};

const std::set<std::string> kSweepKeys = {"axis", "start", "stop", "step",
                                          "points", "spacing", "values"};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

double parse_double(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    if (t.empty()) throw ConfigError(key, "expected a number, got an empty value");
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size() || std::isnan(v))
        throw ConfigError(key, "expected a number, got '" + t + "'");
    return v;
}

long long parse_integer(const std::string& key, const std::string& text) {
    const double v = parse_double(key, text);
    if (!std::isfinite(v) || v != std::floor(v) || std::abs(v) > 9.0e15)
        throw ConfigError(key, "expected an integer, got '" + trim(text) + "'");
    return static_cast<long long>(v);
}

bool parse_bool(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
    if (t == "false" || t == "0" || t == "no" || t == "off") return false;
    throw ConfigError(key, "expected true or false, got '" + t + "'");
}

mc::Scenario parse_scenario(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    if (t == "ckm") return mc::Scenario::Ckm;
    if (t == "feedback") return mc::Scenario::Feedback;
    if (t == "selection") return mc::Scenario::Selection;
    throw ConfigError(key, "unknown scenario '" + t + "' (expected ckm, feedback or selection)");
}

Metric parse_metric(const std::string& text) {
    const std::string t = trim(text);
    if (t == "outage") return Metric::Outage;
    if (t == "dor") return Metric::Dor;
    if (t == "devices") return Metric::Devices;
    throw ConfigError("metric", "unknown metric '" + t + "' (expected outage, dor or devices)");
}

SweepAxis parse_axis(const std::string& text) {
    const std::string t = trim(text);
    for (auto a : {SweepAxis::MeanSnrDb, SweepAxis::DelayThresholdS, SweepAxis::RiceFactorDb,
                   SweepAxis::SigmaEpsDeg, SweepAxis::WordErrorProb, SweepAxis::DeviceCount})
        if (t == axis_name(a)) return a;
    throw ConfigError("sweep.axis",
                      "unknown axis '" + t +
                          "' (expected mean_snr_db, delay_threshold_s, rice_factor_db, "
                          "sigma_eps_deg, word_error_prob or device_count)");
}

std::string lookup(const KeyValues& kv, const std::string& key, const std::string& fallback) {
    for (auto it = kv.rbegin(); it != kv.rend(); ++it)
        if (it->first == key) return it->second;
    return fallback;
}

bool has(const KeyValues& kv, const std::string& key) {
    return std::any_of(kv.begin(), kv.end(), [&](const auto& p) { return p.first == key; });
}

std::string sanitize(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '_')
            out += c;
        else if (c == '-')
            out += 'm';
        else if (c == '.')
            out += 'p';
        else if (c == '+')
            continue;
        else
            out += '_';
    }
    return out;
}

// Validate a value as it would be set by axis or key `key`.
void check_parameter(const std::string& key, double v) {
    if (key == "mean_snr_db" && !std::isfinite(v)) throw ConfigError(key, "must be finite");
    if (key == "rice_factor_db" && !(v < std::numeric_limits<double>::infinity()))
        throw ConfigError(key, "must be < +inf (use -inf for Rayleigh)");
    if (key == "sigma_eps_deg" && !(v >= 0.0 && std::isfinite(v)))
        throw ConfigError(key, "must be finite and >= 0");
    if (key == "word_error_prob" && !(v >= 0.0 && v <= 1.0))
        throw ConfigError(key, "must be in [0, 1]");
    if (key == "delay_threshold_s" && !(v > 0.0 && std::isfinite(v)))
        throw ConfigError(key, "must be finite and > 0");
    if ((key == "active_devices" || key == "device_count") &&
        !(v >= 1.0 && v <= mc::kMaxDevices && v == std::floor(v)))
        throw ConfigError(key, "must be an integer in [1, 4096]");
    if (key == "bits" && !(v >= 1.0 && v <= 30.0 && v == std::floor(v)))
        throw ConfigError(key, "must be an integer in [1, 30]");
}

CurveSpec build_curve(const std::string& label, mc::Scenario scenario, const KeyValues& base,
                      const KeyValues& overrides) {
    KeyValues kv = base;
    kv.insert(kv.end(), overrides.begin(), overrides.end());
    auto num = [&](const std::string& key, const std::string& def) {
        const double v = parse_double(key, lookup(kv, key, def));
        check_parameter(key, v);
        return v;
    };
    CurveSpec c;
    c.scenario = scenario;
    c.cluster.mean_snr = db_to_linear(num("mean_snr_db", "-15"));
    c.cluster.rice_factor = db_to_linear(num("rice_factor_db", "0"));
    const double active = num("active_devices", "20");
    c.cluster.active_devices = static_cast<int>(active);
    const double total =
        parse_double("total_devices", lookup(kv, "total_devices", std::to_string(c.cluster.active_devices)));
    if (!(total >= active && total == std::floor(total) && total <= 1e9))
        throw ConfigError("total_devices", "must be an integer >= active_devices");
    c.cluster.total_devices = static_cast<int>(total);
    const std::string scaling = trim(lookup(kv, "power_scaling", "constant_total"));
    if (scaling == "constant_total")
        c.cluster.power_scaling = PowerScaling::ConstantTotal;
    else if (scaling == "constant_per_device")
        c.cluster.power_scaling = PowerScaling::ConstantPerDevice;
    else
        throw ConfigError("power_scaling",
                          "expected constant_total or constant_per_device, got '" + scaling + "'");
    c.side.ckm.sigma_eps = num("sigma_eps_deg", "20") * kDeg;
    c.side.feedback.bits = static_cast<int>(num("bits", "2"));
    c.side.feedback.word_error_prob = num("word_error_prob", "0.05");

    if (has(overrides, "name")) {
        c.name = sanitize(lookup(overrides, "name", ""));
        if (c.name.empty()) throw ConfigError(label, "curve name is empty");
    } else {
        c.name = mc::scenario_name(scenario);
        for (const auto& [k, v] : overrides) c.name += "_" + k + "_" + sanitize(trim(v));
    }
    return c;
}

std::vector<double> sweep_values(const std::map<std::string, std::string>& sweep, SweepAxis axis,
                                 Metric metric) {
    std::vector<double> values;
    auto get = [&](const std::string& k) -> std::optional<std::string> {
        auto it = sweep.find(k);
        if (it == sweep.end()) return std::nullopt;
        return it->second;
    };
    if (auto list = get("values")) {
        for (const auto& item : split(*list, ','))
            values.push_back(parse_double("sweep.values", item));
        if (get("start") || get("stop") || get("step") || get("points"))
            throw ConfigError("sweep.values", "cannot be combined with start/stop/step/points");
    } else {
        double start, stop;
        if (sweep.count("start") || sweep.count("stop")) {
            if (!get("start")) throw ConfigError("sweep.start", "missing");
            if (!get("stop")) throw ConfigError("sweep.stop", "missing");
            start = parse_double("sweep.start", *get("start"));
            stop = parse_double("sweep.stop", *get("stop"));
        } else if (axis == SweepAxis::MeanSnrDb) {
            start = -30.0;
            stop = 0.0;
        } else if (axis == SweepAxis::DelayThresholdS) {
            start = 1e-4;
            stop = 0.1;
        } else {
            throw ConfigError("sweep.start", "required for axis " + std::string(axis_name(axis)));
        }
        if (!std::isfinite(start) || !std::isfinite(stop))
            throw ConfigError("sweep.start", "start and stop must be finite");
        if (!(start <= stop)) throw ConfigError("sweep.stop", "must be >= start");
        const std::string spacing = trim(get("spacing").value_or(
            axis == SweepAxis::DelayThresholdS && !get("step") ? "log" : "linear"));
        if (spacing != "linear" && spacing != "log")
            throw ConfigError("sweep.spacing", "expected linear or log, got '" + spacing + "'");
        if (get("step") && get("points"))
            throw ConfigError("sweep.step", "give either step or points, not both");
        if (spacing == "log") {
            if (get("step")) throw ConfigError("sweep.step", "not allowed with log spacing");
            if (!(start > 0.0)) throw ConfigError("sweep.start", "must be > 0 for log spacing");
        }
        long long points;
        if (get("points")) {
            points = parse_integer("sweep.points", *get("points"));
            if (points < 1 || points > 100000)
                throw ConfigError("sweep.points", "must be in [1, 100000]");
            if (points == 1 && start != stop)
                throw ConfigError("sweep.points", "must be >= 2 when start != stop");
        } else if (spacing == "log") {
            points = 31;
        } else {
            const double step =
                get("step") ? parse_double("sweep.step", *get("step"))
                            : (axis == SweepAxis::MeanSnrDb ? 1.0
                               : axis == SweepAxis::DeviceCount ? 1.0
                                                                : kNaN);
            if (std::isnan(step)) throw ConfigError("sweep.step", "required for linear spacing");
            if (!(step > 0.0) || !std::isfinite(step)) throw ConfigError("sweep.step", "must be > 0");
            const double count = std::floor((stop - start) / step + 1e-9) + 1.0;
            if (count > 100000) throw ConfigError("sweep.step", "more than 100000 sweep points");
            for (long long i = 0; i < static_cast<long long>(count); ++i)
                values.push_back(start + static_cast<double>(i) * step);
            points = 0;
        }
        for (long long i = 0; i < points; ++i) {
            const double f = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
            values.push_back(spacing == "log"
                                 ? std::exp(std::log(start) + f * (std::log(stop) - std::log(start)))
                                 : start + f * (stop - start));
        }
    }
    if (values.empty()) throw ConfigError("sweep", "no sweep points");
    const std::string key = axis_name(axis);
    for (double v : values) check_parameter(key, v);
    if (metric == Metric::Devices && axis == SweepAxis::DeviceCount)
        throw ConfigError("sweep.axis", "device_count cannot be swept for the devices metric");
    return values;
}

std::string format_number(double v) {
    if (std::isnan(v)) return "";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

const char* metric_name(Metric m) {
    switch (m) {
        case Metric::Outage: return "outage";
        case Metric::Dor: return "dor";
        case Metric::Devices: return "devices";
    }
    return "unknown";
}

const char* axis_name(SweepAxis a) {
    switch (a) {
        case SweepAxis::MeanSnrDb: return "mean_snr_db";
        case SweepAxis::DelayThresholdS: return "delay_threshold_s";
        case SweepAxis::RiceFactorDb: return "rice_factor_db";
        case SweepAxis::SigmaEpsDeg: return "sigma_eps_deg";
        case SweepAxis::WordErrorProb: return "word_error_prob";
        case SweepAxis::DeviceCount: return "device_count";
    }
    return "unknown";
}

ExperimentConfig parse_config(const std::string& text) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        std::istringstream is(text);
        pt::ini_parser::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("syntax", e.message() + " at line " + std::to_string(e.line()));
    }

    KeyValues root;
    std::map<std::string, std::string> sweep;
    bool have_sweep = false;
    for (const auto& [key, node] : tree) {
        if (!node.empty()) {
            if (key != "sweep") throw ConfigError(key, "unknown section (only [sweep] is allowed)");
            have_sweep = true;
            for (const auto& [k, v] : node) {
                if (!v.empty()) throw ConfigError("sweep." + k, "nested sections are not allowed");
                if (!kSweepKeys.count(k)) throw ConfigError("sweep." + k, "unknown key");
                sweep[k] = v.data();
            }
            continue;
        }
        if (key == "sweep") {
            have_sweep = true;
            continue;
        }
        if (!kRootKeys.count(key)) throw ConfigError(key, "unknown key");
        root.emplace_back(key, node.data());
    }

    ExperimentConfig cfg;
    cfg.source = text;
    cfg.name = sanitize(trim(lookup(root, "name", "sweep")));
    if (cfg.name.empty()) throw ConfigError("name", "must not be empty");
    cfg.metric = parse_metric(lookup(root, "metric", "outage"));

    if (!have_sweep) sweep.clear();
    cfg.axis = parse_axis(sweep.count("axis") ? sweep.at("axis")
                          : cfg.metric == Metric::Outage ? "mean_snr_db"
                                                         : "delay_threshold_s");
    cfg.values = sweep_values(sweep, cfg.axis, cfg.metric);

    cfg.service.data_bits = parse_double("data_bits", lookup(root, "data_bits", "100"));
    if (!(cfg.service.data_bits >= 0.0) || !std::isfinite(cfg.service.data_bits))
        throw ConfigError("data_bits", "must be finite and >= 0");
    cfg.service.bandwidth = parse_double("bandwidth_hz", lookup(root, "bandwidth_hz", "200000"));
    if (!(cfg.service.bandwidth > 0.0) || !std::isfinite(cfg.service.bandwidth))
        throw ConfigError("bandwidth_hz", "must be finite and > 0");
    cfg.service.delay_threshold =
        parse_double("delay_threshold_s", lookup(root, "delay_threshold_s", "0.01"));
    check_parameter("delay_threshold_s", cfg.service.delay_threshold);
    cfg.spectral_efficiency =
        parse_double("spectral_efficiency", lookup(root, "spectral_efficiency", "1"));
    if (!(cfg.spectral_efficiency >= 0.0) || !std::isfinite(cfg.spectral_efficiency))
        throw ConfigError("spectral_efficiency", "must be finite and >= 0");
    cfg.service.min_rate = cfg.spectral_efficiency * cfg.service.bandwidth;
    cfg.target_dor = parse_double("target_dor", lookup(root, "target_dor", "1e-4"));
    if (!(cfg.target_dor > 0.0 && cfg.target_dor < 0.5))
        throw ConfigError("target_dor", "must be in (0, 0.5)");

    const long long samples = parse_integer(
        "samples", lookup(root, "samples", cfg.metric == Metric::Dor ? "10000000" : "1000000"));
    if (samples < 1) throw ConfigError("samples", "must be >= 1");
    cfg.samples = static_cast<std::uint64_t>(samples);
    const long long seed = parse_integer("seed", lookup(root, "seed", "1"));
    if (seed < 0) throw ConfigError("seed", "must be >= 0");
    cfg.seed = static_cast<std::uint64_t>(seed);
    cfg.analytic_only = parse_bool("analytic_only", lookup(root, "analytic_only", "false"));

    // Fixed parameters shared by every curve.
    KeyValues base;
    for (const auto& kv : root)
        if (kCurveKeys.count(kv.first) && kv.first != "name") base.push_back(kv);
    const std::string swept = cfg.axis == SweepAxis::DeviceCount ? "active_devices"
                                                                  : axis_name(cfg.axis);

    const auto default_scenario =
        parse_scenario("scenario", lookup(root, "scenario", "ckm"));
    const std::string curves_text = trim(lookup(root, "curves", ""));
    std::set<std::string> names;
    if (curves_text.empty()) {
        cfg.curves.push_back(build_curve("scenario", default_scenario, base, {}));
    } else {
        int index = 0;
        for (const auto& item : split(curves_text, '|')) {
            const std::string label = "curves[" + std::to_string(index++) + "]";
            if (item.empty()) throw ConfigError(label, "empty curve");
            KeyValues overrides;
            std::string scen = item;
            const auto open = item.find('(');
            if (open != std::string::npos) {
                if (item.back() != ')') throw ConfigError(label, "missing ')' in '" + item + "'");
                scen = trim(item.substr(0, open));
                const std::string inner = item.substr(open + 1, item.size() - open - 2);
                if (!trim(inner).empty()) {
                    for (const auto& assign : split(inner, ',')) {
                        const auto eq = assign.find('=');
                        if (eq == std::string::npos)
                            throw ConfigError(label, "expected key=value, got '" + assign + "'");
                        const std::string k = trim(assign.substr(0, eq));
                        if (!kCurveKeys.count(k))
                            throw ConfigError(label + "." + k, "unknown curve key");
                        if (k == swept)
                            throw ConfigError(label + "." + k, "is the sweep axis");
                        overrides.emplace_back(k, trim(assign.substr(eq + 1)));
                    }
                }
            }
            auto curve = build_curve(label, parse_scenario(label, scen), base, overrides);
            if (!names.insert(curve.name).second)
                throw ConfigError(label, "duplicate curve name '" + curve.name + "'");
            cfg.curves.push_back(std::move(curve));
        }
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
    std::ifstream is(file);
    if (!is) throw ConfigError("config", "cannot read " + file.string());
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

// ---------------------------------------------------------------- figures

namespace {

struct FigureText {
    const char* id;
    const char* text;
};

constexpr FigureText kFigures[] = {
    {"fig3", R"(; Outage vs per-device mean SNR, location-map phasing, sigma_eps = 20 deg.
; Outage threshold: spectral efficiency 1 (SNR 0 dB).
name = fig3
metric = outage
samples = 1000000
seed = 1
mean_snr_db = -15
active_devices = 20
power_scaling = constant_total
sigma_eps_deg = 20
spectral_efficiency = 1
curves = ckm(rice_factor_db=-6) | ckm(rice_factor_db=-3) | ckm(rice_factor_db=0) | ckm(rice_factor_db=3) | ckm(rice_factor_db=6) | ckm(rice_factor_db=9) | ckm(name=rayleigh, rice_factor_db=-inf) | selection(rice_factor_db=9)

[sweep]
axis = mean_snr_db
start = -30
stop = 5
step = 0.5
)"},
    {"fig4", R"(; Outage vs per-device mean SNR for several phase-error spreads, Rice factor 6 dB.
name = fig4
metric = outage
samples = 1000000
seed = 1
active_devices = 20
power_scaling = constant_total
rice_factor_db = 6
spectral_efficiency = 1
curves = ckm(sigma_eps_deg=1) | ckm(sigma_eps_deg=10) | ckm(sigma_eps_deg=20) | ckm(sigma_eps_deg=30)

[sweep]
axis = mean_snr_db
start = -30
stop = 0
step = 0.5
)"},
    {"fig5", R"(; Delay outage rate vs delay threshold, location-map phasing.
name = fig5
metric = dor
samples = 10000000
seed = 1
mean_snr_db = -15
active_devices = 20
power_scaling = constant_total
sigma_eps_deg = 20
data_bits = 100
bandwidth_hz = 200000
curves = ckm(rice_factor_db=0) | ckm(rice_factor_db=3) | ckm(rice_factor_db=6) | ckm(rice_factor_db=9)

[sweep]
axis = delay_threshold_s
start = 0.0002
stop = 0.05
points = 41
spacing = log
)"},
    {"fig6", R"(; Devices needed for a delay outage rate of 1e-4 vs delay threshold.
name = fig6
metric = devices
samples = 1000000
seed = 1
mean_snr_db = -15
power_scaling = constant_total
sigma_eps_deg = 20
data_bits = 100
bandwidth_hz = 200000
target_dor = 1e-4
curves = ckm(rice_factor_db=0) | ckm(rice_factor_db=3) | ckm(rice_factor_db=6)

[sweep]
axis = delay_threshold_s
values = 0.001, 0.002, 0.004, 0.008, 0.016
)"},
    {"fig7", R"(; Outage vs per-device mean SNR, quantised feedback phasing, word error 0.05.
name = fig7
metric = outage
samples = 1000000
seed = 1
active_devices = 20
power_scaling = constant_total
word_error_prob = 0.05
spectral_efficiency = 1
curves = feedback(bits=1, rice_factor_db=-3) | feedback(bits=2, rice_factor_db=-3) | feedback(bits=1, rice_factor_db=9) | feedback(bits=2, rice_factor_db=9) | selection(rice_factor_db=9)

[sweep]
axis = mean_snr_db
start = -30
stop = 5
step = 0.5
)"},
    {"fig8", R"(; Outage vs per-device mean SNR for several word error probabilities.
name = fig8
metric = outage
samples = 1000000
seed = 1
active_devices = 20
power_scaling = constant_total
rice_factor_db = 6
bits = 2
spectral_efficiency = 1
curves = feedback(word_error_prob=0.01) | feedback(word_error_prob=0.05) | feedback(word_error_prob=0.10) | feedback(word_error_prob=0.20)

[sweep]
axis = mean_snr_db
start = -30
stop = 0
step = 0.5
)"},
    {"fig9", R"(; Delay outage rate vs delay threshold, quantised feedback phasing.
name = fig9
metric = dor
samples = 10000000
seed = 1
mean_snr_db = -15
active_devices = 20
power_scaling = constant_total
rice_factor_db = 0
bits = 2
data_bits = 100
bandwidth_hz = 200000
curves = feedback(word_error_prob=0.01) | feedback(word_error_prob=0.05) | feedback(word_error_prob=0.10) | feedback(word_error_prob=0.20)

[sweep]
axis = delay_threshold_s
start = 0.0002
stop = 0.2
points = 46
spacing = log
)"},
};

}  // namespace

std::vector<std::string> figure_ids() {
    std::vector<std::string> ids;
    for (const auto& f : kFigures) ids.emplace_back(f.id);
    return ids;
}

std::string figure_config_text(const std::string& id) {
    for (const auto& f : kFigures)
        if (id == f.id) return f.text;
    throw ConfigError("figure", "unknown figure '" + id + "' (expected fig3 .. fig9)");
}

ExperimentConfig figure_config(const std::string& id) {
    return parse_config(figure_config_text(id));
}

// ---------------------------------------------------------------- evaluation

void apply_axis(SweepAxis axis, double value, CurveSpec& curve, ServiceSpec& service) {
    switch (axis) {
        case SweepAxis::MeanSnrDb: curve.cluster.mean_snr = db_to_linear(value); break;
        case SweepAxis::DelayThresholdS: service.delay_threshold = value; break;
        case SweepAxis::RiceFactorDb: curve.cluster.rice_factor = db_to_linear(value); break;
        case SweepAxis::SigmaEpsDeg: curve.side.ckm.sigma_eps = value * kDeg; break;
        case SweepAxis::WordErrorProb: curve.side.feedback.word_error_prob = value; break;
        case SweepAxis::DeviceCount:
            curve.cluster = curve.cluster.with_active(static_cast<int>(value));
            break;
    }
}

namespace {

SnrThreshold metric_threshold(const ExperimentConfig& cfg, const ServiceSpec& svc) {
    if (cfg.metric == Metric::Outage) return outage_threshold(svc.min_rate, svc.bandwidth);
    return dor_threshold(svc.data_bits, svc.bandwidth, svc.delay_threshold);
}

double analytic_cdf(const CurveSpec& c, double gamma) {
    switch (c.scenario) {
        case mc::Scenario::Ckm:
            return ckm::snr_cdf(ckm::build_dist(c.cluster, c.side.ckm), gamma);
        case mc::Scenario::Feedback:
            return feedback::snr_cdf_with_errors(c.cluster, c.side.feedback, gamma);
        case mc::Scenario::Selection: return baseline::selection_cdf(c.cluster, gamma);
    }
    return kNaN;
}

struct BoundResult {
    double devices = kNaN;
    double valid = kNaN;
};

BoundResult device_bound(const ExperimentConfig& cfg, const CurveSpec& c,
                         const ServiceSpec& svc) {
    if (c.scenario != mc::Scenario::Ckm) return {};
    const auto th = dor_threshold(svc.data_bits, svc.bandwidth, svc.delay_threshold);
    if (th.saturated) return {};
    try {
        const int n = ckm::required_devices(cfg.target_dor, th.value, c.cluster.rice_factor,
                                            c.cluster.mean_snr, c.side.ckm.sigma_eps,
                                            c.cluster.power_scaling);
        const bool valid = n <= mc::kMaxDevices &&
                           ckm::bound_validity(svc, c.cluster.with_active(n), c.side.ckm);
        return {static_cast<double>(n), valid ? 1.0 : 0.0};
    } catch (const UnsupportedRegime&) {
        return {};
    } catch (const NoFiniteBound&) {
        return {};
    }
}

}  // namespace

double analytic_value(const ExperimentConfig& cfg, const CurveSpec& curve,
                      const ServiceSpec& service) {
    if (cfg.metric == Metric::Devices) return device_bound(cfg, curve, service).devices;
    const auto th = metric_threshold(cfg, service);
    if (th.saturated) return 1.0;
    return analytic_cdf(curve, th.value);
}

std::string ResultTable::csv() const {
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out += ',';
        out += header[i];
    }
    out += '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += format_number(row[i]);
        }
        out += '\n';
    }
    return out;
}

int ResultTable::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

ResultTable evaluate(const ExperimentConfig& cfg, const RunControl& ctl) {
    const std::uint64_t n = ctl.samples.value_or(cfg.samples);
    const std::uint64_t seed = ctl.seed.value_or(cfg.seed);
    const bool analytic_only = ctl.analytic_only.value_or(cfg.analytic_only);
    if (n == 0) throw ConfigError("samples", "must be >= 1");
    mc::RunOptions opts;
    opts.threads = ctl.threads;
    opts.cache_dir = ctl.cache_dir;

    ResultTable table;
    table.header.push_back(axis_name(cfg.axis));
    for (const auto& c : cfg.curves) {
        table.header.push_back(c.name + "_analytic");
        if (cfg.metric == Metric::Devices) {
            table.header.push_back(c.name + "_valid");
            table.header.push_back(c.name + "_sim");
            table.header.push_back(c.name + "_uncertain");
        } else {
            table.header.push_back(c.name + "_sim");
            table.header.push_back(c.name + "_ci99");
        }
    }
    const std::size_t width = table.header.size();
    for (double v : cfg.values) {
        std::vector<double> row(width, kNaN);
        row[0] = v;
        table.rows.push_back(std::move(row));
    }

    auto point = [&](const CurveSpec& c, std::size_t i) {
        std::pair<CurveSpec, ServiceSpec> p{c, cfg.service};
        apply_axis(cfg.axis, cfg.values[i], p.first, p.second);
        return p;
    };

    // An empirical CDF from the cache, or a fresh run unless analytic-only.
    auto obtain = [&](const CurveSpec& c) -> std::optional<mc::EmpiricalCdf> {
        if (analytic_only) {
            if (ctl.cache_dir.empty()) return std::nullopt;
            const auto fp = mc::config_fingerprint(c.scenario, c.cluster, c.side);
            mc::EmpiricalCdf cdf;
            if (mc::load_cache(mc::cache_path(ctl.cache_dir, fp, seed, n), fp, seed, n, cdf))
                return cdf;
            return std::nullopt;
        }
        return mc::run(c.scenario, c.cluster, c.side, n, seed, opts);
    };
    auto put_rate = [&](std::vector<double>& row, std::size_t col, double hits) {
        const auto r = mc::binomial_rate(static_cast<std::uint64_t>(hits), n);
        row[col] = r.value;
        row[col + 1] = 0.5 * (r.upper - r.lower);
    };

    for (std::size_t ci = 0; ci < cfg.curves.size(); ++ci) {
        const auto& curve = cfg.curves[ci];
        const std::size_t col = 1 + ci * (cfg.metric == Metric::Devices ? 4 : 3);

        for (std::size_t i = 0; i < cfg.values.size(); ++i) {
            const auto [c, svc] = point(curve, i);
            if (cfg.metric == Metric::Devices) {
                const auto b = device_bound(cfg, c, svc);
                table.rows[i][col] = b.devices;
                table.rows[i][col + 1] = b.valid;
            } else {
                table.rows[i][col] = analytic_value(cfg, c, svc);
            }
        }

        if (cfg.metric == Metric::Devices) {
            if (analytic_only) continue;
            for (std::size_t i = 0; i < cfg.values.size(); ++i) {
                const auto [c, svc] = point(curve, i);
                const double bound = table.rows[i][col];
                const int hint = std::isnan(bound) ? 0 : static_cast<int>(bound);
                const auto r = mc::min_devices(c.scenario, c.cluster, c.side, svc, cfg.target_dor,
                                               n, seed, opts, hint);
                table.rows[i][col + 2] = r.feasible ? r.devices : kNaN;
                table.rows[i][col + 3] = r.uncertain ? 1.0 : 0.0;
            }
            continue;
        }

        // Mean SNR scales every sample linearly and the delay threshold only
        // moves the evaluation point, so one run serves the whole sweep.
        if (cfg.axis == SweepAxis::MeanSnrDb || cfg.axis == SweepAxis::DelayThresholdS) {
            CurveSpec ref = curve;
            if (cfg.axis == SweepAxis::MeanSnrDb) ref.cluster.mean_snr = 1.0;
            const auto cdf = obtain(ref);
            if (!cdf) continue;
            for (std::size_t i = 0; i < cfg.values.size(); ++i) {
                const auto [c, svc] = point(curve, i);
                const auto th = metric_threshold(cfg, svc);
                const double scale =
                    cfg.axis == SweepAxis::MeanSnrDb ? c.cluster.mean_snr : 1.0;
                put_rate(table.rows[i], col + 1,
                         th.saturated ? static_cast<double>(n) : cdf->count_below(th.value / scale));
            }
        } else {
            for (std::size_t i = 0; i < cfg.values.size(); ++i) {
                const auto [c, svc] = point(curve, i);
                const auto cdf = obtain(c);
                if (!cdf) continue;
                const auto th = metric_threshold(cfg, svc);
                put_rate(table.rows[i], col + 1,
                         th.saturated ? static_cast<double>(n) : cdf->count_below(th.value));
            }
        }
    }
    return table;
}

// ---------------------------------------------------------------- output

namespace {

std::string fmt2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::vector<double> nice_ticks(double lo, double hi) {
    const double span = hi - lo;
    const double raw = span / 6.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (m * mag >= raw) {
            step = m * mag;
            break;
        }
    std::vector<double> t;
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step)
        t.push_back(std::abs(v) < 1e-12 * span ? 0.0 : v);
    return t;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

}  // namespace

std::string render_svg(const ExperimentConfig& cfg, const ResultTable& table) {
    const double W = 820, H = 540, left = 80, right = 220, top = 40, bottom = 60;
    const double pw = W - left - right, ph = H - top - bottom;
    const bool log_x = cfg.axis == SweepAxis::DelayThresholdS;
    const bool log_y = cfg.metric == Metric::Dor;
    const int stride = cfg.metric == Metric::Devices ? 4 : 3;

    double xmin = cfg.values.front(), xmax = cfg.values.back();
    for (double v : cfg.values) {
        xmin = std::min(xmin, v);
        xmax = std::max(xmax, v);
    }
    if (xmax == xmin) {
        xmin -= log_x ? 0.5 * xmin : 1.0;
        xmax += log_x ? xmax : 1.0;
    }
    double ymin = 0.0, ymax = 1.0;
    if (log_y) {
        double lowest = 1.0;
        for (const auto& row : table.rows)
            for (std::size_t ci = 0; ci < cfg.curves.size(); ++ci)
                for (int k : {0, 1}) {
                    const double v = row[1 + ci * stride + k];
                    if (v > 0.0) lowest = std::min(lowest, v);
                }
        ymin = std::max(1e-7, std::pow(10.0, std::floor(std::log10(lowest))));
        if (ymin >= 1.0) ymin = 0.1;
    } else if (cfg.metric == Metric::Devices) {
        double highest = 1.0;
        for (const auto& row : table.rows)
            for (std::size_t ci = 0; ci < cfg.curves.size(); ++ci)
                for (int k : {0, 2}) {
                    const double v = row[1 + ci * stride + k];
                    if (std::isfinite(v)) highest = std::max(highest, v);
                }
        ymax = highest * 1.1;
    }
    auto sx = [&](double x) {
        const double f = log_x ? (std::log10(x) - std::log10(xmin)) / (std::log10(xmax) - std::log10(xmin))
                               : (x - xmin) / (xmax - xmin);
        return left + f * pw;
    };
    auto sy = [&](double y) {
        double f;
        if (log_y) {
            f = (std::log10(std::max(y, ymin)) - std::log10(ymin)) / (0.0 - std::log10(ymin));
        } else {
            f = (y - ymin) / (ymax - ymin);
        }
        return top + (1.0 - f) * ph;
    };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
       << "\" viewBox=\"0 0 " << W << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<title>" << xml_escape(cfg.name) << "</title>\n";
    os << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"black\"/>\n";

    // Grid and ticks.
    std::vector<double> xt, yt;
    if (log_x) {
        for (int e = static_cast<int>(std::floor(std::log10(xmin)));
             e <= static_cast<int>(std::ceil(std::log10(xmax))); ++e)
            for (int m : {1, 2, 5}) {
                const double v = m * std::pow(10.0, e);
                if (v >= xmin * (1 - 1e-9) && v <= xmax * (1 + 1e-9)) xt.push_back(v);
            }
    } else {
        xt = nice_ticks(xmin, xmax);
    }
    if (log_y) {
        for (int e = static_cast<int>(std::round(std::log10(ymin))); e <= 0; ++e)
            yt.push_back(std::pow(10.0, e));
    } else {
        yt = nice_ticks(ymin, ymax);
    }
    for (double x : xt) {
        os << "<line x1=\"" << fmt2(sx(x)) << "\" y1=\"" << top << "\" x2=\"" << fmt2(sx(x))
           << "\" y2=\"" << top + ph << "\" stroke=\"#dddddd\"/>\n";
        os << "<text x=\"" << fmt2(sx(x)) << "\" y=\"" << top + ph + 18
           << "\" text-anchor=\"middle\">" << tick_label(x) << "</text>\n";
    }
    for (double y : yt) {
        os << "<line x1=\"" << left << "\" y1=\"" << fmt2(sy(y)) << "\" x2=\"" << left + pw
           << "\" y2=\"" << fmt2(sy(y)) << "\" stroke=\"#dddddd\"/>\n";
        os << "<text x=\"" << left - 6 << "\" y=\"" << fmt2(sy(y) + 4)
           << "\" text-anchor=\"end\">" << tick_label(y) << "</text>\n";
    }
    os << "<text x=\"" << fmt2(left + pw / 2) << "\" y=\"" << H - 15
       << "\" text-anchor=\"middle\">" << axis_name(cfg.axis) << "</text>\n";
    const char* ylabel = cfg.metric == Metric::Outage ? "outage probability"
                         : cfg.metric == Metric::Dor  ? "delay outage rate"
                                                      : "required devices";
    os << "<text x=\"18\" y=\"" << fmt2(top + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
       << fmt2(top + ph / 2) << ")\">" << ylabel << "</text>\n";

    for (std::size_t ci = 0; ci < cfg.curves.size(); ++ci) {
        const char* colour = kPalette[ci % std::size(kPalette)];
        const std::size_t a = 1 + ci * stride;
        const std::size_t s = cfg.metric == Metric::Devices ? a + 2 : a + 1;
        std::string path;
        bool pen = false;
        for (const auto& row : table.rows) {
            const double y = row[a];
            if (!std::isfinite(y) || (log_y && !(y > 0.0))) {
                pen = false;
                continue;
            }
            path += (pen ? " L" : " M") + fmt2(sx(row[0])) + ' ' + fmt2(sy(y));
            pen = true;
        }
        if (!path.empty())
            os << "<path d=\"" << path.substr(1) << "\" fill=\"none\" stroke=\"" << colour
               << "\" stroke-width=\"1.5\"/>\n";
        for (const auto& row : table.rows) {
            const double y = row[s];
            if (!std::isfinite(y) || (log_y && !(y > 0.0))) continue;
            os << "<circle cx=\"" << fmt2(sx(row[0])) << "\" cy=\"" << fmt2(sy(y))
               << "\" r=\"3\" fill=\"none\" stroke=\"" << colour << "\"/>\n";
        }
        const double ly = top + 10 + 18.0 * static_cast<double>(ci);
        os << "<line x1=\"" << left + pw + 12 << "\" y1=\"" << fmt2(ly) << "\" x2=\""
           << left + pw + 36 << "\" y2=\"" << fmt2(ly) << "\" stroke=\"" << colour
           << "\" stroke-width=\"1.5\"/>\n";
        os << "<text x=\"" << left + pw + 42 << "\" y=\"" << fmt2(ly + 4) << "\">"
           << xml_escape(cfg.curves[ci].name) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

Outputs run_experiment(const ExperimentConfig& cfg, const RunControl& ctl) {
    const auto table = evaluate(cfg, ctl);
    std::filesystem::create_directories(ctl.out_dir);
    Outputs out{ctl.out_dir / (cfg.name + ".csv"), ctl.out_dir / (cfg.name + ".svg"),
                ctl.out_dir / (cfg.name + ".json")};
    auto write = [](const std::filesystem::path& p, const std::string& text) {
        std::ofstream os(p, std::ios::binary | std::ios::trunc);
        if (!os) throw ConfigError("out_dir", "cannot write " + p.string());
        os << text;
    };
    write(out.csv, table.csv());
    write(out.svg, render_svg(cfg, table));

    nlohmann::json meta;
    meta["name"] = cfg.name;
    meta["metric"] = metric_name(cfg.metric);
    meta["axis"] = axis_name(cfg.axis);
    meta["samples"] = ctl.samples.value_or(cfg.samples);
    meta["seed"] = ctl.seed.value_or(cfg.seed);
    meta["analytic_only"] = ctl.analytic_only.value_or(cfg.analytic_only);
    meta["service"] = {{"data_bits", cfg.service.data_bits},
                       {"bandwidth_hz", cfg.service.bandwidth},
                       {"delay_threshold_s", cfg.service.delay_threshold},
                       {"spectral_efficiency", cfg.spectral_efficiency}};
    if (cfg.metric == Metric::Devices) meta["target_dor"] = cfg.target_dor;
    if (cfg.metric == Metric::Outage)
        meta["x_axis_note"] =
            "per-device mean SNR swept at a fixed outage threshold 2^spectral_efficiency - 1";
    nlohmann::json curves = nlohmann::json::array();
    for (const auto& c : cfg.curves) {
        curves.push_back({{"name", c.name},
                          {"scenario", mc::scenario_name(c.scenario)},
                          {"mean_snr", c.cluster.mean_snr},
                          {"rice_factor", c.cluster.rice_factor},
                          {"active_devices", c.cluster.active_devices},
                          {"total_devices", c.cluster.total_devices},
                          {"power_scaling", c.cluster.power_scaling == PowerScaling::ConstantTotal
                                                ? "constant_total"
                                                : "constant_per_device"},
                          {"sigma_eps_rad", c.side.ckm.sigma_eps},
                          {"bits", c.side.feedback.bits},
                          {"word_error_prob", c.side.feedback.word_error_prob}});
    }
    meta["curves"] = curves;
    meta["config"] = cfg.source;
    write(out.metadata, meta.dump(2) + "\n");
    return out;
}

}  // namespace coopuplink::experiments
