#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "coopuplink/analytic_ckm.hpp"
#include "coopuplink/analytic_feedback.hpp"
#include "coopuplink/baseline.hpp"
#include "coopuplink/experiments.hpp"
#include "coopuplink/montecarlo.hpp"
#include "coopuplink/specfun.hpp"

namespace py = pybind11;
using namespace coopuplink;

namespace {

mc::Scenario scenario_from(const std::string& s) {
    if (s == "ckm") return mc::Scenario::Ckm;
    if (s == "feedback") return mc::Scenario::Feedback;
    if (s == "selection") return mc::Scenario::Selection;
    throw DomainError("unknown scenario '" + s + "'");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Outage and delay-outage analysis of phased cooperative uplinks";

    py::enum_<PowerScaling>(m, "PowerScaling")
        .value("ConstantPerDevice", PowerScaling::ConstantPerDevice)
        .value("ConstantTotal", PowerScaling::ConstantTotal);

    py::class_<ClusterConfig>(m, "ClusterConfig")
        .def(py::init([](double mean_snr, double rice_factor, int active_devices,
                         int total_devices, PowerScaling scaling) {
                 ClusterConfig c{mean_snr, rice_factor, active_devices,
                                 total_devices > 0 ? total_devices : active_devices, scaling};
                 c.validate();
                 return c;
             }),
             py::arg("mean_snr") = 1.0, py::arg("rice_factor") = 0.0,
             py::arg("active_devices") = 1, py::arg("total_devices") = 0,
             py::arg("power_scaling") = PowerScaling::ConstantPerDevice)
        .def_readwrite("mean_snr", &ClusterConfig::mean_snr)
        .def_readwrite("rice_factor", &ClusterConfig::rice_factor)
        .def_readwrite("active_devices", &ClusterConfig::active_devices)
        .def_readwrite("total_devices", &ClusterConfig::total_devices)
        .def_readwrite("power_scaling", &ClusterConfig::power_scaling)
        .def("validate", &ClusterConfig::validate)
        .def("with_active", &ClusterConfig::with_active);

    py::class_<CkmSideInfo>(m, "CkmSideInfo")
        .def(py::init([](double s) { return CkmSideInfo{s}; }), py::arg("sigma_eps") = 0.0)
        .def_readwrite("sigma_eps", &CkmSideInfo::sigma_eps);

    py::class_<FeedbackSideInfo>(m, "FeedbackSideInfo")
        .def(py::init([](int bits, double p) { return FeedbackSideInfo{bits, p}; }),
             py::arg("bits") = 1, py::arg("word_error_prob") = 0.0)
        .def_readwrite("bits", &FeedbackSideInfo::bits)
        .def_readwrite("word_error_prob", &FeedbackSideInfo::word_error_prob);

    py::class_<ServiceSpec>(m, "ServiceSpec")
        .def(py::init([](double d, double w, double t, double r) { return ServiceSpec{d, w, t, r}; }),
             py::arg("data_bits") = 0.0, py::arg("bandwidth") = 1.0,
             py::arg("delay_threshold") = 1.0, py::arg("min_rate") = 0.0)
        .def_readwrite("data_bits", &ServiceSpec::data_bits)
        .def_readwrite("bandwidth", &ServiceSpec::bandwidth)
        .def_readwrite("delay_threshold", &ServiceSpec::delay_threshold)
        .def_readwrite("min_rate", &ServiceSpec::min_rate);

    // special functions
    m.def("bessel_i", [](int n, double x) { return specfun::bessel_i(n, x); });
    m.def("bessel_i_scaled", [](int n, double x) { return specfun::bessel_i_scaled(n, x); });
    m.def("marcum_q", [](int order, double a, double b) { return specfun::marcum_q(order, a, b); },
          py::arg("order"), py::arg("a"), py::arg("b"));
    m.def("marcum_cdf",
          [](int order, double a, double b) { return specfun::marcum_cdf(order, a, b); },
          py::arg("order"), py::arg("a"), py::arg("b"));
    m.def("sinc_norm", &specfun::sinc_norm);
    m.def("rice_amplitude_mean", &specfun::rice_amplitude_mean);

    // metrics
    m.def("db_to_linear", &db_to_linear);
    m.def("linear_to_db", &linear_to_db);
    m.def("dor_threshold", [](double d, double w, double t) {
        const auto th = dor_threshold(d, w, t);
        return py::make_tuple(th.value, th.saturated);
    });
    m.def("outage_threshold", [](double r, double w) {
        const auto th = outage_threshold(r, w);
        return py::make_tuple(th.value, th.saturated);
    });

    // location-map phasing
    m.def("effective_rice_factor", &ckm::effective_rice_factor);
    m.def("ckm_snr_cdf", [](const ClusterConfig& c, const CkmSideInfo& s, double g) {
        return ckm::snr_cdf(ckm::build_dist(c, s), g);
    });
    m.def("ckm_dor", [](const ClusterConfig& c, const CkmSideInfo& s, const ServiceSpec& svc) {
        return ckm::dor(ckm::build_dist(c, s), svc);
    });
    m.def("ckm_quantile", [](const ClusterConfig& c, const CkmSideInfo& s, double p) {
        return quantile(ckm::make_cdf(c, s), p);
    });
    m.def("required_devices", &ckm::required_devices, py::arg("target_dor"),
          py::arg("gamma_req"), py::arg("rice_factor"), py::arg("mean_snr"),
          py::arg("sigma_eps"), py::arg("scaling"));

    // quantised feedback phasing
    m.def("feedback_moments", [](const ClusterConfig& c, const FeedbackSideInfo& s, int errors) {
        const auto mom = feedback::moments(c, s, errors);
        py::dict d;
        d["mu_r"] = mom.mu_r;
        d["sigma_r"] = mom.sigma_r;
        d["sigma_i"] = mom.sigma_i;
        d["noncentrality"] = mom.noncentrality;
        return d;
    });
    m.def("feedback_snr_cdf", [](const ClusterConfig& c, const FeedbackSideInfo& s, double g) {
        return feedback::snr_cdf_with_errors(c, s, g);
    });
    m.def("feedback_dor",
          [](const ClusterConfig& c, const FeedbackSideInfo& s, const ServiceSpec& svc) {
              return feedback::dor_feedback(c, s, svc);
          });
    m.def("selection_cdf", &baseline::selection_cdf);

    // simulation
    m.def(
        "simulate",
        [](const std::string& scenario, const ClusterConfig& c, std::uint64_t n, std::uint64_t seed,
           double sigma_eps, int bits, double word_error_prob) {
            mc::SideInfo side{CkmSideInfo{sigma_eps}, FeedbackSideInfo{bits, word_error_prob}};
            mc::EmpiricalCdf cdf;
            {
                py::gil_scoped_release release;
                cdf = mc::run(scenario_from(scenario), c, side, n, seed);
            }
            const auto& s = cdf.sorted_samples();
            return py::array_t<double>(static_cast<py::ssize_t>(s.size()), s.data());
        },
        py::arg("scenario"), py::arg("cluster"), py::arg("n"), py::arg("seed") = 1,
        py::arg("sigma_eps") = 0.0, py::arg("bits") = 1, py::arg("word_error_prob") = 0.0,
        "Sorted SNR samples of one scenario");

    // experiments
    m.def("figure_ids", &experiments::figure_ids);
    m.def("figure_config_text", &experiments::figure_config_text);
    m.def(
        "run_figure",
        [](const std::string& id, const std::filesystem::path& out_dir,
           std::optional<std::uint64_t> samples, std::optional<std::uint64_t> seed,
           bool analytic_only) {
            experiments::RunControl ctl;
            ctl.out_dir = out_dir;
            ctl.samples = samples;
            ctl.seed = seed;
            if (analytic_only) ctl.analytic_only = true;
            experiments::Outputs out;
            {
                py::gil_scoped_release release;
                out = experiments::run_experiment(experiments::figure_config(id), ctl);
            }
            return py::make_tuple(out.csv, out.svg, out.metadata);
        },
        py::arg("id"), py::arg("out_dir"), py::arg("samples") = py::none(),
        py::arg("seed") = py::none(), py::arg("analytic_only") = false);
}
