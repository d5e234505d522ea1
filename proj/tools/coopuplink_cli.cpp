// Command-line runner for the stock figures and config-file sweeps.
//
//   coopuplink figure fig5 --out-dir out --cache-dir cache
//   coopuplink figure all --analytic-only
//   coopuplink figure fig6 --dump-config > my.ini
//   coopuplink sweep my.ini --samples 100000 --seed 7
//
// Exit codes: 0 success, 2 validation error, 3 numeric failure.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "coopuplink/errors.hpp"
#include "coopuplink/experiments.hpp"

namespace ex = coopuplink::experiments;

namespace {

int run_one(const ex::ExperimentConfig& cfg, const ex::RunControl& ctl) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto out = ex::run_experiment(cfg, ctl);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::fprintf(stderr, "%s: wrote %s, %s (%.1f s)\n", cfg.name.c_str(), out.csv.string().c_str(),
                 out.svg.string().c_str(), secs);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cooperative uplink outage and delay-outage experiments"};
    app.require_subcommand(1);

    ex::RunControl ctl;
    std::uint64_t samples = 0;
    std::uint64_t seed = 0;
    bool analytic_only = false;
    std::string cache_dir;
    std::string out_dir = ".";
    unsigned threads = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--samples", samples, "Monte Carlo samples per curve (overrides config)");
        sub->add_option("--seed", seed, "Random seed (overrides config)");
        sub->add_flag("--analytic-only", analytic_only,
                      "Skip simulation; simulated columns come from the cache or stay empty");
        sub->add_option("--cache-dir", cache_dir, "Directory for cached Monte Carlo runs");
        sub->add_option("--out-dir", out_dir, "Output directory")->capture_default_str();
        sub->add_option("--threads", threads, "Worker threads (0 = all cores)");
    };

    auto* fig = app.add_subcommand("figure", "Reproduce a stock figure (fig3 .. fig9, or all)");
    std::string fig_id;
    bool dump = false;
    fig->add_option("id", fig_id, "Figure id")->required();
    fig->add_flag("--dump-config", dump, "Print the figure's sweep config and exit");
    add_common(fig);

    auto* sweep = app.add_subcommand("sweep", "Run a sweep described by a config file");
    std::string config_path;
    sweep->add_option("config", config_path, "Config file")->required();
    add_common(sweep);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    auto* active = fig->parsed() ? fig : sweep;
    if (active->count("--samples")) {
        if (samples == 0) {
            std::cerr << "error: --samples must be >= 1\n";
            return 2;
        }
        ctl.samples = samples;
    }
    if (active->count("--seed")) ctl.seed = seed;
    if (analytic_only) ctl.analytic_only = true;
    ctl.cache_dir = cache_dir;
    ctl.out_dir = out_dir;
    ctl.threads = threads;

    try {
        if (fig->parsed()) {
            if (fig_id == "all") {
                if (dump) {
                    for (const auto& id : ex::figure_ids())
                        std::cout << ex::figure_config_text(id) << '\n';
                    return 0;
                }
                for (const auto& id : ex::figure_ids()) run_one(ex::figure_config(id), ctl);
                return 0;
            }
            if (dump) {
                std::cout << ex::figure_config_text(fig_id);
                return 0;
            }
            return run_one(ex::figure_config(fig_id), ctl);
        }
        return run_one(ex::load_config(config_path), ctl);
    } catch (const coopuplink::NumericFailure& e) {
        std::cerr << "numeric failure: " << e.what() << " (partial value " << e.partial_value()
                  << ")\n";
        return 3;
    } catch (const ex::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const coopuplink::DomainError& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return 2;
    } catch (const coopuplink::UnsupportedRegime& e) {
        std::cerr << "unsupported regime: " << e.what() << '\n';
        return 2;
    } catch (const coopuplink::NoFiniteBound& e) {
        std::cerr << "no finite bound: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
