// kl.cpp — command-line front end
#include "kl/config.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>
#include <optional>

namespace {

void setup_logging()
{
    spdlog::set_default_logger(spdlog::stderr_color_mt("kl"));
    spdlog::set_pattern("[%l] %v");
    spdlog::set_level(spdlog::level::info);
    if (const char* env = std::getenv("KL_LOG")) {
        const auto lvl = spdlog::level::from_str(env);
        // from_str maps unknown names to off
        if (lvl == spdlog::level::off && std::string(env) != "off")
            spdlog::warn("KL_LOG='{}' not recognised; keeping info", env);
        else
            spdlog::set_level(lvl);
    }
}

}  // namespace

int main(int argc, char** argv)
{
    setup_logging();

    CLI::App app{"Correlated photon-phonon gain in a DQD-resonator system"};
    app.require_subcommand(0, 1);
    std::string config_path, out_dir, variant;
    int jobs = 1;
    bool no_deriv = false;
    app.add_option("--config", config_path, "INI config file")->check(CLI::ExistingFile);
    app.add_option("--jobs", jobs, "worker threads for sweeps")->check(CLI::PositiveNumber);
    app.add_option("--out", out_dir, "output directory (overrides output.dir)");
    app.add_option("--variant", variant, "theory variant override")
        ->check(CLI::IsMember({"polaron", "dominant6", "full21"}));
    app.add_flag("--no-derivative-terms", no_deriv, "drop the C' contributions");

    for (kl::Command c : {kl::Command::gain_sweep, kl::Command::fig2, kl::Command::landscape,
                          kl::Command::high_t, kl::Command::verify, kl::Command::rates_dump})
        app.add_subcommand(kl::command_name(c), std::string("run ") + kl::command_name(c))->fallthrough();

    CLI11_PARSE(app, argc, argv);

    std::optional<kl::Command> sub;
    for (auto* s : app.get_subcommands()) sub = kl::parse_command(s->get_name());

    try {
        kl::RunConfig cfg;
        if (!config_path.empty()) {
            cfg = kl::parse_config(config_path, sub);
        } else if (sub) {
            const auto req = kl::required_keys(*sub);
            if (!req.empty())
                throw kl::ConfigError(req.front(), std::string("required for command ") +
                                                       kl::command_name(*sub) + " (pass --config)");
            cfg = kl::default_config(*sub);
        } else {
            std::cerr << app.help();
            return 1;
        }
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (!variant.empty()) cfg.sweep.variant = cfg.solver.theory = kl::parse_theory(variant);
        if (no_deriv) {
            cfg.solver.derivative_terms = false;
            cfg.landscape.rates.derivative_terms = false;
        }
        const int rc = kl::dispatch(cfg, jobs);
        if (rc == 2) spdlog::warn("finished with masked points (exit 2)");
        return rc;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
}
