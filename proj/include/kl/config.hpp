// config.hpp — run configuration: INI parsing, effective-config echo, command dispatch
#pragma once

#include "kl/pipeline.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace kl {

enum class Command { gain_sweep, fig2, landscape, high_t, verify, rates_dump };
const char* command_name(Command c);
Command parse_command(const std::string& s);

struct SolverOptions {
    double lambda = 0.5;
    double tol = 1e-10;
    int max_iter = 500;
    int n_fock = 8;                 // verify only
    bool n_res_feedback = false;
    bool derivative_terms = true;
    Theory theory = Theory::full21; // verify and rates-dump
    bool operator==(const SolverOptions&) const = default;
};

struct RunConfig {
    Command command = Command::fig2;
    SystemParams system;
    LeadSource lead_source = LeadSource::right;
    BathModel bath;
    std::string bath_file;          // tabulated bath source
    SweepSpec sweep;
    double T_low = 7.8, T_high = 23.4;
    LandscapeSpec landscape;
    SolverOptions solver;
    std::string out_dir = "out";
    bool operator==(const RunConfig&) const = default;

    MeanfieldOptions meanfield() const;
};

// Errors carry the offending key path, e.g. "system.g".
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& key, const std::string& what)
        : std::runtime_error(key + ": " + what), key_(key)
    {
    }
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

// keys a config must set explicitly for this command
std::vector<std::string> required_keys(Command c);

// reference-setting defaults for fig2 and high-T, library defaults otherwise
RunConfig default_config(Command c);

// `fallback` supplies the command when the file has none (CLI subcommand)
RunConfig parse_config(const std::string& path, std::optional<Command> fallback = std::nullopt);
RunConfig parse_config_text(const std::string& text, std::optional<Command> fallback = std::nullopt);

// complete INI text; parse_config_text(emit(c)) == c
std::string emit(const RunConfig& c);

// 0 success, 2 partial (masked or non-converged points), 1 error
int dispatch(const RunConfig& c, int jobs = 1);

}  // namespace kl
