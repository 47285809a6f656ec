// config.cpp — strict INI configuration and command dispatch
#include "kl/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <cerrno>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace kl {

namespace {

namespace pt = boost::property_tree;

double to_double(const std::string& key, const std::string& v)
{
    const char* b = v.c_str();
    char* e = nullptr;
    errno = 0;
    const double x = std::strtod(b, &e);
    if (e == b || *e != '\0' || errno == ERANGE)
        throw ConfigError(key, "expected a number, got '" + v + "'");
    return x;
}

int to_int(const std::string& key, const std::string& v)
{
    const char* b = v.c_str();
    char* e = nullptr;
    errno = 0;
    const long x = std::strtol(b, &e, 10);
    if (e == b || *e != '\0' || errno == ERANGE || x < INT32_MIN || x > INT32_MAX)
        throw ConfigError(key, "expected an integer, got '" + v + "'");
    return int(x);
}

bool to_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(key, "expected a boolean, got '" + v + "'");
}

// rethrow enum parse failures with the key path attached
template <class F>
auto keyed(const std::string& key, F&& f)
{
    try {
        return f();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(key, e.what());
    }
}

std::string num(double v) { return csv_number(v); }
std::string boolean(bool b) { return b ? "true" : "false"; }

using Setter = std::function<void(RunConfig&, const std::string& path, const std::string& v)>;
using Getter = std::function<std::optional<std::string>(const RunConfig&)>;

struct Key {
    std::string section, name;
    Setter set;
    Getter get;   // nullopt: not applicable to this configuration
    std::string path() const { return section + "." + name; }
};

Key real(std::string sec, std::string name, double RunConfig::*f)
{
    return {sec, name, [f](RunConfig& c, const std::string& k, const std::string& v) { c.*f = to_double(k, v); },
            [f](const RunConfig& c) { return std::optional(num(c.*f)); }};
}

template <class S>
Key real_in(std::string sec, std::string name, S RunConfig::*s, double S::*f)
{
    return {sec, name,
            [s, f](RunConfig& c, const std::string& k, const std::string& v) { (c.*s).*f = to_double(k, v); },
            [s, f](const RunConfig& c) { return std::optional(num((c.*s).*f)); }};
}

template <class S>
Key integer_in(std::string sec, std::string name, S RunConfig::*s, int S::*f)
{
    return {sec, name,
            [s, f](RunConfig& c, const std::string& k, const std::string& v) { (c.*s).*f = to_int(k, v); },
            [s, f](const RunConfig& c) { return std::optional(std::to_string((c.*s).*f)); }};
}

template <class S>
Key flag_in(std::string sec, std::string name, S RunConfig::*s, bool S::*f)
{
    return {sec, name,
            [s, f](RunConfig& c, const std::string& k, const std::string& v) { (c.*s).*f = to_bool(k, v); },
            [s, f](const RunConfig& c) { return std::optional(boolean((c.*s).*f)); }};
}

template <class B>
Key bath_real(std::string name, double B::*f)
{
    return {"bath", name,
            [f, name](RunConfig& c, const std::string& k, const std::string& v) {
                auto* b = std::get_if<B>(&c.bath.variant);
                if (!b) throw ConfigError(k, "not valid for bath.type = " + std::string(variant_name(c.bath)));
                b->*f = to_double(k, v);
            },
            [f](const RunConfig& c) -> std::optional<std::string> {
                if (const auto* b = std::get_if<B>(&c.bath.variant)) return num(b->*f);
                return std::nullopt;
            }};
}

// bath.type first: the remaining bath keys depend on it
const std::vector<Key>& registry()
{
    static const std::vector<Key> keys = [] {
        std::vector<Key> k;
        k.push_back(real_in("system", "eps_q", &RunConfig::system, &SystemParams::eps_q));
        k.push_back(real_in("system", "Delta_q", &RunConfig::system, &SystemParams::Delta_q));
        k.push_back(real_in("system", "omega_r", &RunConfig::system, &SystemParams::omega_r));
        k.push_back(real_in("system", "omega_d", &RunConfig::system, &SystemParams::omega_d));
        k.push_back(real_in("system", "g", &RunConfig::system, &SystemParams::g));
        k.push_back(real_in("system", "kappa_minus_r", &RunConfig::system, &SystemParams::kappa_minus_r));
        k.push_back(real_in("system", "kappa_plus_r", &RunConfig::system, &SystemParams::kappa_plus_r));
        k.push_back(real_in("system", "Gamma_L", &RunConfig::system, &SystemParams::Gamma_L));
        k.push_back(real_in("system", "Gamma_R", &RunConfig::system, &SystemParams::Gamma_R));
        k.push_back(real_in("system", "eps_d", &RunConfig::system, &SystemParams::eps_d));
        k.push_back({"system", "lead_source",
                     [](RunConfig& c, const std::string& p, const std::string& v) {
                         c.lead_source = keyed(p, [&] { return parse_lead_source(v); });
                     },
                     [](const RunConfig& c) { return std::optional<std::string>(lead_source_name(c.lead_source)); }});

        k.push_back({"bath", "type",
                     [](RunConfig& c, const std::string& p, const std::string& v) {
                         if (v == "ohmic") {
                             if (!std::holds_alternative<Ohmic>(c.bath.variant)) c.bath.variant = Ohmic{};
                         } else if (v == "piezo") {
                             if (!std::holds_alternative<Piezo>(c.bath.variant)) c.bath.variant = Piezo{};
                         } else if (v == "tabulated") {
                             c.bath.variant = Tabulated{};
                         } else {
                             throw ConfigError(p, "unknown bath type '" + v + "' (ohmic|piezo|tabulated)");
                         }
                     },
                     [](const RunConfig& c) { return std::optional<std::string>(variant_name(c.bath)); }});
        k.push_back(real_in("bath", "T", &RunConfig::bath, &BathModel::T));
        k.push_back({"bath", "c0",
                     [](RunConfig& c, const std::string& p, const std::string& v) {
                         if (v == "auto" || v.empty()) c.bath.c0_override.reset();
                         else c.bath.c0_override = to_double(p, v);
                     },
                     [](const RunConfig& c) {
                         return std::optional<std::string>(c.bath.c0_override ? num(*c.bath.c0_override) : "auto");
                     }});
        k.push_back(bath_real<Ohmic>("amplitude", &Ohmic::amplitude));
        k.push_back(bath_real<Piezo>("F", &Piezo::F));
        k.push_back(bath_real<Piezo>("P", &Piezo::P));
        k.push_back(bath_real<Piezo>("d", &Piezo::d));
        k.push_back(bath_real<Piezo>("a", &Piezo::a));
        k.push_back(bath_real<Piezo>("c_n", &Piezo::c_n));
        k.push_back(bath_real<Piezo>("c_s", &Piezo::c_s));
        k.push_back(bath_real<Piezo>("omega_r_phys", &Piezo::omega_r_phys));
        k.push_back({"bath", "file",
                     [](RunConfig& c, const std::string& p, const std::string& v) {
                         if (!std::holds_alternative<Tabulated>(c.bath.variant))
                             throw ConfigError(p, "only valid for bath.type = tabulated");
                         c.bath_file = v;
                         c.bath.variant = keyed(p, [&] { return Tabulated::load(v); });
                     },
                     [](const RunConfig& c) -> std::optional<std::string> {
                         if (std::holds_alternative<Tabulated>(c.bath.variant)) return c.bath_file;
                         return std::nullopt;
                     }});

        k.push_back(real_in("sweep", "eps_min", &RunConfig::sweep, &SweepSpec::eps_min));
        k.push_back(real_in("sweep", "eps_max", &RunConfig::sweep, &SweepSpec::eps_max));
        k.push_back(integer_in("sweep", "count", &RunConfig::sweep, &SweepSpec::count));
        k.push_back({"sweep", "variant",
                     [](RunConfig& c, const std::string& p, const std::string& v) {
                         c.sweep.variant = keyed(p, [&] { return parse_theory(v); });
                     },
                     [](const RunConfig& c) { return std::optional<std::string>(theory_name(c.sweep.variant)); }});
        k.push_back(real_in("sweep", "w", &RunConfig::sweep, &SweepSpec::w));
        k.push_back(real("sweep", "T_low", &RunConfig::T_low));
        k.push_back(real("sweep", "T_high", &RunConfig::T_high));

        k.push_back({"landscape", "axes",
                     [](RunConfig& c, const std::string& p, const std::string& v) {
                         c.landscape.axes = keyed(p, [&] { return parse_landscape_axes(v); });
                     },
                     [](const RunConfig& c) { return std::optional<std::string>(landscape_axes_name(c.landscape.axes)); }});
        k.push_back({"landscape", "quantity",
                     [](RunConfig& c, const std::string& p, const std::string& v) {
                         c.landscape.quantity = keyed(p, [&] { return parse_landscape_quantity(v); });
                     },
                     [](const RunConfig& c) {
                         return std::optional<std::string>(landscape_quantity_name(c.landscape.quantity));
                     }});
        k.push_back(real_in("landscape", "x_min", &RunConfig::landscape, &LandscapeSpec::x_min));
        k.push_back(real_in("landscape", "x_max", &RunConfig::landscape, &LandscapeSpec::x_max));
        k.push_back(integer_in("landscape", "nx", &RunConfig::landscape, &LandscapeSpec::nx));
        k.push_back(real_in("landscape", "y_min", &RunConfig::landscape, &LandscapeSpec::y_min));
        k.push_back(real_in("landscape", "y_max", &RunConfig::landscape, &LandscapeSpec::y_max));
        k.push_back(integer_in("landscape", "ny", &RunConfig::landscape, &LandscapeSpec::ny));

        k.push_back(real_in("solver", "lambda", &RunConfig::solver, &SolverOptions::lambda));
        k.push_back(real_in("solver", "tol", &RunConfig::solver, &SolverOptions::tol));
        k.push_back(integer_in("solver", "max_iter", &RunConfig::solver, &SolverOptions::max_iter));
        k.push_back(integer_in("solver", "n_fock", &RunConfig::solver, &SolverOptions::n_fock));
        k.push_back(flag_in("solver", "n_res_feedback", &RunConfig::solver, &SolverOptions::n_res_feedback));
        k.push_back(flag_in("solver", "derivative_terms", &RunConfig::solver, &SolverOptions::derivative_terms));
        k.push_back({"solver", "theory",
                     [](RunConfig& c, const std::string& p, const std::string& v) {
                         c.solver.theory = keyed(p, [&] { return parse_theory(v); });
                     },
                     [](const RunConfig& c) { return std::optional<std::string>(theory_name(c.solver.theory)); }});

        k.push_back({"output", "dir",
                     [](RunConfig& c, const std::string&, const std::string& v) { c.out_dir = v; },
                     [](const RunConfig& c) { return std::optional<std::string>(c.out_dir); }});
        // landscape.rates mirrors solver.derivative_terms; kept in sync after parsing
        return k;
    }();
    return keys;
}

const std::set<std::string>& sections()
{
    static const std::set<std::string> s = {"system", "bath", "sweep", "landscape", "solver", "output"};
    return s;
}

void validate_config(const RunConfig& c)
{
    auto wrap = [](const char* key, auto&& f) {
        try {
            f();
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError(key, e.what());
        }
    };
    if (std::holds_alternative<Tabulated>(c.bath.variant) && c.bath_file.empty())
        throw ConfigError("bath.file", "required for bath.type = tabulated");
    wrap("system", [&] { validate(c.system); });
    wrap("bath", [&] { validate(c.bath); });
    wrap("sweep", [&] { validate(c.sweep); });
    if (!(c.solver.lambda > 0.0 && c.solver.lambda <= 1.0)) throw ConfigError("solver.lambda", "must be in (0, 1]");
    if (!(c.solver.tol > 0.0)) throw ConfigError("solver.tol", "must be > 0");
    if (c.solver.max_iter < 1) throw ConfigError("solver.max_iter", "must be >= 1");
    if (c.solver.n_fock < 2) throw ConfigError("solver.n_fock", "must be >= 2");
    if (!(c.T_low >= 0.0)) throw ConfigError("sweep.T_low", "must be >= 0");
    if (!(c.T_high >= 0.0)) throw ConfigError("sweep.T_high", "must be >= 0");
    if (c.landscape.nx < 2) throw ConfigError("landscape.nx", "must be >= 2");
    if (c.landscape.ny < 2) throw ConfigError("landscape.ny", "must be >= 2");
    if (c.out_dir.empty()) throw ConfigError("output.dir", "must not be empty");
}

void write_file(const std::filesystem::path& p, const std::function<void(std::ostream&)>& f)
{
    std::ofstream os(p);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    f(os);
    if (!os) throw std::runtime_error("write failed for " + p.string());
    spdlog::info("wrote {}", p.string());
}

std::vector<std::string> preamble_of(const RunConfig& c)
{
    std::vector<std::string> out;
    std::istringstream is(emit(c));
    for (std::string l; std::getline(is, l);)
        if (!l.empty()) out.push_back(l);
    return out;
}

}  // namespace

std::vector<std::string> required_keys(Command c)
{
    switch (c) {
    case Command::gain_sweep: return {"system.g", "system.Delta_q", "bath.type", "bath.T"};
    case Command::landscape: return {"system.g", "bath.type", "bath.T"};
    case Command::verify:
        return {"system.g", "system.Delta_q", "system.eps_q", "system.eps_d", "bath.type", "bath.T"};
    case Command::rates_dump: return {"system.g", "system.Delta_q", "bath.type", "bath.T"};
    default: return {};
    }
}

const char* command_name(Command c)
{
    switch (c) {
    case Command::gain_sweep: return "gain-sweep";
    case Command::fig2: return "fig2";
    case Command::landscape: return "landscape";
    case Command::high_t: return "high-T";
    case Command::verify: return "verify";
    default: return "rates-dump";
    }
}

Command parse_command(const std::string& s)
{
    for (Command c : {Command::gain_sweep, Command::fig2, Command::landscape, Command::high_t,
                      Command::verify, Command::rates_dump})
        if (s == command_name(c)) return c;
    throw std::invalid_argument("unknown command '" + s +
                                "' (gain-sweep|fig2|landscape|high-T|verify|rates-dump)");
}

MeanfieldOptions RunConfig::meanfield() const
{
    MeanfieldOptions o;
    o.theory = solver.theory;
    o.rates.derivative_terms = solver.derivative_terms;
    o.lead_source = lead_source;
    o.lambda = solver.lambda;
    o.tol = solver.tol;
    o.max_iter = solver.max_iter;
    o.n_res_feedback = solver.n_res_feedback;
    return o;
}

RunConfig default_config(Command cmd)
{
    RunConfig c;
    c.command = cmd;
    if (cmd == Command::fig2 || cmd == Command::high_t) {
        c.system = fig2_system();
        c.bath = fig2_bath(7.8);
        c.sweep = fig2_sweep();
    }
    if (cmd == Command::landscape) {
        c.system.omega_d = c.system.omega_r;
        c.bath.T = 0.0;
    }
    return c;
}

RunConfig parse_config_text(const std::string& text, std::optional<Command> fallback)
{
    // inline comments: ';' or '#' preceded by whitespace
    std::string clean;
    {
        std::istringstream raw(text);
        for (std::string l; std::getline(raw, l);) {
            for (std::size_t k = 1; k < l.size(); ++k)
                if ((l[k] == ';' || l[k] == '#') && (l[k - 1] == ' ' || l[k - 1] == '\t')) {
                    l.erase(k);
                    break;
                }
            clean += l;
            clean += '\n';
        }
    }
    pt::ptree tree;
    try {
        std::istringstream is(clean);
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("config", fmt::format("line {}: {}", e.line(), e.message()));
    }

    std::optional<Command> cmd;
    for (const auto& [name, node] : tree) {
        if (node.empty() && sections().count(name) == 0) {
            if (name != "command") throw ConfigError(name, "unknown top-level key");
            cmd = keyed("command", [&] { return parse_command(node.data()); });
            continue;
        }
        if (sections().count(name) == 0) throw ConfigError(name, "unknown section");
    }
    if (cmd && fallback && *cmd != *fallback)
        throw ConfigError("command", fmt::format("config says '{}' but '{}' was requested",
                                                 command_name(*cmd), command_name(*fallback)));
    if (!cmd) cmd = fallback;
    if (!cmd) throw ConfigError("command", "missing");

    RunConfig c = default_config(*cmd);
    std::set<std::string> given;
    for (const auto& [sec, node] : tree) {
        if (sections().count(sec) == 0) continue;
        for (const auto& [name, leaf] : node) {
            const std::string path = sec + "." + name;
            if (!leaf.empty()) throw ConfigError(path, "nested keys are not allowed");
            const bool known = std::any_of(registry().begin(), registry().end(),
                                           [&](const Key& k) { return k.path() == path; });
            if (!known) throw ConfigError(path, "unknown key");
            if (!given.insert(path).second) throw ConfigError(path, "duplicate key");
        }
    }
    for (const auto& k : registry()) {
        if (given.count(k.path())) {
            k.set(c, k.path(), tree.get_child(pt::ptree::path_type(k.path(), '.')).data());
        }
    }
    for (const auto& r : required_keys(*cmd))
        if (!given.count(r)) throw ConfigError(r, std::string("required for command ") + command_name(*cmd));
    c.landscape.rates.derivative_terms = c.solver.derivative_terms;
    validate_config(c);

    for (const auto& k : registry())
        if (!given.count(k.path()))
            if (auto v = k.get(c)) spdlog::info("default {} = {}", k.path(), *v);
    return c;
}

RunConfig parse_config(const std::string& path, std::optional<Command> fallback)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), fallback);
}

std::string emit(const RunConfig& c)
{
    std::ostringstream os;
    os << "command = " << command_name(c.command) << '\n';
    std::string sec;
    for (const auto& k : registry()) {
        const auto v = k.get(c);
        if (!v) continue;
        if (k.section != sec) {
            sec = k.section;
            os << "\n[" << sec << "]\n";
        }
        os << k.name << " = " << *v << '\n';
    }
    return os.str();
}

int dispatch(const RunConfig& c, int jobs)
{
    namespace fs = std::filesystem;
    const fs::path dir(c.out_dir);
    fs::create_directories(dir);
    write_file(dir / "effective.ini", [&](std::ostream& os) { os << emit(c); });
    const auto pre = preamble_of(c);
    const auto mf = c.meanfield();
    int status = 0;

    auto sweep_status = [](const SweepResult& r) {
        if (r.missing() == 0) return 0;
        for (const auto& p : r.points)
            if (!p.ok) spdlog::warn("eps_q = {}: {}", p.eps_q, p.error);
        return 2;
    };

    switch (c.command) {
    case Command::gain_sweep: {
        const auto r = run_gain_sweep(c.sweep, c.system, c.bath, mf, jobs);
        write_file(dir / fmt::format("gain_{}.csv", theory_name(c.sweep.variant)),
                   [&](std::ostream& os) { write_sweep_csv(os, r, pre); });
        status = sweep_status(r);
        break;
    }
    case Command::fig2: {
        const auto r = run_fig2(c.system, c.bath, c.sweep, mf, jobs);
        for (const SweepResult* s : {&r.polaron, &r.dominant6, &r.full21}) {
            write_file(dir / fmt::format("gain_{}.csv", theory_name(s->spec.variant)),
                       [&](std::ostream& os) { write_sweep_csv(os, *s, pre); });
            status = std::max(status, sweep_status(*s));
        }
        write_file(dir / "rates_sigmaz.csv", [&](std::ostream& os) { write_fig2_csv(os, r, pre); });
        break;
    }
    case Command::landscape: {
        const auto r = run_rate_landscape(c.landscape, c.system, c.bath);
        write_file(dir / fmt::format("landscape_{}.csv", landscape_quantity_name(c.landscape.quantity)),
                   [&](std::ostream& os) { write_landscape_csv(os, r, pre); });
        if (r.masked) spdlog::warn("landscape: {} cells masked by the resonance guard", r.masked);
        status = r.masked ? 2 : 0;
        break;
    }
    case Command::high_t: {
        const auto r = run_high_temperature_compare(c.system, c.bath, c.sweep, c.T_low, c.T_high, mf, jobs);
        write_file(dir / "high_t.csv", [&](std::ostream& os) { write_high_t_csv(os, r, pre); });
        status = std::max(sweep_status(r.low), sweep_status(r.high));
        break;
    }
    case Command::verify: {
        const auto v = meanfield_vs_exact(c.system, c.bath, c.solver.n_fock, mf);
        write_file(dir / "verify.csv", [&](std::ostream& os) {
            for (const auto& l : pre) os << "# " << l << '\n';
            os << "alpha_exact_re,alpha_exact_im,alpha_mf_re,alpha_mf_im,alpha_rel_dev,P_e_exact,"
                  "P_e_mf,P_e_abs_dev,leakage,truncation_warning,iterations,converged\n";
            os << csv_number(v.alpha_exact.real()) << ',' << csv_number(v.alpha_exact.imag()) << ','
               << csv_number(v.alpha_mf.real()) << ',' << csv_number(v.alpha_mf.imag()) << ','
               << csv_number(v.alpha_rel_dev) << ',' << csv_number(v.P_e_exact) << ','
               << csv_number(v.P_e_mf) << ',' << csv_number(v.P_e_abs_dev) << ','
               << csv_number(v.leakage) << ',' << (v.truncation_warning ? 1 : 0) << ','
               << v.report.iterations << ',' << (v.report.converged ? 1 : 0) << '\n';
        });
        spdlog::info("verify: |<a> - alpha|/|alpha| = {:.3e}, |dP_e| = {:.3e}", v.alpha_rel_dev, v.P_e_abs_dev);
        status = v.truncation_warning ? 2 : 0;
        break;
    }
    case Command::rates_dump: {
        const auto eps = linspace(c.sweep.eps_min, c.sweep.eps_max, c.sweep.count);
        std::vector<RateRow> rows;
        const RateOptions ro{c.solver.derivative_terms};
        for (double e : eps) {
            SystemParams q = c.system;
            q.eps_q = e;
            try {
                resonance_guard(q);
                rows.push_back(rate_row(q, c.bath, ro));
            } catch (const std::exception& ex) {
                spdlog::warn("rates-dump: eps_q = {} skipped: {}", e, ex.what());
                status = 2;
            }
        }
        write_file(dir / "rates.csv", [&](std::ostream& os) { write_rates_csv(os, rows, pre); });
        break;
    }
    }
    return status;
}

}  // namespace kl
