// test_config.cpp — strict config parsing, effective-config echo, dispatch and the CLI binary
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "kl/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <algorithm>
#include <map>
#include <sstream>
#include <string>
#include <sys/wait.h>

using namespace kl;
namespace fs = std::filesystem;

namespace {

std::string error_key(const std::string& text)
{
    try {
        parse_config_text(text);
    } catch (const ConfigError& e) {
        return e.key();
    }
    return "";
}

fs::path scratch(const std::string& name)
{
    const auto p = fs::temp_directory_path() / ("kl_test_config_" + name);
    fs::remove_all(p);
    return p;
}

std::vector<std::string> data_lines(const fs::path& p)
{
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);)
        if (!l.empty() && l[0] != '#') out.push_back(l);
    return out;
}

std::vector<std::string> split(const std::string& l)
{
    std::vector<std::string> out;
    std::stringstream ss(l);
    for (std::string c; std::getline(ss, c, ',');) out.push_back(c);
    return out;
}

int run_cli(const std::string& args)
{
    const std::string cmd = std::string(KL_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

const char* kGainSweep = R"(command = gain-sweep
[system]
g = 0.0125
Delta_q = 3
[bath]
type = ohmic
T = 0.2
)";

}  // namespace

TEST_CASE("minimal fig2 config applies the reference defaults")
{
    const auto c = parse_config_text("command = fig2\n");
    CHECK(c.command == Command::fig2);
    CHECK(c.system == fig2_system());
    CHECK(c.bath == fig2_bath(7.8));
    CHECK(c.sweep == fig2_sweep());
    CHECK(c.system.g == 0.0125);
    CHECK(c.system.kappa_minus_r == 52e-6);
    CHECK(c.sweep.w == 1.7);
    CHECK(c.sweep.count == 401);
    const auto& pz = std::get<Piezo>(c.bath.variant);
    CHECK(pz.F == 2.9);
    CHECK(pz.P == 0.25);
}

TEST_CASE("inline comments are stripped")
{
    const auto c = parse_config_text("command = fig2 ; the reference run\n[bath]\nT = 23.4   # hotter\n"
                                     "[output]\ndir = out#1\n");
    CHECK(c.bath.T == 23.4);
    CHECK(c.out_dir == "out#1");
}

TEST_CASE("command from the fallback and conflicts")
{
    CHECK(parse_config_text("", Command::fig2).command == Command::fig2);
    CHECK(error_key("") == "command");
    CHECK(error_key("command = nonsense\n") == "command");
    CHECK_THROWS_AS(parse_config_text("command = fig2\n", Command::verify), ConfigError);
}

TEST_CASE("required keys are named in the error")
{
    std::string t = kGainSweep;
    t.erase(t.find("g = 0.0125\n"), 11);
    CHECK(error_key(t) == "system.g");
    CHECK(parse_config_text(kGainSweep).system.g == 0.0125);
    CHECK(error_key("command = verify\n[system]\ng = 0\n") == "system.Delta_q");
}

TEST_CASE("strict parsing: unknown keys, sections, types, duplicates")
{
    std::string t = kGainSweep;
    t.insert(t.find("Delta_q"), "foo = 1\n");
    CHECK(error_key(t) == "system.foo");
    CHECK(error_key(std::string(kGainSweep) + "[plots]\nx = 1\n") == "plots");
    CHECK(error_key("command = fig2\ncolour = red\n") == "colour");
    CHECK(error_key("command = fig2\n[sweep]\ncount = many\n") == "sweep.count");
    CHECK(error_key("command = fig2\n[sweep]\ncount = 2.5\n") == "sweep.count");
    CHECK(error_key("command = fig2\n[system]\ng = 0.1x\n") == "system.g");
    CHECK(error_key("command = fig2\n[solver]\nn_res_feedback = maybe\n") == "solver.n_res_feedback");
    CHECK(error_key("command = fig2\n[sweep]\nvariant = quartic\n") == "sweep.variant");
    CHECK(error_key("command = fig2\n[bath]\nF = 1\namplitude = 2\n") == "bath.amplitude");
    CHECK(error_key("command = fig2\n[bath]\ntype = tabulated\n") == "bath.file");
    CHECK(error_key("command = fig2\n[solver]\nlambda = 0\n") == "solver.lambda");
    CHECK(error_key("command = fig2\n[sweep]\nw = -1\n") == "sweep");
    CHECK(error_key("command = fig2\n[output]\ndir =\n") == "output.dir");
    CHECK_THROWS_AS(parse_config_text("command = fig2\n[sweep]\nw = 1\nw = 2\n"), ConfigError);
}

TEST_CASE("emit round trip for every command and bath type")
{
    for (Command cmd : {Command::gain_sweep, Command::fig2, Command::landscape, Command::high_t,
                        Command::verify, Command::rates_dump}) {
        RunConfig c = default_config(cmd);
        c.system.g = 0.0125 / 3.0;
        c.system.Delta_q = 2.7;
        c.system.eps_d = 1e-3;
        c.bath.T = 0.1 + 1e-17;
        c.bath.c0_override = 0.3;
        c.lead_source = LeadSource::left;
        c.solver.n_res_feedback = true;
        c.solver.derivative_terms = false;
        c.landscape.rates.derivative_terms = false;
        c.landscape.quantity = LandscapeQuantity::phi4;
        c.sweep.variant = Theory::dominant6;
        c.T_high = 1.0 / 7.0;
        const auto back = parse_config_text(emit(c));
        CHECK(back == c);
        CHECK(emit(back) == emit(c));
    }
    RunConfig o = default_config(Command::verify);
    o.bath.variant = Ohmic{0.37};
    CHECK(parse_config_text(emit(o)) == o);
}

TEST_CASE("round trip with a tabulated bath file")
{
    const auto dir = scratch("tab");
    fs::create_directories(dir);
    const auto f = dir / "J.txt";
    {
        std::ofstream os(f);
        for (int i = 0; i <= 40; ++i) os << 0.25 * i << " " << 0.25 * i << "\n";
    }
    std::string text = kGainSweep;
    text.replace(text.find("type = ohmic"), 12, "type = tabulated\nfile = " + f.string());
    const auto c = parse_config_text(text);
    CHECK(c.bath_file == f.string());
    const auto back = parse_config_text(emit(c));
    CHECK(back.bath_file == c.bath_file);
    CHECK(std::get<Tabulated>(back.bath.variant).J(1.3) == doctest::Approx(1.3));
    CHECK(error_key("command = fig2\n[bath]\ntype = tabulated\nfile = /no/such/file\n") == "bath.file");
    fs::remove_all(dir);
}

TEST_CASE("dispatch verify at g = 0: zero deviation, exit 0")
{
    const auto dir = scratch("verify");
    auto c = parse_config_text(
        "command = verify\n[system]\ng = 0\nDelta_q = 3\neps_q = 2\neps_d = 5e-3\nkappa_minus_r = 1e-2\n"
        "Gamma_L = 0\nGamma_R = 0\n[bath]\ntype = ohmic\nT = 0.2\n[solver]\nn_fock = 14\n[output]\ndir = " +
        dir.string() + "\n");
    CHECK(dispatch(c) == 0);
    const auto rows = data_lines(dir / "verify.csv");
    REQUIRE(rows.size() == 2);
    const auto head = split(rows[0]);
    const auto vals = split(rows[1]);
    std::map<std::string, double> v;
    for (std::size_t k = 0; k < head.size(); ++k) v[head[k]] = std::stod(vals[k]);
    // at g = 0 only the Fock cut-off separates the two; it is negligible by N = 14
    CHECK(v["alpha_rel_dev"] <= 1e-12);
    CHECK(v["P_e_abs_dev"] <= 1e-12);
    CHECK(fs::exists(dir / "effective.ini"));
    fs::remove_all(dir);
}

TEST_CASE("dispatch rates-dump at theta = 0: sin^2 columns vanish")
{
    const auto dir = scratch("rates");
    const auto c = parse_config_text(
        "command = rates-dump\n[system]\ng = 0.0125\nDelta_q = 0\neps_q = 2\n[bath]\ntype = piezo\nT = 7.8\n"
        "[sweep]\neps_min = 1.5\neps_max = 6\ncount = 7\n[output]\ndir = " + dir.string() + "\n");
    CHECK(dispatch(c) == 0);
    const auto rows = data_lines(dir / "rates.csv");
    REQUIRE(rows.size() == 8);
    const auto head = split(rows[0]);
    std::vector<std::string> zero = {"theta", "gamma_down_2", "gamma_up_2", "chi", "chi_tilde",
                                     "gamma_down_plus", "gamma_down_minus", "gamma_up_minus",
                                     "gamma_up_plus", "gamma_phi_minus", "gamma_phi_plus",
                                     "kappa_phi", "kappa_p", "kappa_m"};
    for (int j = 5; j <= 28; ++j) zero.push_back("c" + std::to_string(j));
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto vals = split(rows[r]);
        REQUIRE(vals.size() == head.size());
        for (const auto& z : zero) {
            const auto it = std::find(head.begin(), head.end(), z);
            REQUIRE(it != head.end());
            CHECK(std::stod(vals[it - head.begin()]) == 0.0);
        }
    }
    fs::remove_all(dir);
}

TEST_CASE("dispatch fig2 writes four CSVs with headers and an effective config")
{
    const auto dir = scratch("fig2");
    auto c = default_config(Command::fig2);
    c.sweep.count = 41;
    c.out_dir = dir.string();
    CHECK(dispatch(c, 2) == 0);
    int csv = 0;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".csv") ++csv;
    CHECK(csv == 4);
    for (const char* n : {"gain_polaron.csv", "gain_dominant6.csv", "gain_full21.csv"}) {
        const auto rows = data_lines(dir / n);
        REQUIRE(rows.size() == 42);
        CHECK(rows[0].rfind("eps_q,G_raw,G_smooth,", 0) == 0);
    }
    const auto rs = data_lines(dir / "rates_sigmaz.csv");
    REQUIRE(rs.size() == 42);
    CHECK(rs[0] == "eps_q,gamma_down_plus,gamma_down_minus,gamma_phi_minus,sigma_z_ss,sigma_z_th");

    // the echo reproduces the run
    CHECK(parse_config((dir / "effective.ini").string()) == c);
    std::ifstream in(dir / "gain_full21.csv");
    std::string first;
    std::getline(in, first);
    CHECK(first == "# command = fig2");
    fs::remove_all(dir);
}

TEST_CASE("dispatch exits 2 on partial results")
{
    const auto dir = scratch("partial");
    std::string t = kGainSweep;
    t.replace(t.find("Delta_q = 3"), 11, "Delta_q = 1");
    t += "[sweep]\neps_min = -1\neps_max = 1\ncount = 5\n[output]\ndir = " + dir.string() + "\n";
    CHECK(dispatch(parse_config_text(t)) == 2);
    CHECK(fs::exists(dir / "gain_full21.csv"));

    const auto l = parse_config_text("command = landscape\n[system]\ng = 0.01\n[bath]\ntype = ohmic\nT = 0\n"
                                     "[landscape]\nx_min = 0.5\nx_max = 1.5\nnx = 3\nny = 3\n[output]\ndir = " +
                                     dir.string() + "\n");
    CHECK(dispatch(l) == 2);
    fs::remove_all(dir);
}

TEST_CASE("CLI binary: exit codes and flags")
{
    const auto dir = scratch("cli");
    fs::create_directories(dir);
    const auto cfg = dir / "run.ini";
    {
        std::ofstream os(cfg);
        os << kGainSweep << "[sweep]\ncount = 11\n";
    }
    const std::string out = " --out " + (dir / "out").string();
    CHECK(run_cli("--config " + cfg.string() + out) == 0);
    CHECK(fs::exists(dir / "out" / "gain_full21.csv"));
    CHECK(run_cli("--config " + cfg.string() + out + " --variant polaron --jobs 2 --no-derivative-terms") == 0);
    CHECK(fs::exists(dir / "out" / "gain_polaron.csv"));
    const auto eff = parse_config((dir / "out" / "effective.ini").string());
    CHECK(eff.sweep.variant == Theory::polaron);
    CHECK_FALSE(eff.solver.derivative_terms);

    CHECK(run_cli("gain-sweep" + out) == 1);             // system.g required
    CHECK(run_cli("--config /no/such/file.ini") != 0);
    {
        std::ofstream os(cfg);
        std::string t = kGainSweep;
        t.insert(t.find("Delta_q"), "bogus = 1\n");
        os << t;
    }
    CHECK(run_cli("--config " + cfg.string() + out) == 1);
    CHECK(run_cli("rates-dump --config " + cfg.string() + out) == 1);
    CHECK(run_cli("--variant quartic") != 0);
    fs::remove_all(dir);
}
