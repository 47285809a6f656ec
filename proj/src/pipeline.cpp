// pipeline.cpp — sweeps, smoothing, landscapes, figure runs and CSV output
#include "kl/pipeline.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <mutex>
#include <thread>

namespace kl {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void write_preamble(std::ostream& os, const std::vector<std::string>& pre)
{
    for (const auto& l : pre) os << "# " << l << '\n';
}

void write_row(std::ostream& os, const std::vector<std::string>& cells)
{
    for (std::size_t k = 0; k < cells.size(); ++k) {
        if (k) os << ',';
        const auto& c = cells[k];
        if (c.find_first_of(",\"\n") != std::string::npos) {
            os << '"';
            for (char ch : c) os << (ch == '"' ? "\"\"" : std::string(1, ch));
            os << '"';
        } else {
            os << c;
        }
    }
    os << '\n';
}

}  // namespace

std::string csv_number(double v)
{
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return fmt::format("{:.17g}", v);
}

void parallel_for(int n, int jobs, const std::function<void(int)>& f)
{
    jobs = std::max(1, std::min(jobs, n));
    if (jobs == 1) {
        for (int i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr err;
    std::mutex m;
    for (int t = 0; t < jobs; ++t)
        pool.emplace_back([&] {
            for (int i; (i = next.fetch_add(1)) < n;) {
                try {
                    f(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lk(m);
                    if (!err) err = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

std::vector<double> linspace(double a, double b, int n)
{
    if (n < 2) throw std::invalid_argument("linspace: need at least 2 points");
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i) x[i] = a + (b - a) * double(i) / double(n - 1);
    x.back() = b;
    return x;
}

std::vector<double> gaussian_smooth(const std::vector<double>& x, const std::vector<double>& y, double w)
{
    if (x.size() != y.size()) throw std::invalid_argument("gaussian_smooth: size mismatch");
    if (!(w >= 0.0)) throw std::invalid_argument("gaussian_smooth: w must be >= 0");
    if (w == 0.0) return y;
    const std::size_t n = x.size();
    std::vector<double> out(n, kNaN);
    for (std::size_t i = 0; i < n; ++i) {
        double num = 0.0, den = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (std::isnan(y[j])) continue;
            const double u = (x[j] - x[i]) / w;
            const double k = std::exp(-0.5 * u * u);
            num += k * y[j];
            den += k;
        }
        if (den > 0.0) out[i] = num / den;
    }
    return out;
}

void validate(const SweepSpec& s)
{
    if (s.count < 2) throw std::invalid_argument("sweep.count must be >= 2");
    if (!(s.eps_max > s.eps_min)) throw std::invalid_argument("sweep.eps_max must exceed sweep.eps_min");
    if (!(s.w >= 0.0)) throw std::invalid_argument("sweep.w must be >= 0");
}

int SweepResult::missing() const
{
    return int(std::count_if(points.begin(), points.end(), [](const SweepPoint& p) { return !p.ok; }));
}

SweepResult run_gain_sweep(const SweepSpec& spec, const SystemParams& p, const BathModel& bath,
                           const MeanfieldOptions& opt, int jobs)
{
    validate(spec);
    validate(p);
    validate(bath);
    SweepResult r;
    r.spec = spec;
    r.edge_flag = spec.eps_max - spec.eps_min < 8.0 * spec.w;
    const auto eps = linspace(spec.eps_min, spec.eps_max, spec.count);
    r.points.resize(eps.size());
    MeanfieldOptions o = opt;
    o.theory = spec.variant;

    parallel_for(int(eps.size()), jobs, [&](int i) {
        auto& pt = r.points[i];
        pt.eps_q = eps[i];
        pt.G_raw = kNaN;
        SystemParams q = p;
        q.eps_q = eps[i];
        try {
            pt.report = solve_coupled(q, bath, o);
            if (pt.report.converged) {
                pt.G_raw = pt.report.G;
                pt.ok = true;
            } else {
                pt.error = pt.report.message;
            }
        } catch (const std::exception& e) {
            pt.error = e.what();
        }
    });

    std::vector<double> g(eps.size());
    for (std::size_t i = 0; i < eps.size(); ++i) g[i] = r.points[i].G_raw;
    const auto gs = gaussian_smooth(eps, g, spec.w);
    for (std::size_t i = 0; i < eps.size(); ++i) r.points[i].G_smooth = gs[i];
    if (const int m = r.missing())
        spdlog::warn("gain sweep ({}): {} of {} points missing", theory_name(spec.variant), m, spec.count);
    return r;
}

const char* landscape_quantity_name(LandscapeQuantity q)
{
    switch (q) {
    case LandscapeQuantity::kappa4: return "kappa4";
    case LandscapeQuantity::gamma4: return "gamma4";
    default: return "phi4";
    }
}

LandscapeQuantity parse_landscape_quantity(const std::string& s)
{
    if (s == "kappa4") return LandscapeQuantity::kappa4;
    if (s == "gamma4") return LandscapeQuantity::gamma4;
    if (s == "phi4") return LandscapeQuantity::phi4;
    throw std::invalid_argument("unknown landscape quantity '" + s + "' (kappa4|gamma4|phi4)");
}

const char* landscape_axes_name(LandscapeAxes a)
{
    return a == LandscapeAxes::omega_theta ? "omega_theta" : "eps_delta";
}

LandscapeAxes parse_landscape_axes(const std::string& s)
{
    if (s == "omega_theta") return LandscapeAxes::omega_theta;
    if (s == "eps_delta") return LandscapeAxes::eps_delta;
    throw std::invalid_argument("unknown landscape axes '" + s + "' (omega_theta|eps_delta)");
}

LandscapeResult run_rate_landscape(const LandscapeSpec& spec, const SystemParams& p,
                                   const BathModel& bath)
{
    if (spec.nx < 2 || spec.ny < 2) throw std::invalid_argument("landscape: nx, ny must be >= 2");
    validate(bath);
    if (!(p.g > 0.0)) throw std::invalid_argument("landscape: system.g must be > 0 (surfaces are /g^2)");
    LandscapeResult r;
    r.spec = spec;
    r.x = linspace(spec.x_min, spec.x_max, spec.nx);
    r.y = linspace(spec.y_min, spec.y_max, spec.ny);
    r.resonance_omega_q = p.omega_r;

    std::vector<std::string> names;
    switch (spec.quantity) {
    case LandscapeQuantity::kappa4:
        names = {"kappa_minus_4_ground", "kappa_minus_4_excited", "kappa_plus_4_ground",
                 "kappa_plus_4_excited"};
        break;
    case LandscapeQuantity::gamma4:
        names = {"gamma_down_4_alpha0", "gamma_down_4_per_alpha2", "gamma_up_4_alpha0",
                 "gamma_up_4_per_alpha2"};
        break;
    case LandscapeQuantity::phi4: names = {"gamma_phi_4_alpha0", "gamma_phi_4_per_alpha2"}; break;
    }
    for (const auto& n : names)
        r.panels.push_back({n, Eigen::MatrixXd::Constant(spec.ny, spec.nx, kNaN)});

    const double g2 = p.g * p.g;
    for (int iy = 0; iy < spec.ny; ++iy) {
        for (int ix = 0; ix < spec.nx; ++ix) {
            SystemParams q = p;
            if (spec.axes == LandscapeAxes::omega_theta) {
                q.eps_q = r.x[ix] * std::cos(r.y[iy]);
                q.Delta_q = r.x[ix] * std::sin(r.y[iy]);
            } else {
                q.eps_q = r.x[ix];
                q.Delta_q = r.y[iy];
            }
            std::vector<double> v;
            try {
                resonance_guard(q);
                switch (spec.quantity) {
                case LandscapeQuantity::kappa4: {
                    const auto kg = effective_kappa(q, bath, Populations{0, 1, 0}, Theory::full21, spec.rates);
                    const auto ke = effective_kappa(q, bath, Populations{1, 0, 0}, Theory::full21, spec.rates);
                    v = {kg.minus, ke.minus, kg.plus, ke.plus};
                    break;
                }
                case LandscapeQuantity::gamma4:
                case LandscapeQuantity::phi4: {
                    const auto e0 = effective_gamma(q, bath, 0.0, 0.0, Theory::full21, spec.rates);
                    const auto e1 = effective_gamma(q, bath, 1.0, 0.0, Theory::full21, spec.rates);
                    if (spec.quantity == LandscapeQuantity::gamma4)
                        v = {e0.down, e1.down - e0.down, e0.up, e1.up - e0.up};
                    else
                        v = {e0.phi, e1.phi - e0.phi};
                    break;
                }
                }
            } catch (const std::domain_error&) {
                ++r.masked;
                continue;
            }
            for (std::size_t k = 0; k < v.size(); ++k) r.panels[k].values(iy, ix) = v[k] / g2;
        }
    }
    return r;
}

SystemParams fig2_system()
{
    SystemParams p;
    p.Delta_q = 3.0;
    p.g = 0.0125;
    p.omega_r = 1.0;
    p.omega_d = 1.0;
    p.kappa_minus_r = 52e-6;
    p.kappa_plus_r = 0.0;
    p.Gamma_L = p.Gamma_R = 0.34;
    p.eps_d = 1e-6;
    return p;
}

BathModel fig2_bath(double T)
{
    BathModel b;
    Piezo pz;
    pz.F = 2.9;
    pz.P = 0.25;
    b.variant = pz;
    b.T = T;
    return b;
}

SweepSpec fig2_sweep(Theory variant)
{
    SweepSpec s;
    s.variant = variant;
    return s;
}

double thermal_sigma_z(const SystemParams& p, double T)
{
    const double w = p.omega_q();
    if (T == 0.0) return 1.0;
    return std::tanh(w / (2.0 * T));
}

Fig2Result run_fig2(const SystemParams& p, const BathModel& bath, const SweepSpec& spec,
                    const MeanfieldOptions& opt, int jobs)
{
    Fig2Result r;
    SweepSpec s = spec;
    s.variant = Theory::polaron;
    r.polaron = run_gain_sweep(s, p, bath, opt, jobs);
    s.variant = Theory::dominant6;
    r.dominant6 = run_gain_sweep(s, p, bath, opt, jobs);
    s.variant = Theory::full21;
    r.full21 = run_gain_sweep(s, p, bath, opt, jobs);
    r.eps = linspace(spec.eps_min, spec.eps_max, spec.count);
    for (std::size_t i = 0; i < r.eps.size(); ++i) {
        SystemParams q = p;
        q.eps_q = r.eps[i];
        r.rates.push_back(dominant_rates(q, bath));
        const auto& pt = r.full21.points[i];
        r.sigma_z_ss.push_back(pt.ok ? pt.report.qubit.sigma_z() : kNaN);
        r.sigma_z_th.push_back(thermal_sigma_z(q, bath.T));
    }
    return r;
}

HighTResult run_high_temperature_compare(const SystemParams& p, const BathModel& bath,
                                         const SweepSpec& spec, double T_low, double T_high,
                                         const MeanfieldOptions& opt, int jobs)
{
    HighTResult r{T_low, T_high, {}, {}};
    SweepSpec s = spec;
    s.variant = Theory::full21;
    BathModel b = bath;
    b.T = T_low;
    r.low = run_gain_sweep(s, p, b, opt, jobs);
    b.T = T_high;
    r.high = run_gain_sweep(s, p, b, opt, jobs);
    return r;
}

double loss_half_depth_edge(const SweepResult& r)
{
    double gmin = std::numeric_limits<double>::infinity();
    for (const auto& pt : r.points)
        if (!std::isnan(pt.G_smooth)) gmin = std::min(gmin, pt.G_smooth);
    if (!(gmin < 1.0)) return kNaN;
    const double level = 1.0 - 0.5 * (1.0 - gmin);
    for (const auto& pt : r.points)
        if (!std::isnan(pt.G_smooth) && pt.G_smooth < level) return pt.eps_q;
    return kNaN;
}

void write_sweep_csv(std::ostream& os, const SweepResult& r, const std::vector<std::string>& preamble)
{
    write_preamble(os, preamble);
    os << "# variant = " << theory_name(r.spec.variant) << "\n# w = " << csv_number(r.spec.w)
       << "\n# edge_flag = " << (r.edge_flag ? "true" : "false") << "\n# missing = " << r.missing()
       << '\n';
    write_row(os, {"eps_q", "G_raw", "G_smooth", "ok", "P_g", "P_e", "P_empty", "sigma_z",
                   "kappa_minus", "kappa_plus", "kappa_prime", "delta_prime", "alpha_re", "alpha_im",
                   "iterations", "converged", "error"});
    for (const auto& pt : r.points) {
        const auto& q = pt.report.qubit;
        const auto& f = pt.report.field;
        const bool have = pt.report.iterations > 0;
        auto num = [&](double v) { return have ? csv_number(v) : std::string("nan"); };
        write_row(os, {csv_number(pt.eps_q), csv_number(pt.G_raw), csv_number(pt.G_smooth),
                       pt.ok ? "1" : "0", num(q.P_g()), num(q.P_e()), num(q.P_empty()),
                       num(q.sigma_z()), num(f.kappa_minus), num(f.kappa_plus), num(f.kappa_prime),
                       num(f.delta_prime), num(f.alpha.real()), num(f.alpha.imag()),
                       std::to_string(pt.report.iterations), pt.report.converged ? "1" : "0",
                       pt.error});
    }
}

void write_fig2_csv(std::ostream& os, const Fig2Result& r, const std::vector<std::string>& preamble)
{
    write_preamble(os, preamble);
    write_row(os, {"eps_q", "gamma_down_plus", "gamma_down_minus", "gamma_phi_minus", "sigma_z_ss",
                   "sigma_z_th"});
    for (std::size_t i = 0; i < r.eps.size(); ++i)
        write_row(os, {csv_number(r.eps[i]), csv_number(r.rates[i].down_plus),
                       csv_number(r.rates[i].down_minus), csv_number(r.rates[i].phi_minus),
                       csv_number(r.sigma_z_ss[i]), csv_number(r.sigma_z_th[i])});
}

void write_landscape_csv(std::ostream& os, const LandscapeResult& r,
                         const std::vector<std::string>& preamble)
{
    write_preamble(os, preamble);
    const bool ot = r.spec.axes == LandscapeAxes::omega_theta;
    os << "# quantity = " << landscape_quantity_name(r.spec.quantity) << " (divided by g^2)\n"
       << "# resonance_omega_q = " << csv_number(r.resonance_omega_q) << "\n# masked = " << r.masked
       << '\n';
    std::vector<std::string> head = {ot ? "omega_q" : "eps_q", ot ? "theta" : "Delta_q"};
    for (const auto& pn : r.panels) head.push_back(pn.name);
    write_row(os, head);
    for (int iy = 0; iy < int(r.y.size()); ++iy)
        for (int ix = 0; ix < int(r.x.size()); ++ix) {
            std::vector<std::string> row = {csv_number(r.x[ix]), csv_number(r.y[iy])};
            for (const auto& pn : r.panels) row.push_back(csv_number(pn.values(iy, ix)));
            write_row(os, row);
        }
}

void write_high_t_csv(std::ostream& os, const HighTResult& r, const std::vector<std::string>& preamble)
{
    write_preamble(os, preamble);
    os << "# T_low = " << csv_number(r.T_low) << "\n# T_high = " << csv_number(r.T_high) << '\n';
    write_row(os, {"eps_q", "G_raw_low", "G_smooth_low", "G_raw_high", "G_smooth_high"});
    for (std::size_t i = 0; i < r.low.points.size(); ++i)
        write_row(os, {csv_number(r.low.points[i].eps_q), csv_number(r.low.points[i].G_raw),
                       csv_number(r.low.points[i].G_smooth), csv_number(r.high.points[i].G_raw),
                       csv_number(r.high.points[i].G_smooth)});
}

void write_rates_csv(std::ostream& os, const std::vector<RateRow>& rows,
                     const std::vector<std::string>& preamble)
{
    write_preamble(os, preamble);
    if (rows.empty()) return;
    write_row(os, rows.front().names);
    for (const auto& r : rows) {
        std::vector<std::string> cells;
        for (double v : r.values) cells.push_back(csv_number(v));
        write_row(os, cells);
    }
}

}  // namespace kl
