// rates.cpp — second-order rates, mixing coefficients, Gamma table, effective rates
#include "kl/rates.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace kl {

namespace {

constexpr double kResonanceTol = 1e-6;

// cos^2 and sin^2 of the mixing angle straight from (eps, Delta), so that
// the prefactors vanish exactly at eps = 0 or Delta = 0
struct Angles {
    double q, r, c2, s2;
};

Angles angles(const SystemParams& p)
{
    const double q = p.omega_q();
    const double e2 = p.eps_q * p.eps_q;
    const double d2 = p.Delta_q * p.Delta_q;
    return {q, p.omega_r, e2 / (e2 + d2), d2 / (e2 + d2)};
}

}  // namespace

double SystemParams::omega_q() const { return std::hypot(eps_q, Delta_q); }

double SystemParams::theta() const { return mixing(eps_q, Delta_q).theta; }

bool SystemParams::perturbative() const { return g < std::abs(omega_q() - omega_r); }

void validate(const SystemParams& p)
{
    auto finite = [](double x) { return std::isfinite(x); };
    if (!finite(p.eps_q) || !finite(p.Delta_q) || !finite(p.g) || !finite(p.eps_d) ||
        !finite(p.omega_d))
        throw std::invalid_argument("system: non-finite parameter");
    if (!(p.omega_r > 0.0)) throw std::invalid_argument("system.omega_r must be > 0");
    if (p.eps_q == 0.0 && p.Delta_q == 0.0)
        throw std::invalid_argument("system: degenerate qubit (eps_q = Delta_q = 0)");
    if (p.Delta_q < 0.0) throw std::invalid_argument("system.Delta_q must be >= 0");
    if (!(p.g >= 0.0)) throw std::invalid_argument("system.g must be >= 0");
    if (!(p.kappa_plus_r >= 0.0) || !(p.kappa_minus_r >= p.kappa_plus_r))
        throw std::invalid_argument("system: need kappa_minus_r >= kappa_plus_r >= 0");
    if (!(p.Gamma_L >= 0.0) || !(p.Gamma_R >= 0.0))
        throw std::invalid_argument("system: lead rates must be >= 0");
}

Mixing mixing(double eps_q, double Delta_q)
{
    if (eps_q == 0.0 && Delta_q == 0.0)
        throw std::invalid_argument("mixing: degenerate qubit (eps_q = Delta_q = 0)");
    double th = std::atan2(Delta_q, eps_q);
    if (th < 0.0) th += std::numbers::pi;
    if (th >= std::numbers::pi) th -= std::numbers::pi;
    return {std::hypot(eps_q, Delta_q), th};
}

const char* theory_name(Theory t)
{
    switch (t) {
    case Theory::polaron: return "polaron";
    case Theory::dominant6: return "dominant6";
    default: return "full21";
    }
}

Theory parse_theory(const std::string& s)
{
    if (s == "polaron") return Theory::polaron;
    if (s == "dominant6") return Theory::dominant6;
    if (s == "full21") return Theory::full21;
    throw std::invalid_argument("unknown theory variant '" + s + "' (polaron|dominant6|full21)");
}

void resonance_guard(const SystemParams& p)
{
    if (std::abs(p.omega_q() - p.omega_r) < kResonanceTol * p.omega_r)
        throw std::domain_error("resonance divergence: |w_q - w_r| < 1e-6 w_r");
}

SecondOrderRates second_order_rates(const SystemParams& p, const BathModel& bath)
{
    const auto a = angles(p);
    return {a.s2 * spectral_value(bath, a.q) / 2.0, a.s2 * spectral_value(bath, -a.q) / 2.0,
            a.c2 * spectral_value(bath, 0.0) / 2.0};
}

DispersiveShifts dispersive_shifts(const SystemParams& p)
{
    resonance_guard(p);
    const auto a = angles(p);
    const double chi = p.g * p.g * a.s2 / (4.0 * (a.q - a.r));
    return {chi, chi * a.q / (a.q + a.r)};
}

CoefficientSet coefficients(const SystemParams& p)
{
    resonance_guard(p);
    const auto [q, r, ct, st] = angles(p);
    const double g2 = p.g * p.g;
    const double D = q * q - r * r;
    const double q2 = q * q, r2 = r * r;
    CoefficientSet k;
    auto& c = k.c;
    c[1] = -g2 * ct * (ct * q2 * (q2 - 3 * r2) + r2 * (q2 + r2)) / (8 * r2 * D * D);
    c[2] = g2 * ct * 3 * st * q2 * q / (8 * r * D * D);
    c[3] = g2 * ct * (ct * (q2 * q2 + 2 * q2 * r2 - r2 * r2) - 2 * r2 * (2 * q2 - r2)) /
           (4 * r2 * D * D);
    c[4] = -g2 * ct * (ct * q2 - r2) / (4 * D);
    c[5] = -g2 * st * (r2 * (q2 + r2) + ct * q2 * (q2 - 3 * r2)) / (16 * r2 * D * D);
    c[6] = -g2 * st * ((q - r) * r2 + ct * q2 * (q + 3 * r)) / (32 * r2 * D * (q + r));
    c[7] = g2 * st * (ct * D + st * q * r) / (8 * D * D);
    c[8] = g2 * st * ct / (8 * D);
    c[9] = g2 * st * (ct * q2 - r2) / (8 * r * D * (q - r));
    c[10] = g2 * st * ct * q2 / (16 * r2 * D);
    c[11] = g2 * st * (ct * q2 * (q - r) - st * q * r2) / (8 * r2 * D * (q - r));
    c[12] = g2 * st * (r2 - ct * q2) / (8 * r * D * (q + r));
    c[13] = g2 * st * (ct * q2 * (q + r) - st * q * r2) / (8 * r2 * D * (q + r));
    c[14] = -g2 * st * ct / (8 * (q * r - r2));
    c[15] = -g2 * st * (ct * q * (q + r) + ct * D + 2 * r2) / (8 * r2 * D);
    c[16] = -g2 * st * (ct * (2 * q2 + r2) + 2 * st * r2) / (8 * r2 * D);
    c[17] = g2 * st * (r - ct * q) / (8 * r * (q - r) * (q - r));
    c[18] = g2 * st * (r2 - ct * q * (2 * q - r)) / (8 * r2 * (q - r) * (q - r));
    c[19] = g2 * st * (r + ct * q) / (8 * r * (q + r) * (q + r));
    c[20] = g2 * st * (r2 - ct * q * (2 * q + r)) / (8 * r2 * (q + r) * (q + r));
    c[21] = g2 * st * (r2 * (q + r) + ct * q2 * (q - 3 * r)) / (32 * r2 * D * (q - r));
    c[22] = g2 * st * (ct * D - st * q * r) / (8 * D * D);
    c[23] = -g2 * st * (ct * (2 * q2 - q * r + r2) + 2 * st * r2) / (8 * r2 * D);
    c[24] = g2 * st * ct / (8 * r * (q + r));
    c[25] = -g2 * st * (r2 - ct * q2) / (16 * r * D);
    c[26] = g2 * st * (r - ct * q) / (32 * r * (q - r));
    c[27] = -g2 * st * st * q / (16 * D);
    c[28] = g2 * st * (r + ct * q) / (32 * r * (q + r));
    return k;
}

double c15_as_printed(const SystemParams& p)
{
    resonance_guard(p);
    const auto [q, r, ct, st] = angles(p);
    const double D = q * q - r * r;
    return -p.g * p.g * st * (ct * q + ct * D + 2 * r * r) / (8 * r * r * D);
}

DominantRates dominant_rates(const SystemParams& p, const BathModel& bath)
{
    resonance_guard(p);
    const auto [q, r, ct, st] = angles(p);
    const double g2 = p.g * p.g;
    const double dm = q - r, dp = q + r;
    const double pref_dp = 0.5 * g2 * ct * q * q * st / (r * r * dm * dm);
    const double pref_dm = 0.5 * g2 * ct * q * q * st / (r * r * dp * dp);
    const double pref_phi = 0.5 * g2 * st * q * q * st / (dm * dm * dp * dp);
    return {pref_dp * spectral_value(bath, dm),  pref_dm * spectral_value(bath, dp),
            pref_dp * spectral_value(bath, -dm), pref_dm * spectral_value(bath, -dp),
            pref_phi * spectral_value(bath, r),  pref_phi * spectral_value(bath, -r)};
}

BathSamples sample_bath(const SystemParams& p, const BathModel& bath, const RateOptions& opt)
{
    const double q = p.omega_q();
    BathSamples s;
    s.C0 = spectral_value(bath, 0.0);
    s.Cp = spectral_value(bath, q);
    s.Cm = spectral_value(bath, -q);
    if (opt.derivative_terms) {
        s.Dp = spectral_derivative(bath, q);
        s.Dm = spectral_derivative(bath, -q);
    }
    return s;
}

GammaTable full_gamma_table(const CoefficientSet& k, const DominantRates& dom, const BathSamples& s)
{
    const auto& c = k.c;
    const double Cmin = s.Cp - s.Cm;
    const double Cplus = s.Cp + s.Cm;
    GammaTable t;
    t.down_plus = dom.down_plus + c[17] * s.Cm + c[18] * s.Cp;
    t.up_minus = dom.up_minus + c[18] * s.Cm + c[17] * s.Cp;
    t.down_minus = dom.down_minus + c[19] * s.Cm + c[20] * s.Cp;
    t.up_plus = dom.up_plus + c[20] * s.Cm + c[19] * s.Cp;
    t.phi_plus = dom.phi_plus - c[4] * s.C0 + (c[11] - c[10]) * s.Cm + (c[13] + c[10]) * s.Cp;
    t.phi_minus = dom.phi_minus - c[4] * s.C0 + (c[13] - c[10]) * s.Cm + (c[11] + c[10]) * s.Cp;
    t.updown = (c[23] - c[16]) * Cmin;
    // sign follows from the A-matrix blocks; the table prints (c7 - c5 - c8)
    t.phi4 = (c[22] + c[5] - c[8]) * Cmin;
    t.minus = c[4] * s.C0 + (c[12] - c[10]) * s.Cm + (c[9] + c[10]) * s.Cp;
    t.plus = c[4] * s.C0 + (c[9] - c[10]) * s.Cm + (c[12] + c[10]) * s.Cp;
    t.n = c[5] * Cmin;
    t.phi_n = -c[3] * s.C0 - c[8] * Cplus - c[27] * (s.Dp - s.Dm);
    t.down_n = c[8] * s.Cm - c[16] * s.Cp + 4 * c[27] * s.Dp;
    // +c8 C(w_q), mirror of down_n; the table prints -c8
    t.up_n = -c[16] * s.Cm + c[8] * s.Cp - 4 * c[27] * s.Dm;
    t.pm_phipm = -c[10] * Cmin;
    return t;
}

GammaTable full_gamma_table(const SystemParams& p, const BathModel& bath, const RateOptions& opt)
{
    return full_gamma_table(coefficients(p), dominant_rates(p, bath), sample_bath(p, bath, opt));
}

std::vector<std::string> negative_entries(const GammaTable& t)
{
    const std::pair<const char*, double> e[] = {
        {"Gamma_down_plus", t.down_plus}, {"Gamma_down_minus", t.down_minus},
        {"Gamma_up_plus", t.up_plus},     {"Gamma_up_minus", t.up_minus},
        {"Gamma_phi_plus", t.phi_plus},   {"Gamma_phi_minus", t.phi_minus},
        {"Gamma_updown", t.updown},       {"Gamma_phi4", t.phi4},
        {"Gamma_minus", t.minus},         {"Gamma_plus", t.plus},
        {"Gamma_n", t.n},                 {"Gamma_phi_n", t.phi_n},
        {"Gamma_down_n", t.down_n},       {"Gamma_up_n", t.up_n},
        {"Gamma_pm_phipm", t.pm_phipm}};
    std::vector<std::string> out;
    for (const auto& [name, v] : e)
        if (v < 0.0) out.emplace_back(name);
    return out;
}

Auxiliaries auxiliary_rates(const SystemParams& p, const BathModel& bath, const RateOptions& opt)
{
    const auto k = coefficients(p);
    const auto& c = k.c;
    const auto s = sample_bath(p, bath, opt);
    const auto [q, r, ct, st] = angles(p);
    const double g2 = p.g * p.g;
    const double D = q * q - r * r;

    Auxiliaries x;
    x.kappa_phi = g2 * st * q * q * ct / (8 * r * r * D) * (s.Cp + s.Cm);
    const double kq = 0.5 * g2 * st * q * (ct * q * q - r * r) / (r * D * D);
    x.kappa_p = kq * s.Cp;
    x.kappa_m = kq * s.Cm;

    x.down_p1 = (c[18] + c[20] - 2 * c[16]) * s.Cp;
    x.down_p0 = (c[18] + c[23] - 2 * c[16]) * s.Cp;
    x.down_m1 = (c[17] + c[19] + 2 * c[8]) * s.Cm;
    x.down_m0 = (c[17] - c[23] + c[16] + c[8]) * s.Cm;
    x.down_d1 = 8 * c[27] * s.Dp;
    x.down_d0 = 4 * c[27] * s.Dp;

    x.up_p1 = (c[17] + c[19] - 2 * c[8]) * s.Cp;
    x.up_p0 = (c[19] + c[23] - c[16] - c[8]) * s.Cp;
    x.up_m1 = (c[18] + c[20] - 2 * c[16]) * s.Cm;
    x.up_m0 = (c[20] - c[23]) * s.Cm;
    x.up_d1 = -8 * c[27] * s.Dm;
    x.up_d0 = -4 * c[27] * s.Dm;

    x.phi_01 = -(2 * c[3] + 2 * c[4]) * s.C0;
    x.phi_00 = -(c[3] + c[4]) * s.C0;
    x.phi_p1 = (c[13] + c[11] - 2 * c[8]) * s.Cp;
    x.phi_p0 = (c[13] + c[10] - 2 * c[8] + c[7] - c[5]) * s.Cp;
    x.phi_m1 = (c[11] + c[13] - 2 * c[8]) * s.Cm;
    x.phi_m0 = (c[11] - c[10] - c[7] + c[5]) * s.Cm;
    x.phi_d1 = -2 * c[27] * (s.Dp - s.Dm);
    x.phi_d0 = -c[27] * (s.Dp - s.Dm);
    return x;
}

EffectiveKappa effective_kappa(const SystemParams& p, const BathModel& bath, const Populations& pop,
                               Theory th, const RateOptions& opt)
{
    const double tot = pop.P_e + pop.P_g + pop.P_empty;
    auto in01 = [](double x) { return x >= -1e-12 && x <= 1.0 + 1e-12; };
    if (std::abs(tot - 1.0) > 1e-10 || !in01(pop.P_e) || !in01(pop.P_g) || !in01(pop.P_empty))
        throw std::domain_error("effective_kappa: invalid populations");

    const auto d = dominant_rates(p, bath);
    EffectiveKappa k{d.down_minus * pop.P_e + d.up_minus * pop.P_g,
                     d.down_plus * pop.P_e + d.up_plus * pop.P_g};
    if (th == Theory::polaron) return k;
    k.minus += d.phi_minus * (1.0 - pop.P_empty);
    k.plus += d.phi_plus * (1.0 - pop.P_empty);
    if (th == Theory::dominant6) return k;
    const auto x = auxiliary_rates(p, bath, opt);
    const double sz = pop.sigma_z();
    k.minus += sz * x.kappa_phi + x.kappa_p * pop.P_e - x.kappa_m * pop.P_g;
    k.plus += sz * x.kappa_phi - x.kappa_p * pop.P_e + x.kappa_m * pop.P_g;
    return k;
}

EffectiveGamma effective_gamma(const SystemParams& p, const BathModel& bath, double alpha2,
                               double n_res, Theory th, const RateOptions& opt)
{
    if (!(alpha2 >= 0.0)) throw std::domain_error("effective_gamma: |alpha|^2 must be >= 0");
    if (!(n_res >= 0.0)) throw std::domain_error("effective_gamma: n_res must be >= 0");
    const double A = alpha2 + n_res;
    const auto d = dominant_rates(p, bath);
    EffectiveGamma e{A * d.down_minus + (A + 1) * d.down_plus, A * d.up_minus + (A + 1) * d.up_plus,
                     0.0};
    if (th == Theory::polaron) return e;
    e.phi = A * d.phi_minus + (A + 1) * d.phi_plus;
    if (th == Theory::dominant6) return e;
    const auto x = auxiliary_rates(p, bath, opt);
    e.down += A * (x.down_p1 + x.down_m1 + x.down_d1) + x.down_p0 + x.down_m0 + x.down_d0;
    e.up += A * (x.up_p1 + x.up_m1 + x.up_d1) + x.up_p0 + x.up_m0 + x.up_d0;
    e.phi += A * (x.phi_01 + x.phi_p1 + x.phi_m1 + x.phi_d1) + x.phi_00 + x.phi_p0 + x.phi_m0 +
             x.phi_d0;
    return e;
}

RateRow rate_row(const SystemParams& p, const BathModel& bath, const RateOptions& opt)
{
    RateRow row;
    auto add = [&](const char* n, double v) {
        row.names.emplace_back(n);
        row.values.push_back(v);
    };
    const auto m = mixing(p.eps_q, p.Delta_q);
    add("eps_q", p.eps_q);
    add("omega_q", m.omega_q);
    add("theta", m.theta);
    const auto s2 = second_order_rates(p, bath);
    add("gamma_down_2", s2.down);
    add("gamma_up_2", s2.up);
    add("gamma_phi_2", s2.phi);
    const auto ds = dispersive_shifts(p);
    add("chi", ds.chi);
    add("chi_tilde", ds.chi_tilde);
    const auto d = dominant_rates(p, bath);
    add("gamma_down_plus", d.down_plus);
    add("gamma_down_minus", d.down_minus);
    add("gamma_up_minus", d.up_minus);
    add("gamma_up_plus", d.up_plus);
    add("gamma_phi_minus", d.phi_minus);
    add("gamma_phi_plus", d.phi_plus);
    const auto t = full_gamma_table(p, bath, opt);
    add("Gamma_down_plus", t.down_plus);
    add("Gamma_down_minus", t.down_minus);
    add("Gamma_up_plus", t.up_plus);
    add("Gamma_up_minus", t.up_minus);
    add("Gamma_phi_plus", t.phi_plus);
    add("Gamma_phi_minus", t.phi_minus);
    add("Gamma_updown", t.updown);
    add("Gamma_phi4", t.phi4);
    add("Gamma_minus", t.minus);
    add("Gamma_plus", t.plus);
    add("Gamma_n", t.n);
    add("Gamma_phi_n", t.phi_n);
    add("Gamma_down_n", t.down_n);
    add("Gamma_up_n", t.up_n);
    add("Gamma_pm_phipm", t.pm_phipm);
    const auto x = auxiliary_rates(p, bath, opt);
    add("kappa_phi", x.kappa_phi);
    add("kappa_p", x.kappa_p);
    add("kappa_m", x.kappa_m);
    add("gamma_down_p0", x.down_p0);
    add("gamma_down_p1", x.down_p1);
    add("gamma_down_m0", x.down_m0);
    add("gamma_down_m1", x.down_m1);
    add("gamma_down_d0", x.down_d0);
    add("gamma_down_d1", x.down_d1);
    add("gamma_up_p0", x.up_p0);
    add("gamma_up_p1", x.up_p1);
    add("gamma_up_m0", x.up_m0);
    add("gamma_up_m1", x.up_m1);
    add("gamma_up_d0", x.up_d0);
    add("gamma_up_d1", x.up_d1);
    add("gamma_phi_00", x.phi_00);
    add("gamma_phi_01", x.phi_01);
    add("gamma_phi_p0", x.phi_p0);
    add("gamma_phi_p1", x.phi_p1);
    add("gamma_phi_m0", x.phi_m0);
    add("gamma_phi_m1", x.phi_m1);
    add("gamma_phi_d0", x.phi_d0);
    add("gamma_phi_d1", x.phi_d1);
    const auto c = coefficients(p);
    for (int j = 1; j <= 28; ++j) {
        row.names.push_back("c" + std::to_string(j));
        row.values.push_back(c[j]);
    }
    return row;
}

}  // namespace kl
