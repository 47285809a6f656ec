// rates.hpp — closed-form second- and fourth-order rates of the dissipative Rabi model
#pragma once

#include "kl/spectral.hpp"

#include <array>
#include <string>
#include <vector>

namespace kl {

// Frequencies in units of w_r (omega_r is kept as a field but must be 1 in practice).
struct SystemParams {
    double eps_q = 0.0;
    double Delta_q = 3.0;
    double omega_r = 1.0;
    double g = 0.0125;
    double kappa_minus_r = 52e-6;
    double kappa_plus_r = 0.0;
    double Gamma_L = 0.0;
    double Gamma_R = 0.0;
    double eps_d = 0.0;
    double omega_d = 1.0;

    double omega_q() const;
    double theta() const;
    double delta_r() const { return omega_r - omega_d; }
    double kappa() const { return kappa_minus_r - kappa_plus_r; }
    // g < |w_q - w_r|; a warning only
    bool perturbative() const;
    bool operator==(const SystemParams&) const = default;
};

void validate(const SystemParams& p);

struct Mixing {
    double omega_q;
    double theta;
};

Mixing mixing(double eps_q, double Delta_q);

enum class Theory { polaron, dominant6, full21 };
const char* theory_name(Theory t);
Theory parse_theory(const std::string& s);

struct RateOptions {
    bool derivative_terms = true;
    bool operator==(const RateOptions&) const = default;
};

// throws std::domain_error within 1e-6 w_r of w_q = w_r
void resonance_guard(const SystemParams& p);

struct SecondOrderRates {
    double down, up, phi;
};

SecondOrderRates second_order_rates(const SystemParams& p, const BathModel& bath);

struct DispersiveShifts {
    double chi, chi_tilde;
};

DispersiveShifts dispersive_shifts(const SystemParams& p);

// c[1]..c[28]; c[0] unused
struct CoefficientSet {
    std::array<double, 29> c{};
    double operator[](int j) const { return c.at(j); }
};

// c1..c28 mixing coefficients. c15 is computed so that c15 = 2 c16 - c23 holds;
// c15_as_printed gives the tabulated expression, which breaks that identity.
CoefficientSet coefficients(const SystemParams& p);
double c15_as_printed(const SystemParams& p);

struct DominantRates {
    double down_plus;   // C(w_q - w_r)
    double down_minus;  // C(w_q + w_r)
    double up_minus;    // C(-w_q + w_r)
    double up_plus;     // C(-w_q - w_r)
    double phi_minus;   // C(w_r)
    double phi_plus;    // C(-w_r)
};

DominantRates dominant_rates(const SystemParams& p, const BathModel& bath);

// Spectral function values needed by the Gamma table
struct BathSamples {
    double C0 = 0, Cp = 0, Cm = 0;  // C(0), C(w_q), C(-w_q)
    double Dp = 0, Dm = 0;          // C'(w_q), C'(-w_q)
};

BathSamples sample_bath(const SystemParams& p, const BathModel& bath, const RateOptions& opt = {});

struct GammaTable {
    double down_plus, down_minus, up_plus, up_minus;
    double phi_plus, phi_minus;
    double updown, phi4;
    double minus, plus;
    double n, phi_n, down_n, up_n, pm_phipm;
};

GammaTable full_gamma_table(const SystemParams& p, const BathModel& bath, const RateOptions& opt = {});
GammaTable full_gamma_table(const CoefficientSet& c, const DominantRates& dom, const BathSamples& s);

// names of negative entries (diagnostic)
std::vector<std::string> negative_entries(const GammaTable& t);

struct Auxiliaries {
    double kappa_phi;       // kappa_phi^(w_q), carries C_+(w_q)
    double kappa_p;         // kappa^(w_q)
    double kappa_m;         // kappa^(-w_q)
    // qubit auxiliaries are linear in |alpha|^2: value = a0 + a1 |alpha|^2
    double down_p0, down_p1, down_m0, down_m1, down_d0, down_d1;
    double up_p0, up_p1, up_m0, up_m1, up_d0, up_d1;
    double phi_00, phi_01, phi_p0, phi_p1, phi_m0, phi_m1, phi_d0, phi_d1;
};

Auxiliaries auxiliary_rates(const SystemParams& p, const BathModel& bath, const RateOptions& opt = {});

struct Populations {
    double P_e = 0, P_g = 1, P_empty = 0;
    double sigma_z() const { return P_g - P_e; }
};

struct EffectiveKappa {
    double minus, plus;
};

EffectiveKappa effective_kappa(const SystemParams& p, const BathModel& bath, const Populations& pop,
                               Theory th = Theory::full21, const RateOptions& opt = {});

struct EffectiveGamma {
    double down, up, phi;
};

EffectiveGamma effective_gamma(const SystemParams& p, const BathModel& bath, double alpha2,
                               double n_res = 0.0, Theory th = Theory::full21,
                               const RateOptions& opt = {});

// Flat record of every rate at one parameter point, for dumps.
struct RateRow {
    std::vector<std::string> names;
    std::vector<double> values;
};

RateRow rate_row(const SystemParams& p, const BathModel& bath, const RateOptions& opt = {});

}  // namespace kl
