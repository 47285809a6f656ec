// meanfield.hpp — displaced-frame qubit/resonator fixed point and the gain observable
#pragma once

#include "kl/liouville.hpp"

#include <complex>
#include <string>

namespace kl {

struct QubitState {
    Mat rho = Mat::Zero(3, 3);  // over {g, e, empty}
    bool negative_rate = false;  // a total flip rate came out negative
    double P_g() const { return rho(0, 0).real(); }
    double P_e() const { return rho(1, 1).real(); }
    double P_empty() const { return rho(2, 2).real(); }
    double sigma_z() const { return P_g() - P_e(); }
    Populations populations() const { return {P_e(), P_g(), P_empty()}; }
};

struct QubitRates {
    double down, up, phi;
};

// second-order plus displaced-frame fourth-order contributions
QubitRates qubit_rates(const SystemParams& p, const BathModel& bath, double alpha2, double n_res,
                       Theory th = Theory::full21, const RateOptions& opt = {});

struct ResonatorField {
    cplx alpha{0.0, 0.0};
    double kappa_minus = 0, kappa_plus = 0;
    double kappa_prime = 0;   // kappa_minus - kappa_plus
    double delta_prime = 0;   // delta_r + 2 chi_tilde <sz>
    double n_res = 0;
    bool unstable = false;    // kappa' <= 0
};

struct MeanfieldOptions {
    Theory theory = Theory::full21;
    RateOptions rates{};
    LeadSource lead_source = LeadSource::right;
    double lambda = 0.5;
    double tol = 1e-10;
    int max_iter = 500;
    bool n_res_feedback = false;
};

QubitState qubit_steady_state(const SystemParams& p, const BathModel& bath, double alpha2,
                              double n_res, const MeanfieldOptions& opt = {});

// undriven cavity response -eps_d / (2 delta_r - i kappa)
cplx alpha_bare(const SystemParams& p);
cplx alpha_update(const SystemParams& p, double sigma_z, double kappa_prime);

// resonator rates for a given qubit state (resonator part included)
ResonatorField resonator_field(const SystemParams& p, const BathModel& bath, const QubitState& q,
                               const MeanfieldOptions& opt = {});

struct SolveReport {
    bool converged = false;
    int iterations = 0;
    double residual = 0;
    double lambda = 0;    // damping in use at exit
    QubitState qubit;
    ResonatorField field;
    double G = 1.0;
    std::string message;
};

SolveReport solve_coupled(const SystemParams& p, const BathModel& bath, const MeanfieldOptions& opt = {});

double gain(cplx alpha, cplx alpha0);
// |2 dw - i k|^2 / |2 dw' - i k'|^2; finite even at zero drive
double gain_from_rates(const SystemParams& p, const ResonatorField& f);

struct Comparison {
    cplx alpha_exact, alpha_mf;
    double P_e_exact, P_e_mf;
    double alpha_rel_dev;   // |<a>_exact - alpha_mf| / |alpha_mf|
    double P_e_abs_dev;
    double leakage;
    bool truncation_warning;
    SolveReport report;
};

Comparison meanfield_vs_exact(const SystemParams& p, const BathModel& bath, int n_fock,
                              const MeanfieldOptions& opt = {});

}  // namespace kl
