// meanfield.cpp — qubit steady state, self-consistent field, gain
#include "kl/meanfield.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace kl {

namespace {

bool leads_on(const SystemParams& p) { return p.Gamma_L != 0.0 || p.Gamma_R != 0.0; }

SpMat qubit_op(int Q, std::initializer_list<std::tuple<int, int, double>> el)
{
    SpMat m(Q, Q);
    for (auto [i, j, v] : el) m.insert(i, j) = v;
    return m;
}

}  // namespace

QubitRates qubit_rates(const SystemParams& p, const BathModel& bath, double alpha2, double n_res,
                       Theory th, const RateOptions& opt)
{
    const auto r2 = second_order_rates(p, bath);
    const auto r4 = effective_gamma(p, bath, alpha2, n_res, th, opt);
    return {r2.down + r4.down, r2.up + r4.up, r2.phi + r4.phi};
}

QubitState qubit_steady_state(const SystemParams& p, const BathModel& bath, double alpha2,
                              double n_res, const MeanfieldOptions& opt)
{
    validate(p);
    validate(bath);
    // without leads the empty state decouples, so solve on {g, e} only
    const int Q = leads_on(p) ? 3 : 2;
    const auto r = qubit_rates(p, bath, alpha2, n_res, opt.theory, opt.rates);
    const auto chi = dispersive_shifts(p).chi_tilde;

    const SpMat sz = qubit_op(Q, {{0, 0, 1.0}, {1, 1, -1.0}});
    const SpMat sm = qubit_op(Q, {{0, 1, 1.0}});
    const SpMat sp = qubit_op(Q, {{1, 0, 1.0}});
    const double hz = -0.5 * p.omega_q() + chi * (1.0 + 2.0 * alpha2);
    SpMat L = superop_hamiltonian(SpMat(hz * sz));
    L += r.down * superop_dissipator(sm) + r.up * superop_dissipator(sp) +
         r.phi * superop_dissipator(sz);
    if (Q == 3) {
        const auto j = lead_jumps(p.theta(), opt.lead_source);
        L += p.Gamma_L * superop_dissipator(j[0]) + p.Gamma_R * superop_dissipator(j[1]);
    }

    Mat A = Mat(L);
    A.row(0).setZero();
    for (int i = 0; i < Q; ++i) A(0, i + i * Q) = 1.0;
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(Q * Q);
    rhs(0) = 1.0;
    Eigen::FullPivLU<Mat> lu(A);
    if (!lu.isInvertible())
        throw std::runtime_error("qubit_steady_state: ambiguous steady state");
    Mat rq = unvectorize(lu.solve(rhs), Q);
    rq = 0.5 * (rq + rq.adjoint()).eval();
    rq /= rq.trace().real();

    QubitState q;
    q.rho.topLeftCorner(Q, Q) = rq;
    q.negative_rate = r.down < 0.0 || r.up < 0.0;
    const double mn = Eigen::SelfAdjointEigenSolver<Mat>(rq).eigenvalues().minCoeff();
    if (q.negative_rate || mn < -1e-10)
        spdlog::warn("qubit_steady_state: gamma_down={:.3e} gamma_up={:.3e} min eig={:.3e}", r.down,
                     r.up, mn);
    return q;
}

cplx alpha_bare(const SystemParams& p)
{
    const cplx den(2.0 * p.delta_r(), -p.kappa());
    if (den == cplx(0.0)) throw std::domain_error("alpha_bare: undamped resonant cavity");
    return -p.eps_d / den;
}

cplx alpha_update(const SystemParams& p, double sigma_z, double kappa_prime)
{
    const double dp = p.delta_r() + 2.0 * dispersive_shifts(p).chi_tilde * sigma_z;
    if (kappa_prime <= 0.0 && dp == 0.0)
        throw std::runtime_error("alpha_update: kappa' <= 0 on resonance (masing instability)");
    return -p.eps_d / cplx(2.0 * dp, -kappa_prime);
}

ResonatorField resonator_field(const SystemParams& p, const BathModel& bath, const QubitState& q,
                               const MeanfieldOptions& opt)
{
    const auto k4 = effective_kappa(p, bath, q.populations(), opt.theory, opt.rates);
    ResonatorField f;
    f.kappa_minus = p.kappa_minus_r + k4.minus;
    f.kappa_plus = p.kappa_plus_r + k4.plus;
    f.kappa_prime = f.kappa_minus - f.kappa_plus;
    f.delta_prime = p.delta_r() + 2.0 * dispersive_shifts(p).chi_tilde * q.sigma_z();
    f.unstable = !(f.kappa_prime > 0.0);
    f.n_res = f.unstable ? std::numeric_limits<double>::infinity() : f.kappa_plus / f.kappa_prime;
    return f;
}

double gain(cplx alpha, cplx alpha0)
{
    if (alpha0 == cplx(0.0)) throw std::domain_error("gain: alpha0 = 0, gain undefined");
    return std::norm(alpha) / std::norm(alpha0);
}

double gain_from_rates(const SystemParams& p, const ResonatorField& f)
{
    const cplx den(2.0 * f.delta_prime, -f.kappa_prime);
    if (den == cplx(0.0)) throw std::domain_error("gain_from_rates: vanishing denominator");
    return std::norm(cplx(2.0 * p.delta_r(), -p.kappa())) / std::norm(den);
}

SolveReport solve_coupled(const SystemParams& p, const BathModel& bath, const MeanfieldOptions& opt)
{
    validate(p);
    resonance_guard(p);
    if (!(opt.lambda > 0.0 && opt.lambda <= 1.0)) throw std::invalid_argument("solver.lambda must be in (0, 1]");
    if (!(opt.tol > 0.0)) throw std::invalid_argument("solver.tol must be > 0");
    if (opt.max_iter < 1) throw std::invalid_argument("solver.max_iter must be >= 1");

    constexpr double kLambdaFloor = 1.0 / 64.0;
    SolveReport rep;
    cplx alpha = alpha_bare(p);
    double n_res = 0.0;
    double lambda = opt.lambda;
    double prev = std::numeric_limits<double>::infinity();

    for (int it = 1; it <= opt.max_iter; ++it) {
        rep.iterations = it;
        rep.qubit = qubit_steady_state(p, bath, std::norm(alpha), n_res, opt);
        rep.field = resonator_field(p, bath, rep.qubit, opt);
        if (rep.field.unstable) {
            rep.field.alpha = alpha;
            rep.lambda = lambda;
            rep.residual = std::numeric_limits<double>::infinity();
            rep.message = "kappa' <= 0: no stable fixed point (masing instability)";
            return rep;
        }
        const cplx a_new = alpha_update(p, rep.qubit.sigma_z(), rep.field.kappa_prime);
        double res = std::abs(a_new - alpha);
        const double n_new = opt.n_res_feedback ? rep.field.n_res : 0.0;
        res = std::max(res, std::abs(n_new - n_res));
        rep.residual = res;
        if (res < opt.tol * (1.0 + std::abs(alpha))) {
            rep.converged = true;
            rep.field.alpha = a_new;
            rep.lambda = lambda;
            rep.G = gain_from_rates(p, rep.field);
            return rep;
        }
        if (res > prev && lambda > kLambdaFloor) {
            lambda = std::max(lambda / 2.0, kLambdaFloor);
            spdlog::debug("solve_coupled: residual grew, lambda -> {}", lambda);
        }
        prev = res;
        alpha = (1.0 - lambda) * alpha + lambda * a_new;
        n_res = (1.0 - lambda) * n_res + lambda * n_new;
    }
    rep.field.alpha = alpha;
    rep.lambda = lambda;
    rep.G = gain_from_rates(p, rep.field);
    rep.message = "no convergence within max_iter";
    return rep;
}

Comparison meanfield_vs_exact(const SystemParams& p, const BathModel& bath, int n_fock,
                              const MeanfieldOptions& opt)
{
    Comparison c;
    c.report = solve_coupled(p, bath, opt);
    if (!c.report.converged) throw std::runtime_error("meanfield_vs_exact: " + c.report.message);
    const HilbertSpace s{n_fock, leads_on(p) ? 3 : 2};
    LiouvillianOptions lo;
    lo.theory = opt.theory;
    lo.rates = opt.rates;
    lo.lead_source = opt.lead_source;
    const auto ss = steady_state(build_full_liouvillian(p, bath, s, lo), s);
    const auto o = make_ops(s);
    c.alpha_exact = expect(o.a, ss.rho);
    c.alpha_mf = c.report.field.alpha;
    c.P_e_exact = expect(o.proj_e, ss.rho).real();
    c.P_e_mf = c.report.qubit.P_e();
    const double am = std::abs(c.alpha_mf);
    c.alpha_rel_dev = am > 0.0 ? std::abs(c.alpha_exact - c.alpha_mf) / am : std::abs(c.alpha_exact);
    c.P_e_abs_dev = std::abs(c.P_e_exact - c.P_e_mf);
    c.leakage = ss.leakage;
    c.truncation_warning = ss.truncation_warning;
    return c;
}

}  // namespace kl
