// test_meanfield.cpp — qubit steady state, field self-consistency, gain, exact comparison
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "kl/pipeline.hpp"
#include "support.hpp"

#include <Eigen/SVD>

#include <cmath>

using namespace kl;
using namespace kltest;

namespace {

BathModel ohmic(double T, double amp = 1.0)
{
    BathModel b;
    b.variant = Ohmic{amp};
    b.T = T;
    return b;
}

SystemParams params(double eps, double Delta, double g = 0.0125)
{
    SystemParams p;
    p.eps_q = eps;
    p.Delta_q = Delta;
    p.g = g;
    return p;
}

// J = w plus a bump of height h at w = 1 (the resonator frequency)
BathModel bumped(double h, double T)
{
    std::vector<double> w, j;
    for (int i = 0; i <= 100; ++i) {
        w.push_back(0.1 * i);
        j.push_back(0.1 * i + (i == 10 ? h : 0.0));
    }
    BathModel b;
    b.variant = Tabulated(w, j);
    b.T = T;
    return b;
}

// null vector of a dense 9x9 generator by SVD
Mat null_state(const Mat& L, int d)
{
    Eigen::JacobiSVD<Mat> svd(L, Eigen::ComputeFullV);
    Eigen::VectorXcd v = svd.matrixV().col(L.cols() - 1);
    Mat r = unvectorize(v, d);
    r /= r.trace();
    return 0.5 * (r + r.adjoint());
}

}  // namespace

TEST_CASE("qubit steady state without leads, drive or coupling is the ground state")
{
    const auto q = qubit_steady_state(params(1.0, 2.0, 0.0), ohmic(0.0), 0.0, 0.0);
    CHECK(q.P_g() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(std::abs(q.P_e()) < 1e-14);
    CHECK(q.P_empty() == 0.0);
    CHECK(q.sigma_z() == doctest::Approx(1.0));
    // with coupling, fourth-order C(w_q) terms give an O(g^2) excited fraction even at T = 0
    const auto q4 = qubit_steady_state(params(1.0, 2.0), ohmic(0.0), 0.0, 0.0);
    CHECK(q4.P_e() < 1e-4);
}

TEST_CASE("leads can invert the qubit on the gain side")
{
    auto p = fig2_system();
    p.eps_q = 3.0;
    const auto q = qubit_steady_state(p, fig2_bath(), 0.0, 0.0);
    CHECK(q.P_e() > q.P_g());
    CHECK(q.P_g() + q.P_e() + q.P_empty() == doctest::Approx(1.0).epsilon(1e-14));
    // the mirrored bias stays normal
    p.eps_q = -3.0;
    const auto qm = qubit_steady_state(p, fig2_bath(), 0.0, 0.0);
    CHECK(qm.P_e() < qm.P_g());
}

TEST_CASE("lead-only qubit matches a brute-force 9x9 null vector")
{
    const double th = 0.91;
    auto p = params(3 * std::cos(th), 3 * std::sin(th), 0.0);
    p.Gamma_L = 0.34;
    p.Gamma_R = 0.17;
    const auto bath_off = ohmic(0.0, 0.0);

    for (LeadSource src : {LeadSource::left, LeadSource::right}) {
        MeanfieldOptions opt;
        opt.lead_source = src;
        const auto q = qubit_steady_state(p, bath_off, 0.0, 0.0, opt);

        // build everything by hand on {g, e, 0}
        Eigen::Vector3cd L(std::cos(th / 2), std::sin(th / 2), 0), R(-std::sin(th / 2), std::cos(th / 2), 0);
        Eigen::Vector3cd z(0, 0, 1);
        const Eigen::Vector3cd in = src == LeadSource::left ? L : R;
        const Eigen::Vector3cd out = src == LeadSource::left ? R : L;
        const Mat jin = in * z.adjoint(), jout = z * out.adjoint();
        Mat H = Mat::Zero(3, 3);
        H(0, 0) = -0.5 * p.omega_q();
        H(1, 1) = 0.5 * p.omega_q();
        Mat G = Mat::Zero(9, 9);
        for (int k = 0; k < 9; ++k) {
            Mat E = Mat::Zero(3, 3);
            E(k % 3, k / 3) = 1.0;
            const Mat out_k = cplx(0, -1) * (H * E - E * H) + p.Gamma_L * lindblad_apply(jin, E) +
                              p.Gamma_R * lindblad_apply(jout, E);
            G.col(k) = vectorize(out_k);
        }
        const Mat want = null_state(G, 3);
        CHECK(max_abs(Mat(q.rho - want)) < 1e-12);
    }
}

TEST_CASE("alpha update")
{
    auto p = params(2.0, 3.0, 0.0);
    p.kappa_minus_r = 0.02;
    p.eps_d = 0.004;
    p.omega_d = 0.99;
    CHECK(std::abs(alpha_update(p, 0.3, p.kappa()) - alpha_bare(p)) < 1e-16);
    CHECK(std::abs(alpha_bare(p) - (-p.eps_d / cplx(2 * p.delta_r(), -p.kappa()))) < 1e-16);

    p.omega_d = 1.0;
    const double k1 = 0.01;
    const auto a1 = alpha_update(p, 1.0, k1);
    CHECK(std::abs(a1) == doctest::Approx(p.eps_d / k1).epsilon(1e-14));
    CHECK(std::abs(alpha_update(p, 1.0, 2 * k1)) == doctest::Approx(std::abs(a1) / 2).epsilon(1e-14));
    CHECK_THROWS_AS(alpha_update(p, 1.0, 0.0), std::runtime_error);
    CHECK_THROWS_AS(alpha_update(p, 1.0, -1e-3), std::runtime_error);
    // off resonance a negative kappa' still yields a finite amplitude
    p.omega_d = 0.9;
    CHECK(std::isfinite(std::abs(alpha_update(p, 1.0, -1e-3))));
}

TEST_CASE("gain")
{
    CHECK(gain(cplx(0.3, 0.4), cplx(0.0, 0.5)) == doctest::Approx(1.0));
    CHECK(gain(cplx(1, 0), cplx(0.5, 0)) == doctest::Approx(4.0));
    CHECK_THROWS_AS(gain(cplx(1, 0), cplx(0, 0)), std::domain_error);

    auto p = params(2.0, 3.0);
    p.kappa_minus_r = 1e-3;
    ResonatorField f;
    f.kappa_prime = 2e-3;
    f.delta_prime = 0.0;
    CHECK(gain_from_rates(p, f) == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("solve_coupled at g = 0: one iteration, bare field, unit gain")
{
    auto p = params(-2.0, 3.0, 0.0);
    p.kappa_minus_r = 1e-3;
    p.eps_d = 1e-4;
    for (double Gam : {0.0, 0.34}) {
        p.Gamma_L = p.Gamma_R = Gam;
        const auto r = solve_coupled(p, ohmic(0.5));
        CHECK(r.converged);
        CHECK(r.iterations == 1);
        CHECK(std::abs(r.field.alpha - alpha_bare(p)) < 1e-16);
        CHECK(r.G == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("fig2 parameters on the loss side converge with kappa' > kappa")
{
    auto p = fig2_system();
    p.eps_q = -3.0;
    const auto r = solve_coupled(p, fig2_bath());
    CHECK(r.converged);
    CHECK(r.field.kappa_prime > p.kappa());
    CHECK(r.G < 1.0);
    CHECK(r.residual < 1e-10 * (1 + std::abs(r.field.alpha)));

    p.eps_q = 3.0;
    const auto g = solve_coupled(p, fig2_bath());
    CHECK(g.converged);
    CHECK(g.G > 1.0);
}

TEST_CASE("fixed-point property and valid qubit state")
{
    for (double eps : {-6.0, -3.0, -1.0, 0.0, 1.0, 3.0, 6.0}) {
        auto p = fig2_system();
        p.eps_q = eps;
        const auto bath = fig2_bath();
        const auto r = solve_coupled(p, bath);
        REQUIRE(r.converged);
        // alpha_update on the reported state reproduces the reported field exactly
        CHECK(alpha_update(p, r.qubit.sigma_z(), r.field.kappa_prime) == r.field.alpha);
        // and one more full iteration moves it by less than the tolerance scale
        const auto q = qubit_steady_state(p, bath, std::norm(r.field.alpha), 0.0);
        const auto f = resonator_field(p, bath, q);
        const auto a2 = alpha_update(p, q.sigma_z(), f.kappa_prime);
        CHECK(std::abs(a2 - r.field.alpha) <= 1e-9 * (1 + std::abs(r.field.alpha)));

        const Mat& rho = r.qubit.rho;
        CHECK(max_abs(Mat(rho - rho.adjoint())) < 1e-14);
        CHECK(std::abs(rho.trace() - 1.0) < 1e-14);
        CHECK(Eigen::SelfAdjointEigenSolver<Mat>(rho).eigenvalues().minCoeff() >= -1e-8);
        CHECK(r.G == doctest::Approx(gain(r.field.alpha, alpha_bare(p))).epsilon(1e-8));
    }
}

TEST_CASE("continuity under 1% perturbations")
{
    auto p = fig2_system();
    p.eps_q = 2.0;
    const auto bath = fig2_bath();
    const auto a = solve_coupled(p, bath).field.alpha;
    auto probe = [&](SystemParams q, BathModel b) {
        const auto r = solve_coupled(q, b);
        REQUIRE(r.converged);
        return std::abs(r.field.alpha - a) / std::abs(a);
    };
    auto q = p;
    q.g *= 1.01;
    CHECK(probe(q, bath) < 0.1);
    q = p;
    q.eps_q *= 1.01;
    CHECK(probe(q, bath) < 0.1);
    q = p;
    q.Gamma_L *= 1.01;
    CHECK(probe(q, bath) < 0.1);
    auto b2 = bath;
    b2.T *= 1.01;
    CHECK(probe(p, b2) < 0.1);
}

TEST_CASE("Boltzmann qubit fixed point without leads or drive")
{
    auto p = params(1.4, 2.1);
    p.eps_d = 0.0;
    const auto bath = ohmic(0.5);
    const auto r = solve_coupled(p, bath);
    REQUIRE(r.converged);
    CHECK(r.field.alpha == cplx(0.0));
    const auto rates = qubit_rates(p, bath, 0.0, 0.0);
    CHECK(std::abs(r.qubit.P_e() / r.qubit.P_g() - rates.up / rates.down) <= 1e-12);
    // G stays defined at zero drive
    CHECK(std::isfinite(r.G));
}

TEST_CASE("more dephasing-assisted loss at w_r strictly lowers the gain")
{
    auto p = params(2.0, 3.0);
    p.kappa_minus_r = 1e-4;
    p.eps_d = 1e-5;
    p.omega_d = 1.0;
    double prevG = 2.0, prevK = 0.0;
    for (double h : {0.0, 0.5, 1.0, 2.0}) {
        const auto r = solve_coupled(p, bumped(h, 0.5));
        REQUIRE(r.converged);
        CHECK(r.qubit.P_empty() == 0.0);
        CHECK(r.field.kappa_minus > prevK);
        CHECK(r.G < prevG);
        // resonant drive: G = k^2 / (4 dw'^2 + k'^2), with dw' the dispersive pull alone
        const double dw = r.field.delta_prime;
        CHECK(r.G == doctest::Approx(p.kappa() * p.kappa() /
                                     (4 * dw * dw + std::pow(r.field.kappa_prime, 2)))
                         .epsilon(1e-12));
        prevG = r.G;
        prevK = r.field.kappa_minus;
    }
}

TEST_CASE("inversion raises kappa_+, lowers kappa' and raises the gain")
{
    auto p = fig2_system();
    p.eps_q = 3.0;
    const auto bath = fig2_bath();
    QubitState normal, inverted;
    normal.rho(0, 0) = 0.7;
    normal.rho(1, 1) = 0.3;
    inverted.rho(0, 0) = 0.3;
    inverted.rho(1, 1) = 0.7;
    const auto fn = resonator_field(p, bath, normal);
    const auto fi = resonator_field(p, bath, inverted);
    CHECK(fi.kappa_plus > fn.kappa_plus);
    CHECK(fi.kappa_prime < fn.kappa_prime);
    CHECK(gain_from_rates(p, fi) > gain_from_rates(p, fn));

    // the leads do this in the full solve
    auto off = p;
    off.Gamma_L = off.Gamma_R = 0.0;
    const auto r_on = solve_coupled(p, bath);
    const auto r_off = solve_coupled(off, bath);
    REQUIRE(r_on.converged);
    REQUIRE(r_off.converged);
    CHECK(r_on.qubit.sigma_z() < 0.0);
    CHECK(r_off.qubit.sigma_z() > 0.0);
    CHECK(r_on.field.kappa_prime < r_off.field.kappa_prime);
    CHECK(r_on.G > r_off.G);
}

TEST_CASE("masing instability is reported, not hidden")
{
    auto p = fig2_system();
    p.eps_q = 3.0;
    p.kappa_minus_r = 1e-9;  // gain exceeds the bare loss
    const auto r = solve_coupled(p, fig2_bath());
    CHECK_FALSE(r.converged);
    CHECK(r.field.unstable);
    CHECK(r.message.find("masing") != std::string::npos);
}

TEST_CASE("solver option validation")
{
    MeanfieldOptions o;
    o.lambda = 0.0;
    CHECK_THROWS_AS(solve_coupled(fig2_system(), fig2_bath(), o), std::invalid_argument);
    o = {};
    o.max_iter = 0;
    CHECK_THROWS_AS(solve_coupled(fig2_system(), fig2_bath(), o), std::invalid_argument);
    auto p = fig2_system();
    p.eps_q = 1.0;
    p.Delta_q = 0.0;
    CHECK_THROWS_AS(solve_coupled(p, fig2_bath()), std::domain_error);
}

TEST_CASE("n_res feedback changes nothing when kappa_+ = 0 at zero temperature")
{
    auto p = params(-2.0, 3.0);
    p.kappa_minus_r = 1e-3;
    p.eps_d = 1e-4;
    MeanfieldOptions fb;
    fb.n_res_feedback = true;
    const auto a = solve_coupled(p, ohmic(0.0));
    const auto b = solve_coupled(p, ohmic(0.0), fb);
    REQUIRE(b.converged);
    // kappa_+ is tiny here, so the thermal correction is negligible
    CHECK(std::abs(a.field.alpha - b.field.alpha) <= 1e-3 * std::abs(a.field.alpha));
}

TEST_CASE("mean field against the exact truncated steady state")
{
    auto p = params(2.0, 3.0, 0.0);
    p.kappa_minus_r = 1e-2;
    p.eps_d = 5e-3;
    p.omega_d = 1.0;
    const auto bath = ohmic(0.2);
    const auto c0 = meanfield_vs_exact(p, bath, 10);
    CHECK(c0.alpha_rel_dev < 1e-8);
    CHECK(c0.P_e_abs_dev < 1e-10);

    p.g = 0.0125;
    const auto c = meanfield_vs_exact(p, bath, 10);
    const auto c14 = meanfield_vs_exact(p, bath, 14);
    CHECK(std::abs(c.alpha_mf) <= 1.0);
    CHECK(c.alpha_rel_dev < 0.05);
    CHECK(c.P_e_abs_dev < 0.02);
    CHECK(c14.alpha_rel_dev < 0.05);
    CHECK(c14.P_e_abs_dev < 0.02);
    CHECK(std::abs(c14.alpha_exact - c.alpha_exact) < 1e-6 * std::abs(c.alpha_exact));
}

TEST_CASE("separable approximation degrades as g approaches |w_q - w_r|")
{
    auto p = params(2.0, 3.0);
    p.kappa_minus_r = 1e-2;
    p.eps_d = 5e-3;
    p.omega_d = 1.0;
    const auto bath = ohmic(0.2);
    double prev = -1.0;
    for (double g : {0.0125, 0.05, 0.1, 0.2, 0.4}) {
        p.g = g;
        const auto c = meanfield_vs_exact(p, bath, 10);
        CHECK(c.alpha_rel_dev > prev);
        prev = c.alpha_rel_dev;
    }
}
