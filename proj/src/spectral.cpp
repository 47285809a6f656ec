// spectral.cpp — bath spectral functions
#include "kl/spectral.hpp"

#include <cmath>

// Boost 1.74 pchip calls unqualified isnan
using std::isnan;
#include <boost/math/interpolators/pchip.hpp>

#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace kl {

namespace {

constexpr double kTinyArg = 1e-4;

void require_finite(double w, const char* what)
{
    if (!std::isfinite(w))
        throw std::domain_error(std::string(what) + ": non-finite frequency");
}

// (1 - cos x) / x, stable for small x
double one_minus_cos_over_x(double x)
{
    if (x < kTinyArg) return x / 2.0 - x * x * x / 24.0;
    const double s = std::sin(x / 2.0);
    return 2.0 * s * s / x;
}

// 1 - sin(x)/x
double one_minus_sinc(double x)
{
    if (x < 1e-3) {
        const double x2 = x * x;
        return x2 / 6.0 - x2 * x2 / 120.0;
    }
    return 1.0 - std::sin(x) / x;
}

double slope_at_zero(const BathModel& bath)
{
    struct V {
        double operator()(const Ohmic& o) const { return o.amplitude; }
        double operator()(const Piezo& p) const
        {
            // J_3D starts at order w^3
            return p.F * p.omega_r_phys * p.d / p.c_n / 2.0;
        }
        double operator()(const Tabulated& t) const
        {
            if (t.J(0.0) > 0.0)
                throw std::domain_error(
                    "spectral_value: tabulated J(0) > 0 makes C(0) diverge; set c0_override");
            return t.J_prime(0.0);
        }
    };
    return std::visit(V{}, bath.variant);
}

}  // namespace

double omega_r_from_temperature(double kelvin, double ratio)
{
    if (!(kelvin > 0.0) || !(ratio > 0.0))
        throw std::domain_error("omega_r_from_temperature: need positive temperature and ratio");
    return kKelvinRadPerSec * kelvin / ratio;
}

double default_omega_r_phys() { return omega_r_from_temperature(3.0, 7.8); }

struct Tabulated::Impl {
    boost::math::interpolators::pchip<std::vector<double>> spline;
};

Tabulated::Tabulated(std::vector<double> omega, std::vector<double> J)
    : omega_(std::move(omega)), J_(std::move(J))
{
    if (omega_.size() != J_.size())
        throw std::invalid_argument("Tabulated: omega and J differ in length");
    if (omega_.size() < 4)
        throw std::invalid_argument("Tabulated: need at least 4 grid points");
    if (omega_.front() != 0.0)
        throw std::invalid_argument("Tabulated: grid must start at omega = 0");
    for (std::size_t i = 0; i < omega_.size(); ++i) {
        if (!std::isfinite(omega_[i]) || !std::isfinite(J_[i]))
            throw std::invalid_argument("Tabulated: non-finite grid entry");
        if (J_[i] < 0.0) throw std::invalid_argument("Tabulated: J must be non-negative");
        if (i > 0 && !(omega_[i] > omega_[i - 1]))
            throw std::invalid_argument("Tabulated: grid must be strictly increasing");
    }
    auto x = omega_;
    auto y = J_;
    impl_ = std::make_shared<Impl>(Impl{{std::move(x), std::move(y)}});
}

Tabulated Tabulated::load(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("Tabulated: cannot open " + path);
    std::vector<double> w, j;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        for (auto& ch : line)
            if (ch == ',') ch = ' ';
        std::istringstream ls(line);
        double a, b;
        if (!(ls >> a)) continue;
        if (!(ls >> b)) throw std::invalid_argument("Tabulated: malformed line in " + path);
        w.push_back(a);
        j.push_back(b);
    }
    Tabulated t(std::move(w), std::move(j));
    t.source_ = path;
    return t;
}

double Tabulated::J(double w) const
{
    if (!impl_) throw std::logic_error("Tabulated: empty table");
    if (w < 0.0 || w > omega_.back())
        throw std::out_of_range("Tabulated: omega " + std::to_string(w) +
                                " outside grid (no extrapolation)");
    // pchip overshoot is impossible, but clamp rounding below zero
    return std::max(0.0, impl_->spline(w));
}

double Tabulated::J_prime(double w) const
{
    if (!impl_) throw std::logic_error("Tabulated: empty table");
    if (w < 0.0 || w > omega_.back())
        throw std::out_of_range("Tabulated: omega outside grid (no extrapolation)");
    return impl_->spline.prime(w);
}

void validate(const BathModel& bath)
{
    if (!(bath.T >= 0.0) || !std::isfinite(bath.T))
        throw std::invalid_argument("bath.T must be finite and >= 0");
    if (bath.c0_override && !(*bath.c0_override >= 0.0))
        throw std::invalid_argument("bath.c0_override must be >= 0");
    if (const auto* o = std::get_if<Ohmic>(&bath.variant)) {
        if (!(o->amplitude >= 0.0)) throw std::invalid_argument("bath.amplitude must be >= 0");
    } else if (const auto* p = std::get_if<Piezo>(&bath.variant)) {
        if (!(p->F >= 0.0) || !(p->P >= 0.0))
            throw std::invalid_argument("bath.F and bath.P must be >= 0");
        if (!(p->d > 0.0) || !(p->a > 0.0) || !(p->c_n > 0.0) || !(p->c_s > 0.0) ||
            !(p->omega_r_phys > 0.0))
            throw std::invalid_argument("bath: d, a, c_n, c_s, omega_r_phys must be > 0");
    } else if (const auto* t = std::get_if<Tabulated>(&bath.variant)) {
        if (t->omega().empty()) throw std::invalid_argument("bath: tabulated grid is empty");
    }
}

const char* variant_name(const BathModel& bath)
{
    switch (bath.variant.index()) {
    case 0: return "ohmic";
    case 1: return "piezo";
    default: return "tabulated";
    }
}

double n_thermal(double w, double T)
{
    if (T == 0.0) return w > 0.0 ? 0.0 : (w < 0.0 ? -1.0 : std::numeric_limits<double>::infinity());
    return 1.0 / std::expm1(w / T);
}

double piezo_density_1d(const Piezo& pz, double w)
{
    if (w < 0.0) throw std::domain_error("piezo_density: negative frequency");
    const double x = w * pz.omega_r_phys * pz.d / pz.c_n;
    const double g = w * pz.omega_r_phys * pz.a / pz.c_n;
    return pz.F * one_minus_cos_over_x(x) * std::exp(-g * g / 2.0);
}

double piezo_density_3d(const Piezo& pz, double w)
{
    if (w < 0.0) throw std::domain_error("piezo_density: negative frequency");
    const double x = w * pz.omega_r_phys * pz.d / pz.c_s;
    const double g = w * pz.omega_r_phys * pz.a / pz.c_s;
    return pz.P * w * one_minus_sinc(x) * std::exp(-g * g / 2.0);
}

double piezo_density(const Piezo& pz, double w)
{
    require_finite(w, "piezo_density");
    return piezo_density_1d(pz, w) + piezo_density_3d(pz, w);
}

double spectral_density(const BathModel& bath, double w)
{
    require_finite(w, "spectral_density");
    if (w < 0.0) throw std::domain_error("spectral_density: negative frequency");
    struct V {
        double w;
        double operator()(const Ohmic& o) const { return o.amplitude * w; }
        double operator()(const Piezo& p) const { return piezo_density(p, w); }
        double operator()(const Tabulated& t) const { return t.J(w); }
    };
    return std::visit(V{w}, bath.variant);
}

double spectral_value(const BathModel& bath, double w)
{
    require_finite(w, "spectral_value");
    if (w == 0.0) {
        if (bath.c0_override) return *bath.c0_override;
        if (bath.T == 0.0) return 0.0;
        return bath.T * slope_at_zero(bath);
    }
    const double x = std::abs(w);
    const double J = spectral_density(bath, x);
    if (bath.T == 0.0) return w > 0.0 ? J : 0.0;
    const double y = x / bath.T;
    // n+1 = -1/expm1(-y) keeps C(-w)/C(w) = e^{-y} to rounding
    return w > 0.0 ? -J / std::expm1(-y) : J / std::expm1(y);
}

double spectral_derivative(const BathModel& bath, double w)
{
    require_finite(w, "spectral_derivative");
    if (bath.T == 0.0 && w == 0.0)
        throw std::domain_error("spectral_derivative: C'(0) undefined at T = 0 (step in C)");

    if (const auto* o = std::get_if<Ohmic>(&bath.variant)) {
        const double a = o->amplitude;
        if (bath.T == 0.0) return w > 0.0 ? a : 0.0;
        const double x = w / bath.T;
        if (std::abs(x) < kTinyArg) return a * (0.5 + x / 6.0);
        // C = a w / (1 - e^{-x})
        const double n = 1.0 / std::expm1(x);
        return a * ((n + 1.0) - x * n * (n + 1.0));
    }

    const double h = std::max(1e-6 * std::abs(w), 1e-8);
    if (bath.T == 0.0 && std::abs(w) <= h)
        throw std::domain_error("spectral_derivative: stencil crosses the T = 0 kink at w = 0");
    return (spectral_value(bath, w + h) - spectral_value(bath, w - h)) / (2.0 * h);
}

PiezoConstants piezo_constants(const PiezoMaterial& m)
{
    if (!(m.mu3_wire > 0.0) || !(m.mu3_substrate > 0.0))
        throw std::domain_error("piezo_constants: densities must be positive");
    if (!(m.c_n > 0.0) || !(m.c_p > 0.0))
        throw std::domain_error("piezo_constants: sound speeds must be positive");
    if (!(m.d > 0.0) || !(m.a > 0.0) || !(m.omega_r_phys > 0.0))
        throw std::domain_error("piezo_constants: d, a, omega_r must be positive");
    constexpr double hbar = 1.054571817e-34;
    constexpr double eV = 1.602176634e-19;
    const double P1hbar = m.P1hbar_eV_per_nm * eV / 1e-9;  // N
    const double P1sq_hbar = P1hbar * P1hbar / hbar;
    const double mu1 = std::numbers::pi * m.a * m.a * m.mu3_wire;
    return {P1sq_hbar * m.d / (2.0 * mu1 * m.c_n * m.c_n * m.omega_r_phys),
            P1sq_hbar / (2.0 * m.mu3_substrate * m.c_p * m.c_p * m.c_p)};
}

}  // namespace kl
