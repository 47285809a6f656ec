// spectral.hpp — bath spectral functions C(w), C'(w) and the piezo-phonon densities
#pragma once

#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace kl {

// k_B T / hbar at 1 K, in rad/s
inline constexpr double kKelvinRadPerSec = 1.380649e-23 / 1.054571817e-34;

// physical resonator frequency from a temperature ratio k_B T / w_r
double omega_r_from_temperature(double kelvin, double ratio);

// Reference w_r: k_B * 3 K / w_r = 7.8 (about 2 pi * 8.0 GHz).
double default_omega_r_phys();

struct Ohmic {
    double amplitude = 1.0;
    bool operator==(const Ohmic&) const = default;
};

// Lengths in metres, speeds in m/s. omega_r_phys converts the dimensionless
// frequency w/w_r into rad/s for the geometric arguments w d / c.
struct Piezo {
    double F = 2.9;
    double P = 0.25;
    double d = 120e-9;
    double a = 25e-9;
    double c_n = 4000.0;
    double c_s = 5000.0;
    double omega_r_phys = default_omega_r_phys();
    bool operator==(const Piezo&) const = default;
};

// Monotone cubic (PCHIP) interpolation of J on a grid starting at w = 0.
class Tabulated {
public:
    Tabulated() = default;
    Tabulated(std::vector<double> omega, std::vector<double> J);
    static Tabulated load(const std::string& path);

    double J(double w) const;
    double J_prime(double w) const;
    double omega_max() const { return omega_.empty() ? 0.0 : omega_.back(); }
    const std::vector<double>& omega() const { return omega_; }
    const std::vector<double>& values() const { return J_; }
    const std::string& source() const { return source_; }
    bool operator==(const Tabulated& o) const
    {
        return omega_ == o.omega_ && J_ == o.J_ && source_ == o.source_;
    }

private:
    struct Impl;
    std::vector<double> omega_, J_;
    std::shared_ptr<const Impl> impl_;
    std::string source_;
};

struct BathModel {
    std::variant<Ohmic, Piezo, Tabulated> variant = Ohmic{};
    double T = 0.0;
    std::optional<double> c0_override;
    bool operator==(const BathModel&) const = default;
};

// throws std::invalid_argument when any invariant is violated
void validate(const BathModel& bath);

const char* variant_name(const BathModel& bath);

// Bose occupation 1/(e^{w/T}-1), with the T = 0 limit handled
double n_thermal(double w, double T);

// J(w) in units of w_r; requires w >= 0
double spectral_density(const BathModel& bath, double w);

// J_1D + J_3D for w >= 0 (dimensionless, w_r = 1)
double piezo_density(const Piezo& pz, double w);
double piezo_density_1d(const Piezo& pz, double w);
double piezo_density_3d(const Piezo& pz, double w);

// C(w) = J(|w|) (n_th(|w|) + step(w)); C(0) is the analytic limit T J'(0)
double spectral_value(const BathModel& bath, double w);
double spectral_derivative(const BathModel& bath, double w);

struct PiezoMaterial {
    double mu3_wire = 5.7e3;        // kg/m^3, InAs
    double mu3_substrate = 3.2e3;   // kg/m^3, SiN
    double P1hbar_eV_per_nm = 0.725;
    double d = 120e-9;
    double a = 25e-9;
    double c_n = 4000.0;
    double c_p = 5000.0;
    double omega_r_phys = default_omega_r_phys();
};

struct PiezoConstants {
    double F;
    double P;
};

PiezoConstants piezo_constants(const PiezoMaterial& m);

}  // namespace kl
