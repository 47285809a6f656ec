// pipeline.hpp — gain sweeps, smoothing, rate landscapes and the paper figure runs
#pragma once

#include "kl/meanfield.hpp"

#include <cmath>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace kl {

// run f(0..n-1) on up to `jobs` threads; results are written by index so order is fixed
void parallel_for(int n, int jobs, const std::function<void(int)>& f);

std::vector<double> linspace(double a, double b, int n);

// Normalised Gaussian convolution on the sample grid. NaN entries are missing:
// they are skipped and the kernel is renormalised over what remains.
std::vector<double> gaussian_smooth(const std::vector<double>& x, const std::vector<double>& y, double w);
inline double kernel_fwhm(double w) { return std::sqrt(8.0 * std::log(2.0)) * w; }

struct SweepSpec {
    double eps_min = -10.0, eps_max = 10.0;
    int count = 401;
    Theory variant = Theory::full21;
    double w = 1.7;
    bool operator==(const SweepSpec&) const = default;
};

void validate(const SweepSpec& s);

struct SweepPoint {
    double eps_q;
    double G_raw;       // NaN when missing
    double G_smooth;
    bool ok = false;
    SolveReport report;
    std::string error;
};

struct SweepResult {
    SweepSpec spec;
    std::vector<SweepPoint> points;
    bool edge_flag = false;   // +-4w kernel support leaves the grid
    int missing() const;
};

SweepResult run_gain_sweep(const SweepSpec& spec, const SystemParams& p, const BathModel& bath,
                           const MeanfieldOptions& opt = {}, int jobs = 1);

// Rate surfaces divided by g^2.
enum class LandscapeQuantity { kappa4, gamma4, phi4 };
enum class LandscapeAxes { omega_theta, eps_delta };
const char* landscape_quantity_name(LandscapeQuantity q);
LandscapeQuantity parse_landscape_quantity(const std::string& s);
const char* landscape_axes_name(LandscapeAxes a);
LandscapeAxes parse_landscape_axes(const std::string& s);

struct LandscapeSpec {
    LandscapeAxes axes = LandscapeAxes::omega_theta;
    double x_min = 0.3, x_max = 3.0;   // omega_q or eps_q
    int nx = 55;
    double y_min = 0.1 * 3.141592653589793, y_max = 0.9 * 3.141592653589793;  // theta or Delta_q
    int ny = 41;
    LandscapeQuantity quantity = LandscapeQuantity::kappa4;
    RateOptions rates{};
    bool operator==(const LandscapeSpec&) const = default;
};

struct LandscapePanel {
    std::string name;
    Eigen::MatrixXd values;   // (ny, nx); NaN on masked cells
};

struct LandscapeResult {
    LandscapeSpec spec;
    std::vector<double> x, y;
    std::vector<LandscapePanel> panels;
    double resonance_omega_q = 1.0;
    int masked = 0;
};

LandscapeResult run_rate_landscape(const LandscapeSpec& spec, const SystemParams& p,
                                   const BathModel& bath);

struct Fig2Result {
    std::vector<double> eps;
    SweepResult polaron, dominant6, full21;
    std::vector<DominantRates> rates;   // per grid point
    std::vector<double> sigma_z_ss;     // full21 fixed point
    std::vector<double> sigma_z_th;
};

// the reference gain-profile setting used by run_fig2
SystemParams fig2_system();
BathModel fig2_bath(double T = 7.8);
SweepSpec fig2_sweep(Theory variant = Theory::full21);

Fig2Result run_fig2(const SystemParams& p, const BathModel& bath, const SweepSpec& spec,
                    const MeanfieldOptions& opt = {}, int jobs = 1);

double thermal_sigma_z(const SystemParams& p, double T);

struct HighTResult {
    double T_low, T_high;
    SweepResult low, high;
};

HighTResult run_high_temperature_compare(const SystemParams& p, const BathModel& bath,
                                         const SweepSpec& spec, double T_low = 7.8,
                                         double T_high = 23.4, const MeanfieldOptions& opt = {},
                                         int jobs = 1);

// leftmost eps where the smoothed gain falls below 1 - (1 - min G)/2
double loss_half_depth_edge(const SweepResult& r);

// CSV writers; `preamble` lines are emitted with a leading "# "
void write_sweep_csv(std::ostream& os, const SweepResult& r, const std::vector<std::string>& preamble);
void write_fig2_csv(std::ostream& os, const Fig2Result& r, const std::vector<std::string>& preamble);
void write_landscape_csv(std::ostream& os, const LandscapeResult& r,
                         const std::vector<std::string>& preamble);
void write_high_t_csv(std::ostream& os, const HighTResult& r, const std::vector<std::string>& preamble);
void write_rates_csv(std::ostream& os, const std::vector<RateRow>& rows,
                     const std::vector<std::string>& preamble);

// %.17g formatting for CSV cells
std::string csv_number(double v);

}  // namespace kl
