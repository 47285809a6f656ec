// liouville.hpp — operators and Liouvillians on qubit(2|3) x Fock(N)
#pragma once

#include "kl/rates.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <complex>
#include <iosfwd>
#include <string>
#include <vector>

namespace kl {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using SpMat = Eigen::SparseMatrix<cplx>;

// Qubit states: 0 = g, 1 = e, 2 = empty. Composite index = q * n_fock + n.
struct HilbertSpace {
    int n_fock = 3;
    int qubit_dim = 2;
    int dim() const { return n_fock * qubit_dim; }
    int index(int q, int n) const { return q * n_fock + n; }
};

void validate(const HilbertSpace& s);

// sigma_z = |g><g| - |e><e|, sigma_- = |g><e|; both vanish on the empty state.
struct Ops {
    SpMat id, sz, sm, sp, a, ad, n;
    SpMat proj_g, proj_e, proj_empty;
};

Ops make_ops(const HilbertSpace& s);

// 1, sz, n, sz n, a+, sz a+, a, sz a, s-, s+, s- n, s+ n, s- a+, s+ a, s- a, s+ a+
using Basis16 = std::array<SpMat, 16>;
Basis16 operator_basis(const HilbertSpace& s);
extern const std::array<const char*, 16> kBasisNames;

namespace basis {
enum : int {
    one, sz, n, sz_n, ad, sz_ad, a, sz_a,
    sm, sp, sm_n, sp_n, sm_ad, sp_a, sm_a, sp_ad
};
}

Mat lindblad_apply(const Mat& o, const Mat& rho);
// D[o1+o2] rho - D[o1] rho - D[o2] rho
Mat dissipator_sum_expand(const Mat& o1, const Mat& o2, const Mat& rho);

// Superoperators act on column-stacked density matrices.
SpMat superop_dissipator(const SpMat& o);
SpMat superop_hamiltonian(const SpMat& H);
Eigen::VectorXcd vectorize(const Mat& rho);
Mat unvectorize(const Eigen::VectorXcd& v, int dim);

using AMatrix = Eigen::Matrix<double, 16, 16>;

struct AMatrixBlocks {
    AMatrix m = AMatrix::Zero();
    AMatrix s = AMatrix::Zero();
    AMatrix e = AMatrix::Zero();
    static AMatrixBlocks uniform(const AMatrix& a) { return {a, a, a}; }
    AMatrixBlocks scaled(double f) const { return {m * f, s * f, e * f}; }
};

// sigma A_m rho sigma^+ - 1/2 {sigma^+ A_s sigma, rho} evaluated term by term
SpMat superop_from_blocks(const AMatrixBlocks& A, const Basis16& b);

// A weighted dissipator of a sum of basis operators, e.g. {1, 3} -> D[sz + sz n].
struct DissipatorTerm {
    std::vector<int> ops;
    double weight;
    std::string label() const;
};

std::vector<DissipatorTerm> decompose_A(const AMatrixBlocks& A, const Basis16& b);
SpMat assemble_terms(const std::vector<DissipatorTerm>& terms, const Basis16& b);

// Coefficient blocks per frequency channel, without the C factor.
struct ChannelBlocks {
    AMatrixBlocks zero, plus, minus, dplus, dminus;
};

ChannelBlocks channel_blocks(const CoefficientSet& c);
// the six dominant single-entry blocks, already weighted by their rates
AMatrixBlocks dominant_blocks(const DominantRates& d);

// Fourth-order generator built directly from the A-matrix channels (oracle path).
SpMat build_from_blocks(const SystemParams& p, const BathModel& bath, const HilbertSpace& s,
                        const RateOptions& opt = {});

// Fourth-order generator from the 21 named dissipators and their rates.
SpMat build_fourth_order(const SystemParams& p, const BathModel& bath, const HilbertSpace& s,
                         Theory th = Theory::full21, const RateOptions& opt = {});

// Which dot the source lead fills. Criterion-driven default, see README.
enum class LeadSource { left, right };
const char* lead_source_name(LeadSource l);
LeadSource parse_lead_source(const std::string& s);

struct LiouvillianOptions {
    Theory theory = Theory::full21;
    RateOptions rates{};
    LeadSource lead_source = LeadSource::right;
};

// |L>, |R> in the {g, e} eigenbasis
std::array<double, 2> ket_left(double theta);
std::array<double, 2> ket_right(double theta);

// qubit-space (3x3) jump operators {|in><empty|, |empty><out|}
std::array<SpMat, 2> lead_jumps(double theta, LeadSource src);

SpMat build_lead_dissipator(const SystemParams& p, const HilbertSpace& s, LeadSource src);

SpMat build_full_liouvillian(const SystemParams& p, const BathModel& bath, const HilbertSpace& s,
                             const LiouvillianOptions& opt = {});

struct SteadyState {
    Mat rho;
    double leakage = 0.0;  // population of the top Fock level
    bool truncation_warning = false;
    double min_eigenvalue = 0.0;
    bool positivity_violation = false;
};

SteadyState steady_state(const SpMat& L, const HilbertSpace& s);

double trace_preservation_error(const SpMat& L, int dim);

cplx expect(const SpMat& o, const Mat& rho);

// "rows cols" header, then one "re im" pair per line in row-major order
void write_matrix_text(std::ostream& os, const Mat& m);
Mat read_matrix_text(std::istream& is);

}  // namespace kl
