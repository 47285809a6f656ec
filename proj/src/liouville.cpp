// liouville.cpp — operator algebra, A-matrix decomposition, Liouvillian assembly, steady state
#include "kl/liouville.hpp"

#include <spdlog/spdlog.h>
#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>

namespace kl {

namespace {

// dense LU up to this Hilbert-space dimension, sparse LU beyond
constexpr int kDenseLimit = 40;

SpMat sparse_identity(int d)
{
    SpMat I(d, d);
    I.setIdentity();
    return I;
}

SpMat kron(const SpMat& A, const SpMat& B)
{
    SpMat K = Eigen::kroneckerProduct(A, B);
    return K;
}

void require_square_match(const Mat& a, const Mat& b, const char* what)
{
    if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows())
        throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

double max_abs(const SpMat& m)
{
    double mx = 0.0;
    for (int k = 0; k < m.outerSize(); ++k)
        for (SpMat::InnerIterator it(m, k); it; ++it) mx = std::max(mx, std::abs(it.value()));
    return mx;
}

bool is_hermitian(const SpMat& o)
{
    const SpMat diff = SpMat(o.adjoint()) - o;
    return max_abs(diff) <= 1e-14 * std::max(1.0, max_abs(o));
}

}  // namespace

void validate(const HilbertSpace& s)
{
    if (s.n_fock < 2) throw std::invalid_argument("HilbertSpace: n_fock must be >= 2");
    if (s.qubit_dim != 2 && s.qubit_dim != 3)
        throw std::invalid_argument("HilbertSpace: qubit_dim must be 2 or 3");
}

Ops make_ops(const HilbertSpace& s)
{
    validate(s);
    const int N = s.n_fock, Q = s.qubit_dim;
    SpMat aN(N, N), nN(N, N);
    for (int k = 1; k < N; ++k) aN.insert(k - 1, k) = std::sqrt(double(k));
    for (int k = 0; k < N; ++k) nN.insert(k, k) = double(k);
    auto qop = [&](std::initializer_list<std::tuple<int, int, double>> el) {
        SpMat m(Q, Q);
        for (auto [i, j, v] : el) m.insert(i, j) = v;
        return m;
    };
    const SpMat IQ = sparse_identity(Q), IN = sparse_identity(N);
    Ops o;
    o.id = sparse_identity(s.dim());
    o.sz = kron(qop({{0, 0, 1.0}, {1, 1, -1.0}}), IN);
    o.sm = kron(qop({{0, 1, 1.0}}), IN);
    o.sp = kron(qop({{1, 0, 1.0}}), IN);
    o.a = kron(IQ, aN);
    o.ad = SpMat(o.a.adjoint());
    o.n = kron(IQ, nN);
    o.proj_g = kron(qop({{0, 0, 1.0}}), IN);
    o.proj_e = kron(qop({{1, 1, 1.0}}), IN);
    o.proj_empty = Q == 3 ? kron(qop({{2, 2, 1.0}}), IN) : SpMat(s.dim(), s.dim());
    return o;
}

const std::array<const char*, 16> kBasisNames = {
    "1",    "sz",    "n",    "sz n", "a+",   "sz a+", "a",    "sz a",
    "s-",   "s+",    "s- n", "s+ n", "s- a+", "s+ a", "s- a", "s+ a+"};

Basis16 operator_basis(const HilbertSpace& s)
{
    const auto o = make_ops(s);
    return {o.id,        o.sz,        o.n,         SpMat(o.sz * o.n), o.ad, SpMat(o.sz * o.ad),
            o.a,         SpMat(o.sz * o.a),        o.sm,              o.sp, SpMat(o.sm * o.n),
            SpMat(o.sp * o.n),        SpMat(o.sm * o.ad),             SpMat(o.sp * o.a),
            SpMat(o.sm * o.a),        SpMat(o.sp * o.ad)};
}

Mat lindblad_apply(const Mat& o, const Mat& rho)
{
    require_square_match(o, rho, "lindblad_apply");
    const Mat od = o.adjoint();
    const Mat odo = od * o;
    return o * rho * od - 0.5 * (odo * rho + rho * odo);
}

Mat dissipator_sum_expand(const Mat& o1, const Mat& o2, const Mat& rho)
{
    require_square_match(o1, rho, "dissipator_sum_expand");
    require_square_match(o2, rho, "dissipator_sum_expand");
    const Mat o1d = o1.adjoint(), o2d = o2.adjoint();
    return o1 * rho * o2d + o2 * rho * o1d -
           0.5 * (o1d * o2 * rho + o2d * o1 * rho + rho * o1d * o2 + rho * o2d * o1);
}

SpMat superop_dissipator(const SpMat& o)
{
    const int d = int(o.rows());
    const SpMat I = sparse_identity(d);
    const SpMat odo = o.adjoint() * o;
    const SpMat oc = o.conjugate();
    SpMat L = kron(oc, o);
    L -= 0.5 * kron(I, odo);
    L -= 0.5 * kron(SpMat(odo.transpose()), I);
    return L;
}

SpMat superop_hamiltonian(const SpMat& H)
{
    const int d = int(H.rows());
    const SpMat I = sparse_identity(d);
    SpMat L = kron(I, H) - kron(SpMat(H.transpose()), I);
    return cplx(0.0, -1.0) * L;
}

Eigen::VectorXcd vectorize(const Mat& rho)
{
    return Eigen::Map<const Eigen::VectorXcd>(rho.data(), rho.size());
}

Mat unvectorize(const Eigen::VectorXcd& v, int dim)
{
    if (v.size() != Eigen::Index(dim) * dim) throw std::invalid_argument("unvectorize: size");
    return Eigen::Map<const Mat>(v.data(), dim, dim);
}

SpMat superop_from_blocks(const AMatrixBlocks& A, const Basis16& b)
{
    const int d = int(b[0].rows());
    const SpMat I = sparse_identity(d);
    SpMat L(d * d, d * d);
    for (int i = 0; i < 16; ++i) {
        for (int j = 0; j < 16; ++j) {
            const double m = A.m(i, j), s = A.s(i, j), e = A.e(i, j);
            if (m != 0.0) L += m * kron(SpMat(b[j].conjugate()), b[i]);
            if (s != 0.0 || e != 0.0) {
                const SpMat prod = b[i].adjoint() * b[j];
                if (s != 0.0) L -= 0.5 * s * kron(I, prod);
                if (e != 0.0) L -= 0.5 * e * kron(SpMat(prod.transpose()), I);
            }
        }
    }
    return L;
}

std::string DissipatorTerm::label() const
{
    std::string s = "D[";
    for (std::size_t k = 0; k < ops.size(); ++k) {
        if (k) s += " + ";
        s += kBasisNames[ops[k]];
    }
    return s + "]";
}

std::vector<DissipatorTerm> decompose_A(const AMatrixBlocks& A, const Basis16& b)
{
    const double scale = std::max({A.m.cwiseAbs().maxCoeff(), A.s.cwiseAbs().maxCoeff(), 1e-300});
    const double tol = 1e-14 * scale;
    if ((A.s - A.e).cwiseAbs().maxCoeff() > tol)
        throw std::invalid_argument("decompose_A: A_s != A_e, generator is not trace preserving");
    for (const AMatrix* M : {&A.m, &A.s})
        if ((*M - M->transpose()).cwiseAbs().maxCoeff() > tol)
            throw std::invalid_argument("decompose_A: A matrices must be symmetric");
    if ((A.m - A.s).cwiseAbs().maxCoeff() > tol)
        throw std::invalid_argument("decompose_A: A_m != A_s leaves a non-dissipative remainder");

    std::map<std::vector<int>, double> acc;
    for (int i = 0; i < 16; ++i) {
        if (i != basis::one && A.m(i, i) != 0.0) acc[{i}] += A.m(i, i);
        for (int j = i + 1; j < 16; ++j) {
            const double w = A.m(i, j);
            if (w == 0.0) continue;
            if (i == basis::one) {
                // D[1 + o] = D[o] + [o - o^+, .]/2, so pairs with 1 cancel for hermitian o
                if (!is_hermitian(b[j]))
                    throw std::invalid_argument(std::string("decompose_A: identity paired with ") +
                                                kBasisNames[j] + " leaves a commutator");
                continue;
            }
            acc[{i, j}] += w;
            acc[{i}] -= w;
            acc[{j}] -= w;
        }
    }
    std::vector<DissipatorTerm> out;
    for (const auto& [ops, w] : acc)
        if (w != 0.0) out.push_back({ops, w});

    // reassembly check
    const SpMat direct = superop_from_blocks(A, b);
    const SpMat rebuilt = assemble_terms(out, b);
    const double ref = std::max(max_abs(direct), 1e-300);
    if (max_abs(SpMat(direct - rebuilt)) > 1e-10 * ref)
        throw std::logic_error("decompose_A: reassembly does not reproduce the input");
    return out;
}

SpMat assemble_terms(const std::vector<DissipatorTerm>& terms, const Basis16& b)
{
    const int d = int(b[0].rows());
    SpMat L(d * d, d * d);
    for (const auto& t : terms) {
        SpMat o(d, d);
        for (int k : t.ops) o += b[k];
        L += t.weight * superop_dissipator(o);
    }
    return L;
}

ChannelBlocks channel_blocks(const CoefficientSet& k)
{
    const auto& c = k.c;
    ChannelBlocks cb;
    auto put = [](AMatrix& M, int off, const Eigen::Matrix4d& B) { M.block<4, 4>(off, off) = B; };
    Eigen::Matrix4d B;

    AMatrix z = AMatrix::Zero();
    B << c[1], c[2], c[1], 0, c[2], c[3], 0, c[3], c[1], 0, 0, 0, 0, c[3], 0, 0;
    put(z, 0, B);
    put(z, 4, Eigen::Vector4d(c[4], -c[4], c[4], -c[4]).asDiagonal().toDenseMatrix());
    cb.zero = AMatrixBlocks::uniform(z);

    AMatrix m = AMatrix::Zero();
    B << c[5], c[6], c[5], 0, c[6], c[7], c[5], c[8], c[5], c[5], 0, 0, 0, c[8], 0, 0;
    put(m, 0, B);
    B << c[9], c[10], 0, 0, c[10], c[11], 0, 0, 0, 0, c[12], c[10], 0, 0, c[10], c[13];
    put(m, 4, B);
    B << c[14], 0, -c[8], 0, 0, c[15], 0, c[16], -c[8], 0, 0, 0, 0, c[16], 0, 0;
    put(m, 8, B);
    put(m, 12, Eigen::Vector4d(c[17], c[18], c[19], c[20]).asDiagonal().toDenseMatrix());
    cb.minus = AMatrixBlocks::uniform(m);

    AMatrix p = AMatrix::Zero();
    B << c[5], c[21], c[5], 0, c[21], c[22], -c[5], c[8], c[5], -c[5], 0, 0, 0, c[8], 0, 0;
    put(p, 0, B);
    B << c[12], -c[10], 0, 0, -c[10], c[13], 0, 0, 0, 0, c[9], -c[10], 0, 0, -c[10], c[11];
    put(p, 4, B);
    B << c[23], 0, c[16], 0, 0, c[24], 0, -c[8], c[16], 0, 0, 0, 0, -c[8], 0, 0;
    put(p, 8, B);
    put(p, 12, Eigen::Vector4d(c[18], c[17], c[20], c[19]).asDiagonal().toDenseMatrix());
    cb.plus = AMatrixBlocks::uniform(p);

    AMatrix dp = AMatrix::Zero();
    B << c[25], c[26], 0, -c[27], c[26], c[27], 0, c[27], 0, 0, 0, 0, -c[27], c[27], 0, 0;
    put(dp, 0, B);
    B << -4 * c[27], 0, -4 * c[27], 0, 0, 0, 0, 0, -4 * c[27], 0, 0, 0, 0, 0, 0, 0;
    put(dp, 8, B);
    cb.dplus = AMatrixBlocks::uniform(dp);

    AMatrix dm = AMatrix::Zero();
    B << c[25], c[28], 0, -c[27], c[28], -c[27], 0, -c[27], 0, 0, 0, 0, -c[27], -c[27], 0, 0;
    put(dm, 0, B);
    B << 0, 0, 0, 0, 0, 4 * c[27], 0, 4 * c[27], 0, 0, 0, 0, 0, 4 * c[27], 0, 0;
    put(dm, 8, B);
    cb.dminus = AMatrixBlocks::uniform(dm);
    return cb;
}

AMatrixBlocks dominant_blocks(const DominantRates& d)
{
    AMatrix A = AMatrix::Zero();
    A(basis::sm_ad, basis::sm_ad) = d.down_plus;
    A(basis::sm_a, basis::sm_a) = d.down_minus;
    A(basis::sp_a, basis::sp_a) = d.up_minus;
    A(basis::sp_ad, basis::sp_ad) = d.up_plus;
    A(basis::sz_a, basis::sz_a) = d.phi_minus;
    A(basis::sz_ad, basis::sz_ad) = d.phi_plus;
    return AMatrixBlocks::uniform(A);
}

SpMat build_from_blocks(const SystemParams& p, const BathModel& bath, const HilbertSpace& s,
                        const RateOptions& opt)
{
    const auto b = operator_basis(s);
    const auto cb = channel_blocks(coefficients(p));
    const auto smp = sample_bath(p, bath, opt);
    SpMat L = superop_from_blocks(dominant_blocks(dominant_rates(p, bath)), b);
    L += superop_from_blocks(cb.zero.scaled(smp.C0), b);
    L += superop_from_blocks(cb.plus.scaled(smp.Cp), b);
    L += superop_from_blocks(cb.minus.scaled(smp.Cm), b);
    if (opt.derivative_terms) {
        L += superop_from_blocks(cb.dplus.scaled(smp.Dp), b);
        L += superop_from_blocks(cb.dminus.scaled(smp.Dm), b);
    }
    return L;
}

SpMat build_fourth_order(const SystemParams& p, const BathModel& bath, const HilbertSpace& s,
                         Theory th, const RateOptions& opt)
{
    const auto o = make_ops(s);
    const SpMat sma = o.sm * o.a, smad = o.sm * o.ad, spa = o.sp * o.a, spad = o.sp * o.ad;
    const SpMat sza = o.sz * o.a, szad = o.sz * o.ad;
    auto D = [](const SpMat& x) { return superop_dissipator(x); };

    if (th != Theory::full21) {
        const auto d = dominant_rates(p, bath);
        SpMat L = d.down_plus * D(smad) + d.down_minus * D(sma) + d.up_plus * D(spad) +
                  d.up_minus * D(spa);
        if (th == Theory::dominant6) L += d.phi_minus * D(sza) + d.phi_plus * D(szad);
        return L;
    }

    const auto t = full_gamma_table(p, bath, opt);
    const SpMat szn = o.sz * o.n, smn = o.sm * o.n, spn = o.sp * o.n;
    SpMat L = t.down_plus * D(smad) + t.down_minus * D(sma) + t.up_plus * D(spad) +
              t.up_minus * D(spa);
    L += t.phi_plus * D(szad) + t.phi_minus * D(sza);
    L += t.minus * D(o.a) + t.plus * D(o.ad);
    L += t.updown * (D(o.sp) + D(o.sm));
    L += t.n * (D(o.n) - D(SpMat(o.sz + o.n))) + t.phi4 * D(o.sz);
    L += t.pm_phipm * (D(SpMat(o.a + sza)) + D(SpMat(o.ad + szad)));
    L += t.phi_n * (D(szn) - D(SpMat(o.sz + szn)));
    L += t.down_n * (D(smn) - D(SpMat(o.sm + smn)));
    L += t.up_n * (D(spn) - D(SpMat(o.sp + spn)));
    return L;
}

const char* lead_source_name(LeadSource l) { return l == LeadSource::left ? "left" : "right"; }

LeadSource parse_lead_source(const std::string& s)
{
    if (s == "left") return LeadSource::left;
    if (s == "right") return LeadSource::right;
    throw std::invalid_argument("unknown lead source '" + s + "' (left|right)");
}

std::array<double, 2> ket_left(double theta) { return {std::cos(theta / 2), std::sin(theta / 2)}; }

std::array<double, 2> ket_right(double theta)
{
    return {-std::sin(theta / 2), std::cos(theta / 2)};
}

std::array<SpMat, 2> lead_jumps(double theta, LeadSource src)
{
    const auto in = src == LeadSource::left ? ket_left(theta) : ket_right(theta);
    const auto out = src == LeadSource::left ? ket_right(theta) : ket_left(theta);
    SpMat jin(3, 3), jout(3, 3);
    for (int q = 0; q < 2; ++q) {
        if (in[q] != 0.0) jin.insert(q, 2) = in[q];
        if (out[q] != 0.0) jout.insert(2, q) = out[q];
    }
    return {jin, jout};
}

SpMat build_lead_dissipator(const SystemParams& p, const HilbertSpace& s, LeadSource src)
{
    const int d = s.dim();
    if (p.Gamma_L == 0.0 && p.Gamma_R == 0.0) return SpMat(d * d, d * d);
    if (s.qubit_dim != 3)
        throw std::invalid_argument("leads require qubit_dim = 3 (empty state)");
    const auto j = lead_jumps(p.theta(), src);
    const SpMat IN = sparse_identity(s.n_fock);
    return p.Gamma_L * superop_dissipator(kron(j[0], IN)) +
           p.Gamma_R * superop_dissipator(kron(j[1], IN));
}

SpMat build_full_liouvillian(const SystemParams& p, const BathModel& bath, const HilbertSpace& s,
                             const LiouvillianOptions& opt)
{
    validate(p);
    validate(bath);
    const auto o = make_ops(s);
    const auto ds = dispersive_shifts(p);
    const double wq = p.omega_q();
    SpMat H = p.delta_r() * o.n - 0.5 * wq * o.sz;
    H += ds.chi_tilde * (o.sz + 2.0 * SpMat(o.n * o.sz));
    H += 0.5 * p.eps_d * (o.a + o.ad);

    const auto r2 = second_order_rates(p, bath);
    SpMat L = superop_hamiltonian(H);
    L += r2.down * superop_dissipator(o.sm) + r2.up * superop_dissipator(o.sp) +
         r2.phi * superop_dissipator(o.sz);
    L += build_fourth_order(p, bath, s, opt.theory, opt.rates);
    L += p.kappa_minus_r * superop_dissipator(o.a) + p.kappa_plus_r * superop_dissipator(o.ad);
    L += build_lead_dissipator(p, s, opt.lead_source);
    L.prune(cplx(0.0, 0.0));
    L.makeCompressed();
    return L;
}

double trace_preservation_error(const SpMat& L, int dim)
{
    Eigen::VectorXcd one = vectorize(Mat::Identity(dim, dim));
    const Eigen::RowVectorXcd r = one.transpose() * L;
    return r.cwiseAbs().maxCoeff();
}

SteadyState steady_state(const SpMat& L, const HilbertSpace& s)
{
    const int d = s.dim();
    const int D2 = d * d;
    if (L.rows() != D2 || L.cols() != D2)
        throw std::invalid_argument("steady_state: superoperator does not match the space");
    if (trace_preservation_error(L, d) > 1e-9 * std::max(1.0, max_abs(L)))
        throw std::invalid_argument("steady_state: Liouvillian is not trace preserving");

    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(D2);
    rhs(0) = 1.0;
    Eigen::VectorXcd x;

    if (d <= kDenseLimit) {
        Mat A = Mat(L);
        // the rho_00 equation is redundant; replace it by the trace condition
        A.row(0).setZero();
        for (int i = 0; i < d; ++i) A(0, i + i * d) = 1.0;
        Eigen::PartialPivLU<Mat> lu(A);
        // rcond alone can miss exact zero pivots, so check the pivots as well
        const Eigen::VectorXd piv = lu.matrixLU().diagonal().cwiseAbs();
        const double rc = lu.rcond();
        bool solved = false;
        if (std::isfinite(rc) && rc > 1e-13 && piv.minCoeff() > 1e-13 * piv.maxCoeff()) {
            x = lu.solve(rhs);
            solved = x.allFinite();
        }
        if (!solved) {
            Eigen::BDCSVD<Mat> svd(Mat(L), Eigen::ComputeFullV);
            const auto& sv = svd.singularValues();
            int nulls = 0;
            for (int k = 0; k < sv.size(); ++k)
                if (sv(k) <= 1e-10 * std::max(sv(0), 1e-300)) ++nulls;
            if (nulls > 1)
                throw std::runtime_error("steady_state: ambiguous steady state (null space dimension " +
                                         std::to_string(nulls) + ")");
            x = svd.matrixV().col(D2 - 1);
            cplx tr = 0.0;
            for (int i = 0; i < d; ++i) tr += x(i + i * d);
            x /= tr;
        }
    } else {
        SpMat A = L;
        for (int c = 0; c < D2; ++c) A.coeffRef(0, c) = 0.0;
        for (int i = 0; i < d; ++i) A.coeffRef(0, i + i * d) = 1.0;
        A.prune(cplx(0.0, 0.0));
        A.makeCompressed();
        Eigen::SparseLU<SpMat> lu;
        lu.compute(A);
        if (lu.info() != Eigen::Success)
            throw std::runtime_error("steady_state: sparse factorisation failed (ambiguous steady state?)");
        x = lu.solve(rhs);
    }

    SteadyState ss;
    Mat rho = unvectorize(x, d);
    rho = 0.5 * (rho + rho.adjoint()).eval();
    rho /= rho.trace().real();

    Eigen::SelfAdjointEigenSolver<Mat> es(rho);
    ss.min_eigenvalue = es.eigenvalues().minCoeff();
    if (ss.min_eigenvalue < -1e-8) {
        ss.positivity_violation = true;
        spdlog::warn("steady_state: negative eigenvalue {:.3e}", ss.min_eigenvalue);
    } else if (ss.min_eigenvalue < 0.0) {
        Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
        rho = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
        rho /= rho.trace().real();
    }
    for (int q = 0; q < s.qubit_dim; ++q) {
        const int k = s.index(q, s.n_fock - 1);
        ss.leakage += rho(k, k).real();
    }
    if (ss.leakage > 1e-6) {
        ss.truncation_warning = true;
        spdlog::warn("steady_state: top Fock level population {:.3e} > 1e-6; raise n_fock", ss.leakage);
    }
    ss.rho = std::move(rho);
    return ss;
}

cplx expect(const SpMat& o, const Mat& rho) { return (o * rho).trace(); }

void write_matrix_text(std::ostream& os, const Mat& m)
{
    const auto old = os.precision(17);
    os << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            os << m(i, j).real() << ' ' << m(i, j).imag() << '\n';
    os.precision(old);
}

Mat read_matrix_text(std::istream& is)
{
    Eigen::Index r = 0, c = 0;
    if (!(is >> r >> c) || r < 0 || c < 0) throw std::invalid_argument("read_matrix_text: bad header");
    Mat m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) {
            double re, im;
            if (!(is >> re >> im)) throw std::invalid_argument("read_matrix_text: truncated data");
            m(i, j) = cplx(re, im);
        }
    return m;
}

}  // namespace kl
