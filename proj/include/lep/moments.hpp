#pragma once

// First- and second-moment generators of the field operators under the full
// Liouvillian and under the bare effective Hamiltonian.

#include <string>
#include <vector>

#include "lep/linalg.hpp"
#include "lep/model.hpp"
#include "lep/nhh.hpp"

namespace lep {

enum class Formalism { Liouvillian, NhhOnly };

inline const char* to_string(Formalism f) { return f == Formalism::Liouvillian ? "liouvillian" : "nhh-only"; }

/// d/dt x = generator * x + drive, over labeled moments.
struct MomentSystem {
    CMatrix generator;
    CVector noise;   // b: drive per unit thermal occupation
    CVector drive;   // n_th * b
    std::vector<std::string> basis;
    Formalism formalism = Formalism::Liouvillian;
    int n_modes = 0;
    int order = 2;
    bool supermodes = false;
};

namespace detail {

inline std::vector<std::string> second_moment_labels(int n, const char* op) {
    std::vector<std::string> out;
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
            out.push_back("<" + std::string(op) + std::to_string(j + 1) + "^dag " + op + std::to_string(k + 1) + ">");
    return out;
}

// Row-major vectorization over (j, k): index j * n + k.
inline CVector vec_rows(const CMatrix& m) {
    CVector v(m.size());
    for (Eigen::Index j = 0; j < m.rows(); ++j)
        for (Eigen::Index k = 0; k < m.cols(); ++k) v(j * m.cols() + k) = m(j, k);
    return v;
}

}  // namespace detail

inline CMatrix unvec_rows(const CVector& v, int n) {
    CMatrix m(n, n);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) m(j, k) = v(j * n + k);
    return m;
}

/// d<a>/dt = -i H_eff <a>.
inline MomentSystem first_moment_generator(const ValidatedModel& model, Frame frame = Frame::Rotating) {
    const int n = model.n();
    MomentSystem s;
    s.generator = -I_unit * build_effective_nhh(model, frame).matrix;
    s.noise = CVector::Zero(n);
    s.drive = CVector::Zero(n);
    for (int k = 0; k < n; ++k) s.basis.push_back("<a" + std::to_string(k + 1) + ">");
    s.n_modes = n;
    s.order = 1;
    return s;
}

/// C_jk = <a_j^dag a_k> obeys dC/dt = i H* C - i C H^T + n_th gamma^T.
/// The frame cancels in these moments.
inline MomentSystem second_moment_system(const ValidatedModel& model) {
    const int n = model.n();
    const CMatrix h = build_effective_nhh(model, Frame::Rotating).matrix;
    const CMatrix id = CMatrix::Identity(n, n);
    MomentSystem s;
    s.generator = kron(I_unit * h.conjugate(), id) + kron(id, -I_unit * h);
    s.noise = detail::vec_rows(model.spec.gamma.transpose());
    s.drive = model.spec.n_th * s.noise;
    s.basis = detail::second_moment_labels(n, "a");
    s.n_modes = n;
    return s;
}

/// Second moments evolved by the effective Hamiltonian alone,
/// dO/dt = i (H_eff^dag O - O H_eff): no refilling by quantum jumps and no drive.
inline MomentSystem nhh_second_moment_system(const ValidatedModel& model) {
    const int n = model.n();
    const CMatrix h = build_effective_nhh(model, Frame::Rotating).matrix;
    const CMatrix id = CMatrix::Identity(n, n);
    MomentSystem s;
    s.generator = kron(I_unit * h.conjugate(), id) + kron(id, -I_unit * h.adjoint());
    s.noise = CVector::Zero(n * n);
    s.drive = CVector::Zero(n * n);
    s.basis = detail::second_moment_labels(n, "a");
    s.formalism = Formalism::NhhOnly;
    s.n_modes = n;
    return s;
}

/// T = R(pi/4) (x) R(pi/4) = (1/2) [[1,-1],[1,1]] (x) [[1,-1],[1,1]].
inline CMatrix supermode_moment_transform() {
    const CMatrix r = rotation(kPi / 4).cast<cplx>();
    return kron(r, r);
}

/// N = T M T^-1, d = T b.
inline MomentSystem transform_to_supermodes(const MomentSystem& sys) {
    if (sys.generator.rows() != 4 || sys.order != 2)
        throw ValidationError("transform_to_supermodes: requires the 4-dimensional bimodal second-moment system");
    const CMatrix t = supermode_moment_transform();
    MomentSystem out = sys;
    out.generator = t * sys.generator * t.inverse();
    out.noise = t * sys.noise;
    out.drive = t * sys.drive;
    out.basis = detail::second_moment_labels(2, "c");
    out.supermodes = true;
    return out;
}

/// Solves generator * C + n_th * b = 0.
inline CVector steady_state_moments(const MomentSystem& sys, double n_th) {
    if (sys.formalism != Formalism::Liouvillian)
        throw ValidationError("steady_state_moments: requires the Liouvillian formalism");
    Eigen::FullPivLU<CMatrix> lu(sys.generator);
    lu.setThreshold(1e-12);
    if (!lu.isInvertible())
        throw NumericalError("steady_state_moments: singular generator, no unique steady state");
    return lu.solve(CVector(-n_th * sys.noise));
}

/// Steady-state C_jk per unit thermal occupation; C_ss = n_th * C1.
inline CMatrix unit_steady_state(const ValidatedModel& model) {
    return unvec_rows(steady_state_moments(second_moment_system(model), 1.0), model.n());
}

/// Change of basis from the N^2 complex moments C_jk to real coordinates
/// (C_jj, Re C_jk, Im C_jk for j < k). Because C is Hermitian, any
/// second-moment generator becomes a real matrix in these coordinates.
inline CMatrix hermitian_coordinates(int n) {
    CMatrix q = CMatrix::Zero(n * n, n * n);
    int row = 0;
    for (int j = 0; j < n; ++j)
        for (int k = j; k < n; ++k) {
            if (j == k) {
                q(row++, j * n + k) = 1.0;
                continue;
            }
            q(row, j * n + k) = 0.5;
            q(row, k * n + j) = 0.5;
            ++row;
            q(row, j * n + k) = cplx(0.0, -0.5);
            q(row, k * n + j) = cplx(0.0, 0.5);
            ++row;
        }
    return q;
}

/// The generator in Hermitian coordinates; throws if it is not real there.
inline RMatrix real_form(const MomentSystem& sys) {
    const int n = sys.n_modes;
    if (sys.order != 2 || sys.supermodes) throw ValidationError("real_form: requires a lab-basis second-moment system");
    const CMatrix q = hermitian_coordinates(n);
    const CMatrix r = q * sys.generator * q.inverse();
    if (r.imag().cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, max_abs(sys.generator)))
        throw NumericalError("real_form: generator does not preserve Hermiticity of the moments");
    return r.real();
}

struct MultiplicityReport {
    cplx lambda;
    int algebraic = 0;
    int geometric = 0;
    std::vector<int> jordan_blocks;
    int lep_order = 1;  // size of the largest Jordan block when defective, else 1
};

inline std::vector<MultiplicityReport> multiplicity_report(const CMatrix& generator,
                                                           double tol = kDefaultClusterTol) {
    const auto rep = eigendecompose(generator, tol);
    std::vector<MultiplicityReport> out;
    for (const auto& c : rep.clusters) {
        MultiplicityReport m;
        m.lambda = c.center;
        m.algebraic = c.algebraic;
        m.geometric = c.geometric;
        m.jordan_blocks = c.jordan_blocks;
        m.lep_order = c.defective() ? c.largest_block() : 1;
        out.push_back(m);
    }
    return out;
}

inline std::vector<MultiplicityReport> multiplicity_report(const MomentSystem& sys, double tol = kDefaultClusterTol) {
    return multiplicity_report(sys.generator, tol);
}

/// Parity for the bimodal second-moment vector: the mode swap acting on both indices.
inline CMatrix moment_parity() { return kron(sigma_x(), sigma_x()); }

/// Anti-PT residual of iM and, with `gauged`, the PT residual of i(M + g I)
/// where g = -Re tr(M) / 4 is the mean moment decay rate.
inline SymmetryReport check_moment_symmetry(const MomentSystem& sys, bool gauged) {
    if (sys.generator.rows() != 4)
        throw ValidationError("check_moment_symmetry: requires the 4-dimensional bimodal system");
    const CMatrix x = I_unit * sys.generator;
    const double shift = gauged ? -sys.generator.trace().real() / 4.0 : 0.0;
    auto r = detail::classify(x, moment_parity(), shift);
    if (gauged && r.classification == SymmetryClass::AntiPT && r.pt_residual_after_gauge < r.anti_pt_residual)
        r.classification = SymmetryClass::PassivePT;
    return r;
}

}  // namespace lep
