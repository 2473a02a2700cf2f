#pragma once

// Effective non-Hermitian Hamiltonian, its exceptional points, supermode
// rotations, and PT / anti-PT diagnostics.

#include <array>
#include <cmath>
#include <optional>
#include <string>

#include "lep/linalg.hpp"
#include "lep/model.hpp"

namespace lep {

enum class Frame { Lab, Rotating };

inline const char* to_string(Frame f) { return f == Frame::Lab ? "lab" : "rotating"; }

struct EffectiveNhh {
    CMatrix matrix;       // element (j, k) is the coefficient of a_j^dag a_k
    Frame frame = Frame::Lab;
    double shift = 0.0;   // frequency subtracted from the diagonal (mean mode frequency when rotating)
};

/// H_eff = H_c - (i/2) gamma, with H_c = diag(omega - shift) + chi.
inline EffectiveNhh build_effective_nhh(const ValidatedModel& model, Frame frame = Frame::Rotating) {
    const auto& s = model.spec;
    EffectiveNhh h;
    h.frame = frame;
    h.shift = frame == Frame::Rotating ? s.omega.mean() : 0.0;
    h.matrix = s.chi - 0.5 * I_unit * s.gamma;
    for (int k = 0; k < s.n_modes; ++k) h.matrix(k, k) += s.omega(k) - h.shift;
    return h;
}

/// gamma12 at which the bimodal discriminant sqrt(gamma12^2 - Delta^2) vanishes.
inline double hep_locus_bimodal(double delta) { return std::abs(delta); }

/// Complex discriminant D = sqrt(gamma12^2 - Delta^2) (principal branch).
inline cplx bimodal_discriminant(double gamma12, double delta) {
    return std::sqrt(cplx(gamma12 * gamma12 - delta * delta, 0.0));
}

/// Closed-form bimodal eigenvalues nu = omega_bar - (i/2)(gamma -/+ D), in the
/// frame where omega_bar has already been removed unless `omega_bar` is given.
inline std::array<cplx, 2> bimodal_eigenvalues(double gamma, double gamma12, double delta, double omega_bar = 0.0) {
    const cplx d = bimodal_discriminant(gamma12, delta);
    return {omega_bar - 0.5 * I_unit * (gamma - d), omega_bar - 0.5 * I_unit * (gamma + d)};
}

/// lambda_i = -i nu_i.
inline CVector liouvillian_eigs_from_nhh(const EigenReport& report) { return -I_unit * report.eigenvalues; }

// ---- symmetry ----

enum class SymmetryClass { AntiPT, PassivePT, None };

inline const char* to_string(SymmetryClass c) {
    switch (c) {
        case SymmetryClass::AntiPT: return "anti-PT-symmetric";
        case SymmetryClass::PassivePT: return "passive-PT-symmetric";
        default: return "none";
    }
}

struct SymmetryReport {
    double anti_pt_residual = 0.0;
    double pt_residual_after_gauge = 0.0;
    double gauge_rate = 0.0;
    SymmetryClass classification = SymmetryClass::None;
};

inline CMatrix sigma_x() {
    CMatrix p(2, 2);
    p << 0, 1, 1, 0;
    return p;
}

namespace detail {

inline void check_parity(const CMatrix& p, Eigen::Index n) {
    if (p.rows() != p.cols() || p.rows() != n)
        throw ValidationError("parity matrix must be square and match the generator dimension");
    const double dev = (p * p - CMatrix::Identity(n, n)).cwiseAbs().maxCoeff();
    if (dev > 1e-12) throw ValidationError("parity matrix is not an involution (P^2 != I)");
}

inline SymmetryReport classify(const CMatrix& h, const CMatrix& p, double gauge_rate) {
    const Eigen::Index n = h.rows();
    SymmetryReport r;
    r.gauge_rate = gauge_rate;
    r.anti_pt_residual = (p * h.conjugate() * p + h).norm();
    const CMatrix hg = h + I_unit * gauge_rate * CMatrix::Identity(n, n);
    r.pt_residual_after_gauge = (p * hg.conjugate() * p - hg).norm();
    const double thr = 1e-10 * std::max(norm2(h), std::numeric_limits<double>::min());
    if (r.anti_pt_residual < thr)
        r.classification = SymmetryClass::AntiPT;
    else if (r.pt_residual_after_gauge < thr)
        r.classification = SymmetryClass::PassivePT;
    return r;
}

}  // namespace detail

/// Anti-PT residual ||P H* P + H|| and, after removing the mean decay
/// -(i) gauge_rate from the diagonal, the PT residual ||P H'* P - H'||.
/// P defaults to the mode swap for two modes and must be supplied otherwise.
inline SymmetryReport symmetry_check(const CMatrix& h, std::optional<CMatrix> parity = std::nullopt) {
    if (h.rows() != h.cols()) throw ValidationError("symmetry_check: matrix is not square");
    const Eigen::Index n = h.rows();
    if (!parity) {
        if (n != 2) throw ValidationError("symmetry_check: a parity matrix is required for N != 2");
        parity = sigma_x();
    }
    detail::check_parity(*parity, n);
    const double gauge = -h.diagonal().imag().mean();
    return detail::classify(h, *parity, gauge);
}

inline SymmetryReport symmetry_check(const EffectiveNhh& h, std::optional<CMatrix> parity = std::nullopt) {
    return symmetry_check(h.matrix, std::move(parity));
}

// ---- supermodes ----

/// R(theta) = [[cos, -sin], [sin, cos]]; c1 = cos a1 - sin a2, c2 = sin a1 + cos a2.
inline RMatrix rotation(double theta) {
    RMatrix r(2, 2);
    const double c = std::cos(theta), s = std::sin(theta);
    r << c, -s, s, c;
    return r;
}

/// R H R^T in the rotated (supermode) basis.
inline EffectiveNhh supermode_transform(const EffectiveNhh& h, double theta) {
    if (h.matrix.rows() != 2) throw ValidationError("supermode_transform: requires two modes");
    const CMatrix r = rotation(theta).cast<cplx>();
    EffectiveNhh out = h;
    out.matrix = r * h.matrix * r.transpose();
    return out;
}

struct SupermodeLindblad {
    double theta = 0.0;
    double A1 = 0.0, A2 = 0.0, A12 = 0.0, A21 = 0.0;
    double gamma_c1 = 0.0, gamma_c2 = 0.0;  // g11 - g12 and g22 + g12 for the symmetric case
    bool diagonalized = false;
};

/// Decay coefficients of the rotated modes. Uses the real parts of gamma.
inline SupermodeLindblad supermode_lindblad_coefficients(const ValidatedModel& model, double theta) {
    if (model.n() != 2) throw ValidationError("supermode_lindblad_coefficients: requires two modes");
    const auto& g = model.spec.gamma;
    const double g11 = g(0, 0).real(), g22 = g(1, 1).real();
    const double g12 = g(0, 1).real(), g21 = g(1, 0).real();
    const double gbar = 0.5 * (g12 + g21);
    const double gminus = 0.5 * (g11 - g22);
    const double c = std::cos(theta), s = std::sin(theta), s2 = std::sin(2.0 * theta);
    SupermodeLindblad r;
    r.theta = theta;
    r.A1 = g11 * c * c + g22 * s * s - gbar * s2;
    r.A2 = g11 * s * s + g22 * c * c + gbar * s2;
    r.A12 = gminus * s2 + g12 * c * c - g21 * s * s;
    r.A21 = gminus * s2 + g21 * c * c - g12 * s * s;
    r.gamma_c1 = 0.5 * (g11 + g22) - gbar;
    r.gamma_c2 = 0.5 * (g11 + g22) + gbar;
    r.diagonalized = std::abs(r.A12) < 1e-12 && std::abs(r.A21) < 1e-12;
    return r;
}

}  // namespace lep
