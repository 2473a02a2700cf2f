#pragma once

// Two-time correlations by the quantum regression theorem, first-order
// coherence, and higher-order coherence of thermal light via Wick's theorem.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "lep/linalg.hpp"
#include "lep/moments.hpp"
#include "lep/nhh.hpp"

namespace lep {

/// Field probed by a correlation function: b = sum_m u_m a_m.
struct Probe {
    CVector u;
    std::string label;
};

inline Probe mode_probe(int n_modes, int j) {
    if (j < 0 || j >= n_modes) throw ValidationError("mode index " + std::to_string(j) + " out of range");
    Probe p{CVector::Zero(n_modes), "a" + std::to_string(j + 1)};
    p.u(j) = 1.0;
    return p;
}

enum class Supermode { C1, C2 };

inline const char* to_string(Supermode s) { return s == Supermode::C1 ? "c1" : "c2"; }

/// c1 = (a1 - a2)/sqrt2 decays at gamma - gamma12, c2 = (a1 + a2)/sqrt2 at gamma + gamma12.
inline Probe supermode_probe(Supermode s) {
    const RMatrix r = rotation(kPi / 4);
    const int row = s == Supermode::C1 ? 0 : 1;
    Probe p{CVector(2), to_string(s)};
    p.u << r(row, 0), r(row, 1);
    return p;
}

/// Parses "a1", "a2", ..., "c1", "c2".
inline Probe parse_probe(const std::string& name, int n_modes) {
    if (name == "c1" || name == "c2") {
        if (n_modes != 2) throw ValidationError("supermodes are defined for two modes only");
        return supermode_probe(name == "c1" ? Supermode::C1 : Supermode::C2);
    }
    if (name.size() >= 2 && name[0] == 'a') {
        try {
            return mode_probe(n_modes, std::stoi(name.substr(1)) - 1);
        } catch (const std::logic_error&) {
        }
    }
    throw ValidationError("unknown mode '" + name + "' (expected a1..aN, c1, c2)");
}

struct CorrelationSeries {
    RVector tau;
    CVector values;
    std::string mode;
    int order = 1;
    double normalization = 1.0;  // <b^dag b>_ss per unit thermal occupation
    std::string method;          // propagator used
};

namespace detail {

inline void require_tau_grid(const RVector& tau) {
    for (Eigen::Index i = 0; i < tau.size(); ++i) {
        if (!(tau(i) >= 0.0)) throw ValidationError("tau grid must be nonnegative");
        if (i > 0 && tau(i) < tau(i - 1)) throw ValidationError("tau grid must be ascending");
    }
}

inline void require_stable(const CMatrix& h) {
    Eigen::ComplexEigenSolver<CMatrix> es(h, false);
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
        if (!(es.eigenvalues()(i).imag() < 0.0))
            throw ValidationError("unstable model: effective Hamiltonian eigenvalue with Im >= 0");
}

}  // namespace detail

/// f_j(tau) = exp(-i H_eff tau) f_j(0), f_j(0) = row j of C_ss; one column per tau.
/// Entry k of a column is <a_j^dag(0) a_k(tau)>.
inline CMatrix ttcf_first_order(const ValidatedModel& model, int j, const RVector& tau, Frame frame = Frame::Lab) {
    detail::require_tau_grid(tau);
    const CMatrix h = build_effective_nhh(model, frame).matrix;
    detail::require_stable(h);
    const CMatrix css = model.spec.n_th * unit_steady_state(model);
    const CVector f0 = css.row(j).transpose();
    const Propagator prop(h);
    CMatrix out(model.n(), tau.size());
    for (Eigen::Index i = 0; i < tau.size(); ++i) out.col(i) = prop.at(tau(i)) * f0;
    return out;
}

/// Evaluates the normalized g1 of a probe field at arbitrary delays.
/// The ratio does not depend on n_th, so it is formed from the steady state
/// per unit occupation and stays defined at n_th = 0.
class CoherenceEvaluator {
public:
    CoherenceEvaluator(const ValidatedModel& model, const Probe& probe, Frame frame = Frame::Lab)
        : h_(build_effective_nhh(model, frame).matrix), prop_(h_), u_(probe.u) {
        if (probe.u.size() != model.n()) throw ValidationError("probe dimension does not match the model");
        detail::require_stable(h_);
        const CMatrix c1 = unit_steady_state(model);
        seed_ = c1.transpose() * probe.u.conjugate();
        norm_ = u_.transpose() * seed_;
        if (!(std::abs(norm_) > 0.0)) throw NumericalError("g1: probe field carries no steady-state population");
        Eigen::ComplexEigenSolver<CMatrix> es(h_, false);
        decay_ = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
            decay_ = std::min(decay_, -es.eigenvalues()(i).imag());
            spread_ = std::max(spread_, std::abs(es.eigenvalues()(i).real()));
        }
    }

    cplx operator()(double tau) const { return cplx(u_.transpose() * prop_.at(tau) * seed_) / norm_; }

    /// <b^dag b>_ss per unit thermal occupation.
    double normalization() const { return norm_.real(); }
    /// Slowest decay rate, -max Im(nu).
    double decay_rate() const { return decay_; }
    /// Largest |Re(nu)|.
    double frequency_spread() const { return spread_; }
    const Propagator& propagator() const { return prop_; }
    const CMatrix& hamiltonian() const { return h_; }

private:
    CMatrix h_;
    Propagator prop_;
    CVector u_;
    CVector seed_;
    cplx norm_;
    double decay_ = 0.0;
    double spread_ = 0.0;
};

/// Normalized g1 of the probe field on a delay grid.
inline CorrelationSeries g1(const ValidatedModel& model, const Probe& probe, const RVector& tau,
                            Frame frame = Frame::Lab) {
    detail::require_tau_grid(tau);
    const CoherenceEvaluator eval(model, probe, frame);
    CorrelationSeries s;
    s.tau = tau;
    s.values.resize(tau.size());
    for (Eigen::Index i = 0; i < tau.size(); ++i) s.values(i) = eval(tau(i));
    s.mode = probe.label;
    s.order = 1;
    s.normalization = eval.normalization();
    s.method = to_string(eval.propagator().method());
    return s;
}

/// Unnormalized <b^dag(0) b(tau)> at the model's thermal occupation.
inline CorrelationSeries ttcf(const ValidatedModel& model, const Probe& probe, const RVector& tau,
                              Frame frame = Frame::Lab) {
    auto s = g1(model, probe, tau, frame);
    const double scale = model.spec.n_th * s.normalization;
    s.values *= scale;
    s.normalization = 1.0;
    return s;
}

/// Closed-form g1 of the supermodes:
/// exp(-gamma tau/2 - i omega_bar tau) (cosh(D tau/2) +/- gamma12 sinh(D tau/2) / D).
inline cplx g1_bimodal_closed_form(double gamma, double gamma12, double delta, double omega_bar, Supermode s,
                                   double tau) {
    const cplx d = bimodal_discriminant(gamma12, delta);
    const cplx x = 0.5 * d * tau;
    // sinh(x)/D written as (tau/2) sinh(x)/x, with the series near x = 0
    const cplx shc = std::abs(x) < 1e-6 ? 1.0 + x * x / 6.0 : std::sinh(x) / x;
    const double sign = s == Supermode::C1 ? 1.0 : -1.0;
    const cplx env = std::exp(cplx(-0.5 * gamma * tau, -omega_bar * tau));
    return env * (std::cosh(x) + sign * gamma12 * 0.5 * tau * shc);
}

// ---- higher-order coherence ----

inline constexpr int kMaxWickOrder = 8;

/// Permanent by Ryser's formula with Gray-code updates; O(2^n n).
inline cplx permanent(const CMatrix& a) {
    const int n = static_cast<int>(a.rows());
    if (n == 0) return 1.0;
    CVector rowsum = CVector::Zero(n);
    cplx total = 0.0;
    unsigned long gray = 0;
    const unsigned long limit = 1ul << n;
    for (unsigned long k = 1; k < limit; ++k) {
        const unsigned long next = k ^ (k >> 1);
        const unsigned long flip = next ^ gray;
        const int col = __builtin_ctzl(flip);
        if (next & flip)
            rowsum += a.col(col);
        else
            rowsum -= a.col(col);
        gray = next;
        cplx prod = 1.0;
        for (int r = 0; r < n; ++r) prod *= rowsum(r);
        const int bits = __builtin_popcountl(next);
        total += ((n - bits) % 2 == 0 ? 1.0 : -1.0) * prod;
    }
    return total;
}

/// Contraction matrix of <b^dag(0)^k b^dag(tau)^k b(tau)^k b(0)^k> for a
/// Gaussian state, in units of the mean occupation: unit equal-time
/// contractions and g / g* across the delay.
inline CMatrix wick_contraction_matrix(cplx g, int k) {
    const CMatrix ones = CMatrix::Ones(k, k);
    CMatrix m(2 * k, 2 * k);
    m << ones, g * ones, std::conj(g) * ones, ones;
    return m;
}

/// 2k-th order coherence of thermal light from its g1 value, normalized by
/// <b^dag b>^(2k); k = 1 gives 1 + |g1|^2, the zero-delay value is (2k)!.
inline double g2k_wick(cplx g1_value, int k) {
    if (k < 1) throw ValidationError("g2k_wick: order k must be >= 1");
    if (k > kMaxWickOrder) throw ValidationError("g2k_wick: k > 8 rejected (permanent cost)");
    if (std::abs(g1_value) > 1.0 + 1e-9) throw ValidationError("g2k_wick: |g1| exceeds 1");
    return permanent(wick_contraction_matrix(g1_value, k)).real();
}

/// g^(2k)(tau) series built from a g1 series.
inline CorrelationSeries g2k_series(const CorrelationSeries& g1s, int k) {
    CorrelationSeries s = g1s;
    s.order = 2 * k;
    for (Eigen::Index i = 0; i < s.values.size(); ++i) s.values(i) = g2k_wick(g1s.values(i), k);
    return s;
}

}  // namespace lep
