#pragma once

// Brute-force Liouvillian on a truncated Fock space. Used as an oracle for
// the moment-based results.
//
// Vectorization is column stacking: rho(r, c) sits at r + d * c, and
// A rho B maps to kron(B^T, A).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Sparse>
#include <unsupported/Eigen/MatrixFunctions>

#include "lep/correlations.hpp"
#include "lep/linalg.hpp"
#include "lep/model.hpp"
#include "lep/nhh.hpp"

namespace lep {

using SparseC = Eigen::SparseMatrix<cplx>;

inline constexpr double kDefaultMemBudgetMiB = 768.0;

/// Product basis |n_1, ..., n_N>, mode 1 most significant.
class FockBasis {
public:
    FockBasis(int n_modes, int cutoff) : modes_(n_modes), cutoff_(cutoff) {
        if (n_modes < 1) throw ValidationError("FockBasis: need at least one mode");
        if (cutoff < 1) throw ValidationError("FockBasis: cutoff must be >= 1");
        dim_ = 1;
        for (int m = 0; m < n_modes; ++m) dim_ *= cutoff + 1;
        occ_.resize(static_cast<std::size_t>(dim_) * n_modes);
        for (int i = 0; i < dim_; ++i) {
            int rest = i;
            for (int m = n_modes - 1; m >= 0; --m) {
                occ_[static_cast<std::size_t>(i) * n_modes + m] = rest % (cutoff + 1);
                rest /= cutoff + 1;
            }
        }
    }

    int dim() const { return dim_; }
    int modes() const { return modes_; }
    int cutoff() const { return cutoff_; }
    int occupation(int index, int mode) const { return occ_[static_cast<std::size_t>(index) * modes_ + mode]; }
    int total(int index) const {
        int t = 0;
        for (int m = 0; m < modes_; ++m) t += occupation(index, m);
        return t;
    }
    bool on_shell(int index) const {
        for (int m = 0; m < modes_; ++m)
            if (occupation(index, m) == cutoff_) return true;
        return false;
    }
    int index(const std::vector<int>& n) const {
        int i = 0;
        for (int m = 0; m < modes_; ++m) i = i * (cutoff_ + 1) + n[static_cast<std::size_t>(m)];
        return i;
    }

    /// Annihilation operator of one mode.
    SparseC annihilation(int mode) const {
        std::vector<Eigen::Triplet<cplx>> t;
        for (int i = 0; i < dim_; ++i) {
            const int n = occupation(i, mode);
            if (n == 0) continue;
            std::vector<int> occ(static_cast<std::size_t>(modes_));
            for (int m = 0; m < modes_; ++m) occ[static_cast<std::size_t>(m)] = occupation(i, m);
            occ[static_cast<std::size_t>(mode)] -= 1;
            t.emplace_back(index(occ), i, std::sqrt(static_cast<double>(n)));
        }
        SparseC a(dim_, dim_);
        a.setFromTriplets(t.begin(), t.end());
        return a;
    }

private:
    int modes_;
    int cutoff_;
    int dim_ = 1;
    std::vector<int> occ_;
};

struct FockSuperoperator {
    FockBasis basis{1, 1};
    CMatrix matrix;               // d^2 x d^2 generator
    std::vector<SparseC> a;       // annihilation operators
    ValidatedModel model;
    Frame frame = Frame::Rotating;
    // Sector q = N(ket) - N(bra) is conserved; vec indices grouped by q.
    std::map<int, std::vector<int>> sectors;

    int dim() const { return basis.dim(); }
    int cutoff() const { return basis.cutoff(); }

    CMatrix sector_block(int q) const {
        const auto& idx = sectors.at(q);
        return matrix(idx, idx);
    }
};

inline double superoperator_bytes(int n_modes, int cutoff) {
    double d = 1.0;
    for (int m = 0; m < n_modes; ++m) d *= cutoff + 1;
    return d * d * d * d * static_cast<double>(sizeof(cplx));
}

namespace detail {

// L += coef * kron(B^T, A) for sparse A, B.
inline void add_sandwich(CMatrix& l, int d, cplx coef, const SparseC& a, const SparseC& b) {
    if (coef == cplx(0.0)) return;
    for (int ka = 0; ka < a.outerSize(); ++ka)
        for (SparseC::InnerIterator ia(a, ka); ia; ++ia)
            for (int kb = 0; kb < b.outerSize(); ++kb)
                for (SparseC::InnerIterator ib(b, kb); ib; ++ib) {
                    // A(r, i) B(j, c) -> row r + d c, col i + d j
                    const Eigen::Index r = ia.row(), i = ia.col(), j = ib.row(), c = ib.col();
                    l(r + d * c, i + d * j) += coef * ia.value() * ib.value();
                }
}

inline SparseC sparse_identity(int d) {
    SparseC id(d, d);
    id.setIdentity();
    return id;
}

// Dissipator sum_jk c_jk (x_j rho y_k - 1/2 {y_k x_j, rho}).
inline void add_dissipator(CMatrix& l, int d, const CMatrix& c, const std::vector<SparseC>& x,
                           const std::vector<SparseC>& y) {
    const SparseC id = sparse_identity(d);
    const int n = static_cast<int>(x.size());
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            const cplx w = c(j, k);
            if (w == cplx(0.0)) continue;
            const SparseC yx = (y[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(j)]).pruned();
            add_sandwich(l, d, w, x[static_cast<std::size_t>(j)], y[static_cast<std::size_t>(k)]);
            add_sandwich(l, d, -0.5 * w, yx, id);
            add_sandwich(l, d, -0.5 * w, id, yx);
        }
}

}  // namespace detail

/// Full Liouvillian on the truncated space:
/// -i[H, .] + sum_jk (n+1) gamma_kj (a_j . a_k^dag - 1/2 {a_k^dag a_j, .})
///          + sum_jk n gamma_jk (a_j^dag . a_k - 1/2 {a_k a_j^dag, .}),
/// which reproduces d<a>/dt = -i H_eff <a> for any Hermitian gamma.
inline FockSuperoperator build_superoperator(const ValidatedModel& model, int cutoff,
                                             double mem_budget_mib = kDefaultMemBudgetMiB,
                                             Frame frame = Frame::Rotating) {
    const int n = model.n();
    if (n > 3) throw ValidationError("fock oracle supports at most 3 modes");
    const double bytes = superoperator_bytes(n, cutoff);
    if (bytes > mem_budget_mib * 1024.0 * 1024.0)
        throw ValidationError("fock superoperator needs " + std::to_string(bytes / (1024.0 * 1024.0)) +
                              " MiB, budget is " + std::to_string(mem_budget_mib) + " MiB");
    FockSuperoperator s;
    s.basis = FockBasis(n, cutoff);
    s.model = model;
    s.frame = frame;
    const int d = s.basis.dim();
    for (int m = 0; m < n; ++m) s.a.push_back(s.basis.annihilation(m));
    std::vector<SparseC> ad;
    for (const auto& a : s.a) ad.push_back(SparseC(a.adjoint()));

    const auto& spec = model.spec;
    const double shift = frame == Frame::Rotating ? spec.omega.mean() : 0.0;
    SparseC h(d, d);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            cplx c = spec.chi(j, k);
            if (j == k) c += spec.omega(j) - shift;
            if (c != cplx(0.0)) h += c * (ad[static_cast<std::size_t>(j)] * s.a[static_cast<std::size_t>(k)]);
        }
    h.prune(cplx(0.0));

    s.matrix = CMatrix::Zero(static_cast<Eigen::Index>(d) * d, static_cast<Eigen::Index>(d) * d);
    const SparseC id = detail::sparse_identity(d);
    detail::add_sandwich(s.matrix, d, -I_unit, h, id);
    detail::add_sandwich(s.matrix, d, I_unit, id, h);
    // loss: coefficient of a_j . a_k^dag is (n+1) gamma_kj
    detail::add_dissipator(s.matrix, d, (spec.n_th + 1.0) * spec.gamma.transpose(), s.a, ad);
    if (spec.n_th > 0.0) detail::add_dissipator(s.matrix, d, spec.n_th * spec.gamma, ad, s.a);

    for (int c = 0; c < d; ++c)
        for (int r = 0; r < d; ++r) s.sectors[s.basis.total(r) - s.basis.total(c)].push_back(r + d * c);
    return s;
}

inline CVector vec(const CMatrix& rho) { return Eigen::Map<const CVector>(rho.data(), rho.size()); }

inline CMatrix unvec(const CVector& v, int d) { return Eigen::Map<const CMatrix>(v.data(), d, d); }

inline CMatrix dense(const SparseC& s) { return CMatrix(s); }

/// Applies the generator to a density-like matrix.
inline CMatrix apply_generator(const FockSuperoperator& s, const CMatrix& rho) {
    return unvec(s.matrix * vec(rho), s.dim());
}

struct SuperoperatorChecks {
    double trace_residual = 0.0;           // ||1^T L|| over all columns
    double trace_residual_interior = 0.0;  // over columns away from the cutoff shell
    double hermiticity_residual = 0.0;     // on a fixed Hermitian probe matrix
};

inline SuperoperatorChecks check_superoperator(const FockSuperoperator& s) {
    const int d = s.dim();
    SuperoperatorChecks out;
    CVector tr_row = CVector::Zero(static_cast<Eigen::Index>(d) * d);
    for (int i = 0; i < d; ++i) tr_row(i + d * i) = 1.0;
    const CVector left = s.matrix.transpose() * tr_row;
    out.trace_residual = left.norm();
    double interior = 0.0;
    for (int c = 0; c < d; ++c)
        for (int r = 0; r < d; ++r)
            if (!s.basis.on_shell(r) && !s.basis.on_shell(c)) interior += std::norm(left(r + d * c));
    out.trace_residual_interior = std::sqrt(interior);
    CMatrix probe(d, d);
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) probe(r, c) = cplx(std::cos(0.7 * r + 1.3 * c), std::sin(0.3 * r - 0.9 * c + r * c));
    probe = 0.5 * (probe + probe.adjoint()).eval();
    const CMatrix out_rho = apply_generator(s, probe);
    out.hermiticity_residual = (out_rho - out_rho.adjoint()).norm();
    return out;
}

struct DensityMatrix {
    CMatrix rho;
    int cutoff = 0;
    double boundary_population = 0.0;  // weight on states with some mode at the cutoff
    double min_eigenvalue = 0.0;
    std::vector<std::string> warnings;
};

/// Null vector of the q = 0 block with unit trace, Hermitized.
inline DensityMatrix steady_state_density(const FockSuperoperator& s) {
    const int d = s.dim();
    const auto& idx = s.sectors.at(0);
    const CMatrix l0 = s.sector_block(0);
    const Eigen::Index m = l0.rows();
    // Replace one equation by the trace condition.
    CMatrix a = l0;
    CVector rhs = CVector::Zero(m);
    Eigen::Index trace_row = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
        const int r = idx[static_cast<std::size_t>(i)] % d, c = idx[static_cast<std::size_t>(i)] / d;
        a(trace_row, i) = r == c ? 1.0 : 0.0;
    }
    rhs(trace_row) = 1.0;
    Eigen::FullPivLU<CMatrix> lu(a);
    if (!lu.isInvertible())
        throw NumericalError("steady_state_density: degenerate stationary space (no unique steady state)");
    const CVector x = lu.solve(rhs);
    const double resid = (l0 * x).norm();
    CMatrix rho = CMatrix::Zero(d, d);
    for (Eigen::Index i = 0; i < m; ++i) {
        const int v = idx[static_cast<std::size_t>(i)];
        rho(v % d, v / d) = x(i);
    }
    rho = 0.5 * (rho + rho.adjoint()).eval();
    rho /= rho.trace().real();
    DensityMatrix out;
    out.rho = rho;
    out.cutoff = s.cutoff();
    for (int i = 0; i < d; ++i)
        if (s.basis.on_shell(i)) out.boundary_population += rho(i, i).real();
    Eigen::SelfAdjointEigenSolver<CMatrix> es(rho, Eigen::EigenvaluesOnly);
    out.min_eigenvalue = es.eigenvalues()(0);
    if (resid > 1e-8) out.warnings.push_back("steady-state residual " + std::to_string(resid));
    if (out.boundary_population > 1e-6)
        out.warnings.push_back("cutoff leakage: boundary population " + std::to_string(out.boundary_population));
    return out;
}

/// <a_j^dag a_k> in a density matrix.
inline CMatrix second_moments(const FockSuperoperator& s, const DensityMatrix& rho) {
    const int n = static_cast<int>(s.a.size());
    CMatrix c(n, n);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
            c(j, k) = (dense(SparseC(s.a[static_cast<std::size_t>(j)].adjoint() * s.a[static_cast<std::size_t>(k)])) *
                       rho.rho)
                          .trace();
    return c;
}

struct SectorSpectrum {
    int q = 0;
    CVector eigenvalues;
};

/// Eigenvalues of every conserved sector.
inline std::vector<SectorSpectrum> sector_spectra(const FockSuperoperator& s) {
    std::vector<SectorSpectrum> out;
    for (const auto& [q, idx] : s.sectors) {
        Eigen::ComplexEigenSolver<CMatrix> es(s.sector_block(q), false);
        if (es.info() != Eigen::Success)
            throw NumericalError("spectrum: eigen-solve failed in sector q = " + std::to_string(q));
        out.push_back({q, es.eigenvalues()});
    }
    return out;
}

/// The `count` eigenvalues with the smallest |Re|.
inline CVector spectrum_subset(const FockSuperoperator& s, int count) {
    const Eigen::Index total = s.matrix.rows();
    if (count < 0 || count > total) throw ValidationError("spectrum_subset: count out of range");
    std::vector<cplx> all;
    for (const auto& sec : sector_spectra(s))
        for (Eigen::Index i = 0; i < sec.eigenvalues.size(); ++i) all.push_back(sec.eigenvalues(i));
    std::stable_sort(all.begin(), all.end(), [](cplx a, cplx b) {
        if (std::abs(a.real()) != std::abs(b.real())) return std::abs(a.real()) < std::abs(b.real());
        return a.imag() < b.imag();
    });
    CVector out(count);
    for (int i = 0; i < count; ++i) out(i) = all[static_cast<std::size_t>(i)];
    return out;
}

/// Distance from `target` to the nearest entry of `values`.
inline double nearest_distance(const CVector& values, cplx target) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < values.size(); ++i) best = std::min(best, std::abs(values(i) - target));
    return best;
}

/// Tr{O2 exp(L tau)[O3 rho_ss O1]} on an ascending tau grid. Uniform grids
/// reuse one step propagator per sector; others take one exponential per tau.
inline CVector ttcf_oracle(const FockSuperoperator& s, const DensityMatrix& rho, const CMatrix& o1, const CMatrix& o2,
                           const CMatrix& o3, const RVector& tau, std::vector<std::string>* warnings = nullptr) {
    for (Eigen::Index i = 0; i < tau.size(); ++i) {
        if (!(tau(i) >= 0.0)) throw ValidationError("ttcf_oracle: tau must be nonnegative");
        if (i > 0 && tau(i) < tau(i - 1)) throw ValidationError("ttcf_oracle: tau grid is descending");
    }
    if (warnings && rho.boundary_population > 1e-6)
        warnings->push_back("cutoff leakage: boundary population " + std::to_string(rho.boundary_population));
    const CVector seed = vec(o3 * rho.rho * o1);
    // Tr(O2 X) = sum_rc O2(c, r) X(r, c)
    const CVector obs = vec(CMatrix(o2.transpose()));
    CVector out = CVector::Zero(tau.size());
    if (tau.size() == 0) return out;

    bool uniform = tau.size() > 2;
    const double step = tau.size() > 1 ? tau(1) - tau(0) : 0.0;
    for (Eigen::Index i = 1; i < tau.size() && uniform; ++i)
        uniform = std::abs((tau(i) - tau(i - 1)) - step) <= 1e-12 * std::max(1.0, std::abs(tau(i)));

    for (const auto& [q, idx] : s.sectors) {
        const CVector x0 = seed(idx);
        if (x0.norm() == 0.0) continue;
        const CVector w = obs(idx);
        if (w.norm() == 0.0) continue;
        const CMatrix l = s.sector_block(q);
        if (uniform) {
            const CMatrix e = CMatrix(l * step).exp();
            CVector x = CMatrix(l * tau(0)).exp() * x0;
            for (Eigen::Index i = 0; i < tau.size(); ++i) {
                if (i > 0) x = e * x;
                out(i) += cplx(w.transpose() * x);
            }
        } else {
            for (Eigen::Index i = 0; i < tau.size(); ++i) out(i) += cplx(w.transpose() * (CMatrix(l * tau(i)).exp() * x0));
        }
    }
    return out;
}

/// Dense operator of the probe field b = sum_m u_m a_m.
inline CMatrix probe_operator(const FockSuperoperator& s, const Probe& probe) {
    if (probe.u.size() != static_cast<Eigen::Index>(s.a.size()))
        throw ValidationError("probe dimension does not match the oracle");
    CMatrix b = CMatrix::Zero(s.dim(), s.dim());
    for (std::size_t m = 0; m < s.a.size(); ++m) b += probe.u(static_cast<Eigen::Index>(m)) * dense(s.a[m]);
    return b;
}

/// Normalized coherence of order 1 or 2k:
/// <b^dag^k(0) b^dag^k(tau) b^k(tau) b^k(0)> / <b^dag b>^(2k) (order 2k),
/// <b^dag(0) b(tau)> / <b^dag b> (order 1).
inline CorrelationSeries coherence_oracle(const FockSuperoperator& s, const DensityMatrix& rho, const Probe& probe,
                                          int order, const RVector& tau,
                                          std::vector<std::string>* warnings = nullptr) {
    if (order < 1 || (order > 1 && order % 2 != 0)) throw ValidationError("coherence_oracle: order must be 1 or even");
    const int k = order == 1 ? 1 : order / 2;
    if (order > 1 && 2 * k > s.cutoff()) throw ValidationError("coherence_oracle: cutoff too small for order " + std::to_string(order));
    const CMatrix b = probe_operator(s, probe);
    const CMatrix bd = b.adjoint();
    const double nbar = (bd * b * rho.rho).trace().real();
    if (!(nbar > 0.0)) throw NumericalError("coherence_oracle: zero steady-state population");
    CorrelationSeries out;
    out.tau = tau;
    out.mode = probe.label;
    out.order = order;
    out.normalization = nbar;
    out.method = "fock";
    const Eigen::Index d = s.dim();
    if (order == 1) {
        out.values = ttcf_oracle(s, rho, bd, b, CMatrix::Identity(d, d), tau, warnings) / nbar;
        return out;
    }
    CMatrix bk = CMatrix::Identity(d, d);
    for (int i = 0; i < k; ++i) bk = bk * b;
    const CMatrix bdk = bk.adjoint();
    out.values = ttcf_oracle(s, rho, bdk, CMatrix(bdk * bk), bk, tau, warnings) / std::pow(nbar, 2 * k);
    return out;
}

}  // namespace lep
