#pragma once

// Dense eigen-structure analysis for small complex matrices: sorted spectra,
// coalescence clusters, Jordan block sizes, and matrix exponentials that stay
// well defined at exceptional points.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "lep/types.hpp"

namespace lep {

/// Default relative clustering tolerance; scaled by max(1, ||A||).
inline constexpr double kDefaultClusterTol = 1e-5;

struct EigenCluster {
    cplx center;                    // mean of the member eigenvalues
    std::vector<int> members;       // indices into EigenReport::eigenvalues
    int algebraic = 0;
    int geometric = 0;
    std::vector<int> jordan_blocks; // descending
    double residual = 0.0;          // max ||(A - center)^k v|| over generalized eigenvectors
    bool defective() const { return geometric < algebraic; }
    int largest_block() const { return jordan_blocks.empty() ? 0 : jordan_blocks.front(); }
};

struct EigenReport {
    CVector eigenvalues;
    CMatrix eigenvectors;  // unit-norm columns
    std::vector<EigenCluster> clusters;
    double eigvec_condition = 1.0;
    double cluster_tol_abs = 0.0;
    double rank_threshold = 0.0;

    const EigenCluster* cluster_of(int index) const {
        for (const auto& c : clusters)
            if (std::find(c.members.begin(), c.members.end(), index) != c.members.end()) return &c;
        return nullptr;
    }
};

/// Singular-value threshold used for every rank decision.
inline double rank_threshold(const CMatrix& a) {
    const double n = static_cast<double>(std::max(a.rows(), a.cols()));
    return n * std::numeric_limits<double>::epsilon() * std::max(1.0, norm2(a)) * 1e3;
}

inline int numerical_rank(const CMatrix& m, double threshold) {
    if (m.size() == 0) return 0;
    Eigen::JacobiSVD<CMatrix> svd(m);
    const auto& s = svd.singularValues();
    int r = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > threshold) ++r;
    return r;
}

inline int nullity(const CMatrix& m, double threshold) {
    return static_cast<int>(m.cols()) - numerical_rank(m, threshold);
}

/// Orders eigenvalues by real part, then imaginary part.
inline std::vector<int> sorted_order(const CVector& values) {
    std::vector<int> idx(static_cast<std::size_t>(values.size()));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        if (values(a).real() != values(b).real()) return values(a).real() < values(b).real();
        return values(a).imag() < values(b).imag();
    });
    return idx;
}

/// Single-linkage grouping of eigenvalues closer than `abs_tol`.
inline std::vector<std::vector<int>> group_close(const CVector& values, double abs_tol) {
    const int n = static_cast<int>(values.size());
    std::vector<int> parent(static_cast<std::size_t>(n));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (std::abs(values(i) - values(j)) <= abs_tol) parent[find(i)] = find(j);
    std::vector<std::vector<int>> groups;
    std::vector<int> slot(static_cast<std::size_t>(n), -1);
    for (int i = 0; i < n; ++i) {
        const int r = find(i);
        if (slot[r] < 0) {
            slot[r] = static_cast<int>(groups.size());
            groups.emplace_back();
        }
        groups[slot[r]].push_back(i);
    }
    return groups;
}

namespace detail {

// Jordan block sizes from the nullity sequence of (A - c)^k, k = 1..m.
inline std::vector<int> jordan_sizes(const std::vector<int>& nullities, int algebraic) {
    std::vector<int> nk(nullities.size() + 1, 0);
    for (std::size_t k = 0; k < nullities.size(); ++k)
        nk[k + 1] = std::clamp(nullities[k], nk[k], algebraic);
    nk.back() = algebraic;  // generalized eigenspace dimension is the algebraic multiplicity
    const int m = static_cast<int>(nullities.size());
    std::vector<int> at_least(static_cast<std::size_t>(m + 2), 0);
    for (int k = 1; k <= m; ++k) at_least[k] = nk[k] - nk[k - 1];
    std::vector<int> sizes;
    for (int k = m; k >= 1; --k) {
        const int exact = at_least[k] - at_least[k + 1];
        for (int r = 0; r < exact; ++r) sizes.push_back(k);
    }
    return sizes;
}

}  // namespace detail

/// Eigenvalues, eigenvectors, and coalescence structure of a square matrix.
///
/// Eigenvalues within `rel_tol * max(1, ||A||)` of each other form a cluster.
/// Multiplicities are taken at the cluster mean, which is far more accurate
/// than any single member at a defective point.
inline EigenReport eigendecompose(const CMatrix& a, double rel_tol = kDefaultClusterTol) {
    if (a.rows() != a.cols()) throw ValidationError("eigendecompose: matrix is not square");
    const int n = static_cast<int>(a.rows());
    EigenReport rep;
    if (n == 0) return rep;
    if (!a.allFinite()) throw NumericalError("eigendecompose: matrix has non-finite entries");

    Eigen::ComplexEigenSolver<CMatrix> solver(a, true);
    if (solver.info() != Eigen::Success) {
        throw NumericalError("eigendecompose: eigen-solve did not converge (||A|| = " +
                             std::to_string(norm2(a)) + ", n = " + std::to_string(n) + ")");
    }
    const auto order = sorted_order(solver.eigenvalues());
    rep.eigenvalues.resize(n);
    rep.eigenvectors.resize(n, n);
    for (int i = 0; i < n; ++i) {
        rep.eigenvalues(i) = solver.eigenvalues()(order[i]);
        CVector v = solver.eigenvectors().col(order[i]);
        const double nv = v.norm();
        rep.eigenvectors.col(i) = nv > 0 ? CVector(v / nv) : v;
    }
    {
        Eigen::JacobiSVD<CMatrix> svd(rep.eigenvectors);
        const auto& s = svd.singularValues();
        rep.eigvec_condition = s(n - 1) > 0 ? s(0) / s(n - 1) : std::numeric_limits<double>::infinity();
    }

    const double norm_a = norm2(a);
    rep.cluster_tol_abs = rel_tol * std::max(1.0, norm_a);
    rep.rank_threshold = rank_threshold(a);

    for (auto& members : group_close(rep.eigenvalues, rep.cluster_tol_abs)) {
        EigenCluster c;
        c.members = members;
        c.algebraic = static_cast<int>(members.size());
        cplx sum = 0.0;
        for (int i : members) sum += rep.eigenvalues(i);
        c.center = sum / static_cast<double>(c.algebraic);

        const CMatrix shifted = a - c.center * CMatrix::Identity(n, n);
        std::vector<int> nullities;
        CMatrix power = CMatrix::Identity(n, n);
        double scale = 1.0;
        for (int k = 1; k <= c.algebraic; ++k) {
            power = power * shifted;
            scale *= std::max(1.0, norm_a);
            const double thr = rep.rank_threshold * scale / std::max(1.0, norm_a);
            nullities.push_back(nullity(power, thr));
        }
        c.geometric = std::min(nullities.front(), c.algebraic);
        c.jordan_blocks = detail::jordan_sizes(nullities, c.algebraic);

        // Residual of the generalized eigenvectors: the trailing right singular
        // vectors of (A - c)^(largest block).
        CMatrix top = CMatrix::Identity(n, n);
        for (int k = 0; k < c.largest_block(); ++k) top = top * shifted;
        Eigen::JacobiSVD<CMatrix> svd(top, Eigen::ComputeFullV);
        double res = 0.0;
        for (int k = 0; k < c.algebraic; ++k) {
            const CVector v = svd.matrixV().col(n - 1 - k);
            res = std::max(res, (top * v).norm());
        }
        c.residual = res;
        rep.clusters.push_back(std::move(c));
    }
    return rep;
}

/// exp(-i H t) for a fixed H, evaluated by eigendecomposition when the
/// eigenvector basis is well conditioned and by Pade scaling-and-squaring
/// otherwise (Jordan-degenerate H cannot be diagonalized).
class Propagator {
public:
    enum class Method { Eigen, Expm };

    explicit Propagator(CMatrix h, double condition_limit = 1e8) : h_(std::move(h)) {
        Eigen::ComplexEigenSolver<CMatrix> solver(h_, true);
        if (solver.info() == Eigen::Success) {
            vecs_ = solver.eigenvectors();
            vals_ = solver.eigenvalues();
            Eigen::JacobiSVD<CMatrix> svd(vecs_);
            const auto& s = svd.singularValues();
            condition_ = s(s.size() - 1) > 0 ? s(0) / s(s.size() - 1) : std::numeric_limits<double>::infinity();
        } else {
            condition_ = std::numeric_limits<double>::infinity();
        }
        if (condition_ <= condition_limit) {
            method_ = Method::Eigen;
            inv_vecs_ = vecs_.partialPivLu().inverse();
        } else {
            method_ = Method::Expm;
        }
    }

    Method method() const { return method_; }
    double condition() const { return condition_; }
    const CMatrix& generator() const { return h_; }

    CMatrix at(double t) const {
        if (method_ == Method::Eigen) {
            CVector phase(vals_.size());
            for (Eigen::Index i = 0; i < vals_.size(); ++i) phase(i) = std::exp(-I_unit * vals_(i) * t);
            return vecs_ * phase.asDiagonal() * inv_vecs_;
        }
        return expm(CMatrix(-I_unit * t * h_));
    }

    static CMatrix expm(const CMatrix& m) { return m.exp(); }

private:
    CMatrix h_;
    CMatrix vecs_;
    CMatrix inv_vecs_;
    CVector vals_;
    double condition_ = 1.0;
    Method method_ = Method::Expm;
};

inline const char* to_string(Propagator::Method m) {
    return m == Propagator::Method::Eigen ? "eigen" : "expm";
}

/// Complex conjugate of every entry.
inline CMatrix conj(const CMatrix& m) { return m.conjugate(); }

inline CMatrix kron(const CMatrix& a, const CMatrix& b) {
    CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

/// Matches `next` to `prev` so that the summed distance is minimal.
/// Exhaustive over permutations up to 8 entries, greedy beyond that.
inline std::vector<int> match_eigenvalues(const CVector& prev, const CVector& next) {
    const int n = static_cast<int>(prev.size());
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    if (n <= 8) {
        std::vector<int> best = perm;
        double best_cost = std::numeric_limits<double>::infinity();
        do {
            double cost = 0.0;
            for (int i = 0; i < n && cost < best_cost; ++i) cost += std::abs(prev(i) - next(perm[i]));
            if (cost < best_cost) {
                best_cost = cost;
                best = perm;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
        return best;
    }
    std::vector<bool> used(static_cast<std::size_t>(n), false);
    for (int i = 0; i < n; ++i) {
        int pick = -1;
        double d = std::numeric_limits<double>::infinity();
        for (int j = 0; j < n; ++j)
            if (!used[j] && std::abs(prev(i) - next(j)) < d) {
                d = std::abs(prev(i) - next(j));
                pick = j;
            }
        used[pick] = true;
        perm[i] = pick;
    }
    return perm;
}

}  // namespace lep
