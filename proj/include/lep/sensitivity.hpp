#pragma once

// Eigenvalue trajectories under parameter sweeps and the power law with which
// a coalesced cluster splits when the exceptional point is perturbed.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "lep/linalg.hpp"
#include "lep/moments.hpp"
#include "lep/nhh.hpp"

namespace lep {

enum class GeneratorKind { Nhh, Moments, NhhMoments };

inline const char* to_string(GeneratorKind g) {
    switch (g) {
        case GeneratorKind::Nhh: return "nhh";
        case GeneratorKind::Moments: return "moments";
        default: return "nhh-moments";
    }
}

inline GeneratorKind parse_generator(const std::string& s) {
    if (s == "nhh") return GeneratorKind::Nhh;
    if (s == "moments" || s == "M" || s == "m") return GeneratorKind::Moments;
    if (s == "nhh-moments") return GeneratorKind::NhhMoments;
    throw ValidationError("unknown generator '" + s + "' (expected nhh, moments, nhh-moments)");
}

/// Matrix whose eigenvalues are reported: H_eff for Nhh (eigenvalues nu),
/// the second-moment generators otherwise (eigenvalues lambda).
inline CMatrix generator_matrix(const ValidatedModel& model, GeneratorKind g) {
    switch (g) {
        case GeneratorKind::Nhh: return build_effective_nhh(model, Frame::Rotating).matrix;
        case GeneratorKind::Moments: return second_moment_system(model).generator;
        default: return nhh_second_moment_system(model).generator;
    }
}

struct Trajectories {
    RVector grid;
    CMatrix branches;           // row per grid point, column per branch
    std::vector<bool> ambiguous;  // a degeneracy made the assignment at this point arbitrary
    GeneratorKind generator = GeneratorKind::Nhh;
};

/// Continuous eigenvalue branches: each grid point is matched to the previous
/// one by minimal total distance. Eigenvalues within the cluster tolerance
/// are reported as their cluster mean and the point is flagged.
inline Trajectories sweep_eigenvalues(const std::function<ValidatedModel(double)>& family, const RVector& grid,
                                      GeneratorKind g, double tol = kDefaultClusterTol) {
    for (Eigen::Index i = 1; i < grid.size(); ++i)
        if (grid(i) < grid(i - 1)) throw ValidationError("sweep grid must be sorted");
    Trajectories t;
    t.grid = grid;
    t.generator = g;
    CVector prev;
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
        const CMatrix a = generator_matrix(family(grid(i)), g);
        const auto rep = eigendecompose(a, tol);
        if (i == 0) t.branches.resize(grid.size(), rep.eigenvalues.size());
        CVector cur = rep.eigenvalues;
        bool amb = false;
        for (const auto& c : rep.clusters) {
            if (c.algebraic < 2) continue;
            amb = true;
            for (int m : c.members) cur(m) = c.center;
        }
        if (i > 0) {
            const auto perm = match_eigenvalues(prev, cur);
            CVector matched(cur.size());
            for (Eigen::Index k = 0; k < cur.size(); ++k) matched(k) = cur(perm[static_cast<std::size_t>(k)]);
            cur = matched;
        }
        t.ambiguous.push_back(amb);
        t.branches.row(i) = cur.transpose();
        prev = cur;
    }
    return t;
}

/// Two-mode model with one named parameter shifted.
inline BimodalParams perturbed(BimodalParams p, const std::string& name, double delta) {
    if (name == "gamma12")
        p.gamma12 += delta;
    else if (name == "gamma")
        p.gamma += delta;
    else if (name == "omega1")
        p.omega1 += delta;
    else if (name == "omega2")
        p.omega2 += delta;
    else if (name == "n_th")
        p.n_th += delta;
    else
        throw ValidationError("unknown parameter '" + name + "' (expected gamma12, gamma, omega1, omega2, n_th)");
    return p;
}

inline double parameter_value(const BimodalParams& p, const std::string& name) {
    if (name == "gamma12") return p.gamma12;
    if (name == "gamma") return p.gamma;
    if (name == "omega1") return p.omega1;
    if (name == "omega2") return p.omega2;
    if (name == "n_th") return p.n_th;
    throw ValidationError("unknown parameter '" + name + "' (expected gamma12, gamma, omega1, omega2, n_th)");
}

/// Two-mode model with one named parameter set to `value`.
inline BimodalParams with_parameter(BimodalParams p, const std::string& name, double value) {
    return perturbed(p, name, value - parameter_value(p, name));
}

struct SplittingFit {
    std::string parameter;
    GeneratorKind generator = GeneratorKind::Nhh;
    double direction = 1.0;
    cplx base_center;
    int cluster_size = 0;         // algebraic multiplicity tracked
    int largest_block = 0;        // Jordan order of the base cluster
    RVector epsilons;
    RVector splitting;            // max pairwise distance within the cluster
    RVector center_distance;      // max distance from the unperturbed eigenvalue
    RVector mean_shift_re;        // real part of (cluster mean - base center)
    std::vector<int> real_count;  // cluster eigenvalues with |Im| < real_tol
    std::vector<int> chain_real_count;  // real_count minus the semisimple partners (algebraic - largest block)
    std::vector<bool> median_real;
    std::vector<std::string> branch_real_flags;  // R or C per cluster eigenvalue, ascending Im
    double real_tol = 1e-12;
    bool fitted = false;
    double slope = 0.0;           // 1/p
    double slope_ci = 0.0;        // 95% half width of the slope
    double p = 0.0;
    double p_lo = 0.0, p_hi = 0.0;
    double log_rms = 0.0;
    std::string note;
};

/// Perturbs `parameter` by direction * eps away from an exceptional point,
/// tracks the eigenvalues nearest the coalesced cluster, and fits
/// splitting = C eps^(1/p) on log-log axes (ordinary least squares with a
/// Student-t interval). For the Nhh generator eigenvalues lambda = -i nu are
/// used so that both generators report decay rates on the real axis.
/// Moment generators are diagonalized in Hermitian coordinates, where they
/// are real, so that real eigenvalues come out with an exactly zero
/// imaginary part instead of rounding noise.
inline SplittingFit splitting_exponent(const BimodalParams& base, const std::string& parameter,
                                       const RVector& epsilons, GeneratorKind g, double direction = 1.0,
                                       double tol = kDefaultClusterTol) {
    const int n = static_cast<int>(epsilons.size());
    if (n < 8) throw ValidationError("splitting_exponent: need at least 8 epsilons");
    for (int i = 0; i < n; ++i)
        if (!(epsilons(i) > 0.0)) throw ValidationError("splitting_exponent: epsilons must be positive");
    const double span = std::log10(epsilons.maxCoeff() / epsilons.minCoeff());
    if (span < 2.0 - 1e-9) throw ValidationError("splitting_exponent: epsilons must span at least two decades");

    auto matrix = [&](const BimodalParams& p) {
        const CMatrix a = generator_matrix(p.model(), g);
        return g == GeneratorKind::Nhh ? CMatrix(-I_unit * a) : a;
    };
    const auto base_rep = eigendecompose(matrix(base), tol);
    const EigenCluster* cl = nullptr;
    for (const auto& c : base_rep.clusters)
        if (c.defective() && (!cl || c.algebraic > cl->algebraic)) cl = &c;
    if (!cl) throw ValidationError("splitting_exponent: base model has no defective eigenvalue cluster");

    SplittingFit f;
    f.parameter = parameter;
    f.generator = g;
    f.direction = direction;
    f.base_center = cl->center;
    f.cluster_size = cl->algebraic;
    f.largest_block = cl->largest_block();
    f.epsilons = epsilons;
    f.splitting.resize(n);
    f.center_distance.resize(n);
    f.mean_shift_re.resize(n);

    const int m = f.cluster_size;
    for (int i = 0; i < n; ++i) {
        const BimodalParams pert = perturbed(base, parameter, direction * epsilons(i));
        std::vector<cplx> ev;
        if (g == GeneratorKind::Nhh) {
            Eigen::ComplexEigenSolver<CMatrix> es(matrix(pert), false);
            if (es.info() != Eigen::Success) throw NumericalError("splitting_exponent: eigen-solve failed");
            ev.assign(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
        } else {
            const auto model = pert.model();
            MomentSystem sys = g == GeneratorKind::Moments ? second_moment_system(model) : nhh_second_moment_system(model);
            if (g == GeneratorKind::NhhMoments) {
                // The gauge a2 -> -a2 on the right factor turns M_NHH into M + gamma I,
                // which preserves Hermiticity.
                CVector z(2);
                z << 1.0, -1.0;
                const CMatrix s = kron(CMatrix::Identity(2, 2), CMatrix(z.asDiagonal()));
                sys.generator = s * sys.generator * s;
            }
            const RMatrix r = real_form(sys);
            Eigen::EigenSolver<RMatrix> es(r, false);
            if (es.info() != Eigen::Success) throw NumericalError("splitting_exponent: eigen-solve failed");
            ev.assign(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
        }
        std::stable_sort(ev.begin(), ev.end(),
                         [&](cplx x, cplx y) { return std::abs(x - f.base_center) < std::abs(y - f.base_center); });
        std::vector<cplx> cluster(ev.begin(), ev.begin() + m);
        double split = 0.0, far = 0.0;
        cplx mean = 0.0;
        for (int a1 = 0; a1 < m; ++a1) {
            mean += cluster[static_cast<std::size_t>(a1)];
            far = std::max(far, std::abs(cluster[static_cast<std::size_t>(a1)] - f.base_center));
            for (int a2 = a1 + 1; a2 < m; ++a2)
                split = std::max(split, std::abs(cluster[static_cast<std::size_t>(a1)] - cluster[static_cast<std::size_t>(a2)]));
        }
        if (static_cast<int>(ev.size()) > m && std::abs(ev[static_cast<std::size_t>(m)] - f.base_center) <= far)
            throw ValidationError("splitting_exponent: epsilon " + std::to_string(epsilons(i)) +
                                  " is so large that the cluster merges with other eigenvalues");
        mean /= static_cast<double>(m);
        f.splitting(i) = split;
        f.center_distance(i) = far;
        f.mean_shift_re(i) = (mean - f.base_center).real();
        int reals = 0;
        for (const cplx& z : cluster) reals += std::abs(z.imag()) < f.real_tol ? 1 : 0;
        f.real_count.push_back(reals);
        f.chain_real_count.push_back(reals - (f.cluster_size - f.largest_block));
        std::sort(cluster.begin(), cluster.end(), [](cplx x, cplx y) { return x.imag() < y.imag(); });
        std::string flags;
        for (const cplx& z : cluster) flags += std::abs(z.imag()) < f.real_tol ? 'R' : 'C';
        f.branch_real_flags.push_back(flags);
        const cplx median = cluster[static_cast<std::size_t>(m / 2)];
        f.median_real.push_back(std::abs(median.imag()) < f.real_tol);
    }

    // Splittings at the noise floor of the eigen-solver carry no exponent.
    const double noise = 1e-9 * std::max(1.0, std::abs(f.base_center));
    if (f.splitting.maxCoeff() <= noise) {
        f.note = "cluster does not split under this perturbation";
        return f;
    }
    RVector x(n), y(n);
    for (int i = 0; i < n; ++i) {
        if (!(f.splitting(i) > 0.0)) throw NumericalError("splitting_exponent: zero splitting inside a splitting series");
        x(i) = std::log(epsilons(i));
        y(i) = std::log(f.splitting(i));
    }
    const double xm = x.mean(), ym = y.mean();
    const double sxx = (x.array() - xm).square().sum();
    const double sxy = ((x.array() - xm) * (y.array() - ym)).sum();
    f.slope = sxy / sxx;
    const double intercept = ym - f.slope * xm;
    const RVector res = y - (intercept + f.slope * x.array()).matrix();
    f.log_rms = std::sqrt(res.squaredNorm() / n);
    const double s2 = res.squaredNorm() / (n - 2);
    boost::math::students_t dist(n - 2);
    const double tq = boost::math::quantile(boost::math::complement(dist, 0.025));
    f.slope_ci = tq * std::sqrt(s2 / sxx);
    f.p = 1.0 / f.slope;
    f.p_lo = 1.0 / (f.slope + f.slope_ci);
    f.p_hi = f.slope - f.slope_ci > 0 ? 1.0 / (f.slope - f.slope_ci) : std::numeric_limits<double>::infinity();
    f.fitted = true;
    return f;
}

/// log-spaced grid of `count` points on [lo, hi].
inline RVector log_grid(double lo, double hi, int count) {
    if (!(lo > 0.0) || !(hi > lo) || count < 2) throw ValidationError("log_grid: need 0 < lo < hi and count >= 2");
    RVector g(count);
    for (int i = 0; i < count; ++i) g(i) = lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1));
    return g;
}

}  // namespace lep
