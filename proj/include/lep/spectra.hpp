#pragma once

// Power and intensity-fluctuation spectra: resolvent, quadrature, and the
// closed forms of the two-mode model, plus Lorentzian lineshape analysis.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <unsupported/Eigen/NonLinearOptimization>
#include <unsupported/Eigen/NumericalDiff>

#include "lep/correlations.hpp"

namespace lep {

enum class SpectrumKind { Power, IntensityFluctuation };
enum class Convention { Canonical, Paper };

inline const char* to_string(SpectrumKind k) { return k == SpectrumKind::Power ? "power" : "intensity-fluctuation"; }
inline const char* to_string(Convention c) { return c == Convention::Canonical ? "canonical" : "paper"; }

/// Factor between the printed closed forms and the canonical (1/pi) Re of the
/// one-sided Fourier transform: 2 for the power spectrum, pi for the
/// intensity-fluctuation spectrum.
inline double convention_factor(SpectrumKind k) { return k == SpectrumKind::Power ? 2.0 : kPi; }

struct SpectrumSeries {
    RVector omega;
    RVector values;
    SpectrumKind kind = SpectrumKind::Power;
    Convention convention = Convention::Canonical;
    std::string mode;
    std::vector<std::string> warnings;
};

struct QuadratureReport {
    double horizon = 0.0;     // upper integration limit
    int panels = 0;
    double max_error = 0.0;   // largest Gauss-Kronrod error estimate over omega
    double tail_bound = 0.0;  // bound on the truncated integral beyond the horizon
};

namespace detail {

inline void apply_convention(SpectrumSeries& s, Convention c) {
    s.convention = c;
    if (c == Convention::Paper) s.values *= convention_factor(s.kind);
}

// (1/pi) Re int_0^T f(tau) e^{i omega tau} dtau over panels no wider than `panel`.
template <class F>
double fourier_panels(const F& f, double omega, double horizon, double panel, double& error) {
    namespace q = boost::math::quadrature;
    const int n = std::max(1, static_cast<int>(std::ceil(horizon / panel)));
    const double w = horizon / n;
    double total = 0.0;
    error = 0.0;
    for (int p = 0; p < n; ++p) {
        double err = 0.0;
        total += q::gauss_kronrod<double, 31>::integrate(
            [&](double t) { return (f(t) * std::exp(cplx(0.0, omega * t))).real(); }, p * w, (p + 1) * w, 6, 1e-11,
            &err);
        error += err;
    }
    error /= kPi;
    return total / kPi;
}

}  // namespace detail

/// S(omega) = (1/pi) Re[u^T (i(H - omega))^-1 C1^T u*] / <b^dag b>, the exact
/// transform of g1 for a matrix-exponential propagator.
inline SpectrumSeries power_spectrum(const ValidatedModel& model, const Probe& probe, const RVector& omega,
                                     Convention convention = Convention::Canonical) {
    if (probe.u.size() != model.n()) throw ValidationError("probe dimension does not match the model");
    const CMatrix h = build_effective_nhh(model, Frame::Lab).matrix;
    detail::require_stable(h);
    const CMatrix c1 = unit_steady_state(model);
    const CVector seed = c1.transpose() * probe.u.conjugate();
    const cplx norm = probe.u.transpose() * seed;
    if (!(std::abs(norm) > 0.0)) throw NumericalError("power_spectrum: probe field carries no steady-state population");
    const Eigen::Index n = h.rows();
    SpectrumSeries s;
    s.omega = omega;
    s.values.resize(omega.size());
    s.kind = SpectrumKind::Power;
    s.mode = probe.label;
    for (Eigen::Index i = 0; i < omega.size(); ++i) {
        const CMatrix r = I_unit * (h - omega(i) * CMatrix::Identity(n, n));
        const CVector x = r.partialPivLu().solve(seed);
        s.values(i) = (cplx(probe.u.transpose() * x) / norm).real() / kPi;
    }
    detail::apply_convention(s, convention);
    return s;
}

/// Same spectrum by adaptive Gauss-Kronrod quadrature of g1, as an independent path.
inline SpectrumSeries power_spectrum_quadrature(const ValidatedModel& model, const Probe& probe, const RVector& omega,
                                                QuadratureReport* report = nullptr) {
    const CoherenceEvaluator g(model, probe);
    const double kappa = g.decay_rate();
    const double horizon = 44.0 / kappa;
    SpectrumSeries s;
    s.omega = omega;
    s.values.resize(omega.size());
    s.kind = SpectrumKind::Power;
    s.mode = probe.label;
    QuadratureReport rep;
    rep.horizon = horizon;
    for (Eigen::Index i = 0; i < omega.size(); ++i) {
        const double osc = std::abs(omega(i)) + g.frequency_spread() + 1.0;
        const double panel = std::min(1.0 / kappa, kPi / osc);
        double err = 0.0;
        s.values(i) = detail::fourier_panels(g, omega(i), horizon, panel, err);
        rep.panels = std::max(rep.panels, static_cast<int>(std::ceil(horizon / panel)));
        rep.max_error = std::max(rep.max_error, err);
    }
    // |g1(tau)| <= |g1(T)| e^{-kappa (tau - T)} up to the slowly varying prefactor
    rep.tail_bound = 2.0 * std::abs(g(horizon)) / (kappa * kPi);
    if (rep.max_error + rep.tail_bound > 1e-8)
        throw NumericalError("power_spectrum_quadrature: no convergence (error " + std::to_string(rep.max_error) +
                             ", tail " + std::to_string(rep.tail_bound) + ")");
    if (report) *report = rep;
    return s;
}

/// S2(omega) = (1/pi) Re int_0^inf (g2(tau) - 1) e^{i omega tau} dtau with
/// g2 - 1 = |g1|^2 for the thermal steady state.
inline SpectrumSeries intensity_fluctuation_spectrum(const ValidatedModel& model, const Probe& probe,
                                                     const RVector& omega,
                                                     Convention convention = Convention::Canonical,
                                                     QuadratureReport* report = nullptr) {
    const CoherenceEvaluator g(model, probe);
    const double kappa = 2.0 * g.decay_rate();
    const double horizon = 44.0 / kappa;
    auto f = [&](double t) { return cplx(std::norm(g(t)), 0.0); };
    SpectrumSeries s;
    s.omega = omega;
    s.values.resize(omega.size());
    s.kind = SpectrumKind::IntensityFluctuation;
    s.mode = probe.label;
    QuadratureReport rep;
    rep.horizon = horizon;
    for (Eigen::Index i = 0; i < omega.size(); ++i) {
        const double osc = std::abs(omega(i)) + 2.0 * g.frequency_spread() + 1.0;
        const double panel = std::min(1.0 / kappa, kPi / osc);
        double err = 0.0;
        s.values(i) = detail::fourier_panels(f, omega(i), horizon, panel, err);
        rep.panels = std::max(rep.panels, static_cast<int>(std::ceil(horizon / panel)));
        rep.max_error = std::max(rep.max_error, err);
    }
    rep.tail_bound = 2.0 * std::norm(g(horizon)) / (kappa * kPi);
    if (rep.max_error + rep.tail_bound > 1e-8)
        throw NumericalError("intensity_fluctuation_spectrum: no convergence (error " +
                             std::to_string(rep.max_error) + ", tail " + std::to_string(rep.tail_bound) + ")");
    if (report) *report = rep;
    detail::apply_convention(s, convention);
    return s;
}

/// Printed two-Lorentzian form of the supermode power spectra,
/// (1/(pi D)) [K+ (D -/+ g12)/(W^2 + K+^2) + K- (D +/- g12)/(W^2 + K-^2)],
/// K+- = (gamma +- D)/2, W = omega - omega_bar; the D -> 0 limit is used near the EP.
inline double power_spectrum_closed_form_at(double gamma, double gamma12, double delta, double omega_bar,
                                            Supermode sm, double omega) {
    const double w = omega - omega_bar;
    const double sign = sm == Supermode::C1 ? 1.0 : -1.0;
    const cplx d = bimodal_discriminant(gamma12, delta);
    if (std::abs(d) < 1e-6) {
        const double u = gamma * gamma + 4.0 * w * w;
        return 4.0 / (kPi * u) * (gamma - sign * gamma12 + sign * 2.0 * gamma * gamma * gamma12 / u);
    }
    const cplx kp = 0.5 * (gamma + d), km = 0.5 * (gamma - d);
    const cplx v = kp * (d - sign * gamma12) / (w * w + kp * kp) + km * (d + sign * gamma12) / (w * w + km * km);
    return (v / (kPi * d)).real();
}

inline SpectrumSeries power_spectrum_closed_form(double gamma, double gamma12, double delta, double omega_bar,
                                                 Supermode sm, const RVector& omega) {
    SpectrumSeries s;
    s.omega = omega;
    s.values.resize(omega.size());
    for (Eigen::Index i = 0; i < omega.size(); ++i)
        s.values(i) = power_spectrum_closed_form_at(gamma, gamma12, delta, omega_bar, sm, omega(i));
    s.kind = SpectrumKind::Power;
    s.convention = Convention::Paper;
    s.mode = to_string(sm);
    return s;
}

/// Printed cubic-Lorentzian intensity spectrum at the EP (no 1/pi):
/// (g -/+ g12)/(w^2+g^2) - g g12 (3 g12 -/+ 4 g) / (2 (w^2+g^2)^2) + 2 g^3 g12^2 / (w^2+g^2)^3.
inline double intensity_spectrum_closed_form_ep_at(double gamma, double gamma12, Supermode sm, double omega) {
    const double sign = sm == Supermode::C1 ? 1.0 : -1.0;
    const double u = omega * omega + gamma * gamma;
    return (gamma - sign * gamma12) / u - gamma * gamma12 * (3.0 * gamma12 - sign * 4.0 * gamma) / (2.0 * u * u) +
           2.0 * gamma * gamma * gamma * gamma12 * gamma12 / (u * u * u);
}

inline SpectrumSeries intensity_spectrum_closed_form_ep(double gamma, double gamma12, Supermode sm,
                                                        const RVector& omega,
                                                        std::optional<double> delta = std::nullopt) {
    SpectrumSeries s;
    s.omega = omega;
    s.values.resize(omega.size());
    for (Eigen::Index i = 0; i < omega.size(); ++i)
        s.values(i) = intensity_spectrum_closed_form_ep_at(gamma, gamma12, sm, omega(i));
    s.kind = SpectrumKind::IntensityFluctuation;
    s.convention = Convention::Paper;
    s.mode = to_string(sm);
    if (delta && std::abs(gamma12 - std::abs(*delta)) > 1e-12 * std::max(1.0, gamma12))
        s.warnings.push_back("closed form evaluated off the exceptional point (gamma12 != |Delta|)");
    return s;
}

// ---- lineshape analysis ----

/// Second derivative by the 5-point central stencil.
template <class F>
double second_derivative(const F& f, double x, double h) {
    return (-f(x + 2 * h) + 16 * f(x + h) - 30 * f(x) + 16 * f(x - h) - f(x - 2 * h)) / (12 * h * h);
}

enum class LineshapeClass { SingleLorentzian, Sum, Difference, Squared, Cubic };

inline const char* to_string(LineshapeClass c) {
    switch (c) {
        case LineshapeClass::SingleLorentzian: return "single-lorentzian";
        case LineshapeClass::Sum: return "sum";
        case LineshapeClass::Difference: return "difference";
        case LineshapeClass::Squared: return "squared";
        default: return "cubic";
    }
}

/// weight * (width^2 / ((omega - center)^2 + width^2))^degree
struct LineComponent {
    double center = 0.0;
    double width = 0.0;
    int degree = 1;
    double weight = 0.0;
    int sign() const { return weight < 0 ? -1 : 1; }
};

inline double evaluate(const std::vector<LineComponent>& comps, double omega) {
    double v = 0.0;
    for (const auto& c : comps) {
        const double x = c.width * c.width / ((omega - c.center) * (omega - c.center) + c.width * c.width);
        v += c.weight * std::pow(x, c.degree);
    }
    return v;
}

struct LineFit {
    std::string model;
    std::vector<LineComponent> components;
    double rms = 0.0;
    int n_params = 0;
    bool converged = false;
};

struct LineshapeReport {
    std::vector<LineComponent> components;
    double peak_curvature = 0.0;
    double peak_omega = 0.0;
    LineshapeClass classification = LineshapeClass::SingleLorentzian;
    std::vector<LineFit> fits;
    double reconstruction_rms = 0.0;

    const LineFit* fit(const std::string& name) const {
        for (const auto& f : fits)
            if (f.model == name) return &f;
        return nullptr;
    }
};

namespace detail {

// Residuals of a Lorentzian-power model whose linear weights are eliminated
// by least squares (variable projection). x = [center, log widths...].
struct LineFunctor {
    using Scalar = double;
    using InputType = Eigen::VectorXd;
    using ValueType = Eigen::VectorXd;
    using JacobianType = Eigen::MatrixXd;
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

    const RVector* omega;
    const RVector* y;
    std::vector<int> degrees;
    bool nonnegative = false;
    double scale = 1.0;

    int inputs() const { return 1 + static_cast<int>(degrees.size()); }
    int values() const { return static_cast<int>(omega->size()); }

    RMatrix basis(const Eigen::VectorXd& p) const {
        RMatrix a(omega->size(), degrees.size());
        for (std::size_t c = 0; c < degrees.size(); ++c) {
            const double w = std::exp(p(1 + static_cast<Eigen::Index>(c)));
            for (Eigen::Index i = 0; i < omega->size(); ++i) {
                const double d = (*omega)(i) - p(0);
                a(i, static_cast<Eigen::Index>(c)) = std::pow(w * w / (d * d + w * w), degrees[c]);
            }
        }
        return a;
    }

    RVector weights(const RMatrix& a) const {
        RVector w = a.colPivHouseholderQr().solve(*y);
        if (!nonnegative || (w.array() >= 0).all()) return w;
        // Two-column nonnegative least squares: the optimum lies on a face.
        RVector best = RVector::Zero(w.size());
        double best_res = y->squaredNorm();
        for (Eigen::Index c = 0; c < a.cols(); ++c) {
            const double den = a.col(c).squaredNorm();
            if (den <= 0) continue;
            const double wc = std::max(0.0, a.col(c).dot(*y) / den);
            const double res = (*y - wc * a.col(c)).squaredNorm();
            if (res < best_res) {
                best_res = res;
                best.setZero();
                best(c) = wc;
            }
        }
        return best;
    }

    int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& fvec) const {
        const RMatrix a = basis(p);
        fvec = (*y - a * weights(a)) / scale;
        return 0;
    }
};

inline LineFit fit_lines(const RVector& omega, const RVector& y, const std::string& name, std::vector<int> degrees,
                         bool nonnegative, double center_guess, double width_guess) {
    LineFunctor fn;
    fn.omega = &omega;
    fn.y = &y;
    fn.degrees = degrees;
    fn.nonnegative = nonnegative;
    fn.scale = std::max(y.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());

    const int m = static_cast<int>(degrees.size());
    const double factors[] = {0.5, 1.0, 2.0, 4.0};
    LineFit best;
    best.model = name;
    best.rms = std::numeric_limits<double>::infinity();
    Eigen::VectorXd best_p;
    // Multi-start over width ratios; components start spread around the guess.
    for (double f0 : factors) {
        for (double spread : {1.0, 2.0, 4.0}) {
            Eigen::VectorXd p(1 + m);
            p(0) = center_guess;
            for (int c = 0; c < m; ++c) p(1 + c) = std::log(width_guess * f0 * std::pow(spread, c));
            Eigen::NumericalDiff<LineFunctor> nd(fn);
            Eigen::LevenbergMarquardt<Eigen::NumericalDiff<LineFunctor>> lm(nd);
            lm.parameters.maxfev = 2000;
            lm.parameters.xtol = 1e-14;
            lm.parameters.ftol = 1e-14;
            const auto status = lm.minimize(p);
            Eigen::VectorXd r;
            fn(p, r);
            const double rms = fn.scale * std::sqrt(r.squaredNorm() / static_cast<double>(r.size()));
            if (std::isfinite(rms) && rms < best.rms) {
                best.rms = rms;
                best.converged = status > 0 && status <= 4;
                best_p = p;
            }
            if (m == 1 && spread > 1.0) break;
        }
    }
    if (best_p.size() == 0) throw NumericalError("lineshape fit '" + name + "' produced no finite residual");
    const RMatrix a = fn.basis(best_p);
    const RVector w = fn.weights(a);
    for (int c = 0; c < m; ++c)
        best.components.push_back({best_p(0), std::exp(best_p(1 + c)), degrees[c], w(c)});
    best.n_params = 1 + 2 * m;
    return best;
}

inline double aic(const LineFit& f, double floor, Eigen::Index n) {
    const double rss = std::max(f.rms, floor);
    return static_cast<double>(n) * std::log(rss * rss) + 2.0 * f.n_params;
}

}  // namespace detail

/// Decomposes a single-peaked or volcano-shaped spectrum into powers of Lorentzians.
///
/// Fits one plain Lorentzian, two plain Lorentzians with nonnegative weights,
/// plain + squared, and plain + squared + cubic. A richer model wins when it
/// lowers the RMS residual by a factor >= 10 (residuals are floored at
/// 1e-10 of the peak so exact fits compare equal); otherwise the Akaike
/// criterion decides. A local minimum at the grid center is classified as a
/// difference of Lorentzians.
inline LineshapeReport lineshape_analysis(const SpectrumSeries& series) {
    const RVector& x = series.omega;
    const RVector& y = series.values;
    const Eigen::Index n = x.size();
    if (n < 7) throw ValidationError("lineshape_analysis: need at least 7 samples");
    for (Eigen::Index i = 1; i < n; ++i)
        if (!(x(i) > x(i - 1))) throw ValidationError("lineshape_analysis: omega grid must be strictly ascending");

    LineshapeReport rep;
    Eigen::Index imax = 0;
    y.maxCoeff(&imax);
    const Eigen::Index imid = n / 2;
    const double ymax = y(imax);
    const double floor = 1e-10 * std::max(std::abs(ymax), std::numeric_limits<double>::min());

    // Half width at half maximum as the initial width.
    double hw = 0.0;
    for (Eigen::Index i = imax; i < n; ++i)
        if (y(i) <= 0.5 * ymax) {
            hw = x(i) - x(imax);
            break;
        }
    if (hw <= 0.0) hw = 0.25 * (x(n - 1) - x(0));

    const bool volcano = imid > 1 && imid < n - 2 && y(imid) < ymax * (1.0 - 1e-9) && y(imid) < y(imid - 1) &&
                         y(imid) < y(imid + 1);
    const double center = volcano ? x(imid) : x(imax);

    rep.fits.push_back(detail::fit_lines(x, y, "single", {1}, false, center, hw));
    rep.fits.push_back(detail::fit_lines(x, y, "sum", {1, 1}, true, center, hw));
    rep.fits.push_back(detail::fit_lines(x, y, "squared", {1, 2}, false, center, hw));
    rep.fits.push_back(detail::fit_lines(x, y, "cubic", {1, 2, 3}, false, center, hw));

    const LineFit* winner = nullptr;
    if (volcano) {
        rep.fits.push_back(detail::fit_lines(x, y, "difference", {1, 1}, false, center, hw));
        winner = &rep.fits.back();
        rep.classification = LineshapeClass::Difference;
    } else {
        const LineshapeClass classes[] = {LineshapeClass::SingleLorentzian, LineshapeClass::Sum,
                                          LineshapeClass::Squared, LineshapeClass::Cubic};
        int win = 0;
        bool decisive = false;
        for (int k = 1; k < 4; ++k) {
            const double ratio = std::max(rep.fits[win].rms, floor) / std::max(rep.fits[k].rms, floor);
            if (ratio >= 10.0) {
                win = k;
                decisive = true;
            }
        }
        if (!decisive) {
            double best = std::numeric_limits<double>::infinity();
            for (int k = 0; k < 4; ++k) {
                const double a = detail::aic(rep.fits[k], floor, n);
                if (a < best - 1e-9) {
                    best = a;
                    win = k;
                }
            }
        }
        winner = &rep.fits[win];
        rep.classification = classes[win];
    }
    rep.components = winner->components;
    rep.reconstruction_rms = winner->rms;

    const Eigen::Index ip = volcano ? imid : imax;
    rep.peak_omega = x(ip);
    if (ip >= 2 && ip + 2 < n) {
        const double h = x(ip + 1) - x(ip);
        rep.peak_curvature =
            (-y(ip + 2) + 16 * y(ip + 1) - 30 * y(ip) + 16 * y(ip - 1) - y(ip - 2)) / (12 * h * h);
    } else {
        rep.peak_curvature = std::numeric_limits<double>::quiet_NaN();
    }
    return rep;
}

/// Uniform grid of `count` points on [lo, hi].
inline RVector linear_grid(double lo, double hi, int count) {
    if (count < 1) throw ValidationError("grid needs at least one point");
    if (count == 1) return RVector::Constant(1, lo);
    RVector g(count);
    for (int i = 0; i < count; ++i) g(i) = lo + (hi - lo) * i / (count - 1);
    return g;
}

}  // namespace lep
