#pragma once

// Command dispatch for the lepx tool. Every run writes manifest.json next to
// its artifacts; failures map to exit codes 2 (validation) and 3 (numerical,
// with diagnostics.json).

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/version.hpp>
#include <json.hpp>

#include "lep/correlations.hpp"
#include "lep/fockspace.hpp"
#include "lep/io.hpp"
#include "lep/model.hpp"
#include "lep/moments.hpp"
#include "lep/nhh.hpp"
#include "lep/sensitivity.hpp"
#include "lep/spectra.hpp"

namespace lep {

inline constexpr const char* kVersion = "0.1.0";

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;

inline const std::vector<std::string>& verbs() {
    static const std::vector<std::string> v = {"validate", "nhh-spectrum", "sweep",       "ep-find",  "correlations",
                                               "spectra",  "oracle-check", "sensitivity", "symmetry"};
    return v;
}

inline Convention parse_convention(const std::string& s) {
    if (s == "canonical") return Convention::Canonical;
    if (s == "paper") return Convention::Paper;
    throw ValidationError("unknown convention '" + s + "' (expected canonical, paper)");
}

struct Command {
    std::string verb;
    std::string model_path;  // empty: use the preset
    std::string preset = "fig1";
    std::filesystem::path out = "out";
    double tol = kDefaultClusterTol;
    int cutoff = 6;
    std::optional<double> n_th;
    std::optional<double> gamma12;
    std::string convention = "canonical";
    double mem_budget_mib = kDefaultMemBudgetMiB;

    // sweep, sensitivity
    std::string param = "gamma12";
    std::string generator = "nhh";
    double from = 0.0, to = 2.0;
    int steps = 201;
    double eps_min = 1e-6, eps_max = 1e-2;
    int eps_count = 17;
    double direction = 1.0;

    // correlations, spectra, oracle-check
    std::vector<std::string> modes;  // empty: every mode, plus c1 and c2 for two modes
    double tau_max = 10.0;
    int tau_steps = 201;
    int max_k = 2;  // g^(2k) for k = 1..max_k
    double omega_min = -6.0, omega_max = 6.0;
    int omega_steps = 241;
    double oracle_tau_max = 5.0;
    int oracle_tau_steps = 51;
};

/// Options as recorded in the manifest; the output directory is left out so
/// that reruns elsewhere produce the same manifest.
inline nlohmann::json options_json(const Command& c) {
    nlohmann::json j;
    j["model_path"] = c.model_path;
    j["preset"] = c.model_path.empty() ? c.preset : "";
    j["tol"] = c.tol;
    j["cutoff"] = c.cutoff;
    j["n_th"] = c.n_th ? nlohmann::json(*c.n_th) : nlohmann::json();
    j["gamma12"] = c.gamma12 ? nlohmann::json(*c.gamma12) : nlohmann::json();
    j["convention"] = c.convention;
    j["mem_budget_mib"] = c.mem_budget_mib;
    j["param"] = c.param;
    j["generator"] = c.generator;
    j["from"] = c.from;
    j["to"] = c.to;
    j["steps"] = c.steps;
    j["eps_min"] = c.eps_min;
    j["eps_max"] = c.eps_max;
    j["eps_count"] = c.eps_count;
    j["direction"] = c.direction;
    j["modes"] = c.modes;
    j["tau_max"] = c.tau_max;
    j["tau_steps"] = c.tau_steps;
    j["max_k"] = c.max_k;
    j["omega_min"] = c.omega_min;
    j["omega_max"] = c.omega_max;
    j["omega_steps"] = c.omega_steps;
    j["oracle_tau_max"] = c.oracle_tau_max;
    j["oracle_tau_steps"] = c.oracle_tau_steps;
    return j;
}

namespace detail {

struct RunContext {
    const Command& cmd;
    std::ostream& log;
    std::vector<std::string> outputs;
    std::vector<std::string> notes;
    nlohmann::json results = nlohmann::json::object();
    std::optional<ValidatedModel> model;

    void csv(const std::string& name, const CsvTable& t) {
        write_atomic(cmd.out / name, t.str());
        outputs.push_back(name);
    }
    void json(const std::string& name, const nlohmann::json& j) {
        write_json(cmd.out / name, j);
        outputs.push_back(name);
    }
};

inline std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot read model config " + path, {path + ": cannot open"});
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

inline ModelSpec load_spec(const Command& c) {
    ModelSpec s;
    if (!c.model_path.empty()) {
        s = parse_config(read_file(c.model_path));
    } else if (c.preset == "fig1") {
        s = fig1_preset().spec();
    } else {
        throw ValidationError("unknown preset '" + c.preset + "' (expected fig1)");
    }
    if (c.gamma12) {
        if (s.n_modes != 2) throw ValidationError("--gamma12 requires a two-mode model");
        s.gamma(0, 1) = *c.gamma12;
        s.gamma(1, 0) = *c.gamma12;
    }
    if (c.n_th) s.n_th = *c.n_th;
    return s;
}

inline BimodalParams require_bimodal(const ValidatedModel& m, const std::string& verb) {
    const auto p = bimodal_params(m.spec);
    if (!p) throw ValidationError(verb + ": requires a two-mode model with gamma = [[g, g12], [g12, g]] and chi = 0");
    return *p;
}

inline std::vector<Probe> probes(const Command& c, const ValidatedModel& m) {
    std::vector<Probe> out;
    if (c.modes.empty()) {
        for (int j = 0; j < m.n(); ++j) out.push_back(mode_probe(m.n(), j));
        if (m.n() == 2) {
            out.push_back(supermode_probe(Supermode::C1));
            out.push_back(supermode_probe(Supermode::C2));
        }
        return out;
    }
    for (const auto& name : c.modes) out.push_back(parse_probe(name, m.n()));
    return out;
}

inline void require_grid(int count, const char* what, int min = 2) {
    if (count < min) throw ValidationError(std::string(what) + " must be >= " + std::to_string(min));
}

inline nlohmann::json complex_json(cplx z) { return nlohmann::json::array({z.real(), z.imag()}); }

// ---- verbs ----

inline void run_validate(RunContext& ctx) {
    const auto& m = *ctx.model;
    ctx.json("model.json", nlohmann::json::parse(serialize(m.spec)));
    CsvTable t({"index", "gamma_rate"});
    for (Eigen::Index i = 0; i < m.gamma_rates.size(); ++i) t.row().add(static_cast<int>(i)).add(m.gamma_rates(i));
    ctx.csv("gamma_rates.csv", t);
    ctx.log << "valid: " << m.n() << " mode(s), n_th = " << format_number(m.spec.n_th) << "\n";
}

inline void run_nhh_spectrum(RunContext& ctx) {
    const auto& m = *ctx.model;
    const auto h = build_effective_nhh(m, Frame::Rotating);
    const auto rep = eigendecompose(h.matrix, ctx.cmd.tol);
    const auto order = sorted_order(rep.eigenvalues);
    CsvTable t({"index", "nu_re", "nu_im", "lambda_re", "lambda_im", "algebraic", "geometric"});
    for (std::size_t k = 0; k < order.size(); ++k) {
        const int i = order[k];
        const cplx nu = rep.eigenvalues(i);
        const cplx lam = -I_unit * nu;
        const auto* cl = rep.cluster_of(i);
        t.row()
            .add(static_cast<int>(k))
            .add(nu.real())
            .add(nu.imag())
            .add(lam.real())
            .add(lam.imag())
            .add(cl ? cl->algebraic : 1)
            .add(cl ? cl->geometric : 1);
    }
    ctx.csv("nhh_eigenvalues.csv", t);
    ctx.csv("multiplicity_nhh.csv", to_csv(multiplicity_report(h.matrix, ctx.cmd.tol)));
    ctx.csv("multiplicity_moments.csv", to_csv(multiplicity_report(second_moment_system(m), ctx.cmd.tol)));
    ctx.csv("multiplicity_nhh_moments.csv", to_csv(multiplicity_report(nhh_second_moment_system(m), ctx.cmd.tol)));
    ctx.results["frame_shift"] = h.shift;
    ctx.results["eigvec_condition"] = rep.eigvec_condition;
    for (const auto& c : rep.clusters)
        if (c.defective())
            ctx.log << "defective eigenvalue nu = " << format_number(c.center.real()) << " "
                    << format_number(c.center.imag()) << "i, algebraic " << c.algebraic << ", geometric "
                    << c.geometric << "\n";
    ctx.log << "wrote " << rep.eigenvalues.size() << " eigenvalues\n";
}

inline void run_sweep(RunContext& ctx) {
    const auto& c = ctx.cmd;
    const BimodalParams base = require_bimodal(*ctx.model, "sweep");
    require_grid(c.steps, "--steps");
    if (!(c.to >= c.from)) throw ValidationError("sweep: --to must be >= --from");
    const GeneratorKind g = parse_generator(c.generator);
    parameter_value(base, c.param);
    const RVector grid = linear_grid(c.from, c.to, c.steps);
    const auto tr = sweep_eigenvalues([&](double x) { return with_parameter(base, c.param, x).model(); }, grid, g,
                                      c.tol);
    const std::string name = std::string("sweep_") + to_string(g) + ".csv";
    ctx.csv(name, to_csv(tr, c.param));
    int flagged = 0;
    for (bool b : tr.ambiguous) flagged += b ? 1 : 0;
    ctx.results["ambiguous_points"] = flagged;
    ctx.log << "swept " << c.param << " over " << c.steps << " points, " << flagged << " flagged as degenerate\n";
}

inline void run_ep_find(RunContext& ctx) {
    const BimodalParams base = require_bimodal(*ctx.model, "ep-find");
    const double delta = base.delta();
    const double closed = hep_locus_bimodal(delta);
    if (closed > base.gamma)
        throw NumericalError("ep-find: |Delta| = " + format_number(std::abs(delta)) +
                             " exceeds gamma, no exceptional point with a PSD damping matrix");
    // bisection on the discriminant gamma12^2 - Delta^2 over [0, gamma]
    double lo = 0.0, hi = base.gamma;
    auto f = [&](double x) { return x * x - delta * delta; };
    if (f(lo) >= 0.0) {
        hi = lo;
    } else {
        for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            (f(mid) < 0.0 ? lo : hi) = mid;
        }
    }
    const double bisected = hi;
    const auto at_ep = with_parameter(base, "gamma12", closed).model();
    const auto rep = eigendecompose(build_effective_nhh(at_ep).matrix, ctx.cmd.tol);
    const EigenCluster* cl = nullptr;
    for (const auto& k : rep.clusters)
        if (!cl || k.algebraic > cl->algebraic) cl = &k;
    if (!cl || !cl->defective())
        throw NumericalError("ep-find: no defective eigenvalue at gamma12 = " + format_number(closed));
    const auto mom = multiplicity_report(second_moment_system(at_ep), ctx.cmd.tol);
    const MultiplicityReport* mr = &mom.front();
    for (const auto& r : mom)
        if (r.algebraic > mr->algebraic) mr = &r;

    CsvTable t({"gamma12_ep", "gamma12_bisection", "nu_re", "nu_im", "algebraic", "geometric", "moments_lambda_re",
                "moments_lambda_im", "moments_algebraic", "moments_geometric", "moments_lep_order"});
    t.row()
        .add(closed)
        .add(bisected)
        .add(cl->center.real())
        .add(cl->center.imag())
        .add(cl->algebraic)
        .add(cl->geometric)
        .add(mr->lambda.real())
        .add(mr->lambda.imag())
        .add(mr->algebraic)
        .add(mr->geometric)
        .add(mr->lep_order);
    ctx.csv("ep.csv", t);
    ctx.results["gamma12_ep"] = closed;
    ctx.results["gamma12_bisection"] = bisected;
    ctx.log << "gamma12_EP = " << format_number(closed) << " (bisection " << format_number(bisected) << ")\n"
            << "nu = " << format_number(cl->center.real()) << " " << format_number(cl->center.imag())
            << "i, algebraic " << cl->algebraic << ", geometric " << cl->geometric << "\n";
}

inline void run_correlations(RunContext& ctx) {
    const auto& c = ctx.cmd;
    const auto& m = *ctx.model;
    require_grid(c.tau_steps, "--tau-steps");
    if (!(c.tau_max > 0.0)) throw ValidationError("--tau-max must be > 0");
    if (c.max_k < 0 || c.max_k > kMaxWickOrder) throw ValidationError("--max-k must be in [0, 8]");
    const RVector tau = linear_grid(0.0, c.tau_max, c.tau_steps);
    const auto bp = bimodal_params(m.spec);
    for (const auto& p : probes(c, m)) {
        const auto s = g1(m, p, tau);
        ctx.csv("g1_" + p.label + ".csv", to_csv(s));
        for (int k = 1; k <= c.max_k; ++k)
            ctx.csv("g" + std::to_string(2 * k) + "_" + p.label + ".csv", to_csv(g2k_series(s, k)));
        if (bp && (p.label == "c1" || p.label == "c2")) {
            CorrelationSeries cf = s;
            const Supermode sm = p.label == "c1" ? Supermode::C1 : Supermode::C2;
            for (Eigen::Index i = 0; i < tau.size(); ++i)
                cf.values(i) = g1_bimodal_closed_form(bp->gamma, bp->gamma12, bp->delta(), bp->omega_bar(), sm, tau(i));
            cf.method = "closed-form";
            ctx.csv("g1_" + p.label + "_closed.csv", to_csv(cf));
            ctx.results["g1_closed_max_dev_" + p.label] = (cf.values - s.values).cwiseAbs().maxCoeff();
        }
        ctx.results["propagator_" + p.label] = s.method;
    }
    ctx.log << "wrote " << ctx.outputs.size() << " correlation files\n";
}

inline void run_spectra(RunContext& ctx) {
    const auto& c = ctx.cmd;
    const auto& m = *ctx.model;
    require_grid(c.omega_steps, "--omega-steps", 7);
    if (!(c.omega_max > c.omega_min)) throw ValidationError("--omega-max must exceed --omega-min");
    const Convention conv = parse_convention(c.convention);
    const RVector omega = linear_grid(c.omega_min, c.omega_max, c.omega_steps);
    const auto bp = bimodal_params(m.spec);
    ctx.results["convention"] = to_string(conv);
    ctx.results["paper_over_canonical_power"] = convention_factor(SpectrumKind::Power);
    ctx.results["paper_over_canonical_intensity"] = convention_factor(SpectrumKind::IntensityFluctuation);
    for (const auto& p : probes(c, m)) {
        const auto s1 = power_spectrum(m, p, omega, conv);
        ctx.csv("power_" + p.label + ".csv", to_csv(s1));
        QuadratureReport q;
        const auto s2 = intensity_fluctuation_spectrum(m, p, omega, conv, &q);
        ctx.csv("intensity_" + p.label + ".csv", to_csv(s2));
        ctx.results["quadrature_error_" + p.label] = q.max_error;
        ctx.json("lineshape_power_" + p.label + ".json", to_json(lineshape_analysis(s1)));
        ctx.json("lineshape_intensity_" + p.label + ".json", to_json(lineshape_analysis(s2)));
        if (bp && (p.label == "c1" || p.label == "c2")) {
            const Supermode sm = p.label == "c1" ? Supermode::C1 : Supermode::C2;
            ctx.csv("power_" + p.label + "_closed.csv",
                    to_csv(power_spectrum_closed_form(bp->gamma, bp->gamma12, bp->delta(), bp->omega_bar(), sm, omega)));
            const bool at_ep = std::abs(bp->gamma12 - std::abs(bp->delta())) <= 1e-12 * std::max(1.0, bp->gamma12);
            if (at_ep && bp->omega_bar() == 0.0) {
                const auto cf = intensity_spectrum_closed_form_ep(bp->gamma, bp->gamma12, sm, omega, bp->delta());
                ctx.csv("intensity_" + p.label + "_closed.csv", to_csv(cf));
            }
        }
    }
    ctx.log << "wrote spectra on " << c.omega_steps << " frequencies (" << to_string(conv) << " convention)\n";
}

inline void run_oracle_check(RunContext& ctx) {
    const auto& c = ctx.cmd;
    ValidatedModel m = *ctx.model;
    if (!(m.spec.n_th > 0.0)) {
        ModelSpec s = m.spec;
        s.n_th = 0.2;
        m = validate(s);
        ctx.notes.push_back("model has n_th = 0; oracle-check uses n_th = 0.2");
    }
    if (c.cutoff < 2) throw ValidationError("--cutoff must be >= 2");
    require_grid(c.oracle_tau_steps, "--oracle-tau-steps");
    const auto sup = build_superoperator(m, c.cutoff, c.mem_budget_mib, Frame::Rotating);
    const auto rho = steady_state_density(sup);
    for (const auto& w : rho.warnings) ctx.notes.push_back(w);

    CsvTable summary({"quantity", "value", "tolerance", "pass"});
    bool all = true;
    auto check = [&](const std::string& q, double v, double tol) {
        const bool ok = v <= tol;
        all = all && ok;
        summary.row().add(q).add(v).add(tol).add(ok ? "PASS" : "FAIL");
        ctx.log << (ok ? "PASS " : "FAIL ") << q << " = " << format_number(v) << " (tol " << format_number(tol)
                << ")\n";
    };

    const CMatrix oracle_c = second_moments(sup, rho);
    const CMatrix moment_c = m.spec.n_th * unit_steady_state(m);
    check("steady_state_max_dev", (oracle_c - moment_c).cwiseAbs().maxCoeff(), 5e-5);

    CVector all_eigs;
    {
        std::vector<cplx> v;
        for (const auto& sec : sector_spectra(sup))
            for (Eigen::Index i = 0; i < sec.eigenvalues.size(); ++i) v.push_back(sec.eigenvalues(i));
        all_eigs = Eigen::Map<CVector>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
    const CMatrix h = build_effective_nhh(m, Frame::Rotating).matrix;
    Eigen::ComplexEigenSolver<CMatrix> hs(h, false);
    double d_nhh = 0.0;
    for (Eigen::Index i = 0; i < hs.eigenvalues().size(); ++i)
        d_nhh = std::max(d_nhh, nearest_distance(all_eigs, -I_unit * hs.eigenvalues()(i)));
    check("spectrum_nhh_max_dist", d_nhh, 1e-6);
    Eigen::ComplexEigenSolver<CMatrix> ms(second_moment_system(m).generator, false);
    double d_m = 0.0;
    for (Eigen::Index i = 0; i < ms.eigenvalues().size(); ++i)
        d_m = std::max(d_m, nearest_distance(all_eigs, ms.eigenvalues()(i)));
    check("spectrum_moments_max_dist", d_m, 1e-6);

    const RVector tau = linear_grid(0.0, c.oracle_tau_max, c.oracle_tau_steps);
    double g1_dev = 0.0, g2_dev = 0.0;
    for (const auto& p : probes(c, m)) {
        std::vector<std::string> warns;
        const auto o1 = coherence_oracle(sup, rho, p, 1, tau, &warns);
        const auto o2 = coherence_oracle(sup, rho, p, 2, tau, &warns);
        for (const auto& w : warns) ctx.notes.push_back(p.label + ": " + w);
        const auto q1 = g1(m, p, tau, Frame::Rotating);
        const auto q2 = g2k_series(q1, 1);
        ctx.csv("oracle_g1_" + p.label + ".csv", to_csv(o1));
        ctx.csv("oracle_g2_" + p.label + ".csv", to_csv(o2));
        g1_dev = std::max(g1_dev, (o1.values - q1.values).cwiseAbs().maxCoeff());
        g2_dev = std::max(g2_dev, (o2.values - q2.values).cwiseAbs().maxCoeff());
    }
    check("g1_max_dev", g1_dev, 1e-4);
    check("g2_max_dev", g2_dev, 5e-3);
    ctx.csv("oracle_summary.csv", summary);
    ctx.results["oracle_pass"] = all;
    ctx.results["boundary_population"] = rho.boundary_population;
    ctx.log << (all ? "oracle-check: PASS" : "oracle-check: FAIL") << " at cutoff " << c.cutoff << "\n";
}

inline void run_sensitivity(RunContext& ctx) {
    const auto& c = ctx.cmd;
    const BimodalParams base = require_bimodal(*ctx.model, "sensitivity");
    if (c.direction != 1.0 && c.direction != -1.0) throw ValidationError("--direction must be 1 or -1");
    if (c.eps_count < 2) throw ValidationError("--eps-count must be >= 2");
    const GeneratorKind g = parse_generator(c.generator);
    const RVector eps = log_grid(c.eps_min, c.eps_max, c.eps_count);
    const auto fit = splitting_exponent(base, c.param, eps, g, c.direction, c.tol);
    const std::string stem = std::string("sensitivity_") + to_string(g);
    ctx.csv(stem + ".csv", to_csv(fit));
    ctx.json(stem + ".json", to_json(fit));
    if (fit.fitted)
        ctx.log << "p = " << format_number(fit.p) << " [" << format_number(fit.p_lo) << ", " << format_number(fit.p_hi)
                << "], log rms " << format_number(fit.log_rms) << "\n";
    else
        ctx.log << fit.note << "\n";
}

inline void run_symmetry(RunContext& ctx) {
    const auto& m = *ctx.model;
    if (m.n() != 2) throw ValidationError("symmetry: the built-in parity is defined for two modes");
    CsvTable t({"object", "anti_pt_residual", "pt_residual_after_gauge", "gauge_rate", "classification"});
    auto row = [&](const std::string& name, const SymmetryReport& r) {
        t.row()
            .add(name)
            .add(r.anti_pt_residual)
            .add(r.pt_residual_after_gauge)
            .add(r.gauge_rate)
            .add(to_string(r.classification));
        ctx.log << name << ": " << to_string(r.classification) << "\n";
    };
    const auto h = build_effective_nhh(m, Frame::Rotating);
    row("nhh", symmetry_check(h));
    row("nhh_supermodes", symmetry_check(supermode_transform(h, kPi / 4)));
    const auto sys = second_moment_system(m);
    row("moments", check_moment_symmetry(sys, false));
    row("moments_supermodes", check_moment_symmetry(transform_to_supermodes(sys), true));
    ctx.csv("symmetry.csv", t);

    const auto a = supermode_lindblad_coefficients(m, kPi / 4);
    CsvTable l({"theta", "A1", "A2", "A12", "A21", "gamma_c1", "gamma_c2", "diagonalized"});
    l.row().add(a.theta).add(a.A1).add(a.A2).add(a.A12).add(a.A21).add(a.gamma_c1).add(a.gamma_c2).add(
        a.diagonalized ? 1 : 0);
    ctx.csv("supermode_lindblad.csv", l);
}

inline nlohmann::json library_versions() {
    return {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"boost", BOOST_LIB_VERSION},
            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
}

inline nlohmann::json tolerances(const Command& c) {
    return {{"cluster_rel", c.tol},
            {"real_tol", 1e-12},
            {"quadrature_rel", 1e-11},
            {"quadrature_abs_budget", 1e-8},
            {"propagator_condition_limit", 1e8}};
}

}  // namespace detail

/// Executes one command; returns the process exit code.
inline int run(const Command& cmd, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
    detail::RunContext ctx{cmd, log, {}, {}, nlohmann::json::object(), std::nullopt};
    nlohmann::json manifest;
    manifest["tool"] = "lepx";
    manifest["version"] = kVersion;
    manifest["verb"] = cmd.verb;
    manifest["options"] = options_json(cmd);
    manifest["tolerances"] = detail::tolerances(cmd);
    manifest["libraries"] = detail::library_versions();

    auto finish = [&](const std::string& status, int code) {
        manifest["status"] = status;
        std::sort(ctx.outputs.begin(), ctx.outputs.end());
        manifest["outputs"] = ctx.outputs;
        manifest["notes"] = ctx.notes;
        manifest["results"] = ctx.results;
        try {
            write_json(cmd.out / "manifest.json", manifest);
        } catch (const std::exception& e) {
            err << "error: " << e.what() << "\n";
            return code == kExitOk ? kExitValidation : code;
        }
        return code;
    };
    auto diagnostics = [&](const std::string& kind, const std::string& what, const std::vector<std::string>& details) {
        nlohmann::json d;
        d["kind"] = kind;
        d["error"] = what;
        d["details"] = details;
        d["verb"] = cmd.verb;
        if (ctx.model) {
            const CMatrix h = build_effective_nhh(*ctx.model).matrix;
            d["nhh_norm"] = norm2(h);
            Eigen::ComplexEigenSolver<CMatrix> es(h, true);
            if (es.info() == Eigen::Success) {
                Eigen::JacobiSVD<CMatrix> svd(es.eigenvectors());
                const auto& s = svd.singularValues();
                d["nhh_eigvec_condition"] = s(s.size() - 1) > 0 ? s(0) / s(s.size() - 1) : -1.0;
            }
        }
        try {
            write_json(cmd.out / "diagnostics.json", d);
            ctx.outputs.push_back("diagnostics.json");
        } catch (const std::exception& e) {
            err << "error: " << e.what() << "\n";
        }
    };

    try {
        std::error_code ec;
        std::filesystem::create_directories(cmd.out, ec);
        if (ec || !std::filesystem::is_directory(cmd.out))
            throw IoError("cannot create output directory " + cmd.out.string());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    }

    try {
        if (std::find(verbs().begin(), verbs().end(), cmd.verb) == verbs().end())
            throw ValidationError("unknown verb '" + cmd.verb + "'");
        if (!(cmd.tol > 0.0)) throw ValidationError("--tol must be > 0");
        ctx.model = validate(detail::load_spec(cmd));
        manifest["model"] = nlohmann::json::parse(serialize(ctx.model->spec));
        manifest["model_source"] = cmd.model_path.empty() ? "preset:" + cmd.preset : cmd.model_path;

        if (cmd.verb == "validate") detail::run_validate(ctx);
        else if (cmd.verb == "nhh-spectrum") detail::run_nhh_spectrum(ctx);
        else if (cmd.verb == "sweep") detail::run_sweep(ctx);
        else if (cmd.verb == "ep-find") detail::run_ep_find(ctx);
        else if (cmd.verb == "correlations") detail::run_correlations(ctx);
        else if (cmd.verb == "spectra") detail::run_spectra(ctx);
        else if (cmd.verb == "oracle-check") detail::run_oracle_check(ctx);
        else if (cmd.verb == "sensitivity") detail::run_sensitivity(ctx);
        else detail::run_symmetry(ctx);
        return finish("ok", kExitOk);
    } catch (const ValidationError& e) {
        err << "validation error: " << e.what() << "\n";
        for (const auto& d : e.details()) err << "  " << d << "\n";
        diagnostics("validation", e.what(), e.details());
        return finish("validation-error", kExitValidation);
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return finish("io-error", kExitValidation);
    } catch (const std::exception& e) {
        err << "numerical error: " << e.what() << "\n";
        diagnostics("numerical", e.what(), {});
        return finish("numerical-error", kExitNumerical);
    }
}

}  // namespace lep
