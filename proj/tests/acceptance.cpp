// Acceptance criteria: one PASS/FAIL line each; exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lep/lep.hpp"

using namespace lep;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
    std::cout << (ok ? "PASS" : "FAIL") << " " << id << " " << name << ": " << detail << std::endl;
    if (!ok) ++failures;
}

std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", x);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(slurp(p));
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

int lepx(const std::string& args, const fs::path& out) {
    const std::string cmd = std::string("\"") + LEPX_PATH + "\" " + args + " --out \"" + out.string() + "\" > \"" +
                            (out.string() + ".log") + "\" 2>&1";
    fs::create_directories(out.parent_path());
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

template <class F>
double second_derivative(F f, double x, double h) {
    return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
}

const fs::path kWork = fs::temp_directory_path() / "lep_acceptance";

// 1. EP locus
void ep_locus() {
    const fs::path out = kWork / "ep";
    const int rc = lepx("ep-find --preset fig1", out);
    double g_ep = -1.0;
    if (rc == 0) {
        const auto rows = read_csv(out / "ep.csv");
        if (rows.size() == 2) g_ep = std::stod(rows[1][0]);
    }
    const auto rep = eigendecompose(build_effective_nhh(fig1_preset().model()).matrix);
    bool ok = rc == 0 && g_ep == 1.0 && rep.clusters.size() == 1;
    double dnu = 1.0;
    if (rep.clusters.size() == 1) {
        const auto& c = rep.clusters[0];
        dnu = std::abs(c.center - cplx(0.0, -1.5));
        ok = ok && c.algebraic == 2 && c.geometric == 1 && dnu <= 1e-10;
    }
    report(1, "EP locus", ok,
           "gamma12_EP = " + format_number(g_ep) + ", |nu + 1.5i| = " + num(dnu) +
               (rep.clusters.size() == 1 ? ", algebraic " + std::to_string(rep.clusters[0].algebraic) + " / geometric " +
                                               std::to_string(rep.clusters[0].geometric)
                                         : ""));
}

// 2. NHH branch shapes across gamma12 in [0, 2]
void branch_shapes() {
    const RVector grid = linear_grid(0.0, 2.0, 201);
    const auto tr = sweep_eigenvalues([](double x) { return with_parameter(fig1_preset(), "gamma12", x).model(); },
                                      grid, GeneratorKind::Nhh);
    double dev = 0.0, shape = 0.0;
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
        const double g = grid(i);
        const auto cf = bimodal_eigenvalues(3.0, g, -1.0);
        CVector expect(2);
        expect << cf[0], cf[1];
        const CVector got = tr.branches.row(i).transpose();
        const auto perm = match_eigenvalues(expect, got);
        for (int k = 0; k < 2; ++k) dev = std::max(dev, std::abs(got(perm[k]) - expect(k)));
        const cplx hi = got(0).real() >= got(1).real() ? got(0) : got(1);
        const cplx up = got(0).imag() >= got(1).imag() ? got(0) : got(1);
        if (g < 1.0)
            shape = std::max(shape, std::abs(hi.real() - 0.5 * std::sqrt(1.0 - g * g)));
        else if (g > 1.0)
            shape = std::max(shape, std::abs(up.imag() - (-1.5 + 0.5 * std::sqrt(g * g - 1.0))));
    }
    const fs::path out = kWork / "sweep";
    const int rc = lepx("sweep --preset fig1 --param gamma12 --from 0 --to 2 --steps 201 --generator nhh", out);
    const bool csv_ok = rc == 0 && read_csv(out / "sweep_nhh.csv").size() == 1 + 2 * 201;
    report(2, "NHH branch shapes", dev <= 1e-12 && shape <= 1e-12 && csv_ok,
           "max |nu - closed form| = " + num(dev) + ", max branch-shape deviation = " + num(shape) +
               ", sweep CSV " + (csv_ok ? "written" : "missing"));
}

// 3. g1 agreement
void g1_agreement() {
    std::mt19937 rng(20240601);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<BimodalParams> sets{fig1_preset()};
    while (sets.size() < 20) {
        BimodalParams p;
        p.omega1 = 4 * u(rng) - 2;
        p.omega2 = 4 * u(rng) - 2;
        p.gamma = 0.5 + 3.5 * u(rng);
        p.gamma12 = p.gamma * u(rng);
        sets.push_back(p);
    }
    const RVector tau = linear_grid(0.0, 10.0, 201);
    double dev = 0.0;
    for (const auto& p : sets)
        for (auto sm : {Supermode::C1, Supermode::C2}) {
            const auto s = g1(p.model(), supermode_probe(sm), tau);
            for (Eigen::Index i = 0; i < tau.size(); ++i)
                dev = std::max(dev, std::abs(s.values(i) - g1_bimodal_closed_form(p.gamma, p.gamma12, p.delta(),
                                                                                 p.omega_bar(), sm, tau(i))));
        }
    const auto ep = g1(fig1_preset().model(), supermode_probe(Supermode::C1), tau);
    double env = 0.0;
    for (Eigen::Index i = 0; i < tau.size(); ++i)
        env = std::max(env, std::abs(std::abs(ep.values(i)) * std::exp(1.5 * tau(i)) - (1.0 + 0.5 * tau(i))));
    report(3, "g1 agreement", dev < 1e-8 && env <= 1e-10,
           "max |g1 - closed form| = " + num(dev) + " over 20 sets, EP envelope deviation = " + num(env));
}

// 4. Power spectra
void power_spectra() {
    const RVector omega = linear_grid(-6.0, 6.0, 49);
    double quad = 0.0, ratio = 0.0;
    for (double g12 : {1.0, 0.4, 1.8}) {
        BimodalParams p;
        p.gamma12 = g12;
        for (auto sm : {Supermode::C1, Supermode::C2}) {
            const auto r = power_spectrum(p.model(), supermode_probe(sm), omega);
            const auto q = power_spectrum_quadrature(p.model(), supermode_probe(sm), omega);
            quad = std::max(quad, (r.values - q.values).cwiseAbs().maxCoeff());
            const auto cf = power_spectrum_closed_form(3.0, g12, -1.0, 0.0, sm, omega);
            for (Eigen::Index i = 0; i < omega.size(); ++i)
                ratio = std::max(ratio, std::abs(cf.values(i) / r.values(i) - 2.0));
        }
    }
    const double p1 = power_spectrum_closed_form_at(3, 1, -1, 0, Supermode::C1, 0.0);
    const double p2 = power_spectrum_closed_form_at(3, 1, -1, 0, Supermode::C2, 0.0);
    const double peak = std::max(std::abs(p1 - 16.0 / (9.0 * kPi)), std::abs(p2 - 8.0 / (9.0 * kPi)));
    report(4, "power spectra", quad <= 1e-8 && ratio <= 1e-6 && peak <= 1e-10,
           "resolvent - quadrature = " + num(quad) + ", |closed/canonical - 2| = " + num(ratio) +
               ", peak deviation = " + num(peak));
}

// 5. Squared-Lorentzian plateau
void plateau() {
    const auto model = fig1_preset().model();
    const auto probe = supermode_probe(Supermode::C2);
    auto s = [&](double w) {
        RVector o(1);
        o << w;
        return power_spectrum(model, probe, o).values(0);
    };
    const double curv = std::abs(second_derivative(s, 0.0, 1e-3));
    const double s0 = s(0.0);
    const auto rep = lineshape_analysis(power_spectrum(model, probe, linear_grid(-6.0, 6.0, 121)));
    const double sum_rms = rep.fit("sum") ? rep.fit("sum")->rms : 0.0;
    const double sq_rms = rep.fit("squared") ? rep.fit("squared")->rms : 1.0;
    const bool ok = curv < 1e-6 * s0 && sum_rms >= 10.0 * sq_rms;
    report(5, "squared-Lorentzian plateau", ok,
           "|S''(0)|/S(0) = " + num(curv / s0) + ", two-plain rms / plain+squared rms = " + num(sum_rms / sq_rms) +
               ", class " + to_string(rep.classification));
}

// 6. Cubic Lorentzian
void cubic() {
    const RVector omega = linear_grid(-6.0, 6.0, 49);
    double dev = 0.0;
    double at0[2] = {0.0, 0.0};
    int k = 0;
    for (auto sm : {Supermode::C1, Supermode::C2}) {
        const auto q = intensity_fluctuation_spectrum(fig1_preset().model(), supermode_probe(sm), omega);
        const auto cf = intensity_spectrum_closed_form_ep(3.0, 1.0, sm, omega, -1.0);
        dev = std::max(dev, (q.values - cf.values / kPi).cwiseAbs().maxCoeff());
        at0[k++] = kPi * q.values(24);
    }
    const double b0 = std::max(std::abs(at0[0] - 25.0 / 54.0), std::abs(at0[1] - 13.0 / 54.0));
    const bool printed = std::abs(at0[0] - 0.462963) < 5e-7 && std::abs(at0[1] - 0.240741) < 5e-7;
    report(6, "cubic Lorentzian", dev <= 1e-8 && b0 <= 1e-9 && printed,
           "quadrature - closed form / pi = " + num(dev) + ", brackets at 0: " + format_number(at0[0]) + ", " +
               format_number(at0[1]) + " (|dev from 25/54, 13/54| = " + num(b0) + ")");
}

// 7. Moment matrices
void moment_matrices() {
    std::mt19937 rng(5150);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double ent = 0.0, eig = 0.0, shift = 0.0;
    for (int t = 0; t < 50; ++t) {
        const double g = 0.5 + 3.0 * u(rng), g12 = g * (2.0 * u(rng) - 1.0);
        const double w1 = 4 * u(rng) - 2, w2 = 4 * u(rng) - 2, d = w1 - w2;
        BimodalParams p{w1, w2, g, g12, 0.0};
        const auto m = p.model();
        CMatrix pm(4, 4), pn(4, 4);
        pm << -2 * g, -g12, -g12, 0, -g12, cplx(-2 * g, 2 * d), 0, -g12, -g12, 0, cplx(-2 * g, -2 * d), -g12, 0, -g12,
            -g12, -2 * g;
        pn << 0, g12, -g12, 0, g12, cplx(0, 2 * d), 0, -g12, -g12, 0, cplx(0, -2 * d), g12, 0, -g12, g12, 0;
        const CMatrix ml = second_moment_system(m).generator, mn = nhh_second_moment_system(m).generator;
        ent = std::max({ent, max_abs(ml - 0.5 * pm), max_abs(mn - 0.5 * pn)});

        const cplx dd = std::sqrt(cplx(g12 * g12 - d * d));
        CVector expect(4);
        expect << -g + dd, -g - dd, -g, -g;
        Eigen::ComplexEigenSolver<CMatrix> el(ml, false), en(mn, false);
        const CVector lam = el.eigenvalues();
        const auto perm = match_eigenvalues(expect, lam);
        for (int k = 0; k < 4; ++k) eig = std::max(eig, std::abs(lam(perm[k]) - expect(k)));
        const auto so = sorted_order(lam);
        CVector shifted(4);
        for (int k = 0; k < 4; ++k) shifted(k) = lam(so[k]) + g;
        const CVector nhh = en.eigenvalues();
        const auto perm2 = match_eigenvalues(shifted, nhh);
        for (int k = 0; k < 4; ++k) shift = std::max(shift, std::abs(nhh(perm2[k]) - shifted(k)));
    }
    report(7, "moment matrices", ent < 1e-13 && eig < 1e-10 && shift < 1e-10,
           "entrywise = " + num(ent) + ", eigenvalues vs {-g +/- D, -g, -g} = " + num(eig) +
               ", lambda_NHH - (lambda_L + g) = " + num(shift));
}

// 8. Third-order LEP multiplicities
void lep_multiplicity() {
    const auto sys = second_moment_system(fig1_preset().model());
    const auto reps = multiplicity_report(sys);
    const CMatrix shifted = sys.generator + 3.0 * CMatrix::Identity(4, 4);
    const int null = nullity(shifted, rank_threshold(sys.generator));
    bool ok = reps.size() == 1 && null == 3;
    std::string detail = "nullity(M + 3I) = " + std::to_string(null);
    if (reps.size() == 1) {
        ok = ok && reps[0].algebraic == 4 && reps[0].geometric == 3 && std::abs(reps[0].lambda + 3.0) < 1e-8;
        std::string blocks;
        for (int b : reps[0].jordan_blocks) blocks += (blocks.empty() ? "" : ",") + std::to_string(b);
        detail += ", algebraic " + std::to_string(reps[0].algebraic) + " / geometric " +
                  std::to_string(reps[0].geometric) + ", Jordan blocks {" + blocks + "} (expected geometric 3)";
    }
    report(8, "third-order LEP multiplicities", ok, detail);
}

// 9. Symmetries
void symmetries() {
    const auto m = fig1_preset().model();
    const auto h = build_effective_nhh(m);
    const auto sys = second_moment_system(m);
    const double a1 = symmetry_check(h).anti_pt_residual;
    const double a2 = check_moment_symmetry(sys, false).anti_pt_residual;
    const double p1 = symmetry_check(supermode_transform(h, kPi / 4)).pt_residual_after_gauge;
    const double p2 = check_moment_symmetry(transform_to_supermodes(sys), true).pt_residual_after_gauge;
    const auto a = supermode_lindblad_coefficients(m, kPi / 4);
    const double adev = std::max({std::abs(a.A1 - 2.0), std::abs(a.A2 - 4.0), std::abs(a.A12), std::abs(a.A21)});
    const bool ok = a1 < 1e-13 && a2 < 1e-13 && p1 < 1e-13 && p2 < 1e-13 && adev <= 1e-14;
    report(9, "symmetries", ok,
           "anti-PT H = " + num(a1) + ", anti-PT iM = " + num(a2) + ", gauged PT H' = " + num(p1) +
               ", gauged PT iN' = " + num(p2) + ", supermode coefficients = " + num(adev));
}

// 10. Fock-space oracle
void oracle() {
    const auto t0 = std::chrono::steady_clock::now();
    auto p = fig1_preset();
    p.n_th = 0.2;
    const auto m = p.model();
    const auto sup = build_superoperator(m, 6);
    const auto rho = steady_state_density(sup);
    const double ss = (second_moments(sup, rho) - 0.2 * unit_steady_state(m)).cwiseAbs().maxCoeff();

    std::vector<cplx> all;
    for (const auto& sec : sector_spectra(sup))
        for (Eigen::Index i = 0; i < sec.eigenvalues.size(); ++i) all.push_back(sec.eigenvalues(i));
    const CVector eigs = Eigen::Map<CVector>(all.data(), static_cast<Eigen::Index>(all.size()));
    double spec = 0.0;
    for (const auto& nu : bimodal_eigenvalues(3.0, 1.0, -1.0)) spec = std::max(spec, nearest_distance(eigs, -I_unit * nu));
    Eigen::ComplexEigenSolver<CMatrix> ms(second_moment_system(m).generator, false);
    for (Eigen::Index i = 0; i < ms.eigenvalues().size(); ++i)
        spec = std::max(spec, nearest_distance(eigs, ms.eigenvalues()(i)));

    const RVector tau = linear_grid(0.0, 5.0, 51);
    double d1 = 0.0, d2 = 0.0;
    for (const char* name : {"a1", "a2", "c1", "c2"}) {
        const auto probe = parse_probe(name, 2);
        const auto q1 = g1(m, probe, tau, Frame::Rotating);
        const auto q2 = g2k_series(q1, 1);
        d1 = std::max(d1, (coherence_oracle(sup, rho, probe, 1, tau).values - q1.values).cwiseAbs().maxCoeff());
        d2 = std::max(d2, (coherence_oracle(sup, rho, probe, 2, tau).values - q2.values).cwiseAbs().maxCoeff());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool ok = ss <= 5e-5 && spec <= 1e-6 && d1 <= 1e-4 && d2 <= 5e-3 && secs <= 300.0;
    report(10, "Fock oracle equivalence (N_c = 6)", ok,
           "steady state = " + num(ss) + " (5e-5), spectrum distance = " + num(spec) + " (1e-6), g1 = " + num(d1) +
               " (1e-4), g2 = " + num(d2) + " (5e-3), " + num(secs) + " s");
}

// 11. Sensitivity exponents
void sensitivity() {
    const RVector eps = log_grid(1e-6, 1e-2, 17);
    const auto n = splitting_exponent(fig1_preset(), "gamma12", eps, GeneratorKind::Nhh);
    const auto m = splitting_exponent(fig1_preset(), "gamma12", eps, GeneratorKind::Moments, -1.0);
    bool one_real = m.fitted;
    for (std::size_t i = 0; i < m.chain_real_count.size(); ++i)
        one_real = one_real && m.chain_real_count[i] == 1 && m.median_real[i];
    const bool ok = n.fitted && m.fitted && n.p >= 1.9 && n.p <= 2.1 && m.p >= 1.9 && m.p <= 2.1 && n.log_rms < 0.02 &&
                    m.log_rms < 0.02 && one_real;
    report(11, "sensitivity exponents", ok,
           "p_NHH = " + num(n.p) + ", p_M = " + num(m.p) + " (gamma12 - eps), log rms " + num(n.log_rms) + " / " +
               num(m.log_rms) + ", one real chain branch at every eps: " + (one_real ? "yes" : "no"));
}

// 12. Determinism
void determinism() {
    const std::vector<std::string> runs = {
        "validate",
        "nhh-spectrum",
        "sweep --param gamma12 --from 0 --to 2 --steps 201 --generator nhh",
        "sweep --param gamma12 --from 0 --to 2 --steps 41 --generator moments",
        "ep-find",
        "correlations",
        "spectra --omega-steps 61",
        "oracle-check --n-th 0.2 --cutoff 4",
        "sensitivity --generator moments --direction -1",
        "symmetry"};
    int files = 0, mismatched = 0, bad_rc = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const fs::path a = kWork / ("det" + std::to_string(i) + "_a"), b = kWork / ("det" + std::to_string(i) + "_b");
        if (lepx(runs[i] + " --preset fig1", a) != 0 || lepx(runs[i] + " --preset fig1", b) != 0) {
            ++bad_rc;
            continue;
        }
        for (const auto& e : fs::directory_iterator(a)) {
            ++files;
            if (!fs::exists(b / e.path().filename()) || slurp(e.path()) != slurp(b / e.path().filename())) ++mismatched;
        }
    }
    report(12, "determinism", bad_rc == 0 && mismatched == 0 && files > 0,
           std::to_string(runs.size()) + " verb runs, " + std::to_string(files) + " files compared, " +
               std::to_string(mismatched) + " differ, " + std::to_string(bad_rc) + " failed");
}

}  // namespace

int main() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
    const std::vector<void (*)()> criteria = {ep_locus, branch_shapes, g1_agreement, power_spectra,
                                              plateau,  cubic,         moment_matrices, lep_multiplicity,
                                              symmetries, oracle,      sensitivity,  determinism};
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        try {
            criteria[i]();
        } catch (const std::exception& e) {
            report(static_cast<int>(i + 1), "exception", false, e.what());
        }
    }
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
