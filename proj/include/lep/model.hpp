#pragma once

// N-mode dissipative linear bosonic systems: definition, validation, and the
// JSON config format.

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lep/types.hpp"

namespace lep {

inline constexpr double kHermitianRelTol = 1e-12;
inline constexpr double kPsdRelTol = 1e-10;

struct ModelSpec {
    int n_modes = 0;
    RVector omega;   // bare mode frequencies
    CMatrix chi;     // coherent couplings, Hermitian, zero diagonal
    CMatrix gamma;   // damping matrix, Hermitian PSD
    double n_th = 0.0;

    bool operator==(const ModelSpec& o) const {
        return n_modes == o.n_modes && omega.size() == o.omega.size() && omega == o.omega &&
               chi.rows() == o.chi.rows() && chi.cols() == o.chi.cols() && chi == o.chi &&
               gamma.rows() == o.gamma.rows() && gamma.cols() == o.gamma.cols() && gamma == o.gamma &&
               n_th == o.n_th;
    }
};

/// A model that passed every invariant, annotated with the jump-rate spectrum of gamma.
struct ValidatedModel {
    ModelSpec spec;
    RVector gamma_rates;    // ascending eigenvalues of gamma
    CMatrix gamma_vectors;  // matching orthonormal eigenvectors

    int n() const { return spec.n_modes; }
    bool operator==(const ValidatedModel& o) const { return spec == o.spec; }
};

namespace detail {

inline std::string fmt(double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

inline double hermitian_defect(const CMatrix& m) {
    return m.size() == 0 ? 0.0 : (m - m.adjoint()).cwiseAbs().maxCoeff();
}

inline void check_hermitian(const CMatrix& m, const std::string& name, std::vector<std::string>& out) {
    const double scale = std::max(1.0, max_abs(m));
    for (Eigen::Index j = 0; j < m.rows(); ++j)
        for (Eigen::Index k = j; k < m.cols(); ++k) {
            const double dev = std::abs(m(j, k) - std::conj(m(k, j)));
            if (dev > kHermitianRelTol * scale) {
                out.push_back(name + "[" + std::to_string(j) + "][" + std::to_string(k) +
                              "]: not Hermitian, |" + name + "_jk - conj(" + name + "_kj)| = " + fmt(dev));
            }
        }
}

}  // namespace detail

/// Every violated invariant of `spec`; empty when the spec is valid.
inline std::vector<std::string> check(const ModelSpec& spec) {
    std::vector<std::string> errs;
    const int n = spec.n_modes;
    if (n < 1) {
        errs.emplace_back("n_modes must be >= 1");
        return errs;
    }
    if (spec.omega.size() != n)
        errs.push_back("omega: length " + std::to_string(spec.omega.size()) + " does not match n_modes " +
                       std::to_string(n));
    if (spec.chi.rows() != n || spec.chi.cols() != n)
        errs.push_back("chi: dimension " + std::to_string(spec.chi.rows()) + "x" + std::to_string(spec.chi.cols()) +
                       " does not match n_modes " + std::to_string(n));
    if (spec.gamma.rows() != n || spec.gamma.cols() != n)
        errs.push_back("gamma: dimension " + std::to_string(spec.gamma.rows()) + "x" +
                       std::to_string(spec.gamma.cols()) + " does not match n_modes " + std::to_string(n));
    if (!errs.empty()) return errs;

    if (!spec.omega.allFinite()) errs.emplace_back("omega: non-finite entry");
    if (!spec.chi.allFinite()) errs.emplace_back("chi: non-finite entry");
    if (!spec.gamma.allFinite()) errs.emplace_back("gamma: non-finite entry");
    if (!std::isfinite(spec.n_th) || spec.n_th < 0.0) errs.push_back("n_th: must be >= 0, got " + detail::fmt(spec.n_th));
    if (!errs.empty()) return errs;

    detail::check_hermitian(spec.chi, "chi", errs);
    for (int k = 0; k < n; ++k)
        if (spec.chi(k, k) != cplx(0.0))
            errs.push_back("chi[" + std::to_string(k) + "][" + std::to_string(k) + "]: diagonal must be zero, got |" +
                           detail::fmt(std::abs(spec.chi(k, k))) + "|");
    const std::size_t before = errs.size();
    detail::check_hermitian(spec.gamma, "gamma", errs);
    if (errs.size() == before) {
        const CMatrix herm = 0.5 * (spec.gamma + spec.gamma.adjoint());
        Eigen::SelfAdjointEigenSolver<CMatrix> es(herm);
        const double lo = es.eigenvalues()(0);
        const double nrm = es.eigenvalues().cwiseAbs().maxCoeff();
        if (lo < -kPsdRelTol * nrm)
            errs.push_back("gamma: not positive semidefinite, smallest eigenvalue " + detail::fmt(lo));
    }
    return errs;
}

/// Validates `spec`, throwing ValidationError with the full list of violations.
inline ValidatedModel validate(const ModelSpec& spec) {
    auto errs = check(spec);
    if (!errs.empty()) throw ValidationError("invalid model: " + errs.front(), errs);
    ValidatedModel v;
    v.spec = spec;
    Eigen::SelfAdjointEigenSolver<CMatrix> es(CMatrix(0.5 * (spec.gamma + spec.gamma.adjoint())));
    v.gamma_rates = es.eigenvalues();
    v.gamma_vectors = es.eigenvectors();
    return v;
}

/// Two modes with symmetric incoherent coupling: gamma = [[g, g12], [g12, g]], chi = 0.
inline ModelSpec make_bimodal(double omega1, double omega2, double gamma_loss, double gamma12, double n_th) {
    if (!(gamma_loss > 0.0))
        throw ValidationError("bimodal: gamma must be > 0", {"bimodal.gamma: must be > 0, got " + detail::fmt(gamma_loss)});
    if (std::abs(gamma12) > gamma_loss)
        throw ValidationError("bimodal: damping matrix not PSD",
                              {"bimodal.gamma12: |gamma12| = " + detail::fmt(std::abs(gamma12)) +
                               " exceeds gamma = " + detail::fmt(gamma_loss) + "; damping matrix not PSD"});
    ModelSpec s;
    s.n_modes = 2;
    s.omega = RVector(2);
    s.omega << omega1, omega2;
    s.chi = CMatrix::Zero(2, 2);
    s.gamma = CMatrix(2, 2);
    s.gamma << gamma_loss, gamma12, gamma12, gamma_loss;
    s.n_th = n_th;
    return s;
}

/// Parameters of the two-mode example used throughout the tests and the CLI preset.
struct BimodalParams {
    double omega1 = -0.5;
    double omega2 = 0.5;
    double gamma = 3.0;
    double gamma12 = 1.0;
    double n_th = 0.0;

    double delta() const { return omega1 - omega2; }
    double omega_bar() const { return 0.5 * (omega1 + omega2); }
    ModelSpec spec() const { return make_bimodal(omega1, omega2, gamma, gamma12, n_th); }
    ValidatedModel model() const { return validate(spec()); }
};

inline BimodalParams fig1_preset() { return {}; }

/// Recovers the two-mode parameters when `s` has the make_bimodal structure.
inline std::optional<BimodalParams> bimodal_params(const ModelSpec& s) {
    if (s.n_modes != 2 || s.chi.cwiseAbs().maxCoeff() != 0.0) return std::nullopt;
    const CMatrix& g = s.gamma;
    if (g.imag().cwiseAbs().maxCoeff() != 0.0 || g(0, 0) != g(1, 1) || g(0, 1) != g(1, 0)) return std::nullopt;
    BimodalParams p;
    p.omega1 = s.omega(0);
    p.omega2 = s.omega(1);
    p.gamma = g(0, 0).real();
    p.gamma12 = g(0, 1).real();
    p.n_th = s.n_th;
    return p;
}

// ---- config documents ----

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& obj, const std::string& path, std::initializer_list<const char*> allowed,
                           std::vector<std::string>& errs) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || it.key() == a;
        if (!ok) errs.push_back(path + "/" + it.key() + ": unknown key");
    }
}

inline bool read_number(const json& j, const std::string& path, double& out, std::vector<std::string>& errs) {
    if (!j.is_number()) {
        errs.push_back(path + ": expected a number");
        return false;
    }
    out = j.get<double>();
    return true;
}

inline bool read_entry(const json& j, const std::string& path, cplx& out, std::vector<std::string>& errs) {
    if (j.is_number()) {
        out = cplx(j.get<double>(), 0.0);
        return true;
    }
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) {
        out = cplx(j[0].get<double>(), j[1].get<double>());
        return true;
    }
    errs.push_back(path + ": expected a number or a [re, im] pair");
    return false;
}

inline bool read_matrix(const json& j, const std::string& path, CMatrix& out, std::vector<std::string>& errs) {
    if (!j.is_array()) {
        errs.push_back(path + ": expected an array of rows");
        return false;
    }
    const auto rows = static_cast<Eigen::Index>(j.size());
    Eigen::Index cols = rows == 0 ? 0 : -1;
    for (std::size_t r = 0; r < j.size(); ++r) {
        if (!j[r].is_array()) {
            errs.push_back(path + "/" + std::to_string(r) + ": expected a row array");
            return false;
        }
        if (cols < 0) cols = static_cast<Eigen::Index>(j[r].size());
        if (static_cast<Eigen::Index>(j[r].size()) != cols) {
            errs.push_back(path + "/" + std::to_string(r) + ": ragged row");
            return false;
        }
    }
    out = CMatrix::Zero(rows, cols);
    bool ok = true;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c)
            ok = read_entry(j[r][c], path + "/" + std::to_string(r) + "/" + std::to_string(c), out(r, c), errs) && ok;
    return ok;
}

inline json entry_json(cplx z) { return json::array({z.real(), z.imag()}); }

inline json matrix_json(const CMatrix& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(entry_json(m(r, c)));
        rows.push_back(row);
    }
    return rows;
}

}  // namespace detail

/// Parses a config document into a ModelSpec (unvalidated).
/// Schema errors carry the JSON-pointer path of the offending element.
inline ModelSpec parse_config(const std::string& text) {
    using nlohmann::json;
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError("config: malformed JSON", {std::string("config: ") + e.what()});
    }
    std::vector<std::string> errs;
    if (!doc.is_object()) throw ValidationError("config: top level must be an object", {"/: expected an object"});

    if (doc.contains("bimodal")) {
        detail::reject_unknown(doc, "", {"bimodal"}, errs);
        const json& b = doc["bimodal"];
        if (!b.is_object()) {
            errs.emplace_back("/bimodal: expected an object");
            throw ValidationError("config: " + errs.front(), errs);
        }
        detail::reject_unknown(b, "/bimodal", {"omega1", "omega2", "gamma", "gamma12", "n_th"}, errs);
        double vals[5] = {0, 0, 0, 0, 0};
        const char* keys[5] = {"omega1", "omega2", "gamma", "gamma12", "n_th"};
        for (int i = 0; i < 5; ++i) {
            if (!b.contains(keys[i])) {
                if (i == 4) continue;  // n_th defaults to zero
                errs.push_back(std::string("/bimodal/") + keys[i] + ": missing");
                continue;
            }
            detail::read_number(b[keys[i]], std::string("/bimodal/") + keys[i], vals[i], errs);
        }
        if (!errs.empty()) throw ValidationError("config: " + errs.front(), errs);
        return make_bimodal(vals[0], vals[1], vals[2], vals[3], vals[4]);
    }

    detail::reject_unknown(doc, "", {"modes", "chi", "gamma", "n_th"}, errs);
    ModelSpec s;
    if (!doc.contains("modes") || !doc["modes"].is_array()) {
        errs.emplace_back("/modes: missing or not an array");
        throw ValidationError("config: " + errs.front(), errs);
    }
    const json& modes = doc["modes"];
    if (modes.empty()) {
        errs.emplace_back("n_modes must be >= 1");
        throw ValidationError("config: n_modes must be >= 1", errs);
    }
    s.n_modes = static_cast<int>(modes.size());
    s.omega = RVector::Zero(s.n_modes);
    for (std::size_t i = 0; i < modes.size(); ++i) {
        const std::string p = "/modes/" + std::to_string(i);
        if (!modes[i].is_object()) {
            errs.push_back(p + ": expected an object");
            continue;
        }
        detail::reject_unknown(modes[i], p, {"omega"}, errs);
        if (!modes[i].contains("omega")) {
            errs.push_back(p + "/omega: missing");
            continue;
        }
        detail::read_number(modes[i]["omega"], p + "/omega", s.omega(static_cast<Eigen::Index>(i)), errs);
    }
    if (doc.contains("chi"))
        detail::read_matrix(doc["chi"], "/chi", s.chi, errs);
    else
        s.chi = CMatrix::Zero(s.n_modes, s.n_modes);
    if (doc.contains("gamma"))
        detail::read_matrix(doc["gamma"], "/gamma", s.gamma, errs);
    else
        errs.emplace_back("/gamma: missing");
    if (doc.contains("n_th")) detail::read_number(doc["n_th"], "/n_th", s.n_th, errs);
    if (!errs.empty()) throw ValidationError("config: " + errs.front(), errs);

    const int n = s.n_modes;
    if (s.chi.rows() != n || s.chi.cols() != n)
        errs.push_back("/chi: dimension mismatch, " + std::to_string(s.chi.rows()) + "x" +
                       std::to_string(s.chi.cols()) + " for " + std::to_string(n) + " modes");
    if (s.gamma.rows() != n || s.gamma.cols() != n)
        errs.push_back("/gamma: dimension mismatch, " + std::to_string(s.gamma.rows()) + "x" +
                       std::to_string(s.gamma.cols()) + " for " + std::to_string(n) + " modes");
    if (!errs.empty()) throw ValidationError("config: " + errs.front(), errs);
    return s;
}

/// Full-form config document; complex entries are written as [re, im] so
/// that parse_config(serialize(s)) == s bit for bit.
inline std::string serialize(const ModelSpec& s) {
    using nlohmann::json;
    json doc;
    json modes = json::array();
    for (Eigen::Index i = 0; i < s.omega.size(); ++i) modes.push_back({{"omega", s.omega(i)}});
    doc["modes"] = modes;
    doc["chi"] = detail::matrix_json(s.chi);
    doc["gamma"] = detail::matrix_json(s.gamma);
    doc["n_th"] = s.n_th;
    return doc.dump(2);
}

inline ValidatedModel load_model(const std::string& text) { return validate(parse_config(text)); }

}  // namespace lep
