#pragma once

// CSV and JSON artifacts. Numbers are written with 17 significant digits and
// files are replaced atomically, so identical inputs give identical bytes.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "lep/correlations.hpp"
#include "lep/moments.hpp"
#include "lep/sensitivity.hpp"
#include "lep/spectra.hpp"

namespace lep {

/// Output file could not be written.
class IoError : public Error {
public:
    using Error::Error;
};

inline std::string format_number(double x) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 17);
    return std::string(buf, r.ptr);
}

/// Rows of already formatted cells under a fixed header.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    CsvTable& row() {
        rows_.emplace_back();
        return *this;
    }
    CsvTable& add(double x) { return add(format_number(x)); }
    CsvTable& add(int x) { return add(std::to_string(x)); }
    CsvTable& add(const std::string& s) {
        if (rows_.empty()) rows_.emplace_back();
        rows_.back().push_back(s);
        return *this;
    }
    CsvTable& add(const char* s) { return add(std::string(s)); }

    std::string str() const {
        std::string out = join(header_);
        for (const auto& r : rows_) {
            if (r.size() != header_.size()) throw Error("csv: row width does not match the header");
            out += join(r);
        }
        return out;
    }

    std::size_t size() const { return rows_.size(); }

private:
    static std::string join(const std::vector<std::string>& cells) {
        std::string line;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) line += ',';
            line += cells[i];
        }
        return line + '\n';
    }

    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

/// Writes to a sibling temp file, then renames over the target.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot open " + tmp.string() + " for writing");
        f.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!f) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
    write_atomic(path, doc.dump(2) + "\n");
}

// ---- payload schemas ----

/// tau,re,im and, for even orders, value.
inline CsvTable to_csv(const CorrelationSeries& s) {
    const bool real = s.order > 1;
    CsvTable t(real ? std::vector<std::string>{"tau", "re", "im", "value"} : std::vector<std::string>{"tau", "re", "im"});
    for (Eigen::Index i = 0; i < s.tau.size(); ++i) {
        t.row().add(s.tau(i)).add(s.values(i).real()).add(s.values(i).imag());
        if (real) t.add(s.values(i).real());
    }
    return t;
}

inline CsvTable to_csv(const SpectrumSeries& s) {
    CsvTable t({"omega", "value", "kind", "convention"});
    for (Eigen::Index i = 0; i < s.omega.size(); ++i)
        t.row().add(s.omega(i)).add(s.values(i)).add(to_string(s.kind)).add(to_string(s.convention));
    return t;
}

inline CsvTable to_csv(const std::vector<MultiplicityReport>& reps) {
    CsvTable t({"lambda_re", "lambda_im", "alg", "geo", "lep_order"});
    for (const auto& r : reps)
        t.row().add(r.lambda.real()).add(r.lambda.imag()).add(r.algebraic).add(r.geometric).add(r.lep_order);
    return t;
}

/// One row per grid point and branch.
inline CsvTable to_csv(const Trajectories& tr, const std::string& param) {
    CsvTable t({param, "branch", "re", "im", "ambiguous"});
    for (Eigen::Index i = 0; i < tr.grid.size(); ++i)
        for (Eigen::Index b = 0; b < tr.branches.cols(); ++b)
            t.row()
                .add(tr.grid(i))
                .add(static_cast<int>(b))
                .add(tr.branches(i, b).real())
                .add(tr.branches(i, b).imag())
                .add(tr.ambiguous[static_cast<std::size_t>(i)] ? 1 : 0);
    return t;
}

/// epsilon, split, branch_real_flags (one R or C per cluster eigenvalue, ordered by Im).
inline CsvTable to_csv(const SplittingFit& f) {
    CsvTable t({"epsilon", "split", "center_distance", "real_count", "chain_real_count", "branch_real_flags"});
    for (Eigen::Index i = 0; i < f.epsilons.size(); ++i) {
        const auto k = static_cast<std::size_t>(i);
        t.row()
            .add(f.epsilons(i))
            .add(f.splitting(i))
            .add(f.center_distance(i))
            .add(f.real_count[k])
            .add(f.chain_real_count[k])
            .add(f.branch_real_flags[k]);
    }
    return t;
}

inline nlohmann::json to_json(const SplittingFit& f) {
    nlohmann::json j;
    j["parameter"] = f.parameter;
    j["generator"] = to_string(f.generator);
    j["direction"] = f.direction;
    j["base_center"] = {f.base_center.real(), f.base_center.imag()};
    j["cluster_size"] = f.cluster_size;
    j["largest_block"] = f.largest_block;
    j["fitted"] = f.fitted;
    j["slope"] = f.slope;
    j["slope_ci95"] = f.slope_ci;
    j["p"] = f.p;
    j["p_ci95"] = {f.p_lo, f.p_hi};
    j["log_rms"] = f.log_rms;
    j["real_tol"] = f.real_tol;
    j["median_real_everywhere"] = std::all_of(f.median_real.begin(), f.median_real.end(), [](bool b) { return b; });
    j["note"] = f.note;
    return j;
}

inline nlohmann::json to_json(const LineshapeReport& r) {
    nlohmann::json j;
    j["classification"] = to_string(r.classification);
    j["peak_omega"] = r.peak_omega;
    j["peak_curvature"] = r.peak_curvature;
    j["reconstruction_rms"] = r.reconstruction_rms;
    auto comps = nlohmann::json::array();
    for (const auto& c : r.components)
        comps.push_back({{"center", c.center}, {"width", c.width}, {"degree", c.degree}, {"weight", c.weight}});
    j["components"] = comps;
    auto fits = nlohmann::json::array();
    for (const auto& f : r.fits)
        fits.push_back({{"model", f.model}, {"rms", f.rms}, {"n_params", f.n_params}, {"converged", f.converged}});
    j["fits"] = fits;
    return j;
}

}  // namespace lep
