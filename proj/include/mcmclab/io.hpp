#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lyapunov.hpp"
#include "markov_core.hpp"
#include "sampler.hpp"
#include "spectral.hpp"

namespace mcmclab {

using Json = nlohmann::ordered_json;

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline double parse_double(std::string_view tok, std::size_t line) {
    tok = trim(tok);
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    double v = 0.0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || res.ec != std::errc() || res.ptr != tok.data() + tok.size())
        fail(Errc::ParseError, "line " + std::to_string(line) + ": cannot parse '" + std::string(tok) + "'", line);
    return v;
}

} // namespace detail

// n lines of n comma-separated decimals; blank lines and lines starting with # are skipped.
inline Matrix parse_matrix_csv(std::string_view text) {
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const std::string_view line = detail::trim(text.substr(pos, nl == std::string_view::npos ? nl : nl - pos));
        ++line_no;
        if (!line.empty() && line.front() != '#') {
            std::vector<double> row;
            std::size_t p = 0;
            while (true) {
                const auto comma = line.find(',', p);
                row.push_back(detail::parse_double(line.substr(p, comma == std::string_view::npos ? comma : comma - p),
                                                   line_no));
                if (comma == std::string_view::npos) break;
                p = comma + 1;
            }
            rows.push_back(std::move(row));
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    if (rows.empty()) fail(Errc::ParseError, "no matrix rows found");
    const auto n = static_cast<Eigen::Index>(rows.size());
    Matrix m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != n)
            fail(Errc::DimensionMismatch, "row " + std::to_string(i) + " does not have " + std::to_string(n) + " entries",
                 static_cast<std::size_t>(i));
        for (Eigen::Index j = 0; j < n; ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    return m;
}

// {"n": int, "rows": [[...], ...]}
inline Matrix parse_matrix_json(std::string_view text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const std::exception& e) {
        fail(Errc::ParseError, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("rows") || !j["rows"].is_array())
        fail(Errc::ParseError, "expected an object with a \"rows\" array");
    const auto& rows = j["rows"];
    const auto n = static_cast<Eigen::Index>(rows.size());
    if (j.contains("n") && (!j["n"].is_number_integer() || j["n"].get<long>() != n))
        fail(Errc::DimensionMismatch, "\"n\" does not match the number of rows");
    if (n == 0) fail(Errc::ParseError, "no matrix rows found");
    Matrix m(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        if (!r.is_array() || static_cast<Eigen::Index>(r.size()) != n)
            fail(Errc::DimensionMismatch, "row " + std::to_string(i) + " does not have " + std::to_string(n) + " entries",
                 static_cast<std::size_t>(i));
        for (Eigen::Index k = 0; k < n; ++k) {
            if (!r[static_cast<std::size_t>(k)].is_number()) fail(Errc::ParseError, "non-numeric matrix entry");
            m(i, k) = r[static_cast<std::size_t>(k)].get<double>();
        }
    }
    return m;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::ParseError, "cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline Matrix load_matrix(const std::string& path) {
    const std::string text = read_file(path);
    const std::string_view t = detail::trim(text);
    if (!t.empty() && t.front() == '{') return parse_matrix_json(t);
    return parse_matrix_csv(t);
}

inline Json vector_json(const Vector& v) {
    Json a = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

inline Json matrix_json(const Matrix& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(vector_json(m.row(i).transpose()));
    return Json{{"n", m.rows()}, {"rows", rows}};
}

inline Json structure_json(const ChainStructureReport& r) {
    Json j;
    j["classes"] = r.classes;
    j["closed"] = r.closed_flags;
    j["periods"] = r.periods;
    j["irreducible"] = r.irreducible;
    j["aperiodic"] = r.aperiodic;
    j["reversible_alpha"] = r.reversible_vector ? vector_json(*r.reversible_vector) : Json(nullptr);
    return j;
}

inline Json spectral_json(const SpectralReport& s) {
    Json ev = Json::array();
    for (const auto& l : s.eigenvalues) ev.push_back(Json::array({l.real(), l.imag()}));
    Json j;
    j["eigenvalues"] = ev;
    j["rho"] = s.rho;
    j["gap"] = s.gap;
    j["unit_modulus_count"] = s.unit_modulus_count;
    j["pi"] = vector_json(s.pi.weights());
    return j;
}

inline Json certificate_json(const DriftCertificate& drift, const MinorizationCertificate& minor,
                             const ConvergenceCertificate& cert) {
    Json j;
    j["c"] = drift.c;
    j["d"] = drift.d;
    j["R"] = minor.R;
    j["K_indices"] = minor.K;
    j["alpha"] = minor.alpha;
    j["nu"] = vector_json(minor.nu);
    j["alpha0"] = cert.alpha0;
    j["gamma0"] = cert.gamma0;
    j["beta"] = cert.beta;
    j["gamma_bar"] = cert.gamma_bar;
    j["M_bound"] = cert.M_bound;
    return j;
}

inline Json estimator_json(const EstimatorReport& r) {
    Json j;
    j["n"] = r.n;
    j["mean"] = r.mean;
    j["var_est"] = r.variance_estimate;
    j["var_bound"] = r.variance_bound ? Json(*r.variance_bound) : Json(nullptr);
    j["ci"] = r.ci_halfwidth;
    j["n_required"] = r.planner.n_required;
    return j;
}

// [{"type":"affine","a":[...],"b":r}, {"type":"ball","center":[...],"radius":r}]
inline std::vector<Inequality> inequalities_from_json(const Json& j, std::size_t dim) {
    if (!j.is_array()) fail(Errc::ParseError, "inequalities must be a JSON array");
    std::vector<Inequality> out;
    auto vec = [&](const Json& a, const char* what) {
        if (!a.is_array() || a.size() != dim)
            fail(Errc::DimensionMismatch, std::string(what) + " must have " + std::to_string(dim) + " entries");
        Vector v(static_cast<Eigen::Index>(dim));
        for (std::size_t i = 0; i < dim; ++i) v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
        return v;
    };
    for (const auto& item : j) {
        const std::string type = item.value("type", "");
        if (type == "affine") {
            out.push_back(affine_inequality(vec(item.at("a"), "a"), item.at("b").get<double>()));
        } else if (type == "ball") {
            out.push_back(ball_inequality(vec(item.at("center"), "center"), item.at("radius").get<double>()));
        } else {
            fail(Errc::ParseError, "unknown inequality type '" + type + "'");
        }
    }
    return out;
}

} // namespace mcmclab
