#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "core.hpp"
#include "errors.hpp"

namespace fuchs {

using Json = nlohmann::json;

/// FNV-1a 64-bit digest, used to fingerprint inputs in result documents.
inline std::string fnv1a_digest(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string("fnv1a64:") + buf;
}

inline Json complex_to_json(Complex z) { return Json::array({z.real(), z.imag()}); }

inline Json matrix_to_json(const ComplexMatrix& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(complex_to_json(m(i, j)));
        rows.push_back(std::move(row));
    }
    return rows;
}

/// Serialized form of a system plus (optionally) explicit tolerances. Keys
/// are emitted in sorted order, so serialization is byte-deterministic.
inline Json system_to_json(const FuchsianSystem& sys, const Tolerances* tol = nullptr) {
    Json doc;
    doc["k"] = sys.dimension();
    Json poles = Json::array();
    for (Complex t : sys.poles) poles.push_back(complex_to_json(t));
    doc["poles"] = std::move(poles);
    Json residues = Json::array();
    for (const auto& q : sys.residues) residues.push_back(matrix_to_json(q));
    doc["residues"] = std::move(residues);
    if (tol) {
        doc["tolerances"] = Json{{"regularity_tol", tol->regularity_tol},
                                 {"ode_rel_tol", tol->ode_rel_tol},
                                 {"ode_abs_tol", tol->ode_abs_tol},
                                 {"integer_tol", tol->integer_tol},
                                 {"monodromy_tol", tol->monodromy_tol}};
    }
    return doc;
}

inline std::string serialize_system(const FuchsianSystem& sys, const Tolerances* tol = nullptr) {
    return system_to_json(sys, tol).dump(2) + "\n";
}

struct ParsedSystemFile {
    FuchsianSystem system;
    Tolerances tolerances; // defaults where the file is silent
    bool had_tolerances = false;
};

namespace detail {

inline std::pair<int, int> line_column(std::string_view text, std::size_t byte) {
    int line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

inline Complex complex_from_json(const Json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
        raise(Errc::parse_error, where + " must be a [re, im] pair of numbers");
    return Complex(v[0].get<double>(), v[1].get<double>());
}

inline ComplexMatrix matrix_from_json(const Json& v, int k, const std::string& where) {
    if (!v.is_array() || static_cast<int>(v.size()) != k)
        raise(Errc::parse_error, where + " must be an array of " + std::to_string(k) + " rows");
    ComplexMatrix m(k, k);
    for (int i = 0; i < k; ++i) {
        const Json& row = v[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<int>(row.size()) != k)
            raise(Errc::parse_error, where + " row " + std::to_string(i + 1) + " must have " +
                                         std::to_string(k) + " entries");
        for (int j = 0; j < k; ++j)
            m(i, j) = complex_from_json(row[static_cast<std::size_t>(j)],
                                        where + " entry (" + std::to_string(i + 1) + "," +
                                            std::to_string(j + 1) + ")");
    }
    return m;
}

} // namespace detail

/// Parse a system file without judging the system's mathematical validity
/// (shape and syntax only). Raises parse_error with line/column for syntax
/// problems.
inline ParsedSystemFile parse_system_file_lenient(const std::string& text) {
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
        const auto [line, col] = detail::line_column(text, e.byte > 0 ? e.byte - 1 : 0);
        raise(Errc::parse_error, "line " + std::to_string(line) + ", column " +
                                     std::to_string(col) + ": " + e.what());
    }
    if (!doc.is_object()) raise(Errc::parse_error, "top level must be an object");
    for (const auto& [key, _] : doc.items())
        if (key != "k" && key != "poles" && key != "residues" && key != "tolerances")
            raise(Errc::parse_error, "unknown key \"" + key + "\"");
    if (!doc.contains("k") || !doc["k"].is_number_integer())
        raise(Errc::parse_error, "\"k\" must be an integer");
    const int k = doc["k"].get<int>();
    if (k < 1 || k > 16) raise(Errc::parse_error, "\"k\" must be between 1 and 16");
    if (!doc.contains("poles") || !doc["poles"].is_array() || doc["poles"].empty())
        raise(Errc::parse_error, "\"poles\" must be a nonempty array");
    if (!doc.contains("residues") || !doc["residues"].is_array())
        raise(Errc::parse_error, "\"residues\" must be an array");
    if (doc["residues"].size() != doc["poles"].size())
        raise(Errc::parse_error, "\"residues\" must have one matrix per pole");

    ParsedSystemFile out;
    for (std::size_t j = 0; j < doc["poles"].size(); ++j)
        out.system.poles.push_back(detail::complex_from_json(
            doc["poles"][j], "poles[" + std::to_string(j + 1) + "]"));
    for (std::size_t j = 0; j < doc["residues"].size(); ++j)
        out.system.residues.push_back(detail::matrix_from_json(
            doc["residues"][j], k, "residues[" + std::to_string(j + 1) + "]"));

    if (doc.contains("tolerances")) {
        const Json& t = doc["tolerances"];
        if (!t.is_object()) raise(Errc::parse_error, "\"tolerances\" must be an object");
        out.had_tolerances = true;
        auto grab = [&](const char* name, double& slot) {
            if (!t.contains(name)) return;
            if (!t[name].is_number())
                raise(Errc::parse_error, std::string("tolerances.") + name + " must be a number");
            slot = t[name].get<double>();
        };
        grab("regularity_tol", out.tolerances.regularity_tol);
        grab("ode_rel_tol", out.tolerances.ode_rel_tol);
        grab("ode_abs_tol", out.tolerances.ode_abs_tol);
        grab("integer_tol", out.tolerances.integer_tol);
        grab("monodromy_tol", out.tolerances.monodromy_tol);
        for (const auto& [key, _] : t.items())
            if (key != "regularity_tol" && key != "ode_rel_tol" && key != "ode_abs_tol" &&
                key != "integer_tol" && key != "monodromy_tol")
                raise(Errc::parse_error, "unknown tolerance \"" + key + "\"");
    }
    return out;
}

/// Parse and validate. Validation failures are raised as invalid_argument
/// with every violated invariant listed.
inline ParsedSystemFile parse_system_file(const std::string& text) {
    ParsedSystemFile out = parse_system_file_lenient(text);
    const ValidationReport rep = validate_system(out.system, out.tolerances);
    if (!rep.ok()) {
        std::string msg = "system file violates invariants:";
        for (const auto& v : rep.violations) msg += " [" + v.invariant + "] " + v.detail + ";";
        raise(Errc::invalid_argument, msg);
    }
    return out;
}

} // namespace fuchs
