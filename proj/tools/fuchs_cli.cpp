// Command-line front end. Subcommands wrap the library one-to-one and emit
// deterministic JSON result documents (sorted keys, no timestamps), so a
// repeated invocation with identical inputs produces byte-identical output.
//
// Exit codes: 0 success, 1 domain error (reported as a structured error
// object inside the document), 2 usage error (reported on stderr).

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <fuchs/fuchs.hpp>

namespace {

using fuchs::Complex;
using fuchs::Json;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fuchs::raise(fuchs::Errc::invalid_argument, "cannot read file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Accept the unicode minus sign in flag values (easy to pick up when
// copy-pasting from typeset text) by mapping it to '-'.
std::string normalize_minus(std::string s) {
    static const std::string uminus = "\xe2\x88\x92";
    std::size_t pos = 0;
    while ((pos = s.find(uminus, pos)) != std::string::npos) s.replace(pos, uminus.size(), "-");
    return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            parts.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur.push_back(c);
        }
    }
    parts.push_back(cur);
    return parts;
}

double parse_double(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw UsageError(what + ": cannot parse number \"" + s + "\"");
    }
}

// "re" or "re,im"
Complex parse_complex(const std::string& raw, const std::string& what) {
    const auto parts = split(normalize_minus(raw), ',');
    if (parts.size() == 1) return Complex(parse_double(parts[0], what), 0.0);
    if (parts.size() == 2)
        return Complex(parse_double(parts[0], what), parse_double(parts[1], what));
    throw UsageError(what + ": expected \"re\" or \"re,im\", got \"" + raw + "\"");
}

// "re,im;re,im;..."
std::vector<Complex> parse_vertex_list(const std::string& raw, const std::string& what) {
    std::vector<Complex> out;
    for (const auto& part : split(raw, ';'))
        if (!part.empty()) out.push_back(parse_complex(part, what));
    if (out.empty()) throw UsageError(what + ": empty vertex list");
    return out;
}

// "1,-2,1": signed 1-based pole indices, sign = loop direction
fuchs::LoopWord parse_word(const std::string& raw) {
    fuchs::LoopWord word;
    for (const auto& part : split(normalize_minus(raw), ',')) {
        if (part.empty()) continue;
        int v = 0;
        try {
            std::size_t used = 0;
            v = std::stoi(part, &used);
            if (used != part.size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw UsageError("--word: cannot parse index \"" + part + "\"");
        }
        if (v == 0) throw UsageError("--word: index 0 is not a pole (indices are 1-based)");
        word.push_back({std::abs(v), v > 0 ? +1 : -1});
    }
    if (word.empty()) throw UsageError("--word: empty word");
    return word;
}

std::vector<int> parse_index_list(const std::string& raw) {
    std::vector<int> out;
    for (const auto& part : split(normalize_minus(raw), ',')) {
        if (part.empty()) continue;
        try {
            out.push_back(std::stoi(part));
        } catch (const std::exception&) {
            throw UsageError("--moving: cannot parse index \"" + part + "\"");
        }
    }
    if (out.empty()) throw UsageError("--moving: empty index list");
    return out;
}

Json make_doc(const std::string& command, const std::string& digest) {
    Json doc;
    doc["command"] = command;
    doc["errors"] = Json::array();
    doc["input_digest"] = digest;
    doc["matrices"] = Json::object();
    doc["scalars"] = Json::object();
    doc["version"] = fuchs::version_string;
    return doc;
}

void emit(const Json& doc, const std::string& output_path) {
    const std::string text = doc.dump(2) + "\n";
    if (output_path.empty()) {
        std::cout << text;
    } else {
        std::ofstream out(output_path, std::ios::binary);
        if (!out) fuchs::raise(fuchs::Errc::invalid_argument, "cannot write file: " + output_path);
        out << text;
    }
}

std::string matrix_key(const char* stem, int index_1based) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%02d", stem, index_1based);
    return buf;
}

struct CommonFlags {
    std::string output;
    double tol_rel = 0.0; // 0 = library default
    double tol_abs = 0.0;
    double clearance = 0.0;
    std::string base_point;

    void attach(CLI::App* sub, bool with_geometry) {
        sub->add_option("--output", output, "write the result document to this file (default: stdout)");
        sub->add_option("--tol-rel", tol_rel, "relative integration tolerance (default 1e-11)");
        sub->add_option("--tol-abs", tol_abs, "absolute integration tolerance (default 1e-13)");
        if (with_geometry) {
            sub->add_option("--clearance", clearance,
                            "loop clearance around poles (default: 0.1 * min pole separation)");
            sub->add_option("--base-point", base_point,
                            "loop base point as \"re,im\" (default: on the positive real axis "
                            "outside all poles)");
        }
    }

    fuchs::Tolerances resolve(const fuchs::Tolerances& from_file) const {
        fuchs::Tolerances tol = from_file;
        if (tol_rel > 0.0) tol.ode_rel_tol = tol_rel;
        if (tol_abs > 0.0) tol.ode_abs_tol = tol_abs;
        return tol;
    }

    Complex base() const {
        if (base_point.empty()) return Complex(0.0);
        return parse_complex(base_point, "--base-point");
    }
};

// Shared plumbing for subcommands that read a system file.
struct LoadedSystem {
    fuchs::FuchsianSystem system;
    fuchs::Tolerances tolerances;
    std::string digest;
};

LoadedSystem load_system(const std::string& path, const CommonFlags& flags, bool validate) {
    const std::string text = read_file(path);
    fuchs::ParsedSystemFile parsed =
        validate ? fuchs::parse_system_file(text) : fuchs::parse_system_file_lenient(text);
    return {std::move(parsed.system), flags.resolve(parsed.tolerances), fuchs::fnv1a_digest(text)};
}

int run_validate(const std::string& path, const CommonFlags& flags) {
    const std::string text = read_file(path);
    const fuchs::ParsedSystemFile parsed = fuchs::parse_system_file_lenient(text);
    const fuchs::ValidationReport rep =
        fuchs::validate_system(parsed.system, flags.resolve(parsed.tolerances));

    Json doc = make_doc("validate", fuchs::fnv1a_digest(text));
    doc["scalars"]["dimension"] = parsed.system.dimension();
    doc["scalars"]["pole_count"] = parsed.system.size();
    doc["scalars"]["violation_count"] = static_cast<int>(rep.violations.size());
    Json violations = Json::array();
    for (const auto& v : rep.violations)
        violations.push_back(
            Json{{"detail", v.detail}, {"invariant", v.invariant}, {"measured", v.measured}});
    doc["violations"] = std::move(violations);
    emit(doc, flags.output);
    return rep.ok() ? 0 : 1;
}

int run_continue(const std::string& path, const std::string& target_raw,
                 const std::string& path_raw, const CommonFlags& flags) {
    const LoadedSystem in = load_system(path, flags, true);
    const Complex target = parse_complex(target_raw, "--target");
    fuchs::PolyPath approach;
    if (!path_raw.empty()) approach = parse_vertex_list(path_raw, "--path");

    const fuchs::ContinuationResult res =
        fuchs::solve_from_infinity(in.system, target, approach, in.tolerances);

    Json doc = make_doc("continue", in.digest);
    doc["matrices"]["value"] = fuchs::matrix_to_json(res.value);
    doc["scalars"]["error_estimate"] = res.error_estimate;
    doc["scalars"]["steps_rejected"] = static_cast<int>(res.steps_rejected);
    doc["scalars"]["steps_taken"] = static_cast<int>(res.steps_taken);
    doc["scalars"]["target"] = fuchs::complex_to_json(target);
    Json winding = Json::array();
    for (double a : res.winding.arg_change) winding.push_back(a);
    doc["winding"] = std::move(winding);
    emit(doc, flags.output);
    return 0;
}

int run_monodromy(const std::string& path, const std::string& word_raw, const CommonFlags& flags) {
    const LoadedSystem in = load_system(path, flags, true);
    const fuchs::LoopWord word = parse_word(word_raw);
    const fuchs::ComplexMatrix m = fuchs::monodromy_matrix(in.system, word, flags.base(),
                                                           flags.clearance, in.tolerances);

    Json doc = make_doc("monodromy", in.digest);
    doc["matrices"]["monodromy"] = fuchs::matrix_to_json(m);
    const int k = in.system.dimension();
    doc["scalars"]["identity_deviation"] =
        (m - fuchs::ComplexMatrix::Identity(k, k)).norm();
    emit(doc, flags.output);
    return 0;
}

int run_rep(const std::string& path, const CommonFlags& flags) {
    const LoadedSystem in = load_system(path, flags, true);
    const fuchs::MonodromyRep rep =
        fuchs::monodromy_representation(in.system, flags.base(), flags.clearance, in.tolerances);

    Json doc = make_doc("rep", in.digest);
    for (std::size_t j = 0; j < rep.generators.size(); ++j)
        doc["matrices"][matrix_key("generator", static_cast<int>(j) + 1)] =
            fuchs::matrix_to_json(rep.generators[j]);
    Json words = Json::array();
    for (const auto& w : rep.generator_words) {
        Json letters = Json::array();
        for (const auto& l : w) letters.push_back(l.exponent * l.pole_index);
        words.push_back(std::move(letters));
    }
    doc["generator_words"] = std::move(words);
    doc["scalars"]["base_point"] = fuchs::complex_to_json(rep.base_point);
    doc["scalars"]["clearance"] = rep.clearance;
    doc["scalars"]["relation_defect"] = rep.relation_defect;
    emit(doc, flags.output);
    return 0;
}

// Build the waypoint sequence for moving one pole through optional
// intermediate stops to a destination.
fuchs::FlowPath build_flow_path(const fuchs::FuchsianSystem& sys, int moving,
                                const std::string& to_raw, const std::string& via_raw,
                                double margin) {
    if (moving < 1 || moving > sys.size())
        throw UsageError("--moving: pole index out of range (1.." + std::to_string(sys.size()) +
                         ")");
    std::vector<Complex> stops;
    if (!via_raw.empty()) stops = parse_vertex_list(via_raw, "--via");
    stops.push_back(parse_complex(to_raw, "--to"));

    std::vector<std::vector<Complex>> waypoints{sys.poles};
    for (Complex stop : stops) {
        std::vector<Complex> next = waypoints.back();
        next[static_cast<std::size_t>(moving - 1)] = stop;
        waypoints.push_back(std::move(next));
    }
    return fuchs::make_flow_path(waypoints, margin);
}

void fill_flow_summary(Json& doc, const fuchs::FlowTrace& trace) {
    const fuchs::SchlesingerState& final_state = trace.samples.back().state;
    Json poles = Json::array();
    for (Complex t : final_state.poles) poles.push_back(fuchs::complex_to_json(t));
    doc["poles_final"] = std::move(poles);
    for (int j = 0; j < final_state.size(); ++j)
        doc["matrices"][matrix_key("residue", j + 1)] =
            fuchs::matrix_to_json(final_state.residues[static_cast<std::size_t>(j)]);
    doc["scalars"]["error_estimate"] = trace.error_estimate;
    doc["scalars"]["first_integral_drift"] = trace.first_integral_drift;
    doc["scalars"]["isospectrality_drift"] = trace.isospectrality_drift;
    doc["scalars"]["sample_count"] = static_cast<int>(trace.samples.size());
    doc["scalars"]["steps_rejected"] = static_cast<int>(trace.steps_rejected);
    doc["scalars"]["steps_taken"] = static_cast<int>(trace.steps_taken);
}

int run_flow(const std::string& path, int moving, const std::string& to_raw,
             const std::string& via_raw, double margin, const CommonFlags& flags) {
    const LoadedSystem in = load_system(path, flags, true);
    const fuchs::FlowPath fpath = build_flow_path(in.system, moving, to_raw, via_raw, margin);
    const fuchs::FlowTrace trace = fuchs::schlesinger_flow(in.system, fpath, in.tolerances);

    Json doc = make_doc("flow", in.digest);
    fill_flow_summary(doc, trace);
    emit(doc, flags.output);
    return 0;
}

int run_invariants(const std::string& path, int moving, const std::string& to_raw,
                   const std::string& via_raw, double margin, double fd_step, int probes,
                   const CommonFlags& flags) {
    const LoadedSystem in = load_system(path, flags, true);
    const fuchs::FlowPath fpath = build_flow_path(in.system, moving, to_raw, via_raw, margin);
    const fuchs::FlowTrace trace = fuchs::schlesinger_flow(in.system, fpath, in.tolerances);

    std::vector<fuchs::LoopWord> words;
    for (int j = 1; j <= in.system.size(); ++j) words.push_back({{j, +1}});
    const double iso = fuchs::isomonodromy_check(trace, words, in.tolerances);
    const fuchs::AuxiliaryResidual aux = fuchs::auxiliary_system_residual(
        trace, fuchs::default_probes(fpath, probes), fd_step, in.tolerances);

    Json doc = make_doc("invariants", in.digest);
    fill_flow_summary(doc, trace);
    doc["scalars"]["aux_residual"] = aux.at_step;
    doc["scalars"]["aux_residual_half_step"] = aux.at_half_step;
    doc["scalars"]["aux_residual_ratio"] =
        aux.at_half_step > 0.0 ? aux.at_step / aux.at_half_step : 0.0;
    doc["scalars"]["fd_step"] = aux.step;
    doc["scalars"]["isomonodromy_deviation"] = iso;
    emit(doc, flags.output);
    return 0;
}

// "1;0,2;3" -> coefficients 1, 2i, 3 for h(t) = 1 + 2i t + 3 t^2
fuchs::ExampleFamily parse_family_coeffs(const std::string& raw) {
    fuchs::ExampleFamily family;
    if (raw.empty()) return family;
    for (const auto& part : split(normalize_minus(raw), ';'))
        if (!part.empty()) family.h.push_back(parse_complex(part, "--h"));
    return family;
}

std::string fmt_17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

int run_residual(const std::string& family_name, const std::string& h_raw,
                 const std::string& at_raw, const std::string& moving_raw, double fd_step,
                 const CommonFlags& flags) {
    if (family_name != "example")
        throw UsageError("--family: only \"example\" is available, got \"" + family_name + "\"");
    const fuchs::ExampleFamily coeffs = parse_family_coeffs(h_raw);
    const Complex t = at_raw.empty() ? Complex(0.0) : parse_complex(at_raw, "--at");
    const std::vector<int> moving =
        moving_raw.empty() ? std::vector<int>{1} : parse_index_list(moving_raw);

    const fuchs::ParameterizedFamily family = fuchs::example_parameterized(coeffs);
    const fuchs::ResidualGrid grid = fuchs::schlesinger_residual(
        family, fuchs::example_poles(t), moving, fd_step, flags.resolve({}));

    // No input file here; fingerprint the canonicalized arguments instead.
    std::string canon = "residual;family=example;h=";
    for (Complex c : coeffs.h) canon += fmt_17(c.real()) + "," + fmt_17(c.imag()) + ";";
    canon += "at=" + fmt_17(t.real()) + "," + fmt_17(t.imag());
    canon += ";fd=" + fmt_17(grid.step);

    Json doc = make_doc("residual", fuchs::fnv1a_digest(canon));
    Json entries = Json::array();
    for (const auto& e : grid.entries)
        entries.push_back(
            Json{{"direction", e.direction}, {"equation", e.equation}, {"norm", e.norm}});
    doc["grid"] = std::move(entries);
    doc["scalars"]["fd_step"] = grid.step;
    doc["scalars"]["max_norm"] = grid.max_norm;
    doc["scalars"]["worst_direction"] = grid.worst_direction;
    doc["scalars"]["worst_equation"] = grid.worst_equation;
    emit(doc, flags.output);
    return 0;
}

int run_example(const std::string& h_raw, const std::string& t_raw, const CommonFlags& flags) {
    const fuchs::ExampleFamily coeffs = parse_family_coeffs(h_raw);
    const Complex t = t_raw.empty() ? Complex(0.0) : parse_complex(t_raw, "--t");
    fuchs::FuchsianSystem sys;
    sys.poles = fuchs::example_poles(t);
    sys.residues = fuchs::example_residues(t, coeffs);
    const std::string text = fuchs::serialize_system(sys);
    if (flags.output.empty()) {
        std::cout << text;
    } else {
        std::ofstream out(flags.output, std::ios::binary);
        if (!out)
            fuchs::raise(fuchs::Errc::invalid_argument, "cannot write file: " + flags.output);
        out << text;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"fuchs: Fuchsian systems, monodromy, and isomonodromic deformation flows"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(fuchs::version_string));
    // Long-form help only: subcommands inherit this, and the -h shorthand
    // would collide with the --h coefficient flag of residual/example.
    app.set_help_flag("--help", "print this help message and exit");

    std::string file, target_raw, path_raw, word_raw, to_raw, via_raw;
    std::string family_name = "example", h_raw, at_raw, moving_raw, t_raw;
    int moving = 1, probes = 2;
    double margin = 0.5, fd_step = 1e-3, residual_fd = 0.0;

    CommonFlags fl_validate, fl_continue, fl_monodromy, fl_rep, fl_flow, fl_invariants,
        fl_residual, fl_example;

    CLI::App* c_validate = app.add_subcommand("validate", "check a system file's invariants");
    c_validate->add_option("file", file, "system file")->required();
    fl_validate.attach(c_validate, false);

    CLI::App* c_continue = app.add_subcommand(
        "continue", "continue the normalized solution from infinity to a target point");
    c_continue->add_option("file", file, "system file")->required();
    c_continue->add_option("--target", target_raw, "target point as \"re,im\"")->required();
    c_continue->add_option("--path", path_raw,
                           "approach vertices \"re,im;re,im;...\" (default: radial)");
    fl_continue.attach(c_continue, false);

    CLI::App* c_monodromy =
        app.add_subcommand("monodromy", "monodromy matrix of a loop word around the poles");
    c_monodromy->add_option("file", file, "system file")->required();
    c_monodromy
        ->add_option("--word", word_raw,
                     "loop word as signed 1-based pole indices, e.g. \"1,-2,1\"")
        ->required();
    fl_monodromy.attach(c_monodromy, true);

    CLI::App* c_rep = app.add_subcommand(
        "rep", "full monodromy representation on canonical generators");
    c_rep->add_option("file", file, "system file")->required();
    fl_rep.attach(c_rep, true);

    CLI::App* c_flow =
        app.add_subcommand("flow", "deform residues along a pole motion (Schlesinger flow)");
    c_flow->add_option("file", file, "system file")->required();
    c_flow->add_option("--moving", moving, "1-based index of the pole to move")->required();
    c_flow->add_option("--to", to_raw, "destination of the moving pole as \"re,im\"")->required();
    c_flow->add_option("--via", via_raw, "intermediate stops \"re,im;re,im;...\"");
    c_flow->add_option("--margin", margin,
                       "confinement disk inflation factor in (0,1) (default 0.5)");
    fl_flow.attach(c_flow, false);

    CLI::App* c_invariants = app.add_subcommand(
        "invariants", "flow plus monodromy preservation and auxiliary-system residual checks");
    c_invariants->add_option("file", file, "system file")->required();
    c_invariants->add_option("--moving", moving, "1-based index of the pole to move")->required();
    c_invariants->add_option("--to", to_raw, "destination of the moving pole as \"re,im\"")
        ->required();
    c_invariants->add_option("--via", via_raw, "intermediate stops \"re,im;re,im;...\"");
    c_invariants->add_option("--margin", margin,
                             "confinement disk inflation factor in (0,1) (default 0.5)");
    c_invariants->add_option("--fd-step", fd_step,
                             "finite-difference step for the auxiliary residual (default 1e-3)");
    c_invariants->add_option("--probes", probes, "number of spectator probe points (default 2)");
    fl_invariants.attach(c_invariants, false);

    CLI::App* c_residual = app.add_subcommand(
        "residual", "deformation-equation residual of a parameterized family");
    c_residual->add_option("--family", family_name, "family name (available: example)");
    c_residual->add_option(
        "--h", h_raw, "polynomial coefficients \"c0;c1;...\", each \"re\" or \"re,im\" (default 0)");
    c_residual->add_option("--at", at_raw, "family parameter as \"re,im\" (default 0)");
    c_residual->add_option("--moving", moving_raw,
                           "1-based pole indices to differentiate against (default \"1\")");
    c_residual->add_option("--fd-step", residual_fd,
                           "finite-difference step (default: family setting, 1e-3)");
    fl_residual.attach(c_residual, false);

    CLI::App* c_example = app.add_subcommand(
        "example", "emit a system file for the built-in example family");
    c_example->add_option(
        "--h", h_raw, "polynomial coefficients \"c0;c1;...\", each \"re\" or \"re,im\" (default 0)");
    c_example->add_option("--t", t_raw, "moving pole position as \"re,im\" (default 0)");
    fl_example.attach(c_example, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    }

    std::string command = "?";
    const CommonFlags* flags = nullptr;
    try {
        if (c_validate->parsed()) return run_validate(file, (command = "validate", *(flags = &fl_validate)));
        if (c_continue->parsed())
            return run_continue(file, target_raw, path_raw,
                                (command = "continue", *(flags = &fl_continue)));
        if (c_monodromy->parsed())
            return run_monodromy(file, word_raw, (command = "monodromy", *(flags = &fl_monodromy)));
        if (c_rep->parsed()) return run_rep(file, (command = "rep", *(flags = &fl_rep)));
        if (c_flow->parsed())
            return run_flow(file, moving, to_raw, via_raw, margin,
                            (command = "flow", *(flags = &fl_flow)));
        if (c_invariants->parsed())
            return run_invariants(file, moving, to_raw, via_raw, margin, fd_step, probes,
                                  (command = "invariants", *(flags = &fl_invariants)));
        if (c_residual->parsed())
            return run_residual(family_name, h_raw, at_raw, moving_raw, residual_fd,
                                (command = "residual", *(flags = &fl_residual)));
        if (c_example->parsed())
            return run_example(h_raw, t_raw, (command = "example", *(flags = &fl_example)));
        std::cerr << "usage error: no subcommand\n";
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const fuchs::Error& e) {
        Json doc = make_doc(command, "");
        Json err{{"code", fuchs::errc_name(e.code())}, {"message", e.what()}};
        if (e.index() >= 1) err["index"] = e.index();
        doc["errors"].push_back(std::move(err));
        emit(doc, flags ? flags->output : std::string());
        return 1;
    } catch (const std::exception& e) {
        Json doc = make_doc(command, "");
        doc["errors"].push_back(Json{{"code", fuchs::errc_name(fuchs::Errc::numerical_failure)},
                                     {"message", e.what()}});
        emit(doc, flags ? flags->output : std::string());
        return 1;
    }
}
