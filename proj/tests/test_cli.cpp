#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "test_support.hpp"

using namespace fuchs;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string out;
};

// Run the tool with stderr folded into stdout; the commands under test are
// quiet on stderr in success paths anyway.
CliResult run_cli(const std::string& args) {
    const std::string cmd = testsupport::cli_binary() + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CliResult res;
    char buf[4096];
    std::size_t got = 0;
    while ((got = fread(buf, 1, sizeof(buf), pipe)) > 0) res.out.append(buf, got);
    const int status = pclose(pipe);
    res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return res;
}

std::string fixture(const std::string& name) { return testsupport::fixtures_dir() + "/" + name; }

std::string write_temp(const std::string& name, const std::string& text) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path, std::ios::binary);
    out << text;
    return path.string();
}

Json parse_doc(const CliResult& res) {
    INFO(res.out);
    return Json::parse(res.out);
}

} // namespace

TEST_CASE("validate accepts the shipped fixtures") {
    for (const char* name : {"example_sysex.json", "scalar_q03.json"}) {
        const auto res = run_cli("validate " + fixture(name));
        CAPTURE(name, res.out);
        REQUIRE(res.exit_code == 0);
        const Json doc = parse_doc(res);
        REQUIRE(doc["command"] == "validate");
        REQUIRE(doc["scalars"]["violation_count"] == 0);
        REQUIRE(doc["violations"].empty());
        REQUIRE(doc["version"].get<std::string>() == version_string);
    }
}

TEST_CASE("validate reports named violations and exits 1") {
    const std::string path = write_temp(
        "fuchs_dup_poles.json",
        "{\"k\": 1, \"poles\": [[0,0], [0,0]], \"residues\": [[[[0.5,0]]], [[[-0.5,0]]]]}");
    const auto res = run_cli("validate " + path);
    REQUIRE(res.exit_code == 1);
    const Json doc = parse_doc(res);
    bool named = false;
    for (const auto& v : doc["violations"])
        if (v["invariant"] == "poles_distinct") named = true;
    REQUIRE(named);
}

TEST_CASE("monodromy of the example fixture around one pole is the identity") {
    const auto res =
        run_cli("monodromy " + fixture("example_sysex.json") + " --word 1");
    REQUIRE(res.exit_code == 0);
    const Json doc = parse_doc(res);
    REQUIRE(doc["scalars"]["identity_deviation"].get<double>() <= 1e-8);
    const auto& m = doc["matrices"]["monodromy"];
    REQUIRE(std::abs(m[0][0][0].get<double>() - 1.0) <= 1e-8);
    REQUIRE(std::abs(m[0][1][0].get<double>()) <= 1e-8);
}

TEST_CASE("continue reproduces the scalar oracle through the tool") {
    const auto res =
        run_cli("continue " + fixture("scalar_q03.json") + " --target -1,0");
    REQUIRE(res.exit_code == 0);
    const Json doc = parse_doc(res);
    const double re = doc["matrices"]["value"][0][0][0].get<double>();
    const double im = doc["matrices"]["value"][0][0][1].get<double>();
    REQUIRE(std::abs(re - 0.81225239635623552261) < 1e-9);
    REQUIRE(std::abs(im) < 1e-9);
    REQUIRE(doc["scalars"]["steps_taken"].get<long>() > 0);
    REQUIRE(doc["winding"].size() == 2);
}

TEST_CASE("rep emits the full generator set with a small relation defect") {
    const auto res = run_cli("rep " + fixture("scalar_q03.json"));
    REQUIRE(res.exit_code == 0);
    const Json doc = parse_doc(res);
    REQUIRE(doc["matrices"].contains("generator_01"));
    REQUIRE(doc["matrices"].contains("generator_02"));
    REQUIRE(doc["scalars"]["relation_defect"].get<double>() <= 1e-7);
    REQUIRE(doc["generator_words"].size() == 2);
}

TEST_CASE("flow on the example fixture is stationary") {
    const auto res = run_cli("flow " + fixture("example_sysex.json") +
                             " --moving 1 --to 0.2,0.1");
    REQUIRE(res.exit_code == 0);
    const Json doc = parse_doc(res);
    REQUIRE(doc["scalars"]["first_integral_drift"].get<double>() <= 1e-10);
    REQUIRE(doc["poles_final"][0][0].get<double>() == Catch::Approx(0.2));
    // Diagonal residues commute, so nothing moves.
    const auto& q2 = doc["matrices"]["residue_02"];
    REQUIRE(std::abs(q2[0][0][0].get<double>() + 1.0) < 1e-10);
    REQUIRE(std::abs(q2[0][1][0].get<double>()) < 1e-10);
}

TEST_CASE("residual reports the pinned grid for the example family") {
    const auto res = run_cli("residual --family example --h 1 --at 0");
    REQUIRE(res.exit_code == 0);
    const Json doc = parse_doc(res);
    REQUIRE(doc["scalars"]["max_norm"].get<double>() == Catch::Approx(4.0 / 3.0).margin(1e-3));
    REQUIRE(doc["scalars"]["worst_equation"] == 3);
    bool saw = false;
    for (const auto& e : doc["grid"])
        if (e["equation"] == 2 && e["direction"] == 1) {
            saw = true;
            REQUIRE(e["norm"].get<double>() == Catch::Approx(1.0 / 3.0).margin(1e-4));
        }
    REQUIRE(saw);
}

TEST_CASE("residual of the constant member is zero") {
    const auto res = run_cli("residual --family example --h 0 --at 0");
    REQUIRE(res.exit_code == 0);
    const Json doc = parse_doc(res);
    REQUIRE(doc["scalars"]["max_norm"].get<double>() <= 1e-8);
}

TEST_CASE("example emits a parseable system file") {
    const auto res = run_cli("example --h 1 --t 0.5,0");
    REQUIRE(res.exit_code == 0);
    const auto parsed = parse_system_file(res.out);
    REQUIRE(parsed.system.size() == 4);
    ExampleFamily f;
    f.h = {Complex(1.0)};
    const auto direct = example_residues(Complex(0.5), f);
    for (std::size_t j = 0; j < 4; ++j)
        REQUIRE((parsed.system.residues[j] - direct[j]).norm() < 1e-15);
}

TEST_CASE("identical invocations produce byte identical documents") {
    const std::string args = "monodromy " + fixture("example_sysex.json") + " --word 1,-2";
    const auto a = run_cli(args);
    const auto b = run_cli(args);
    REQUIRE(a.exit_code == 0);
    REQUIRE(a.out == b.out);

    const std::string args2 = "residual --family example --h '1;0.5' --at 0.05,0.02";
    const auto c = run_cli(args2);
    const auto d = run_cli(args2);
    REQUIRE(c.exit_code == 0);
    REQUIRE(c.out == d.out);
}

TEST_CASE("--output writes the document to a file") {
    const auto target = std::filesystem::temp_directory_path() / "fuchs_out_doc.json";
    std::filesystem::remove(target);
    const auto res = run_cli("validate " + fixture("scalar_q03.json") + " --output " +
                             target.string());
    REQUIRE(res.exit_code == 0);
    std::ifstream in(target);
    REQUIRE(in.good());
    Json doc;
    in >> doc;
    REQUIRE(doc["command"] == "validate");
}

TEST_CASE("usage problems exit with code 2") {
    REQUIRE(run_cli("frobnicate").exit_code == 2);
    REQUIRE(run_cli("monodromy").exit_code == 2); // missing file and word
    REQUIRE(run_cli("monodromy " + fixture("scalar_q03.json") + " --word 0").exit_code == 2);
    REQUIRE(run_cli("continue " + fixture("scalar_q03.json") + " --target nope").exit_code == 2);
    REQUIRE(run_cli("residual --family unknown").exit_code == 2);
}

TEST_CASE("domain problems exit with code 1 and a structured error") {
    const auto missing = run_cli("validate /nonexistent/system.json");
    REQUIRE(missing.exit_code == 1);
    const Json doc = parse_doc(missing);
    REQUIRE(doc["errors"].size() == 1);
    REQUIRE(doc["errors"][0]["code"] == "invalid_argument");

    // A word referencing a pole the system does not have.
    const auto bad_word =
        run_cli("monodromy " + fixture("scalar_q03.json") + " --word 7");
    REQUIRE(bad_word.exit_code == 1);
    REQUIRE(parse_doc(bad_word)["errors"][0]["code"] == "invalid_argument");

    // Syntax errors in the input file are domain errors with positions.
    const std::string path = write_temp("fuchs_broken.json", "{\"k\": 1,,}\n");
    const auto broken = run_cli("validate " + path);
    REQUIRE(broken.exit_code == 1);
    REQUIRE(parse_doc(broken)["errors"][0]["code"] == "parse_error");
}

TEST_CASE("help is available and exits 0") {
    REQUIRE(run_cli("--help").exit_code == 0);
    REQUIRE(run_cli("monodromy --help").exit_code == 0);
}
