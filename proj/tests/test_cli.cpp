#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ncts/cli.hpp"
#include "ncts/lmi.hpp"
#include "ncts/preset.hpp"

using namespace ncts;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_command(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("ncts_cli_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("usage errors") {
    CHECK(run({}).code == kExitUsage);
    const Result r = run({"frobnicate"});
    CHECK(r.code == kExitUsage);
    CHECK(r.err.find("frobnicate") != std::string::npos);
    CHECK(run({"case", "case1", "--bogus"}).code == kExitUsage);
    CHECK(run({"synthesize"}).code == kExitUsage);
}

TEST_CASE("validation errors") {
    const Result r = run({"synthesize", "missing.json"});
    CHECK(r.code == kExitValidation);
    CHECK(r.err.find("not found") != std::string::npos);
    CHECK(run({"case", "no_such_case"}).code == kExitValidation);
    CHECK(run({"case", "case1", "--override", "A1=3"}).code == kExitValidation);
}

TEST_CASE("large gamma reports infeasibility") {
    CHECK(run({"case", "case1", "--override", "gamma=50", "--out", scratch("gamma").string()}).code ==
          kExitInfeasible);
}

TEST_CASE("preset snapshot") {
    const double alpha[] = {0.25, 1.0, 0.0};
    int k = 0;
    for (const char* name : {"case1", "case2", "case3"}) {
        CAPTURE(name);
        const Preset p = load_preset(resolve_preset(name));
        CHECK(p.name == name);
        CHECK(p.model.alpha_bar == alpha[k++]);
        CHECK(p.model.mu == 0.16);
        CHECK(p.model.beta_bar == 0.02);
        CHECK(p.model.dissipativity.gamma == 0.1);
        CHECK(p.model.fault.lower(0) == 0.6);
        CHECK(p.model.fault.upper(0) == 0.8);
        CHECK(p.fault_mode == FaultMode::unknown);
        const Scenario s = p.build_scenario();
        CHECK(s.x1_0(0) == -5.5);
        CHECK(s.x1_0(1) == -2.5);
        CHECK(s.horizon == 15.0);
    }
}

TEST_CASE("case run writes its artifacts deterministically") {
    const fs::path a = scratch("run_a");
    const fs::path b = scratch("run_b");
    REQUIRE(run({"case", "case1", "--seed", "7", "--out", a.string()}).code == kExitOk);
    REQUIRE(run({"case", "case1", "--seed", "7", "--out", b.string()}).code == kExitOk);
    for (const char* f : {"certificate.json", "synthesis.json", "trace.csv", "stats.json"}) {
        CAPTURE(f);
        REQUIRE(fs::exists(a / f));
        CHECK(slurp(a / f) == slurp(b / f));
    }
    const auto stats = nlohmann::json::parse(slurp(a / "stats.json"));
    CHECK(stats.at("seed") == 7);

    const Result an = run({"analyze", (a / "trace.csv").string(), "--model", "case1"});
    CHECK(an.code == kExitOk);
    CHECK(nlohmann::json::parse(an.out).contains("dissipativity"));

    const fs::path cert = a / "certificate.json";
    const fs::path sim = scratch("sim");
    CHECK(run({"simulate", "case1", cert.string(), "--horizon", "2", "--out", sim.string()}).code == kExitOk);
    CHECK(fs::exists(sim / "trace.csv"));
}

TEST_CASE("SDPA export from the command line") {
    const fs::path dir = scratch("sdpa");
    fs::create_directories(dir);
    const fs::path file = dir / "t1.dat-s";
    REQUIRE(run({"export-sdpa", "case1", "--theorem", "1", "--out", file.string()}).code == kExitOk);
    const SdpaProblem p = parse_sdpa(slurp(file));
    CHECK(p.m == 91);
}

TEST_CASE("verify subcommand") {
    CHECK(run({"verify", "--draws", "50"}).code == kExitOk);
}
