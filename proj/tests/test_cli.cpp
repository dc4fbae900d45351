#include <catch_amalgamated.hpp>

#include "rde/cli.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace rde;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
    const fs::path d = fs::temp_directory_path() / "rde_test_cli";
    fs::create_directories(d);
    return d;
}

std::string write_config(const std::string& name, const std::string& experiment,
                         const std::string& probs = "0.5, 0.5") {
    const fs::path dir = scratch_dir();
    const std::string p0 = probs.substr(0, probs.find(','));
    const std::string p1 = probs.substr(probs.find(',') + 1);
    std::ofstream f(dir / (name + ".json"));
    f << R"({"schema": "rde-config v1",
      "system": [{"family": "beta", "prob": )" << p0 << R"(, "params": {"beta": 2}},
                 {"family": "beta", "prob": )" << p1 << R"(, "params": {"beta": 3}}],
      "observable": [{"kind": "cos", "k": 1}],
      "grid": 256,
      "output": {"dir": ")" << (dir / "out").string() << R"(", "name": ")" << name << R"("},
      "experiment": )" << experiment << "}\n";
    return (dir / (name + ".json")).string();
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

}  // namespace

TEST_CASE("run command exit codes", "[cli]") {
    std::ostringstream out, err;
    const std::string ok =
        write_config("ok", R"({"kind": "clt", "n": 200, "replicas": 4000, "ladder": [20]})");
    CHECK(run_command(ok, {}, out, err) == kExitPass);
    CHECK(out.str().find("clt: PASS") != std::string::npos);
    const fs::path report = scratch_dir() / "out" / "ok.json";
    REQUIRE(fs::exists(report));
    const auto j = nlohmann::json::parse(slurp(report));
    CHECK(j["schema"] == "rde-report v1");
    CHECK(fs::exists(scratch_dir() / "out" / "ok_correlation.csv"));

    std::ostringstream out2, err2;
    const std::string tight = write_config(
        "tight", R"({"kind": "clt", "n": 200, "replicas": 200, "ladder": [20], "band": 1e-9})");
    CHECK(run_command(tight, {}, out2, err2) == kExitBandFailure);
    CHECK(fs::exists(scratch_dir() / "out" / "tight.json"));
    CHECK(err2.str().find("band failure: ks") != std::string::npos);

    std::ostringstream out3, err3;
    const std::string bad = write_config("bad", R"({"kind": "clt"})", "0.6, 0.6");
    CHECK(run_command(bad, {}, out3, err3) == kExitError);
    CHECK(err3.str().find("1.2") != std::string::npos);
    CHECK_FALSE(fs::exists(scratch_dir() / "out" / "bad.json"));

    std::ostringstream out4, err4;
    CHECK(run_command((scratch_dir() / "missing.json").string(), {}, out4, err4) == kExitError);
}

TEST_CASE("seed override and determinism", "[cli][property]") {
    const std::string cfg =
        write_config("det", R"({"kind": "clt", "n": 100, "replicas": 500, "ladder": [10]})");
    auto report = [&](std::uint64_t seed) {
        RunOverrides o;
        o.seed = seed;
        o.threads = 2;
        std::ostringstream out, err;
        (void)run_command(cfg, o, out, err);
        auto j = nlohmann::json::parse(slurp(scratch_dir() / "out" / "det.json"));
        j.erase("wall_time");
        return j;
    };
    const auto a = report(5), b = report(5), c = report(6);
    CHECK(a == b);
    CHECK(a != c);
}

TEST_CASE("execute covers the spectral kind", "[cli]") {
    ExperimentConfig c;
    c.maps = {MapSpec{}, MapSpec{}};
    c.maps[0].prob = 0.5;
    c.maps[1].prob = 0.5;
    c.maps[1].beta_int = 3;
    c.terms = {TermSpec{"cos"}};
    c.kind = "spectral";
    c.grid = 128;
    const PipelineOutput r = execute(c);
    CHECK(r.report.passed());
    CHECK(r.report.kind == "spectral");
}

TEST_CASE("builtin listing", "[cli]") {
    const std::string s = list_builtins();
    for (const char* word : {"beta", "linear_mod1", "custom", "erdos_renyi", "concentration",
                             "shrinking_target_clt", "martingale"}) {
        CHECK(s.find(word) != std::string::npos);
    }
    CHECK(s == list_builtins());
    CHECK(s.find("borel_cantelli") < s.find("clt "));
    CHECK(s.find("clt ") < s.find("spectral"));
}
