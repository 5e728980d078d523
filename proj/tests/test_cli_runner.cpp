#include "doctest.h"

#include "fracdiff/config.hpp"
#include "fracdiff/error.hpp"
#include "fracdiff/expr.hpp"
#include "fracdiff/io.hpp"
#include "fracdiff/runner.hpp"

#include "support/dir_compare.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>

using namespace fracdiff;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / "fracdiff_cli_tests" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

const char* kForward = R"Y(id: fwd
seed: 1
kernel:
  type: fractional-laplacian
  beta: 0.5
grid:
  n: 1
  domain: [-1, 1]
  nodes: 16
time:
  T: 1
  steps: 16
  alpha: 0.5
run:
  type: forward-homogeneous
source:
  u0: "bump(x / 0.5)"
)Y";

const char* kInverse = R"Y(id: inv
seed: 99
kernel: {type: fractional-laplacian, beta: 0.5}
grid: {n: 1, domain: [-1, 1], nodes: 24}
time: {T: 1, steps: 48, alpha: 0.6}
run:
  type: inverse
  x0: [0.25]
  noise: 0.01
  regularization: sweep
  sweep_count: 7
source:
  rho: "1 + sin(2*pi*t)"
  g: "bump((x - 0.2) / 0.5)"
)Y";

std::string replace(std::string s, const std::string& from, const std::string& to) {
    const auto pos = s.find(from);
    REQUIRE(pos != std::string::npos);
    return s.replace(pos, from.size(), to);
}

io::Json manifest(const fs::path& dir) { return io::Json::parse(io::read_text((dir / "manifest.json").string())); }

bool lists(const io::Json& m, const std::string& file) {
    for (const auto& o : m["outputs"])
        if (o["file"] == file) return true;
    return false;
}

}  // namespace

TEST_CASE("expressions: precedence, functions and constants") {
    const std::vector<std::string> t{"t"};
    CHECK(Expression::parse("1 + 2 * 3", t)(0.0) == 7.0);
    CHECK(Expression::parse("2^3^2", t)(0.0) == 512.0);
    CHECK(Expression::parse("-2^2", t)(0.0) == -4.0);
    CHECK(Expression::parse("(1 + t) / 2", t)(3.0) == 2.0);
    CHECK(Expression::parse("sin(pi * t)", t)(0.5) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(Expression::parse("exp(-t) * e", t)(1.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(Expression::parse("max(t, 2) + min(t, 2) + pow(t, 2)", t)(3.0) == 14.0);
    CHECK(Expression::parse("bump(t)", t)(0.0) == 1.0);
    CHECK(Expression::parse("bump(t)", t)(1.0) == 0.0);
    CHECK(Expression::parse("ind(t) + abs(-t) + sqrt(4) + log(1)", t)(0.5) == 3.5);
    CHECK(Expression::parse("1.5e-1 + .5", t)(0.0) == doctest::Approx(0.65));
    const Expression xy = Expression::parse("x * y + x", {"x", "y"});
    CHECK(xy(std::vector<double>{2.0, 3.0}) == 8.0);
    CHECK_THROWS_AS(xy(1.0), ShapeError);
}

TEST_CASE("expression errors carry the column") {
    const std::vector<std::string> t{"t"};
    auto column_of = [&](const std::string& s) {
        try {
            Expression::parse(s, t);
        } catch (const ExprError& e) {
            return e.column();
        }
        return -1;
    };
    CHECK(column_of("1 + tt") == 5);
    CHECK(column_of("foo(t)") == 1);
    CHECK(column_of("sin(t, t)") == 1);
    CHECK(column_of("(1 + t") == 7);
    CHECK(column_of("1 + ") == 5);
    CHECK(column_of("1 $ 2") == 3);
    CHECK(column_of("") == 1);
    try {
        Expression::parse("x + 1", t);
        FAIL("expected ExprError");
    } catch (const ExprError& e) {
        CHECK(std::string(e.what()).find("allowed: t") != std::string::npos);
    }
}

TEST_CASE("minimal forward-homogeneous config parses") {
    const ParseResult r = parse_config(kForward);
    REQUIRE(r.ok());
    CHECK(r.config->run.type == RunType::ForwardHomogeneous);
    CHECK(r.config->grid.nodes == 16);
    CHECK(r.config->time.alpha == 0.5);
    CHECK(r.config->source.u0 == "bump(x / 0.5)");
}

TEST_CASE("alpha out of range is a located diagnostic") {
    const ParseResult r = parse_config(replace(kForward, "alpha: 0.5", "alpha: 1.5"));
    CHECK_FALSE(r.ok());
    REQUIRE(r.diagnostics.size() == 1);
    CHECK(r.diagnostics[0].message == "alpha must lie in (0,1)");
    CHECK(r.diagnostics[0].line == 13);
    CHECK(r.diagnostics[0].column == 10);
}

TEST_CASE("unknown keys are named, never ignored") {
    const ParseResult r = parse_config(replace(kForward, "  beta: 0.5", "  betaa: 0.5"));
    CHECK_FALSE(r.ok());
    REQUIRE(r.diagnostics.size() == 1);
    CHECK(r.diagnostics[0].message.find("'betaa'") != std::string::npos);
    CHECK(r.diagnostics[0].line == 5);
    CHECK(r.diagnostics[0].column == 3);

    const ParseResult top = parse_config(std::string(kForward) + "extra: 1\n");
    REQUIRE(top.diagnostics.size() == 1);
    CHECK(top.diagnostics[0].message.find("'extra'") != std::string::npos);
    CHECK(top.diagnostics[0].line == 18);

    // Keys of other run types are unknown here too.
    const ParseResult other = parse_config(replace(kForward, "  type: forward-homogeneous", "  type: forward-homogeneous\n  noise: 0.1"));
    REQUIRE(other.diagnostics.size() == 1);
    CHECK(other.diagnostics[0].message.find("'noise'") != std::string::npos);
}

TEST_CASE("syntax, type, missing-block and expression diagnostics") {
    const ParseResult syn = parse_config("kernel: {type: fractional-laplacian\ngrid: [1, 2\n");
    REQUIRE(syn.diagnostics.size() == 1);
    CHECK(syn.diagnostics[0].message.rfind("syntax error", 0) == 0);
    CHECK(syn.diagnostics[0].line >= 1);

    const ParseResult type = parse_config(replace(kForward, "nodes: 16", "nodes: many"));
    REQUIRE(type.diagnostics.size() == 1);
    CHECK(type.diagnostics[0].message.find("type mismatch: 'nodes'") != std::string::npos);
    CHECK(type.diagnostics[0].line == 9);

    const ParseResult frac = parse_config(replace(kForward, "steps: 16", "steps: 2.5"));
    REQUIRE(frac.diagnostics.size() == 1);
    CHECK(frac.diagnostics[0].message.find("'steps' expects an integer") != std::string::npos);

    std::string no_time = kForward;
    no_time.erase(no_time.find("time:"), no_time.find("run:") - no_time.find("time:"));
    const ParseResult missing = parse_config(no_time);
    REQUIRE(missing.diagnostics.size() == 1);
    CHECK(missing.diagnostics[0].message.find("missing block 'time'") != std::string::npos);
    CHECK(missing.diagnostics[0].line == 1);

    const ParseResult no_run = parse_config("id: x\n");
    REQUIRE(no_run.diagnostics.size() == 1);
    CHECK(no_run.diagnostics[0].message == "missing block 'run'");

    const ParseResult bad_type = parse_config(replace(kForward, "forward-homogeneous", "forward"));
    REQUIRE(bad_type.diagnostics.size() == 1);
    CHECK(bad_type.diagnostics[0].message.find("unknown run type 'forward'") != std::string::npos);

    // The column points into the quoted scalar: `  u0: "bump(z / 0.5)"`, z at column 13.
    const ParseResult expr = parse_config(replace(kForward, "bump(x / 0.5)", "bump(z / 0.5)"));
    REQUIRE(expr.diagnostics.size() == 1);
    CHECK(expr.diagnostics[0].line == 17);
    CHECK(expr.diagnostics[0].column == 13);
    CHECK(expr.diagnostics[0].message.find("unknown variable 'z'") != std::string::npos);

    const ParseResult need = parse_config(replace(kForward, "  u0: \"bump(x / 0.5)\"", "  rho: \"1\""));
    REQUIRE(need.diagnostics.size() == 1);
    CHECK(need.diagnostics[0].message.find("source needs u0") != std::string::npos);

    const ParseResult several = parse_config(replace(replace(kForward, "beta: 0.5", "beta: 2"), "alpha: 0.5", "alpha: 0"));
    CHECK(several.diagnostics.size() == 2);
    CHECK(several.diagnostics[0].line < several.diagnostics[1].line);
    CHECK(several.diagnostics[0].str().rfind("line 5, column 9: ", 0) == 0);
}

TEST_CASE("load_config reports every diagnostic with path and position") {
    const fs::path dir = scratch("load");
    io::write_text((dir / "bad.yaml").string(), replace(replace(kForward, "beta: 0.5", "betaa: 0.5"), "alpha: 0.5", "alpha: 1.5"));
    try {
        load_config((dir / "bad.yaml").string());
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("bad.yaml:5:3: unknown key 'betaa'") != std::string::npos);
        CHECK(msg.find("bad.yaml:13:10: alpha must lie in (0,1)") != std::string::npos);
    }
    CHECK_THROWS_AS(load_config((dir / "absent.yaml").string()), ConfigError);
}

TEST_CASE("config round trip is the identity on every bundled scenario") {
    const char* dir = std::getenv("FRACDIFF_SCENARIOS");
    if (!dir) return;
    int count = 0;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() != ".yaml") continue;
        const ScenarioConfig c = load_config(e.path().string());
        const ParseResult again = parse_config(serialize_config(c));
        CAPTURE(e.path().string());
        REQUIRE(again.ok());
        CHECK(*again.config == c);
        CHECK(serialize_config(*again.config) == serialize_config(c));
        ++count;
    }
    CHECK(count >= 10);
}

TEST_CASE("config round trip on random configs") {
    std::mt19937_64 rng(20261014);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const RunType types[] = {RunType::ForwardHomogeneous, RunType::ForwardInhomogeneous, RunType::DuhamelCheck,
                             RunType::Inverse, RunType::Harnack, RunType::Principles, RunType::ValidateKernel,
                             RunType::Eig, RunType::Inequalities};
    for (int k = 0; k < 200; ++k) {
        ScenarioConfig c;
        c.id = "random " + std::to_string(k);
        c.seed = rng();
        c.run.type = types[k % 9];
        c.kernel.beta = 0.01 + 0.98 * U(rng);
        if (k % 4 == 0) {
            c.kernel.type = "anisotropic";
            c.kernel.angular = "1 + 0.3*cos(theta)";
            c.kernel.Lambda = 1 + 3 * U(rng);
        }
        c.grid.n = k % 5 == 0 ? 2 : 1;
        c.grid.domain = c.grid.n == 2 ? std::vector<double>{U(rng), -U(rng), 0.1 + U(rng)}
                                      : std::vector<double>{-U(rng) - 0.1, U(rng) + 0.1};
        if (k % 3 == 0) c.grid.spacing = 0.01 + 0.1 * U(rng);
        else c.grid.nodes = 3 + static_cast<int>(100 * U(rng));
        c.time.T = 0.1 + 3 * U(rng);
        c.time.steps = 2 + static_cast<int>(500 * U(rng));
        c.time.alpha = 0.01 + 0.98 * U(rng);
        RunBlock& r = c.run;
        if (r.type != RunType::DuhamelCheck && r.type != RunType::Inverse && r.type != RunType::ValidateKernel &&
            r.type != RunType::Eig && r.type != RunType::Inequalities)
            r.solver = k % 2 ? "both" : "l1";
        if (r.type != RunType::ValidateKernel && r.type != RunType::Inequalities)
            r.modes = static_cast<int>(50 * U(rng));
        const std::size_t n = static_cast<std::size_t>(c.grid.n);
        if (r.type == RunType::Inverse) {
            r.x0.assign(n, 0.1 * U(rng));
            r.noise = 0.05 * U(rng);
            r.regularization = "second-difference";
            r.gamma = U(rng);
            r.sweep_lo = -8 * U(rng) - 1;
            r.sweep_hi = U(rng);
            r.sweep_count = 2 + k % 30;
            c.source = {"1 + t^2", "bump(x)", {}, "", ""};
        }
        if (r.type == RunType::Harnack) {
            r.x0.assign(n, 0.0);
            r.t0 = U(rng);
            r.r = 0.05 + U(rng);
            r.delta = 0.1 + 0.8 * U(rng);
            r.tau = 0.1 + U(rng);
            r.eta = 1.1 + U(rng);
            c.source.u0 = "exp(-x^2)";
        }
        if (r.type == RunType::ValidateKernel) {
            r.probes.assign(2, std::vector<double>(n + 1, 0.0));
            r.probes[0].back() = 0.2 + U(rng);
            r.probes[1].back() = 0.3;
            r.directions = 1 + k % 90;
        }
        if (r.type == RunType::Inequalities) r.samples = 1 + static_cast<int>(1e6 * U(rng));
        if (r.type == RunType::ForwardHomogeneous || r.type == RunType::Principles) c.source.u0 = "ind(x / 0.2)";
        if (r.type == RunType::ForwardInhomogeneous || r.type == RunType::DuhamelCheck) {
            c.source.rho = "cos(3*t) + 2";
            c.source.g = c.grid.n == 2 ? "bump(x) * bump(y)" : "bump(x)";
        }
        // Blocks the run type does not use are not serialized.
        if (r.type == RunType::Inequalities) {
            c.kernel = {};
            c.grid = {};
        }
        if (r.type == RunType::Inequalities || r.type == RunType::ValidateKernel || r.type == RunType::Eig) c.time = {};

        const std::string text = serialize_config(c);
        const ParseResult p = parse_config(text);
        CAPTURE(text);
        for (const auto& d : p.diagnostics) MESSAGE(d.str());
        REQUIRE(p.ok());
        CHECK(*p.config == c);
    }
}

TEST_CASE("inverse run lists the reconstruction and diagnostics in its manifest") {
    const fs::path dir = scratch("inverse");
    RunOptions opt;
    opt.out_dir = dir.string();
    const RunOutcome r = run_config_text(kInverse, opt);
    CHECK(r.exit_code == kExitOk);
    const io::Json m = manifest(dir);
    CHECK(m["status"] == "ok");
    CHECK(m["error"].is_null());
    CHECK(m["seed"] == 99);
    CHECK(m["scenario"] == "inv");
    CHECK(m["inputs"]["config_sha256"] == io::sha256_hex(kInverse));
    CHECK(m["versions"].contains("fracdiff"));
    CHECK(m.contains("wall_time_s"));
    CHECK(lists(m, "rho_reconstruction.csv"));
    CHECK(lists(m, "diagnostics.json"));
    CHECK(lists(m, "trace.csv"));
    CHECK(lists(m, "sweep.csv"));
    for (const auto& o : m["outputs"]) {
        const std::string bytes = io::read_text((dir / o["file"].get<std::string>()).string());
        CHECK(o["sha256"] == io::sha256_hex(bytes));
        CHECK(o["bytes"] == bytes.size());
    }
    const io::CsvTable t = io::read_csv((dir / "rho_reconstruction.csv").string());
    CHECK(t.column("rho_hat").size() == 49);
    const io::Json d = io::Json::parse(io::read_text((dir / "diagnostics.json").string()));
    CHECK(d["relative_l2_error"].get<double>() < 0.3);
    CHECK(d["selection"] == "minimal-error");
}

TEST_CASE("harnack run on a too-coarse grid fails with a geometry error in the manifest") {
    const fs::path dir = scratch("coarse");
    const char* data = std::getenv("FRACDIFF_TEST_DATA");
    const std::string path = std::string(data ? data : "tests/data") + "/harnack_coarse.yaml";
    RunOptions opt;
    opt.out_dir = dir.string();
    const RunOutcome r = run_config_file(path, opt);
    CHECK(r.exit_code == kExitModuleError);
    const io::Json m = manifest(dir);
    CHECK(m["status"] == "error");
    CHECK(m["error"]["kind"] == "geometry");
    CHECK(m["error"]["message"].get<std::string>().find("refine") != std::string::npos);
    CHECK(m["exit_code"] == kExitModuleError);
}

TEST_CASE("config errors end the run with exit 2 and diagnostics in the manifest") {
    const fs::path dir = scratch("config-error");
    RunOptions opt;
    opt.out_dir = dir.string();
    const RunOutcome r = run_config_text(replace(kForward, "alpha: 0.5", "alpha: 1.5"), opt);
    CHECK(r.exit_code == kExitConfig);
    const io::Json m = manifest(dir);
    CHECK(m["error"]["kind"] == "config");
    REQUIRE(m["error"]["diagnostics"].size() == 1);
    CHECK(m["error"]["diagnostics"][0]["line"] == 13);
    CHECK(m["error"]["diagnostics"][0]["message"] == "alpha must lie in (0,1)");
    CHECK(m["outputs"].empty());

    // g_nodes of the wrong length is a shape error raised at run time.
    const std::string bad = replace(kInverse, "g: \"bump((x - 0.2) / 0.5)\"", "g_nodes: [1, 2, 3]");
    const RunOutcome s = run_config_text(bad, opt);
    CHECK(s.exit_code == kExitModuleError);
    CHECK(manifest(dir)["error"]["kind"] == "shape");
}

TEST_CASE("repeated runs with the same seed are byte-identical") {
    const fs::path a = scratch("det-a"), b = scratch("det-b"), c = scratch("det-c");
    for (const fs::path& dir : {a, b}) {
        RunOptions opt;
        opt.out_dir = (dir / "inverse").string();
        CHECK(run_config_text(kInverse, opt).exit_code == kExitOk);
        opt.out_dir = (dir / "forward").string();
        CHECK(run_config_text(replace(kForward, "type: forward-homogeneous", "type: forward-homogeneous\n  solver: both"), opt)
                  .exit_code == kExitOk);
    }
    const auto diffs = testing::compare_dirs(a, b);
    for (const auto& d : diffs) MESSAGE(d);
    CHECK(diffs.empty());
    CHECK(testing::relative_files(a).size() >= 10);

    // A different seed changes the noisy trace.
    RunOptions opt;
    opt.out_dir = (c / "inverse").string();
    opt.seed = 100;
    CHECK(run_config_text(kInverse, opt).exit_code == kExitOk);
    CHECK(testing::slurp(a / "inverse/trace.csv") != testing::slurp(c / "inverse/trace.csv"));
    CHECK(manifest(c / "inverse")["seed"] == 100);
}

TEST_CASE("refinement halves h and dt") {
    const fs::path dir = scratch("refine");
    RunOptions opt;
    opt.out_dir = dir.string();
    opt.refine = 1;
    REQUIRE(run_config_text(kForward, opt).exit_code == kExitOk);
    const io::Json s = io::Json::parse(io::read_text((dir / "summary.json").string()));
    CHECK(s["nodes"] == 33);
    CHECK(s["steps"] == 32);
    CHECK(manifest(dir)["refine"] == 1);
}

TEST_CASE("command-line front end") {
    const char* cli = std::getenv("FRACDIFF_CLI");
    if (!cli) return;
    const fs::path dir = scratch("cli");
    io::write_text((dir / "inv.yaml").string(), kInverse);
    io::write_text((dir / "bad.yaml").string(), replace(kInverse, "alpha: 0.6", "alpha: 1.5"));
    auto run = [&](const std::string& args) {
        const std::string cmd = std::string(cli) + " " + args + " > " + (dir / "log.txt").string() + " 2>&1";
        const int status = std::system(cmd.c_str());
        return WEXITSTATUS(status);
    };
    CHECK(run("invert --config " + (dir / "inv.yaml").string() + " --out " + (dir / "o1").string()) == 0);
    CHECK(fs::exists(dir / "o1/rho_reconstruction.csv"));
    CHECK(run("invert --config " + (dir / "inv.yaml").string() + " --out " + (dir / "o2").string() + " --seed 99") == 0);
    CHECK(testing::compare_dirs(dir / "o1", dir / "o2").empty());

    CHECK(run("invert --config " + (dir / "bad.yaml").string() + " --out " + (dir / "o3").string()) == 2);
    const std::string log = io::read_text((dir / "log.txt").string());
    CHECK(log.find("bad.yaml:5:") != std::string::npos);
    CHECK(log.find("alpha must lie in (0,1)") != std::string::npos);

    CHECK(run("solve --config " + (dir / "inv.yaml").string() + " --out " + (dir / "o4").string()) == 2);
    CHECK(run("invert --config " + (dir / "absent.yaml").string()) != 0);
    CHECK(run("frobnicate") != 0);
    CHECK(run("--version") == 0);
}
