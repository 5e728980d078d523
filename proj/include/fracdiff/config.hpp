#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fracdiff {

enum class RunType {
    ForwardHomogeneous,
    ForwardInhomogeneous,
    DuhamelCheck,
    Inverse,
    Harnack,
    Principles,
    ValidateKernel,
    Eig,
    Inequalities,
};

std::string to_string(RunType t);
std::optional<RunType> run_type_from_string(const std::string& s);

struct KernelBlock {
    std::string type = "fractional-laplacian";  ///< or "anisotropic"
    double beta = 0.5;
    std::string angular;  ///< a(theta) for anisotropic kernels
    double Lambda = 0.0;  ///< anisotropic class constant

    bool operator==(const KernelBlock&) const = default;
};

/// n = 1: domain = [a, b], `nodes` interior points. n = 2: domain = [cx, cy, radius],
/// `nodes` lattice points per diameter. `spacing` may replace `nodes`.
struct GridBlock {
    int n = 1;
    std::vector<double> domain{-1.0, 1.0};
    int nodes = 0;
    double spacing = 0.0;

    bool operator==(const GridBlock&) const = default;
};

struct TimeBlock {
    double T = 1.0;
    int steps = 0;
    double alpha = 0.5;

    bool operator==(const TimeBlock&) const = default;
};

/// Expressions: rho in t; g and u0 in x (and y when n = 2). `g_nodes` replaces g by an explicit
/// node list; `trace` names an observation CSV (columns t, value) for inverse runs.
struct SourceBlock {
    std::string rho;
    std::string g;
    std::vector<double> g_nodes;
    std::string u0;
    std::string trace;

    bool operator==(const SourceBlock&) const = default;
};

struct RunBlock {
    RunType type = RunType::ForwardHomogeneous;
    std::string solver = "spectral";  ///< spectral | l1 | both
    int modes = 0;
    // inverse
    std::vector<double> x0;
    double noise = 0.0;
    std::string regularization = "none";  ///< none | second-difference | sweep
    double gamma = 0.0;                   ///< relative to ||F||_F^2 / M
    double sweep_lo = -10.0;
    double sweep_hi = 0.0;
    int sweep_count = 21;
    // harnack
    double t0 = 0.0;
    double r = 0.2;
    double delta = 0.5;
    double tau = 1.0;
    double eta = 2.0;
    // validate-kernel: each probe is [x, rho] (n = 1) or [x, y, rho] (n = 2)
    std::vector<std::vector<double>> probes;
    int directions = 64;
    // inequalities
    int samples = 100000;

    bool operator==(const RunBlock&) const = default;
};

struct ScenarioConfig {
    std::string id = "scenario";
    std::uint64_t seed = 0;
    KernelBlock kernel;
    GridBlock grid;
    TimeBlock time;
    RunBlock run;
    SourceBlock source;

    bool operator==(const ScenarioConfig&) const = default;
};

struct Diagnostic {
    int line = 0;    ///< 1-based; 0 when unknown
    int column = 0;  ///< 1-based; 0 when unknown
    std::string message;

    std::string str() const;
};

struct ParseResult {
    std::optional<ScenarioConfig> config;
    std::vector<Diagnostic> diagnostics;

    bool ok() const { return config.has_value() && diagnostics.empty(); }
};

/// YAML scenario document. Never throws: every problem becomes a diagnostic.
ParseResult parse_config(const std::string& text);

/// Reads and parses a file; throws ConfigError listing all diagnostics.
ScenarioConfig load_config(const std::string& path);

/// Canonical YAML form; parse_config(serialize_config(c)) reproduces c.
std::string serialize_config(const ScenarioConfig& c);

}  // namespace fracdiff
