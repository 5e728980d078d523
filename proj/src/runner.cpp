#include "fracdiff/runner.hpp"

#include "fracdiff/duhamel.hpp"
#include "fracdiff/error.hpp"
#include "fracdiff/expr.hpp"
#include "fracdiff/inverse_source.hpp"
#include "fracdiff/nonlocal_op.hpp"
#include "fracdiff/principle_lab.hpp"
#include "fracdiff/spectral_core.hpp"
#include "fracdiff/timestep_oracle.hpp"

#include <Eigen/Core>
#include <boost/version.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <sstream>

#ifndef FRACDIFF_VERSION
#define FRACDIFF_VERSION "0.0.0"
#endif

namespace fracdiff {

namespace fs = std::filesystem;
using io::Json;

std::string fracdiff_version() { return FRACDIFF_VERSION; }

namespace {

class Outputs {
public:
    explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

    std::string path(const std::string& name) {
        names_.push_back(name);
        return (dir_ / name).string();
    }

    void csv(const std::string& name, const std::vector<std::string>& header,
             const std::vector<std::vector<double>>& cols) {
        io::write_csv(path(name), header, cols);
    }

    void json(const std::string& name, const Json& j) { io::write_json(path(name), j); }

    Json listing() const {
        Json out = Json::array();
        for (const auto& n : names_) {
            const std::string bytes = io::read_text((dir_ / n).string());
            out.push_back({{"file", n}, {"bytes", bytes.size()}, {"sha256", io::sha256_hex(bytes)}});
        }
        return out;
    }

private:
    fs::path dir_;
    std::vector<std::string> names_;
};

struct Context {
    const ScenarioConfig& cfg;
    std::uint64_t seed;
    int refine;
    Outputs& out;
    Json summary = Json::object();
    bool checks_passed = true;
};

int scale_levels(int base, int refine) { return base << refine; }

// 0 keeps the library default; otherwise the count follows the grid under refinement.
std::size_t mode_count(int modes, int refine, std::size_t nodes) {
    if (modes <= 0) return 0;
    return std::min(static_cast<std::size_t>(scale_levels(modes, refine)), nodes);
}

Grid build_grid(const GridBlock& g, int refine) {
    if (g.n == 1) {
        const double a = g.domain[0], b = g.domain[1];
        int nodes = g.nodes;
        if (g.spacing > 0.0) nodes = static_cast<int>(std::lround((b - a) / g.spacing)) - 1;
        nodes = scale_levels(nodes + 1, refine) - 1;
        return Grid::interval(a, b, nodes);
    }
    const double R = g.domain[2];
    int nodes = g.nodes;
    if (g.spacing > 0.0) nodes = static_cast<int>(std::lround(2.0 * R / g.spacing)) - 1;
    nodes = scale_levels(nodes + 1, refine) - 1;
    return Grid::ball({g.domain[0], g.domain[1]}, R, nodes);
}

KernelSpec build_kernel(const KernelBlock& k, int n) {
    if (k.type == "anisotropic") {
        const Expression a = Expression::parse(k.angular, {"theta"});
        return KernelSpec(Anisotropic{[a](double th) { return a(th); }, k.beta, k.Lambda, k.angular}, n);
    }
    return KernelSpec::fractional_laplacian(k.beta, n);
}

TimeMesh build_mesh(const TimeBlock& t, int refine) {
    return TimeMesh::uniform(t.T, static_cast<std::size_t>(scale_levels(t.steps, refine)));
}

Eigen::VectorXd spatial_field(const std::string& expr, const Grid& grid) {
    const Expression e = Expression::parse(expr, grid.dimension() == 2 ? std::vector<std::string>{"x", "y"}
                                                                       : std::vector<std::string>{"x"});
    Eigen::VectorXd v(static_cast<Eigen::Index>(grid.size()));
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Point p = grid.point(i);
        v(static_cast<Eigen::Index>(i)) =
            grid.dimension() == 2 ? e(std::vector<double>{p[0], p[1]}) : e(std::vector<double>{p[0]});
    }
    return v;
}

Eigen::VectorXd source_g(const SourceBlock& s, const Grid& grid, int refine) {
    if (!s.g_nodes.empty()) {
        if (refine > 0) throw ConfigError("g_nodes fixes the grid; --refine needs g as an expression");
        if (s.g_nodes.size() != grid.size()) {
            std::ostringstream os;
            os << "g_nodes has " << s.g_nodes.size() << " entries but the grid has " << grid.size() << " nodes";
            throw ShapeError(os.str());
        }
        return Eigen::Map<const Eigen::VectorXd>(s.g_nodes.data(), static_cast<Eigen::Index>(s.g_nodes.size()));
    }
    if (s.g.empty()) return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.size()));
    return spatial_field(s.g, grid);
}

Eigen::VectorXd source_u0(const SourceBlock& s, const Grid& grid) {
    if (s.u0.empty()) return Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.size()));
    return spatial_field(s.u0, grid);
}

Series source_rho(const SourceBlock& s, const TimeMesh& mesh) {
    Series rho(mesh.size(), 0.0);
    if (s.rho.empty()) return rho;
    const Expression e = Expression::parse(s.rho, {"t"});
    for (std::size_t j = 0; j < mesh.size(); ++j) rho[j] = e(mesh.nodes()[j]);
    return rho;
}

std::size_t nearest_node(const Grid& grid, const std::vector<double>& x) {
    std::size_t best = 0;
    double dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Point p = grid.point(i);
        const double d = std::hypot(p[0] - x[0], grid.dimension() == 2 ? p[1] - x[1] : 0.0);
        if (d < dist) {
            dist = d;
            best = i;
        }
    }
    return best;
}

Json point_json(const Point& p, int n) {
    return n == 2 ? Json::array({p[0], p[1]}) : Json::array({p[0]});
}

// u at the time levels M/4, M/2, M plus coordinates, one row per node.
void write_snapshots(Outputs& out, const std::string& name, const SolutionField& u) {
    const std::size_t M = u.mesh.steps();
    std::vector<std::string> header{"x"};
    if (u.grid.dimension() == 2) header.push_back("y");
    std::vector<std::vector<double>> cols(header.size());
    for (std::size_t i = 0; i < u.grid.size(); ++i) {
        const Point p = u.grid.point(i);
        for (std::size_t d = 0; d < header.size(); ++d) cols[d].push_back(p[d]);
    }
    for (std::size_t j : {M / 4, M / 2, M}) {
        header.push_back("u(t=" + io::format_double(u.mesh.nodes()[j]) + ")");
        const Eigen::VectorXd c = u.at(j);
        cols.emplace_back(c.data(), c.data() + c.size());
    }
    out.csv(name, header, cols);
}

void write_field(Outputs& out, const std::string& stem, const SolutionField& u) {
    write_snapshots(out, stem + "_snapshots.csv", u);
    const std::string bin = out.path(stem + ".bin");
    const std::string hdr = out.path(stem + ".json");
    export_binary(u, bin, hdr);
}

struct Solved {
    std::optional<SolutionField> spectral;
    std::optional<SolutionField> l1;
};

Solved forward(Context& cx, const AssembledOperator& op, const Eigen::VectorXd& u0, const SourceSpec& src,
               const TimeMesh& mesh) {
    const std::string& solver = cx.cfg.run.solver;
    const double alpha = cx.cfg.time.alpha;
    Solved s;
    if (solver == "spectral" || solver == "both") {
        const EigenSystem es = eig(op, mode_count(cx.cfg.run.modes, cx.refine, op.size()));
        s.spectral = solve_spectral(es, u0, src, mesh, alpha);
        cx.summary["modes"] = es.count();
        cx.summary["eigen_residual"] = es.max_residual;
    }
    if (solver == "l1" || solver == "both") s.l1 = l1_solve_full(op, separable_forcing(src, mesh), u0, mesh, alpha);
    return s;
}

Json field_stats(const SolutionField& u) {
    return {{"min", u.values.minCoeff()}, {"max", u.values.maxCoeff()}, {"l2_qt", l2_qt(u)}};
}

void run_forward(Context& cx) {
    const ScenarioConfig& c = cx.cfg;
    const Grid grid = build_grid(c.grid, cx.refine);
    const AssembledOperator op = assemble(build_kernel(c.kernel, c.grid.n), grid);
    const TimeMesh mesh = build_mesh(c.time, cx.refine);
    const Eigen::VectorXd u0 = source_u0(c.source, grid);
    SourceSpec src{source_rho(c.source, mesh), source_g(c.source, grid, cx.refine)};
    if (c.run.type == RunType::ForwardHomogeneous) src = SourceSpec{Series(mesh.size(), 0.0), Eigen::VectorXd::Zero(u0.size())};

    const Solved s = forward(cx, op, u0, src, mesh);
    cx.summary["nodes"] = grid.size();
    cx.summary["steps"] = mesh.steps();
    if (s.spectral) {
        write_field(cx.out, "solution_spectral", *s.spectral);
        cx.summary["spectral"] = field_stats(*s.spectral);
    }
    if (s.l1) {
        write_field(cx.out, "solution_l1", *s.l1);
        cx.summary["l1"] = field_stats(*s.l1);
    }
    if (s.spectral && s.l1) cx.summary["cross_solver_rel_l2"] = rel_l2_qt(*s.l1, *s.spectral);
    cx.out.json("summary.json", cx.summary);
}

void run_duhamel(Context& cx) {
    const ScenarioConfig& c = cx.cfg;
    const Grid grid = build_grid(c.grid, cx.refine);
    const AssembledOperator op = assemble(build_kernel(c.kernel, c.grid.n), grid);
    const TimeMesh mesh = build_mesh(c.time, cx.refine);
    const double alpha = c.time.alpha;
    const EigenSystem es = eig(op, mode_count(c.run.modes, cx.refine, op.size()));
    const Series rho = source_rho(c.source, mesh);
    const Eigen::VectorXd g = source_g(c.source, grid, cx.refine);

    const SolutionField v = solve_homogeneous(es, g, mesh, alpha);
    const DuhamelKernel mu = mu_from_rho(rho, mesh, alpha);
    const SolutionField u_conv = convolve_representation(mu, v);
    const SolutionField u_direct = solve_inhomogeneous(es, SourceSpec{rho, g}, mesh, alpha);
    const double rel = rel_l2_qt(u_conv, u_direct);
    const double tol = 1e-3;
    cx.checks_passed = rel <= tol;

    export_mu_csv(mu, cx.out.path("mu.csv"));
    write_field(cx.out, "u_duhamel", u_conv);
    cx.out.json("duhamel.json", {{"nodes", grid.size()},
                                 {"steps", mesh.steps()},
                                 {"modes", es.count()},
                                 {"rel_l2_qt", rel},
                                 {"tolerance", tol},
                                 {"pass", cx.checks_passed},
                                 {"mu_l1", mu_l1_norm(mu)},
                                 {"mu_l1_bound", mu_l1_bound(mu)},
                                 {"mu_singular", mu.singular}});
}

void run_inverse(Context& cx) {
    const ScenarioConfig& c = cx.cfg;
    const RunBlock& r = c.run;
    const Grid grid = build_grid(c.grid, cx.refine);
    const AssembledOperator op = assemble(build_kernel(c.kernel, c.grid.n), grid);
    const double alpha = c.time.alpha;
    const EigenSystem es = eig(op, mode_count(r.modes, cx.refine, op.size()));
    const Eigen::VectorXd g = source_g(c.source, grid, cx.refine);
    const std::size_t x0 = nearest_node(grid, r.x0);

    TimeMesh mesh = build_mesh(c.time, cx.refine);
    ObservationTrace trace;
    std::optional<Series> rho_true;
    if (!c.source.trace.empty()) {
        trace = read_trace_csv(c.source.trace, x0, &mesh);
        if (!c.source.rho.empty()) rho_true = source_rho(c.source, mesh);
    } else {
        rho_true = source_rho(c.source, mesh);
        const SolutionField u = solve_inhomogeneous(es, SourceSpec{*rho_true, g}, mesh, alpha);
        trace.x0 = x0;
        const Eigen::VectorXd row = u.values.row(static_cast<Eigen::Index>(x0));
        trace.values.assign(row.data(), row.data() + row.size());
    }
    if (r.noise > 0.0) {
        std::mt19937_64 rng(cx.seed);
        std::normal_distribution<double> n01;
        for (double& v : trace.values) v *= 1.0 + r.noise * n01(rng);
        trace.noise_level = r.noise;
    }

    const ForwardMap fm = forward_map(es, g, x0, mesh, alpha);
    Json diag = Json::object();
    InverseResult res;
    if (r.regularization == "sweep") {
        const SweepResult sw = sweep_regularization(trace, fm, gamma_grid(fm, r.sweep_lo, r.sweep_hi, r.sweep_count),
                                                    rho_true);
        res = sw.best_result;
        std::vector<std::vector<double>> cols(4);
        for (const SweepPoint& p : sw.points) {
            cols[0].push_back(p.gamma_reg);
            cols[1].push_back(p.residual_norm);
            cols[2].push_back(p.seminorm);
            cols[3].push_back(p.error.value_or(std::nan("")));
        }
        cx.out.csv("sweep.csv", {"gamma", "residual", "seminorm", "error"}, cols);
        diag["selection"] = rho_true ? "minimal-error" : "l-curve";
    } else {
        InverseConfig ic;
        if (r.regularization == "second-difference") {
            ic.regularization = Regularization::SecondDifference;
            ic.solver = InverseSolver::NormalEquations;
            ic.gamma_reg = r.gamma * fm.matrix.squaredNorm() / static_cast<double>(mesh.steps());
        }
        res = reconstruct_rho(trace, fm, ic);
    }

    io::write_csv(cx.out.path("trace.csv"), {"t", "value"}, {mesh.nodes(), trace.values});
    write_reconstruction_csv(cx.out.path("rho_reconstruction.csv"), mesh, res, trace, fm, rho_true);
    diag["inverse"] = res.diagnostics.to_json();
    diag["x0_node"] = x0;
    diag["x0"] = point_json(grid.point(x0), c.grid.n);
    diag["noise"] = r.noise;
    diag["rho_hat_l1"] = l1_norm(res.rho, mesh);
    if (rho_true) diag["relative_l2_error"] = relative_l2(res.rho, *rho_true, mesh);
    cx.out.json("diagnostics.json", diag);
}

void run_harnack(Context& cx) {
    const ScenarioConfig& c = cx.cfg;
    const RunBlock& r = c.run;
    const Grid grid = build_grid(c.grid, cx.refine);
    const TimeMesh mesh = build_mesh(c.time, cx.refine);
    HarnackBoxes boxes;
    boxes.t0 = r.t0;
    boxes.x0 = nearest_node(grid, r.x0);
    boxes.r = r.r;
    boxes.delta = r.delta;
    boxes.tau = r.tau;
    boxes.eta = r.eta;
    boxes.alpha = c.time.alpha;
    boxes.beta = c.kernel.beta;
    // Geometry is checked before the solve so a coarse grid fails fast.
    sample_boxes(boxes, grid, mesh);

    const AssembledOperator op = assemble(build_kernel(c.kernel, c.grid.n), grid);
    const Eigen::VectorXd u0 = source_u0(c.source, grid);
    const SourceSpec src{source_rho(c.source, mesh), source_g(c.source, grid, cx.refine)};
    double f_sup = 0.0;
    for (double v : src.rho) f_sup = std::max(f_sup, std::abs(v));
    f_sup *= src.g.size() ? src.g.cwiseAbs().maxCoeff() : 0.0;

    const Solved s = forward(cx, op, u0, src, mesh);
    Json reports = Json::array();
    Json ratios = Json::object();
    for (const auto& [name, u] : {std::pair{"spectral", &s.spectral}, std::pair{"l1", &s.l1}}) {
        if (!*u) continue;
        const PrincipleReport rep = harnack_ratio(**u, boxes, f_sup, c.id + "/" + name);
        cx.checks_passed = cx.checks_passed && rep.passed();
        reports.push_back(rep.to_json());
        ratios[name] = rep.harnack_ratio ? Json(*rep.harnack_ratio) : Json(nullptr);
    }
    cx.out.json("harnack.json", {{"nodes", grid.size()},
                                 {"steps", mesh.steps()},
                                 {"x0_node", boxes.x0},
                                 {"x0", point_json(grid.point(boxes.x0), c.grid.n)},
                                 {"time_scale", boxes.time_scale()},
                                 {"minus_window", {boxes.minus_begin(), boxes.minus_end()}},
                                 {"plus_window", {boxes.plus_begin(), boxes.plus_end()}},
                                 {"f_sup", f_sup},
                                 {"ratio", ratios},
                                 {"reports", reports}});
}

void run_principles(Context& cx) {
    const ScenarioConfig& c = cx.cfg;
    const Grid grid = build_grid(c.grid, cx.refine);
    const AssembledOperator op = assemble(build_kernel(c.kernel, c.grid.n), grid);
    const TimeMesh mesh = build_mesh(c.time, cx.refine);
    const Eigen::VectorXd u0 = source_u0(c.source, grid);
    const SourceSpec src{source_rho(c.source, mesh), source_g(c.source, grid, cx.refine)};
    const Solved s = forward(cx, op, u0, src, mesh);

    bool nonneg_data = u0.size() == 0 || u0.minCoeff() >= 0.0;
    const double f_scale = src.g.size() ? src.g.cwiseAbs().maxCoeff() : 0.0;
    if (f_scale > 0.0) nonneg_data = nonneg_data && src.g.minCoeff() >= 0.0 &&
                                     *std::min_element(src.rho.begin(), src.rho.end()) >= 0.0;
    const double tol = default_weak_tolerance(u0, 1e-12 * (1.0 + f_scale));

    std::vector<PrincipleReport> reports;
    for (const auto& [name, u] : {std::pair{"spectral", &s.spectral}, std::pair{"l1", &s.l1}}) {
        if (!*u) continue;
        reports.push_back(check_weak_max(**u, tol, c.id + "/" + name + "/weak"));
        if (nonneg_data && u0.size() && u0.maxCoeff() > 0.0)
            reports.push_back(check_strong_max(**u, {mesh.steps() / 2}, 0.0, c.id + "/" + name + "/strong"));
    }
    Json arr = Json::array();
    for (const auto& rep : reports) {
        if (nonneg_data) cx.checks_passed = cx.checks_passed && rep.passed();
        arr.push_back(rep.to_json());
    }
    cx.out.json("principles.json", {{"nodes", grid.size()},
                                    {"steps", mesh.steps()},
                                    {"nonnegative_data", nonneg_data},
                                    {"weak_tolerance", tol},
                                    {"reports", arr}});
    io::write_text(cx.out.path("principles.txt"), summary_table(reports));
}

void run_validate_kernel(Context& cx) {
    const ScenarioConfig& c = cx.cfg;
    const Grid grid = build_grid(c.grid, cx.refine);
    const KernelSpec k = build_kernel(c.kernel, c.grid.n);
    std::vector<Probe> probes;
    for (const auto& p : c.run.probes)
        probes.push_back(c.grid.n == 2 ? Probe{{p[0], p[1]}, p[2]} : Probe{{p[0], 0.0}, p[1]});
    ValidationOptions vo;
    vo.directions = c.run.directions;
    vo.seed = cx.seed;
    const KernelValidation v = validate_kernel_class(k, grid, probes, vo);
    cx.checks_passed = v.ok();

    Json pr = Json::array();
    for (const ProbeResult& p : v.probes)
        pr.push_back({{"x0", point_json(p.probe.x0, c.grid.n)},
                      {"rho", p.probe.rho},
                      {"integral", p.integral},
                      {"ratio", p.ratio},
                      {"ok", p.ok}});
    Json j{{"kernel", k.describe()}, {"Lambda", v.Lambda}, {"upper_ok", v.upper_ok}, {"probes", pr}};
    if (v.has_symbol_bound)
        j["symbol"] = {{"directions", v.directions},
                       {"inf", v.symbol_inf},
                       {"sup", v.symbol_sup},
                       {"lower_bound", 1.0 / c.kernel.Lambda},
                       {"ok", v.symbol_ok}};
    j["comparability"] = {{"min", v.comparability_min},
                          {"max", v.comparability_max},
                          {"samples", v.comparability_samples}};
    j["pass"] = v.ok();
    cx.out.json("kernel_validation.json", j);
}

void run_eig(Context& cx) {
    const ScenarioConfig& c = cx.cfg;
    const Grid grid = build_grid(c.grid, cx.refine);
    const AssembledOperator op = assemble(build_kernel(c.kernel, c.grid.n), grid);
    const EigenSystem es = eig(op, mode_count(c.run.modes, cx.refine, op.size()));
    const double p = 2.0 * c.kernel.beta / c.grid.n;
    std::vector<std::vector<double>> cols(3);
    for (std::size_t k = 0; k < es.count(); ++k) {
        const double lam = es.lambdas(static_cast<Eigen::Index>(k));
        cols[0].push_back(static_cast<double>(k + 1));
        cols[1].push_back(lam);
        cols[2].push_back(lam * std::pow(static_cast<double>(k + 1), -p));
    }
    cx.out.csv("eigenvalues.csv", {"k", "lambda", "lambda_scaled"}, cols);
    const std::string bin = cx.out.path("operator.bin");
    const std::string hdr = cx.out.path("operator.json");
    export_matrix(op, bin, hdr);

    const std::size_t K = es.count();
    Json plateau = nullptr;
    if (K >= 8) {
        double lo = INFINITY, hi = -INFINITY;
        for (std::size_t k = K / 8; k <= K / 4; ++k) {
            lo = std::min(lo, cols[2][k - 1]);
            hi = std::max(hi, cols[2][k - 1]);
        }
        plateau = {{"k_range", {K / 8, K / 4}}, {"min", lo}, {"max", hi}, {"variation", (hi - lo) / lo}};
    }
    cx.out.json("eig.json", {{"nodes", grid.size()},
                             {"modes", K},
                             {"max_residual", es.max_residual},
                             {"orthonormality_defect", es.orthonormality_defect},
                             {"lambda_1", K ? es.lambdas(0) : 0.0},
                             {"plateau", plateau}});
}

void run_inequalities(Context& cx) {
    const PrincipleReport rep =
        check_appendix_inequalities(static_cast<std::size_t>(cx.cfg.run.samples), cx.seed);
    cx.checks_passed = rep.passed();
    cx.out.json("inequalities.json", rep.to_json());
    io::write_text(cx.out.path("inequalities.txt"), summary_table({rep}));
}

Json versions() {
    std::ostringstream eigen, boost;
    eigen << EIGEN_WORLD_VERSION << "." << EIGEN_MAJOR_VERSION << "." << EIGEN_MINOR_VERSION;
    boost << BOOST_VERSION / 100000 << "." << BOOST_VERSION / 100 % 1000 << "." << BOOST_VERSION % 100;
    return {{"fracdiff", fracdiff_version()}, {"eigen", eigen.str()}, {"boost", boost.str()}, {"compiler", __VERSION__}};
}

Json base_manifest(const std::string& label, const RunOptions& opt) {
    return {{"tool", "fracdiff"}, {"config", label}, {"refine", opt.refine}, {"versions", versions()}};
}

void finish(RunOutcome& r, const fs::path& dir, double wall) {
    r.manifest["exit_code"] = r.exit_code;
    r.manifest["wall_time_s"] = wall;
    io::write_json((dir / "manifest.json").string(), r.manifest);
}

RunOutcome run_impl(const ScenarioConfig& cfg, const RunOptions& opt, const std::optional<std::string>& raw) {
    const auto t_start = std::chrono::steady_clock::now();
    const fs::path dir(opt.out_dir);
    fs::create_directories(dir);
    RunOutcome res;
    res.manifest = base_manifest(opt.config_label, opt);
    const std::string canonical = serialize_config(cfg);
    const std::uint64_t seed = opt.seed.value_or(cfg.seed);
    res.manifest["scenario"] = cfg.id;
    res.manifest["run_type"] = to_string(cfg.run.type);
    res.manifest["inputs"] = {{"config_sha256", io::sha256_hex(raw.value_or(canonical))},
                              {"canonical_sha256", io::sha256_hex(canonical)}};
    res.manifest["seed"] = seed;

    Outputs out(dir);
    Context cx{cfg, seed, opt.refine, out};
    try {
        if (opt.refine < 0 || opt.refine > 6) throw ConfigError("refine must lie in 0..6");
        switch (cfg.run.type) {
            case RunType::ForwardHomogeneous:
            case RunType::ForwardInhomogeneous: run_forward(cx); break;
            case RunType::DuhamelCheck: run_duhamel(cx); break;
            case RunType::Inverse: run_inverse(cx); break;
            case RunType::Harnack: run_harnack(cx); break;
            case RunType::Principles: run_principles(cx); break;
            case RunType::ValidateKernel: run_validate_kernel(cx); break;
            case RunType::Eig: run_eig(cx); break;
            case RunType::Inequalities: run_inequalities(cx); break;
        }
        res.exit_code = cx.checks_passed ? kExitOk : kExitChecksFailed;
        res.manifest["status"] = cx.checks_passed ? "ok" : "checks-failed";
        res.manifest["error"] = nullptr;
    } catch (const Error& e) {
        res.exit_code = e.kind() == "config" ? kExitConfig : kExitModuleError;
        res.manifest["status"] = "error";
        Json err{{"kind", e.kind()}, {"message", e.what()}};
        if (const auto* acc = dynamic_cast<const AccuracyError*>(&e)) err["achieved_bound"] = acc->achieved_bound();
        res.manifest["error"] = err;
    } catch (const std::exception& e) {
        res.exit_code = kExitInternal;
        res.manifest["status"] = "error";
        res.manifest["error"] = {{"kind", "internal"}, {"message", e.what()}};
    }
    res.manifest["outputs"] = out.listing();
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    finish(res, dir, wall);
    return res;
}

}  // namespace

RunOutcome run_scenario(const ScenarioConfig& cfg, const RunOptions& opt) { return run_impl(cfg, opt, std::nullopt); }

RunOutcome run_config_text(const std::string& text, const RunOptions& opt) {
    const ParseResult pr = parse_config(text);
    if (pr.ok()) return run_impl(*pr.config, opt, text);

    const fs::path dir(opt.out_dir);
    fs::create_directories(dir);
    RunOutcome res;
    res.exit_code = kExitConfig;
    res.manifest = base_manifest(opt.config_label, opt);
    res.manifest["inputs"] = {{"config_sha256", io::sha256_hex(text)}};
    res.manifest["status"] = "error";
    Json diags = Json::array();
    std::string first;
    for (const Diagnostic& d : pr.diagnostics) {
        diags.push_back({{"line", d.line}, {"column", d.column}, {"message", d.message}});
        if (first.empty()) first = d.str();
    }
    res.manifest["error"] = {{"kind", "config"}, {"message", first}, {"diagnostics", diags}};
    res.manifest["outputs"] = Json::array();
    finish(res, dir, 0.0);
    return res;
}

RunOutcome run_config_file(const std::string& path, RunOptions opt) {
    if (opt.config_label.empty()) opt.config_label = path;
    std::string text;
    try {
        text = io::read_text(path);
    } catch (const Error& e) {
        const fs::path dir(opt.out_dir);
        fs::create_directories(dir);
        RunOutcome res;
        res.exit_code = kExitConfig;
        res.manifest = base_manifest(opt.config_label, opt);
        res.manifest["status"] = "error";
        res.manifest["error"] = {{"kind", "config"}, {"message", std::string("cannot read config: ") + e.what()}};
        res.manifest["outputs"] = Json::array();
        finish(res, dir, 0.0);
        return res;
    }
    return run_config_text(text, opt);
}

}  // namespace fracdiff
