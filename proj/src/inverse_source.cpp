#include "fracdiff/inverse_source.hpp"

#include "fracdiff/error.hpp"
#include "fracdiff/io.hpp"
#include "fracdiff/parallel.hpp"
#include "fracdiff/special_fn.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fracdiff {

namespace {

constexpr double kDiagonalFloor = 1e-10;
constexpr double kConditionCeiling = 1e13;

// I_x(alpha, 1 - alpha) complement, accurate near x = 1.
double beta_tail(double alpha, double x) {
    if (x <= 0.0) return 1.0;
    if (x >= 1.0) return 0.0;
    return boost::math::ibetac(alpha, 1.0 - alpha, x);
}

Eigen::MatrixXd second_difference(std::size_t n) {
    if (n < 3) return Eigen::MatrixXd::Zero(0, static_cast<Eigen::Index>(n));
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n - 2), static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r + 2 < n; ++r) {
        D(r, r) = 1.0;
        D(r, r + 1) = -2.0;
        D(r, r + 2) = 1.0;
    }
    return D;
}

double one_norm(const Eigen::MatrixXd& A) { return A.cwiseAbs().colwise().sum().maxCoeff(); }

const char* name(InverseSolver s) { return s == InverseSolver::Triangular ? "triangular" : "normal-equations"; }
const char* name(Regularization r) { return r == Regularization::None ? "none" : "second-difference"; }

}  // namespace

Series ForwardMap::apply(const Eigen::VectorXd& w) const {
    if (w.size() != matrix.cols()) throw ShapeError("ForwardMap::apply: expected one value per cell");
    const Eigen::VectorXd u = matrix.triangularView<Eigen::Lower>() * w;
    Series out(mesh.size(), 0.0);
    for (Eigen::Index j = 0; j < u.size(); ++j) out[static_cast<std::size_t>(j) + 1] = u(j);
    return out;
}

ForwardMap forward_map(const EigenSystem& es, const Eigen::VectorXd& g, std::size_t x0, const TimeMesh& mesh,
                       double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0,1)");
    if (static_cast<std::size_t>(g.size()) != es.nodes()) throw ShapeError("forward_map: g must live on the grid");
    if (x0 >= es.nodes()) throw DomainError("forward_map: observation node outside the interior");
    if (!mesh.is_uniform()) throw MeshError("forward_map: a uniform mesh is required");
    if (g.cwiseAbs().maxCoeff() == 0.0) throw DegenerateDataError("forward_map: g vanishes identically");
    if (g.maxCoeff() <= 0.0) throw DegenerateDataError("forward_map: g has no positive values");

    const SolutionField v = solve_homogeneous(es, g, mesh, alpha);
    const std::size_t M = mesh.steps();
    ForwardMap fm{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(M)), Series(M + 1),
                  mesh, alpha, x0, g.cwiseAbs().maxCoeff()};
    for (std::size_t j = 0; j <= M; ++j) fm.v_trace[j] = v.values(static_cast<Eigen::Index>(x0), static_cast<Eigen::Index>(j));
    bool positive = false;
    for (std::size_t j = 1; j <= M; ++j) positive = positive || fm.v_trace[j] > 0.0;
    if (!positive) throw DegenerateDataError("forward_map: v(x0, t) <= 0 for all t > 0");

    const double dt = mesh.step();
    std::vector<double> m0(M), m1(M);
    for (std::size_t i = 0; i < M; ++i) {
        const double a = i * dt, b = a + dt;
        m0[i] = (std::pow(b, alpha) - std::pow(a, alpha)) / alpha;
        m1[i] = (std::pow(b, alpha + 1.0) - std::pow(a, alpha + 1.0)) / (alpha + 1.0) - a * m0[i];
    }
    const Series& vt = fm.v_trace;
    for (std::size_t j = 1; j <= M; ++j)
        for (std::size_t i = 0; i < j; ++i) {
            const double vr = vt[j - i], vl = vt[j - i - 1];
            fm.matrix(static_cast<Eigen::Index>(j - 1), static_cast<Eigen::Index>(i)) = vr * m0[i] + (vl - vr) * m1[i] / dt;
        }
    return fm;
}

Eigen::VectorXd cell_values(const DuhamelKernel& mu) {
    const TimeMesh& m = mu.mesh;
    const double a = mu.alpha;
    const std::size_t M = m.steps();
    Eigen::VectorXd w(static_cast<Eigen::Index>(M));
    for (std::size_t i = 0; i < M; ++i) {
        const double lo = m[i], hi = m[i + 1];
        const double weight = (std::pow(hi, a) - std::pow(lo, a)) / a;
        const double integral = mu.singular * weight + 0.5 * (mu.regular[i] + mu.regular[i + 1]) * (hi - lo);
        w(static_cast<Eigen::Index>(i)) = integral / weight;
    }
    return w;
}

Series rho_from_cells(const Eigen::VectorXd& w, const TimeMesh& mesh, double alpha) {
    const std::size_t M = mesh.steps();
    if (static_cast<std::size_t>(w.size()) != M) throw ShapeError("rho_from_cells: expected one value per cell");
    const double ga = gamma_fn(alpha);
    Series rho(M + 1, 0.0);
    rho[0] = ga * w(0);
    parallel_for(M, [&](std::size_t b, std::size_t e) {
        for (std::size_t j = b + 1; j <= e; ++j) {
            const double tj = mesh[j];
            double s = 0.0;
            double upper = beta_tail(alpha, mesh[0] / tj);
            for (std::size_t i = 0; i < j; ++i) {
                const double lower = beta_tail(alpha, mesh[i + 1] / tj);
                s += w(static_cast<Eigen::Index>(i)) * (upper - lower);
                upper = lower;
            }
            rho[j] = ga * s;
        }
    });
    return rho;
}

nlohmann::ordered_json InverseDiagnostics::to_json() const {
    nlohmann::ordered_json j;
    j["solver"] = solver;
    j["regularization"] = regularization;
    j["gamma_reg"] = gamma_reg;
    j["residual_norm"] = residual_norm;
    j["seminorm"] = seminorm;
    j["condition_estimate"] = condition_estimate;
    j["min_diagonal"] = min_diagonal;
    return j;
}

InverseResult reconstruct_rho(const ObservationTrace& trace, const ForwardMap& fm, const InverseConfig& cfg) {
    const std::size_t M = fm.mesh.steps();
    if (trace.values.size() != M + 1) throw ShapeError("reconstruct_rho: trace must be sampled on the mesh");
    if (trace.x0 != fm.x0) throw ShapeError("reconstruct_rho: trace and forward map use different nodes");
    if (!(cfg.gamma_reg >= 0.0)) throw DomainError("reconstruct_rho: gamma_reg must be nonnegative");
    for (double v : trace.values)
        if (!std::isfinite(v)) throw DomainError("reconstruct_rho: trace must be finite");

    Eigen::VectorXd d(static_cast<Eigen::Index>(M));
    for (std::size_t j = 1; j <= M; ++j) d(static_cast<Eigen::Index>(j - 1)) = trace.values[j];

    const Eigen::MatrixXd& F = fm.matrix;
    InverseResult res;
    InverseDiagnostics& diag = res.diagnostics;
    diag.min_diagonal = F.diagonal().minCoeff();
    diag.gamma_reg = cfg.regularization == Regularization::None ? 0.0 : cfg.gamma_reg;
    diag.regularization = name(cfg.regularization);

    const bool triangular = cfg.regularization == Regularization::None && cfg.solver == InverseSolver::Triangular;
    diag.solver = name(triangular ? InverseSolver::Triangular : InverseSolver::NormalEquations);
    if (triangular) {
        // Diagonal entry i divided by the cell moment of s^{alpha-1} averages v(x0, .) over (0, dt).
        double v_near_zero = INFINITY;
        for (std::size_t i = 0; i < M; ++i) {
            const double m0 = (std::pow(fm.mesh[i + 1], fm.alpha) - std::pow(fm.mesh[i], fm.alpha)) / fm.alpha;
            v_near_zero = std::min(v_near_zero, F(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) / m0);
        }
        if (!(v_near_zero > kDiagonalFloor * fm.g_scale)) {
            std::ostringstream os;
            os << "reconstruct_rho: triangular system is singular (v(x0, t1) ~ " << v_near_zero << " against max|g| "
               << fm.g_scale << "); use second-difference regularization";
            throw IllPosedError(os.str());
        }
        const Eigen::MatrixXd inv =
            F.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(F.rows(), F.cols()));
        diag.condition_estimate = one_norm(F) * one_norm(inv);
        if (!(diag.condition_estimate < kConditionCeiling)) {
            std::ostringstream os;
            os << "reconstruct_rho: triangular system condition " << diag.condition_estimate
               << " is too large; use second-difference regularization";
            throw IllPosedError(os.str());
        }
        res.cells = F.triangularView<Eigen::Lower>().solve(d);
    } else {
        Eigen::MatrixXd N = F.transpose() * F;
        if (cfg.regularization == Regularization::SecondDifference) {
            const Eigen::MatrixXd D = second_difference(M);
            N += cfg.gamma_reg * D.transpose() * D;
        }
        const Eigen::LLT<Eigen::MatrixXd> llt(N);
        if (llt.info() != Eigen::Success)
            throw IllPosedError("reconstruct_rho: normal equations are not positive definite; increase gamma_reg");
        const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(N.rows(), N.cols()));
        diag.condition_estimate = one_norm(N) * one_norm(inv);
        res.cells = llt.solve(F.transpose() * d);
    }
    if (!res.cells.allFinite()) throw NumericError("reconstruct_rho: non-finite solution");

    const Eigen::VectorXd r = F.triangularView<Eigen::Lower>() * res.cells - d;
    const double dn = d.norm();
    diag.residual_norm = dn > 0.0 ? r.norm() / dn : r.norm();
    diag.seminorm = (second_difference(M) * res.cells).norm();
    res.rho = rho_from_cells(res.cells, fm.mesh, fm.alpha);
    return res;
}

InverseResult reconstruct_rho(const ObservationTrace& trace, const EigenSystem& es, const Eigen::VectorXd& g,
                              const InverseConfig& cfg, const TimeMesh& mesh, double alpha) {
    return reconstruct_rho(trace, forward_map(es, g, trace.x0, mesh, alpha), cfg);
}

double relative_l2(const Series& approx, const Series& exact, const TimeMesh& mesh) {
    if (approx.size() != mesh.size() || exact.size() != mesh.size()) throw ShapeError("relative_l2: length mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j + 1 < mesh.size(); ++j) {
        const double h = 0.5 * (mesh[j + 1] - mesh[j]);
        num += h * (std::pow(approx[j] - exact[j], 2) + std::pow(approx[j + 1] - exact[j + 1], 2));
        den += h * (exact[j] * exact[j] + exact[j + 1] * exact[j + 1]);
    }
    return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

double l1_norm(const Series& s, const TimeMesh& mesh) {
    if (s.size() != mesh.size()) throw ShapeError("l1_norm: length mismatch");
    double acc = 0.0;
    for (std::size_t j = 0; j + 1 < mesh.size(); ++j)
        acc += 0.5 * (mesh[j + 1] - mesh[j]) * (std::abs(s[j]) + std::abs(s[j + 1]));
    return acc;
}

std::vector<double> gamma_grid(const ForwardMap& fm, double lo_exp, double hi_exp, int count) {
    if (count < 2) throw DomainError("gamma_grid: need at least two points");
    const double scale = fm.matrix.squaredNorm() / static_cast<double>(fm.matrix.rows());
    std::vector<double> out;
    for (int k = 0; k < count; ++k) out.push_back(scale * std::pow(10.0, lo_exp + (hi_exp - lo_exp) * k / (count - 1)));
    return out;
}

SweepResult sweep_regularization(const ObservationTrace& trace, const ForwardMap& fm,
                                 const std::vector<double>& gammas, const std::optional<Series>& rho_true) {
    if (gammas.empty()) throw DomainError("sweep_regularization: empty gamma grid");
    std::vector<InverseResult> results(gammas.size());
    parallel_for(gammas.size(), [&](std::size_t b, std::size_t e) {
        for (std::size_t k = b; k < e; ++k)
            results[k] = reconstruct_rho(trace, fm, {Regularization::SecondDifference, gammas[k], InverseSolver::NormalEquations});
    });
    SweepResult out;
    for (std::size_t k = 0; k < gammas.size(); ++k) {
        SweepPoint p{gammas[k], results[k].diagnostics.residual_norm, results[k].diagnostics.seminorm, std::nullopt};
        if (rho_true) p.error = relative_l2(results[k].rho, *rho_true, fm.mesh);
        out.points.push_back(p);
    }
    if (rho_true) {
        for (std::size_t k = 1; k < out.points.size(); ++k)
            if (*out.points[k].error < *out.points[out.best].error) out.best = k;
    } else {
        // L-curve corner: maximum discrete curvature in (log residual, log seminorm).
        double best_kappa = -INFINITY;
        for (std::size_t k = 1; k + 1 < out.points.size(); ++k) {
            auto xy = [&](std::size_t i) {
                return std::pair{std::log(std::max(out.points[i].residual_norm, 1e-300)),
                                 std::log(std::max(out.points[i].seminorm, 1e-300))};
            };
            const auto [x0, y0] = xy(k - 1);
            const auto [x1, y1] = xy(k);
            const auto [x2, y2] = xy(k + 1);
            const double cross = (x1 - x0) * (y2 - y1) - (y1 - y0) * (x2 - x1);
            const double l = std::hypot(x1 - x0, y1 - y0) * std::hypot(x2 - x1, y2 - y1) * std::hypot(x2 - x0, y2 - y0);
            const double kappa = l > 0.0 ? 2.0 * cross / l : 0.0;
            if (kappa > best_kappa) {
                best_kappa = kappa;
                out.best = k;
            }
        }
    }
    out.best_result = results[out.best];
    return out;
}

ObservationTrace read_trace_csv(const std::string& path, std::size_t x0, TimeMesh* mesh_out) {
    const io::CsvTable t = io::read_csv(path);
    ObservationTrace tr;
    tr.x0 = x0;
    tr.values = t.column("value");
    if (mesh_out) *mesh_out = TimeMesh(t.column("t"));
    return tr;
}

void write_reconstruction_csv(const std::string& path, const TimeMesh& mesh, const InverseResult& r,
                              const ObservationTrace& trace, const ForwardMap& fm,
                              const std::optional<Series>& rho_true) {
    const Series fitted = fm.apply(r.cells);
    Series residual(mesh.size());
    for (std::size_t j = 0; j < mesh.size(); ++j) residual[j] = fitted[j] - trace.values[j];
    std::vector<std::string> header{"t"};
    std::vector<std::vector<double>> cols{mesh.nodes()};
    if (rho_true) {
        header.push_back("rho_true");
        cols.push_back(*rho_true);
    }
    header.insert(header.end(), {"rho_hat", "residual"});
    cols.push_back(r.rho);
    cols.push_back(residual);
    io::write_csv(path, header, cols);
}

}  // namespace fracdiff
