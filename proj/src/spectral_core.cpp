#include "fracdiff/spectral_core.hpp"

#include "fracdiff/error.hpp"
#include "fracdiff/io.hpp"
#include "fracdiff/parallel.hpp"
#include "fracdiff/special_fn.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fracdiff {

namespace {

constexpr double kResidualTol = 1e-8;
constexpr double kOrthoTol = 1e-10;

void check_node_vector(const EigenSystem& es, const Eigen::VectorXd& v, const char* what) {
    if (static_cast<std::size_t>(v.size()) != es.nodes())
        throw ShapeError(std::string(what) + ": expected " + std::to_string(es.nodes()) + " node values, got " +
                         std::to_string(v.size()));
}

// Phi_0(tau) = tau^a E_{a,a+1}(-lambda tau^a) and Phi_1(tau) = tau^{a+1} E_{a,a+2}(-lambda tau^a),
// the first two primitives of tau^{a-1} E_{a,a}(-lambda tau^a) vanishing at 0.
struct Primitives {
    double p0, p1;
};

Primitives primitives(double lambda, double alpha, double tau) {
    if (tau <= 0.0) return {0.0, 0.0};
    const double ta = std::pow(tau, alpha);
    const double z = -lambda * ta;
    return {ta * mittag_leffler({alpha, alpha + 1.0}, z), ta * tau * mittag_leffler({alpha, alpha + 2.0}, z)};
}

// Weights of rho_i (P) and rho_{i+1} (Q) for the cell [s_i, s_{i+1}] seen
// from time t: tau_a = t - s_i, tau_b = t - s_{i+1}.
void cell_weights(const Primitives& a, const Primitives& b, double dt, double& P, double& Q) {
    Q = (a.p1 - b.p1 - dt * b.p0) / dt;
    P = (a.p0 - b.p0) - Q;
}

}  // namespace

std::size_t default_mode_count(std::size_t nodes) { return std::min<std::size_t>(nodes, 256); }

EigenSystem EigenSystem::truncated(std::size_t K) const {
    if (K == 0 || K > count()) throw DomainError("truncated: mode count out of range");
    EigenSystem e{lambdas.head(K), phis.leftCols(K), grid, 0.0, 0.0};
    e.max_residual = max_residual;
    e.orthonormality_defect = orthonormality_defect;
    return e;
}

EigenSystem eig(const AssembledOperator& op, std::size_t K) {
    const std::size_t N = op.size();
    if (K == 0) K = default_mode_count(N);
    if (K > N) throw DomainError("eig: requested " + std::to_string(K) + " modes from " + std::to_string(N) + " nodes");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(op.matrix);
    if (solver.info() != Eigen::Success) throw NumericError("eig: symmetric eigensolver did not converge");
    const Eigen::VectorXd lam = solver.eigenvalues().head(K);
    const Eigen::MatrixXd V = solver.eigenvectors().leftCols(K);
    if (!(lam(0) > 0.0)) throw NumericError("eig: smallest eigenvalue is not positive");

    EigenSystem es{lam, V / std::sqrt(op.grid.cell_volume()), op.grid, 0.0, 0.0};
    const Eigen::MatrixXd R = op.matrix * V - V * lam.asDiagonal();
    for (std::size_t k = 0; k < K; ++k)
        es.max_residual = std::max(es.max_residual, R.col(k).norm() / lam(k));
    es.orthonormality_defect = (V.transpose() * V - Eigen::MatrixXd::Identity(K, K)).cwiseAbs().maxCoeff();
    if (es.max_residual > kResidualTol) {
        std::ostringstream os;
        os << "eig: eigenpair residual " << es.max_residual << " exceeds " << kResidualTol;
        throw NumericError(os.str());
    }
    if (es.orthonormality_defect > kOrthoTol) throw NumericError("eig: eigenvectors lost orthonormality");
    return es;
}

Eigen::VectorXd eigenvalues(const AssembledOperator& op) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(op.matrix, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw NumericError("eigenvalues: solver did not converge");
    return solver.eigenvalues();
}

Eigen::VectorXd project(const EigenSystem& es, const Eigen::VectorXd& field) {
    check_node_vector(es, field, "project");
    return es.grid.cell_volume() * (es.phis.transpose() * field);
}

double parseval_defect(const EigenSystem& es, const Eigen::VectorXd& field, std::size_t K) {
    if (K > es.count()) throw DomainError("parseval_defect: K exceeds the retained modes");
    const Eigen::VectorXd c = project(es, field);
    return es.grid.cell_volume() * field.squaredNorm() - c.head(K).squaredNorm();
}

SolutionField solve_homogeneous(const EigenSystem& es, const Eigen::VectorXd& u0, const TimeMesh& mesh,
                                double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in (0,1]");
    check_node_vector(es, u0, "solve_homogeneous");
    if (!u0.allFinite()) throw DomainError("solve_homogeneous: initial data is not finite");
    const std::size_t K = es.count();
    const std::size_t M = mesh.size();
    const Eigen::VectorXd c = project(es, u0);
    Eigen::MatrixXd modal(K, M);
    parallel_for(K, [&](std::size_t b, std::size_t e) {
        for (std::size_t k = b; k < e; ++k) {
            modal(k, 0) = c(k);
            for (std::size_t j = 1; j < M; ++j)
                modal(k, j) = c(k) * mittag_leffler({alpha, 1.0}, -es.lambdas(k) * std::pow(mesh[j], alpha));
        }
    });
    return SolutionField{es.phis * modal, mesh, es.grid, K};
}

Series modal_source_response(double lambda, const Series& rho, const TimeMesh& mesh, double alpha) {
    const std::size_t M = mesh.size();
    if (rho.size() != M) throw ShapeError("modal_source_response: rho must be sampled on the mesh");
    Series w(M, 0.0);
    if (mesh.is_uniform()) {
        const double dt = mesh.step();
        std::vector<Primitives> prim(M);
        for (std::size_t d = 0; d < M; ++d) prim[d] = primitives(lambda, alpha, d * dt);
        std::vector<double> P(M), Q(M);
        for (std::size_t d = 1; d < M; ++d) cell_weights(prim[d], prim[d - 1], dt, P[d], Q[d]);
        for (std::size_t j = 1; j < M; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < j; ++i) s += P[j - i] * rho[i] + Q[j - i] * rho[i + 1];
            w[j] = s;
        }
        return w;
    }
    for (std::size_t j = 1; j < M; ++j) {
        double s = 0.0;
        Primitives prev = primitives(lambda, alpha, mesh[j] - mesh[0]);
        for (std::size_t i = 0; i < j; ++i) {
            const Primitives next = primitives(lambda, alpha, mesh[j] - mesh[i + 1]);
            double P, Q;
            cell_weights(prev, next, mesh[i + 1] - mesh[i], P, Q);
            s += P * rho[i] + Q * rho[i + 1];
            prev = next;
        }
        w[j] = s;
    }
    return w;
}

SolutionField solve_inhomogeneous(const EigenSystem& es, const SourceSpec& src, const TimeMesh& mesh, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in (0,1]");
    check_node_vector(es, src.g, "solve_inhomogeneous");
    if (src.rho.size() != mesh.size()) throw ShapeError("solve_inhomogeneous: rho must be sampled on the mesh");
    const std::size_t K = es.count();
    const std::size_t M = mesh.size();
    const Eigen::VectorXd gk = project(es, src.g);
    Eigen::MatrixXd modal = Eigen::MatrixXd::Zero(K, M);
    const bool zero_rho = std::all_of(src.rho.begin(), src.rho.end(), [](double r) { return r == 0.0; });
    if (!zero_rho) {
        parallel_for(K, [&](std::size_t b, std::size_t e) {
            for (std::size_t k = b; k < e; ++k) {
                if (gk(k) == 0.0) continue;
                const Series w = modal_source_response(es.lambdas(k), src.rho, mesh, alpha);
                for (std::size_t j = 0; j < M; ++j) modal(k, j) = gk(k) * w[j];
            }
        });
    }
    return SolutionField{es.phis * modal, mesh, es.grid, K};
}

SolutionField solve_spectral(const EigenSystem& es, const Eigen::VectorXd& u0, const SourceSpec& src,
                             const TimeMesh& mesh, double alpha) {
    SolutionField u = solve_homogeneous(es, u0, mesh, alpha);
    u.values += solve_inhomogeneous(es, src, mesh, alpha).values;
    return u;
}

double grid_norm(const Grid& g, const Eigen::VectorXd& v) { return std::sqrt(g.cell_volume() * v.squaredNorm()); }

namespace {

double l2_qt_of(const Eigen::MatrixXd& values, const Grid& grid, const TimeMesh& mesh) {
    const double w = grid.cell_volume();
    double s = 0.0;
    for (std::size_t j = 0; j + 1 < mesh.size(); ++j) {
        const double dt = mesh[j + 1] - mesh[j];
        s += 0.5 * dt * w * (values.col(j).squaredNorm() + values.col(j + 1).squaredNorm());
    }
    return std::sqrt(s);
}

}  // namespace

double l2_qt(const SolutionField& u) { return l2_qt_of(u.values, u.grid, u.mesh); }

double rel_l2_qt(const SolutionField& a, const SolutionField& b) {
    if (a.values.rows() != b.values.rows() || a.values.cols() != b.values.cols())
        throw ShapeError("rel_l2_qt: fields differ in shape");
    const double nb = l2_qt(b);
    const double d = l2_qt_of(a.values - b.values, b.grid, b.mesh);
    return nb > 0.0 ? d / nb : d;
}

void export_csv(const SolutionField& u, const std::string& path) {
    const std::size_t N = static_cast<std::size_t>(u.values.rows());
    const std::size_t M = u.mesh.size();
    std::vector<double> t, node, value;
    t.reserve(N * M);
    node.reserve(N * M);
    value.reserve(N * M);
    for (std::size_t j = 0; j < M; ++j)
        for (std::size_t i = 0; i < N; ++i) {
            t.push_back(u.mesh[j]);
            node.push_back(static_cast<double>(i));
            value.push_back(u.values(i, j));
        }
    io::write_csv(path, {"t", "node", "value"}, {t, node, value});
}

void export_binary(const SolutionField& u, const std::string& bin_path, const std::string& header_path) {
    const std::size_t N = static_cast<std::size_t>(u.values.rows());
    const std::size_t M = u.mesh.size();
    // Row-major over time levels: transpose the column-major node x time block.
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = u.values.transpose();
    io::Json meta;
    meta["layout"] = "rows are time levels, columns are interior nodes";
    meta["times"] = u.mesh.nodes();
    meta["dimension"] = u.grid.dimension();
    meta["spacing"] = u.grid.spacing();
    meta["grid"] = u.grid.describe();
    meta["modes_used"] = u.modes_used;
    io::write_flat_binary(bin_path, header_path, rows.data(), M, N, meta);
}

}  // namespace fracdiff
