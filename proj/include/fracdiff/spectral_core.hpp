#pragma once

#include "fracdiff/nonlocal_op.hpp"
#include "fracdiff/time_frac.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <string>

namespace fracdiff {

/// Lowest eigenpairs of an assembled operator. Columns of `phis` are
/// orthonormal for the weighted inner product h^n <u, v>.
struct EigenSystem {
    Eigen::VectorXd lambdas;
    Eigen::MatrixXd phis;
    Grid grid;
    double max_residual = 0.0;        ///< max_k ||A phi_k - lambda_k phi_k||_h / lambda_k
    double orthonormality_defect = 0.0;

    std::size_t count() const { return static_cast<std::size_t>(lambdas.size()); }
    std::size_t nodes() const { return static_cast<std::size_t>(phis.rows()); }
    EigenSystem truncated(std::size_t K) const;
};

std::size_t default_mode_count(std::size_t nodes);

/// K = 0 selects default_mode_count. Throws NumericError when a retained
/// pair violates the residual or orthonormality tolerance.
EigenSystem eig(const AssembledOperator& op, std::size_t K = 0);

/// All eigenvalues in increasing order (no vectors).
Eigen::VectorXd eigenvalues(const AssembledOperator& op);

/// Modal coefficients (field, phi_k)_h.
Eigen::VectorXd project(const EigenSystem& es, const Eigen::VectorXd& field);

/// ||field||_h^2 - sum_{k<=K} coef_k^2.
double parseval_defect(const EigenSystem& es, const Eigen::VectorXd& field, std::size_t K);

/// u(x_i, t_j) stored as values(i, j).
struct SolutionField {
    Eigen::MatrixXd values;
    TimeMesh mesh;
    Grid grid;
    std::size_t modes_used = 0;

    Eigen::VectorXd at(std::size_t j) const { return values.col(static_cast<Eigen::Index>(j)); }
};

/// Separable source f(x, t) = rho(t) g(x).
struct SourceSpec {
    Series rho;
    Eigen::VectorXd g;
};

SolutionField solve_homogeneous(const EigenSystem& es, const Eigen::VectorXd& u0, const TimeMesh& mesh,
                                double alpha);

SolutionField solve_inhomogeneous(const EigenSystem& es, const SourceSpec& src, const TimeMesh& mesh, double alpha);

/// Homogeneous plus inhomogeneous parts.
SolutionField solve_spectral(const EigenSystem& es, const Eigen::VectorXd& u0, const SourceSpec& src,
                             const TimeMesh& mesh, double alpha);

/// w(t_j) = int_0^{t_j} (t_j - s)^{alpha-1} E_{alpha,alpha}(-lambda (t_j - s)^alpha) rho(s) ds
/// for piecewise-linear rho, integrated exactly on every cell.
Series modal_source_response(double lambda, const Series& rho, const TimeMesh& mesh, double alpha);

/// ||v||_h.
double grid_norm(const Grid& g, const Eigen::VectorXd& v);

/// L^2(Q_T) norm with the trapezoidal rule in time.
double l2_qt(const SolutionField& u);

/// ||a - b||_{L^2(Q_T)} / ||b||_{L^2(Q_T)}; fields must share their shape.
double rel_l2_qt(const SolutionField& a, const SolutionField& b);

/// Long-format CSV with columns t, node, value.
void export_csv(const SolutionField& u, const std::string& path);

/// Flat binary (rows = time levels, cols = nodes) plus JSON header.
void export_binary(const SolutionField& u, const std::string& bin_path, const std::string& header_path);

}  // namespace fracdiff
