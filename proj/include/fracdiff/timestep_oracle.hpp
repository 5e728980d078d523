#pragma once

#include "fracdiff/nonlocal_op.hpp"
#include "fracdiff/spectral_core.hpp"
#include "fracdiff/time_frac.hpp"

#include <Eigen/Dense>

namespace fracdiff {

/// Implicit L1 discretization of the Caputo derivative on a uniform mesh:
///   D u(t_j) ~ sum_{k=0}^{j-1} b_k (u^{j-k} - u^{j-k-1}),
///   b_k = dt^{-alpha} ((k+1)^{1-alpha} - k^{1-alpha}) / Gamma(2 - alpha).
/// The weights are positive and strictly decreasing.
struct L1Weights {
    double alpha = 0.5;
    double dt = 0.0;
    Eigen::VectorXd b;
};

L1Weights l1_weights(double alpha, const TimeMesh& mesh);

/// Running state of the scheme: the increments u^m - u^{m-1} taken so far.
/// `increments` has one column per step taken.
class L1State {
public:
    L1State(L1Weights w, Eigen::VectorXd u0, std::size_t capacity);

    std::size_t steps_taken() const { return taken_; }
    const Eigen::VectorXd& current() const { return current_; }
    /// sum_{k>=1} b_k (u^{j-k} - u^{j-k-1}) for the next index j.
    Eigen::VectorXd memory() const;
    void push(const Eigen::VectorXd& next);
    const L1Weights& weights() const { return w_; }

private:
    L1Weights w_;
    Eigen::MatrixXd increments_;
    Eigen::VectorXd current_;
    std::size_t taken_ = 0;
};

/// Modal trajectories for  D_t^alpha (u_k - u_{0,k}) = -lambda_k u_k + f_k.
/// f has one row per mode and one column per mesh node (column 0 unused);
/// the result has the same shape with column 0 equal to u0.
Eigen::MatrixXd l1_solve_modal(const Eigen::VectorXd& lambdas, const Eigen::MatrixXd& f, const Eigen::VectorXd& u0,
                               const TimeMesh& mesh, double alpha);

/// Scalar convenience form of l1_solve_modal.
Series l1_solve_scalar(double lambda, const Series& f, double u0, const TimeMesh& mesh, double alpha);

/// Full grid system: each step solves (b_0 I + A) u^j = b_0 u^{j-1} - memory + f^j
/// with a Cholesky factor computed once. f is N x (M+1).
SolutionField l1_solve_full(const AssembledOperator& op, const Eigen::MatrixXd& f, const Eigen::VectorXd& u0,
                            const TimeMesh& mesh, double alpha);

/// g(x_i) rho(t_j) as an N x (M+1) matrix.
Eigen::MatrixXd separable_forcing(const SourceSpec& src, const TimeMesh& mesh);

}  // namespace fracdiff
