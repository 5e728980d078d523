#include "fracdiff/timestep_oracle.hpp"

#include "fracdiff/error.hpp"
#include "fracdiff/special_fn.hpp"

#include <Eigen/Cholesky>

#include <cmath>

namespace fracdiff {

namespace {

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0,1)");
}

}  // namespace

L1Weights l1_weights(double alpha, const TimeMesh& mesh) {
    check_alpha(alpha);
    const double dt = mesh.step();
    const std::size_t M = mesh.steps();
    L1Weights w{alpha, dt, Eigen::VectorXd(M)};
    const double scale = std::pow(dt, -alpha) / gamma_fn(2.0 - alpha);
    for (std::size_t k = 0; k < M; ++k)
        w.b(k) = scale * (std::pow(k + 1.0, 1.0 - alpha) - std::pow(static_cast<double>(k), 1.0 - alpha));
    return w;
}

L1State::L1State(L1Weights w, Eigen::VectorXd u0, std::size_t capacity)
    : w_(std::move(w)), increments_(u0.size(), capacity), current_(std::move(u0)) {
    if (capacity > static_cast<std::size_t>(w_.b.size())) throw ShapeError("L1State: capacity exceeds weight count");
}

Eigen::VectorXd L1State::memory() const {
    const Eigen::Index n = static_cast<Eigen::Index>(taken_);
    if (n == 0) return Eigen::VectorXd::Zero(current_.size());
    return increments_.leftCols(n) * w_.b.segment(1, n).reverse();
}

void L1State::push(const Eigen::VectorXd& next) {
    if (taken_ >= static_cast<std::size_t>(increments_.cols())) throw ShapeError("L1State: history is full");
    increments_.col(static_cast<Eigen::Index>(taken_)) = next - current_;
    current_ = next;
    ++taken_;
}

Eigen::MatrixXd l1_solve_modal(const Eigen::VectorXd& lambdas, const Eigen::MatrixXd& f, const Eigen::VectorXd& u0,
                               const TimeMesh& mesh, double alpha) {
    const Eigen::Index K = lambdas.size();
    const std::size_t M = mesh.steps();
    if (u0.size() != K || f.rows() != K || f.cols() != static_cast<Eigen::Index>(M + 1))
        throw ShapeError("l1_solve_modal: forcing must be K x (steps + 1) and u0 of length K");
    if ((lambdas.array() < 0.0).any()) throw DomainError("l1_solve_modal: eigenvalues must be nonnegative");
    L1State state(l1_weights(alpha, mesh), u0, M);
    const double b0 = state.weights().b(0);
    const Eigen::ArrayXd denom = lambdas.array() + b0;
    Eigen::MatrixXd out(K, M + 1);
    out.col(0) = u0;
    for (std::size_t j = 1; j <= M; ++j) {
        const Eigen::VectorXd rhs = b0 * state.current() - state.memory() + f.col(static_cast<Eigen::Index>(j));
        const Eigen::VectorXd next = (rhs.array() / denom).matrix();
        state.push(next);
        out.col(static_cast<Eigen::Index>(j)) = next;
    }
    return out;
}

Series l1_solve_scalar(double lambda, const Series& f, double u0, const TimeMesh& mesh, double alpha) {
    if (f.size() != mesh.size()) throw ShapeError("l1_solve_scalar: forcing must be sampled on the mesh");
    const Eigen::MatrixXd F = Eigen::Map<const Eigen::RowVectorXd>(f.data(), static_cast<Eigen::Index>(f.size()));
    const Eigen::MatrixXd U = l1_solve_modal(Eigen::VectorXd::Constant(1, lambda), F, Eigen::VectorXd::Constant(1, u0),
                                             mesh, alpha);
    return Series(U.data(), U.data() + U.size());
}

SolutionField l1_solve_full(const AssembledOperator& op, const Eigen::MatrixXd& f, const Eigen::VectorXd& u0,
                            const TimeMesh& mesh, double alpha) {
    const Eigen::Index N = static_cast<Eigen::Index>(op.size());
    const std::size_t M = mesh.steps();
    if (u0.size() != N || f.rows() != N || f.cols() != static_cast<Eigen::Index>(M + 1))
        throw ShapeError("l1_solve_full: forcing must be N x (steps + 1) and u0 of length N");
    L1State state(l1_weights(alpha, mesh), u0, M);
    const double b0 = state.weights().b(0);
    Eigen::MatrixXd system = op.matrix;
    system.diagonal().array() += b0;
    const Eigen::LLT<Eigen::MatrixXd> llt(system);
    if (llt.info() != Eigen::Success) throw NumericError("l1_solve_full: step matrix is not positive definite");
    SolutionField out{Eigen::MatrixXd(N, M + 1), mesh, op.grid, static_cast<std::size_t>(N)};
    out.values.col(0) = u0;
    for (std::size_t j = 1; j <= M; ++j) {
        const Eigen::VectorXd rhs = b0 * state.current() - state.memory() + f.col(static_cast<Eigen::Index>(j));
        const Eigen::VectorXd next = llt.solve(rhs);
        if (!next.allFinite()) throw NumericError("l1_solve_full: non-finite step at index " + std::to_string(j));
        state.push(next);
        out.values.col(static_cast<Eigen::Index>(j)) = next;
    }
    return out;
}

Eigen::MatrixXd separable_forcing(const SourceSpec& src, const TimeMesh& mesh) {
    if (src.rho.size() != mesh.size()) throw ShapeError("separable_forcing: rho must be sampled on the mesh");
    const Eigen::Map<const Eigen::RowVectorXd> rho(src.rho.data(), static_cast<Eigen::Index>(src.rho.size()));
    return src.g * rho;
}

}  // namespace fracdiff
