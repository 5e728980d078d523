#include "doctest.h"

#include "fracdiff/error.hpp"
#include "fracdiff/special_fn.hpp"
#include "fracdiff/spectral_core.hpp"
#include "fracdiff/timestep_oracle.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <numbers>
#include <random>

using namespace fracdiff;

namespace {

AssembledOperator interval_op(double beta, int N) {
    return assemble(KernelSpec::fractional_laplacian(beta, 1), Grid::interval(-1.0, 1.0, N));
}

Eigen::VectorXd smooth_bump(const Grid& g, double c, double w) {
    Eigen::VectorXd v(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double s = (g.point(i)[0] - c) / w;
        v(i) = std::abs(s) < 1 ? std::exp(1.0 - 1.0 / (1.0 - s * s)) : 0.0;
    }
    return v;
}

}  // namespace

TEST_CASE("L1 weights are cell moments of g_{1-alpha}, positive and decreasing") {
    for (double alpha : {0.2, 0.5, 0.9}) {
        const TimeMesh mesh = TimeMesh::uniform(2.0, 50);
        const L1Weights w = l1_weights(alpha, mesh);
        boost::math::quadrature::tanh_sinh<double> ts;
        const double c = 1.0 / std::tgamma(1.0 - alpha);
        for (int k = 0; k < 50; ++k) {
            CHECK(w.b(k) > 0.0);
            if (k > 0) CHECK(w.b(k) < w.b(k - 1));
            const double a = k * w.dt, b = (k + 1) * w.dt;
            const double moment = ts.integrate([&](double s) { return c * std::pow(s, -alpha); }, a, b);
            CHECK(w.b(k) * w.dt == doctest::Approx(moment).epsilon(1e-12));
        }
        CHECK(w.b.sum() * w.dt == doctest::Approx(std::pow(2.0, 1 - alpha) / std::tgamma(2 - alpha)).epsilon(1e-12));
    }
    CHECK_THROWS_AS(l1_weights(1.0, TimeMesh::uniform(1.0, 4)), DomainError);
    CHECK_THROWS_AS(l1_weights(0.5, TimeMesh({0.0, 0.3, 1.0})), MeshError);
}

TEST_CASE("L1State keeps the increment history") {
    const TimeMesh mesh = TimeMesh::uniform(1.0, 3);
    L1State s(l1_weights(0.5, mesh), Eigen::VectorXd::Constant(2, 1.0), 3);
    CHECK(s.steps_taken() == 0);
    CHECK(s.memory().norm() == 0.0);
    s.push(Eigen::VectorXd::Constant(2, 0.5));
    s.push(Eigen::VectorXd::Constant(2, 0.2));
    CHECK(s.steps_taken() == 2);
    // memory for j = 3: b_1 (u^2 - u^1) + b_2 (u^1 - u^0).
    const Eigen::VectorXd& b = s.weights().b;
    CHECK(s.memory()(0) == doctest::Approx(b(1) * (-0.3) + b(2) * (-0.5)));
    s.push(Eigen::VectorXd::Zero(2));
    CHECK_THROWS_AS(s.push(Eigen::VectorXd::Zero(2)), ShapeError);
}

TEST_CASE("modal L1 solve: constants and the Mittag-Leffler relaxation") {
    const TimeMesh mesh = TimeMesh::uniform(1.0, 4096);
    const Series zero(mesh.size(), 0.0);
    const Series flat = l1_solve_scalar(0.0, zero, 2.5, mesh, 0.4);
    for (double v : flat) CHECK(v == 2.5);

    const Series u = l1_solve_scalar(1.0, zero, 1.0, mesh, 0.5);
    CHECK(std::abs(u.back() - mittag_leffler({0.5, 1.0}, -1.0)) <= 1e-3);

    CHECK_THROWS_AS(l1_solve_modal(Eigen::VectorXd::Constant(1, -1.0), Eigen::MatrixXd::Zero(1, 4097),
                                   Eigen::VectorXd::Zero(1), mesh, 0.5),
                    DomainError);
    CHECK_THROWS_AS(l1_solve_scalar(1.0, Series(5, 0.0), 1.0, mesh, 0.5), ShapeError);
}

TEST_CASE("modal L1 solve converges at order 2 - alpha on a forced problem") {
    // f = t, u0 = 0, lambda = 1: u(t) = t^{alpha+1} E_{alpha,alpha+2}(-t^alpha).
    for (double alpha : {0.3, 0.5, 0.8}) {
        const double exact = mittag_leffler({alpha, alpha + 2.0}, -1.0);
        std::vector<double> err;
        for (std::size_t M : {256u, 512u, 1024u, 2048u}) {
            const TimeMesh mesh = TimeMesh::uniform(1.0, M);
            const Series u = l1_solve_scalar(1.0, mesh.nodes(), 0.0, mesh, alpha);
            err.push_back(std::abs(u.back() - exact));
        }
        const double order = std::log2(err[2] / err[3]);
        CHECK(std::abs(order - (2.0 - alpha)) <= 0.1);
        for (std::size_t i = 1; i < err.size(); ++i) CHECK(err[i] < err[i - 1]);
    }
}

TEST_CASE("full L1 solve equals the modal solve in the eigenbasis") {
    const AssembledOperator op = interval_op(0.6, 48);
    const EigenSystem es = eig(op, 48);
    const TimeMesh mesh = TimeMesh::uniform(1.0, 200);
    const double alpha = 0.45;
    const Eigen::VectorXd u0 = smooth_bump(op.grid, 0.2, 0.5);
    Series rho(mesh.size());
    for (std::size_t j = 0; j < mesh.size(); ++j) rho[j] = std::cos(4.0 * mesh[j]);
    const SourceSpec src{rho, smooth_bump(op.grid, -0.3, 0.4)};
    const SolutionField full = l1_solve_full(op, separable_forcing(src, mesh), u0, mesh, alpha);

    const Eigen::VectorXd gk = project(es, src.g);
    const Eigen::Map<const Eigen::RowVectorXd> r(rho.data(), static_cast<Eigen::Index>(rho.size()));
    const Eigen::MatrixXd modal = l1_solve_modal(es.lambdas, gk * r, project(es, u0), mesh, alpha);
    const Eigen::MatrixXd back = es.phis * modal;
    CHECK((full.values - back).norm() <= 1e-10 * full.values.norm());
}

TEST_CASE("full L1 solve: positivity, zero data and stability") {
    const AssembledOperator op = interval_op(0.5, 64);
    const TimeMesh mesh = TimeMesh::uniform(1.0, 300);
    const Eigen::MatrixXd f0 = Eigen::MatrixXd::Zero(64, 301);

    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ud(0, 1);
    for (int trial = 0; trial < 5; ++trial) {
        Eigen::VectorXd u0(64);
        for (auto& x : u0) x = ud(rng) < 0.3 ? ud(rng) : 0.0;
        const SolutionField u = l1_solve_full(op, f0, u0, mesh, 0.3 + 0.1 * trial);
        CHECK(u.values.minCoeff() >= -1e-12);
    }

    const SolutionField z = l1_solve_full(op, f0, Eigen::VectorXd::Zero(64), mesh, 0.5);
    CHECK(z.values.cwiseAbs().maxCoeff() == 0.0);

    const Eigen::VectorXd u0 = smooth_bump(op.grid, 0.0, 0.8);
    for (double T : {1.0, 2.0, 4.0, 8.0}) {
        const TimeMesh m = TimeMesh::uniform(T, 300);
        const SolutionField u = l1_solve_full(op, f0, u0, m, 0.6);
        double prev = u.values.col(0).norm();
        for (Eigen::Index j = 1; j < u.values.cols(); ++j) {
            const double nj = u.values.col(j).norm();
            CHECK(nj <= prev * (1 + 1e-12));
            prev = nj;
        }
    }
    CHECK_THROWS_AS(l1_solve_full(op, Eigen::MatrixXd::Zero(64, 10), Eigen::VectorXd::Zero(64), mesh, 0.5),
                    ShapeError);
}

TEST_CASE("spectral and L1 solvers agree and the gap shrinks with refinement") {
    const AssembledOperator op = interval_op(0.5, 128);
    const EigenSystem es = eig(op, 128);
    const double T = 1.0;
    const Eigen::VectorXd u0 = smooth_bump(op.grid, 0.1, 0.6);
    const Eigen::VectorXd g = smooth_bump(op.grid, -0.2, 0.5);
    for (double alpha : {0.5, 0.8}) {
        std::vector<double> err;
        for (std::size_t M : {256u, 512u, 1024u}) {
            const TimeMesh mesh = TimeMesh::uniform(T, M);
            Series rho(mesh.size());
            for (std::size_t j = 0; j < mesh.size(); ++j) rho[j] = 1.0 + mesh[j];
            const SourceSpec src{rho, g};
            const SolutionField us = solve_spectral(es, u0, src, mesh, alpha);
            const SolutionField ul = l1_solve_full(op, separable_forcing(src, mesh), u0, mesh, alpha);
            err.push_back(rel_l2_qt(us, ul));
        }
        CHECK(err[1] < err[0]);
        CHECK(err[2] < err[1]);
        // Nonsmooth-in-time data (u0 != 0, rho(0) != 0) limit the uniform L1 scheme to
        // roughly first order in L^2(Q_T).
        CHECK(std::log2(err[1] / err[2]) >= 0.6);
        if (alpha >= 0.8) CHECK(err[2] <= 1e-3);
    }
}
