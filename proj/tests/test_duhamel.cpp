#include "doctest.h"

#include "fracdiff/duhamel.hpp"
#include "fracdiff/error.hpp"
#include "fracdiff/io.hpp"
#include "fracdiff/special_fn.hpp"
#include "fracdiff/spectral_core.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

using namespace fracdiff;

namespace {

Series sample_on(const TimeMesh& m, const std::function<double(double)>& f) {
    Series s(m.size());
    for (std::size_t j = 0; j < m.size(); ++j) s[j] = f(m[j]);
    return s;
}

// (g_a * f)(t_k) for f sampled at t_i = i h, piecewise linear, with the
// cell integrals of (t_k - s)^{a-1} (s - t_i) written out directly.
double fine_convolution(double a, double h, std::size_t k, const std::function<double(double)>& f) {
    const double c = 1.0 / std::tgamma(a);
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double u0 = (k - i) * h, u1 = (k - i - 1) * h;  // t_k - s at the cell ends
        // int (t_k - s)^{a-1} ds and int (t_k - s)^{a-1} (s - t_i) ds over [t_i, t_{i+1}].
        const double m0 = (std::pow(u0, a) - std::pow(u1, a)) / a;
        const double m1 = u0 * m0 - (std::pow(u0, a + 1) - std::pow(u1, a + 1)) / (a + 1);
        const double fi = f(i * h), fj = f((i + 1) * h);
        sum += fi * m0 + (fj - fi) / h * m1;
    }
    return c * sum;
}

double rel_l1_interior(const Series& a, const Series& b, const TimeMesh& m) {
    double num = 0.0, den = 0.0;
    for (std::size_t j = 1; j + 1 < m.size(); ++j) {
        const double w = 0.5 * (m[j + 1] - m[j - 1]);
        num += w * std::abs(a[j] - b[j]);
        den += w * std::abs(b[j]);
    }
    return num / den;
}

Eigen::VectorXd bump(const Grid& g, double c, double w) {
    Eigen::VectorXd v(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double s = (g.point(i)[0] - c) / w;
        v(i) = std::abs(s) < 1 ? std::exp(1.0 - 1.0 / (1.0 - s * s)) : 0.0;
    }
    return v;
}

}  // namespace

TEST_CASE("mu for constant and linear rho reproduces the power kernels") {
    for (double alpha : {0.25, 0.5, 0.85}) {
        const TimeMesh mesh = TimeMesh::uniform(2.0, 64);
        const DuhamelKernel one = mu_from_rho(Series(mesh.size(), 1.0), mesh, alpha);
        const Series v = one.values();
        CHECK(std::isinf(v[0]));
        for (std::size_t j = 1; j < mesh.size(); ++j)
            CHECK(v[j] == doctest::Approx(std::pow(mesh[j], alpha - 1) / std::tgamma(alpha)).epsilon(1e-13));

        const DuhamelKernel ramp = mu_from_rho(mesh.nodes(), mesh, alpha);
        CHECK(ramp.singular == 0.0);
        const Series r = ramp.values();
        CHECK(r[0] == 0.0);
        for (std::size_t j = 1; j < mesh.size(); ++j)
            CHECK(r[j] == doctest::Approx(std::pow(mesh[j], alpha) / std::tgamma(alpha + 1)).epsilon(1e-12));
    }
}

TEST_CASE("mu for rho = sin t matches a 2^17-node evaluation of d/dt (g_alpha * rho)") {
    const double alpha = 0.5, T = 1.0;
    const std::size_t M = 1024, fine = std::size_t(1) << 17, ratio = fine / M;
    const double h = T / fine;
    const TimeMesh mesh = TimeMesh::uniform(T, M);
    const DuhamelKernel mu = mu_from_rho(sample_on(mesh, [](double t) { return std::sin(t); }), mesh, alpha);
    const Series got = mu.values();
    auto sinf = [](double t) { return std::sin(t); };
    Series ref(mesh.size(), 0.0);
    for (std::size_t j = 1; j + 1 < mesh.size(); ++j) {
        const std::size_t k = j * ratio;
        ref[j] = (fine_convolution(alpha, h, k + 1, sinf) - fine_convolution(alpha, h, k - 1, sinf)) / (2 * h);
    }
    CHECK(rel_l1_interior(got, ref, mesh) <= 1e-5);
}

TEST_CASE("the two mu formulas agree for random smooth rho") {
    // Differentiating g_alpha * rho_h (rho_h piecewise linear) is accurate to O(dt^{1+alpha})
    // away from 0 and to O(dt^alpha) in L1 near the t^alpha layer, so agreement is measured on
    // t >= T/16 and both gaps are required to shrink under refinement.
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> ud(-1, 1);
    for (int trial = 0; trial < 20; ++trial) {
        const double alpha = 0.2 + 0.7 * (ud(rng) + 1) / 2;
        std::array<double, 4> amp, ph;
        for (int k = 0; k < 4; ++k) {
            amp[k] = ud(rng);
            ph[k] = 3 * ud(rng);
        }
        const double c0 = 1.5 * ud(rng);
        auto rho = [&](double t) {
            double s = c0;
            for (int k = 0; k < 4; ++k) s += amp[k] * std::sin((k + 1) * t + ph[k]);
            return s;
        };
        std::vector<double> full, late;
        for (std::size_t M : {1024u, 2048u}) {
            const TimeMesh mesh = TimeMesh::uniform(1.0, M);
            const Series r = sample_on(mesh, rho);
            const Series a = mu_from_rho(r, mesh, alpha).values();
            const Series b = mu_by_derivative(r, mesh, alpha);
            CHECK(std::isnan(b.front()));
            CHECK(std::isnan(b.back()));
            full.push_back(rel_l1_interior(a, b, mesh));
            double num = 0.0, den = 0.0;
            for (std::size_t j = M / 16; j + 1 < mesh.size(); ++j) {
                num += std::abs(a[j] - b[j]);
                den += std::abs(a[j]);
            }
            late.push_back(num / den);
            CHECK(num / den <= 1e-4);
        }
        CHECK(full[1] < full[0]);
        CHECK(late[1] < late[0]);
    }
}

TEST_CASE("mu is linear in rho and obeys the integrated L1 bound") {
    const TimeMesh mesh = TimeMesh::uniform(1.5, 500);
    const double alpha = 0.4;
    const Series r1 = sample_on(mesh, [](double t) { return 1 + std::cos(2 * t); });
    const Series r2 = sample_on(mesh, [](double t) { return t * t - 0.3; });
    Series mix(mesh.size());
    for (std::size_t j = 0; j < mesh.size(); ++j) mix[j] = 2 * r1[j] - 3 * r2[j];
    const DuhamelKernel m1 = mu_from_rho(r1, mesh, alpha), m2 = mu_from_rho(r2, mesh, alpha),
                        mm = mu_from_rho(mix, mesh, alpha);
    CHECK(mm.singular == doctest::Approx(2 * m1.singular - 3 * m2.singular).epsilon(1e-14));
    for (std::size_t j = 0; j < mesh.size(); ++j)
        CHECK(std::abs(mm.regular[j] - (2 * m1.regular[j] - 3 * m2.regular[j])) <= 1e-12);

    const DuhamelKernel one = mu_from_rho(Series(mesh.size(), 1.0), mesh, alpha);
    CHECK(mu_l1_norm(one) == doctest::Approx(std::pow(1.5, alpha) / std::tgamma(alpha + 1)).epsilon(1e-12));
    for (const DuhamelKernel* k : {&m1, &m2, &mm, &one}) {
        const double n = mu_l1_norm(*k);
        CHECK(std::isfinite(n));
        CHECK(n <= mu_l1_bound(*k) * (1 + 1e-9));
    }
}

TEST_CASE("mu rejects bad input") {
    const TimeMesh mesh = TimeMesh::uniform(1.0, 8);
    Series r(9, 1.0);
    r[3] = NAN;
    CHECK_THROWS_AS(mu_from_rho(r, mesh, 0.5), DomainError);
    CHECK_THROWS_AS(mu_by_derivative(r, mesh, 0.5), DomainError);
    CHECK_THROWS_AS(mu_from_rho(Series(9, 1.0), mesh, 1.0), DomainError);
    CHECK_THROWS_AS(mu_from_rho(Series(5, 1.0), mesh, 0.5), ShapeError);
}

TEST_CASE("Duhamel representation matches the direct inhomogeneous solve") {
    const AssembledOperator op = assemble(KernelSpec::fractional_laplacian(0.5, 1), Grid::interval(-1, 1, 96));
    const EigenSystem es = eig(op);
    const double alpha = 0.6, T = 1.0;
    const TimeMesh mesh = TimeMesh::uniform(T, 512);
    const Eigen::VectorXd g = bump(op.grid, 0.1, 0.5);
    const SolutionField v = solve_homogeneous(es, g, mesh, alpha);

    const std::vector<std::function<double(double)>> rhos{
        [](double) { return 1.0; }, [](double t) { return t; },
        [T](double t) { return 1.0 + std::sin(2 * std::numbers::pi * t / T); }};
    for (const auto& f : rhos) {
        const Series rho = sample_on(mesh, f);
        const SolutionField rep = convolve_representation(mu_from_rho(rho, mesh, alpha), v);
        const SolutionField direct = solve_inhomogeneous(es, {rho, g}, mesh, alpha);
        CHECK(rel_l2_qt(rep, direct) <= 1e-3);
        const std::size_t node = op.size() / 2;
        const Series trace = convolve_representation(mu_from_rho(rho, mesh, alpha), v, node);
        for (std::size_t j = 0; j < mesh.size(); ++j) CHECK(trace[j] == doctest::Approx(rep.values(node, j)).epsilon(1e-13));
    }

    const SolutionField zero = convolve_representation(mu_from_rho(Series(mesh.size(), 0.0), mesh, alpha), v);
    CHECK(zero.values.cwiseAbs().maxCoeff() == 0.0);

    const TimeMesh other = TimeMesh::uniform(T, 256);
    CHECK_THROWS_AS(convolve_representation(mu_from_rho(Series(other.size(), 1.0), other, alpha), v), ShapeError);
}

TEST_CASE("single-mode Duhamel check against the closed form") {
    const AssembledOperator op = assemble(KernelSpec::fractional_laplacian(0.5, 1), Grid::interval(-1, 1, 48));
    const EigenSystem es = eig(op);
    const double alpha = 0.5, lam = es.lambdas(0);
    const TimeMesh mesh = TimeMesh::uniform(1.0, 1024);
    const SolutionField v = solve_homogeneous(es, es.phis.col(0), mesh, alpha);
    const Series one(mesh.size(), 1.0);
    const SolutionField rep = convolve_representation(mu_from_rho(one, mesh, alpha), v);
    const SolutionField direct = solve_inhomogeneous(es, {one, es.phis.col(0)}, mesh, alpha);
    double worst_rep = 0.0, worst_dir = 0.0;
    for (std::size_t j = 1; j < mesh.size(); ++j) {
        const double exact = (1 - mittag_leffler({alpha, 1.0}, -lam * std::pow(mesh[j], alpha))) / lam;
        worst_rep = std::max(worst_rep, std::abs(project(es, rep.at(j))(0) - exact) / exact);
        worst_dir = std::max(worst_dir, std::abs(project(es, direct.at(j))(0) - exact) / exact);
    }
    double num = 0, den = 0;
    for (std::size_t j = 1; j < mesh.size(); ++j) {
        const double exact = (1 - mittag_leffler({alpha, 1.0}, -lam * std::pow(mesh[j], alpha))) / lam;
        num += std::pow(project(es, rep.at(j))(0) - exact, 2); den += exact * exact;
    }
    CHECK(worst_dir <= 1e-12);
    // v is interpolated linearly in time, so the first cells carry most of the error.
    CHECK(std::sqrt(num / den) <= 1e-4);
    CHECK(worst_rep <= 1e-2);
}

TEST_CASE("mu CSV export") {
    const TimeMesh mesh = TimeMesh::uniform(1.0, 4);
    const DuhamelKernel mu = mu_from_rho(Series(5, 2.0), mesh, 0.5);
    const auto path = std::filesystem::temp_directory_path() / "fracdiff_mu.csv";
    export_mu_csv(mu, path.string());
    const io::CsvTable t = io::read_csv(path.string());
    CHECK(t.header == std::vector<std::string>{"t", "mu", "regular"});
    CHECK(std::isinf(t.column("mu")[0]));
    CHECK(t.column("mu")[4] == doctest::Approx(2.0 / std::tgamma(0.5)));
    std::filesystem::remove(path);
}
