#include "doctest.h"

#include <cmath>
#include <random>

#include "fracdiff/error.hpp"
#include "fracdiff/special_fn.hpp"
#include "fracdiff/time_frac.hpp"

using namespace fracdiff;

namespace {

Series sample(const TimeMesh& mesh, double (*f)(double)) {
    Series s(mesh.size());
    for (std::size_t i = 0; i < mesh.size(); ++i) s[i] = f(mesh[i]);
    return s;
}

double max_rel(const Series& got, const Series& want, std::size_t from = 1) {
    double e = 0.0, scale = 0.0;
    for (std::size_t i = from; i < got.size(); ++i) {
        e = std::max(e, std::abs(got[i] - want[i]));
        scale = std::max(scale, std::abs(want[i]));
    }
    return e / scale;
}

// (g_gamma * sin)(t) = sum_k (-1)^k t^{2k+1+gamma} / Gamma(2k+2+gamma).
double conv_sin_exact(double gamma, double t) {
    double s = 0.0;
    for (int k = 0; k < 30; ++k) {
        const double term = std::pow(t, 2.0 * k + 1.0 + gamma) / std::tgamma(2.0 * k + 2.0 + gamma);
        s += (k % 2 == 0 ? term : -term);
        if (term < 1e-20) break;
    }
    return s;
}

}  // namespace

TEST_CASE("TimeMesh validation") {
    CHECK_THROWS_AS(TimeMesh({0.0, 1.0}), MeshError);
    CHECK_THROWS_AS(TimeMesh({0.1, 0.5, 1.0}), MeshError);
    CHECK_THROWS_AS(TimeMesh({0.0, 0.5, 0.5, 1.0}), MeshError);
    CHECK_THROWS_AS(TimeMesh::uniform(1.0, 1), MeshError);
    CHECK_THROWS_AS(TimeMesh::uniform(-1.0, 10), MeshError);
    const TimeMesh m = TimeMesh::uniform(2.0, 8);
    CHECK(m.size() == 9);
    CHECK(m.is_uniform());
    CHECK(m.step() == doctest::Approx(0.25));
    CHECK(m.refined().size() == 17);
    const TimeMesh g({0.0, 0.1, 0.3, 1.0});
    CHECK_FALSE(g.is_uniform());
    CHECK_THROWS_AS(g.step(), MeshError);
}

TEST_CASE("caputo_l1 is exact on linear data") {
    const TimeMesh mesh = TimeMesh::uniform(1.0, 64);
    const Series f = sample(mesh, [](double t) { return t; });
    const Series d = caputo_l1(f, 0.5, mesh);
    CHECK(std::isnan(d[0]));
    for (std::size_t j = 1; j < mesh.size(); ++j)
        CHECK(std::abs(d[j] - g_kernel(1.5, mesh[j])) < 1e-13);
}

TEST_CASE("caputo_l1 of zero is zero") {
    const TimeMesh mesh = TimeMesh::uniform(1.0, 16);
    const Series d = caputo_l1(Series(mesh.size(), 0.0), 0.4, mesh);
    for (std::size_t j = 1; j < mesh.size(); ++j) CHECK(d[j] == 0.0);
}

TEST_CASE("caputo_l1 includes the f(0) g_{1-alpha} term") {
    const TimeMesh mesh = TimeMesh::uniform(1.0, 16);
    const Series d = caputo_l1(Series(mesh.size(), 2.0), 0.4, mesh);
    for (std::size_t j = 1; j < mesh.size(); ++j) CHECK(d[j] == doctest::Approx(2.0 * g_kernel(0.6, mesh[j])));
}

TEST_CASE("caputo_l1 observed order for t^2 is 2 - alpha") {
    for (double alpha : {0.3, 0.5, 0.8}) {
        const double exact = 2.0 / std::tgamma(3.0 - alpha);
        double prev = 0.0;
        for (int level = 0; level < 4; ++level) {
            const TimeMesh mesh = TimeMesh::uniform(1.0, 64u << level);
            const Series d = caputo_l1(sample(mesh, [](double t) { return t * t; }), alpha, mesh);
            const double err = std::abs(d.back() - exact);
            if (level > 0) {
                const double order = std::log2(prev / err);
                CAPTURE(alpha);
                CHECK(order >= 2.0 - alpha - 0.25);
                CHECK(order <= 2.0 - alpha + 0.25);
            }
            prev = err;
        }
    }
}

TEST_CASE("caputo_l1 on a graded mesh") {
    std::vector<double> nodes;
    for (int i = 0; i <= 200; ++i) nodes.push_back(std::pow(i / 200.0, 2.0));
    const TimeMesh mesh(nodes);
    const Series d = caputo_l1(sample(mesh, [](double t) { return t * t; }), 0.5, mesh);
    CHECK(std::abs(d.back() - 2.0 / std::tgamma(2.5)) < 1e-3);
}

TEST_CASE("singular_convolve is exact for constants") {
    for (double a : {0.2, 0.5, 0.9, 1.0}) {
        const TimeMesh mesh = TimeMesh::uniform(3.0, 50);
        const Series c = singular_convolve(a, Series(mesh.size(), 1.0), mesh);
        CHECK(c[0] == 0.0);
        for (std::size_t j = 1; j < mesh.size(); ++j)
            CHECK(std::abs(c[j] / g_kernel(a + 1.0, mesh[j]) - 1.0) < 1e-13);
    }
    std::vector<double> nodes{0.0};
    for (int i = 1; i <= 40; ++i) nodes.push_back(std::pow(i / 40.0, 3.0));
    const TimeMesh graded(nodes);
    const Series c = singular_convolve(0.3, Series(graded.size(), 1.0), graded);
    for (std::size_t j = 1; j < graded.size(); ++j)
        CHECK(std::abs(c[j] / g_kernel(1.3, graded[j]) - 1.0) < 1e-12);
}

TEST_CASE("singular_convolve with gamma = 1 integrates t") {
    const TimeMesh mesh = TimeMesh::uniform(2.0, 40);
    const Series c = singular_convolve(1.0, sample(mesh, [](double t) { return t; }), mesh);
    for (std::size_t j = 0; j < mesh.size(); ++j) CHECK(std::abs(c[j] - 0.5 * mesh[j] * mesh[j]) < 1e-13);
}

TEST_CASE("singular_convolve of sin against the fine rule and the exact series") {
    const TimeMesh coarse = TimeMesh::uniform(1.0, 1024);
    const TimeMesh fine = TimeMesh::uniform(1.0, 1u << 17);
    const Series c = singular_convolve(0.5, sample(coarse, [](double t) { return std::sin(t); }), coarse);

    std::vector<std::size_t> idx(coarse.size());
    for (std::size_t j = 0; j < idx.size(); ++j) idx[j] = j * 128;
    const Series ref = singular_convolve_at(0.5, sample(fine, [](double t) { return std::sin(t); }), fine, idx);
    CHECK(max_rel(c, ref) <= 1e-6);

    Series exact(coarse.size());
    for (std::size_t j = 0; j < coarse.size(); ++j) exact[j] = conv_sin_exact(0.5, coarse[j]);
    CHECK(max_rel(c, exact) <= 1e-6);
    CHECK(max_rel(ref, exact) <= 1e-9);
}

TEST_CASE("singular_convolve is linear") {
    const TimeMesh mesh = TimeMesh::uniform(1.0, 200);
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n(0.0, 1.0);
    Series u(mesh.size()), v(mesh.size()), w(mesh.size());
    const double a = 1.7, b = -0.6;
    for (std::size_t i = 0; i < u.size(); ++i) {
        u[i] = n(rng);
        v[i] = n(rng);
        w[i] = a * u[i] + b * v[i];
    }
    const Series cu = singular_convolve(0.4, u, mesh), cv = singular_convolve(0.4, v, mesh),
                 cw = singular_convolve(0.4, w, mesh);
    double scale = 0.0;
    for (double x : cw) scale = std::max(scale, std::abs(x));
    for (std::size_t i = 0; i < u.size(); ++i) CHECK(std::abs(cw[i] - (a * cu[i] + b * cv[i])) <= 1e-13 * scale);
}

TEST_CASE("kernel semigroup under refinement") {
    for (double g1 : {0.3, 0.5, 0.8}) {
        for (double g2 : {1.5, 2.3}) {
            double prev = INFINITY;
            for (int level = 0; level < 3; ++level) {
                const TimeMesh mesh = TimeMesh::uniform(1.0, 32u << level);
                Series vals(mesh.size(), 0.0);
                for (std::size_t i = 1; i < mesh.size(); ++i) vals[i] = g_kernel(g2, mesh[i]);
                const Series c = singular_convolve(g1, vals, mesh);
                double err = 0.0;
                for (std::size_t i = 1; i < mesh.size(); ++i)
                    err = std::max(err, std::abs(c[i] - g_kernel(g1 + g2, mesh[i])));
                CHECK(err < prev);
                prev = err;
            }
        }
    }
}

TEST_CASE("convolve_weighted reproduces g_a * g_b with both kernels singular") {
    const TimeMesh mesh = TimeMesh::uniform(1.0, 256);
    for (double a : {0.3, 0.7}) {
        for (double b : {0.4, 0.9}) {
            PowerWeighted A{a - 1.0, Series(mesh.size(), 1.0 / std::tgamma(a))};
            PowerWeighted B{b - 1.0, Series(mesh.size(), 1.0 / std::tgamma(b))};
            const Series c = convolve_weighted(A, B, mesh);
            for (std::size_t j = 1; j < mesh.size(); ++j)
                CHECK(std::abs(c[j] / g_kernel(a + b, mesh[j]) - 1.0) < 1e-11);
        }
    }
}

TEST_CASE("convolve_weighted agrees with singular_convolve for a regular operand") {
    const TimeMesh mesh = TimeMesh::uniform(2.0, 300);
    const Series f = sample(mesh, [](double t) { return std::cos(3.0 * t) + t; });
    PowerWeighted A{-0.6, Series(mesh.size(), 1.0 / std::tgamma(0.4))};
    PowerWeighted B{0.0, f};
    const Series c1 = convolve_weighted(A, B, mesh);
    const Series c2 = singular_convolve(0.4, f, mesh);
    CHECK(max_rel(c1, c2) < 1e-11);
    const Series c3 = convolve_weighted(B, A, mesh);
    CHECK(max_rel(c3, c2) < 1e-11);
}

TEST_CASE("convolve_power_kernel with a pure power") {
    const TimeMesh mesh = TimeMesh::uniform(1.0, 128);
    const Series c = convolve_power_kernel(0.35, -0.45, [](double) { return 1.0 / std::tgamma(0.55); }, mesh);
    for (std::size_t j = 1; j < mesh.size(); ++j) CHECK(std::abs(c[j] / g_kernel(0.9, mesh[j]) - 1.0) < 1e-10);
}

TEST_CASE("Yosida kernels: resolvent residual, monotonicity, positivity") {
    const TimeMesh mesh = TimeMesh::uniform(1.0, 1024);
    for (double alpha : {0.3, 0.5, 0.8}) {
        for (int m : {1, 10, 100}) {
            const YosidaKernels yk = yosida_kernels(alpha, m, mesh);
            const ResolventResidual rr = yosida_resolvent_residual(yk);
            CAPTURE(alpha);
            CAPTURE(m);
            CHECK(rr.l1 <= 1e-4);
            for (std::size_t j = 0; j < mesh.size(); ++j) {
                CHECK(yk.h_values[j] >= 0.0);
                CHECK(yk.g_values[j] >= 0.0);
                if (j > 0) CHECK(yk.g_values[j] <= yk.g_values[j - 1]);
            }
        }
    }
}

TEST_CASE("closed form of g_{1-alpha,m} matches g_{1-alpha} * h_m") {
    const TimeMesh mesh = TimeMesh::uniform(1.0, 256);
    for (double alpha : {0.3, 0.5, 0.8}) {
        for (int m : {1, 10, 100}) {
            const YosidaKernels yk = yosida_kernels(alpha, m, mesh);
            const Series gc = yosida_g_by_convolution(yk);
            CHECK(max_rel(gc, yk.g_values, 0) < 1e-8);
        }
    }
}

TEST_CASE("Yosida residual shrinks under refinement") {
    for (int m : {1, 10, 100}) {
        double prev = INFINITY;
        for (std::size_t steps : {256u, 512u, 1024u}) {
            const ResolventResidual rr = yosida_resolvent_residual(yosida_kernels(0.3, m, TimeMesh::uniform(1.0, steps)));
            CHECK(rr.l1 < prev);
            prev = rr.l1;
        }
    }
}

TEST_CASE("g_{1-alpha,m} approaches g_{1-alpha} in L1") {
    const TimeMesh mesh = TimeMesh::uniform(1.0, 1024);
    for (double alpha : {0.3, 0.5, 0.8}) {
        double prev = INFINITY;
        for (int m : {1, 4, 16, 64}) {
            const double d = yosida_l1_distance(yosida_kernels(alpha, m, mesh));
            CHECK(d < prev);
            prev = d;
        }
    }
}

TEST_CASE("yosida_kernels argument checks") {
    const TimeMesh mesh = TimeMesh::uniform(1.0, 8);
    CHECK_THROWS_AS(yosida_kernels(0.5, 0, mesh), DomainError);
    CHECK_THROWS_AS(yosida_kernels(1.0, 3, mesh), DomainError);
}

TEST_CASE("yosida_derivative of constants and of t") {
    const TimeMesh mesh = TimeMesh::uniform(1.0, 64);
    const YosidaKernels yk = yosida_kernels(0.5, 8, mesh);
    const Series d1 = yosida_derivative(Series(mesh.size(), 1.0), 0.5, 8, mesh);
    for (std::size_t j = 1; j < mesh.size(); ++j) CHECK(d1[j] == doctest::Approx(yk.g_values[j]).epsilon(1e-13));

    // d/dt (k * t) = int_0^t k, which tends to g_{2-alpha} as m grows.
    double prev = INFINITY;
    for (int m : {1, 10, 100, 1000}) {
        const Series d = yosida_derivative(sample(mesh, [](double t) { return t; }), 0.5, m, mesh);
        const double err = std::abs(d.back() - g_kernel(1.5, 1.0));
        CHECK(err < prev);
        prev = err;
    }
}

TEST_CASE("fundamental identity corollary: defect is nonnegative") {
    const TimeMesh mesh = TimeMesh::uniform(2.0, 400);
    for (double alpha : {0.3, 0.7}) {
        for (int m : {1, 20}) {
            const IdentityReport r = check_fundamental_identity(sample(mesh, [](double t) { return 1.0 + std::sin(t); }),
                                                                alpha, m, mesh);
            CHECK(r.min_defect >= -1e-10);
        }
    }
}

TEST_CASE("fundamental identity trivial cases") {
    const TimeMesh mesh = TimeMesh::uniform(1.0, 50);
    const IdentityReport z = check_fundamental_identity(Series(mesh.size(), 0.0), 0.5, 5, mesh);
    for (double d : z.defect) CHECK(d == 0.0);
    const IdentityReport neg = check_fundamental_identity(sample(mesh, [](double t) { return -t; }), 0.5, 5, mesh);
    for (double d : neg.defect) CHECK(d == 0.0);
}

TEST_CASE("mirrored corollary by sign flip on sign-changing data") {
    const TimeMesh mesh = TimeMesh::uniform(3.0, 300);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
        const double a = u(rng), b = 3.0 * u(rng), c = 0.5 * u(rng);
        Series v(mesh.size()), mv(mesh.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = a + std::sin(b * mesh[i]) + c * mesh[i];
            mv[i] = -v[i];
        }
        CHECK(check_fundamental_identity(v, 0.5, 10, mesh).min_defect >= -1e-10);
        CHECK(check_fundamental_identity(mv, 0.5, 10, mesh).min_defect >= -1e-10);
    }
}
