#include "fracdiff/duhamel.hpp"

#include "fracdiff/error.hpp"
#include "fracdiff/io.hpp"
#include "fracdiff/parallel.hpp"
#include "fracdiff/special_fn.hpp"

#include "quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fracdiff {

namespace {

void require_finite(const Series& s, const char* what) {
    for (double v : s)
        if (!std::isfinite(v)) throw DomainError(std::string(what) + ": rho must be finite");
}

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0,1)");
}

// Weights of v_m in u_j = int_0^{t_j} mu(t_j - s) v(s) ds for piecewise-linear v on a
// uniform mesh. Singular part: exact moments of sigma^{alpha-1}; regular part: exact
// integral of the product of two linear pieces.
struct ConvolutionWeights {
    std::size_t steps;
    std::vector<double> sP, sQ;  // singular cell weights by offset d = j - i >= 1
    const Series* reg;
    double c;
    double dt;

    ConvolutionWeights(const DuhamelKernel& mu) : steps(mu.mesh.steps()), reg(&mu.regular), c(mu.singular) {
        dt = mu.mesh.step();
        const double a = mu.alpha;
        sP.assign(steps + 1, 0.0);
        sQ.assign(steps + 1, 0.0);
        // Primitives of sigma^{a-1}: F0 = sigma^a / a, F1 = sigma^{a+1} / (a (a+1)).
        auto F0 = [&](double s) { return std::pow(s, a) / a; };
        auto F1 = [&](double s) { return std::pow(s, a + 1.0) / (a * (a + 1.0)); };
        for (std::size_t d = 1; d <= steps; ++d) {
            const double ta = d * dt, tb = (d - 1) * dt;
            const double q = (F1(ta) - F1(tb) - dt * F0(tb)) / dt;
            sQ[d] = q;
            sP[d] = F0(ta) - F0(tb) - q;
        }
    }

    // Weight vector w with u_j = sum_m w[m] v_m, m = 0..j.
    void column(std::size_t j, Eigen::VectorXd& w) const {
        w.setZero(static_cast<Eigen::Index>(j + 1));
        const Series& R = *reg;
        for (std::size_t i = 0; i < j; ++i) {
            // Singular: cell [t_i, t_{i+1}] seen at offset d = j - i.
            w(i) += c * sP[j - i];
            w(i + 1) += c * sQ[j - i];
            // Regular: sigma in [t_k, t_{k+1}] with k = j - i - 1 pairs with v on [t_i, t_{i+1}].
            const std::size_t k = j - i - 1;
            w(i + 1) += dt / 6.0 * (2.0 * R[k] + R[k + 1]);
            w(i) += dt / 6.0 * (R[k] + 2.0 * R[k + 1]);
        }
    }
};

void check_pair(const DuhamelKernel& mu, const SolutionField& v) {
    if (mu.mesh.size() != v.mesh.size() || mu.mesh.nodes() != v.mesh.nodes())
        throw ShapeError("convolve_representation: mu and v live on different meshes");
    if (static_cast<std::size_t>(v.values.cols()) != v.mesh.size())
        throw ShapeError("convolve_representation: v has the wrong number of time levels");
    if (!mu.mesh.is_uniform()) throw MeshError("convolve_representation: a uniform mesh is required");
}

}  // namespace

Series DuhamelKernel::values() const {
    Series out(mesh.size());
    for (std::size_t j = 0; j < mesh.size(); ++j) {
        if (j == 0)
            out[j] = singular == 0.0 ? regular[0] : std::copysign(std::numeric_limits<double>::infinity(), singular);
        else
            out[j] = singular * std::pow(mesh[j], alpha - 1.0) + regular[j];
    }
    return out;
}

Series rho_derivative(const Series& rho, const TimeMesh& mesh) {
    const std::size_t n = mesh.size();
    if (rho.size() != n) throw ShapeError("rho_derivative: rho must be sampled on the mesh");
    Series d(n, 0.0);
    if (n == 2) {
        d[0] = d[1] = (rho[1] - rho[0]) / (mesh[1] - mesh[0]);
        return d;
    }
    for (std::size_t j = 1; j + 1 < n; ++j) {
        const double h1 = mesh[j] - mesh[j - 1], h2 = mesh[j + 1] - mesh[j];
        d[j] = -h2 / (h1 * (h1 + h2)) * rho[j - 1] + (h2 - h1) / (h1 * h2) * rho[j] + h1 / (h2 * (h1 + h2)) * rho[j + 1];
    }
    {
        const double h1 = mesh[1] - mesh[0], h2 = mesh[2] - mesh[1];
        d[0] = -(2 * h1 + h2) / (h1 * (h1 + h2)) * rho[0] + (h1 + h2) / (h1 * h2) * rho[1] -
               h1 / (h2 * (h1 + h2)) * rho[2];
    }
    {
        const std::size_t M = n - 1;
        const double h1 = mesh[M - 1] - mesh[M - 2], h2 = mesh[M] - mesh[M - 1];
        d[M] = h2 / (h1 * (h1 + h2)) * rho[M - 2] - (h1 + h2) / (h1 * h2) * rho[M - 1] +
               (h1 + 2 * h2) / (h2 * (h1 + h2)) * rho[M];
    }
    return d;
}

DuhamelKernel mu_from_rho(const Series& rho, const TimeMesh& mesh, double alpha) {
    check_alpha(alpha);
    require_finite(rho, "mu_from_rho");
    if (rho.size() != mesh.size()) throw ShapeError("mu_from_rho: rho must be sampled on the mesh");
    DuhamelKernel k;
    k.alpha = alpha;
    k.mesh = mesh;
    k.singular = rho[0] / gamma_fn(alpha);
    k.regular = singular_convolve(alpha, rho_derivative(rho, mesh), mesh);
    k.rho_ref = rho;
    return k;
}

Series mu_by_derivative(const Series& rho, const TimeMesh& mesh, double alpha) {
    check_alpha(alpha);
    require_finite(rho, "mu_by_derivative");
    const Series G = singular_convolve(alpha, rho, mesh);
    const std::size_t n = mesh.size();
    Series d(n, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t j = 1; j + 1 < n; ++j) {
        const double h1 = mesh[j] - mesh[j - 1], h2 = mesh[j + 1] - mesh[j];
        d[j] = -h2 / (h1 * (h1 + h2)) * G[j - 1] + (h2 - h1) / (h1 * h2) * G[j] + h1 / (h2 * (h1 + h2)) * G[j + 1];
    }
    return d;
}

double mu_l1_norm(const DuhamelKernel& mu) {
    static const detail::UnitRule rule = detail::gauss_unit<12>();
    const double a = mu.alpha;
    const TimeMesh& m = mu.mesh;
    const Series& R = mu.regular;
    double total = 0.0;
    // First cell: t = t1 y^{1/a} turns c t^{a-1} dt into the constant c t1^a / a dy.
    {
        const double t1 = m[1];
        const int sub = 16;
        for (int s = 0; s < sub; ++s)
            for (std::size_t q = 0; q < rule.size(); ++q) {
                const double y = (s + rule.x[q]) / sub;
                const double t = t1 * std::pow(y, 1.0 / a);
                const double r = R[0] + (R[1] - R[0]) * t / t1;
                const double jac = t1 / a * std::pow(y, 1.0 / a - 1.0);
                total += rule.w[q] / sub * std::abs(mu.singular * t1 * std::pow(t1, a - 1.0) / a + r * jac);
            }
    }
    for (std::size_t i = 1; i + 1 < m.size(); ++i) {
        const double ta = m[i], tb = m[i + 1], h = tb - ta;
        for (int s = 0; s < 2; ++s)
            for (std::size_t q = 0; q < rule.size(); ++q) {
                const double x = (s + rule.x[q]) / 2.0;
                const double t = ta + h * x;
                total += h * rule.w[q] / 2.0 *
                         std::abs(mu.singular * std::pow(t, a - 1.0) + R[i] + (R[i + 1] - R[i]) * x);
            }
    }
    return total;
}

double mu_l1_bound(const DuhamelKernel& mu) {
    const Series d = rho_derivative(mu.rho_ref, mu.mesh);
    double dmax = 0.0;
    for (double v : d) dmax = std::max(dmax, std::abs(v));
    const double T = mu.mesh.t_end();
    return (std::abs(mu.rho_ref.at(0)) + T * dmax) * std::pow(T, mu.alpha) / (gamma_fn(mu.alpha) * mu.alpha);
}

SolutionField convolve_representation(const DuhamelKernel& mu, const SolutionField& v) {
    check_pair(mu, v);
    const ConvolutionWeights cw(mu);
    const std::size_t M = mu.mesh.steps();
    SolutionField out{Eigen::MatrixXd::Zero(v.values.rows(), static_cast<Eigen::Index>(M + 1)), v.mesh, v.grid,
                      v.modes_used};
    parallel_for(M, [&](std::size_t b, std::size_t e) {
        Eigen::VectorXd w;
        for (std::size_t j = b + 1; j <= e; ++j) {
            cw.column(j, w);
            out.values.col(static_cast<Eigen::Index>(j)) = v.values.leftCols(static_cast<Eigen::Index>(j + 1)) * w;
        }
    });
    return out;
}

Series convolve_representation(const DuhamelKernel& mu, const SolutionField& v, std::size_t node) {
    check_pair(mu, v);
    if (node >= static_cast<std::size_t>(v.values.rows())) throw ShapeError("convolve_representation: node out of range");
    const ConvolutionWeights cw(mu);
    const std::size_t M = mu.mesh.steps();
    const Eigen::RowVectorXd trace = v.values.row(static_cast<Eigen::Index>(node));
    Series out(M + 1, 0.0);
    Eigen::VectorXd w;
    for (std::size_t j = 1; j <= M; ++j) {
        cw.column(j, w);
        out[j] = trace.head(static_cast<Eigen::Index>(j + 1)).dot(w);
    }
    return out;
}

void export_mu_csv(const DuhamelKernel& mu, const std::string& path) {
    io::write_csv(path, {"t", "mu", "regular"}, {mu.mesh.nodes(), mu.values(), mu.regular});
}

}  // namespace fracdiff
