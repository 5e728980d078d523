#include "fracdiff/time_frac.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <boost/math/special_functions/beta.hpp>

#include "fracdiff/error.hpp"
#include "fracdiff/special_fn.hpp"
#include "quadrature.hpp"

namespace fracdiff {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_alpha(double alpha, const char* who) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw DomainError(std::string(who) + ": alpha must lie in (0,1), got " + std::to_string(alpha));
}

void require_length(const Series& s, const TimeMesh& mesh, const char* who) {
    if (s.size() != mesh.size())
        throw ShapeError(std::string(who) + ": series has " + std::to_string(s.size()) +
                         " samples but the mesh has " + std::to_string(mesh.size()) + " nodes");
}

// b^p - a^p for 0 <= a < b without cancellation.
double power_diff(double a, double b, double p) {
    if (a == 0.0) return std::pow(b, p);
    return std::pow(a, p) * std::expm1(p * std::log1p((b - a) / a));
}

// Weights of f_left and f_right for int_a^b g_gamma(tau) f_lin dtau, where
// f_left sits at tau = b and f_right at tau = a.
struct CellWeights {
    double left;
    double right;
};

CellWeights cell_weights(double gamma, double a, double b) {
    const double h = b - a;
    const double g0 = power_diff(a, b, gamma) / std::tgamma(gamma + 1.0);
    const double g1 = power_diff(a, b, gamma + 1.0) / (std::tgamma(gamma) * (gamma + 1.0));
    return {(g1 - a * g0) / h, (b * g0 - g1) / h};
}

void require_uniform(const TimeMesh& mesh, const char* who) {
    if (!mesh.is_uniform()) throw MeshError(std::string(who) + ": a uniform mesh is required");
}

}  // namespace

// ---------------------------------------------------------------- TimeMesh

TimeMesh::TimeMesh(std::vector<double> nodes) : nodes_(std::move(nodes)) {
    if (nodes_.size() < 3)
        throw MeshError("TimeMesh: at least 3 nodes are required, got " + std::to_string(nodes_.size()));
    if (nodes_[0] != 0.0) throw MeshError("TimeMesh: the first node must be 0");
    for (std::size_t i = 1; i < nodes_.size(); ++i) {
        if (!std::isfinite(nodes_[i]) || !(nodes_[i] > nodes_[i - 1]))
            throw MeshError("TimeMesh: nodes must be finite and strictly increasing (index " +
                            std::to_string(i) + ")");
    }
    const double mean = nodes_.back() / static_cast<double>(nodes_.size() - 1);
    uniform_ = true;
    for (std::size_t i = 1; i < nodes_.size(); ++i) {
        if (std::abs((nodes_[i] - nodes_[i - 1]) - mean) > 1e-10 * mean) {
            uniform_ = false;
            break;
        }
    }
}

TimeMesh TimeMesh::uniform(double t_end, std::size_t steps) {
    if (!(t_end > 0.0) || !std::isfinite(t_end)) throw MeshError("TimeMesh: T must be positive");
    if (steps < 2) throw MeshError("TimeMesh: at least 2 steps are required");
    std::vector<double> n(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i) n[i] = t_end * static_cast<double>(i) / static_cast<double>(steps);
    n.back() = t_end;
    return TimeMesh(std::move(n));
}

double TimeMesh::step() const {
    if (!uniform_) throw MeshError("TimeMesh: step() requested on a non-uniform mesh");
    return nodes_.back() / static_cast<double>(nodes_.size() - 1);
}

TimeMesh TimeMesh::refined() const {
    std::vector<double> n;
    n.reserve(2 * nodes_.size() - 1);
    for (std::size_t i = 0; i + 1 < nodes_.size(); ++i) {
        n.push_back(nodes_[i]);
        n.push_back(0.5 * (nodes_[i] + nodes_[i + 1]));
    }
    n.push_back(nodes_.back());
    return TimeMesh(std::move(n));
}

// ---------------------------------------------------------------- L1 scheme

Series caputo_l1(const Series& f, double alpha, const TimeMesh& mesh) {
    require_alpha(alpha, "caputo_l1");
    require_length(f, mesh, "caputo_l1");
    const std::size_t n = mesh.size();
    const double inv_g = 1.0 / std::tgamma(2.0 - alpha);
    const double e = 1.0 - alpha;
    Series out(n, kNaN);
    const auto& t = mesh.nodes();

    if (mesh.is_uniform()) {
        const double dt = mesh.step();
        Series b(n);
        const double scale = std::pow(dt, -alpha) * inv_g;
        for (std::size_t d = 1; d < n; ++d) b[d] = power_diff(double(d - 1), double(d), e) * scale;
        for (std::size_t j = 1; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < j; ++i) acc += (f[i + 1] - f[i]) * b[j - i];
            out[j] = acc + f[0] * g_kernel(e, t[j]);
        }
        return out;
    }
    for (std::size_t j = 1; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < j; ++i) {
            const double w = power_diff(t[j] - t[i + 1], t[j] - t[i], e) * inv_g / (t[i + 1] - t[i]);
            acc += (f[i + 1] - f[i]) * w;
        }
        out[j] = acc + f[0] * g_kernel(e, t[j]);
    }
    return out;
}

// ---------------------------------------------------------------- product integration

namespace {

double convolve_node(double gamma, const Series& f, const TimeMesh& mesh, std::size_t j,
                     const std::vector<CellWeights>* table) {
    const auto& t = mesh.nodes();
    double acc = 0.0;
    for (std::size_t i = 0; i < j; ++i) {
        const CellWeights w = table ? (*table)[j - i] : cell_weights(gamma, t[j] - t[i + 1], t[j] - t[i]);
        acc += f[i] * w.left + f[i + 1] * w.right;
    }
    return acc;
}

std::vector<CellWeights> uniform_table(double gamma, const TimeMesh& mesh) {
    const double dt = mesh.step();
    std::vector<CellWeights> tab(mesh.size());
    for (std::size_t d = 1; d < mesh.size(); ++d) tab[d] = cell_weights(gamma, (d - 1) * dt, d * dt);
    return tab;
}

void require_gamma(double gamma, const char* who) {
    if (!(gamma > 0.0) || !std::isfinite(gamma))
        throw DomainError(std::string(who) + ": kernel exponent must be positive");
}

}  // namespace

Series singular_convolve(double gamma, const Series& values, const TimeMesh& mesh) {
    std::vector<std::size_t> all(mesh.size());
    for (std::size_t j = 0; j < all.size(); ++j) all[j] = j;
    return singular_convolve_at(gamma, values, mesh, all);
}

Series singular_convolve_at(double gamma, const Series& values, const TimeMesh& mesh,
                            const std::vector<std::size_t>& indices) {
    require_gamma(gamma, "singular_convolve");
    require_length(values, mesh, "singular_convolve");
    std::vector<CellWeights> tab;
    if (mesh.is_uniform()) tab = uniform_table(gamma, mesh);
    Series out;
    out.reserve(indices.size());
    for (std::size_t j : indices) {
        if (j >= mesh.size()) throw ShapeError("singular_convolve: node index out of range");
        out.push_back(convolve_node(gamma, values, mesh, j, tab.empty() ? nullptr : &tab));
    }
    return out;
}

Series convolve_weighted(const PowerWeighted& a, const PowerWeighted& b, const TimeMesh& mesh) {
    require_uniform(mesh, "convolve_weighted");
    require_length(a.smooth, mesh, "convolve_weighted");
    require_length(b.smooth, mesh, "convolve_weighted");
    const double pa = a.exponent, pb = b.exponent;
    if (!(pa > -1.0) || !(pb > -1.0)) throw DomainError("convolve_weighted: exponents must exceed -1");

    const std::size_t n = mesh.size();
    const double dt = mesh.step();
    static const detail::UnitRule rule = detail::gauss_unit<8>();
    const std::size_t Q = rule.size();

    // Pa[d*Q+q] = ((d + 1 - x_q) dt)^pa, Pb[i*Q+q] = ((i + x_q) dt)^pb * w_q * dt.
    std::vector<double> Pa(n * Q), Pb(n * Q);
    for (std::size_t d = 1; d < n; ++d)
        for (std::size_t q = 0; q < Q; ++q) {
            Pa[d * Q + q] = std::pow((double(d) + 1.0 - rule.x[q]) * dt, pa);
            Pb[d * Q + q] = std::pow((double(d) + rule.x[q]) * dt, pb) * rule.w[q] * dt;
        }
    std::vector<double> x1(Q), x2(Q);
    for (std::size_t q = 0; q < Q; ++q) {
        x1[q] = rule.x[q];
        x2[q] = rule.x[q] * rule.x[q];
    }

    auto ibeta = [](double p, double q, double x) { return boost::math::beta(p, q, x); };

    Series out(n, 0.0);
    for (std::size_t j = 1; j < n; ++j) {
        const double tj = double(j) * dt;
        double acc = 0.0;
        // Quadratic in x = (s - t_i)/dt: c0 + c1 x + c2 x^2.
        auto coeffs = [&](std::size_t i, double& c0, double& c1, double& c2) {
            const double A0 = a.smooth[j - i], A1 = a.smooth[j - i - 1] - a.smooth[j - i];
            const double B0 = b.smooth[i], B1 = b.smooth[i + 1] - b.smooth[i];
            c0 = A0 * B0;
            c1 = A0 * B1 + A1 * B0;
            c2 = A1 * B1;
        };
        {
            // First cell: int_0^dt (t-s)^pa s^{pb+k} ds via incomplete beta.
            double c0, c1, c2;
            coeffs(0, c0, c1, c2);
            const double x = std::min(1.0, dt / tj);
            const double base = std::pow(tj, pa + pb + 1.0);
            const double r = tj / dt;
            const double m0 = base * ibeta(pb + 1.0, pa + 1.0, x);
            const double m1 = base * r * ibeta(pb + 2.0, pa + 1.0, x);
            const double m2 = base * r * r * ibeta(pb + 3.0, pa + 1.0, x);
            acc += c0 * m0 + c1 * m1 + c2 * m2;
        }
        if (j >= 2) {
            // Last cell, y = t_j - s in [0, dt], x = 1 - y/dt.
            double c0, c1, c2;
            coeffs(j - 1, c0, c1, c2);
            const double x = dt / tj;
            const double base = std::pow(tj, pa + pb + 1.0);
            const double r = tj / dt;
            const double n0 = base * ibeta(pa + 1.0, pb + 1.0, x);
            const double n1 = base * r * ibeta(pa + 2.0, pb + 1.0, x);
            const double n2 = base * r * r * ibeta(pa + 3.0, pb + 1.0, x);
            const double m0 = n0, m1 = n0 - n1, m2 = n0 - 2.0 * n1 + n2;
            acc += c0 * m0 + c1 * m1 + c2 * m2;
        }
        for (std::size_t i = 1; i + 1 < j; ++i) {
            double c0, c1, c2;
            coeffs(i, c0, c1, c2);
            const double* pa_row = &Pa[(j - i - 1) * Q];
            const double* pb_row = &Pb[i * Q];
            double s = 0.0;
            for (std::size_t q = 0; q < Q; ++q) s += pa_row[q] * pb_row[q] * (c0 + c1 * x1[q] + c2 * x2[q]);
            acc += s;
        }
        out[j] = acc;
    }
    return out;
}

Series convolve_power_kernel(double gamma, double p, const std::function<double(double)>& w,
                             const TimeMesh& mesh) {
    require_gamma(gamma, "convolve_power_kernel");
    require_uniform(mesh, "convolve_power_kernel");
    if (!(p > -1.0)) throw DomainError("convolve_power_kernel: p must exceed -1");

    const std::size_t n = mesh.size();
    const double dt = mesh.step();
    static const detail::UnitRule inner = detail::gauss_unit<8>();
    // The first-cell rule is shared by every node, so it can afford to be fine.
    static const detail::UnitRule first = detail::graded_unit<10>(10, 0.25);
    static const detail::UnitRule graded = detail::graded_unit<16>(3, 0.125);
    const double inv_gamma_fn = 1.0 / std::tgamma(gamma);
    const double ep = 1.0 / (p + 1.0);
    const double eg = 1.0 / gamma;

    auto g = [&](double tau) { return std::pow(tau, gamma - 1.0) * inv_gamma_fn; };
    auto f = [&](double s) { return std::pow(s, p) * w(s); };

    // Interior cells.
    const std::size_t Q = inner.size();
    std::vector<double> F(n * Q), G(n * Q);
    for (std::size_t i = 1; i < n; ++i)
        for (std::size_t q = 0; q < Q; ++q) {
            F[i * Q + q] = f((double(i) + inner.x[q]) * dt) * inner.w[q] * dt;
            G[i * Q + q] = g((double(i) + 1.0 - inner.x[q]) * dt);
        }

    // First cell after s = dt u^{1/(p+1)}.
    const std::size_t R0 = first.size();
    std::vector<double> s0(R0), W0(R0);
    const double c_first = std::pow(dt, p + 1.0) * ep;
    for (std::size_t r = 0; r < R0; ++r) {
        s0[r] = dt * std::pow(first.x[r], ep);
        W0[r] = w(s0[r]) * first.w[r] * c_first;
    }
    const std::size_t R = graded.size();
    // Last cell after y = dt v^{1/gamma}: f at t_i + dt (1 - v^{1/gamma}).
    std::vector<double> yl(R);
    for (std::size_t r = 0; r < R; ++r) yl[r] = dt * std::pow(graded.x[r], eg);
    std::vector<double> FL(n * R);
    for (std::size_t i = 1; i < n; ++i)
        for (std::size_t r = 0; r < R; ++r) FL[i * R + r] = f(double(i + 1) * dt - yl[r]) * graded.w[r];
    const double c_last = std::pow(dt, gamma) * eg * inv_gamma_fn;

    Series out(n, 0.0);
    {
        // j = 1: split the single cell at dt/2.
        const double hh = 0.5 * dt;
        double acc = 0.0;
        const double cf = std::pow(hh, p + 1.0) * ep;
        const double cl = std::pow(hh, gamma) * eg * inv_gamma_fn;
        for (std::size_t r = 0; r < R0; ++r) {
            const double s = hh * std::pow(first.x[r], ep);
            acc += first.w[r] * cf * w(s) * g(dt - s);
            const double y = hh * std::pow(first.x[r], eg);
            acc += first.w[r] * cl * f(dt - y);
        }
        out[1] = acc;
    }
    for (std::size_t j = 2; j < n; ++j) {
        const double tj = double(j) * dt;
        double acc = 0.0;
        for (std::size_t r = 0; r < R0; ++r) acc += W0[r] * g(tj - s0[r]);
        double last = 0.0;
        for (std::size_t r = 0; r < R; ++r) last += FL[(j - 1) * R + r];
        acc += last * c_last;
        for (std::size_t i = 1; i + 1 < j; ++i) {
            const double* fr = &F[i * Q];
            const double* gr = &G[(j - i - 1) * Q];
            double s = 0.0;
            for (std::size_t q = 0; q < Q; ++q) s += fr[q] * gr[q];
            acc += s;
        }
        out[j] = acc;
    }
    return out;
}

// ---------------------------------------------------------------- Yosida kernels

YosidaKernels yosida_kernels(double alpha, int m, const TimeMesh& mesh) {
    require_alpha(alpha, "yosida_kernels");
    if (m < 1) throw DomainError("yosida_kernels: m must be a positive integer");
    YosidaKernels yk;
    yk.alpha = alpha;
    yk.m = m;
    yk.mesh = mesh;
    const std::size_t n = mesh.size();
    yk.h_values.assign(n, std::numeric_limits<double>::infinity());
    yk.g_values.assign(n, 0.0);
    yk.g_values[0] = double(m);
    for (std::size_t j = 1; j < n; ++j) {
        const double t = mesh[j];
        const double z = -double(m) * std::pow(t, alpha);
        yk.h_values[j] = double(m) * std::pow(t, alpha - 1.0) * mittag_leffler({alpha, alpha}, z);
        yk.g_values[j] = double(m) * mittag_leffler({alpha, 1.0}, z);
    }
    return yk;
}

namespace {
std::function<double(double)> h_smooth(double alpha, int m) {
    return [alpha, m](double s) { return double(m) * mittag_leffler({alpha, alpha}, -double(m) * std::pow(s, alpha)); };
}
}  // namespace

ResolventResidual yosida_resolvent_residual(const YosidaKernels& yk) {
    const TimeMesh& mesh = yk.mesh;
    const double a = yk.alpha;
    const Series conv = convolve_power_kernel(a, a - 1.0, h_smooth(a, yk.m), mesh);
    ResolventResidual rr;
    rr.residual.assign(mesh.size(), 0.0);
    for (std::size_t j = 1; j < mesh.size(); ++j) {
        const double mg = double(yk.m) * g_kernel(a, mesh[j]);
        rr.residual[j] = yk.h_values[j] + double(yk.m) * conv[j] - mg;
        rr.l1 += (mesh[j] - mesh[j - 1]) * std::abs(rr.residual[j]);
    }
    return rr;
}

Series yosida_g_by_convolution(const YosidaKernels& yk) {
    Series out = convolve_power_kernel(1.0 - yk.alpha, yk.alpha - 1.0, h_smooth(yk.alpha, yk.m), yk.mesh);
    out[0] = double(yk.m);
    return out;
}

double yosida_l1_distance(const YosidaKernels& yk) {
    double acc = 0.0;
    for (std::size_t j = 1; j < yk.mesh.size(); ++j)
        acc += (yk.mesh[j] - yk.mesh[j - 1]) *
               std::abs(yk.g_values[j] - g_kernel(1.0 - yk.alpha, yk.mesh[j]));
    return acc;
}

Series yosida_derivative(const Series& f, double alpha, int m, const TimeMesh& mesh) {
    require_alpha(alpha, "yosida_derivative");
    require_length(f, mesh, "yosida_derivative");
    if (m < 1) throw DomainError("yosida_derivative: m must be a positive integer");
    const double md = double(m);
    // K(tau) = int_0^tau k = m tau E_{alpha,2}(-m tau^alpha).
    auto K = [&](double tau) {
        return tau == 0.0 ? 0.0 : md * tau * mittag_leffler({alpha, 2.0}, -md * std::pow(tau, alpha));
    };
    auto k = [&](double tau) { return md * mittag_leffler({alpha, 1.0}, -md * std::pow(tau, alpha)); };
    const std::size_t n = mesh.size();
    const auto& t = mesh.nodes();
    Series out(n, kNaN);
    if (mesh.is_uniform()) {
        const double dt = mesh.step();
        Series Kd(n), w(n);
        for (std::size_t d = 0; d < n; ++d) Kd[d] = K(double(d) * dt);
        for (std::size_t d = 1; d < n; ++d) w[d] = (Kd[d] - Kd[d - 1]) / dt;
        for (std::size_t j = 1; j < n; ++j) {
            double acc = k(t[j]) * f[0];
            for (std::size_t i = 0; i < j; ++i) acc += (f[i + 1] - f[i]) * w[j - i];
            out[j] = acc;
        }
        return out;
    }
    for (std::size_t j = 1; j < n; ++j) {
        double acc = k(t[j]) * f[0];
        for (std::size_t i = 0; i < j; ++i)
            acc += (f[i + 1] - f[i]) * (K(t[j] - t[i]) - K(t[j] - t[i + 1])) / (t[i + 1] - t[i]);
        out[j] = acc;
    }
    return out;
}

IdentityReport check_fundamental_identity(const Series& u, double alpha, int m, const TimeMesh& mesh) {
    require_length(u, mesh, "check_fundamental_identity");
    Series up(u.size()), up2(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        up[i] = std::max(u[i], 0.0);
        up2[i] = up[i] * up[i];
    }
    const Series du = yosida_derivative(u, alpha, m, mesh);
    const Series dh = yosida_derivative(up2, alpha, m, mesh);
    IdentityReport rep;
    rep.defect.assign(u.size(), 0.0);
    rep.min_defect = std::numeric_limits<double>::infinity();
    for (std::size_t j = 1; j < u.size(); ++j) {
        rep.defect[j] = up[j] * du[j] - 0.5 * dh[j];
        if (rep.defect[j] < rep.min_defect) {
            rep.min_defect = rep.defect[j];
            rep.argmin = j;
        }
    }
    return rep;
}

}  // namespace fracdiff
