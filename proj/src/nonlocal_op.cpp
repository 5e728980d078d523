#include "fracdiff/nonlocal_op.hpp"

#include "fracdiff/error.hpp"
#include "fracdiff/parallel.hpp"
#include "fracdiff/special_fn.hpp"
#include "quadrature.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace fracdiff {

namespace {

constexpr double kPi = std::numbers::pi;
// Offsets with max-norm up to this radius get cell-integrated weights.
constexpr int kNearCells = 4;

void check_dimension(int n) {
    if (n != 1 && n != 2) throw DomainError("dimension must be 1 or 2");
}

void check_beta(double beta) {
    if (!(beta > 0.0 && beta < 1.0)) throw DomainError("beta must lie in (0,1)");
}

boost::math::quadrature::tanh_sinh<double>& ts_rule() {
    thread_local boost::math::quadrature::tanh_sinh<double> rule;
    return rule;
}

boost::math::quadrature::exp_sinh<double>& es_rule() {
    thread_local boost::math::quadrature::exp_sinh<double> rule;
    return rule;
}

template <class F>
double ts(F f, double a, double b) {
    return ts_rule().integrate(f, a, b, 1e-12);
}

template <class F>
double es(F f, double a) {
    return es_rule().integrate(f, a, std::numeric_limits<double>::infinity(), 1e-12);
}

// Integral over [0, 2pi) split into octants, Gauss-Legendre on each.
template <class F>
double angular_integral(F f) {
    static const detail::UnitRule rule = detail::gauss_unit<20>();
    double s = 0.0;
    for (int o = 0; o < 8; ++o) {
        const double a = o * kPi / 4.0;
        for (std::size_t q = 0; q < rule.size(); ++q) s += rule.w[q] * (kPi / 4.0) * f(a + (kPi / 4.0) * rule.x[q]);
    }
    return s;
}

// int_0^R r^p f(r) dr for f(r) ~ f(r0) (r/r0)^{-q} on (0, r0), r0 = 1e-6 R;
// the head is integrated in closed form to avoid coordinate cancellation.
template <class F>
double singular_radial(F f, double p, double q, double R) {
    const double r0 = 1e-6 * R;
    const double head = f(r0) * std::pow(r0, p + 1.0) / (p - q + 1.0);
    return head + ts([&](double r) { return std::pow(r, p) * f(r); }, r0, R);
}

// Distance from the origin to the boundary of the square [-s, s]^2 in direction theta.
double square_radius(double s, double theta) {
    return s / std::max(std::abs(std::cos(theta)), std::abs(std::sin(theta)));
}

// Correction weights that reproduce a 2x2 second-moment tensor on the
// neighbour offsets +-e1, +-e2, +-(e1+e2), +-(e1-e2) (unit spacing).
struct NeighbourCorrection {
    double e1, e2, d_plus, d_minus;
};

NeighbourCorrection distribute_moment(double m11, double m22, double m12) {
    NeighbourCorrection c{};
    c.d_plus = std::max(m12, 0.0) / 2.0;
    c.d_minus = std::max(-m12, 0.0) / 2.0;
    c.e1 = m11 / 2.0 - c.d_plus - c.d_minus;
    c.e2 = m22 / 2.0 - c.d_plus - c.d_minus;
    return c;
}

// Dimensionless weight table for translation-invariant kernels at unit
// spacing. Physical weights are h^{-2beta} times these.
struct LatticeWeights {
    int n = 1;
    std::array<int, 2> half{0, 0};
    std::vector<double> w;  // (2 half0 + 1) x (2 half1 + 1), row-major in offset 0
    double total = 0.0;     // sum over the whole lattice, tail included

    double at(int m0, int m1) const {
        return w[static_cast<std::size_t>(m0 + half[0]) * (2 * half[1] + 1) + (m1 + half[1])];
    }
    double& ref(int m0, int m1) {
        return w[static_cast<std::size_t>(m0 + half[0]) * (2 * half[1] + 1) + (m1 + half[1])];
    }
};

LatticeWeights lattice_weights_1d(const KernelSpec& k, int half, long far) {
    const double beta = k.beta();
    const double ap = k.angular(0.0);
    const double am = k.angular(kPi);
    const double e = 2.0 - 2.0 * beta;
    LatticeWeights lw;
    lw.n = 1;
    lw.half = {half, 0};
    lw.w.assign(2 * half + 1, 0.0);
    // Second-moment matched cell weight; midpoint beyond kNearCells.
    auto cell = [&](long m) {
        const double md = static_cast<double>(m);
        if (m <= kNearCells) return (std::pow(md + 0.5, e) - std::pow(md - 0.5, e)) / (e * md * md);
        return std::pow(md, -1.0 - 2.0 * beta);
    };
    // Central cell moment int_{-1/2}^{1/2} z^2 |z|^{-1-2beta} per side.
    const double central = std::pow(0.5, e) / e;
    double total = 0.0;
    const long top = std::max<long>(far, half);
    for (long m = 1; m <= top; ++m) {
        double wp = ap * cell(m);
        double wm = am * cell(m);
        if (m == 1) {
            wp += ap * central;
            wm += am * central;
        }
        if (m <= half) {
            lw.ref(static_cast<int>(m), 0) = wp;
            lw.ref(static_cast<int>(-m), 0) = wm;
        }
        if (m <= far) total += wp + wm;
    }
    total += (ap + am) * std::pow(static_cast<double>(far) + 0.5, -2.0 * beta) / (2.0 * beta);
    lw.total = total;
    return lw;
}

LatticeWeights lattice_weights_2d(const KernelSpec& k, std::array<int, 2> half, long far) {
    const double beta = k.beta();
    const double p = 2.0 + 2.0 * beta;
    LatticeWeights lw;
    lw.n = 2;
    lw.half = half;
    lw.w.assign(static_cast<std::size_t>(2 * half[0] + 1) * (2 * half[1] + 1), 0.0);

    static const detail::UnitRule g12 = detail::gauss_unit<12>();
    auto near_cell = [&](int m0, int m1) {
        double s = 0.0;
        for (std::size_t i = 0; i < g12.size(); ++i) {
            const double z0 = m0 - 0.5 + g12.x[i];
            for (std::size_t j = 0; j < g12.size(); ++j) {
                const double z1 = m1 - 0.5 + g12.x[j];
                const double r2 = z0 * z0 + z1 * z1;
                s += g12.w[i] * g12.w[j] * k.angular(std::atan2(z1, z0)) * std::pow(r2, 1.0 - 0.5 * p);
            }
        }
        return s / static_cast<double>(m0 * m0 + m1 * m1);
    };
    const double e = 2.0 - 2.0 * beta;
    auto mom = [&](int a, int b) {
        return angular_integral([&](double th) {
            const double c[2] = {std::cos(th), std::sin(th)};
            return k.angular(th) * c[a] * c[b] * std::pow(square_radius(0.5, th), e) / e;
        });
    };
    const NeighbourCorrection nc = distribute_moment(mom(0, 0), mom(1, 1), mom(0, 1));

    auto weight = [&](int m0, int m1) {
        const int mx = std::max(std::abs(m0), std::abs(m1));
        double w;
        if (mx <= kNearCells) {
            w = near_cell(m0, m1);
        } else {
            const double r2 = double(m0) * m0 + double(m1) * m1;
            w = k.angular(std::atan2(double(m1), double(m0))) * std::pow(r2, -0.5 * p);
        }
        if (mx == 1) {
            if (m1 == 0) w += nc.e1;
            else if (m0 == 0) w += nc.e2;
            else if (m0 == m1) w += nc.d_plus;
            else w += nc.d_minus;
        }
        return w;
    };

    double total = 0.0;
    const long top = std::max<long>(far, std::max(half[0], half[1]));
    for (long a = -top; a <= top; ++a) {
        for (long b = -top; b <= top; ++b) {
            if (a == 0 && b == 0) continue;
            const bool in_table = std::abs(a) <= half[0] && std::abs(b) <= half[1];
            const bool in_far = std::max(std::abs(a), std::abs(b)) <= far;
            if (!in_table && !in_far) continue;
            const double w = weight(static_cast<int>(a), static_cast<int>(b));
            if (in_table) lw.ref(static_cast<int>(a), static_cast<int>(b)) = w;
            if (in_far) total += w;
        }
    }
    const double edge = static_cast<double>(far) + 0.5;
    total += angular_integral(
        [&](double th) { return k.angular(th) * std::pow(square_radius(edge, th), -2.0 * beta) / (2.0 * beta); });
    lw.total = total;
    return lw;
}

LatticeWeights lattice_weights(const KernelSpec& k, std::array<int, 2> half, long far) {
    return k.dimension() == 1 ? lattice_weights_1d(k, half[0], far) : lattice_weights_2d(k, half, far);
}

// Second moment int_{C0} z z^T k0(x, x+z) dz over the central cell of side h,
// physical units.
std::array<double, 3> central_moment_product(const ProductForm& pf, int n, const Point& x, double h) {
    const double q = n + 2.0 * pf.beta;
    if (n == 1) {
        auto f = [&](double sign) {
            return singular_radial([&](double z) { return pf.k0(x, {x[0] + sign * z, 0.0}); }, 2.0, q, 0.5 * h);
        };
        return {f(1.0) + f(-1.0), 0.0, 0.0};
    }
    std::array<double, 3> m{0.0, 0.0, 0.0};
    for (int c = 0; c < 3; ++c) {
        m[c] = angular_integral([&](double th) {
            const double u[2] = {std::cos(th), std::sin(th)};
            const double radial = singular_radial(
                [&](double r) { return pf.k0(x, {x[0] + r * u[0], x[1] + r * u[1]}); }, 3.0, q,
                square_radius(0.5 * h, th));
            const double f = c == 0 ? u[0] * u[0] : (c == 1 ? u[1] * u[1] : u[0] * u[1]);
            return f * radial;
        });
    }
    return m;
}

}  // namespace

double cn_beta(int n, double beta) {
    if (n < 1 || n > 3) throw DomainError("cn_beta: n must be 1, 2 or 3");
    if (!(beta > 0.0)) throw DomainError("cn_beta: beta must be positive");
    if (beta >= 0.999) throw DomainError("cn_beta: beta >= 0.999 (Gamma(1-beta) overflow)");
    return beta * std::pow(2.0, 2.0 * beta) * gamma_fn(0.5 * (n + 2.0 * beta)) /
           (std::pow(kPi, 0.5 * n) * gamma_fn(1.0 - beta));
}

double sphere_measure(int n) {
    check_dimension(n);
    return n == 1 ? 2.0 : 2.0 * kPi;
}

double lambda_analytic(int n, double beta) {
    return cn_beta(n, beta) * sphere_measure(n) / (2.0 * beta * (1.0 - beta));
}

double symbol_constant(double beta) {
    check_beta(beta);
    return kPi / (2.0 * gamma_fn(1.0 + 2.0 * beta) * std::sin(kPi * beta));
}

// ---------------------------------------------------------------- KernelSpec

KernelSpec::KernelSpec(Variant v, int dimension) : v_(std::move(v)), n_(dimension) {
    check_dimension(n_);
    if (auto* fl = std::get_if<FractionalLaplacian>(&v_)) {
        check_beta(fl->beta);
        (void)cn_beta(n_, fl->beta);
    } else if (auto* an = std::get_if<Anisotropic>(&v_)) {
        check_beta(an->beta);
        if (!an->a) throw DomainError("anisotropic kernel needs a(theta)");
        if (!(an->Lambda >= 1.0)) throw DomainError("Lambda must be >= 1");
        const int samples = n_ == 1 ? 1 : 720;
        for (int s = 0; s < samples; ++s) {
            const double th = n_ == 1 ? 0.0 : 2.0 * kPi * (s + 0.37) / samples;
            const double a1 = an->a(th);
            const double a2 = an->a(th + kPi);
            if (!std::isfinite(a1) || !std::isfinite(a2)) throw DomainError("a(theta) must be finite");
            if (std::abs(a1 - a2) > 1e-12 * std::max(1.0, std::abs(a1)))
                throw DomainError("a(theta) must satisfy a(theta) = a(-theta)");
            const double lo = 1.0 / an->Lambda;
            for (double a : {a1, a2}) {
                if (a < lo * (1.0 - 1e-12) || a > an->Lambda * (1.0 + 1e-12))
                    throw DomainError("a(theta) must lie in [1/Lambda, Lambda]");
            }
        }
    } else {
        auto& pf = std::get<ProductForm>(v_);
        check_beta(pf.beta);
        if (!pf.a || !pf.k0 || !pf.tail) throw DomainError("product-form kernel needs a, k0 and a tail");
        if (!(pf.beta0 > 0.0 && pf.beta0 <= pf.beta)) throw DomainError("need 0 < beta0 <= beta");
        if (!(pf.Lambda >= std::max(1.0, 1.0 / pf.beta0))) throw DomainError("Lambda must be >= max(1, 1/beta0)");
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> U(-2.0, 2.0);
        for (int s = 0; s < 256; ++s) {
            const Point x{U(rng), n_ == 2 ? U(rng) : 0.0};
            const Point y{U(rng), n_ == 2 ? U(rng) : 0.0};
            const double axy = pf.a(x, y);
            const double ayx = pf.a(y, x);
            if (std::abs(axy - ayx) > 1e-12) throw DomainError("a(x,y) must be symmetric");
            if (axy < 0.5 - 1e-12 || axy > 1.0 + 1e-12) throw DomainError("a(x,y) must lie in [1/2, 1]");
        }
    }
}

KernelSpec KernelSpec::fractional_laplacian(double beta, int dimension) {
    return KernelSpec(FractionalLaplacian{beta}, dimension);
}

double KernelSpec::beta() const {
    return std::visit([](const auto& v) { return v.beta; }, v_);
}

double KernelSpec::angular(double theta) const {
    if (auto* fl = std::get_if<FractionalLaplacian>(&v_)) return cn_beta(n_, fl->beta);
    if (auto* an = std::get_if<Anisotropic>(&v_)) return an->a(theta);
    throw DomainError("product-form kernels have no angular density");
}

double KernelSpec::operator()(const Point& x, const Point& y) const {
    const double d0 = y[0] - x[0];
    const double d1 = n_ == 2 ? y[1] - x[1] : 0.0;
    const double r = std::hypot(d0, d1);
    if (auto* pf = std::get_if<ProductForm>(&v_)) return pf->a(x, y) * pf->k0(x, y);
    const double th = n_ == 1 ? (d0 >= 0.0 ? 0.0 : kPi) : std::atan2(d1, d0);
    return angular(th) * std::pow(r, -n_ - 2.0 * beta());
}

std::string KernelSpec::describe() const {
    std::ostringstream os;
    os.precision(17);
    if (auto* fl = std::get_if<FractionalLaplacian>(&v_)) {
        os << "fractional_laplacian(beta=" << fl->beta << ", n=" << n_ << ")";
    } else if (auto* an = std::get_if<Anisotropic>(&v_)) {
        os << "anisotropic(beta=" << an->beta << ", Lambda=" << an->Lambda << ", n=" << n_
           << (an->description.empty() ? "" : ", a=" + an->description) << ")";
    } else {
        auto& pf = std::get<ProductForm>(v_);
        os << "product_form(beta0=" << pf.beta0 << ", beta=" << pf.beta << ", Lambda=" << pf.Lambda << ", n=" << n_
           << (pf.description.empty() ? "" : ", " + pf.description) << ")";
    }
    return os.str();
}

// ---------------------------------------------------------------- Grid

Grid Grid::interval(double a, double b, int nodes) {
    if (!(b > a)) throw DomainError("interval needs a < b");
    if (nodes < 1) throw DomainError("interval needs at least one interior node");
    Grid g;
    g.n_ = 1;
    g.h_ = (b - a) / (nodes + 1);
    g.origin_ = {a, 0.0};
    g.counts_ = {nodes, 1};
    for (int k = 1; k <= nodes; ++k) g.index_.push_back({k, 0});
    g.inside_ = [a, b](const Point& p) { return p[0] > a && p[0] < b; };
    g.diameter_ = b - a;
    g.r_ext_ = 10.0 * g.diameter_;
    std::ostringstream os;
    os.precision(17);
    os << "interval(" << a << "," << b << ";N=" << nodes << ")";
    g.description_ = os.str();
    return g;
}

Grid Grid::ball(Point center, double radius, int nodes) {
    if (!(radius > 0.0)) throw DomainError("ball needs a positive radius");
    if (nodes < 1) throw DomainError("ball needs at least one node per diameter");
    Grid g;
    g.n_ = 2;
    g.h_ = 2.0 * radius / (nodes + 1);
    g.origin_ = {center[0] - radius, center[1] - radius};
    g.counts_ = {nodes, nodes};
    const double r_in = radius * (1.0 - 1e-12);
    g.inside_ = [center, r_in](const Point& p) { return std::hypot(p[0] - center[0], p[1] - center[1]) < r_in; };
    for (int i = 1; i <= nodes; ++i)
        for (int j = 1; j <= nodes; ++j) {
            const Point p{g.origin_[0] + g.h_ * i, g.origin_[1] + g.h_ * j};
            if (g.inside_(p)) g.index_.push_back({i, j});
        }
    g.diameter_ = 2.0 * radius;
    g.r_ext_ = 10.0 * g.diameter_;
    std::ostringstream os;
    os.precision(17);
    os << "ball((" << center[0] << "," << center[1] << ")," << radius << ";N=" << nodes << ")";
    g.description_ = os.str();
    return g;
}

Grid Grid::from_mask(int dimension, Point origin, double h, std::array<int, 2> counts,
                     const std::function<bool(const Point&)>& inside, double diameter) {
    check_dimension(dimension);
    if (!(h > 0.0)) throw DomainError("grid spacing must be positive");
    Grid g;
    g.n_ = dimension;
    g.h_ = h;
    g.origin_ = origin;
    g.counts_ = {counts[0], dimension == 2 ? counts[1] : 1};
    g.inside_ = inside;
    for (int i = 1; i <= g.counts_[0]; ++i)
        for (int j = (dimension == 2 ? 1 : 0); j <= (dimension == 2 ? g.counts_[1] : 0); ++j) {
            const Point p{origin[0] + h * i, dimension == 2 ? origin[1] + h * j : 0.0};
            if (inside(p)) g.index_.push_back({i, j});
        }
    if (g.index_.empty()) throw DomainError("grid mask selects no interior nodes");
    g.diameter_ = diameter;
    g.r_ext_ = 10.0 * diameter;
    g.description_ = "mask";
    return g;
}

double Grid::cell_volume() const { return n_ == 1 ? h_ : h_ * h_; }

Point Grid::point(std::size_t i) const {
    const auto& k = index_[i];
    return {origin_[0] + h_ * k[0], n_ == 2 ? origin_[1] + h_ * k[1] : 0.0};
}

std::vector<Point> Grid::points() const {
    std::vector<Point> p(size());
    for (std::size_t i = 0; i < size(); ++i) p[i] = point(i);
    return p;
}

int Grid::nodes_per_dimension() const {
    std::set<int> a, b;
    for (const auto& k : index_) {
        a.insert(k[0]);
        b.insert(k[1]);
    }
    return n_ == 1 ? static_cast<int>(a.size()) : static_cast<int>(std::min(a.size(), b.size()));
}

void Grid::set_r_ext(double r) {
    if (!(r > 0.0)) throw DomainError("R_ext must be positive");
    r_ext_ = r;
}

std::vector<std::size_t> Grid::nodes_in_ball(const Point& c, double r) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < size(); ++i) {
        const Point p = point(i);
        if (std::hypot(p[0] - c[0], n_ == 2 ? p[1] - c[1] : 0.0) < r) out.push_back(i);
    }
    return out;
}

bool Grid::contains_ball(const Point& c, double r) const {
    if (!inside_(c)) return false;
    const double s = r * (1.0 - 1e-9);
    if (n_ == 1) return inside_({c[0] - s, 0.0}) && inside_({c[0] + s, 0.0});
    for (int k = 0; k < 256; ++k) {
        const double th = 2.0 * kPi * k / 256.0;
        if (!inside_({c[0] + s * std::cos(th), c[1] + s * std::sin(th)})) return false;
    }
    return true;
}

// ---------------------------------------------------------------- assembly

AssembledOperator assemble(const KernelSpec& k, const Grid& grid) {
    if (k.dimension() != grid.dimension()) throw ShapeError("kernel and grid dimensions differ");
    if (grid.nodes_per_dimension() < 8)
        throw ResolutionError("grid too coarse: fewer than 8 interior nodes per dimension");
    const int n = grid.dimension();
    const double h = grid.spacing();
    const double beta = k.beta();
    const std::size_t N = grid.size();
    const auto& idx = grid.index();
    const double vol = grid.cell_volume();

    AssembledOperator op{Eigen::MatrixXd::Zero(N, N), Eigen::VectorXd::Zero(N), grid, k};
    auto& A = op.matrix;

    if (k.translation_invariant()) {
        int lo0 = idx[0][0], hi0 = idx[0][0], lo1 = idx[0][1], hi1 = idx[0][1];
        for (const auto& m : idx) {
            lo0 = std::min(lo0, m[0]);
            hi0 = std::max(hi0, m[0]);
            lo1 = std::min(lo1, m[1]);
            hi1 = std::max(hi1, m[1]);
        }
        const long far = std::max<long>(kNearCells + 1, static_cast<long>(std::ceil(grid.r_ext() / h)));
        const LatticeWeights lw = lattice_weights(k, {hi0 - lo0, n == 2 ? hi1 - lo1 : 0}, far);
        // Row i carries int (u_i - u_j) k(x_i, y_j) h^n; with h^n absorbed the
        // entries scale like h^{-2beta}.
        const double scale = std::pow(h, -2.0 * beta);
        const double diag = scale * lw.total;
        parallel_for(N, [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) {
                double row = 0.0;
                for (std::size_t j = 0; j < N; ++j) {
                    if (j == i) continue;
                    const double w = scale * lw.at(idx[j][0] - idx[i][0], idx[j][1] - idx[i][1]);
                    A(i, j) = -w;
                    row += w;
                }
                A(i, i) = diag;
                op.diagonal_shift(i) = diag - row;
            }
        });
        return op;
    }

    // Product form: row-dependent weights, symmetrized afterwards.
    const auto& pf = std::get<ProductForm>(k.variant());
    static const detail::UnitRule g12 = detail::gauss_unit<12>();
    // Weight of offset m as seen from node x: second-moment matched cell
    // integral near the diagonal, midpoint otherwise.
    auto offset_weight = [&](const Point& x, long m0, long m1, const std::array<double, 3>& corr) {
        const long mx = std::max(std::abs(m0), std::abs(m1));
        const Point y{x[0] + h * m0, x[1] + h * m1};
        double w;
        if (mx <= kNearCells) {
            double s = 0.0;
            if (n == 1) {
                for (std::size_t q = 0; q < g12.size(); ++q) {
                    const double z = h * (m0 - 0.5 + g12.x[q]);
                    s += g12.w[q] * h * z * z * pf.a(x, {x[0] + z, 0.0}) * pf.k0(x, {x[0] + z, 0.0});
                }
                w = s / (h * h * double(m0 * m0));
            } else {
                for (std::size_t p = 0; p < g12.size(); ++p)
                    for (std::size_t q = 0; q < g12.size(); ++q) {
                        const double z0 = h * (m0 - 0.5 + g12.x[p]);
                        const double z1 = h * (m1 - 0.5 + g12.x[q]);
                        const Point yy{x[0] + z0, x[1] + z1};
                        s += g12.w[p] * g12.w[q] * h * h * (z0 * z0 + z1 * z1) * pf.a(x, yy) * pf.k0(x, yy);
                    }
                w = s / (h * h * double(m0 * m0 + m1 * m1));
            }
        } else {
            w = pf.a(x, y) * pf.k0(x, y) * vol;
        }
        if (mx == 1) {
            const double axx = pf.a(x, x);
            if (n == 1) {
                w += axx * corr[0] / (2.0 * h * h);
            } else {
                const NeighbourCorrection nc = distribute_moment(corr[0], corr[1], corr[2]);
                double c;
                if (m1 == 0) c = nc.e1;
                else if (m0 == 0) c = nc.e2;
                else if (m0 == m1) c = nc.d_plus;
                else c = nc.d_minus;
                w += axx * c / (h * h);
            }
        }
        return w;
    };

    const long far = static_cast<long>(std::ceil(grid.r_ext() / h));
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(N, N);
    Eigen::VectorXd total = Eigen::VectorXd::Zero(N);
    parallel_for(N, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const Point x = grid.point(i);
            const auto corr = central_moment_product(pf, n, x, h);
            double t = 0.0;
            const long far1 = n == 2 ? far : 0;
            for (long a = -far; a <= far; ++a)
                for (long c = -far1; c <= far1; ++c) {
                    if (a == 0 && c == 0) continue;
                    if (std::hypot(double(a), double(c)) * h > grid.r_ext()) continue;
                    t += offset_weight(x, a, c, corr);
                }
            total(i) = t + pf.tail(x, grid.r_ext());
            for (std::size_t j = 0; j < N; ++j) {
                if (j == i) continue;
                W(i, j) = offset_weight(x, idx[j][0] - idx[i][0], idx[j][1] - idx[i][1], corr);
            }
        }
    });
    for (std::size_t i = 0; i < N; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < N; ++j) {
            if (j == i) continue;
            const double w = 0.5 * (W(i, j) + W(j, i));
            A(i, j) = -w;
            row += w;
        }
        const double shift = total(i) - row;
        // Symmetrization can only move the row sum by the local asymmetry of
        // a k0; the exterior mass stays nonnegative.
        op.diagonal_shift(i) = std::max(shift, 0.0);
        A(i, i) = row + op.diagonal_shift(i);
    }
    return op;
}

double grid_inner(const Grid& g, const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    if (u.size() != v.size() || static_cast<std::size_t>(u.size()) != g.size())
        throw ShapeError("vector length does not match the grid");
    return g.cell_volume() * u.dot(v);
}

double energy_form(const AssembledOperator& op, const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    const std::size_t N = op.size();
    if (static_cast<std::size_t>(u.size()) != N || static_cast<std::size_t>(v.size()) != N)
        throw ShapeError("energy_form: vector length does not match the operator");
    const auto& A = op.matrix;
    double pair = 0.0;
    double ext = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t j = i + 1; j < N; ++j) pair += -A(i, j) * (u(i) - u(j)) * (v(i) - v(j));
        ext += op.diagonal_shift(i) * u(i) * v(i);
    }
    return op.grid.cell_volume() * (pair + ext);
}

// ---------------------------------------------------------------- symbols

namespace {

LatticeWeights symbol_table(const KernelSpec& k) {
    const int n = k.dimension();
    const int half = n == 1 ? 1 << 16 : 384;
    LatticeWeights tab = lattice_weights(k, {half, n == 2 ? half : 0}, half);
    double inner = 0.0;
    for (double w : tab.w) inner += w;
    // Keep only the mass beyond the table; its oscillatory part is dropped.
    tab.total -= inner;
    return tab;
}

// Unit-spacing symbol at the scaled wavenumber (c0, c1) = h xi.
double table_symbol(const LatticeWeights& tab, double c0, double c1) {
    double s = tab.total;
    for (int a = -tab.half[0]; a <= tab.half[0]; ++a)
        for (int b = -tab.half[1]; b <= tab.half[1]; ++b) {
            if (a == 0 && b == 0) continue;
            s += tab.at(a, b) * (1.0 - std::cos(c0 * a + c1 * b));
        }
    return s;
}

}  // namespace

double lattice_symbol(const KernelSpec& k, double h, const Point& xi) {
    if (!k.translation_invariant()) throw DomainError("lattice symbol needs a translation-invariant kernel");
    const LatticeWeights tab = symbol_table(k);
    return std::pow(h, -2.0 * k.beta()) * table_symbol(tab, h * xi[0], k.dimension() == 2 ? h * xi[1] : 0.0);
}

namespace {

double angular_symbol(const KernelSpec& k, double nu) {
    const int n = k.dimension();
    const double beta = k.beta();
    if (n == 1) return k.angular(0.0) + k.angular(kPi);
    double s = 0.0;
    for (int q = 0; q < 4; ++q) {
        const double a = nu - kPi / 2.0 + q * kPi / 2.0;
        s += ts([&](double th) { return std::pow(std::abs(std::cos(th - nu)), 2.0 * beta) * k.angular(th); }, a,
                a + kPi / 2.0);
    }
    return s;
}

}  // namespace

double continuum_symbol(const KernelSpec& k, const Point& xi) {
    const double r = std::hypot(xi[0], k.dimension() == 2 ? xi[1] : 0.0);
    if (r == 0.0) return 0.0;
    const double nu = k.dimension() == 2 ? std::atan2(xi[1], xi[0]) : 0.0;
    return symbol_constant(k.beta()) * std::pow(r, 2.0 * k.beta()) * angular_symbol(k, nu);
}

SymbolBandReport symbol_band_check(const KernelSpec& k, double max_kh, int radii, int directions,
                                   double rel_slack) {
    if (!k.translation_invariant()) throw DomainError("symbol check needs a translation-invariant kernel");
    const int n = k.dimension();
    const double beta = k.beta();
    const double C = symbol_constant(beta);
    SymbolBandReport rep{};
    rep.lower = std::numeric_limits<double>::infinity();
    rep.upper = 0.0;
    rep.band_lower = std::numeric_limits<double>::infinity();
    rep.band_upper = 0.0;
    const int dirs = n == 1 ? 1 : directions;
    for (int d = 0; d < dirs; ++d) {
        const double nu = kPi * d / dirs;
        const double as = C * angular_symbol(k, nu);
        rep.band_lower = std::min(rep.band_lower, as);
        rep.band_upper = std::max(rep.band_upper, as);
    }
    const LatticeWeights tab = symbol_table(k);
    for (int d = 0; d < dirs; ++d) {
        const double nu = kPi * d / dirs;
        const double A_unit = C * angular_symbol(k, nu);
        for (int r = 1; r <= radii; ++r) {
            const double kh = max_kh * r / radii;
            const double s = table_symbol(tab, std::cos(nu) * kh, std::sin(nu) * kh);
            const double ratio = s / std::pow(kh, 2.0 * beta);  // h-independent
            rep.lower = std::min(rep.lower, ratio);
            rep.upper = std::max(rep.upper, ratio);
            rep.max_rel_dev = std::max(rep.max_rel_dev, std::abs(ratio - A_unit) / A_unit);
        }
    }
    rep.within_band =
        rep.lower >= rep.band_lower * (1.0 - rel_slack) && rep.upper <= rep.band_upper * (1.0 + rel_slack);
    return rep;
}

// ---------------------------------------------------------------- validation

namespace {

// rho^{-2} int_{|z|<=rho} |z|^2 k0 + int_{|z|>rho} k0, with kr(u, r) the
// kernel at offset r u from the probe centre.
double class_integral(const std::function<double(double, double, double)>& kr, int n, double q, double rho) {
    auto radial = [&](double u0, double u1) {
        const double rn = n - 1.0;
        auto f = [&](double r) { return kr(u0, u1, r); };
        const double inner = singular_radial(f, 2.0 + rn, q, rho) / (rho * rho);
        const double outer = es([&](double r) { return std::pow(r, rn) * f(r); }, rho);
        return inner + outer;
    };
    if (n == 1) return radial(1.0, 0.0) + radial(-1.0, 0.0);
    return angular_integral([&](double th) { return radial(std::cos(th), std::sin(th)); });
}

}  // namespace

KernelValidation validate_kernel_class(const KernelSpec& k, const Grid& domain, const std::vector<Probe>& probes,
                                       const ValidationOptions& opt) {
    if (k.dimension() != domain.dimension()) throw ShapeError("kernel and domain dimensions differ");
    const int n = k.dimension();
    const double beta = k.beta();
    for (const auto& p : probes) {
        if (!(p.rho > 0.0)) throw GeometryError("probe radius must be positive");
        if (!domain.contains_ball(p.x0, p.rho)) throw GeometryError("probe ball is not contained in the domain");
    }

    KernelValidation rep;
    std::function<double(const Point&, const Point&)> k0;
    const bool product = std::holds_alternative<ProductForm>(k.variant());
    if (product) {
        k0 = std::get<ProductForm>(k.variant()).k0;
        rep.Lambda = std::get<ProductForm>(k.variant()).Lambda;
    } else {
        k0 = [&k](const Point& x, const Point& y) { return k(x, y); };
        if (std::holds_alternative<FractionalLaplacian>(k.variant())) {
            rep.Lambda = lambda_analytic(n, beta);
        } else {
            double sup = 0.0;
            const int samples = n == 1 ? 2 : 720;
            for (int s = 0; s < samples; ++s) sup = std::max(sup, k.angular(2.0 * kPi * s / samples));
            rep.Lambda = sup * sphere_measure(n) / (2.0 * beta * (1.0 - beta));
        }
    }

    for (const auto& p : probes) {
        const Point x0 = p.x0;
        auto kr = [&](double u0, double u1, double r) {
            if (product) return k0(x0, {x0[0] + r * u0, x0[1] + r * u1});
            return k.angular(n == 1 ? (u0 > 0.0 ? 0.0 : kPi) : std::atan2(u1, u0)) * std::pow(r, -n - 2.0 * beta);
        };
        ProbeResult r{p, class_integral(kr, n, n + 2.0 * beta, p.rho), 0.0, false};
        r.ratio = r.integral / (rep.Lambda * std::pow(p.rho, -2.0 * beta));
        r.ok = r.ratio <= 1.0 + 1e-9;
        rep.upper_ok = rep.upper_ok && r.ok;
        rep.probes.push_back(r);
    }

    if (std::holds_alternative<Anisotropic>(k.variant())) {
        const auto& an = std::get<Anisotropic>(k.variant());
        rep.has_symbol_bound = true;
        rep.directions = n == 1 ? 1 : opt.directions;
        rep.symbol_inf = std::numeric_limits<double>::infinity();
        for (int d = 0; d < rep.directions; ++d) {
            const double s = angular_symbol(k, 2.0 * kPi * d / rep.directions);
            rep.symbol_inf = std::min(rep.symbol_inf, s);
            rep.symbol_sup = std::max(rep.symbol_sup, s);
        }
        rep.symbol_ok = rep.symbol_inf >= 1.0 / an.Lambda;
    }

    // Comparability of the two double-integral energies on each probe ball.
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    rep.comparability_min = std::numeric_limits<double>::infinity();
    rep.comparability_max = 0.0;
    const double cnb = cn_beta(n, beta);
    for (const auto& p : probes) {
        const double hb = 2.0 * p.rho / (opt.comparability_nodes + 1);
        std::vector<Point> pts;
        for (int i = 1; i <= opt.comparability_nodes; ++i)
            for (int j = (n == 2 ? 1 : 0); j <= (n == 2 ? opt.comparability_nodes : 0); ++j) {
                const Point q{p.x0[0] - p.rho + hb * i, n == 2 ? p.x0[1] - p.rho + hb * j : 0.0};
                if (std::hypot(q[0] - p.x0[0], q[1] - p.x0[1]) < p.rho) pts.push_back(q);
            }
        const std::size_t M = pts.size();
        std::vector<double> kk(M * M, 0.0), kf(M * M, 0.0);
        for (std::size_t i = 0; i < M; ++i)
            for (std::size_t j = 0; j < M; ++j) {
                if (i == j) continue;
                kk[i * M + j] = k0(pts[i], pts[j]);
                kf[i * M + j] = cnb * std::pow(std::hypot(pts[i][0] - pts[j][0], pts[i][1] - pts[j][1]), -n - 2.0 * beta);
            }
        for (int f = 0; f < opt.random_functions; ++f) {
            std::vector<double> v(M);
            // Random combination of low Fourier modes, so the sample is H^beta-like.
            double c[6];
            for (double& ci : c) ci = U(rng);
            for (std::size_t i = 0; i < M; ++i) {
                const double s0 = (pts[i][0] - p.x0[0]) / p.rho, s1 = (pts[i][1] - p.x0[1]) / p.rho;
                v[i] = c[0] * s0 + c[1] * s1 + c[2] * std::sin(3.0 * s0) + c[3] * std::cos(2.0 * s1) +
                       c[4] * s0 * s1 + c[5] * U(rng) * 0.1;
            }
            double ek = 0.0, ef = 0.0;
            for (std::size_t i = 0; i < M; ++i)
                for (std::size_t j = 0; j < M; ++j) {
                    const double d = v[i] - v[j];
                    ek += d * d * kk[i * M + j];
                    ef += d * d * kf[i * M + j];
                }
            if (ek <= 0.0) continue;
            const double ratio = ef / ek;
            rep.comparability_min = std::min(rep.comparability_min, ratio);
            rep.comparability_max = std::max(rep.comparability_max, ratio);
            ++rep.comparability_samples;
        }
    }
    return rep;
}

void export_matrix(const AssembledOperator& op, const std::string& bin_path, const std::string& header_path) {
    const std::size_t N = op.size();
    std::ofstream bin(bin_path, std::ios::binary);
    if (!bin) throw Error("io", "cannot open " + bin_path);
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j) {
            const double v = op.matrix(i, j);
            bin.write(reinterpret_cast<const char*>(&v), sizeof(double));
        }
    nlohmann::ordered_json hdr;
    hdr["format"] = "float64-le-row-major";
    hdr["rows"] = N;
    hdr["cols"] = N;
    hdr["dimension"] = op.grid.dimension();
    hdr["spacing"] = op.grid.spacing();
    hdr["r_ext"] = op.grid.r_ext();
    hdr["grid"] = op.grid.describe();
    hdr["kernel"] = op.kernel.describe();
    std::ofstream h(header_path);
    if (!h) throw Error("io", "cannot open " + header_path);
    h << hdr.dump(2) << "\n";
}

}  // namespace fracdiff
