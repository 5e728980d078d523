#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <variant>
#include <vector>

namespace fracdiff {

/// Point in R^n, n in {1, 2}; unused trailing coordinates are 0.
using Point = std::array<double, 2>;

/// c_{n,beta} = beta 4^beta Gamma((n+2beta)/2) / (pi^{n/2} Gamma(1-beta)), n in {1,2,3}.
double cn_beta(int n, double beta);

/// Unit sphere measure |S^{n-1}|: 2 for n = 1, 2 pi for n = 2.
double sphere_measure(int n);

/// Lambda such that the fractional-Laplacian kernel saturates the upper
/// bound of the kernel class: c_{n,beta} |S^{n-1}| / (2 beta (1 - beta)).
double lambda_analytic(int n, double beta);

/// Integral of (1 - cos s) s^{-1-2beta} over (0, inf).
double symbol_constant(double beta);

struct FractionalLaplacian {
    double beta;
};

/// k(x,y) = a(x,y) k0(x,y), with a symmetric taking values in [1/2, 1].
/// tail(x, R) must return the mass of k(x, .) outside the ball B(x, R).
struct ProductForm {
    std::function<double(const Point&, const Point&)> a;
    std::function<double(const Point&, const Point&)> k0;
    double beta0;
    double beta;
    double Lambda;
    std::function<double(const Point&, double)> tail;
    std::string description;
};

/// k(x,y) = a(theta) |x-y|^{-n-2beta}, theta the direction of y - x.
/// In n = 1 the direction is +-1; a is evaluated at angle 0 and pi.
struct Anisotropic {
    std::function<double(double)> a;
    double beta;
    double Lambda;
    std::string description;
};

class KernelSpec {
public:
    using Variant = std::variant<FractionalLaplacian, ProductForm, Anisotropic>;

    /// Validates the variant invariants; throws DomainError on violation.
    KernelSpec(Variant v, int dimension);

    static KernelSpec fractional_laplacian(double beta, int dimension);

    const Variant& variant() const { return v_; }
    int dimension() const { return n_; }
    double beta() const;
    bool translation_invariant() const { return !std::holds_alternative<ProductForm>(v_); }

    /// Kernel value at the pair (x, y), x != y.
    double operator()(const Point& x, const Point& y) const;

    /// Angular density a(theta) with k = a(theta)|x-y|^{-n-2beta}
    /// (translation-invariant variants only).
    double angular(double theta) const;

    std::string describe() const;

private:
    Variant v_;
    int n_;
};

/// Lattice of spacing h with an interior mask. Interior node i sits at
/// origin + h * index[i]. Nodes outside the mask carry the exterior value 0.
class Grid {
public:
    /// (a, b) with `nodes` interior points, h = (b - a)/(nodes + 1).
    static Grid interval(double a, double b, int nodes);
    /// Open disc B(center, radius); `nodes` lattice points per diameter.
    static Grid ball(Point center, double radius, int nodes);
    /// Arbitrary mask on the box origin + h*[1, counts[d]].
    static Grid from_mask(int dimension, Point origin, double h, std::array<int, 2> counts,
                          const std::function<bool(const Point&)>& inside, double diameter);

    int dimension() const { return n_; }
    double spacing() const { return h_; }
    double cell_volume() const;
    std::size_t size() const { return index_.size(); }
    const std::vector<std::array<int, 2>>& index() const { return index_; }
    Point point(std::size_t i) const;
    std::vector<Point> points() const;
    Point origin() const { return origin_; }
    std::array<int, 2> counts() const { return counts_; }
    /// Minimum, over dimensions, of the number of interior lattice lines.
    int nodes_per_dimension() const;
    double diameter() const { return diameter_; }
    double r_ext() const { return r_ext_; }
    void set_r_ext(double r);
    bool inside(const Point& p) const { return inside_(p); }
    /// Indices of interior nodes with |x - c| < r.
    std::vector<std::size_t> nodes_in_ball(const Point& c, double r) const;
    /// True when B(c, r) lies inside the domain (sampled on its boundary).
    bool contains_ball(const Point& c, double r) const;
    std::string describe() const { return description_; }

private:
    Grid() = default;
    int n_ = 1;
    double h_ = 0.0;
    Point origin_{0.0, 0.0};
    std::array<int, 2> counts_{0, 1};
    std::vector<std::array<int, 2>> index_;
    std::function<bool(const Point&)> inside_;
    double diameter_ = 0.0;
    double r_ext_ = 0.0;
    std::string description_;
};

/// Dense discretization of the nonlocal operator on the interior nodes.
/// matrix(i,i) includes diagonal_shift(i), the lattice mass of k(x_i,.)
/// outside the domain plus the tail beyond R_ext.
struct AssembledOperator {
    Eigen::MatrixXd matrix;
    Eigen::VectorXd diagonal_shift;
    Grid grid;
    KernelSpec kernel;

    std::size_t size() const { return static_cast<std::size_t>(matrix.rows()); }
    Eigen::VectorXd apply(const Eigen::VectorXd& u) const { return matrix * u; }
};

AssembledOperator assemble(const KernelSpec& k, const Grid& grid);

/// Discrete bilinear form with cell-volume weight; equals h^n <A u, v>.
double energy_form(const AssembledOperator& op, const Eigen::VectorXd& u, const Eigen::VectorXd& v);

/// Discrete inner product with weight h^n.
double grid_inner(const Grid& g, const Eigen::VectorXd& u, const Eigen::VectorXd& v);

/// Symbol of the lattice operator on the whole lattice (periodized
/// setting), for translation-invariant kernels.
double lattice_symbol(const KernelSpec& k, double h, const Point& xi);

/// Continuum symbol: symbol_constant(beta) * integral of |xi.theta|^{2beta} a(theta).
double continuum_symbol(const KernelSpec& k, const Point& xi);

struct SymbolBandReport {
    double lower;        // inf of sigma_h(xi)/|xi|^{2beta} over the sample
    double upper;        // sup of the same ratio
    double band_lower;   // symbol_constant * inf_nu of the angular integral
    double band_upper;   // symbol_constant * sup_nu of the angular integral
    double max_rel_dev;  // max |sigma_h - A| / A over the sample
    bool within_band;
};

/// Lattice symbol, normalized by |xi|^{2beta}, at |xi| h <= max_kh over
/// `directions` directions. The ratio does not depend on h.
SymbolBandReport symbol_band_check(const KernelSpec& k, double max_kh, int radii,
                                   int directions, double rel_slack);

struct Probe {
    Point x0;
    double rho;
};

struct ProbeResult {
    Probe probe;
    double integral;   // rho^{-2} int_{|y-x0|<=rho} |y-x0|^2 k0 + int_{>rho} k0
    double ratio;      // integral / (Lambda rho^{-2beta})
    bool ok;
};

struct KernelValidation {
    double Lambda;  // class constant used for the ratios
    std::vector<ProbeResult> probes;
    bool upper_ok = true;
    // Anisotropic only: inf over sampled nu of int |nu.theta|^{2beta} a.
    bool has_symbol_bound = false;
    double symbol_inf = 0.0;
    double symbol_sup = 0.0;
    int directions = 0;
    bool symbol_ok = true;
    // Energy comparability against the fractional Laplacian on probe balls.
    double comparability_min = 0.0;
    double comparability_max = 0.0;
    int comparability_samples = 0;
    bool ok() const { return upper_ok && symbol_ok; }
};

struct ValidationOptions {
    int directions = 64;
    int random_functions = 16;
    int comparability_nodes = 24;
    std::uint64_t seed = 12345;
};

KernelValidation validate_kernel_class(const KernelSpec& k, const Grid& domain, const std::vector<Probe>& probes,
                                       const ValidationOptions& opt = {});

/// Flat binary of row-major float64 plus a JSON header file.
void export_matrix(const AssembledOperator& op, const std::string& bin_path, const std::string& header_path);

}  // namespace fracdiff
