#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace fracdiff {

using Series = std::vector<double>;

/// Time nodes 0 = t_0 < t_1 < ... < t_{M} = T.
class TimeMesh {
public:
    explicit TimeMesh(std::vector<double> nodes);
    static TimeMesh uniform(double t_end, std::size_t steps);

    double t_end() const { return nodes_.back(); }
    const std::vector<double>& nodes() const { return nodes_; }
    std::size_t size() const { return nodes_.size(); }
    std::size_t steps() const { return nodes_.size() - 1; }
    double operator[](std::size_t i) const { return nodes_[i]; }
    bool is_uniform() const { return uniform_; }
    /// Step of a uniform mesh; throws MeshError otherwise.
    double step() const;
    /// Every cell halved.
    TimeMesh refined() const;

private:
    std::vector<double> nodes_;
    bool uniform_ = false;
};

/// L1 approximation of d/dt (g_{1-alpha} * f) at t_1..t_M. Entry 0 is NaN.
/// The f(0) g_{1-alpha}(t) contribution is included, so passing u - u(0)
/// yields the Caputo derivative.
Series caputo_l1(const Series& samples, double alpha, const TimeMesh& mesh);

/// (g_gamma * f)(t_j) for piecewise-linear f, using exact moments of the
/// kernel on every cell. Exact for constant f.
Series singular_convolve(double kernel_exponent, const Series& values, const TimeMesh& mesh);

/// Same rule evaluated only at the listed node indices.
Series singular_convolve_at(double kernel_exponent, const Series& values, const TimeMesh& mesh,
                            const std::vector<std::size_t>& indices);

/// f(t) = t^exponent * smooth(t), with `smooth` given at mesh nodes and
/// interpolated linearly.
struct PowerWeighted {
    double exponent = 0.0;
    Series smooth;
};

/// (a * b)(t_j) on a uniform mesh for two power-weighted operands with
/// exponents > -1.
Series convolve_weighted(const PowerWeighted& a, const PowerWeighted& b, const TimeMesh& mesh);

/// (g_gamma * f)(t_j) on a uniform mesh where f(s) = s^p w(s) and w is
/// available pointwise. Cells touching a singular point use graded
/// quadrature after the substitution that removes the power singularity.
Series convolve_power_kernel(double gamma, double p, const std::function<double(double)>& w,
                             const TimeMesh& mesh);

/// Scalar Yosida kernels of order alpha and index m on a mesh:
///   h_m(t)   = m t^{alpha-1} E_{alpha,alpha}(-m t^alpha)
///   g_{1-alpha,m}(t) = m E_{alpha,1}(-m t^alpha)   (= g_{1-alpha} * h_m).
struct YosidaKernels {
    double alpha = 0.5;
    int m = 1;
    TimeMesh mesh = TimeMesh::uniform(1.0, 2);
    Series h_values;  ///< h_values[0] = +inf
    Series g_values;
};

YosidaKernels yosida_kernels(double alpha, int m, const TimeMesh& mesh);

struct ResolventResidual {
    Series residual;  ///< h + m h*g_alpha - m g_alpha at t_1..t_M (entry 0 unused)
    double l1 = 0.0;  ///< sum_j (t_j - t_{j-1}) |residual_j|
};

/// Residual of the resolvent equation; the convolution uses the closed form
/// of h_m at quadrature points. Requires a uniform mesh.
ResolventResidual yosida_resolvent_residual(const YosidaKernels& yk);

/// g_{1-alpha} * h_m computed by quadrature, for checking the closed form of
/// g_{1-alpha,m}.
Series yosida_g_by_convolution(const YosidaKernels& yk);

/// sum_j (t_j - t_{j-1}) |g_{1-alpha,m}(t_j) - g_{1-alpha}(t_j)|.
double yosida_l1_distance(const YosidaKernels& yk);

/// d/dt (k * f)(t_j) for k = g_{1-alpha,m} and piecewise-linear f, using
/// exact cell integrals of k. Entry 0 is NaN.
Series yosida_derivative(const Series& f, double alpha, int m, const TimeMesh& mesh);

struct IdentityReport {
    Series defect;  ///< entry 0 unused
    double min_defect = 0.0;
    std::size_t argmin = 0;
};

/// Defect u^+ d/dt(k*u) - 1/2 d/dt(k*(u^+)^2) with k = g_{1-alpha,m}; the
/// inequality asserts the defect is nonnegative.
IdentityReport check_fundamental_identity(const Series& u, double alpha, int m, const TimeMesh& mesh);

}  // namespace fracdiff
