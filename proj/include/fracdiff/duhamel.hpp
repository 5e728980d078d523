#pragma once

#include "fracdiff/spectral_core.hpp"
#include "fracdiff/time_frac.hpp"

#include <string>

namespace fracdiff {

/// mu(t) = singular * t^{alpha-1} + regular(t), with `regular` continuous,
/// vanishing at 0 and interpolated linearly between mesh nodes.
/// For mu built from rho: singular = rho(0)/Gamma(alpha), regular = g_alpha * rho'.
struct DuhamelKernel {
    double alpha = 0.5;
    TimeMesh mesh = TimeMesh::uniform(1.0, 2);
    double singular = 0.0;
    Series regular;
    Series rho_ref;

    /// Pointwise values; entry 0 is +-inf when singular != 0.
    Series values() const;
};

/// Route through rho(0) g_alpha + g_alpha * rho', with rho' by central differences
/// (second-order one-sided at the ends).
DuhamelKernel mu_from_rho(const Series& rho, const TimeMesh& mesh, double alpha);

/// Route through d/dt (g_alpha * rho): the convolution is exact for piecewise-linear
/// rho, the derivative is a three-point difference. Endpoints are NaN.
Series mu_by_derivative(const Series& rho, const TimeMesh& mesh, double alpha);

/// Finite-difference rho' used by mu_from_rho.
Series rho_derivative(const Series& rho, const TimeMesh& mesh);

/// int_0^T |mu(t)| dt, with the singular factor integrated exactly on the first cell.
double mu_l1_norm(const DuhamelKernel& mu);

/// (|rho(0)| + T max|rho'|) T^alpha / (Gamma(alpha) alpha).
double mu_l1_bound(const DuhamelKernel& mu);

/// u(x, t_j) = int_0^{t_j} mu(t_j - s) v(x, s) ds, v piecewise linear in time.
/// Requires a uniform mesh shared by mu and v; throws ShapeError otherwise.
SolutionField convolve_representation(const DuhamelKernel& mu, const SolutionField& v);

/// The same convolution at a single interior node.
Series convolve_representation(const DuhamelKernel& mu, const SolutionField& v, std::size_t node);

/// CSV with columns t, mu, regular (the t = 0 row carries mu = inf when singular).
void export_mu_csv(const DuhamelKernel& mu, const std::string& path);

}  // namespace fracdiff
