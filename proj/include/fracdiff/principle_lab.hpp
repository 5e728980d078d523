#pragma once

#include "fracdiff/io.hpp"
#include "fracdiff/spectral_core.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fracdiff {

/// One line of a report: `value relation threshold` decides `pass`.
struct PrincipleCheck {
    std::string quantity;
    double value = 0.0;
    std::string relation;  ///< ">=", ">", "<=", "in"
    double threshold = 0.0;
    bool pass = false;
};

struct PrincipleReport {
    std::string scenario;
    double min_u = 0.0;
    std::optional<double> harnack_ratio;
    bool vacuous = false;
    std::vector<PrincipleCheck> checks;
    std::vector<io::Json> counterexamples;

    bool passed() const;
    io::Json to_json() const;
};

/// Plain-text table with columns scenario, quantity, threshold, result.
std::string summary_table(const std::vector<PrincipleReport>& reports);

/// 1e-8 ||u0||_inf + allowance.
double default_weak_tolerance(const Eigen::VectorXd& u0, double allowance = 0.0);

/// min_{i,j} u(x_i, t_j) >= -tol.
PrincipleReport check_weak_max(const SolutionField& u, double tol, const std::string& scenario = "weak-max");

/// inf_i u(x_i, t_j) > tol ||u0||_inf for each probe index j >= 1 (all j >= 1 when empty).
/// A zero solution is reported as vacuous.
PrincipleReport check_strong_max(const SolutionField& u, const std::vector<std::size_t>& probe_indices, double tol,
                                 const std::string& scenario = "strong-max");

/// Q_- = (t0, t0 + delta s) x B(x0, delta r) and Q_+ = (t0 + (2 - delta) s, t0 + 2 s) x B(x0, delta r)
/// with s = tau r^{2 beta / alpha}.
struct HarnackBoxes {
    double t0 = 0.0;
    std::size_t x0 = 0;
    double r = 0.1;
    double delta = 0.5;
    double tau = 1.0;
    double eta = 2.0;
    double alpha = 0.5;
    double beta = 0.5;

    double time_scale() const;
    double minus_begin() const { return t0; }
    double minus_end() const { return t0 + delta * time_scale(); }
    double plus_begin() const { return t0 + (2.0 - delta) * time_scale(); }
    double plus_end() const { return t0 + 2.0 * time_scale(); }
    double gap() const { return plus_begin() - minus_end(); }

    /// DomainError for parameters out of range; GeometryError when the cylinder
    /// leaves (0, T) x Omega.
    void validate(const Grid& grid, double T) const;
};

struct BoxSamples {
    std::vector<std::size_t> nodes;
    std::vector<std::size_t> minus_times;
    std::vector<std::size_t> plus_times;
};

/// Grid nodes in B(x0, delta r) and mesh indices in the two open time windows;
/// GeometryError when any of them is empty.
BoxSamples sample_boxes(const HarnackBoxes& boxes, const Grid& grid, const TimeMesh& mesh);

/// R = mean_{Q_-} u / (min_{Q_+} u + f_sup); also checks min u >= -1e-12 max |u|.
PrincipleReport harnack_ratio(const SolutionField& u, const HarnackBoxes& boxes, double f_sup = 0.0,
                              const std::string& scenario = "harnack");

/// R(h) / R(h/2) in [1/2, 2].
PrincipleCheck harnack_refinement(const PrincipleReport& coarse, const PrincipleReport& fine);

/// Sides of the power-weight inequality for q > 1 (theta = max{4, (6q - 5)/2});
/// tau = 0 is allowed and sends (a/tau)^{1-q} to 0.
struct InequalitySides {
    double lhs;
    double rhs;
};
InequalitySides superlinear_power_inequality(double q, double a, double b, double tau1, double tau2);

/// The q in (0,1) companion with zeta = 4q/(1-q), zeta1 = zeta/6, zeta2 = zeta + 9/q, in the
/// printed form whose square is tau2 (b^{(1-q)/2} - a^{(1-q)/2}).
InequalitySides sublinear_power_inequality(double q, double a, double b, double tau1, double tau2);

/// Same with the square (tau2 b^{(1-q)/2} - tau1 a^{(1-q)/2})^2.
InequalitySides sublinear_power_inequality_mixed(double q, double a, double b, double tau1, double tau2);

/// phi(t) d/dt (k*v)(t) against d/dt (k*[phi v])(t) + int_0^t k'(t-s)(phi(t) - phi(s)) v(s) ds for
/// k = sum c_m exp(-l_m t) and trigonometric v, phi (c0 + sum_p c_p sin(p s + 0.3 p)); every
/// convolution and its time derivative is evaluated in closed form.
InequalitySides product_rule_sides(const std::vector<double>& c, const std::vector<double>& l,
                                   const std::vector<double>& v_coef, const std::vector<double>& phi_coef, double t);

/// (g_alpha * (phi v'))(t_J) against phi(t_J)(g_alpha * v')(t_J) - int g_alpha(t_J - s) phi'(s) v(s) ds
/// for piecewise-linear v (v(0) = 0) and phi on a uniform mesh of [0, 1], integrated exactly.
InequalitySides convolution_product_sides(double alpha, const std::vector<double>& v, const std::vector<double>& phi,
                                          std::size_t J);

/// Randomized sweep of the four families above, `sample_count` draws each; the q > 1
/// draws force tau2 = 0 in 5% and tau1 = tau2 in another 5% of the samples.
PrincipleReport check_appendix_inequalities(std::size_t sample_count, std::uint64_t seed, double slack = 1e-12);

}  // namespace fracdiff
