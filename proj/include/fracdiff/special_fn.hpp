#pragma once

namespace fracdiff {

/// Gamma function for positive arguments; relative error <= 1e-13 on (0, 170].
double gamma_fn(double x);

/// Parameters of the two-parameter Mittag-Leffler function E_{alpha,beta}.
struct MLParams {
    double alpha = 1.0;  // (0, 1]
    double beta = 1.0;   // > 0
};

/// Result of a Mittag-Leffler evaluation. `certified` is false for positive
/// arguments, where only the plain power series is used.
struct MLValue {
    double value = 0.0;
    bool certified = true;
};

/// Largest positive argument accepted by the Mittag-Leffler evaluator.
inline constexpr double kMLMaxPositiveArgument = 5.0;

/// E_{alpha,beta}(z) for real z <= kMLMaxPositiveArgument.
///
/// Certified (relative error <= 1e-10, in practice ~1e-13) on z <= 0 for the
/// parameter ranges used by the solvers. Small |z| uses the Taylor series;
/// for z < -1 the function is evaluated through its real-axis spectral
/// representation
///
///   E_{a,b}(-x) = 1/(a pi) int_0^inf exp(-(xy)^{1/a}) (xy)^{(1-b)/a}
///                 (y sin(b pi) + sin((b-a) pi)) / (y^2 + 2y cos(a pi) + 1) dy,
///
/// used for 0 < a < 1, 0 < b <= 1 (the integrand is then bounded at the
/// origin). Larger b are reduced with the downward recurrence
/// E_{a,b}(z) = (E_{a,b-a}(z) - 1/Gamma(b-a)) / z. For z <= -100 and
/// a <= 0.98 the algebraic asymptotic series sum_k -(-z)^{-k}/Gamma(b-ak)
/// is used when it converges to working precision.
MLValue mittag_leffler_checked(const MLParams& p, double z);

/// Convenience wrapper returning the value only.
double mittag_leffler(const MLParams& p, double z);

/// The power kernel g_gamma(t) = t^{gamma-1} / Gamma(gamma).
struct GKernel {
    double gamma = 1.0;
};

double g_kernel(const GKernel& k, double t);
inline double g_kernel(double gamma, double t) { return g_kernel(GKernel{gamma}, t); }

}  // namespace fracdiff
