#include "fracdiff/special_fn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/sin_pi.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "fracdiff/error.hpp"

namespace fracdiff {

namespace {

constexpr double kPi = std::numbers::pi;

// Below this |z| the Taylor series is used on the negative axis.
constexpr double kSeriesRadius = 1.0;

// Algebraic asymptotic series on z <= -kAsymptoticStart for alpha <= kAsymptoticMaxAlpha.
constexpr double kAsymptoticStart = 100.0;
constexpr double kAsymptoticMaxAlpha = 0.98;

// Quadrature tolerance for the spectral representation.
constexpr double kQuadTol = 1e-12;

boost::math::quadrature::tanh_sinh<double>& tanh_sinh_rule() {
    thread_local boost::math::quadrature::tanh_sinh<double> rule;
    return rule;
}

void validate(const MLParams& p, double z) {
    if (!(p.alpha > 0.0 && p.alpha <= 1.0))
        throw DomainError("mittag_leffler: alpha must lie in (0,1], got " + std::to_string(p.alpha));
    if (!(p.beta > 0.0) || !std::isfinite(p.beta))
        throw DomainError("mittag_leffler: beta must be positive, got " + std::to_string(p.beta));
    if (!std::isfinite(z)) throw DomainError("mittag_leffler: argument is not finite");
    if (z > kMLMaxPositiveArgument)
        throw DomainError("mittag_leffler: positive argument " + std::to_string(z) +
                          " exceeds the supported limit");
}

double reciprocal_gamma(double x) {
    if (x <= 0.0 && x == std::floor(x)) return 0.0;
    if (x > 170.0) {
        const double lg = std::lgamma(x);
        return std::exp(-lg);
    }
    return 1.0 / std::tgamma(x);
}

// 1/Gamma on the whole real line (reflection for x < 1).
double reciprocal_gamma_any(double x) {
    if (x >= 1.0) return reciprocal_gamma(x);
    return std::tgamma(1.0 - x) * boost::math::sin_pi(x) / kPi;
}

// E_{a,b}(-x) ~ sum_{k>=1} (-1)^{k+1} x^{-k} / Gamma(b - a k). Stops once a
// smooth bound of the term magnitude drops below 1e-17 of the sum; returns
// NaN when that does not happen while the bound decreases.
double asymptotic(double alpha, double beta, double x) {
    double sum = 0.0;
    double xk = 1.0;
    double prev_bound = std::numeric_limits<double>::infinity();
    for (int k = 1; k < 200; ++k) {
        xk /= x;
        const double g = beta - alpha * k;
        sum += (k % 2 == 1 ? 1.0 : -1.0) * xk * reciprocal_gamma_any(g);
        const double bound = xk * (g >= 1.0 ? reciprocal_gamma(g) : std::tgamma(1.0 - g) / kPi);
        if (k > 3 && bound < 1e-17 * std::abs(sum) && bound <= prev_bound) return sum;
        if (bound > prev_bound) break;
        prev_bound = bound;
    }
    return std::numeric_limits<double>::quiet_NaN();
}

double series(double alpha, double beta, double z) {
    double sum = 0.0;
    double zk = 1.0;
    double max_term = 0.0;
    for (int k = 0; k < 100000; ++k) {
        const double term = zk * reciprocal_gamma(alpha * k + beta);
        sum += term;
        max_term = std::max(max_term, std::abs(term));
        if (k > 2 && std::abs(term) <= 1e-17 * std::abs(sum) && std::abs(zk) < 1e300) break;
        if (std::abs(term) == 0.0 && k > 10) break;
        zk *= z;
        if (!std::isfinite(zk) || !std::isfinite(sum))
            throw AccuracyError("mittag_leffler: power series overflowed", std::numeric_limits<double>::infinity());
    }
    if (max_term > 1e6 * std::abs(sum))
        throw AccuracyError("mittag_leffler: cancellation in power series", max_term / std::abs(sum) * 1e-16);
    return sum;
}

// alpha == 1: E_{1,1} is the exponential; other beta use
// E_{1,b}(-x) = 1/Gamma(b-1) int_0^1 exp(-x(1-w)) w^{b-2} dw  (b > 1)
// and the upward recurrence E_{1,b}(z) = 1/Gamma(b) + z E_{1,b+1}(z) otherwise.
double ml_alpha_one(double beta, double z) {
    if (beta == 1.0) return std::exp(z);
    if (std::abs(z) <= kSeriesRadius || z > 0.0) return series(1.0, beta, z);
    if (beta <= 1.0) return reciprocal_gamma(beta) + z * ml_alpha_one(beta + 1.0, z);
    const double x = -z;
    auto& ts = tanh_sinh_rule();
    auto f = [&](double w) { return std::exp(-x * (1.0 - w)) * std::pow(w, beta - 2.0); };
    const double integral = ts.integrate(f, 0.0, 1.0, kQuadTol);
    return integral * reciprocal_gamma(beta - 1.0);
}

double spectral_integral(double alpha, double beta, double x) {
    const double sa = std::sin(alpha * kPi);
    const double ca = std::cos(alpha * kPi);
    const double sb = std::sin(beta * kPi);
    const double sba = std::sin((beta - alpha) * kPi);
    const double inv_alpha = 1.0 / alpha;
    const double power = (1.0 - beta) / alpha;

    auto integrand = [&](double y) {
        if (y <= 0.0) return power == 0.0 ? sba : 0.0;
        const double xy = x * y;
        const double decay = std::exp(-std::pow(xy, inv_alpha));
        if (decay == 0.0) return 0.0;
        const double num = y * sb + sba;
        const double den = y * y + 2.0 * y * ca + 1.0;
        return decay * std::pow(xy, power) * num / den;
    };

    // exp(-(xy)^{1/alpha}) < e^{-45} beyond y_end.
    const double y_cut = 1.0 / x;
    const double y_end = std::pow(45.0, alpha) / x;

    std::vector<double> breaks{0.0, y_cut, y_end};
    if (alpha > 0.5) {
        // Near-pole of the denominator at y = -cos(alpha pi), width ~ sin(alpha pi).
        const double ystar = -ca;
        for (double off : {-4.0, -1.0, 0.0, 1.0, 4.0}) {
            const double b = ystar + off * sa;
            if (b > 0.0 && b < y_end) breaks.push_back(b);
        }
    }
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

    double total = 0.0;
    auto& ts = tanh_sinh_rule();
    for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
        const double a = breaks[i];
        const double b = breaks[i + 1];
        if (b <= a) continue;
        double piece;
        if (a == 0.0) {
            piece = ts.integrate(integrand, a, b, kQuadTol);
        } else {
            double err = 0.0;
            piece = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, a, b, 8,
                                                                                  kQuadTol, &err);
        }
        total += piece;
    }
    return total / (alpha * kPi);
}

double ml_negative(double alpha, double beta, double z) {
    if (alpha == 1.0) return ml_alpha_one(beta, z);
    if (std::abs(z) <= kSeriesRadius) return series(alpha, beta, z);
    if (alpha <= kAsymptoticMaxAlpha && -z >= kAsymptoticStart) {
        const double v = asymptotic(alpha, beta, -z);
        if (std::isfinite(v)) return v;
    }
    if (beta > 1.0) {
        // Downward recurrence in beta keeps the integrand of the spectral
        // representation bounded at the origin.
        return (ml_negative(alpha, beta - alpha, z) - reciprocal_gamma(beta - alpha)) / z;
    }
    return spectral_integral(alpha, beta, -z);
}

}  // namespace

double gamma_fn(double x) {
    if (!std::isfinite(x) || x <= 0.0)
        throw DomainError("gamma_fn: argument must be positive and finite, got " + std::to_string(x));
    const double g = std::tgamma(x);
    if (!std::isfinite(g)) throw DomainError("gamma_fn: overflow at " + std::to_string(x));
    return g;
}

MLValue mittag_leffler_checked(const MLParams& p, double z) {
    validate(p, z);
    if (z == 0.0) return {reciprocal_gamma(p.beta), true};
    if (z > 0.0) return {series(p.alpha, p.beta, z), false};
    return {ml_negative(p.alpha, p.beta, z), true};
}

double mittag_leffler(const MLParams& p, double z) { return mittag_leffler_checked(p, z).value; }

double g_kernel(const GKernel& k, double t) {
    if (!(k.gamma > 0.0) || !std::isfinite(k.gamma))
        throw DomainError("g_kernel: gamma must be positive, got " + std::to_string(k.gamma));
    if (!(t > 0.0) || !std::isfinite(t))
        throw DomainError("g_kernel: t must be positive, got " + std::to_string(t));
    if (k.gamma == 1.0) return 1.0;
    if (k.gamma < 170.0) return std::pow(t, k.gamma - 1.0) / std::tgamma(k.gamma);
    return std::exp((k.gamma - 1.0) * std::log(t) - std::lgamma(k.gamma));
}

}  // namespace fracdiff
