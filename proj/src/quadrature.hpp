#pragma once

#include <cstddef>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

namespace fracdiff::detail {

/// Gauss-Legendre rule mapped to [0,1].
struct UnitRule {
    std::vector<double> x;
    std::vector<double> w;
    std::size_t size() const { return x.size(); }
};

template <unsigned N>
UnitRule gauss_unit() {
    using G = boost::math::quadrature::gauss<double, N>;
    const auto& a = G::abscissa();
    const auto& wt = G::weights();
    UnitRule r;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double xi = a[i];
        if (xi == 0.0) {
            r.x.push_back(0.5);
            r.w.push_back(0.5 * wt[i]);
            continue;
        }
        r.x.push_back(0.5 * (1.0 - xi));
        r.w.push_back(0.5 * wt[i]);
        r.x.push_back(0.5 * (1.0 + xi));
        r.w.push_back(0.5 * wt[i]);
    }
    return r;
}

/// Composite Gauss rule on [0,1], geometrically graded toward 0 with
/// breakpoints ratio^levels, ..., ratio, 1.
template <unsigned N>
UnitRule graded_unit(int levels, double ratio) {
    const UnitRule base = gauss_unit<N>();
    UnitRule r;
    std::vector<double> edges{1.0};
    for (int l = 0; l < levels; ++l) edges.push_back(edges.back() * ratio);
    edges.push_back(0.0);
    for (std::size_t e = edges.size() - 1; e > 0; --e) {
        const double a = edges[e];
        const double b = edges[e - 1];
        for (std::size_t q = 0; q < base.size(); ++q) {
            r.x.push_back(a + (b - a) * base.x[q]);
            r.w.push_back((b - a) * base.w[q]);
        }
    }
    return r;
}

}  // namespace fracdiff::detail
