#pragma once

#include <boost/math/quadrature/gauss.hpp>

#include <vector>

namespace hopflab::detail {

struct Rule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

/// Composite 8-point Gauss-Legendre rule on [a, b] with `panels` equal panels.
inline Rule gauss_panels(double a, double b, int panels) {
    using G = boost::math::quadrature::gauss<double, 8>;
    const auto& xs = G::abscissa();
    const auto& ws = G::weights();
    Rule rule;
    const double width = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        const double mid = a + (p + 0.5) * width;
        const double half = 0.5 * width;
        for (std::size_t k = 0; k < xs.size(); ++k) {
            // boost stores the non-negative half of a symmetric rule
            rule.nodes.push_back(mid + half * xs[k]);
            rule.weights.push_back(half * ws[k]);
            if (xs[k] != 0.0) {
                rule.nodes.push_back(mid - half * xs[k]);
                rule.weights.push_back(half * ws[k]);
            }
        }
    }
    return rule;
}

}  // namespace hopflab::detail
