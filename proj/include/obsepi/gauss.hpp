#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "obsepi/common.hpp"

namespace obsepi {

struct Rule1D {
    std::vector<double> nodes;
    std::vector<double> weights;
};

// Gauss-Legendre rule on [-1,1] by Newton iteration on P_n.
inline Rule1D gauss_legendre(int n) {
    require(n >= 1, "gauss_legendre: n >= 1");
    Rule1D r;
    r.nodes.resize(n);
    r.weights.resize(n);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double x = std::cos(pi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
            }
            pp = n * (x * p0 - p1) / (x * x - 1.0);
            double dx = p0 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        r.nodes[i] = -x;
        r.nodes[n - 1 - i] = x;
        double w = 2.0 / ((1.0 - x * x) * pp * pp);
        r.weights[i] = w;
        r.weights[n - 1 - i] = w;
    }
    return r;
}

// Same rule mapped to [a,b].
inline Rule1D gauss_legendre(int n, double a, double b) {
    Rule1D r = gauss_legendre(n);
    for (int i = 0; i < n; ++i) {
        r.nodes[i] = 0.5 * (a + b) + 0.5 * (b - a) * r.nodes[i];
        r.weights[i] *= 0.5 * (b - a);
    }
    return r;
}

// \int_{S^{d-1}} g(x . axis) dH^{d-1} for a zonal integrand, any d >= 2.
// Substituting t = cos(theta) keeps the integrand smooth at the poles.
template <class F>
double zonal_integral(int d, F&& g, int npts = 200) {
    Rule1D r = gauss_legendre(npts, 0.0, pi);
    double sdm2 = (d == 2) ? 2.0 : sphere_area(d - 1);
    double s = 0.0;
    for (int i = 0; i < npts; ++i) {
        double th = r.nodes[i];
        s += r.weights[i] * g(std::cos(th)) * std::pow(std::sin(th), d - 2);
    }
    return sdm2 * s;
}

}  // namespace obsepi
