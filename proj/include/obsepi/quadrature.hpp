#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "obsepi/common.hpp"
#include "obsepi/gauss.hpp"

namespace obsepi {

enum class DomainKind { FullSphere, HalfSphere, Cap };

// Subdomain of the unit sphere in R^d. A cap is S_delta = dB1 \cap {x_d > -delta};
// delta = 0 coincides with the half sphere {x_d > 0}.
struct SphericalDomain {
    DomainKind kind = DomainKind::FullSphere;
    int dim = 2;
    double cap_delta = 0.0;

    static SphericalDomain full(int d) { return {DomainKind::FullSphere, d, 0.0}; }
    static SphericalDomain half(int d) { return {DomainKind::HalfSphere, d, 0.0}; }
    static SphericalDomain cap(int d, double delta) { return {DomainKind::Cap, d, delta}; }

    void validate() const {
        require(dim == 2 || dim == 3, "SphericalDomain: unsupported dimension (d must be 2 or 3)");
        if (kind == DomainKind::Cap)
            require(cap_delta >= 0.0 && cap_delta <= 0.3,
                    "SphericalDomain: cap_delta outside the accepted range [0, 0.3]");
    }

    // Surface measure of the domain.
    double measure() const {
        double full_area = sphere_area(dim);
        switch (kind) {
            case DomainKind::FullSphere: return full_area;
            case DomainKind::HalfSphere: return 0.5 * full_area;
            case DomainKind::Cap:
                if (dim == 2) return pi + 2.0 * std::asin(cap_delta);
                return 2.0 * pi * (1.0 + cap_delta);
        }
        return full_area;
    }

    bool contains(const Vec& x) const {
        switch (kind) {
            case DomainKind::FullSphere: return true;
            case DomainKind::HalfSphere: return x[dim - 1] > 0.0;
            case DomainKind::Cap: return x[dim - 1] > -cap_delta;
        }
        return true;
    }
};

struct Quadrature {
    SphericalDomain domain;
    std::vector<Vec> nodes;
    std::vector<double> weights;
    int exactness_degree = 0;

    std::size_t size() const { return nodes.size(); }

    double integrate(const std::vector<double>& values) const {
        require(values.size() == nodes.size(), "Quadrature: mismatched nodal values");
        double s = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) s += weights[i] * values[i];
        return s;
    }

    template <class F>
    double integrate_fn(F&& f) const {
        double s = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) s += weights[i] * f(nodes[i]);
        return s;
    }
};

using QuadraturePtr = std::shared_ptr<const Quadrature>;

namespace detail {

// Two unit vectors completing `n` to an orthonormal frame of R^3.
inline std::pair<Vec, Vec> orthonormal_complement(const Vec& n) {
    Vec a = (std::abs(n[0]) < 0.9) ? Vec(1, 0, 0) : Vec(0, 1, 0);
    Vec u = (a - a.dot(n) * n).normalized();
    Vec v = n.cross(u);
    return {u, v};
}

// Product rule on S^2 over t = x.axis in [t_lo, t_hi]: Gauss-Legendre in t,
// uniform (trapezoid) in azimuth. Exact for polynomials of degree
// <= min(2 n_t - 1, n_az - 1) restricted to the band.
inline Quadrature band_rule_3d(const Vec& axis, double t_lo, double t_hi, int n_t, int n_az) {
    auto [u, v] = orthonormal_complement(axis);
    Rule1D rt = gauss_legendre(n_t, t_lo, t_hi);
    Quadrature q;
    q.nodes.reserve(static_cast<std::size_t>(n_t) * n_az);
    q.weights.reserve(static_cast<std::size_t>(n_t) * n_az);
    const double waz = 2.0 * pi / n_az;
    for (int i = 0; i < n_t; ++i) {
        double t = rt.nodes[i];
        double s = std::sqrt(std::max(0.0, 1.0 - t * t));
        for (int j = 0; j < n_az; ++j) {
            double ph = waz * j;
            q.nodes.push_back(t * axis + s * (std::cos(ph) * u + std::sin(ph) * v));
            q.weights.push_back(rt.weights[i] * waz);
        }
    }
    return q;
}

// Arc rule on S^1 for angles in [a_lo, a_hi] (Gauss-Legendre in angle).
inline Quadrature arc_rule_2d(double a_lo, double a_hi, int n) {
    Rule1D r = gauss_legendre(n, a_lo, a_hi);
    Quadrature q;
    q.nodes.reserve(n);
    q.weights.reserve(n);
    for (int i = 0; i < n; ++i) {
        q.nodes.push_back(Vec(std::cos(r.nodes[i]), std::sin(r.nodes[i]), 0.0));
        q.weights.push_back(r.weights[i]);
    }
    return q;
}

}  // namespace detail

// Quadrature on a spherical domain. d=2 full circle: uniform trapezoid in angle
// (exact through trigonometric degree #nodes-1); d=3 full sphere: Gauss-Legendre
// in the polar cosine x uniform azimuth. Half spheres and caps restrict the
// polar range, which keeps polynomial exactness in d=3 and gives spectral
// accuracy on arcs in d=2.
inline Quadrature build_quadrature(const SphericalDomain& domain, int resolution) {
    domain.validate();
    require(resolution >= 8, "build_quadrature: resolution >= 8");
    Quadrature q;
    q.domain = domain;
    if (domain.dim == 2) {
        if (domain.kind == DomainKind::FullSphere) {
            int n = 4 * resolution;
            q.nodes.reserve(n);
            q.weights.reserve(n);
            const double w = 2.0 * pi / n;
            for (int i = 0; i < n; ++i) {
                double t = w * i;
                q.nodes.push_back(Vec(std::cos(t), std::sin(t), 0.0));
                q.weights.push_back(w);
            }
            q.exactness_degree = 2 * resolution;
        } else {
            double half = (domain.kind == DomainKind::HalfSphere) ? 0.0 : std::asin(domain.cap_delta);
            q = detail::arc_rule_2d(-half, pi + half, 8 * resolution);
            q.domain = domain;
            q.exactness_degree = 2 * resolution;
        }
    } else {
        double t_lo = -1.0;
        if (domain.kind == DomainKind::HalfSphere) t_lo = 0.0;
        if (domain.kind == DomainKind::Cap) t_lo = -domain.cap_delta;
        int n_t = resolution + 2;
        int n_az = 2 * resolution + 4;
        q = detail::band_rule_3d(Vec(0, 0, 1), t_lo, 1.0, n_t, n_az);
        q.domain = domain;
        q.exactness_degree = 2 * resolution;
    }
    return q;
}

// Rule over the open hemisphere {x . axis > 0}; exact for polynomials of
// degree <= 2*order-1 restricted to it.
inline Quadrature hemisphere_rule(int d, const Vec& axis, int order = 24) {
    Vec n = axis.normalized();
    Quadrature q;
    q.domain = SphericalDomain::half(d);
    if (d == 2) {
        double a = std::atan2(n[1], n[0]);
        q = detail::arc_rule_2d(a - pi / 2.0, a + pi / 2.0, 2 * order);
    } else {
        q = detail::band_rule_3d(n, 0.0, 1.0, order, 2 * order + 1);
    }
    q.exactness_degree = 2 * order - 1;
    return q;
}

// Rule over the lune {x.a > 0} \cap {x.b > 0}. With the polar axis along the
// intersection of the two boundary great circles the lune is a coordinate
// rectangle, so a product Gauss rule applies cleanly.
inline Quadrature lune_rule(int d, const Vec& a_in, const Vec& b_in, int order = 48) {
    Vec a = a_in.normalized(), b = b_in.normalized();
    double c = a.dot(b);
    if (c > 1.0 - 1e-13) return hemisphere_rule(d, a, order);
    if (c < -1.0 + 1e-13) {
        Quadrature empty;
        empty.domain = SphericalDomain::half(d);
        return empty;  // antipodal: empty interior
    }
    Quadrature q;
    q.domain = SphericalDomain::half(d);
    if (d == 2) {
        double pa = std::atan2(a[1], a[0]);
        double pb = std::atan2(b[1], b[0]);
        // intersect (pa-pi/2, pa+pi/2) and (pb-pi/2, pb+pi/2) on the circle
        double diff = std::remainder(pb - pa, 2.0 * pi);
        double lo = std::max(-pi / 2.0, diff - pi / 2.0);
        double hi = std::min(pi / 2.0, diff + pi / 2.0);
        if (hi <= lo) return q;
        q = detail::arc_rule_2d(pa + lo, pa + hi, 2 * order);
        q.domain = SphericalDomain::half(d);
    } else {
        Vec e = a.cross(b).normalized();
        Vec p = a;  // a is orthogonal to e by construction
        Vec r = e.cross(p);
        double gamma = std::atan2(b.dot(r), b.dot(p));  // in (0, pi)
        // admissible azimuth: cos(phi) > 0 and cos(phi - gamma) > 0
        double lo = gamma - pi / 2.0, hi = pi / 2.0;
        if (hi <= lo) return q;
        Rule1D rth = gauss_legendre(order, 0.0, pi);
        Rule1D rph = gauss_legendre(order, lo, hi);
        for (int i = 0; i < order; ++i) {
            double th = rth.nodes[i];
            double st = std::sin(th), ct = std::cos(th);
            for (int j = 0; j < order; ++j) {
                double ph = rph.nodes[j];
                q.nodes.push_back(ct * e + st * (std::cos(ph) * p + std::sin(ph) * r));
                q.weights.push_back(rth.weights[i] * st * rph.weights[j]);
            }
        }
    }
    q.exactness_degree = order;
    return q;
}

}  // namespace obsepi
