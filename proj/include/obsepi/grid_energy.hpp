#pragma once

#include "obsepi/energy.hpp"
#include "obsepi/grid.hpp"
#include "obsepi/sphere_basis.hpp"

namespace obsepi {

// u_{r,x0}(x) = u(r x + x0)/r^2 resampled on a reference grid over [-1,1]^d.
inline GridFunction rescale(const GridFunction& u, const Vec& x0, double r, int n_ref = 0) {
    require(r > 0.0, "rescale: r > 0");
    const Grid& g = u.grid;
    for (int k = 0; k < g.d; ++k)
        require(std::abs(x0[k]) + r <= g.L + 1e-12, "rescale: ball exits domain");
    Grid ref{g.d, 1.0, n_ref > 0 ? n_ref : g.n};
    return GridFunction::sample(ref, [&](const Vec& y) {
        return u.interpolate(x0 + r * y) / (r * r);
    });
}

// Weiss energies of u on B_r(x0): radial midpoint rule times the spherical
// quadrature of the basis, with multilinear interpolation of nodal values and
// centered-difference nodal gradients.
inline EnergyReport energy_at_scale(const GridFunction& u, const GridGradient& du, const Vec& x0,
                                    double r, const BasisPtr& basis, int radial_points = 64) {
    const Grid& g = u.grid;
    const int d = g.d;
    for (int k = 0; k < d; ++k)
        require(std::abs(x0[k]) + r <= g.L + 1e-12, "energy_at_scale: ball exits box");
    const Quadrature& q = *basis->quadrature;
    EnergyReport rep;
    const double dr = r / radial_points;
    for (int s = 0; s < radial_points; ++s) {
        double rs = (s + 0.5) * dr;
        double shell = 0.0, shell_pos = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i) {
            Vec x = x0 + rs * q.nodes[i];
            Vec gr = du.interpolate(x);
            double uv = u.interpolate(x);
            shell += q.weights[i] * gr.squaredNorm();
            shell_pos += q.weights[i] * std::max(0.0, uv);
        }
        rep.dirichlet_bulk += dr * std::pow(rs, d - 1) * shell;
        rep.positive_mass += dr * std::pow(rs, d - 1) * shell_pos;
    }
    double bdry = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        double uv = u.interpolate(x0 + r * q.nodes[i]);
        bdry += q.weights[i] * uv * uv;
    }
    rep.boundary_l2 = bdry * std::pow(r, d - 1);
    // scale-invariant normalisation
    rep.dirichlet_bulk /= std::pow(r, d + 2);
    rep.boundary_l2 /= std::pow(r, d + 3);
    rep.positive_mass /= std::pow(r, d + 2);
    rep.W0 = rep.dirichlet_bulk - 2.0 * rep.boundary_l2;
    rep.W = rep.W0 + rep.positive_mass;
    rep.W_tilde = rep.W;  // u >= 0 for solver output
    return rep;
}

inline EnergyReport energy_at_scale(const GridFunction& u, const Vec& x0, double r,
                                    const BasisPtr& basis, int radial_points = 64) {
    GridGradient du(u);
    return energy_at_scale(u, du, x0, r, basis, radial_points);
}

// The two right-hand terms of the monotonicity identity
//   dW/dr = (d+2)/r [W(z_r) - W(u_r)] + (1/r) int_{dB1} (x.grad u_r - 2 u_r)^2.
struct MonotonicityTerms {
    double scale_term = 0.0;
    double rotation_defect = 0.0;
};

inline MonotonicityTerms monotonicity_terms(const GridFunction& u, const GridGradient& du,
                                            const Vec& x0, double r, const BasisPtr& basis) {
    const int d = u.grid.d;
    const Quadrature& q = *basis->quadrature;
    MonotonicityTerms out;

    double W_u = energy_at_scale(u, du, x0, r, basis).W;

    // trace of u_{r,x0} on the unit sphere and its 2-homogeneous extension
    std::vector<double> trace(q.size());
    double defect = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        Vec x = x0 + r * q.nodes[i];
        double uv = u.interpolate(x);
        trace[i] = uv / (r * r);
        double radial = q.nodes[i].dot(du.interpolate(x)) / r - 2.0 * uv / (r * r);
        defect += q.weights[i] * radial * radial;
    }
    Trace tr;
    tr.d = d;
    tr.quadrature = basis->quadrature;
    tr.values = trace;
    HomogeneousFunction z{2.0, tr};
    double W_z = weiss_homogeneous(z, basis).W;

    out.scale_term = (d + 2.0) / r * (W_z - W_u);
    out.rotation_defect = defect / r;
    return out;
}

}  // namespace obsepi
