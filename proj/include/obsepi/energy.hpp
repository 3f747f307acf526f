#pragma once

#include <cmath>
#include <vector>

#include "obsepi/common.hpp"
#include "obsepi/sphere_basis.hpp"
#include "obsepi/sphere_fn.hpp"
#include "obsepi/trace.hpp"

namespace obsepi {

// Weiss energy densities of the canonical blow-ups. With the boundary-adjusted
// energy W(u) = \int_{B1}|grad u|^2 - 2\int_{dB1}u^2 + \int_{B1}u_+ one gets
// W(Q_A) = (tr A / 2) \int_{B1} x_d^2 = |S^{d-1}| / (8 d (d+2)) for Q_A in K,
// and half of that on K_+.
struct DensityConstants {
    double theta = 0.0;
    double theta_plus = 0.0;
};

inline DensityConstants density_constants(int d) {
    require(d >= 2, "density_constants: d >= 2");
    DensityConstants c;
    c.theta = sphere_area(d) / (8.0 * d * (d + 2.0));
    c.theta_plus = 0.5 * c.theta;
    return c;
}

struct EnergyReport {
    double W0 = 0.0;
    double W_tilde = 0.0;
    double W = 0.0;
    double dirichlet_bulk = 0.0;  // int_{B1} |grad u|^2
    double boundary_l2 = 0.0;     // int_{dB1} u^2
    double positive_mass = 0.0;   // int_{B1} u_+
};

// ---------------------------------------------------------------------------
// Energies of finite sums of homogeneous functions  u = sum_k r^{beta_k} f_k.
// Radial integrals are closed form; spherical integrals go through the exact
// product rules of SphereFn.
struct HomogeneousSum {
    std::vector<double> degrees;
    std::vector<SphereFn> profiles;

    void add(double beta, SphereFn f) {
        degrees.push_back(beta);
        profiles.push_back(std::move(f));
    }

    int dim() const { return profiles.empty() ? 2 : profiles[0].d; }

    double eval(double r, const Vec& theta) const {
        double v = 0.0;
        for (std::size_t k = 0; k < degrees.size(); ++k)
            v += std::pow(r, degrees[k]) * profiles[k].eval(theta);
        return v;
    }

    double dirichlet() const {
        int d = dim();
        double s = 0.0;
        for (std::size_t i = 0; i < degrees.size(); ++i)
            for (std::size_t j = 0; j < degrees.size(); ++j) {
                double denom = d + degrees[i] + degrees[j] - 2.0;
                require(denom > 0.0, "homogeneous energy: d + 2 alpha - 2 must be positive");
                s += (degrees[i] * degrees[j] * profiles[i].dot(profiles[j]) +
                      profiles[i].dot_grad(profiles[j])) /
                     denom;
            }
        return s;
    }

    double boundary_l2() const {
        double s = 0.0;
        for (std::size_t i = 0; i < degrees.size(); ++i)
            for (std::size_t j = 0; j < degrees.size(); ++j) s += profiles[i].dot(profiles[j]);
        return s;
    }

    double volume() const {
        int d = dim();
        double s = 0.0;
        for (std::size_t i = 0; i < degrees.size(); ++i)
            s += profiles[i].integral() / (d + degrees[i]);
        return s;
    }

    // int_{B1} u_+ via radial shells on the context quadrature; exact when the
    // trace keeps one sign on each shell, and accurate to the (tiny) nodal
    // negative mass otherwise.
    double volume_pos(int shells = 24) const {
        int d = dim();
        double base = volume();
        if (degrees.size() == 1) {
            // single homogeneity: the sign pattern is radial-independent
            const Quadrature& q = *profiles[0].context->quadrature;
            double neg = 0.0;
            for (std::size_t i = 0; i < q.size(); ++i) {
                double v = profiles[0].eval(q.nodes[i]);
                if (v < 0.0) neg += q.weights[i] * (-v);
            }
            return base + neg / (d + degrees[0]);
        }
        const Quadrature& q = *profiles[0].context->quadrature;
        std::vector<std::vector<double>> vals(degrees.size());
        for (std::size_t k = 0; k < degrees.size(); ++k) vals[k] = profiles[k].nodal_values(q);
        Rule1D rr = gauss_legendre(shells, 0.0, 1.0);
        double neg = 0.0;
        for (int s = 0; s < shells; ++s) {
            double r = rr.nodes[s];
            double wr = rr.weights[s] * std::pow(r, d - 1);
            for (std::size_t i = 0; i < q.size(); ++i) {
                double v = 0.0;
                for (std::size_t k = 0; k < degrees.size(); ++k)
                    v += std::pow(r, degrees[k]) * vals[k][i];
                if (v < 0.0) neg += wr * q.weights[i] * (-v);
            }
        }
        return base + neg;
    }

    EnergyReport energy(bool assume_nonnegative = false) const {
        EnergyReport rep;
        rep.dirichlet_bulk = dirichlet();
        rep.boundary_l2 = boundary_l2();
        rep.W0 = rep.dirichlet_bulk - 2.0 * rep.boundary_l2;
        rep.W_tilde = rep.W0 + volume();
        rep.positive_mass = assume_nonnegative ? (rep.W_tilde - rep.W0) : (volume_pos() );
        rep.W = rep.W0 + rep.positive_mass;
        return rep;
    }

    double min_on_shells(int shells = 16) const {
        const Quadrature& q = *profiles[0].context->quadrature;
        std::vector<std::vector<double>> vals(degrees.size());
        for (std::size_t k = 0; k < degrees.size(); ++k) vals[k] = profiles[k].nodal_values(q);
        double m = 1e300;
        for (int s = 1; s <= shells; ++s) {
            double r = static_cast<double>(s) / shells;
            for (std::size_t i = 0; i < q.size(); ++i) {
                double v = 0.0;
                for (std::size_t k = 0; k < degrees.size(); ++k)
                    v += std::pow(r, degrees[k]) * vals[k][i];
                m = std::min(m, v);
            }
        }
        return m;
    }
};

// ---------------------------------------------------------------------------
// The alpha-homogeneous extension r^alpha c(theta).
struct HomogeneousFunction {
    double alpha = 2.0;
    Trace trace;
};

// Energy of the alpha-homogeneous extension, computed along two independent
// routes: the spectral closed form sum c_j^2 ((alpha^2+lambda_j)/(d+2alpha-2)-2)
// and direct quadrature of the nodal values/gradients with closed-form radial
// factors. They must agree to 1e-8 on band-limited traces.
inline EnergyReport weiss_homogeneous(const HomogeneousFunction& f, const BasisPtr& basis) {
    const int d = basis->domain.dim;
    const double a = f.alpha;
    require(d + 2.0 * a - 2.0 > 0.0, "weiss_homogeneous: d + 2 alpha - 2 must be positive");

    bool band_limited = f.trace.coefficients.has_value();
    Eigen::VectorXd c;
    if (band_limited) {
        c = *f.trace.coefficients;
    } else {
        ProjectionResult pr = basis->project(f.trace.values);
        c = pr.coefficients;
        band_limited = pr.residual < 1e-9;
    }
    double spectral_W0 = 0.0;
    for (int j = 0; j < c.size(); ++j)
        spectral_W0 += c[j] * c[j] * ((a * a + basis->lambda(j)) / (d + 2.0 * a - 2.0) - 2.0);

    SphereFn fn = f.trace.as_fn(basis);
    HomogeneousSum sum;
    sum.add(a, fn);
    EnergyReport rep;
    rep.dirichlet_bulk = sum.dirichlet();
    rep.boundary_l2 = sum.boundary_l2();
    rep.W0 = rep.dirichlet_bulk - 2.0 * rep.boundary_l2;

    if (band_limited) {
        // the two routes are independent checks of each other on band-limited data
        double rel = std::abs(rep.W0 - spectral_W0) / std::max(1.0, std::abs(spectral_W0));
        require(rel < 1e-8, "weiss_homogeneous: spectral and direct W0 disagree");
    }

    double pos = 0.0, tot = 0.0;
    for (std::size_t i = 0; i < f.trace.values.size(); ++i) {
        double w = f.trace.quadrature->weights[i];
        pos += w * std::max(0.0, f.trace.values[i]);
        tot += w * f.trace.values[i];
    }
    rep.positive_mass = pos / (d + a);
    rep.W_tilde = rep.W0 + tot / (d + a);
    rep.W = rep.W0 + rep.positive_mass;
    return rep;
}

// Right side of the two-homogeneity comparison identity
//   W0(ftilde) - (1 - eps_alpha) W0(f) = eps_alpha/(d+2alpha-2) sum (lambda_alpha - lambda_j) c_j^2
// with eps_alpha = (alpha-2)/(d+alpha) and lambda_alpha = alpha(alpha+d-2).
inline double fourier_energy_gap(const Eigen::VectorXd& coefficients,
                                 const std::vector<double>& lambdas, double alpha, int d) {
    require(alpha > 2.0, "fourier_energy_gap: alpha > 2");
    double eps = (alpha - 2.0) / (d + alpha);
    double lam_a = alpha * (alpha + d - 2.0);
    double s = 0.0;
    for (int j = 0; j < coefficients.size(); ++j)
        s += (-lambdas[j] + lam_a) * coefficients[j] * coefficients[j];
    return eps / (d + 2.0 * alpha - 2.0) * s;
}

}  // namespace obsepi
