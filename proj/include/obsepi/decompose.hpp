#pragma once

#include <cmath>
#include <vector>

#include "obsepi/common.hpp"
#include "obsepi/cone.hpp"
#include "obsepi/sphere_basis.hpp"
#include "obsepi/sphere_fn.hpp"
#include "obsepi/trace.hpp"

namespace obsepi {

namespace detail {

// Indices of the lambda = d-1 cluster together with the axis each mode
// represents (phi_j = (x . w_j)/sqrt(|B1|)), recovered by quadrature so the
// ordering convention of the basis never needs to be assumed.
struct LinearCluster {
    std::vector<int> indices;
    Eigen::MatrixXd axes;  // d x d, column j = w_j
};

inline LinearCluster linear_cluster(const BasisPtr& basis) {
    const int d = basis->domain.dim;
    LinearCluster lc;
    lc.indices = basis->cluster(static_cast<double>(d - 1));
    require(static_cast<int>(lc.indices.size()) == d, "basis is missing the linear cluster");
    lc.axes = Eigen::MatrixXd::Zero(d, d);
    const Quadrature& q = *basis->quadrature;
    double nb = std::sqrt(ball_volume(d));
    for (int j = 0; j < d; ++j) {
        for (std::size_t i = 0; i < q.size(); ++i) {
            double phi = basis->eval(lc.indices[j], q.nodes[i]);
            for (int k = 0; k < d; ++k) lc.axes(k, j) += q.weights[i] * phi * q.nodes[i][k];
        }
        lc.axes.col(j) /= nb;  // <phi_j, x . e_k> = w_j[k] sqrt(|B1|)
    }
    return lc;
}

}  // namespace detail

// c = q_nu + Q_A + phi with phi carrying only modes of eigenvalue > 2d.
// phi is stored both as the exact nodal residual (reconstruction is exact by
// construction) and as band-limited coefficients; `residual` measures the
// low-mode content left after the matching, which should be at rounding level.
struct SingularDecomposition {
    HalfSquareProfile nu;
    QuadraticForm A;
    Trace phi;
    Eigen::VectorXd phi_coefficients;
    std::vector<double> phi_lambdas;
    double residual = 0.0;

    double phi_grad_norm_sq = 0.0;  // int |grad_theta phi|^2, exact
    double phi_norm_sq = 0.0;

    // negative eigenvalues a_1..a_k of A (as positive numbers)
    std::vector<double> negative_part() const {
        Eigen::VectorXd lam = A.eigenvalues();
        std::vector<double> out;
        for (int i = 0; i < lam.size(); ++i)
            if (lam[i] < -1e-14) out.push_back(-lam[i]);
        return out;
    }
};

// The linear-cluster coefficients of q_nu as a vector in mode space.
inline Eigen::VectorXd half_square_linear_coeffs(const Vec& nu, const BasisPtr& basis,
                                                 const detail::LinearCluster& lc) {
    const int d = basis->domain.dim;
    Eigen::VectorXd f = Eigen::VectorXd::Zero(d);
    double n = nu.norm();
    if (n < 1e-300) return f;
    Quadrature rule = hemisphere_rule(d, nu / n, (d == 2) ? 48 : 32);
    for (std::size_t i = 0; i < rule.size(); ++i) {
        double t = rule.nodes[i].dot(nu);
        double qv = rule.weights[i] * t * t;
        for (int j = 0; j < d; ++j) f[j] += qv * basis->eval(lc.indices[j], rule.nodes[i]);
    }
    return f;
}

// Unique splitting: nu absorbs the whole lambda = d-1 cluster of c, A the
// {0, 2d} content of c - q_nu, and phi the exact remainder.
inline SingularDecomposition decompose_singular(const Trace& c, const BasisPtr& basis) {
    const int d = basis->domain.dim;
    detail::LinearCluster lc = detail::linear_cluster(basis);
    SphereFn cf = c.as_fn(basis);

    Eigen::VectorXd c_all = cf.project_onto(basis);
    Eigen::VectorXd target(d);
    for (int j = 0; j < d; ++j) target[j] = c_all[lc.indices[j]];

    Vec nu = Vec::Zero();
    if (target.norm() > 1e-10) {
        // closed-form seed: the map is nu -> M3/sqrt(|B1|) |nu| nu in axis space
        Eigen::VectorXd ax = lc.axes * target;  // axis-space linear content
        double m3 = hemisphere_moment(d, 3);
        Eigen::VectorXd z = ax * std::sqrt(ball_volume(d)) / m3;
        double zn = z.norm();
        for (int k = 0; k < d; ++k) nu[k] = z[k] / std::sqrt(zn);

        // Newton polish with finite-difference Jacobian
        double res = 0.0;
        bool done = false;
        for (int it = 0; it < 40; ++it) {
            Eigen::VectorXd F = half_square_linear_coeffs(nu, basis, lc) - target;
            res = F.norm();
            if (res < 1e-13 * std::max(1.0, target.norm())) {
                done = true;
                break;
            }
            Eigen::MatrixXd J(d, d);
            double h = 1e-6;
            for (int k = 0; k < d; ++k) {
                Vec np = nu, nm = nu;
                np[k] += h;
                nm[k] -= h;
                J.col(k) = (half_square_linear_coeffs(np, basis, lc) -
                            half_square_linear_coeffs(nm, basis, lc)) /
                           (2.0 * h);
            }
            Eigen::VectorXd step = J.fullPivLu().solve(F);
            for (int k = 0; k < d; ++k) nu[k] -= step[k];
        }
        if (!done) {
            Eigen::VectorXd F = half_square_linear_coeffs(nu, basis, lc) - target;
            if (F.norm() > 1e-9 * std::max(1.0, target.norm()))
                throw NewtonError("decompose_singular: nu matching did not converge", nu,
                                  F.norm());
        }
    }

    SphereFn qf = SphereFn::half_square(basis, nu);
    SphereFn rem = cf - qf;
    QuadraticForm A = quadratic_content(Trace::from_fn(basis, rem), basis);

    SingularDecomposition dec;
    dec.nu.nu = nu;
    dec.A = A;

    SphereFn phi_fn = rem - SphereFn::quadratic(basis, A.A);
    dec.phi.d = d;
    dec.phi.quadrature = basis->quadrature;
    dec.phi.values = phi_fn.nodal_values(*basis->quadrature);
    dec.phi.exact = std::make_shared<SphereFn>(phi_fn);

    dec.phi_coefficients = phi_fn.project_onto(basis);
    dec.phi_lambdas.resize(basis->count());
    double low = 0.0;
    for (int j = 0; j < basis->count(); ++j) {
        dec.phi_lambdas[j] = basis->lambda(j);
        if (basis->lambda(j) <= 2.0 * d + 1e-9) {
            low += dec.phi_coefficients[j] * dec.phi_coefficients[j];
            dec.phi_coefficients[j] = 0.0;
        }
    }
    dec.residual = std::sqrt(low);
    dec.phi_grad_norm_sq = phi_fn.grad_norm_sq();
    dec.phi_norm_sq = phi_fn.norm_sq();
    return dec;
}

// ---------------------------------------------------------------------------
// Flat-point moment map: F(nu) = ( int_{S_delta0} q_nu phi_j )_{j=1..d} over
// the first d cap eigenfunctions.
inline Eigen::VectorXd cap_moments(const Vec& nu, const BasisPtr& cap_basis,
                                   const BasisPtr& full_basis) {
    const int d = full_basis->domain.dim;
    SphereFn q = SphereFn::half_square(full_basis, nu);
    Eigen::VectorXd F(d);
    for (int j = 0; j < d; ++j) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(cap_basis->count());
        e[j] = 1.0;
        F[j] = q.dot(SphereFn::subdomain_combo(full_basis, cap_basis, e));
    }
    return F;
}

// nu such that q_nu reproduces the first d cap moments of c, so that c - q_nu
// contains no low cap modes. Newton iteration from e_d/2 with a
// finite-difference Jacobian.
inline HalfSquareProfile choose_nu_flat(const Trace& c, const BasisPtr& cap_basis,
                                        const BasisPtr& full_basis) {
    const int d = full_basis->domain.dim;
    SphereFn cf = c.as_fn(full_basis);
    Eigen::VectorXd target(d);
    for (int j = 0; j < d; ++j) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(cap_basis->count());
        e[j] = 1.0;
        target[j] = cf.dot(SphereFn::subdomain_combo(full_basis, cap_basis, e));
    }
    Vec nu = Vec::Zero();
    nu[d - 1] = 0.5;
    double res = 0.0;
    for (int it = 0; it < 50; ++it) {
        Eigen::VectorXd F = cap_moments(nu, cap_basis, full_basis) - target;
        res = F.norm();
        if (res < 1e-12) return HalfSquareProfile{nu};
        Eigen::MatrixXd J(d, d);
        double h = 1e-7;
        for (int k = 0; k < d; ++k) {
            Vec np = nu, nm = nu;
            np[k] += h;
            nm[k] -= h;
            J.col(k) =
                (cap_moments(np, cap_basis, full_basis) - cap_moments(nm, cap_basis, full_basis)) /
                (2.0 * h);
        }
        Eigen::VectorXd step = J.fullPivLu().solve(F);
        if (!step.allFinite() || step.norm() > 0.5)
            throw NewtonError("choose_nu_flat: diverging step (trace too far from q_{e_d/2})", nu,
                              res);
        for (int k = 0; k < d; ++k) nu[k] -= step[k];
    }
    throw NewtonError("choose_nu_flat: no convergence", nu, res);
}

}  // namespace obsepi
