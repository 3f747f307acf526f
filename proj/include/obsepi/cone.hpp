#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "obsepi/common.hpp"
#include "obsepi/sphere_basis.hpp"
#include "obsepi/trace.hpp"

namespace obsepi {

// Q_A(x) = x . A x with A symmetric (only the symmetric part is kept).
struct QuadraticForm {
    Eigen::MatrixXd A;

    QuadraticForm() : A(Eigen::MatrixXd::Zero(2, 2)) {}
    explicit QuadraticForm(Eigen::MatrixXd m) : A(0.5 * (m + m.transpose())) {}
    QuadraticForm(int d, double diag) : A(Eigen::MatrixXd::Identity(d, d) * diag) {}

    int dim() const { return static_cast<int>(A.rows()); }
    double trace() const { return A.trace(); }
    double eval(const Vec& x) const { return x.head(dim()).dot(A * x.head(dim())); }

    Eigen::VectorXd eigenvalues() const {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
        return es.eigenvalues();
    }

    // membership in K = {A >= 0, tr A = 1/4}
    bool in_K(double tol = 1e-10) const {
        if (std::abs(trace() - 0.25) > tol) return false;
        return eigenvalues().minCoeff() > -tol;
    }
};

// q_nu(x) = (x . nu)_+^2; |nu| = 1/2 on the flat-blow-up manifold K_+.
struct HalfSquareProfile {
    Vec nu = Vec::Zero();

    double eval(const Vec& x) const {
        double t = std::max(0.0, x.dot(nu));
        return t * t;
    }
    bool in_K_plus(double tol = 1e-10) const { return std::abs(nu.norm() - 0.5) < tol; }
};

inline Trace trace_of_quadratic(const QuadraticForm& Q, const BasisPtr& basis) {
    return Trace::from_fn(basis, SphereFn::quadratic(basis, Q.A));
}

inline Trace trace_of_half_square(const HalfSquareProfile& q, const BasisPtr& basis) {
    return Trace::from_fn(basis, SphereFn::half_square(basis, q.nu));
}

// ---------------------------------------------------------------------------
// The nonnegative replacement of an indefinite quadratic form: in the
// eigenbasis A = diag(-a_1..-a_k, a_{k+1}..a_d), drop the negative part and
// subtract its total from the largest eigenvalue, so B >= 0 and tr B = tr A.
// Requires a_d > sum_{j<=k} a_j (the trace is close to the blow-up cone).
inline QuadraticForm nonneg_replacement(const QuadraticForm& Q) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q.A);
    Eigen::VectorXd lam = es.eigenvalues();  // ascending
    const int d = Q.dim();
    if (lam[0] >= -1e-14) return Q;  // already positive semidefinite
    double neg_sum = 0.0;
    for (int i = 0; i < d; ++i)
        if (lam[i] < 0.0) neg_sum += -lam[i];
    require(lam[d - 1] > neg_sum,
            "nonneg_replacement: max eigenvalue must exceed the negative mass");
    Eigen::VectorXd mu = lam.cwiseMax(0.0);
    mu[d - 1] -= neg_sum;  // ascending order puts the (lexicographically last) max here
    Eigen::MatrixXd B =
        es.eigenvectors() * mu.asDiagonal() * es.eigenvectors().transpose();
    return QuadraticForm(B);
}

namespace detail {

// Euclidean projection of v onto the simplex {x >= 0, sum x = s}.
inline Eigen::VectorXd project_simplex(Eigen::VectorXd v, double s) {
    const int n = static_cast<int>(v.size());
    std::vector<double> u(v.data(), v.data() + n);
    std::sort(u.begin(), u.end(), std::greater<double>());
    double css = 0.0, theta = 0.0;
    int rho = 0;
    for (int i = 0; i < n; ++i) {
        css += u[i];
        double t = (css - s) / (i + 1);
        if (u[i] - t > 0) {
            rho = i;
            theta = t;
        }
    }
    (void)rho;
    return v.unaryExpr([theta](double x) { return std::max(x - theta, 0.0); });
}

}  // namespace detail

// Frobenius-metric projection of a symmetric matrix onto K (eigenvalues onto
// the scaled simplex).
inline QuadraticForm project_to_K(const QuadraticForm& Q) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q.A);
    Eigen::VectorXd mu = detail::project_simplex(es.eigenvalues(), 0.25);
    return QuadraticForm(es.eigenvectors() * mu.asDiagonal() * es.eigenvectors().transpose());
}

// L2(dB1) inner product of quadratic-form traces:
//   <Q_M, Q_N> = |S^{d-1}|/(d(d+2)) (2 tr(MN) + tr M tr N).
inline double quadratic_l2_product(const Eigen::MatrixXd& M, const Eigen::MatrixXd& N) {
    int d = static_cast<int>(M.rows());
    return sphere_area(d) / (d * (d + 2.0)) *
           (2.0 * (M * N).trace() + M.trace() * N.trace());
}

// Symmetric matrix whose quadratic form carries the {lambda = 0, 2d} spectral
// content of the trace. The correspondence is linear and invertible, so it is
// solved through the closed-form Gram relation above.
inline QuadraticForm quadratic_content(const Trace& c, const BasisPtr& basis) {
    const int d = basis->domain.dim;
    std::vector<Eigen::MatrixXd> gens;
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) {
            Eigen::MatrixXd E = Eigen::MatrixXd::Zero(d, d);
            E(i, j) = E(j, i) = (i == j) ? 1.0 : 0.5;
            gens.push_back(E);
        }
    const int n = static_cast<int>(gens.size());
    Eigen::MatrixXd G(n, n);
    Eigen::VectorXd rhs(n);
    SphereFn cf = c.as_fn(basis);
    for (int a = 0; a < n; ++a) {
        SphereFn qa = SphereFn::quadratic(basis, gens[a]);
        rhs[a] = cf.dot(qa);
        for (int b = 0; b < n; ++b) G(a, b) = quadratic_l2_product(gens[a], gens[b]);
    }
    Eigen::VectorXd sol = G.ldlt().solve(rhs);
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(d, d);
    for (int a = 0; a < n; ++a) M += sol[a] * gens[a];
    return QuadraticForm(M);
}

// dist_{L2(dB1)}(c, K): project the {0, 2d} content to a matrix, project that
// onto K, and add the orthogonal remainder (linear and higher modes).
inline double dist_to_cone(const Trace& c, const BasisPtr& basis) {
    QuadraticForm M = quadratic_content(c, basis);
    QuadraticForm P = project_to_K(M);
    Eigen::MatrixXd D = M.A - P.A;
    double matrix_part = quadratic_l2_product(D, D);
    SphereFn cf = c.as_fn(basis);
    SphereFn rem = cf - SphereFn::quadratic(basis, M.A);
    return std::sqrt(std::max(0.0, matrix_part + rem.norm_sq()));
}

}  // namespace obsepi
