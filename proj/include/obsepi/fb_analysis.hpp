#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "obsepi/cone.hpp"
#include "obsepi/energy.hpp"
#include "obsepi/grid_energy.hpp"
#include "obsepi/obstacle_solver.hpp"

namespace obsepi {

// Sampled Weiss gap e(r) = W(u, x0, r) - Theta_u(x0) and rotation defect f(r)
// across decreasing scales.
struct DecaySeries {
    std::vector<double> r;
    std::vector<double> e;
    std::vector<double> f;
};

enum class PointKind { Regular, Singular, Unclassified };

struct PointClassification {
    Vec point = Vec::Zero();
    double density = 0.0;
    PointKind kind = PointKind::Unclassified;
    HalfSquareProfile nu;   // Regular
    QuadraticForm A;        // Singular (projected into K)
    int stratum = 0;        // dim ker A below threshold (Singular only)
    double fit_residual = 0.0;
};

inline const char* to_string(PointKind k) {
    switch (k) {
        case PointKind::Regular: return "Regular";
        case PointKind::Singular: return "Singular";
        default: return "Unclassified";
    }
}

// Scales 8h <= r <= r_max at dyadic spacing, largest first.
inline std::vector<double> dyadic_scales(const GridFunction& u, const Vec& x0,
                                         double r_max = 0.5) {
    double lo = 8.0 * u.grid.h();
    double room = u.grid.L;
    for (int k = 0; k < u.grid.d; ++k) room = std::min(room, u.grid.L - std::abs(x0[k]));
    double hi = std::min(r_max, room * (1.0 - 1e-9));
    std::vector<double> out;
    for (double r = hi; r >= lo * (1.0 - 1e-9); r *= 0.5) out.push_back(r);
    return out;
}

// Theta_u(x0) by Richardson extrapolation (linear in r) on the two smallest
// reliable scales.
inline double weiss_density(const GridFunction& u, const GridGradient& du, const Vec& x0,
                            const BasisPtr& basis) {
    std::vector<double> rs = dyadic_scales(u, x0);
    require(rs.size() >= 2, "weiss_density: insufficient scale range");
    double w1 = energy_at_scale(u, du, x0, rs.back(), basis).W;          // smallest
    double w2 = energy_at_scale(u, du, x0, rs[rs.size() - 2], basis).W;  // twice that
    return 2.0 * w1 - w2;
}

inline double weiss_density(const GridFunction& u, const Vec& x0, const BasisPtr& basis) {
    GridGradient du(u);
    return weiss_density(u, du, x0, basis);
}

// Classify by the two-value law of the density, then least-squares fit of the
// blow-up over the matching family at the smallest reliable scale.
inline PointClassification classify_point(const GridFunction& u, const GridGradient& du,
                                          const Vec& x0, const BasisPtr& basis) {
    const int d = u.grid.d;
    DensityConstants dc = density_constants(d);
    PointClassification out;
    out.point = x0;
    out.density = weiss_density(u, du, x0, basis);

    double r = 8.0 * u.grid.h();
    const Quadrature& q = *basis->quadrature;
    std::vector<double> trace(q.size());
    for (std::size_t i = 0; i < q.size(); ++i)
        trace[i] = u.interpolate(x0 + r * q.nodes[i]) / (r * r);
    Trace tr;
    tr.d = d;
    tr.quadrature = basis->quadrature;
    tr.values = trace;
    double trace_norm = tr.l2_norm();

    bool regular = std::abs(out.density - dc.theta_plus) < std::abs(out.density - dc.theta);
    if (regular) {
        // Gauss-Newton over nu from a moment-based start
        Vec nu = Vec::Zero();
        for (std::size_t i = 0; i < q.size(); ++i)
            nu += q.weights[i] * trace[i] * q.nodes[i];
        if (nu.norm() < 1e-14) nu[d - 1] = 1.0;
        nu = 0.5 * nu.normalized();
        for (int it = 0; it < 60; ++it) {
            Eigen::VectorXd res(q.size());
            Eigen::MatrixXd J(q.size(), d);
            for (std::size_t i = 0; i < q.size(); ++i) {
                double t = q.nodes[i].dot(nu);
                double w = std::sqrt(q.weights[i]);
                res[i] = w * (std::max(t, 0.0) * std::max(t, 0.0) - trace[i]);
                for (int k = 0; k < d; ++k)
                    J(i, k) = w * (t > 0.0 ? 2.0 * t * q.nodes[i][k] : 0.0);
            }
            Eigen::VectorXd step = (J.transpose() * J)
                                       .ldlt()
                                       .solve(J.transpose() * res);
            for (int k = 0; k < d; ++k) nu[k] -= step[k];
            if (step.norm() < 1e-12) break;
        }
        out.nu.nu = nu;
        SphereFn fit = SphereFn::half_square(basis, nu);
        double res2 = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i) {
            double dv = fit.eval(q.nodes[i]) - trace[i];
            res2 += q.weights[i] * dv * dv;
        }
        out.fit_residual = std::sqrt(res2);
        out.kind = PointKind::Regular;
    } else {
        QuadraticForm M = quadratic_content(tr, basis);
        QuadraticForm P = project_to_K(M);
        out.A = P;
        Eigen::VectorXd lam = P.eigenvalues();
        out.stratum = 0;
        for (int i = 0; i < lam.size(); ++i)
            if (lam[i] < 1e-3) ++out.stratum;
        SphereFn fit = SphereFn::quadratic(basis, P.A);
        double res2 = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i) {
            double dv = fit.eval(q.nodes[i]) - trace[i];
            res2 += q.weights[i] * dv * dv;
        }
        out.fit_residual = std::sqrt(res2);
        out.kind = PointKind::Singular;
    }
    if (out.fit_residual > 0.2 * std::max(trace_norm, 1e-12)) out.kind = PointKind::Unclassified;
    return out;
}

inline DecaySeries decay_series(const GridFunction& u, const GridGradient& du, const Vec& x0,
                                const BasisPtr& basis, double density) {
    DecaySeries s;
    for (double r : dyadic_scales(u, x0)) {
        s.r.push_back(r);
        s.e.push_back(energy_at_scale(u, du, x0, r, basis).W - density);
        s.f.push_back(monotonicity_terms(u, du, x0, r, basis).rotation_defect);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Closed-form solution of e' = (c/r) e^{1+gamma}:
//   e(r) = (e0^{-gamma} + c gamma log(r0/r))^{-1/gamma},
// geometric decay e0 (r/r0)^c when gamma = 0, and the e0-free envelope
// (-c gamma log(r/r0))^{-1/gamma} when e0 = +inf.
inline double ode_decay_oracle(double gamma, double c, double e0, double r0, double r) {
    require(r > 0.0 && r <= r0, "ode_decay_oracle: 0 < r <= r0");
    if (gamma == 0.0) return e0 * std::pow(r / r0, c);
    if (std::isinf(e0)) return std::pow(c * gamma * std::log(r0 / r), -1.0 / gamma);
    return std::pow(std::pow(e0, -gamma) + c * gamma * std::log(r0 / r), -1.0 / gamma);
}

inline constexpr double kEpsInfDecay = 1e18;  // sentinel for e == 0 series

struct DecayFit {
    double c_fit = 0.0;
    bool bound_satisfied = false;
};

// Largest c with e(r) <= (e(rmax)^{-gamma} + c gamma log(rmax/r))^{-1/gamma}
// for all sampled r (log(e(rmax)/e(r))/log(rmax/r) when gamma = 0).
inline DecayFit decay_fit(const DecaySeries& s, double gamma, double slack = 1e-9) {
    require(s.r.size() >= 6, "decay_fit: need at least 6 scales");
    for (std::size_t i = 1; i < s.r.size(); ++i) {
        require(s.r[i] < s.r[i - 1], "decay_fit: scales must decrease");
        require(s.e[i] <= s.e[i - 1] + slack, "decay_fit: series not monotone within slack");
    }
    DecayFit out;
    double e_max = s.e.front(), r_max = s.r.front();
    if (e_max <= 1e-15) {
        out.c_fit = kEpsInfDecay;
        out.bound_satisfied = true;
        return out;
    }
    double c_min = 1e300;
    for (std::size_t i = 1; i < s.r.size(); ++i) {
        double ei = std::max(s.e[i], 1e-15);
        double logr = std::log(r_max / s.r[i]);
        double c;
        if (gamma == 0.0)
            c = std::log(e_max / ei) / logr;
        else
            c = (std::pow(ei, -gamma) - std::pow(e_max, -gamma)) / (gamma * logr);
        c_min = std::min(c_min, c);
    }
    out.c_fit = c_min;
    out.bound_satisfied = c_min >= 1e-3;
    return out;
}

// L1(dB1) distance between the rescalings at scales t and s.
inline double l1_drift(const GridFunction& u, const Vec& x0, double s_scale, double t_scale,
                       const BasisPtr& basis) {
    require(s_scale > 0.0 && s_scale <= t_scale, "l1_drift: need 0 < s <= t");
    const Quadrature& q = *basis->quadrature;
    double acc = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        double ut = u.interpolate(x0 + t_scale * q.nodes[i]) / (t_scale * t_scale);
        double us = u.interpolate(x0 + s_scale * q.nodes[i]) / (s_scale * s_scale);
        acc += q.weights[i] * std::abs(ut - us);
    }
    return acc;
}

// Exponentially dyadic summands 2^{k/2} e(2^{-2^k} r0)^{1/2} of the drift bound.
struct DyadicDriftBound {
    std::vector<double> summands;
    std::vector<double> ratios;  // successive summand ratios
    double total = 0.0;
};

inline DyadicDriftBound dyadic_drift_bound(const std::vector<double>& e_at_levels) {
    DyadicDriftBound out;
    for (std::size_t k = 0; k < e_at_levels.size(); ++k) {
        double s = std::pow(2.0, (k + 1) / 2.0) * std::sqrt(std::max(0.0, e_at_levels[k]));
        out.summands.push_back(s);
        out.total += s;
        if (k > 0 && out.summands[k - 1] > 0.0)
            out.ratios.push_back(out.summands[k] / out.summands[k - 1]);
    }
    return out;
}

// Fit of ||u_{x0,r} - Q||_{L1} against the logarithmic modulus
// (-log r)^{-(1-gamma)/(2 gamma)}.
struct ModulusCheck {
    bool sufficient_range = false;
    double C_fit = 0.0;
    double slope = 0.0;           // of log(drift) against log((-log r)^{-(1-g)/2g})
    double predicted_slope = 1.0;
    bool exponent_ok = false;
    std::string note;
};

inline ModulusCheck blowup_modulus_check(const GridFunction& u, const GridGradient& du,
                                         const Vec& x0, const BasisPtr& basis) {
    const int d = u.grid.d;
    double gamma = log_epi_gamma(d);
    ModulusCheck out;
    PointClassification cls = classify_point(u, du, x0, basis);
    if (cls.kind != PointKind::Singular) {
        out.note = "point did not classify Singular";
        return out;
    }
    // exponentially dyadic levels r_k = r0 2^{-2^k} within [8h, 0.5]
    double r0 = 0.5, lo = 8.0 * u.grid.h();
    std::vector<double> rs, drifts, moduli;
    SphereFn blow = SphereFn::quadratic(basis, cls.A.A);
    const Quadrature& q = *basis->quadrature;
    for (int k = 0;; ++k) {
        double r = r0 * std::pow(2.0, -std::pow(2.0, k));
        if (r < lo) break;
        double acc = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i) {
            double ur = u.interpolate(x0 + r * q.nodes[i]) / (r * r);
            acc += q.weights[i] * std::abs(ur - blow.eval(q.nodes[i]));
        }
        rs.push_back(r);
        drifts.push_back(std::max(acc, 1e-15));
        // d = 2 has the geometric modulus r^beta; d >= 3 the logarithmic one
        moduli.push_back(gamma == 0.0
                             ? r
                             : std::pow(-std::log(r), -(1.0 - gamma) / (2.0 * gamma)));
    }
    if (rs.size() < 3) {
        out.note = "insufficient range: fewer than 3 dyadic-exponential levels";
        return out;
    }
    out.sufficient_range = true;
    for (std::size_t i = 0; i < rs.size(); ++i)
        out.C_fit = std::max(out.C_fit, drifts[i] / moduli[i]);
    out.slope = loglog_slope(moduli, drifts);
    // logarithmic branch: slope against the modulus should reach 1 - 0.2;
    // geometric branch: any positive Hoelder exponent validates the modulus
    out.predicted_slope = (gamma == 0.0) ? 0.0 : 1.0;
    out.exponent_ok = (gamma == 0.0) ? out.slope > 0.0 : out.slope >= 1.0 - 0.2;
    return out;
}

// e(r) corrected for almost minimality: e + 2 c1 r^alpha / alpha.
inline DecaySeries almost_min_correction(const DecaySeries& s, double alpha_h, double c1) {
    require(alpha_h > 0.0 && alpha_h <= 1.0, "almost_min_correction: alpha in (0,1]");
    require(c1 >= 0.0, "almost_min_correction: c1 >= 0");
    DecaySeries out = s;
    for (std::size_t i = 0; i < out.r.size(); ++i)
        out.e[i] += 2.0 * c1 * std::pow(out.r[i], alpha_h) / alpha_h;
    return out;
}

}  // namespace obsepi
