#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "obsepi/common.hpp"
#include "obsepi/cone.hpp"
#include "obsepi/decompose.hpp"
#include "obsepi/energy.hpp"
#include "obsepi/gauss.hpp"
#include "obsepi/parallel.hpp"
#include "obsepi/trace.hpp"

namespace obsepi {

struct CompetitorParams {
    double alpha = 2.5;
    double eps_alpha = 0.0;  // (alpha - 2)/(d + alpha)
    double eps = 0.0;        // constant in the inequality
    double gamma = 0.0;      // 0 in d=2, (d-1)/(d+3) otherwise
    double C4 = 0.0;         // 1 + 4d
};

struct EpiReport {
    double W_z = 0.0;
    double W_h = 0.0;
    double theta_ref = 0.0;
    double gain = 0.0;           // W_z - W_h
    double required_gain = 0.0;  // eps (W_z - theta)^{1+gamma}
    bool satisfied = false;
    double empirical_eps = 0.0;  // largest eps validating the inequality
    double min_h = 0.0;          // competitor minimum over radial shells
};

inline constexpr double kEpsInf = 1e9;  // sentinel for an unconstrained eps

// ---------------------------------------------------------------------------
// Flat points. Competitor h = q_nu + r^{5/2} (c - q_nu) with nu chosen so the
// remainder has no low cap modes; eps = 1/(2d+5).
struct FlatCompetitor {
    HalfSquareProfile nu;
    double alpha = 2.5;
    SphereFn phi;
    CompetitorParams params;
};

inline std::pair<FlatCompetitor, EpiReport> flat_competitor(const Trace& c,
                                                            const BasisPtr& cap_basis,
                                                            const BasisPtr& full_basis) {
    const int d = full_basis->domain.dim;
    FlatCompetitor comp;
    comp.alpha = 2.5;
    comp.params.alpha = comp.alpha;
    comp.params.eps = 1.0 / (2.0 * d + 5.0);
    comp.params.eps_alpha = comp.params.eps;
    comp.params.gamma = 0.0;
    comp.params.C4 = 1.0 + 4.0 * d;

    double lam_alpha = comp.alpha * (comp.alpha + d - 2.0);
    require(cap_basis->count() > d && cap_basis->lambda(d) >= lam_alpha,
            "flat_competitor: cap spectrum too low for alpha = 5/2");

    comp.nu = choose_nu_flat(c, cap_basis, full_basis);
    SphereFn cf = c.as_fn(full_basis);
    comp.phi = cf - SphereFn::half_square(full_basis, comp.nu.nu);

    double theta_p = density_constants(d).theta_plus;
    HomogeneousSum h;
    h.add(2.0, SphereFn::half_square(full_basis, comp.nu.nu));
    h.add(comp.alpha, comp.phi);
    HomogeneousSum z;
    z.add(2.0, cf);

    EpiReport rep;
    rep.min_h = h.min_on_shells();
    bool nonneg = rep.min_h > -1e-12;
    rep.W_h = h.energy(nonneg).W;
    rep.W_z = z.energy(c.min_value() > -1e-12).W;
    rep.theta_ref = theta_p;
    rep.gain = rep.W_z - rep.W_h;
    rep.required_gain = comp.params.eps * (rep.W_z - theta_p);
    rep.satisfied = rep.gain >= rep.required_gain - 1e-12;
    double denom = rep.W_z - theta_p;
    rep.empirical_eps = (denom > 1e-14) ? rep.gain / denom : kEpsInf;
    return {comp, rep};
}

// Exact decomposition identity behind the flat inequality: the difference of
// the two sides must equal -eps_alpha (c0 - 1)^2 theta_plus with c0 = 4|nu|^2.
inline double flat_identity_check(const Vec& nu, const SphereFn& phi, double alpha,
                                  const BasisPtr& full_basis) {
    const int d = full_basis->domain.dim;
    double eps_a = (alpha - 2.0) / (d + alpha);
    double theta_p = density_constants(d).theta_plus;
    double c0 = 4.0 * nu.squaredNorm();

    SphereFn q = SphereFn::half_square(full_basis, nu);
    HomogeneousSum ha, h2;
    ha.add(2.0, q);
    ha.add(alpha, phi);
    h2.add(2.0, q);
    h2.add(2.0, phi);
    double lhs = (ha.energy().W_tilde - theta_p) - (1.0 - eps_a) * (h2.energy().W_tilde - theta_p);

    HomogeneousSum pa, p2;
    pa.add(alpha, phi);
    p2.add(2.0, phi);
    double sub = pa.energy().W0 - (1.0 - eps_a) * p2.energy().W0;

    double expected = -eps_a * (c0 - 1.0) * (c0 - 1.0) * theta_p;
    return std::abs((lhs - sub) - expected);
}

// ---------------------------------------------------------------------------
// Singular points. Pipeline: decompose, replace A by its nonnegative version,
// raise the homogeneity of psi = (Q_A - Q_B) + phi to alpha determined by
// eps_alpha = eps (C4 |grad phi|^2)^gamma.
//
// All spherical Gram data of the competitor h = base r^2 + psi r^alpha is
// precomputed once, so sweeping eps (which only moves alpha) costs nothing.
struct SingularCompetitor {
    SingularDecomposition dec;
    QuadraticForm B;
    SphereFn psi;
    CompetitorParams params;
    bool trivial = false;  // psi == 0: the trace is its own blow-up

    int d = 2;
    double theta = 0.0;
    double W_z = 0.0;
    double min_h = 0.0;      // min over nodes of min(base, base + psi)
    double neg_corr = 0.0;   // int_{B1} z_-; bounds int h_- from above
    double m_bb = 0.0, m_bp = 0.0, m_pp = 0.0;  // L2 Gram of {base, psi}
    double k_bb = 0.0, k_bp = 0.0, k_pp = 0.0;  // Dirichlet Gram
    double s_b = 0.0, s_p = 0.0;                // integrals

    double W_tilde_h(double alpha) const {
        double dir = (4.0 * m_bb + k_bb) / (d + 2.0) +
                     2.0 * (2.0 * alpha * m_bp + k_bp) / (d + alpha) +
                     (alpha * alpha * m_pp + k_pp) / (d + 2.0 * alpha - 2.0);
        double bdry = m_bb + 2.0 * m_bp + m_pp;
        double vol = s_b / (d + 2.0) + s_p / (d + alpha);
        return dir - 2.0 * bdry + vol;
    }
};

inline SingularCompetitor prepare_singular_competitor(const Trace& c, const BasisPtr& basis) {
    const int d = basis->domain.dim;
    require(c.min_value() > -1e-6, "singular_competitor: trace must be nonnegative");

    SingularCompetitor comp;
    comp.d = d;
    comp.theta = density_constants(d).theta;
    comp.dec = decompose_singular(c, basis);
    comp.B = nonneg_replacement(comp.dec.A);
    comp.psi = SphereFn::quadratic(basis, comp.dec.A.A - comp.B.A) + *comp.dec.phi.exact;
    comp.params.gamma = log_epi_gamma(d);
    comp.params.C4 = 1.0 + 4.0 * d;

    SphereFn cf = c.as_fn(basis);
    HomogeneousSum z;
    z.add(2.0, cf);
    EnergyReport zrep = z.energy(c.min_value() > -1e-12);
    comp.W_z = zrep.W;
    comp.neg_corr = zrep.W - zrep.W_tilde;

    SphereFn base =
        SphereFn::half_square(basis, comp.dec.nu.nu) + SphereFn::quadratic(basis, comp.B.A);
    comp.m_bb = base.norm_sq();
    comp.m_bp = base.dot(comp.psi);
    comp.m_pp = comp.psi.norm_sq();
    comp.k_bb = base.grad_norm_sq();
    comp.k_bp = base.dot_grad(comp.psi);
    comp.k_pp = comp.psi.grad_norm_sq();
    comp.s_b = base.integral();
    comp.s_p = comp.psi.integral();
    comp.trivial = comp.m_pp < 1e-13;  // above the cancellation noise of the exact products

    // h / r^2 is linear in s = r^{alpha-2} in (0,1], so the nonnegativity
    // minimum over all shells is attained at s -> 0 (base) or s = 1 (base+psi).
    const Quadrature& q = *basis->quadrature;
    double mn = 1e300;
    for (std::size_t i = 0; i < q.size(); ++i) {
        double b = base.eval(q.nodes[i]);
        double p = comp.psi.eval(q.nodes[i]);
        mn = std::min(mn, std::min(b, b + p));
    }
    comp.min_h = mn;
    return comp;
}

inline EpiReport evaluate_singular_report(SingularCompetitor& comp, double eps) {
    const int d = comp.d;
    const double gamma = comp.params.gamma;
    comp.params.eps = eps;
    EpiReport rep;
    rep.theta_ref = comp.theta;
    rep.W_z = comp.W_z;
    rep.min_h = comp.min_h;
    rep.required_gain = eps * std::pow(std::max(0.0, comp.W_z - comp.theta), 1.0 + gamma);

    if (comp.trivial) {
        comp.params.eps_alpha = 0.0;
        comp.params.alpha = 2.0;
        rep.W_h = rep.W_z;
        rep.gain = 0.0;
        rep.satisfied = rep.gain >= rep.required_gain - 1e-12;
        rep.empirical_eps = kEpsInf;
        return rep;
    }
    double gphi2 = comp.dec.phi_grad_norm_sq;
    require(gphi2 > 1e-13 || gamma == 0.0,
            "singular_competitor: nonzero psi with no higher modes is inconsistent with c >= 0");

    double eps_alpha = eps * std::pow(comp.params.C4 * gphi2, gamma);
    double alpha = (2.0 + d * eps_alpha) / (1.0 - eps_alpha);
    require(alpha > 2.0, "singular_competitor: eps must be positive");
    require(alpha <= 2.5 + 1e-12,
            "singular_competitor: alpha exceeds 5/2 (eps too large for this trace)");
    comp.params.eps_alpha = eps_alpha;
    comp.params.alpha = alpha;

    // h >= 0 up to the trace's nodal defect; int h_- <= int z_-, so adding the
    // z correction bounds W(h) from above (conservative for the inequality)
    rep.W_h = comp.W_tilde_h(alpha) + comp.neg_corr;
    rep.gain = rep.W_z - rep.W_h;
    rep.satisfied = rep.gain >= rep.required_gain - 1e-12;
    double denom = std::pow(std::max(0.0, comp.W_z - comp.theta), 1.0 + gamma);
    rep.empirical_eps = (denom > 1e-16) ? rep.gain / denom : kEpsInf;
    return rep;
}

inline std::pair<SingularCompetitor, EpiReport> singular_competitor(const Trace& c, double eps,
                                                                    const BasisPtr& basis) {
    SingularCompetitor comp = prepare_singular_competitor(c, basis);
    EpiReport rep = evaluate_singular_report(comp, eps);
    return {comp, rep};
}

// Exact identity of the singular decomposition step, with b = 4 tr B and
// c0 = 4 |nu|^2.
inline double singular_identity_check(const Vec& nu, const QuadraticForm& B, const SphereFn& psi,
                                      double alpha, const BasisPtr& basis) {
    const int d = basis->domain.dim;
    require(std::abs(B.trace()) > 1e-14, "singular_identity_check: tr B must be nonzero");
    double eps_a = (alpha - 2.0) / (d + alpha);
    double theta = density_constants(d).theta;
    double c0 = 4.0 * nu.squaredNorm();
    double b = 4.0 * B.trace();

    SphereFn base = SphereFn::half_square(basis, nu) + SphereFn::quadratic(basis, B.A);
    HomogeneousSum ha, h2;
    ha.add(2.0, base);
    ha.add(alpha, psi);
    h2.add(2.0, base);
    h2.add(2.0, psi);
    double lhs = (ha.energy().W_tilde - theta) - (1.0 - eps_a) * (h2.energy().W_tilde - theta);

    HomogeneousSum pa, p2;
    pa.add(alpha, psi);
    p2.add(2.0, psi);
    double sub = pa.energy().W0 - (1.0 - eps_a) * p2.energy().W0;

    double bracket = (1.0 - b - c0) * (1.0 - b - c0) + (1.0 - b) * (1.0 - b);
    double expected = -0.5 * eps_a * bracket * theta;
    return std::abs((lhs - sub) - expected);
}

// ---------------------------------------------------------------------------
// The two capacity-type controls of the singular proof: the negative part of A
// against the higher modes, and the whole energy gap against the higher modes.
struct HigherModeControls {
    double pre_final_ratio = 0.0;  // sum a_j^2 / |grad phi|^{2(1-gamma)}
    double final_ratio = 0.0;      // (W(z) - theta) / |grad phi|^2
    double neg_sq_sum = 0.0;
    double grad_phi_sq = 0.0;
    double W_z = 0.0;
};

inline HigherModeControls higher_mode_controls(const SingularDecomposition& dec,
                                               const BasisPtr& basis) {
    const int d = basis->domain.dim;
    HigherModeControls out;
    for (double a : dec.negative_part()) out.neg_sq_sum += a * a;
    out.grad_phi_sq = dec.phi_grad_norm_sq;
    if (out.grad_phi_sq < 1e-26) {
        require(out.neg_sq_sum < 1e-20,
                "higher_mode_controls: negative eigenvalues with phi = 0 contradict c >= 0");
        return out;  // both ratios zero
    }
    double gamma = log_epi_gamma(d);
    out.pre_final_ratio = out.neg_sq_sum / std::pow(out.grad_phi_sq, 1.0 - gamma);

    SphereFn rec = SphereFn::half_square(basis, dec.nu.nu) +
                   SphereFn::quadratic(basis, dec.A.A) + *dec.phi.exact;
    HomogeneousSum z;
    z.add(2.0, rec);
    out.W_z = z.energy(false).W;
    out.final_ratio = (out.W_z - density_constants(d).theta) / out.grad_phi_sq;
    return out;
}

// ---------------------------------------------------------------------------
// Per-stratum improvement exponent of the capacity estimate.
inline double improvement_gamma(int d, int k) {
    require(k >= 0 && k < d, "improvement_gamma: need 0 <= k < d");
    if (k == 0 || k == d - 1) return 0.0;
    return (d - k) / (d - k + 4.0);
}

struct ImprovementCheck {
    bool hypotheses_ok = false;
    bool satisfied = false;
    double ratio = 0.0;  // the admissible constant for this datum
    double grad_phi_sq = 0.0;
    double neg_sq_sum = 0.0;
};

namespace detail {

// int_{S^{d-1}} F(|X'|^2, x_d) for X' the first k coordinates, any d > k >= 1.
template <class F>
double bizonal2_integral(int d, int k, F&& fn, int npts = 400) {
    int m = d - k;
    Rule1D psi = gauss_legendre(npts, 0.0, pi / 2.0);
    double sk = (k == 1) ? 2.0 : sphere_area(k);
    double total = 0.0;
    for (int i = 0; i < npts; ++i) {
        double p = psi.nodes[i];
        double sp = std::sin(p), cp = std::cos(p);
        double u = sp * sp;
        double inner;
        if (m == 1) {
            inner = fn(u, cp) + fn(u, -cp);
        } else {
            inner = zonal_integral(m, [&](double w) { return fn(u, cp * w); }, 200);
        }
        total += psi.weights[i] * std::pow(sp, k - 1) * std::pow(cp, m - 1) * inner;
    }
    return sk * total;
}

}  // namespace detail

// One point of the capacity scan behind the per-stratum improvement: the
// minimal trace compatible with nonnegativity is the envelope
//   phi = (a |X'|^2 - abar |X''|^2)_+  -  s (x_d)_-^2,
// with s fixing the zero mean; the subtraction lives on {x_d < 0} so the
// domination phi >= -Q_A on {x . e_d > 0} is exact. Valid in any d > k >= 1.
inline ImprovementCheck improvement_envelope_check(int d, int k, double a, double abar,
                                                   double bound_C = 0.0) {
    require(k >= 1 && k < d, "improvement_envelope_check: need 1 <= k < d");
    require(a > 0.0 && abar > 0.0, "improvement_envelope_check: positive coefficients");
    ImprovementCheck out;
    out.neg_sq_sum = k * a * a;
    double ustar = abar / (a + abar);
    auto G = [&](double u) { return std::max(0.0, (a + abar) * u - abar); };
    auto dG = [&](double u) { return u > ustar ? (a + abar) : 0.0; };

    double intG = detail::bizonal2_integral(d, k, [&](double u, double) { return G(u); });
    double s = intG / hemisphere_moment(d, 2);
    double grad_G = detail::bizonal2_integral(
        d, k, [&](double u, double) { return dG(u) * dG(u) * 4.0 * u * (1.0 - u); });
    double grad_q = 4.0 * (hemisphere_moment(d, 2) - hemisphere_moment(d, 4));
    // <grad G, grad q_{-e_d}> = -4 int G'(u) u (x_d)_-^2
    double cross = detail::bizonal2_integral(d, k, [&](double u, double t) {
        double tm = std::min(t, 0.0);
        return -4.0 * dG(u) * u * tm * tm;
    });
    out.grad_phi_sq = grad_G - 2.0 * s * cross + s * s * grad_q;
    out.hypotheses_ok = true;  // zero mean and domination hold by construction
    double gk = improvement_gamma(d, k);
    out.ratio = out.neg_sq_sum / std::pow(out.grad_phi_sq, 1.0 - gk);
    out.satisfied = bound_C <= 0.0 || out.ratio <= bound_C;
    return out;
}

// Trace-based variant for d in {2,3}: a_vector lists the diagonal of Q_A with
// the k negative entries first (as positive magnitudes). The domination
// hypothesis phi >= -Q_A is enforced at the quadrature nodes of {x.nu > 0}.
inline ImprovementCheck improvement_check(int d, int k, const std::vector<double>& a_vector,
                                          const Trace& phi_trace, const Vec& nu,
                                          const BasisPtr& basis, double bound_C = 0.0) {
    require(k >= 0 && k < d, "improvement_check: need 0 <= k < d");
    require(static_cast<int>(a_vector.size()) == d, "improvement_check: a_vector has d entries");
    ImprovementCheck out;
    for (int j = 0; j < k; ++j) out.neg_sq_sum += a_vector[j] * a_vector[j];
    SphereFn phi = phi_trace.as_fn(basis);
    double mean = phi.integral();
    bool dominated = true;
    const Quadrature& q = *basis->quadrature;
    for (std::size_t i = 0; i < q.size(); ++i) {
        if (q.nodes[i].dot(nu) <= 0.0) continue;
        double neg_qa = 0.0;  // -Q_A at the node
        for (int j = 0; j < d; ++j)
            neg_qa += (j < k ? a_vector[j] : -a_vector[j]) * q.nodes[i][j] * q.nodes[i][j];
        if (phi_trace.values[i] < neg_qa - 1e-12) dominated = false;
    }
    out.hypotheses_ok = std::abs(mean) < 1e-8 && dominated;
    out.grad_phi_sq = phi.grad_norm_sq();
    double gk = improvement_gamma(d, k);
    if (out.neg_sq_sum == 0.0) {
        out.satisfied = true;
        return out;
    }
    out.ratio = out.neg_sq_sum / std::pow(out.grad_phi_sq, 1.0 - gk);
    out.satisfied = out.hypotheses_ok && (bound_C <= 0.0 || out.ratio <= bound_C);
    return out;
}

// ---------------------------------------------------------------------------
// Sharpness scan: c = ((1/(4(d-1))) sum_{j<d} x_j^2 - eps x_d^2)_+, all
// quantities zonal, integrated exactly in the polar variable.
struct SharpnessRow {
    double eps = 0.0;
    double R_l2 = 0.0;
    double gradR_l2 = 0.0;
    double measure = 0.0;  // H^{d-1}({R > 0})
    double c0 = 0.0;
    double c2_abs = 0.0;
    double grad_phi_l2 = 0.0;
    double dist_K = 0.0;
    double ratio_49 = 0.0;  // |grad phi|^{4/(d+1)} / dist
};

struct SharpnessTable {
    int d = 3;
    std::vector<SharpnessRow> rows;
    // observed orders at the finest consecutive pair (the consistent estimator
    // of the eps -> 0 rates; the full-range least-squares slope is also kept)
    double slope_R = 0.0, slope_gradR = 0.0, slope_measure = 0.0, slope_dist = 0.0;
    double ls_slope_R = 0.0, ls_slope_gradR = 0.0, ls_slope_measure = 0.0, ls_slope_dist = 0.0;
    double max_ratio_49 = 0.0;
};

inline SharpnessTable sharpness_scan(int d, std::vector<double> eps_list) {
    require(d >= 3, "sharpness_scan: d >= 3");
    for (double e : eps_list) require(e > 0.0 && e <= 0.2, "sharpness_scan: eps in (0, 0.2]");
    std::sort(eps_list.begin(), eps_list.end(), std::greater<double>());

    SharpnessTable table;
    table.d = d;
    const double beta = 1.0 / (4.0 * (d - 1.0));
    const double S = sphere_area(d);
    // normalised zonal lambda=2d mode (t^2 - 1/d)/N2
    const double N2 = std::sqrt(S * 2.0 * (d - 1.0) / (d * d * (d + 2.0)));

    for (double eps : eps_list) {
        SharpnessRow row;
        row.eps = eps;
        double tstar = std::sqrt(beta / (beta + eps));
        // R is supported on the two polar caps {|t| > tstar} and is smooth
        // there; integrate in the polar angle over the exact support.
        double theta_star = std::acos(tstar);
        Rule1D rule = gauss_legendre(400, 0.0, theta_star);
        double sdm2 = (d == 2) ? 2.0 : sphere_area(d - 1);
        auto cap_int = [&](auto&& g) {
            double s = 0.0;
            for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
                double th = rule.nodes[i];
                s += rule.weights[i] * g(std::cos(th)) * std::pow(std::sin(th), d - 2);
            }
            return 2.0 * sdm2 * s;  // both caps
        };
        auto R = [&](double t) { return (beta + eps) * t * t - beta; };
        auto dR = [&](double t) { return 2.0 * (beta + eps) * t; };
        row.R_l2 = std::sqrt(cap_int([&](double t) { return R(t) * R(t); }));
        row.gradR_l2 = std::sqrt(cap_int([&](double t) { return dR(t) * dR(t) * (1.0 - t * t); }));
        row.measure = cap_int([](double) { return 1.0; });
        double intR = cap_int(R);
        row.c0 = intR / std::sqrt(S);
        double c2 = cap_int([&](double t) { return R(t) * (t * t - 1.0 / d) / N2; });
        row.c2_abs = std::abs(c2);
        // phi is R minus its low modes (linear content vanishes by parity)
        double g2 = row.gradR_l2 * row.gradR_l2 - 2.0 * d * c2 * c2;
        row.grad_phi_l2 = std::sqrt(std::max(0.0, g2));
        // Q = P - c0 phi0 - c2 phi2 as a matrix; project to K in the L2 metric
        Eigen::MatrixXd M = Eigen::MatrixXd::Identity(d, d) * beta;
        M(d - 1, d - 1) = -eps;
        M -= (row.c0 / std::sqrt(S)) * Eigen::MatrixXd::Identity(d, d);
        Eigen::MatrixXd M2 = Eigen::MatrixXd::Identity(d, d) * (-1.0 / d);
        M2(d - 1, d - 1) += 1.0;
        M += (-c2 / N2) * M2;
        QuadraticForm Q(M);
        QuadraticForm P = project_to_K(Q);
        Eigen::MatrixXd D = Q.A - P.A;
        row.dist_K = std::sqrt(quadratic_l2_product(D, D));
        row.ratio_49 = std::pow(row.grad_phi_l2, 4.0 / (d + 1.0)) / row.dist_K;
        table.rows.push_back(row);
        table.max_ratio_49 = std::max(table.max_ratio_49, row.ratio_49);
    }

    auto collect = [&](auto field) {
        std::vector<double> v;
        for (const auto& r : table.rows) v.push_back(field(r));
        return v;
    };
    std::vector<double> es = collect([](const SharpnessRow& r) { return r.eps; });
    auto pair_slope = [&](const std::vector<double>& v) {
        std::size_t n = v.size();
        return (std::log(v[n - 1]) - std::log(v[n - 2])) / (std::log(es[n - 1]) - std::log(es[n - 2]));
    };
    std::vector<double> vR = collect([](const SharpnessRow& r) { return r.R_l2; });
    std::vector<double> vG = collect([](const SharpnessRow& r) { return r.gradR_l2; });
    std::vector<double> vM = collect([](const SharpnessRow& r) { return r.measure; });
    std::vector<double> vD = collect([](const SharpnessRow& r) { return r.dist_K; });
    table.slope_R = pair_slope(vR);
    table.slope_gradR = pair_slope(vG);
    table.slope_measure = pair_slope(vM);
    table.slope_dist = pair_slope(vD);
    table.ls_slope_R = loglog_slope(es, vR);
    table.ls_slope_gradR = loglog_slope(es, vG);
    table.ls_slope_measure = loglog_slope(es, vM);
    table.ls_slope_dist = loglog_slope(es, vD);
    return table;
}

// ---------------------------------------------------------------------------
// Verification suites over sampled trace families.
struct SuiteRow {
    std::string family;
    int d = 2;
    int trace_id = 0;
    double W_z = 0.0, W_h = 0.0, gain = 0.0, required_gain = 0.0;
    double empirical_eps = 0.0;
    bool satisfied = false;
    double dist_K = 0.0;
    double final_ratio = 0.0;  // singular traces: (W_z - theta)/|grad phi|^2
    double min_h = 0.0;
    std::string error;
};

struct SuiteResult {
    std::vector<SuiteRow> rows;
    std::map<std::string, double> family_eps_infimum;
    bool all_satisfied = true;
    int violations = 0;

    void finalize() {
        all_satisfied = true;
        violations = 0;
        family_eps_infimum.clear();
        for (const auto& r : rows) {
            if (!r.satisfied || !r.error.empty()) {
                all_satisfied = false;
                ++violations;
            }
            auto it = family_eps_infimum.find(r.family);
            if (it == family_eps_infimum.end())
                family_eps_infimum[r.family] = r.empirical_eps;
            else
                it->second = std::min(it->second, r.empirical_eps);
        }
    }
};

// Largest eps for which the constructed singular competitor still satisfies
// the inequality (construction and test are coupled through eps).
inline double largest_admissible_eps(SingularCompetitor& comp, double lo = 1e-6,
                                     double hi_cap = 0.5) {
    auto ok = [&](double e) {
        try {
            return evaluate_singular_report(comp, e).satisfied;
        } catch (const Error&) {
            return false;
        }
    };
    if (!ok(lo)) return 0.0;
    double hi = hi_cap;
    if (ok(hi)) return hi;
    for (int it = 0; it < 40; ++it) {
        double mid = 0.5 * (lo + hi);
        (ok(mid) ? lo : hi) = mid;
    }
    return lo;
}

inline double largest_admissible_eps(const Trace& c, const BasisPtr& basis, double lo = 1e-6,
                                     double hi_cap = 0.5) {
    SingularCompetitor comp = prepare_singular_competitor(c, basis);
    return largest_admissible_eps(comp, lo, hi_cap);
}

// --------------------------- trace families -------------------------------

// Random element of K (interior, or boundary with one zero eigenvalue).
inline QuadraticForm random_K_element(int d, Rng& rng, bool boundary) {
    Eigen::VectorXd lam(d);
    double sum = 0.0;
    for (int i = 0; i < d; ++i) {
        lam[i] = 0.1 + rng.uniform();  // bounded away from zero in the interior
        sum += lam[i];
    }
    lam *= 0.25 / sum;
    if (boundary) {
        lam[0] = 0.0;
        double s = lam.sum();
        lam *= 0.25 / s;
    }
    Eigen::MatrixXd G(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) G(i, j) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
    Eigen::MatrixXd Qm = qr.householderQ();
    return QuadraticForm(Qm * lam.asDiagonal() * Qm.transpose());
}

// Band-limited projection of a pointwise-defined function through a fine
// quadrature (kinked integrands need far more nodes than band-limited ones),
// clipped and reprojected once so the result is nonnegative up to rounding.
template <class F>
Trace clip_project_fine(F&& f, const BasisPtr& basis, int fine_resolution = 0) {
    const int d = basis->domain.dim;
    if (fine_resolution == 0) fine_resolution = d == 2 ? 512 : 96;
    Quadrature fine = build_quadrature(basis->domain, fine_resolution);
    auto project = [&](const std::function<double(const Vec&)>& g) {
        Eigen::VectorXd c = Eigen::VectorXd::Zero(basis->count());
        std::vector<double> buf(basis->count());
        for (std::size_t i = 0; i < fine.size(); ++i) {
            double gv = g(fine.nodes[i]) * fine.weights[i];
            if (gv == 0.0) continue;
            basis->eval_all(fine.nodes[i], buf.data());
            for (int j = 0; j < basis->count(); ++j) c[j] += gv * buf[j];
        }
        return c;
    };
    Eigen::VectorXd c0 = project([&](const Vec& x) { return std::max(0.0, f(x)); });
    Eigen::VectorXd c1 = project([&](const Vec& x) {
        return std::max(0.0, basis->eval_combo(c0, x));
    });
    // the band limit cannot represent the clipped function exactly; lift the
    // remaining undershoot through the constant mode so the trace is
    // nonnegative to grid resolution while staying exactly band-limited
    double mn = 0.0;
    for (std::size_t i = 0; i < fine.size(); ++i)
        mn = std::min(mn, basis->eval_combo(c1, fine.nodes[i]));
    if (mn < 0.0) c1[0] += (-mn + 1e-12) * std::sqrt(sphere_area(d));
    return Trace::from_coeffs(basis, c1);
}

struct SingularFamilies {
    std::vector<Trace> traces;
    std::vector<std::string> family;
};

inline SingularFamilies sample_singular_traces(int d, int count, std::uint64_t seed,
                                               const BasisPtr& basis) {
    SingularFamilies out;
    Rng rng(seed * 1315423911ull + d);
    double dist_cap = (d == 2) ? 0.05 : 0.02;
    const double theta = density_constants(d).theta;

    std::vector<int> high;
    for (int j = 0; j < basis->count(); ++j)
        if (basis->lambda(j) > 2.0 * d + 0.5) high.push_back(j);

    int id = 0;
    while (static_cast<int>(out.traces.size()) < count) {
        int which = id % 5;
        ++id;
        std::string family;
        Trace c;
        try {
            if (which <= 2) {
                // K element (interior or boundary) plus one higher mode
                bool boundary = (which == 2);
                family = boundary ? "singular_boundary_mode" : "singular_interior_mode";
                QuadraticForm A = random_K_element(d, rng, boundary);
                int j = high[static_cast<int>(rng.uniform() * high.size()) % high.size()];
                double t = (which == 0) ? 0.01 : 0.002 + 0.02 * rng.uniform();
                SphereFn fn = SphereFn::quadratic(basis, A.A) + SphereFn::mode(basis, j, t);
                Trace raw = Trace::from_fn(basis, fn);
                for (int shrink = 0; shrink < 12 && raw.min_value() < 0.0; ++shrink) {
                    t *= 0.5;
                    fn = SphereFn::quadratic(basis, A.A) + SphereFn::mode(basis, j, t);
                    raw = Trace::from_fn(basis, fn);
                }
                if (raw.min_value() >= 0.0)
                    c = raw;
                else
                    c = clip_project_fine([&](const Vec& x) { return fn.eval(x); }, basis);
            } else {
                // band-limited positive part of an indefinite quadratic
                family = "singular_indefinite";
                double a1 = (d == 2) ? 0.005 + 0.015 * rng.uniform() : 0.006 + 0.006 * rng.uniform();
                Eigen::VectorXd lam(d);
                lam[0] = -a1;
                double rest = 0.25 + a1;
                for (int i = 1; i < d; ++i) lam[i] = rest / (d - 1) * (0.6 + 0.8 * rng.uniform());
                lam.tail(d - 1) *= rest / lam.tail(d - 1).sum();
                Eigen::MatrixXd G(d, d);
                for (int i = 0; i < d; ++i)
                    for (int j = 0; j < d; ++j) G(i, j) = rng.normal();
                Eigen::MatrixXd Qm = Eigen::HouseholderQR<Eigen::MatrixXd>(G).householderQ();
                QuadraticForm A(Qm * lam.asDiagonal() * Qm.transpose());
                c = clip_project_fine([&](const Vec& x) { return A.eval(x); }, basis);
            }
            if (c.min_value() < -1e-6) continue;
            if (dist_to_cone(c, basis) > dist_cap) continue;
            HomogeneousSum z;
            z.add(2.0, c.as_fn(basis));
            double wz = z.energy(false).W;
            if (wz - theta < -1e-10 || wz - theta > 1.0) continue;
        } catch (const Error&) {
            continue;
        }
        out.traces.push_back(c);
        out.family.push_back(family);
    }
    return out;
}

struct FlatFamilies {
    std::vector<Trace> traces;
    std::vector<std::string> family;
};

// Nonnegative flat traces supported in the closed upper half sphere:
// multiplicative bumps q (1 + t g) with band-limited g, plus slightly rotated
// exact half-square profiles.
inline FlatFamilies sample_flat_traces(int d, int count, std::uint64_t seed,
                                       const BasisPtr& basis, double delta0) {
    FlatFamilies out;
    Rng rng(seed * 2654435761ull + 7 * d);
    Vec ed = Vec::Zero();
    ed[d - 1] = 1.0;
    const double t_levels[3] = {1e-3, 1e-2, 5e-2};

    int id = 0;
    while (static_cast<int>(out.traces.size()) < count) {
        int which = id % 10;
        ++id;
        if (which == 9) {
            // rotated exact profile
            double ang = 0.2 * delta0 * (2.0 * rng.uniform() - 1.0);
            Vec axis = Vec::Zero();
            axis[0] = std::sin(ang);
            axis[d - 1] = std::cos(ang);
            if (d == 3) {
                double az = 2.0 * pi * rng.uniform();
                axis = Vec(std::sin(ang) * std::cos(az), std::sin(ang) * std::sin(az),
                           std::cos(ang));
            }
            out.traces.push_back(Trace::from_fn(basis, SphereFn::half_square(basis, 0.5 * axis)));
            out.family.push_back("flat_rotated");
            continue;
        }
        // multiplicative bump: g band-limited of degree <= 4, |g|_inf <= 0.9
        Eigen::VectorXd g = Eigen::VectorXd::Zero(basis->count());
        for (int j = 0; j < basis->count(); ++j)
            if (basis->lambda(j) <= 4.0 * (4.0 + d - 2.0) + 0.1) g[j] = rng.normal();
        std::vector<double> gv = basis->evaluate(g);
        double mx = 0.0;
        for (double v : gv) mx = std::max(mx, std::abs(v));
        g *= 0.9 / mx;
        double t = t_levels[which % 3];
        SphereFn fn = SphereFn::half_square(basis, 0.5 * ed) +
                      SphereFn::half_square_times(basis, 0.5 * ed, t * g);
        out.traces.push_back(Trace::from_fn(basis, fn));
        out.family.push_back("flat_bump");
    }
    return out;
}

// --------------------------- suite drivers --------------------------------

inline SuiteResult run_flat_suite(int d, int count, std::uint64_t seed, const BasisPtr& basis,
                                  const BasisPtr& cap_basis, double delta0) {
    FlatFamilies fam = sample_flat_traces(d, count, seed, basis, delta0);
    SuiteResult res;
    res.rows.resize(fam.traces.size());
    parallel_for(static_cast<int>(fam.traces.size()), [&](int i) {
        SuiteRow row;
        row.family = fam.family[i];
        row.d = d;
        row.trace_id = i;
        try {
            auto [comp, rep] = flat_competitor(fam.traces[i], cap_basis, basis);
            row.W_z = rep.W_z;
            row.W_h = rep.W_h;
            row.gain = rep.gain;
            row.required_gain = rep.required_gain;
            row.empirical_eps = rep.empirical_eps;
            row.satisfied = rep.satisfied;
            row.min_h = rep.min_h;
        } catch (const Error& e) {
            row.error = e.what();
            row.satisfied = false;
        }
        res.rows[i] = row;
    });
    res.finalize();
    return res;
}

inline SuiteResult run_singular_suite(int d, int count, double eps, std::uint64_t seed,
                                      const BasisPtr& basis, bool with_empirical_eps = true) {
    SingularFamilies fam = sample_singular_traces(d, count, seed, basis);
    SuiteResult res;
    res.rows.resize(fam.traces.size());
    parallel_for(static_cast<int>(fam.traces.size()), [&](int i) {
        SuiteRow row;
        row.family = fam.family[i];
        row.d = d;
        row.trace_id = i;
        try {
            row.dist_K = dist_to_cone(fam.traces[i], basis);
            SingularCompetitor comp = prepare_singular_competitor(fam.traces[i], basis);
            EpiReport rep = evaluate_singular_report(comp, eps);
            row.W_z = rep.W_z;
            row.W_h = rep.W_h;
            row.gain = rep.gain;
            row.required_gain = rep.required_gain;
            row.satisfied = rep.satisfied;
            row.min_h = rep.min_h;
            HigherModeControls hc = higher_mode_controls(comp.dec, basis);
            row.final_ratio = hc.final_ratio;
            row.empirical_eps = rep.empirical_eps;
            if (with_empirical_eps && !comp.trivial)
                row.empirical_eps = largest_admissible_eps(comp);
        } catch (const Error& e) {
            row.error = e.what();
            row.satisfied = false;
        }
        res.rows[i] = row;
    });
    res.finalize();
    return res;
}

}  // namespace obsepi
