#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "obsepi/common.hpp"
#include "obsepi/quadrature.hpp"

namespace obsepi {

// The nonnegative root of lambda = alpha (alpha + d - 2).
inline double homogeneity_of(double lambda, int d) {
    require(lambda >= 0.0, "homogeneity_of: lambda >= 0");
    double b = d - 2.0;
    return 0.5 * (-b + std::sqrt(b * b + 4.0 * lambda));
}

namespace detail {

// Associated Legendre P_l^m (no Condon-Shortley phase) and its theta-derivative.
inline double assoc_legendre(int l, int m, double x) {
    double pmm = 1.0;
    if (m > 0) {
        double somx2 = std::sqrt(std::max(0.0, (1.0 - x) * (1.0 + x)));
        double fact = 1.0;
        for (int i = 0; i < m; ++i) {
            pmm *= fact * somx2;
            fact += 2.0;
        }
    }
    if (l == m) return pmm;
    double pmmp1 = x * (2.0 * m + 1.0) * pmm;
    if (l == m + 1) return pmmp1;
    double pll = 0.0;
    for (int ll = m + 2; ll <= l; ++ll) {
        pll = ((2.0 * ll - 1.0) * x * pmmp1 - (ll + m - 1.0) * pmm) / (ll - m);
        pmm = pmmp1;
        pmmp1 = pll;
    }
    return pll;
}

// d/dtheta P_l^m(cos theta) via (1-x^2) dP/dx = l x P_l^m - (l+m) P_{l-1}^m.
inline double assoc_legendre_dtheta(int l, int m, double x) {
    double s = std::sqrt(std::max(1e-30, (1.0 - x) * (1.0 + x)));
    double p = assoc_legendre(l, m, x);
    double pm1 = (l - 1 >= m) ? assoc_legendre(l - 1, m, x) : 0.0;
    return -(l * x * p - (l + m) * pm1) / s;
}

inline double sh_norm(int l, int m) {
    double r = (2.0 * l + 1.0) / (4.0 * pi);
    for (int k = l - m + 1; k <= l + m; ++k) r /= k;
    return std::sqrt(r);
}

// Tabulated radial profile of a cap eigenfunction on S^2 (polar angle grid).
struct CapRadial {
    double lambda = 0.0;
    int m = 0;
    double theta_max = 0.0;
    std::vector<double> theta, f, fp;

    double second_derivative(std::size_t i) const {
        double th = theta[i];
        if (th < 1e-9) return 0.0;
        double s = std::sin(th);
        return -std::cos(th) / s * fp[i] - (lambda - m * m / (s * s)) * f[i];
    }

    // Cubic Hermite interpolation of f and f' on the uniform grid.
    void eval(double th, double& fv, double& fpv) const {
        if (th <= theta.front()) {
            fv = f.front();
            fpv = fp.front();
            return;
        }
        if (th >= theta_max) {
            fv = 0.0;
            fpv = fp.back();
            return;
        }
        double h = theta[1] - theta[0];
        std::size_t i = std::min(theta.size() - 2, static_cast<std::size_t>((th - theta[0]) / h));
        double t = (th - theta[i]) / h;
        double t2 = t * t, t3 = t2 * t;
        double h00 = 2 * t3 - 3 * t2 + 1, h10 = t3 - 2 * t2 + t;
        double h01 = -2 * t3 + 3 * t2, h11 = t3 - t2;
        fv = h00 * f[i] + h10 * h * fp[i] + h01 * f[i + 1] + h11 * h * fp[i + 1];
        double g0 = second_derivative(i), g1 = second_derivative(i + 1);
        fpv = h00 * fp[i] + h10 * h * g0 + h01 * fp[i + 1] + h11 * h * g1;
    }
};

}  // namespace detail

// One Laplace-Beltrami Dirichlet eigenpair, evaluable anywhere on the sphere
// (zero outside its domain for half spheres and caps).
struct Mode {
    enum class Kind { Circle, Arc, SphereHarm, CapRadial3D };

    double lambda = 0.0;
    double alpha = 0.0;
    Kind kind = Kind::Circle;
    int k = 0;         // frequency (d=2) / degree l (d=3) / radial index
    int m = 0;         // signed order (d=3 full/half); azimuthal order (cap)
    int phase = 0;     // 0: cos, 1: sin (d=2 and cap azimuth)
    double norm = 1.0; // multiplicative normalisation
    double t0 = 0.0, len = 0.0;  // arc parameters (d=2 half/cap)
    std::shared_ptr<const detail::CapRadial> radial;  // d=3 cap

    double eval(const Vec& x) const {
        switch (kind) {
            case Kind::Circle: {
                double t = std::atan2(x[1], x[0]);
                return norm * (phase == 0 ? std::cos(k * t) : std::sin(k * t));
            }
            case Kind::Arc: {
                double t = std::atan2(x[1], x[0]);
                double s = t - t0;
                s -= 2.0 * pi * std::floor(s / (2.0 * pi));
                if (s >= len) return 0.0;
                return norm * std::sin(k * pi * s / len);
            }
            case Kind::SphereHarm: {
                double ct = std::clamp(x[2], -1.0, 1.0);
                int ma = std::abs(m);
                double v = norm * detail::assoc_legendre(k, ma, ct);
                if (m > 0) v *= std::cos(ma * std::atan2(x[1], x[0]));
                if (m < 0) v *= std::sin(ma * std::atan2(x[1], x[0]));
                return v;
            }
            case Kind::CapRadial3D: {
                double th = std::acos(std::clamp(x[2], -1.0, 1.0));
                if (th >= radial->theta_max) return 0.0;
                double fv, fpv;
                radial->eval(th, fv, fpv);
                double v = norm * fv;
                if (m > 0) {
                    double az = std::atan2(x[1], x[0]);
                    v *= (phase == 0 ? std::cos(m * az) : std::sin(m * az));
                }
                return v;
            }
        }
        return 0.0;
    }

    // Tangential (surface) gradient, embedded in R^3.
    Vec grad(const Vec& x) const {
        switch (kind) {
            case Kind::Circle: {
                double t = std::atan2(x[1], x[0]);
                double dv = norm * k * (phase == 0 ? -std::sin(k * t) : std::cos(k * t));
                return dv * Vec(-x[1], x[0], 0.0);
            }
            case Kind::Arc: {
                double t = std::atan2(x[1], x[0]);
                double s = t - t0;
                s -= 2.0 * pi * std::floor(s / (2.0 * pi));
                if (s >= len) return Vec::Zero();
                double dv = norm * (k * pi / len) * std::cos(k * pi * s / len);
                return dv * Vec(-x[1], x[0], 0.0);
            }
            case Kind::SphereHarm: {
                double ct = std::clamp(x[2], -1.0, 1.0);
                double st = std::sqrt(std::max(1e-30, 1.0 - ct * ct));
                double az = std::atan2(x[1], x[0]);
                double ca = std::cos(az), sa = std::sin(az);
                Vec theta_hat(ct * ca, ct * sa, -st);
                Vec az_hat(-sa, ca, 0.0);
                int ma = std::abs(m);
                double P = detail::assoc_legendre(k, ma, ct);
                double dP = detail::assoc_legendre_dtheta(k, ma, ct);
                double T = 1.0, dT = 0.0;
                if (m > 0) { T = std::cos(ma * az); dT = -ma * std::sin(ma * az); }
                if (m < 0) { T = std::sin(ma * az); dT = ma * std::cos(ma * az); }
                return norm * (dP * T * theta_hat + P * dT / st * az_hat);
            }
            case Kind::CapRadial3D: {
                double ct = std::clamp(x[2], -1.0, 1.0);
                double th = std::acos(ct);
                if (th >= radial->theta_max) return Vec::Zero();
                double st = std::sqrt(std::max(1e-30, 1.0 - ct * ct));
                double az = std::atan2(x[1], x[0]);
                double ca = std::cos(az), sa = std::sin(az);
                Vec theta_hat(ct * ca, ct * sa, -st);
                Vec az_hat(-sa, ca, 0.0);
                double fv, fpv;
                radial->eval(th, fv, fpv);
                double T = 1.0, dT = 0.0;
                if (m > 0) {
                    T = (phase == 0 ? std::cos(m * az) : std::sin(m * az));
                    dT = (phase == 0 ? -m * std::sin(m * az) : m * std::cos(m * az));
                }
                return norm * (fpv * T * theta_hat + fv * dT / st * az_hat);
            }
        }
        return Vec::Zero();
    }
};

struct ProjectionResult {
    Eigen::VectorXd coefficients;
    double residual = 0.0;  // L2 norm of the unrepresented remainder
};

// Ordered Dirichlet eigenbasis of the Laplace-Beltrami operator on a
// spherical domain, together with the quadrature it was built on.
struct SpectralBasis {
    SphericalDomain domain;
    std::vector<Mode> modes;
    QuadraturePtr quadrature;

    int count() const { return static_cast<int>(modes.size()); }
    double lambda(int j) const { return modes[j].lambda; }
    double alpha(int j) const { return modes[j].alpha; }
    double eval(int j, const Vec& x) const { return modes[j].eval(x); }
    Vec grad(int j, const Vec& x) const { return modes[j].grad(x); }

    std::vector<double> nodal_values(int j) const {
        std::vector<double> v(quadrature->size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = modes[j].eval(quadrature->nodes[i]);
        return v;
    }

    // True when every mode is a spherical harmonic (full sphere, d = 3), which
    // admits a single-recurrence evaluation of the whole basis.
    bool uniform_sh() const {
        for (const Mode& m : modes)
            if (m.kind != Mode::Kind::SphereHarm) return false;
        return !modes.empty();
    }

    void eval_all(const Vec& x, double* out) const {
        if (uniform_sh_cache < 0)
            const_cast<SpectralBasis*>(this)->uniform_sh_cache = uniform_sh() ? 1 : 0;
        if (uniform_sh_cache == 1) {
            eval_all_sh(x, out);
            return;
        }
        for (int j = 0; j < count(); ++j) out[j] = modes[j].eval(x);
    }

    int uniform_sh_cache = -1;

  private:
    // one associated-Legendre recurrence pass for all (l, m) at this point
    void eval_all_sh(const Vec& x, double* out) const {
        int lmax = 0;
        for (const Mode& m : modes) lmax = std::max(lmax, m.k);
        double ct = std::clamp(x[2], -1.0, 1.0);
        double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
        double az = std::atan2(x[1], x[0]);
        thread_local std::vector<double> P, cm, sm;
        P.assign(static_cast<std::size_t>(lmax + 1) * (lmax + 1), 0.0);
        cm.resize(lmax + 1);
        sm.resize(lmax + 1);
        auto at = [&](int l, int m) -> double& { return P[static_cast<std::size_t>(l) * (lmax + 1) + m]; };
        double pmm = 1.0, fact = 1.0;
        for (int m = 0; m <= lmax; ++m) {
            if (m > 0) {
                pmm *= fact * st;
                fact += 2.0;
            }
            at(m, m) = pmm;
            if (m + 1 <= lmax) at(m + 1, m) = ct * (2.0 * m + 1.0) * pmm;
            for (int l = m + 2; l <= lmax; ++l)
                at(l, m) =
                    ((2.0 * l - 1.0) * ct * at(l - 1, m) - (l + m - 1.0) * at(l - 2, m)) / (l - m);
            cm[m] = std::cos(m * az);
            sm[m] = std::sin(m * az);
        }
        for (int j = 0; j < count(); ++j) {
            const Mode& md = modes[j];
            int ma = std::abs(md.m);
            double v = md.norm * at(md.k, ma);
            if (md.m > 0) v *= cm[ma];
            if (md.m < 0) v *= sm[ma];
            out[j] = v;
        }
    }

  public:

    ProjectionResult project(const std::vector<double>& values) const {
        require(values.size() == quadrature->size(), "project: mismatched quadrature");
        ProjectionResult out;
        out.coefficients = Eigen::VectorXd::Zero(count());
        for (int j = 0; j < count(); ++j) {
            double c = 0.0;
            for (std::size_t i = 0; i < values.size(); ++i)
                c += quadrature->weights[i] * values[i] * modes[j].eval(quadrature->nodes[i]);
            out.coefficients[j] = c;
        }
        double r2 = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            double rec = 0.0;
            for (int j = 0; j < count(); ++j) rec += out.coefficients[j] * modes[j].eval(quadrature->nodes[i]);
            double diff = values[i] - rec;
            r2 += quadrature->weights[i] * diff * diff;
        }
        out.residual = std::sqrt(std::max(0.0, r2));
        return out;
    }

    std::vector<double> evaluate(const Eigen::VectorXd& coeffs) const {
        require(coeffs.size() <= count(), "evaluate: more coefficients than modes");
        std::vector<double> v(quadrature->size(), 0.0);
        for (int j = 0; j < coeffs.size(); ++j) {
            if (coeffs[j] == 0.0) continue;
            for (std::size_t i = 0; i < v.size(); ++i) v[i] += coeffs[j] * modes[j].eval(quadrature->nodes[i]);
        }
        return v;
    }

    double eval_combo(const Eigen::VectorXd& coeffs, const Vec& x) const {
        if (uniform_sh_cache < 0)
            const_cast<SpectralBasis*>(this)->uniform_sh_cache = uniform_sh() ? 1 : 0;
        if (uniform_sh_cache == 1 && coeffs.size() == count() && count() >= 32) {
            thread_local std::vector<double> buf;
            buf.resize(count());
            eval_all(x, buf.data());
            double v = 0.0;
            for (int j = 0; j < count(); ++j) v += coeffs[j] * buf[j];
            return v;
        }
        double v = 0.0;
        for (int j = 0; j < coeffs.size(); ++j)
            if (coeffs[j] != 0.0) v += coeffs[j] * modes[j].eval(x);
        return v;
    }

    Vec grad_combo(const Eigen::VectorXd& coeffs, const Vec& x) const {
        Vec g = Vec::Zero();
        for (int j = 0; j < coeffs.size(); ++j)
            if (coeffs[j] != 0.0) g += coeffs[j] * modes[j].grad(x);
        return g;
    }

    // Indices of modes with eigenvalue equal to `lam` (within tol).
    std::vector<int> cluster(double lam, double tol = 1e-6) const {
        std::vector<int> out;
        for (int j = 0; j < count(); ++j)
            if (std::abs(modes[j].lambda - lam) < tol) out.push_back(j);
        return out;
    }
};

using BasisPtr = std::shared_ptr<const SpectralBasis>;

namespace detail {

// Shooting integration of the cap radial ODE
//   f'' + cot(theta) f' + (lambda - m^2/sin^2 theta) f = 0
// from the regular endpoint; returns f(theta_max).
inline double cap_shoot(double lambda, int m, double theta_max, int steps,
                        CapRadial* table = nullptr) {
    double h = theta_max / steps;
    double th = (m == 0) ? 1e-6 : 1e-4;
    double c2 = (m * (m + 1.0) - 3.0 * lambda) / (12.0 * (m + 1.0));
    double f, fp;
    if (m == 0) {
        f = 1.0 + c2 * th * th;
        fp = 2.0 * c2 * th;
    } else {
        f = std::pow(th, m) * (1.0 + c2 * th * th);
        fp = m * std::pow(th, m - 1) * (1.0 + c2 * th * th) + std::pow(th, m) * 2.0 * c2 * th;
    }
    auto rhs = [&](double t, double y0, double y1, double& d0, double& d1) {
        double s = std::sin(t);
        d0 = y1;
        d1 = -std::cos(t) / s * y1 - (lambda - m * m / (s * s)) * y0;
    };
    if (table) {
        table->lambda = lambda;
        table->m = m;
        table->theta_max = theta_max;
        table->theta.clear();
        table->f.clear();
        table->fp.clear();
    }
    int i0 = static_cast<int>(std::ceil(th / h));
    if (table) {
        for (int i = 0; i <= i0; ++i) {
            double t = i * h;
            double fv, fpv;
            if (m == 0) {
                fv = 1.0 + c2 * t * t;
                fpv = 2.0 * c2 * t;
            } else {
                fv = std::pow(t, m) * (1.0 + c2 * t * t);
                fpv = (t == 0.0 && m == 1) ? 1.0
                      : (t == 0.0 ? 0.0
                                  : m * std::pow(t, m - 1) * (1.0 + c2 * t * t) +
                                        std::pow(t, m) * 2.0 * c2 * t);
            }
            table->theta.push_back(t);
            table->f.push_back(fv);
            table->fp.push_back(fpv);
        }
        // restart integration from the tabulated point
        th = i0 * h;
        f = table->f.back();
        fp = table->fp.back();
    }
    double t = th;
    const int sub = 4;
    while (t < theta_max - 1e-14) {
        double target = table ? (std::floor(t / h + 1.5) * h) : std::min(t + h, theta_max);
        target = std::min(target, theta_max);
        double hh = (target - t) / sub;
        for (int s = 0; s < sub; ++s) {
            double k1f, k1p, k2f, k2p, k3f, k3p, k4f, k4p;
            rhs(t, f, fp, k1f, k1p);
            rhs(t + hh / 2, f + hh / 2 * k1f, fp + hh / 2 * k1p, k2f, k2p);
            rhs(t + hh / 2, f + hh / 2 * k2f, fp + hh / 2 * k2p, k3f, k3p);
            rhs(t + hh, f + hh * k3f, fp + hh * k3p, k4f, k4p);
            f += hh / 6 * (k1f + 2 * k2f + 2 * k3f + k4f);
            fp += hh / 6 * (k1p + 2 * k2p + 2 * k3p + k4p);
            t += hh;
        }
        if (table) {
            table->theta.push_back(t);
            table->f.push_back(f);
            table->fp.push_back(fp);
        }
    }
    return f;
}

// Finite-difference seeds for the cap radial eigenvalues (symmetrised
// Sturm-Liouville tridiagonal), refined later by shooting.
inline std::vector<double> cap_fd_seeds(int m, double theta_max, int npts, double lambda_cutoff) {
    int N = npts;
    double h = theta_max / N;
    Eigen::VectorXd diag(N - 1), sub(N - 2);
    auto s = [&](double t) { return std::sin(t); };
    for (int i = 1; i <= N - 1; ++i) {
        double ti = i * h;
        double sp = s(ti + h / 2), sm = s(ti - h / 2), si = s(ti);
        double a = (sp + sm) / (h * h) + m * m / si;
        if (m == 0 && i == 1) a = sp / (h * h);  // reflected ghost node, f'(0)=0
        diag[i - 1] = a / si;
        if (i <= N - 2) sub[i - 1] = -sp / (h * h * std::sqrt(si * s(ti + h)));
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
    std::vector<double> out;
    for (int i = 0; i < es.eigenvalues().size() && es.eigenvalues()[i] < lambda_cutoff; ++i)
        out.push_back(es.eigenvalues()[i]);
    return out;
}

inline double cap_refine(double seed, int m, double theta_max, int steps) {
    // bracket around the seed, then bisect on the boundary value
    double lo = seed - 0.5, hi = seed + 0.5;
    double flo = cap_shoot(lo, m, theta_max, steps);
    double fhi = cap_shoot(hi, m, theta_max, steps);
    int guard = 0;
    while (flo * fhi > 0 && guard++ < 40) {
        lo -= 0.25;
        hi += 0.25;
        if (lo < 0) lo = 0.0;
        flo = cap_shoot(lo, m, theta_max, steps);
        fhi = cap_shoot(hi, m, theta_max, steps);
    }
    require(flo * fhi <= 0, "cap eigenvalue refinement failed to bracket");
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        double fm = cap_shoot(mid, m, theta_max, steps);
        if (flo * fm <= 0) {
            hi = mid;
            fhi = fm;
        } else {
            lo = mid;
            flo = fm;
        }
        if (hi - lo < 1e-13 * std::max(1.0, hi)) break;
    }
    return 0.5 * (lo + hi);
}

inline std::vector<Mode> build_cap_modes_3d(double delta, int max_modes, const Quadrature& quad) {
    double theta_max = pi / 2.0 + std::asin(delta);
    const int fd_pts = 2048, shoot_steps = 4096;
    double cutoff = 6.0 * (max_modes + 6);  // generous eigenvalue window
    struct Cand {
        double lambda;
        int m;
    };
    std::vector<Cand> cands;
    for (int m = 0;; ++m) {
        auto seeds = cap_fd_seeds(m, theta_max, fd_pts, cutoff);
        if (seeds.empty()) break;
        for (double s : seeds) cands.push_back({cap_refine(s, m, theta_max, shoot_steps), m});
        if (m > 12) break;
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (std::abs(a.lambda - b.lambda) > 1e-9) return a.lambda < b.lambda;
        return a.m < b.m;
    });
    std::vector<Mode> modes;
    for (const Cand& c : cands) {
        if (static_cast<int>(modes.size()) >= max_modes) break;
        auto table = std::make_shared<detail::CapRadial>();
        cap_shoot(c.lambda, c.m, theta_max, shoot_steps, table.get());
        // normalise: int_0^Tmax f^2 sin = 1 (azimuth factors are unit in L2)
        Rule1D r = gauss_legendre(800, 0.0, theta_max);
        double n2 = 0.0;
        for (int i = 0; i < 800; ++i) {
            double fv, fpv;
            table->eval(r.nodes[i], fv, fpv);
            n2 += r.weights[i] * fv * fv * std::sin(r.nodes[i]);
        }
        double scale = 1.0 / std::sqrt(n2);
        int copies = (c.m == 0) ? 1 : 2;
        for (int p = 0; p < copies; ++p) {
            if (static_cast<int>(modes.size()) >= max_modes) break;
            Mode md;
            md.kind = Mode::Kind::CapRadial3D;
            md.lambda = c.lambda;
            md.alpha = homogeneity_of(c.lambda, 3);
            md.m = c.m;
            md.phase = p;
            md.radial = table;
            md.norm = scale * ((c.m == 0) ? 1.0 / std::sqrt(2.0 * pi) : 1.0 / std::sqrt(pi));
            modes.push_back(md);
        }
    }
    (void)quad;
    return modes;
}

}  // namespace detail

// First max_modes Dirichlet eigenpairs on the domain, L2-orthonormal on it.
// Full sphere d=2: trigonometric modes; d=3: real spherical harmonics.
// Half sphere: odd reflection of full-sphere modes. Caps: d=2 closed-form arc
// sines, d=3 separated polar Sturm-Liouville solved by FD seeds + shooting.
inline SpectralBasis build_basis(const SphericalDomain& domain, int max_modes,
                                 int resolution = 0) {
    domain.validate();
    if (domain.kind == DomainKind::FullSphere)
        require(max_modes >= domain.dim * (domain.dim + 3) / 2,
                "build_basis: need max_modes past the lambda = 2d cluster");
    require(max_modes >= 1, "build_basis: max_modes >= 1");

    SpectralBasis basis;
    basis.domain = domain;
    const int d = domain.dim;

    if (resolution == 0) {
        // enough quadrature for products of any two modes in the basis
        if (d == 2) {
            int kmax = (max_modes + 2) / 2;
            resolution = std::max(16, 2 * kmax + 8);
        } else {
            int lmax = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(max_modes)))) + 2;
            resolution = std::max(16, 2 * lmax + 8);
        }
    }
    basis.quadrature = std::make_shared<Quadrature>(build_quadrature(domain, resolution));

    if (d == 2) {
        double delta = (domain.kind == DomainKind::Cap) ? domain.cap_delta : 0.0;
        if (domain.kind == DomainKind::FullSphere) {
            int k = 0;
            while (static_cast<int>(basis.modes.size()) < max_modes) {
                if (k == 0) {
                    Mode m;
                    m.kind = Mode::Kind::Circle;
                    m.k = 0;
                    m.lambda = 0.0;
                    m.alpha = 0.0;
                    m.norm = 1.0 / std::sqrt(2.0 * pi);
                    basis.modes.push_back(m);
                } else {
                    for (int p = 0; p < 2 && static_cast<int>(basis.modes.size()) < max_modes; ++p) {
                        Mode m;
                        m.kind = Mode::Kind::Circle;
                        m.k = k;
                        m.phase = p;
                        m.lambda = static_cast<double>(k) * k;
                        m.alpha = k;
                        m.norm = 1.0 / std::sqrt(pi);
                        basis.modes.push_back(m);
                    }
                }
                ++k;
            }
        } else {
            double half = std::asin(delta);
            double t0 = -half, len = pi + 2.0 * half;
            for (int j = 1; j <= max_modes; ++j) {
                Mode m;
                m.kind = Mode::Kind::Arc;
                m.k = j;
                m.t0 = t0;
                m.len = len;
                m.lambda = (j * pi / len) * (j * pi / len);
                m.alpha = homogeneity_of(m.lambda, 2);
                m.norm = std::sqrt(2.0 / len);
                basis.modes.push_back(m);
            }
        }
    } else {
        if (domain.kind == DomainKind::FullSphere) {
            for (int l = 0; static_cast<int>(basis.modes.size()) < max_modes; ++l) {
                for (int m = -l; m <= l && static_cast<int>(basis.modes.size()) < max_modes; ++m) {
                    Mode md;
                    md.kind = Mode::Kind::SphereHarm;
                    md.k = l;
                    md.m = m;
                    md.lambda = static_cast<double>(l) * (l + 1);
                    md.alpha = l;
                    md.norm = detail::sh_norm(l, std::abs(m)) * (m != 0 ? std::sqrt(2.0) : 1.0);
                    basis.modes.push_back(md);
                }
            }
        } else if (domain.kind == DomainKind::HalfSphere) {
            // odd reflection: keep full-sphere harmonics with (l+|m|) odd,
            // rescaled to unit L2 norm on the half sphere
            for (int l = 1; static_cast<int>(basis.modes.size()) < max_modes; ++l) {
                for (int m = -l; m <= l && static_cast<int>(basis.modes.size()) < max_modes; ++m) {
                    if ((l + std::abs(m)) % 2 == 0) continue;
                    Mode md;
                    md.kind = Mode::Kind::SphereHarm;
                    md.k = l;
                    md.m = m;
                    md.lambda = static_cast<double>(l) * (l + 1);
                    md.alpha = l;
                    md.norm = detail::sh_norm(l, std::abs(m)) * (m != 0 ? std::sqrt(2.0) : 1.0) *
                              std::sqrt(2.0);
                    basis.modes.push_back(md);
                }
            }
        } else {
            basis.modes = detail::build_cap_modes_3d(domain.cap_delta, max_modes, *basis.quadrature);
        }
    }

    // spectral-gap sanity for caps: refuse deltas that close the 2.5 gap
    if (domain.kind == DomainKind::Cap && static_cast<int>(basis.modes.size()) > d)
        require(basis.modes[d].lambda >= 3.0 * d,
                "build_basis: cap_delta too large, lambda_{d+1} < 3d");
    return basis;
}

inline BasisPtr make_basis(const SphericalDomain& domain, int max_modes, int resolution = 0) {
    return std::make_shared<SpectralBasis>(build_basis(domain, max_modes, resolution));
}

}  // namespace obsepi
