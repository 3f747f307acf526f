#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace obsepi {

// Points and directions live in R^3 with the third component zero when d = 2.
using Vec = Eigen::Vector3d;

inline constexpr double pi = std::numbers::pi;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Newton failed to converge; carries the last iterate for diagnostics.
struct NewtonError : Error {
    NewtonError(const std::string& msg, Vec iterate, double res)
        : Error(msg), last_iterate(iterate), residual(res) {}
    Vec last_iterate;
    double residual = 0.0;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw Error(msg);
}

// |B_1| in R^d.
inline double ball_volume(int d) {
    switch (d) {
        case 1: return 2.0;
        case 2: return pi;
        case 3: return 4.0 * pi / 3.0;
        default: return std::pow(pi, d / 2.0) / std::tgamma(d / 2.0 + 1.0);
    }
}

// H^{d-1}(S^{d-1}) = d |B_1|.
inline double sphere_area(int d) { return d * ball_volume(d); }

// Hemisphere moments M_k = \int_{S^{d-1} \cap {x.n>0}} (x.n)^k dH^{d-1}.
inline double hemisphere_moment(int d, int k) {
    // (1/2)|S^{d-2}| B((k+1)/2, (d-1)/2); specialises to the usual values.
    if (d == 2) {
        // \int_{-pi/2}^{pi/2} cos^k t dt
        double v = (k % 2 == 0) ? pi : 2.0;
        for (int j = (k % 2 == 0) ? 2 : 3; j <= k; j += 2) v *= (j - 1.0) / j;
        return v;
    }
    if (d == 3) return 2.0 * pi / (k + 1);
    double sdm2 = sphere_area(d - 1);
    return 0.5 * sdm2 * std::beta((k + 1) / 2.0, (d - 1) / 2.0);
}

// Tangential projection of an ambient gradient g at the unit vector x.
inline Vec tangential(const Vec& x, const Vec& g) { return g - (g.dot(x)) * x; }

// Exponent of the energy-gap power in the singular epiperimetric inequality.
inline double log_epi_gamma(int d) { return d == 2 ? 0.0 : (d - 1.0) / (d + 3.0); }

// ---------------------------------------------------------------------------
// Deterministic random numbers. std::uniform_real_distribution is
// implementation-defined, so outputs are derived from raw mt19937_64 draws.
struct Rng {
    explicit Rng(std::uint64_t seed) : state(seed ? seed : 0x9e3779b97f4a7c15ull) {}

    std::uint64_t next_u64() {
        // xorshift* keeps the stream platform-stable.
        std::uint64_t x = state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        state = x;
        return x * 0x2545f4914f6cdd1dull;
    }
    double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }
    double normal() {
        double u1 = uniform(), u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * pi * u2);
    }
    Vec unit_vector(int d) {
        Vec v = Vec::Zero();
        for (int i = 0; i < d; ++i) v[i] = normal();
        double n = v.norm();
        if (n < 1e-12) return unit_vector(d);
        return v / n;
    }
    std::uint64_t state;
};

// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    require(x.size() == y.size() && x.size() >= 2, "loglog_slope: need >= 2 points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace obsepi
