#pragma once

#include <functional>
#include <vector>

#include "obsepi/grid.hpp"

namespace obsepi {

struct SolverConfig {
    double tolerance = 1e-10;  // sup-norm successive-change stop
    int max_sweeps = 200000;
    double relaxation = 1.8;
    std::function<double(const Vec&)> weight;  // q(x) >= c_q > 0; constant 1 if unset

    double q(const Vec& x) const { return weight ? weight(x) : 1.0; }

    void validate() const {
        require(tolerance > 0.0, "SolverConfig: tolerance > 0");
        require(relaxation > 0.0 && relaxation < 2.0, "SolverConfig: relaxation in (0,2)");
    }
};

struct SolveInfo {
    int sweeps = 0;
    double last_change = 0.0;
    bool converged = false;
};

namespace detail {

// red-black projected SOR sweeps for the complementarity system
//   u >= 0,  Delta_h u <= q/2,  u (q/2 - Delta_h u) = 0
// (unknowns at interior nodes; boundary row fixed). `constrained = false`
// solves the unconstrained equation instead (used for the harmonic start).
inline SolveInfo psor(GridFunction& u, const GridFunction& rhs_half_q, const SolverConfig& cfg,
                      bool constrained) {
    const Grid& g = u.grid;
    const int n = g.n;
    const double h2 = g.h() * g.h();
    const double om = cfg.relaxation;
    SolveInfo info;
    auto sweep_node_2d = [&](int i, int j) {
        std::size_t id = g.index(i, j);
        double nb = u.values[id - 1] + u.values[id + 1] + u.values[id - n] + u.values[id + n];
        double target = (nb - h2 * rhs_half_q.values[id]) / 4.0;
        double next = u.values[id] + om * (target - u.values[id]);
        if (constrained && next < 0.0) next = 0.0;
        double ch = std::abs(next - u.values[id]);
        u.values[id] = next;
        return ch;
    };
    auto sweep_node_3d = [&](int i, int j, int k) {
        std::size_t id = g.index(i, j, k);
        const std::size_t sx = static_cast<std::size_t>(n) * n;
        double nb = u.values[id - 1] + u.values[id + 1] + u.values[id - n] + u.values[id + n] +
                    u.values[id - sx] + u.values[id + sx];
        double target = (nb - h2 * rhs_half_q.values[id]) / 6.0;
        double next = u.values[id] + om * (target - u.values[id]);
        if (constrained && next < 0.0) next = 0.0;
        double ch = std::abs(next - u.values[id]);
        u.values[id] = next;
        return ch;
    };
    for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
        double change = 0.0;
        for (int color = 0; color < 2; ++color) {
            if (g.d == 2) {
                for (int i = 1; i < n - 1; ++i)
                    for (int j = 1 + ((i + color) % 2); j < n - 1; j += 2)
                        change = std::max(change, sweep_node_2d(i, j));
            } else {
                for (int i = 1; i < n - 1; ++i)
                    for (int j = 1; j < n - 1; ++j)
                        for (int k = 1 + ((i + j + color) % 2); k < n - 1; k += 2)
                            change = std::max(change, sweep_node_3d(i, j, k));
            }
        }
        info.sweeps = sweep + 1;
        info.last_change = change;
        if (change < cfg.tolerance) {
            info.converged = true;
            break;
        }
    }
    return info;
}

}  // namespace detail

// Discrete minimiser of int |grad u|^2 + int q u over u >= 0 with the given
// boundary data: projected red-black SOR for Delta_h u = q/2 on {u > 0}.
// Initialised with the positive part of the discrete harmonic extension.
inline GridFunction solve_obstacle(const std::function<double(const Vec&)>& boundary_data,
                                   const SolverConfig& cfg, const Grid& grid,
                                   SolveInfo* info_out = nullptr) {
    grid.validate();
    cfg.validate();
    GridFunction u(grid);
    const int n = grid.n;
    // boundary rows
    auto set_boundary = [&](int i, int j, int k) {
        Vec x(grid.coord(i), grid.coord(j), grid.d == 3 ? grid.coord(k) : 0.0);
        double v = boundary_data(x);
        require(v >= 0.0, "solve_obstacle: negative boundary data");
        u.at(i, j, k) = v;
    };
    if (grid.d == 2) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (i == 0 || j == 0 || i == n - 1 || j == n - 1) set_boundary(i, j, 0);
    } else {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k)
                    if (i == 0 || j == 0 || k == 0 || i == n - 1 || j == n - 1 || k == n - 1)
                        set_boundary(i, j, k);
    }

    GridFunction rhs(grid);  // q/2 at the nodes
    if (grid.d == 2) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                rhs.at(i, j) = 0.5 * cfg.q(Vec(grid.coord(i), grid.coord(j), 0.0));
    } else {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k)
                    rhs.at(i, j, k) =
                        0.5 * cfg.q(Vec(grid.coord(i), grid.coord(j), grid.coord(k)));
    }

    // harmonic start (looser tolerance), clipped to the admissible set
    GridFunction zero_rhs(grid);
    SolverConfig warm = cfg;
    warm.tolerance = std::max(cfg.tolerance, 1e-8);
    detail::psor(u, zero_rhs, warm, false);
    for (double& v : u.values) v = std::max(v, 0.0);

    SolveInfo info = detail::psor(u, rhs, cfg, true);
    require(info.converged, "solve_obstacle: no convergence within max_sweeps (residual " +
                                std::to_string(info.last_change) + ")");
    if (info_out) *info_out = info;
    return u;
}

// Interior nodes of the contact set adjacent to the positivity set, with the
// crossing location refined linearly along the grid edge. The threshold
// scales like h^2 because the solution grows quadratically off the contact
// set: genuine positivity one node away is >= (q/4) h^2, so h^2/10 separates
// it from the exact zeros of the projected iteration.
inline std::vector<Vec> free_boundary_nodes(const GridFunction& u) {
    const Grid& g = u.grid;
    const int n = g.n;
    const double thr = g.h() * g.h() / 10.0;
    std::vector<Vec> out;
    auto consider = [&](int i, int j, int k) {
        if (u.at(i, j, k) > thr) return;
        const int di[6] = {1, -1, 0, 0, 0, 0};
        const int dj[6] = {0, 0, 1, -1, 0, 0};
        const int dk[6] = {0, 0, 0, 0, 1, -1};
        int dirs = g.d == 2 ? 4 : 6;
        Vec base(g.coord(i), g.coord(j), g.d == 3 ? g.coord(k) : 0.0);
        for (int s = 0; s < dirs; ++s) {
            int ii = i + di[s], jj = j + dj[s], kk = k + dk[s];
            if (ii < 0 || jj < 0 || kk < 0 || ii >= n || jj >= n || kk >= n) continue;
            double vn = u.at(ii, jj, kk);
            if (vn <= thr) continue;
            double f = (thr - u.at(i, j, k)) / (vn - u.at(i, j, k));
            Vec p = base;
            p[0] += f * di[s] * g.h();
            p[1] += f * dj[s] * g.h();
            if (g.d == 3) p[2] += f * dk[s] * g.h();
            out.push_back(p);
            return;
        }
    };
    if (g.d == 2) {
        for (int i = 1; i < n - 1; ++i)
            for (int j = 1; j < n - 1; ++j) consider(i, j, 0);
    } else {
        for (int i = 1; i < n - 1; ++i)
            for (int j = 1; j < n - 1; ++j)
                for (int k = 1; k < n - 1; ++k) consider(i, j, k);
    }
    return out;
}

// Discrete energy sum_cells |grad_h u|^2 h^d + sum u_+ h^d (forward-difference
// Dirichlet part), used for the energy-descent check.
inline double discrete_energy(const GridFunction& u, const SolverConfig& cfg) {
    const Grid& g = u.grid;
    const int n = g.n;
    const double h = g.h();
    double hd = std::pow(h, g.d);
    double dir = 0.0, vol = 0.0;
    if (g.d == 2) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                std::size_t id = g.index(i, j);
                if (i + 1 < n) dir += (u.values[id + n] - u.values[id]) * (u.values[id + n] - u.values[id]);
                if (j + 1 < n) dir += (u.values[id + 1] - u.values[id]) * (u.values[id + 1] - u.values[id]);
                vol += std::max(0.0, u.values[id]) * cfg.q(Vec(g.coord(i), g.coord(j), 0.0));
            }
    } else {
        const std::size_t sx = static_cast<std::size_t>(n) * n;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) {
                    std::size_t id = g.index(i, j, k);
                    if (i + 1 < n) dir += (u.values[id + sx] - u.values[id]) * (u.values[id + sx] - u.values[id]);
                    if (j + 1 < n) dir += (u.values[id + n] - u.values[id]) * (u.values[id + n] - u.values[id]);
                    if (k + 1 < n) dir += (u.values[id + 1] - u.values[id]) * (u.values[id + 1] - u.values[id]);
                    vol += std::max(0.0, u.values[id]) *
                           cfg.q(Vec(g.coord(i), g.coord(j), g.coord(k)));
                }
    }
    return dir * hd / (h * h) + vol * hd;
}

// Largest violations of the discrete complementarity system.
struct ComplementarityReport {
    double max_product = 0.0;    // max u (q/2 - Delta_h u)
    double min_residual = 0.0;   // min (q/2 - Delta_h u)
    double min_value = 0.0;      // min u
};

inline ComplementarityReport complementarity_report(const GridFunction& u,
                                                    const SolverConfig& cfg) {
    const Grid& g = u.grid;
    const int n = g.n;
    const double h2 = g.h() * g.h();
    ComplementarityReport rep;
    rep.min_residual = 1e300;
    rep.min_value = 1e300;
    auto visit = [&](int i, int j, int k) {
        std::size_t id = g.index(i, j, k);
        double lap;
        if (g.d == 2)
            lap = (u.values[id - 1] + u.values[id + 1] + u.values[id - n] + u.values[id + n] -
                   4.0 * u.values[id]) / h2;
        else {
            const std::size_t sx = static_cast<std::size_t>(n) * n;
            lap = (u.values[id - 1] + u.values[id + 1] + u.values[id - n] + u.values[id + n] +
                   u.values[id - sx] + u.values[id + sx] - 6.0 * u.values[id]) / h2;
        }
        Vec x(g.coord(i), g.coord(j), g.d == 3 ? g.coord(k) : 0.0);
        double res = 0.5 * cfg.q(x) - lap;
        rep.max_product = std::max(rep.max_product, std::abs(u.values[id] * res));
        rep.min_residual = std::min(rep.min_residual, res);
        rep.min_value = std::min(rep.min_value, u.values[id]);
    };
    if (g.d == 2) {
        for (int i = 1; i < n - 1; ++i)
            for (int j = 1; j < n - 1; ++j) visit(i, j, 0);
    } else {
        for (int i = 1; i < n - 1; ++i)
            for (int j = 1; j < n - 1; ++j)
                for (int k = 1; k < n - 1; ++k) visit(i, j, k);
    }
    return rep;
}

}  // namespace obsepi
