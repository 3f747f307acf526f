#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "obsepi/common.hpp"

namespace obsepi {

// Uniform box grid on [-L, L]^d with n nodes per side.
struct Grid {
    int d = 2;
    double L = 1.0;
    int n = 65;

    double h() const { return 2.0 * L / (n - 1); }
    double coord(int i) const { return -L + i * h(); }

    std::size_t size() const {
        std::size_t s = 1;
        for (int k = 0; k < d; ++k) s *= n;
        return s;
    }
    std::size_t index(int i, int j, int k = 0) const {
        return d == 2 ? static_cast<std::size_t>(i) * n + j
                      : (static_cast<std::size_t>(i) * n + j) * n + k;
    }

    void validate() const {
        require(d == 2 || d == 3, "Grid: d in {2,3}");
        require(n >= 33, "Grid: n >= 33");
    }
};

namespace detail {

// multilinear interpolation of nodal data; clamps to the box
inline double grid_interp(const Grid& g, const std::vector<double>& v, const Vec& x) {
    const int n = g.n;
    const double h = g.h();
    double fi[3] = {0, 0, 0};
    int i0[3] = {0, 0, 0};
    for (int k = 0; k < g.d; ++k) {
        double s = (x[k] + g.L) / h;
        s = std::clamp(s, 0.0, static_cast<double>(n - 1) - 1e-12);
        i0[k] = static_cast<int>(s);
        fi[k] = s - i0[k];
    }
    if (g.d == 2) {
        std::size_t id = g.index(i0[0], i0[1]);
        double v00 = v[id], v01 = v[id + 1], v10 = v[id + n], v11 = v[id + n + 1];
        return (1 - fi[0]) * ((1 - fi[1]) * v00 + fi[1] * v01) +
               fi[0] * ((1 - fi[1]) * v10 + fi[1] * v11);
    }
    double acc = 0.0;
    const std::size_t sx = static_cast<std::size_t>(n) * n, sy = n;
    std::size_t id = g.index(i0[0], i0[1], i0[2]);
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int c = 0; c < 2; ++c) {
                double w = (a ? fi[0] : 1 - fi[0]) * (b ? fi[1] : 1 - fi[1]) *
                           (c ? fi[2] : 1 - fi[2]);
                acc += w * v[id + a * sx + b * sy + c];
            }
    return acc;
}

}  // namespace detail

struct GridFunction {
    Grid grid;
    std::vector<double> values;

    GridFunction() = default;
    explicit GridFunction(const Grid& g) : grid(g), values(g.size(), 0.0) {}

    double& at(int i, int j, int k = 0) { return values[grid.index(i, j, k)]; }
    double at(int i, int j, int k = 0) const { return values[grid.index(i, j, k)]; }

    template <class F>
    static GridFunction sample(const Grid& g, F&& f) {
        GridFunction u(g);
        if (g.d == 2) {
            for (int i = 0; i < g.n; ++i)
                for (int j = 0; j < g.n; ++j)
                    u.at(i, j) = f(Vec(g.coord(i), g.coord(j), 0.0));
        } else {
            for (int i = 0; i < g.n; ++i)
                for (int j = 0; j < g.n; ++j)
                    for (int k = 0; k < g.n; ++k)
                        u.at(i, j, k) = f(Vec(g.coord(i), g.coord(j), g.coord(k)));
        }
        return u;
    }

    bool inside(const Vec& x, double margin = 0.0) const {
        for (int k = 0; k < grid.d; ++k)
            if (std::abs(x[k]) > grid.L - margin) return false;
        return true;
    }

    double interpolate(const Vec& x) const { return detail::grid_interp(grid, values, x); }

    // flat binary layout: header (d, n, L as 64-bit values), then row-major nodes
    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        require(out.good(), "GridFunction::save: cannot open " + path);
        std::int64_t d64 = grid.d, n64 = grid.n;
        double L = grid.L;
        out.write(reinterpret_cast<const char*>(&d64), 8);
        out.write(reinterpret_cast<const char*>(&n64), 8);
        out.write(reinterpret_cast<const char*>(&L), 8);
        out.write(reinterpret_cast<const char*>(values.data()),
                  static_cast<std::streamsize>(values.size() * sizeof(double)));
    }

    static GridFunction load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        require(in.good(), "GridFunction::load: cannot open " + path);
        std::int64_t d64 = 0, n64 = 0;
        double L = 0.0;
        in.read(reinterpret_cast<char*>(&d64), 8);
        in.read(reinterpret_cast<char*>(&n64), 8);
        in.read(reinterpret_cast<char*>(&L), 8);
        Grid g{static_cast<int>(d64), L, static_cast<int>(n64)};
        g.validate();
        GridFunction u(g);
        in.read(reinterpret_cast<char*>(u.values.data()),
                static_cast<std::streamsize>(u.values.size() * sizeof(double)));
        require(in.good(), "GridFunction::load: truncated file " + path);
        return u;
    }
};

// Nodal gradient by centered differences, one-sided at the box boundary.
struct GridGradient {
    Grid grid;
    std::vector<double> comps[3];

    explicit GridGradient(const GridFunction& u) : grid(u.grid) {
        const int n = grid.n;
        const double h = grid.h();
        for (int k = 0; k < grid.d; ++k) comps[k].assign(grid.size(), 0.0);
        auto diff = [&](std::size_t idx, int stride, int pos) {
            const auto& v = u.values;
            if (pos == 0) return (v[idx + stride] - v[idx]) / h;
            if (pos == n - 1) return (v[idx] - v[idx - stride]) / h;
            return (v[idx + stride] - v[idx - stride]) / (2.0 * h);
        };
        if (grid.d == 2) {
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    std::size_t id = grid.index(i, j);
                    comps[0][id] = diff(id, n, i);
                    comps[1][id] = diff(id, 1, j);
                }
        } else {
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    for (int k = 0; k < n; ++k) {
                        std::size_t id = grid.index(i, j, k);
                        comps[0][id] = diff(id, n * n, i);
                        comps[1][id] = diff(id, n, j);
                        comps[2][id] = diff(id, 1, k);
                    }
        }
    }

    Vec interpolate(const Vec& x) const {
        Vec g = Vec::Zero();
        for (int k = 0; k < grid.d; ++k) g[k] = detail::grid_interp(grid, comps[k], x);
        return g;
    }
};

}  // namespace obsepi
