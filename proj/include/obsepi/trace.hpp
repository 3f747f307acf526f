#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <vector>

#include "obsepi/common.hpp"
#include "obsepi/quadrature.hpp"
#include "obsepi/sphere_basis.hpp"
#include "obsepi/sphere_fn.hpp"

namespace obsepi {

// A function on the full unit sphere: nodal values on a quadrature, optional
// spectral coefficients, and (when constructed analytically) the exact
// composite representation used for tight-tolerance integrals.
struct Trace {
    int d = 2;
    QuadraturePtr quadrature;
    std::vector<double> values;
    std::optional<Eigen::VectorXd> coefficients;
    std::shared_ptr<const SphereFn> exact;

    bool nonnegative(double tol = 0.0) const {
        for (double v : values)
            if (v < -tol) return false;
        return true;
    }

    double min_value() const {
        double m = 1e300;
        for (double v : values) m = std::min(m, v);
        return m;
    }

    double l2_norm() const {
        double s = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i)
            s += quadrature->weights[i] * values[i] * values[i];
        return std::sqrt(std::max(0.0, s));
    }

    static Trace from_fn(const BasisPtr& basis, const SphereFn& f) {
        Trace t;
        t.d = basis->domain.dim;
        t.quadrature = basis->quadrature;
        t.values = f.nodal_values(*basis->quadrature);
        t.exact = std::make_shared<SphereFn>(f);
        return t;
    }

    static Trace from_coeffs(const BasisPtr& basis, const Eigen::VectorXd& c) {
        Trace t = from_fn(basis, SphereFn::bandlimited(basis, c));
        t.coefficients = c;
        return t;
    }

    template <class F>
    static Trace from_function(const BasisPtr& basis, F&& f) {
        Trace t;
        t.d = basis->domain.dim;
        t.quadrature = basis->quadrature;
        t.values.resize(basis->quadrature->size());
        for (std::size_t i = 0; i < t.values.size(); ++i)
            t.values[i] = f(basis->quadrature->nodes[i]);
        return t;
    }

    // The exact composite if present, otherwise the band-limited projection.
    SphereFn as_fn(const BasisPtr& basis) const {
        if (exact) return *exact;
        if (coefficients) return SphereFn::bandlimited(basis, *coefficients);
        return SphereFn::bandlimited(basis, basis->project(values).coefficients);
    }
};

}  // namespace obsepi
