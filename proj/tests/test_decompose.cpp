#include <catch_amalgamated.hpp>

#include "obsepi/decompose.hpp"
#include "oracles.hpp"

using namespace obsepi;
using Catch::Approx;

namespace {
double reconstruction_error(const SingularDecomposition& dec, const Trace& c,
                            const BasisPtr& basis) {
    // the nodal residual phi makes the reconstruction exact by construction;
    // this measures it including the matched low-mode content
    SphereFn diff = SphereFn::half_square(basis, dec.nu.nu) +
                    SphereFn::quadratic(basis, dec.A.A) + *dec.phi.exact - c.as_fn(basis);
    return std::sqrt(std::max(0.0, diff.norm_sq()));
}
}  // namespace

TEST_CASE("decompose_singular") {
    for (int d : {2, 3}) {
        auto b = make_basis(SphericalDomain::full(d), d == 2 ? 36 : 49);
        SECTION("pure quadratic input, d = " + std::to_string(d)) {
            QuadraticForm A(d, 0.25 / d);
            Trace c = trace_of_quadratic(A, b);
            auto dec = decompose_singular(c, b);
            CHECK(dec.nu.nu.norm() == Approx(0.0).margin(1e-12));
            CHECK((dec.A.A - A.A).norm() < 1e-12);
            CHECK(dec.phi_coefficients.norm() < 1e-12);
            CHECK(dec.residual < 1e-12);
        }
        SECTION("half-square input recovers nu, d = " + std::to_string(d)) {
            Vec nu = Vec::Zero();
            nu[d - 1] = 0.5;
            Trace c = trace_of_half_square(HalfSquareProfile{nu}, b);
            auto dec = decompose_singular(c, b);
            // the linear matching reproduces nu exactly, so A and phi vanish
            CHECK((dec.nu.nu - nu).norm() < 1e-10);
            CHECK(dec.A.A.norm() < 1e-10);
            CHECK(dec.phi_norm_sq < 1e-12);
            CHECK(reconstruction_error(dec, c, b) < 1e-8);
            CHECK(dec.residual < 1e-10);
        }
        SECTION("half-square plus quadratic splits both parts, d = " + std::to_string(d)) {
            Vec nu = Vec::Zero();
            nu[d - 1] = 0.45;
            nu[0] = 0.03;
            Eigen::MatrixXd A = 0.02 * Eigen::MatrixXd::Identity(d, d);
            SphereFn fn = SphereFn::half_square(b, nu) + SphereFn::quadratic(b, A);
            Trace c = Trace::from_fn(b, fn);
            auto dec = decompose_singular(c, b);
            CHECK((dec.nu.nu - nu).norm() < 1e-9);
            CHECK((dec.A.A - A).norm() < 1e-9);
            CHECK(reconstruction_error(dec, c, b) < 1e-8);
        }
        SECTION("additive high mode separates cleanly, d = " + std::to_string(d)) {
            QuadraticForm A(d, 0.25 / d);
            int j = -1;
            for (int m = 0; m < b->count(); ++m)
                if (b->lambda(m) > 2.0 * d + 0.5 && b->alpha(m) == 3.0) {
                    j = m;
                    break;
                }
            REQUIRE(j >= 0);
            SphereFn fn = SphereFn::quadratic(b, A.A) + SphereFn::mode(b, j, 0.1);
            Trace c = Trace::from_fn(b, fn);
            auto dec = decompose_singular(c, b);
            CHECK(dec.nu.nu.norm() == Approx(0.0).margin(1e-10));
            CHECK((dec.A.A - A.A).norm() < 1e-9);
            CHECK(dec.phi_coefficients[j] == Approx(0.1).margin(1e-9));
            CHECK(dec.residual < 1e-9);
        }
    }
}

TEST_CASE("decompose reconstruction property on random band-limited traces") {
    Rng rng(77);
    for (int d : {2, 3}) {
        auto b = make_basis(SphericalDomain::full(d), d == 2 ? 36 : 49);
        for (int trial = 0; trial < 6; ++trial) {
            // nonneg-ish traces near the cone with some linear content
            Eigen::MatrixXd A = Eigen::MatrixXd::Zero(d, d);
            for (int i = 0; i < d; ++i) A(i, i) = 0.25 / d + 0.02 * rng.normal();
            A(0, d - 1) = A(d - 1, 0) = 0.01 * rng.normal();
            Vec nu = Vec::Zero();
            for (int k = 0; k < d; ++k) nu[k] = 0.05 * rng.normal();
            nu[d - 1] += 0.25;
            Eigen::VectorXd high = Eigen::VectorXd::Zero(b->count());
            for (int m = 0; m < b->count(); ++m)
                if (b->lambda(m) > 2 * d + 0.5 && rng.uniform() < 0.3)
                    high[m] = 0.02 * rng.normal();
            SphereFn fn = SphereFn::quadratic(b, A) + SphereFn::half_square(b, nu) +
                          SphereFn::bandlimited(b, high);
            Trace c = Trace::from_fn(b, fn);
            auto dec = decompose_singular(c, b);
            CHECK(reconstruction_error(dec, c, b) < 1e-8);
            CHECK(dec.residual < 1e-9);
            // the lambda = d-1 content of c - q_nu vanishes
            detail::LinearCluster lc = detail::linear_cluster(b);
            SphereFn rem = c.as_fn(b) - SphereFn::half_square(b, dec.nu.nu);
            for (int k = 0; k < d; ++k)
                CHECK(std::abs(rem.dot(SphereFn::mode(b, lc.indices[k]))) < 1e-10);
        }
    }
}

TEST_CASE("cap moments") {
    SECTION("d=2 half circle: the first moment of q_{e_2/2}") {
        auto full = make_basis(SphericalDomain::full(2), 24);
        auto cap = make_basis(SphericalDomain::cap(2, 0.0), 4);
        Vec nu(0.0, 0.5, 0.0);
        Eigen::VectorXd F = cap_moments(nu, cap, full);
        CHECK(F[0] == Approx(std::sqrt(2.0 / pi) / 3.0).epsilon(1e-10));
        CHECK(F[1] == Approx(0.0).margin(1e-12));
    }
    SECTION("nu = 0 gives zero moments") {
        auto full = make_basis(SphericalDomain::full(3), 16);
        auto cap = make_basis(SphericalDomain::cap(3, 0.1), 6);
        Eigen::VectorXd F = cap_moments(Vec::Zero(), cap, full);
        CHECK(F.norm() == Approx(0.0).margin(1e-15));
    }
    SECTION("the antipodal profile misses the open upper half circle") {
        auto full = make_basis(SphericalDomain::full(2), 24);
        auto cap = make_basis(SphericalDomain::cap(2, 0.0), 4);
        Eigen::VectorXd F = cap_moments(Vec(0.0, -0.5, 0.0), cap, full);
        CHECK(F.norm() == Approx(0.0).margin(1e-12));
    }
}

TEST_CASE("choose_nu_flat") {
    for (int d : {2, 3}) {
        double delta0 = 0.1;
        auto full = make_basis(SphericalDomain::full(d), d == 2 ? 36 : 49);
        auto cap = make_basis(SphericalDomain::cap(d, delta0), d + 5);
        Vec ed = Vec::Zero();
        ed[d - 1] = 0.5;
        SECTION("the exact profile is a fixed point, d = " + std::to_string(d)) {
            Trace c = trace_of_half_square(HalfSquareProfile{ed}, full);
            auto nu = choose_nu_flat(c, cap, full);
            CHECK((nu.nu - ed).norm() < 1e-9);
        }
        SECTION("a rotated profile is recovered, d = " + std::to_string(d)) {
            double ang = 0.04;
            Vec axis = Vec::Zero();
            axis[0] = 0.5 * std::sin(ang);
            axis[d - 1] = 0.5 * std::cos(ang);
            Trace c = trace_of_half_square(HalfSquareProfile{axis}, full);
            auto nu = choose_nu_flat(c, cap, full);
            CHECK((nu.nu - axis).norm() < 1e-7);
        }
        SECTION("higher cap modes have zero low moments, d = " + std::to_string(d)) {
            Eigen::VectorXd e = Eigen::VectorXd::Zero(cap->count());
            e[d + 1] = 0.01;  // a mode past the first d
            SphereFn fn = SphereFn::half_square(full, ed) +
                          SphereFn::subdomain_combo(full, cap, e);
            Trace c = Trace::from_fn(full, fn);
            auto nu = choose_nu_flat(c, cap, full);
            CHECK((nu.nu - ed).norm() < 1e-7);
            // the remainder is L2-orthogonal to the first d cap modes
            SphereFn rem = c.as_fn(full) - SphereFn::half_square(full, nu.nu);
            for (int j = 0; j < d; ++j) {
                Eigen::VectorXd ej = Eigen::VectorXd::Zero(cap->count());
                ej[j] = 1.0;
                CHECK(std::abs(rem.dot(SphereFn::subdomain_combo(full, cap, ej))) < 1e-9);
            }
        }
    }
}

TEST_CASE("moment-map Jacobian at e_d/2: structure and invertibility") {
    for (int d : {2, 3}) {
        for (double delta0 : {0.05, 0.1}) {
            auto full = make_basis(SphericalDomain::full(d), d == 2 ? 24 : 36);
            auto cap = make_basis(SphericalDomain::cap(d, delta0), d + 2);
            Vec ed = Vec::Zero();
            ed[d - 1] = 0.5;
            double h = 1e-6;
            Eigen::MatrixXd J(d, d);
            for (int k = 0; k < d; ++k) {
                Vec p = ed, m = ed;
                p[k] += h;
                m[k] -= h;
                J.col(k) = (cap_moments(p, cap, full) - cap_moments(m, cap, full)) / (2.0 * h);
            }
            // dF_1/dnu_d > 0; the remaining first-row entries vanish by parity
            CHECK(J(0, d - 1) > 0.0);
            for (int k = 0; k + 1 < d; ++k) CHECK(std::abs(J(0, k)) < 1e-8);
            CHECK(std::abs(J.determinant()) > 1e-4);
        }
    }
}

TEST_CASE("choose_nu_flat is locally Lipschitz in the trace") {
    int d = 2;
    double delta0 = 0.1;
    auto full = make_basis(SphericalDomain::full(d), 36);
    auto cap = make_basis(SphericalDomain::cap(d, delta0), d + 5);
    Vec ed(0.0, 0.5, 0.0);
    Trace base = trace_of_half_square(HalfSquareProfile{ed}, full);
    Vec nu0 = choose_nu_flat(base, cap, full).nu;

    // Lipschitz constant estimate |DF^{-1}| sup|phi_j|
    double h = 1e-6;
    Eigen::MatrixXd J(d, d);
    for (int k = 0; k < d; ++k) {
        Vec p = ed, m = ed;
        p[k] += h;
        m[k] -= h;
        J.col(k) = (cap_moments(p, cap, full) - cap_moments(m, cap, full)) / (2.0 * h);
    }
    double sup_mode = 0.0;
    for (int j = 0; j < d; ++j)
        for (const Vec& x : cap->quadrature->nodes)
            sup_mode = std::max(sup_mode, std::abs(cap->eval(j, x)));
    double L = J.inverse().norm() * sup_mode * std::sqrt(2.0);

    Rng rng(123);
    for (int trial = 0; trial < 100; ++trial) {
        double eta = 1e-3 * (0.1 + rng.uniform());
        Eigen::VectorXd g = Eigen::VectorXd::Zero(full->count());
        for (int j = 0; j < full->count(); ++j)
            if (full->lambda(j) <= 20.0) g[j] = rng.normal();
        std::vector<double> gv = full->evaluate(g);
        double mx = 0.0;
        for (double v : gv) mx = std::max(mx, std::abs(v));
        g *= 0.9 / mx;
        SphereFn fn = SphereFn::half_square(full, ed) +
                      SphereFn::half_square_times(full, ed, eta * 8.0 * g);
        Trace c = Trace::from_fn(full, fn);
        // L2 size of the perturbation
        SphereFn pert = SphereFn::half_square_times(full, ed, eta * 8.0 * g);
        double eta_l2 = std::sqrt(pert.norm_sq());
        Vec nu1 = choose_nu_flat(c, cap, full).nu;
        CHECK((nu1 - nu0).norm() <= L * eta_l2 + 1e-12);
    }
}

TEST_CASE("choose_nu_flat signals divergence on far traces") {
    int d = 2;
    auto full = make_basis(SphericalDomain::full(d), 24);
    auto cap = make_basis(SphericalDomain::cap(d, 0.1), d + 2);
    // a trace nowhere near q_{e_d/2}: either the Newton step guard fires or a
    // far-tilted iterate exits the supported cap geometry; both are Errors
    Trace c = trace_of_half_square(HalfSquareProfile{Vec(0.5, -0.1, 0.0)}, full);
    CHECK_THROWS_AS(choose_nu_flat(c, cap, full), Error);
}
