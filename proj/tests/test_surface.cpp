#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <random>

#include "schwarzflow/surface.hpp"

using namespace schwarzflow;

namespace {

constexpr Real kPi = 3.14159265358979323846;

RadialGraph sphere(Real mass, Real r0, int L = 16) {
    return make_sphere(std::make_shared<SphericalGrid>(L), std::make_shared<Ambient>(2, mass),
                       r0);
}

// principal curvature of the coordinate sphere of radius r:
// kappa = (1 + 2 r phi'/phi) / (phi^2 r), phi' = -m / (2 r^2)
Real sphere_kappa(Real mass, Real r) {
    const Real phi = 1 + mass / (2 * r);
    const Real dphi = -mass / (2 * r * r);
    return (1 + 2 * r * dphi / phi) / (phi * phi * r);
}

}  // namespace

TEST_CASE("make_sphere validates the radius") {
    CHECK_THROWS_AS(sphere(2.0, 0.9), DomainError);
    CHECK_THROWS_AS(sphere(2.0, 1.0), DomainError);
    CHECK_NOTHROW(sphere(2.0, 1.0 + 1e-6));
}

TEST_CASE("coordinate sphere geometry at frozen values") {
    const auto f = geometry(sphere(2.0, 3.0));

    // kappa = 3/32, H = 3/16, chi = phi^2 = 16/9, |A|^2 = 2 kappa^2
    for (int k = 0; k < f.rho.size(); ++k) {
        CHECK(f.kappa1[k] == doctest::Approx(3.0 / 32.0).epsilon(1e-11));
        CHECK(f.kappa2[k] == doctest::Approx(3.0 / 32.0).epsilon(1e-11));
        CHECK(f.H[k] == doctest::Approx(0.1875).epsilon(1e-11));
        CHECK(f.chi[k] == doctest::Approx(16.0 / 9.0).epsilon(1e-12));
        CHECK(f.A2[k] == doctest::Approx(9.0 / 512.0).epsilon(1e-11));
        CHECK(std::sqrt(std::max(f.ring2[k], 0.0)) < 1e-11);
        CHECK(std::sqrt(std::max(f.gradH2[k], 0.0)) < 1e-10);
    }
    CHECK(f.area == doctest::Approx(1024 * kPi / 9).epsilon(1e-12));

    const auto f2 = geometry(sphere(2.0, 2.0));
    CHECK(f2.kappa1.minCoeff() == doctest::Approx(0.074074074074074074).epsilon(1e-11));
    CHECK(f2.chi[0] == doctest::Approx(2.25).epsilon(1e-12));
}

TEST_CASE("principal curvatures match the closed form across masses and radii") {
    for (Real mass : {0.0, 0.5, 2.0, 3.7}) {
        const Real rh = schw_horizon_radius<Real>(2, mass);
        for (Real r : {1.02 * std::max(rh, 0.5), 2.5, 7.0, 40.0}) {
            if (r <= rh) continue;
            const auto f = geometry(sphere(mass, r, 12));
            const Real kw = sphere_kappa(mass, r);
            CHECK(f.kappa1.minCoeff() == doctest::Approx(kw).epsilon(1e-10));
            CHECK(f.kappa2.maxCoeff() == doctest::Approx(kw).epsilon(1e-10));
            CHECK(f.H.maxCoeff() == doctest::Approx(2 * kw).epsilon(1e-10));
        }
    }
}

TEST_CASE("euclidean round sphere") {
    const auto f = geometry(sphere(0.0, 4.5));
    CHECK(f.H.minCoeff() == doctest::Approx(2 / 4.5).epsilon(1e-12));
    CHECK(f.H.maxCoeff() == doctest::Approx(2 / 4.5).epsilon(1e-12));
    CHECK(f.chi.minCoeff() == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(f.area == doctest::Approx(81 * kPi).epsilon(1e-13));

    const auto g = sphere(0.0, 4.5);
    CHECK(enclosed_volume(g) == doctest::Approx(121.5 * kPi).epsilon(1e-11));
    CHECK(isoperimetric_ratio(g).ratio == doctest::Approx(36 * kPi).epsilon(1e-11));
}

TEST_CASE("enclosed volume at frozen values") {
    CHECK(enclosed_volume(sphere(2.0, 2.0)) ==
          doctest::Approx(631.30861832160309).epsilon(1e-12));
    CHECK(enclosed_volume(sphere(2.0, 3.0)) ==
          doctest::Approx(1226.8116197264119).epsilon(1e-12));

    const auto rep = isoperimetric_ratio(sphere(2.0, 3.0));
    CHECK(rep.area == doctest::Approx(1024 * kPi / 9).epsilon(1e-12));
    CHECK(rep.volume == doctest::Approx(1226.8116197264119).epsilon(1e-12));
    CHECK(rep.ratio ==
          doctest::Approx(std::pow(rep.area, 3) / (rep.volume * rep.volume)).epsilon(1e-14));
}

TEST_CASE("algebraic identities on a generic graph") {
    auto g = perturb(perturb(sphere(2.0, 3.0), 2, 1, 0.08), 3, -2, 0.05);
    const auto f = geometry(g);
    for (int k = 0; k < f.rho.size(); ++k) {
        CHECK(f.ring2[k] ==
              doctest::Approx(f.A2[k] - f.H[k] * f.H[k] / 2).epsilon(1e-10));
        CHECK(f.kappa1[k] + f.kappa2[k] == doctest::Approx(f.H[k]).epsilon(1e-11));
        const Real det_shape = (f.A11[k] * f.A22[k] - f.A12[k] * f.A12[k]) /
                               (f.g11[k] * f.g22[k] - f.g12[k] * f.g12[k]);
        CHECK(f.kappa1[k] * f.kappa2[k] == doctest::Approx(det_shape).epsilon(1e-9));
        CHECK(f.kappa1[k] <= f.kappa2[k]);
        CHECK(f.gradH2[k] >= 0.0);
    }
    CHECK(f.dmu.minCoeff() > 0);
    CHECK(pairwise_sum(f.dmu) == doctest::Approx(f.area).epsilon(1e-14));
}

TEST_CASE("perturb scales by the harmonic maximum") {
    const auto p = perturb(sphere(2.0, 3.0), 2, 0, 0.05);
    // rho = 3 (1 + 0.05 Y20/max Y20); nodewise closed form, and the minimum
    // 2.925 is attained exactly at the equatorial node row
    for (int k = 0; k < p.rho.size(); ++k) {
        const Real c = std::cos(p.grid->node_theta(k));
        CHECK(p.rho[k] == doctest::Approx(3 * (1 + 0.05 * (3 * c * c - 1) / 2)).epsilon(1e-10));
    }
    CHECK(p.rho.maxCoeff() < 3.15);
    CHECK(p.rho.maxCoeff() > 3.14);
    CHECK(p.rho.minCoeff() == doctest::Approx(2.925).epsilon(1e-10));

    CHECK_THROWS_AS(perturb(sphere(2.0, 3.0), 20, 0, 0.01), PreconditionError);
    // min rho = 1.2 (1 - 0.5) < r_h = 1
    CHECK_THROWS_AS(perturb(sphere(2.0, 1.2), 2, 0, 0.5), DomainError);
}

TEST_CASE("graph condition failure names the worst node") {
    auto g = perturb(sphere(0.0, 1.0), 4, 1, 0.4);
    const auto f = geometry(g);
    const Real chi_min = f.chi.minCoeff();
    REQUIRE(chi_min > 1e-3);

    GeometryOptions tight;
    tight.eps_graph = chi_min;
    try {
        geometry(g, tight);
        CHECK(false);
    } catch (const GraphConditionError& e) {
        CHECK(e.chi == doctest::Approx(chi_min).epsilon(1e-14));
        CHECK(e.node >= 0);
        CHECK(e.node < g.grid->num_nodes());
        CHECK(std::string(e.what()).find("graph condition failed") != std::string::npos);
    }
}

TEST_CASE("rhs level skips the expensive fields") {
    GeometryOptions cheap;
    cheap.level = GeomLevel::rhs;
    const auto f = geometry(sphere(2.0, 3.0), cheap);
    CHECK(f.kappa1.size() == 0);
    CHECK(f.gradH2.size() == 0);
    CHECK(f.H.size() == f.rho.size());

    const auto full = geometry(sphere(2.0, 3.0));
    CHECK((f.H - full.H).cwiseAbs().maxCoeff() < 1e-16);
    CHECK((f.chi - full.chi).cwiseAbs().maxCoeff() < 1e-16);
}

TEST_CASE("area is invariant under a longitude offset of the grid") {
    const Real mass = 2.0, r0 = 3.0;
    auto metric = std::make_shared<Ambient>(2, mass);
    auto g0 = perturb(make_sphere(std::make_shared<SphericalGrid>(16), metric, r0), 2, 1, 0.1);
    auto g1 = perturb(make_sphere(std::make_shared<SphericalGrid>(16, 0.4), metric, r0), 2, 1, 0.1);

    const auto f0 = geometry(g0);
    const auto f1 = geometry(g1);
    CHECK(f1.area == doctest::Approx(f0.area).epsilon(1e-12));
    CHECK(enclosed_volume(g1) == doctest::Approx(enclosed_volume(g0)).epsilon(1e-11));

    // both grids sample the same band-limited radius function, so the
    // analyzed coefficients agree; node extrema only agree to sampling error
    CHECK((g1.grid->analyze(g1.rho) - g0.grid->analyze(g0.rho)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(f1.H.maxCoeff() == doctest::Approx(f0.H.maxCoeff()).epsilon(1e-3));
    CHECK(f1.chi.minCoeff() == doctest::Approx(f0.chi.minCoeff()).epsilon(1e-3));
}

TEST_CASE("sphere radius solvers invert area and volume") {
    auto grid = std::make_shared<SphericalGrid>(12);
    auto metric = std::make_shared<Ambient>(2, 1.3);
    const Real r = 2.7;
    const auto s = make_sphere(grid, metric, r);

    CHECK(sphere_of_volume(grid, metric, enclosed_volume(s)) == doctest::Approx(r).epsilon(1e-10));
    CHECK(sphere_of_area(grid, metric, area(s)) == doctest::Approx(r).epsilon(1e-10));

    auto flat = std::make_shared<Ambient>(2, 0.0);
    CHECK(sphere_of_area(grid, flat, 4 * kPi) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(sphere_of_volume(grid, flat, 4 * kPi / 3) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK_THROWS_AS(sphere_of_volume(grid, metric, -1.0), DomainError);
}

TEST_CASE("first variation of area matches the flux integral") {
    auto g = perturb(sphere(2.0, 3.0, 12), 2, 0, 0.07);
    std::mt19937 rng(11);
    std::uniform_real_distribution<Real> dist(-1, 1);
    VecX c = VecX::Zero(g.grid->num_coeffs());
    for (int l = 0; l <= 4; ++l)
        for (int m = -l; m <= l; ++m) c[SphericalGrid::coeff_index(l, m)] = 0.3 * dist(rng);
    const VecX psi = g.grid->synthesize(c);

    const auto rep = variation_check(g, psi);
    CHECK(rep.finite_difference ==
          doctest::Approx(rep.analytic).epsilon(1e-7));
}

TEST_CASE("snapshot files round-trip exactly") {
    auto g = perturb(sphere(2.0, 3.0, 8), 3, 2, 0.04);
    const std::string path = "/tmp/schwarzflow_test_snapshot.csv";
    write_snapshot(path, g);

    auto back = read_snapshot(path, g.grid, g.metric);
    CHECK((back.rho - g.rho).cwiseAbs().maxCoeff() == 0.0);

    // wrong grid resolution is rejected
    auto coarse = std::make_shared<SphericalGrid>(4);
    CHECK_THROWS_AS(read_snapshot(path, coarse, g.metric), Error);

    std::ofstream bad("/tmp/schwarzflow_test_bad.csv");
    bad << "rho,theta,phi\n0,0,0\n";
    bad.close();
    CHECK_THROWS_AS(read_snapshot("/tmp/schwarzflow_test_bad.csv", g.grid, g.metric), Error);
    CHECK_THROWS_AS(read_snapshot("/tmp/schwarzflow_no_such_file.csv", g.grid, g.metric), Error);
    std::remove(path.c_str());
    std::remove("/tmp/schwarzflow_test_bad.csv");
}

TEST_CASE("radial volume density matches the closed form") {
    Ambient am(2, 2.0);
    const Vec3 omega = Vec3(0.3, -0.5, 0.8).normalized();
    const Real s = 2.6;
    const Real phi = am.conformal_factor(s);
    // sqrt(det(phi^4 delta)) = phi^6
    CHECK(volume_radial_density(am, s, omega) ==
          doctest::Approx(std::pow(phi, 6) * s * s).epsilon(1e-13));
}
