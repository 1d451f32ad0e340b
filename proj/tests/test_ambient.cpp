#include "doctest.h"

#include <cmath>

#include "schwarzflow/ambient.hpp"

using namespace schwarzflow;

namespace {

// fourth-order central difference of a matrix-valued map along direction c
template <class F>
Mat3 central4(const F& f, const Vec3& y, int c, Real h) {
    Vec3 e = Vec3::Zero();
    e[c] = 1;
    return (-f(y + 2 * h * e) + 8 * f(y + h * e) - 8 * f(y - h * e) + f(y - 2 * h * e)) /
           (12 * h);
}

Mat3 ricci_closed_form(Real mass, const Vec3& y) {
    const Real r = y.norm();
    const Real phi = 1 + mass / (2 * r);
    return mass / (r * r * r) / (phi * phi) *
           (Mat3::Identity() - 3 / (r * r) * y * y.transpose());
}

}  // namespace

TEST_CASE("conformal factor and horizon") {
    Ambient am(2, 2.0);
    CHECK(am.horizon_radius() == 1.0);
    CHECK(am.conformal_factor(2.0) == 1.5);
    CHECK(am.conformal_factor(3.0) == doctest::Approx(4.0 / 3.0).epsilon(1e-16));

    Ambient flat(2, 0.0);
    CHECK(flat.horizon_radius() == 0.0);
    CHECK(flat.conformal_factor(17.0) == 1.0);

    // n = 3: phi = 1 + m/(2 r^2), horizon at sqrt(m/2)
    AmbientMetric<Real> am3(3, 2.0);
    CHECK(am3.horizon_radius() == doctest::Approx(1.0).epsilon(1e-16));
    CHECK(am3.conformal_factor(2.0) == doctest::Approx(1.25).epsilon(1e-16));

    CHECK_THROWS_AS(Ambient(1, 1.0), DomainError);
    CHECK_THROWS_AS(Ambient(2, -0.5), DomainError);
}

TEST_CASE("points inside the horizon are rejected") {
    Ambient am(2, 2.0);
    CHECK_THROWS_AS(am.phi_jet(Vec3(0.5, 0, 0)), DomainError);
    CHECK_THROWS_AS(am.ricci3(Vec3(0.3, 0.3, 0.3)), DomainError);
}

TEST_CASE("christoffel symbols at a frozen point") {
    // m = 2, y = (2,0,0): w = 2 grad(phi)/phi = (-1/3, 0, 0), and the conformal
    // formula Gamma^a_bc = d^a_b w_c + d^a_c w_b - d_bc w^a fills the rest
    Ambient am(2, 2.0);
    const auto gam = am.christoffels3(Vec3(2, 0, 0));

    Mat3 g0, g1, g2;
    const Real t = 1.0 / 3.0;
    g0 << -t, 0, 0, 0, t, 0, 0, 0, t;
    g1 << 0, -t, 0, -t, 0, 0, 0, 0, 0;
    g2 << 0, 0, -t, 0, 0, 0, -t, 0, 0;
    CHECK((gam[0] - g0).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((gam[1] - g1).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((gam[2] - g2).cwiseAbs().maxCoeff() < 1e-15);

    // closed-form conformal path agrees with the generic metric-jet path
    const auto conf = am.conformal_christoffels3(Vec3(2, 0, 0));
    for (int a = 0; a < 3; ++a)
        CHECK((gam[a] - conf[a]).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("christoffels vanish for the flat metric") {
    Ambient am(2, 0.0);
    const auto gam = am.christoffels3(Vec3(1.3, -0.7, 2.1));
    for (int a = 0; a < 3; ++a) CHECK(gam[a].cwiseAbs().maxCoeff() < 1e-16);
    CHECK(am.ricci3(Vec3(1.3, -0.7, 2.1)).cwiseAbs().maxCoeff() < 1e-16);
}

TEST_CASE("metric jet matches finite differences at extended precision") {
    using LD = long double;
    using V3L = Eigen::Matrix<LD, 3, 1>;
    AmbientMetric<LD> am(2, 2.0L);
    const V3L y(1.3L, -0.7L, 2.1L);
    const LD h = 1e-6L;

    const auto jet = am.jet3(y, 2);
    for (int c = 0; c < 3; ++c) {
        V3L e = V3L::Zero();
        e[c] = 1;
        const auto gp = am.jet3(y + h * e, 2);
        const auto gm = am.jet3(y - h * e, 2);
        const Eigen::Matrix<LD, 3, 3> fd = (gp.g - gm.g) / (2 * h);
        CHECK(double((jet.dg[c] - fd).cwiseAbs().maxCoeff()) < 1e-11);
        for (int d = 0; d < 3; ++d) {
            const Eigen::Matrix<LD, 3, 3> fd2 = (gp.dg[d] - gm.dg[d]) / (2 * h);
            CHECK(double((jet.d2g[c][d] - fd2).cwiseAbs().maxCoeff()) < 1e-11);
        }
    }
}

TEST_CASE("dynamic-dimension jet agrees with the fixed-size path") {
    Ambient am(2, 2.0);
    const Vec3 y(1.3, -0.7, 2.1);
    VecX yx(3);
    yx << y[0], y[1], y[2];

    const auto j3 = am.jet3(y, 2);
    const auto jx = am.metric_jet(yx, 2);
    CHECK((j3.g - jx.g).cwiseAbs().maxCoeff() < 1e-16);
    for (int c = 0; c < 3; ++c) {
        CHECK((j3.dg[c] - jx.dg[c]).cwiseAbs().maxCoeff() < 1e-16);
        for (int d = 0; d < 3; ++d)
            CHECK((j3.d2g[c][d] - jx.d2g[c][d]).cwiseAbs().maxCoeff() < 1e-16);
    }

    const auto g3 = am.christoffels3(y);
    const auto gx = am.christoffels(yx);
    for (int a = 0; a < 3; ++a) CHECK((g3[a] - gx[a]).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("dimension-four christoffels are symmetric and finite-difference consistent") {
    AmbientMetric<Real> am(3, 1.6);
    VecX y(4);
    y << 1.1, -0.4, 0.8, 1.9;
    const auto gam = am.christoffels(y);
    for (int a = 0; a < 4; ++a)
        CHECK((gam[a] - gam[a].transpose()).cwiseAbs().maxCoeff() < 1e-15);

    // Gamma reproduces d_c g_ab through d_c g_ab = g_am Gam^m_bc + g_bm Gam^m_ac
    const auto jet = am.metric_jet(y, 1);
    for (int c = 0; c < 4; ++c) {
        MatX rec = MatX::Zero(4, 4);
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b)
                for (int m = 0; m < 4; ++m)
                    rec(a, b) += jet.g(a, m) * gam[m](b, c) + jet.g(b, m) * gam[m](a, c);
        CHECK((rec - jet.dg[c]).cwiseAbs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("ricci tensor at frozen points") {
    Ambient am(2, 2.0);

    // y = (2,0,0): diag(-2/9, 1/9, 1/9)
    const Mat3 R0 = am.ricci3(Vec3(2, 0, 0));
    Mat3 want0;
    want0 << -2.0 / 9.0, 0, 0, 0, 1.0 / 9.0, 0, 0, 0, 1.0 / 9.0;
    CHECK((R0 - want0).cwiseAbs().maxCoeff() < 1e-15);

    // a generic point, values frozen from an exact symbolic evaluation
    const Mat3 R1 = am.ricci3(Vec3(1.3, -0.7, 2.1));
    Mat3 want1;
    want1 << 0.014122611329537011, 0.025364953243181605, -0.076094859729544815,
        0.025364953243181605, 0.047570901320545721, 0.040974155238985670,
        -0.076094859729544815, 0.040974155238985670, -0.061693512650082732;
    CHECK((R1 - want1).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("ricci matches the closed form and is scalar flat") {
    for (Real mass : {0.5, 2.0, 3.7}) {
        Ambient am(2, mass);
        for (const Vec3& y :
             {Vec3(2, 0, 0), Vec3(1.3, -0.7, 2.1), Vec3(-0.9, 1.8, -2.4), Vec3(4.0, 4.0, 4.0)}) {
            const Mat3 R = am.ricci3(y);
            CHECK((R - ricci_closed_form(mass, y)).cwiseAbs().maxCoeff() < 1e-14);
            // scalar curvature phi^{-4} tr R vanishes identically
            const Real phi = am.conformal_factor(y.norm());
            CHECK(std::abs(R.trace() / std::pow(phi, 4.0)) < 1e-14);
        }
    }
}

TEST_CASE("ricci is rotation equivariant") {
    Ambient am(2, 1.7);
    const Mat3 Q = (Eigen::AngleAxis<Real>(0.7, Vec3::UnitZ()) *
                    Eigen::AngleAxis<Real>(0.3, Vec3::UnitX()))
                       .toRotationMatrix();
    const Vec3 y(1.9, -1.1, 2.3);
    const Mat3 lhs = am.ricci3(Q * y);
    const Mat3 rhs = Q * am.ricci3(y) * Q.transpose();
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("radial ricci component on the reference sphere") {
    // Ric(nu,nu) = -2m / (r^3 phi^6); at m = 2, r = 3 this is -27/1024
    Ambient am(2, 2.0);
    CHECK(am.ricci_radial_radial(Vec3(3, 0, 0)) == doctest::Approx(-27.0 / 1024.0).epsilon(1e-14));
    CHECK(am.ricci_radial_radial(Vec3(0, 0, -3)) ==
          doctest::Approx(-0.0263671875).epsilon(1e-14));
}

TEST_CASE("quadrupole perturbation jet is finite-difference consistent") {
    const Real mass = 2.0, eps = 1e-2;
    const auto pert = make_quadrupole_perturbation<Real>(mass, eps);
    CHECK(pert.id == "quadrupole");
    CHECK(pert.decay_order == 3);

    // one point past the cutoff, one inside the transition band (1.5, 2)
    const Vec3 mid = 1.75 * Vec3(1, 1, 1).normalized();
    for (const Vec3& y : {Vec3(1.1, 2.4, -1.7), mid}) {
        const auto jet = pert.jet(y);
        const Real h = 1e-3 * y.norm();
        for (int c = 0; c < 3; ++c) {
            const Mat3 fdP = central4([&](const Vec3& z) { return pert.jet(z).P; }, y, c, h);
            CHECK((jet.dP[c] - fdP).cwiseAbs().maxCoeff() < 1e-9);
            for (int d = 0; d < 3; ++d) {
                const Mat3 fdD =
                    central4([&](const Vec3& z) { return pert.jet(z).dP[d]; }, y, c, h);
                CHECK((jet.d2P[c][d] - fdD).cwiseAbs().maxCoeff() < 1e-8);
            }
        }
    }

    // identically zero below the cutoff, r^-3 falloff far out
    CHECK(pert.jet(Vec3(1.4, 0, 0)).P.cwiseAbs().maxCoeff() == 0.0);
    const Real far = pert.jet(Vec3(0, 0, 100)).P(0, 0);
    CHECK(std::abs(far) == doctest::Approx(eps / 1e6).epsilon(1e-12));
}

TEST_CASE("perturbed ricci reduces to the conformal value at zero amplitude") {
    Ambient am(2, 2.0);
    Ambient pam(2, 2.0);
    pam.set_perturbation(make_quadrupole_perturbation<Real>(2.0, 0.0));
    REQUIRE(pam.has_perturbation());
    for (const Vec3& y : {Vec3(3, 0, 0), Vec3(1.3, -0.7, 2.1)}) {
        const Mat3 diff = pam.ricci3(y) - am.ricci3(y);
        CHECK(diff.cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("perturbed ricci agrees with an all-numeric curvature assembly") {
    Ambient am(2, 2.0);
    am.set_perturbation(make_quadrupole_perturbation<Real>(2.0, 1e-2));
    const Vec3 y(1.1, 2.4, -1.7);

    const auto gam = am.christoffels3(y);
    const Real h = 1e-4 * y.norm();
    std::array<std::array<Mat3, 3>, 3> dgam;
    for (int c = 0; c < 3; ++c)
        for (int a = 0; a < 3; ++a)
            dgam[c][a] = central4([&](const Vec3& z) { return am.christoffels3(z)[a]; }, y, c, h);

    Mat3 ref = Mat3::Zero();
    for (int b = 0; b < 3; ++b)
        for (int d = 0; d < 3; ++d) {
            Real v = 0;
            for (int a = 0; a < 3; ++a) {
                v += dgam[a][a](b, d) - dgam[d][a](b, a);
                for (int m = 0; m < 3; ++m)
                    v += gam[a](a, m) * gam[m](b, d) - gam[a](d, m) * gam[m](b, a);
            }
            ref(b, d) = v;
        }

    const Mat3 R = am.ricci3(y);
    CHECK((R - ref).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((R - R.transpose()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("ricci stencil refuses to cross the horizon") {
    Ambient am(2, 2.0);
    am.set_perturbation(make_quadrupole_perturbation<Real>(2.0, 1e-3));
    CHECK_THROWS_AS(am.ricci3(Vec3(1.0 + 1e-6, 0, 0)), DomainError);
}
