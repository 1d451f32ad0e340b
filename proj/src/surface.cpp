#include "schwarzflow/surface.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace schwarzflow {

namespace {

constexpr Real kPi = 3.14159265358979323846;

void check_graph_inputs(const RadialGraph& g) {
    if (!g.grid || !g.metric) throw PreconditionError("RadialGraph: grid and metric must be set");
    if (g.metric->n() != 2)
        throw PreconditionError("RadialGraph: the spatial discretization requires n = 2");
    if (g.rho.size() != g.grid->num_nodes())
        throw PreconditionError("RadialGraph: rho size does not match the grid");
}

std::string node_label(const SphericalGrid& grid, int node) {
    std::ostringstream os;
    os << "node " << node << " (theta = " << grid.node_theta(node)
       << ", phi = " << grid.node_phi(node) << ")";
    return os.str();
}

// sqrt(det gbar) at radius s along direction omega
Real ambient_density(const Ambient& am, Real s, const Vec3& omega) {
    const Real phi = am.conformal_factor(s);
    if (!am.has_perturbation()) {
        // det(phi^4 I) = phi^12 for n = 2
        const Real p2 = phi * phi;
        return p2 * p2 * p2;
    }
    const Vec3 y = s * omega;
    Mat3 G = (phi * phi * phi * phi) * Mat3::Identity();
    G += am.perturbation().jet(y).P;
    const Real det = G.determinant();
    if (det <= 0) throw DomainError("enclosed_volume: ambient metric not positive definite");
    return std::sqrt(det);
}

// 15-point Gauss-Legendre on [a, b]
struct GL15 {
    static constexpr int N = 8;  // nonnegative nodes
    static constexpr Real x[N] = {
        0.0,
        0.20119409399743452230062830339460,
        0.39415134707756336989720737098105,
        0.57097217260853884753722673725391,
        0.72441773136017004741618605461394,
        0.84820658341042721620064832077422,
        0.93727339240070590430775894771021,
        0.98799251802048542848956571858661};
    static constexpr Real w[N] = {
        0.20257824192556127288062019996752,
        0.19843148532711157645611832644384,
        0.18616100001556221102680056186642,
        0.16626920581699393355320086048121,
        0.13957067792615431444780479451103,
        0.10715922046717193501186954668587,
        0.07036604748810812470926741645067,
        0.03075324199611726835462839357720};
};

template <class F>
Real gl15(const F& f, Real a, Real b) {
    const Real c = 0.5 * (a + b), h = 0.5 * (b - a);
    Real s = GL15::w[0] * f(c);
    for (int i = 1; i < GL15::N; ++i)
        s += GL15::w[i] * (f(c - h * GL15::x[i]) + f(c + h * GL15::x[i]));
    return s * h;
}

template <class F>
Real adaptive_gl(const F& f, Real a, Real b, Real whole, Real tol, int depth) {
    const Real mid = 0.5 * (a + b);
    const Real left = gl15(f, a, mid), right = gl15(f, mid, b);
    const Real refined = left + right;
    if (std::abs(refined - whole) <= tol || depth >= 40) {
        if (depth >= 40 && std::abs(refined - whole) > tol)
            throw DomainError("adaptive quadrature failed to reach the requested tolerance");
        return refined;
    }
    return adaptive_gl(f, a, mid, left, 0.5 * tol, depth + 1) +
           adaptive_gl(f, mid, b, right, 0.5 * tol, depth + 1);
}

template <class F>
Real integrate_adaptive(const F& f, Real a, Real b, Real rel_tol) {
    if (b <= a) return 0;
    const Real rough = gl15(f, a, b);
    const Real tol = rel_tol * std::max(std::abs(rough), Real(1e-300));
    return adaptive_gl(f, a, b, rough, tol, 0);
}

}  // namespace

RadialGraph make_sphere(std::shared_ptr<const SphericalGrid> grid,
                        std::shared_ptr<const Ambient> metric, Real r0) {
    if (!grid || !metric) throw PreconditionError("make_sphere: grid and metric must be set");
    if (metric->n() != 2) throw PreconditionError("make_sphere: grid surfaces require n = 2");
    if (!(r0 > metric->horizon_radius())) {
        std::ostringstream os;
        os << "make_sphere: r0 = " << r0 << " must exceed the horizon radius "
           << metric->horizon_radius();
        throw DomainError(os.str());
    }
    RadialGraph g;
    g.grid = std::move(grid);
    g.metric = std::move(metric);
    g.rho = VecX::Constant(g.grid->num_nodes(), r0);
    return g;
}

RadialGraph perturb(const RadialGraph& graph, int l, int m, Real eps) {
    check_graph_inputs(graph);
    if (l > graph.grid->band_limit())
        throw PreconditionError("perturb: mode degree exceeds the grid band limit");
    const VecX Y = graph.grid->basis_field(l, m);
    const Real ymax = real_harmonic_max(l, m);
    RadialGraph out = graph;
    out.rho = graph.rho.cwiseProduct(VecX::Ones(Y.size()) + (eps / ymax) * Y);
    const Real rh = graph.metric->horizon_radius();
    int worst = 0;
    const Real rmin = out.rho.minCoeff(&worst);
    if (!(rmin > rh)) {
        std::ostringstream os;
        os << "perturb: surface reaches the horizon (rho = " << rmin << ", horizon = " << rh
           << ") at " << node_label(*graph.grid, worst);
        throw DomainError(os.str());
    }
    return out;
}

GeometryFields geometry(const RadialGraph& graph, const GeometryOptions& opt) {
    check_graph_inputs(graph);
    const SphericalGrid& grid = *graph.grid;
    const Ambient& am = *graph.metric;
    const int N = grid.num_nodes();
    const int nphi = grid.nphi();

    GeometryFields f;
    const VecX a = grid.analyze(graph.rho);
    f.rho = grid.synthesize(a);
    f.rho_t = grid.synthesize(a, Deriv::dtheta);
    f.rho_p = grid.synthesize(a, Deriv::dphi);
    f.rho_tt = grid.synthesize(a, Deriv::dtheta2);
    f.rho_tp = grid.synthesize(a, Deriv::dthetaphi);
    f.rho_pp = grid.synthesize(a, Deriv::dphi2);

    for (int k = 0; k < N; ++k)
        if (!std::isfinite(f.rho[k]))
            throw DomainError("geometry: non-finite radius at " + node_label(grid, k));
    {
        int worst = 0;
        const Real rmin = f.rho.minCoeff(&worst);
        if (!(rmin > am.horizon_radius())) {
            std::ostringstream os;
            os << "geometry: surface reaches the horizon (rho = " << rmin
               << ", horizon = " << am.horizon_radius() << ") at " << node_label(grid, worst);
            throw DomainError(os.str());
        }
    }

    f.pos.resize(N, 3);
    f.F_th.resize(N, 3);
    f.F_ph.resize(N, 3);
    f.nu.resize(N, 3);
    f.g11.resize(N);
    f.g12.resize(N);
    f.g22.resize(N);
    f.inv11.resize(N);
    f.inv12.resize(N);
    f.inv22.resize(N);
    f.sqrt_det_g.resize(N);
    f.dmu.resize(N);
    f.chi.resize(N);
    f.A11.resize(N);
    f.A12.resize(N);
    f.A22.resize(N);
    f.H.resize(N);
    f.A2.resize(N);
    f.ring2.resize(N);

    const bool conformal = !am.has_perturbation();
    const Real mass = am.mass();
    const VecX& wgl = grid.gl_weights();
    const Real wphi = grid.phi_weight();

    Real chi_min = std::numeric_limits<Real>::infinity();
    int chi_worst = -1;

    for (int k = 0; k < N; ++k) {
        const int i = k / nphi, j = k % nphi;
        const Real st = grid.sin_theta()[i], ct = std::cos(grid.theta()[i]);
        const Real cp = std::cos(grid.phi()[j]), sp = std::sin(grid.phi()[j]);
        const Vec3 om(st * cp, st * sp, ct);
        const Vec3 om_t(ct * cp, ct * sp, -st);
        const Vec3 om_p(-st * sp, st * cp, 0.0);
        const Vec3 om_tp(-ct * sp, ct * cp, 0.0);
        const Vec3 om_pp(-st * cp, -st * sp, 0.0);

        const Real rho = f.rho[k];
        const Vec3 y = rho * om;
        const Vec3 Ft = f.rho_t[k] * om + rho * om_t;
        const Vec3 Fp = f.rho_p[k] * om + rho * om_p;
        const Vec3 dFtt = f.rho_tt[k] * om + 2 * f.rho_t[k] * om_t - rho * om;
        const Vec3 dFtp = f.rho_tp[k] * om + f.rho_t[k] * om_p + f.rho_p[k] * om_t + rho * om_tp;
        const Vec3 dFpp = f.rho_pp[k] * om + 2 * f.rho_p[k] * om_p + rho * om_pp;

        const Vec3 c = Ft.cross(Fp);  // gbar-orthogonal covector direction

        Real g11, g12, g22, chi;
        Vec3 nu, b;  // b_a = gbar_ab nu^b, so A_ij = -b . (dF_ij + Gamma(F_i, F_j))
        Real gam_t[3];  // b . Gamma(F_i, F_j) for (tt, tp, pp)

        if (conformal) {
            const Real r = rho;  // |y| = rho for radial graphs
            const Real ir = 1.0 / r;
            const Real phi = 1.0 + 0.5 * mass * ir;
            const Real phi2 = phi * phi;
            const Real p4 = phi2 * phi2;
            g11 = p4 * Ft.dot(Ft);
            g12 = p4 * Ft.dot(Fp);
            g22 = p4 * Fp.dot(Fp);
            const Real cn = c.norm();
            if (cn == 0) {
                chi = 0;
                nu.setZero();
                b.setZero();
                gam_t[0] = gam_t[1] = gam_t[2] = 0;
            } else {
                nu = c / (phi2 * cn);
                b = (phi2 / cn) * c;
                chi = om.dot(b);
                // conformal connection: Gamma(U,V) = U (w.V) + V (w.U) - (U.V) w,
                // w = 2 dphi/phi, dphi = -(m/2) y / r^3
                const Vec3 w = (-mass * ir * ir * ir / phi) * y;
                const Real wFt = w.dot(Ft), wFp = w.dot(Fp), wb = w.dot(b);
                const Real bFt = b.dot(Ft), bFp = b.dot(Fp);
                gam_t[0] = 2 * bFt * wFt - Ft.dot(Ft) * wb;
                gam_t[1] = bFt * wFp + bFp * wFt - Ft.dot(Fp) * wb;
                gam_t[2] = 2 * bFp * wFp - Fp.dot(Fp) * wb;
            }
            if (chi > opt.eps_graph) {
                f.A11[k] = -b.dot(dFtt) - gam_t[0];
                f.A12[k] = -b.dot(dFtp) - gam_t[1];
                f.A22[k] = -b.dot(dFpp) - gam_t[2];
            }
        } else {
            const MetricJet3<Real> jet = am.jet3(y, 1);
            const Mat3& G = jet.g;
            const Mat3 Ginv = G.inverse();
            g11 = Ft.dot(G * Ft);
            g12 = Ft.dot(G * Fp);
            g22 = Fp.dot(G * Fp);
            const Real nrm2 = c.dot(Ginv * c);
            if (!(nrm2 > 0)) {
                chi = 0;
                nu.setZero();
                b.setZero();
                gam_t[0] = gam_t[1] = gam_t[2] = 0;
            } else {
                const Real nrm = std::sqrt(nrm2);
                b = c / nrm;
                nu = Ginv * b;
                chi = om.dot(b);
                // Gamma(U,V) = Ginv M(U,V); A needs nu . M
                const Mat3 Dt = Ft[0] * jet.dg[0] + Ft[1] * jet.dg[1] + Ft[2] * jet.dg[2];
                const Mat3 Dp = Fp[0] * jet.dg[0] + Fp[1] * jet.dg[1] + Fp[2] * jet.dg[2];
                Vec3 q;
                for (int mu = 0; mu < 3; ++mu) q[mu] = Ft.dot(jet.dg[mu] * Ft);
                const Vec3 Mtt = Dt * Ft - 0.5 * q;
                for (int mu = 0; mu < 3; ++mu) q[mu] = Ft.dot(jet.dg[mu] * Fp);
                const Vec3 Mtp = 0.5 * (Dt * Fp + Dp * Ft - q);
                for (int mu = 0; mu < 3; ++mu) q[mu] = Fp.dot(jet.dg[mu] * Fp);
                const Vec3 Mpp = Dp * Fp - 0.5 * q;
                gam_t[0] = nu.dot(Mtt);
                gam_t[1] = nu.dot(Mtp);
                gam_t[2] = nu.dot(Mpp);
            }
            if (chi > opt.eps_graph) {
                f.A11[k] = -b.dot(dFtt) - gam_t[0];
                f.A12[k] = -b.dot(dFtp) - gam_t[1];
                f.A22[k] = -b.dot(dFpp) - gam_t[2];
            }
        }

        if (chi_worst < 0 || chi < chi_min || std::isnan(chi)) {
            chi_min = chi;
            chi_worst = k;
        }

        f.pos.row(k) = y;
        f.F_th.row(k) = Ft;
        f.F_ph.row(k) = Fp;
        f.nu.row(k) = nu;
        f.g11[k] = g11;
        f.g12[k] = g12;
        f.g22[k] = g22;
        f.chi[k] = chi;
    }

    if (!(chi_min > opt.eps_graph)) {
        std::ostringstream os;
        os << "graph condition failed: chi = " << chi_min << " <= eps_graph = " << opt.eps_graph
           << " at " << node_label(grid, chi_worst);
        throw GraphConditionError(os.str(), chi_worst, grid.node_theta(chi_worst),
                                  grid.node_phi(chi_worst), chi_min);
    }

    if (opt.level == GeomLevel::full) {
        f.kappa1.resize(N);
        f.kappa2.resize(N);
    }
    for (int k = 0; k < N; ++k) {
        const int i = k / nphi;
        const Real det = f.g11[k] * f.g22[k] - f.g12[k] * f.g12[k];
        const Real idet = 1.0 / det;
        f.inv11[k] = f.g22[k] * idet;
        f.inv12[k] = -f.g12[k] * idet;
        f.inv22[k] = f.g11[k] * idet;
        f.sqrt_det_g[k] = std::sqrt(det);
        f.dmu[k] = f.sqrt_det_g[k] / grid.sin_theta()[i] * wgl[i] * wphi;
        f.H[k] = (f.g22[k] * f.A11[k] - 2 * f.g12[k] * f.A12[k] + f.g11[k] * f.A22[k]) * idet;
        // second fundamental form in an orthonormal tangent frame; its
        // discriminant is a sum of squares, so |A|^2, |ring A|^2, and the
        // principal curvatures stay accurate at umbilic points where the
        // H^2 - 4 det S route cancels catastrophically
        const Real q12 = f.g12[k] / f.g11[k];
        const Real schur = f.g22[k] - f.g12[k] * q12;
        const Real oa = f.A11[k] / f.g11[k];
        const Real ob = (f.A12[k] - q12 * f.A11[k]) / std::sqrt(f.g11[k] * schur);
        const Real oc = (f.A22[k] - 2 * q12 * f.A12[k] + q12 * q12 * f.A11[k]) / schur;
        f.A2[k] = oa * oa + 2 * ob * ob + oc * oc;
        f.ring2[k] = 0.5 * ((oa - oc) * (oa - oc) + 4 * ob * ob);
        if (opt.level == GeomLevel::full) {
            const Real rt = std::hypot(oa - oc, 2 * ob);
            f.kappa1[k] = 0.5 * (oa + oc - rt);
            f.kappa2[k] = 0.5 * (oa + oc + rt);
        }
    }
    f.area = pairwise_sum(f.dmu);

    if (opt.level == GeomLevel::full) {
        const VecX aH = grid.analyze(f.H);
        const VecX Ht = grid.synthesize(aH, Deriv::dtheta);
        const VecX Hp = grid.synthesize(aH, Deriv::dphi);
        f.gradH2.resize(N);
        for (int k = 0; k < N; ++k)
            f.gradH2[k] = f.inv11[k] * Ht[k] * Ht[k] + 2 * f.inv12[k] * Ht[k] * Hp[k] +
                          f.inv22[k] * Hp[k] * Hp[k];
    }
    return f;
}

Real area(const RadialGraph& graph) {
    GeometryOptions opt;
    opt.level = GeomLevel::rhs;
    return geometry(graph, opt).area;
}

Real volume_radial_density(const Ambient& am, Real s, const Vec3& omega) {
    return ambient_density(am, s, omega) * s * s;
}

Real enclosed_volume(const RadialGraph& graph, Real rel_tol) {
    check_graph_inputs(graph);
    const SphericalGrid& grid = *graph.grid;
    const Ambient& am = *graph.metric;
    const Real rh = am.horizon_radius();
    // integrate the band-limited radius geometry() works with
    const VecX rho = grid.synthesize(grid.analyze(graph.rho));
    const int N = grid.num_nodes();
    const int nphi = grid.nphi();
    VecX contrib(N);
    for (int k = 0; k < N; ++k) {
        const int i = k / nphi, j = k % nphi;
        const Real st = grid.sin_theta()[i], ct = std::cos(grid.theta()[i]);
        const Real cp = std::cos(grid.phi()[j]), sp = std::sin(grid.phi()[j]);
        const Vec3 om(st * cp, st * sp, ct);
        if (!(rho[k] > rh))
            throw DomainError("enclosed_volume: surface reaches the horizon at " +
                              node_label(grid, k));
        auto f = [&](Real s) { return ambient_density(am, s, om) * s * s; };
        contrib[k] = grid.quad_weights()[k] * integrate_adaptive(f, rh, rho[k], rel_tol);
    }
    return pairwise_sum(contrib);
}

IsoperimetricReport isoperimetric_ratio(const RadialGraph& graph) {
    IsoperimetricReport rep;
    rep.area = area(graph);
    rep.volume = enclosed_volume(graph);
    const int n = graph.metric->n();
    rep.ratio = std::pow(rep.area, n + 1) / std::pow(rep.volume, n);
    return rep;
}

namespace {

Real sphere_radius_solve(std::shared_ptr<const Ambient> metric, Real target,
                         const std::function<Real(Real)>& value, const char* what) {
    if (!(target > 0)) throw DomainError(std::string(what) + ": target must be positive");
    const Real rh = metric->horizon_radius();
    Real lo = rh, hi = std::max(2 * rh, 1.0);
    while (value(hi) < target) {
        hi *= 2;
        if (hi > 1e12) throw DomainError(std::string(what) + ": target out of reachable range");
    }
    // bisection until the bracket is tighter than the documented 1e-12
    for (int it = 0; it < 200 && (hi - lo) > 1e-13 * hi; ++it) {
        const Real mid = 0.5 * (lo + hi);
        if (mid <= rh) {
            lo = mid;
            continue;
        }
        if (value(mid) < target)
            lo = mid;
        else
            hi = mid;
    }
    const Real r = 0.5 * (lo + hi);
    bool ok = false;
    try {
        ok = std::abs(value(r) - target) <= 1e-8 * target;
    } catch (const Error&) {
    }
    if (!ok) throw DomainError(std::string(what) + ": no coordinate sphere attains the target");
    return r;
}

}  // namespace

Real sphere_of_volume(std::shared_ptr<const SphericalGrid> grid,
                      std::shared_ptr<const Ambient> metric, Real volume) {
    auto value = [&](Real r) {
        return enclosed_volume(make_sphere(grid, metric, r), 1e-12);
    };
    return sphere_radius_solve(metric, volume, value, "sphere_of_volume");
}

Real sphere_of_area(std::shared_ptr<const SphericalGrid> grid,
                    std::shared_ptr<const Ambient> metric, Real target_area) {
    auto value = [&](Real r) { return area(make_sphere(grid, metric, r)); };
    return sphere_radius_solve(metric, target_area, value, "sphere_of_area");
}

VariationReport variation_check(const RadialGraph& graph, const VecX& psi, Real eps_fd) {
    check_graph_inputs(graph);
    if (psi.size() != graph.rho.size())
        throw PreconditionError("variation_check: psi size does not match the grid");
    RadialGraph plus = graph, minus = graph;
    plus.rho += eps_fd * psi;
    minus.rho -= eps_fd * psi;
    VariationReport rep;
    rep.finite_difference = (area(plus) - area(minus)) / (2 * eps_fd);
    GeometryOptions opt;
    opt.level = GeomLevel::rhs;
    const GeometryFields f = geometry(graph, opt);
    VecX integrand = f.H.cwiseProduct(psi).cwiseProduct(f.chi).cwiseProduct(f.dmu);
    rep.analytic = pairwise_sum(integrand);
    return rep;
}

void write_snapshot(const std::string& path, const RadialGraph& graph) {
    check_graph_inputs(graph);
    std::ofstream out(path);
    if (!out) throw Error("cannot open snapshot file for writing: " + path);
    out << "theta,phi,rho\n";
    char buf[96];
    const int N = graph.grid->num_nodes();
    for (int k = 0; k < N; ++k) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", graph.grid->node_theta(k),
                      graph.grid->node_phi(k), graph.rho[k]);
        out << buf;
    }
    if (!out) throw Error("failed while writing snapshot file: " + path);
}

RadialGraph read_snapshot(const std::string& path, std::shared_ptr<const SphericalGrid> grid,
                          std::shared_ptr<const Ambient> metric) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open snapshot file: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "theta,phi,rho")
        throw Error("snapshot file has unexpected header: " + path);
    RadialGraph g;
    g.grid = std::move(grid);
    g.metric = std::move(metric);
    const int N = g.grid->num_nodes();
    g.rho.resize(N);
    for (int k = 0; k < N; ++k) {
        if (!std::getline(in, line))
            throw Error("snapshot file truncated (expected " + std::to_string(N) + " rows): " +
                        path);
        double th, ph, rho;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &th, &ph, &rho) != 3)
            throw Error("snapshot file has a malformed row: " + path);
        if (std::abs(th - g.grid->node_theta(k)) > 1e-9 ||
            std::abs(ph - g.grid->node_phi(k)) > 1e-9)
            throw Error("snapshot node angles do not match the configured grid: " + path);
        g.rho[k] = rho;
    }
    if (std::getline(in, line) && !line.empty())
        throw Error("snapshot file has trailing rows beyond the grid size: " + path);
    return g;
}

}  // namespace schwarzflow
