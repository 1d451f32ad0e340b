#include "schwarzflow/stability.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>

namespace schwarzflow {

namespace {

// X^c (U^T dg[c] V) summed over the ambient index c
Real contract_dg(const Vec3& X, const std::array<Mat3, 3>& dg, const Vec3& U, const Vec3& V) {
    Real s = 0;
    for (int c = 0; c < 3; ++c) s += X[c] * U.dot(dg[c] * V);
    return s;
}

// columns form an orthonormal basis of the hyperplane c . v = 0, taken from
// the trailing columns of the Householder reflection sending c to the first
// coordinate axis
MatX nullspace_basis(const VecX& c) {
    const int n = int(c.size());
    const Real alpha = c.norm();
    if (!(alpha > 0)) throw PreconditionError("spectrum: constraint vector vanishes");
    VecX v = c;
    v(0) += (v(0) >= 0 ? alpha : -alpha);
    const Real beta = v.squaredNorm();
    MatX Q(n, n - 1);
    for (int j = 1; j < n; ++j) {
        Q.col(j - 1) = -(2 * v(j) / beta) * v;
        Q(j, j - 1) += 1;
    }
    return Q;
}

std::vector<int> degree_hints(const MatX& modes, int L_op) {
    std::vector<int> hints(modes.cols());
    for (int i = 0; i < int(modes.cols()); ++i) {
        int best = 0;
        Real best_e = -1;
        for (int l = 0; l <= L_op; ++l) {
            const Real e = modes.col(i).segment(l * l, 2 * l + 1).squaredNorm();
            if (e > best_e) {
                best_e = e;
                best = l;
            }
        }
        hints[i] = best;
    }
    return hints;
}

}  // namespace

const char* to_string(Variant v) {
    return v == Variant::full ? "full" : "reduced";
}

const char* to_string(Constraint c) {
    switch (c) {
        case Constraint::volume: return "volume";
        case Constraint::area: return "area";
        case Constraint::none: return "none";
    }
    return "unknown";
}

LinearizedOperator assemble(const RadialGraph& graph, const StabilityOptions& opt) {
    const SphericalGrid& grid = *graph.grid;
    const Ambient& am = *graph.metric;
    if (opt.L_op < 1 || opt.L_op > grid.band_limit())
        throw DomainError("assemble: operator degree L_op must lie in [1, grid band limit], got " +
                          std::to_string(opt.L_op));

    GeometryOptions gopt;
    gopt.level = GeomLevel::rhs;
    const GeometryFields f = geometry(graph, gopt);
    const int N = grid.num_nodes();

    const Real havg = weighted_sum(f.H, f.dmu) / f.area;
    const Real dev = (f.H.array() - havg).abs().maxCoeff();
    if (dev > opt.tol_cmc) {
        std::ostringstream os;
        os << "assemble: surface is not CMC to tolerance, max |H - havg| = " << dev << " > "
           << opt.tol_cmc;
        throw PreconditionError(os.str());
    }
    const Real ring = std::sqrt(std::max(f.ring2.maxCoeff(), 0.0));
    if (ring > opt.tol_umbilic) {
        std::ostringstream os;
        os << "assemble: surface is not umbilic to tolerance, max |A - (H/n) g| = " << ring
           << " > " << opt.tol_umbilic;
        throw PreconditionError(os.str());
    }

    // pointwise coefficients of L and the contracted surface Christoffels
    // g^{ij} Gamma^k_ij entering the Laplace-Beltrami operator
    VecX c(N), w(N), P1(N), P2(N);
    for (int k = 0; k < N; ++k) {
        const Vec3 y = f.pos.row(k).transpose();
        const Vec3 nu = f.nu.row(k).transpose();
        const Mat3 ric = am.ricci3(y);
        const Real ricnn = nu.dot(ric * nu);
        c(k) = opt.variant == Variant::full ? ricnn + f.A2(k) : ricnn;
        w(k) = f.H(k) * f.H(k) - f.A2(k) - ricnn;

        const Real th = grid.node_theta(k);
        const Real ph = grid.node_phi(k);
        const Real st = std::sin(th), ct = std::cos(th);
        const Real sp = std::sin(ph), cp = std::cos(ph);
        const Vec3 om(st * cp, st * sp, ct);
        const Vec3 om_t(ct * cp, ct * sp, -st);
        const Vec3 om_p(-st * sp, st * cp, 0);
        const Vec3 om_tp(-ct * sp, ct * cp, 0);
        const Vec3 om_pp(-st * cp, -st * sp, 0);

        const Vec3 Ft = f.F_th.row(k).transpose();
        const Vec3 Fp = f.F_ph.row(k).transpose();
        const Vec3 Ftt = f.rho_tt(k) * om + 2 * f.rho_t(k) * om_t - f.rho(k) * om;
        const Vec3 Ftp = f.rho_tp(k) * om + f.rho_t(k) * om_p + f.rho_p(k) * om_t +
                         f.rho(k) * om_tp;
        const Vec3 Fpp = f.rho_pp(k) * om + 2 * f.rho_p(k) * om_p + f.rho(k) * om_pp;

        const MetricJet3<Real> jet = am.jet3(y, 1);
        const Mat3& g = jet.g;
        const Real d1g11 = 2 * Ftt.dot(g * Ft) + contract_dg(Ft, jet.dg, Ft, Ft);
        const Real d1g12 = Ftt.dot(g * Fp) + Ft.dot(g * Ftp) + contract_dg(Ft, jet.dg, Ft, Fp);
        const Real d1g22 = 2 * Ftp.dot(g * Fp) + contract_dg(Ft, jet.dg, Fp, Fp);
        const Real d2g11 = 2 * Ftp.dot(g * Ft) + contract_dg(Fp, jet.dg, Ft, Ft);
        const Real d2g12 = Ftp.dot(g * Fp) + Ft.dot(g * Fpp) + contract_dg(Fp, jet.dg, Ft, Fp);
        const Real d2g22 = 2 * Fpp.dot(g * Fp) + contract_dg(Fp, jet.dg, Fp, Fp);

        // lowered Christoffels Gamma_{l,ij} of the induced metric
        const Real G111 = 0.5 * d1g11;
        const Real G112 = 0.5 * d2g11;
        const Real G122 = d2g12 - 0.5 * d1g22;
        const Real G211 = d1g12 - 0.5 * d2g11;
        const Real G212 = 0.5 * d1g22;
        const Real G222 = 0.5 * d2g22;

        const Real T1 = f.inv11(k) * G111 + 2 * f.inv12(k) * G112 + f.inv22(k) * G122;
        const Real T2 = f.inv11(k) * G211 + 2 * f.inv12(k) * G212 + f.inv22(k) * G222;
        P1(k) = f.inv11(k) * T1 + f.inv12(k) * T2;
        P2(k) = f.inv12(k) * T1 + f.inv22(k) * T2;
    }

    // harmonic basis and its first and second angular derivatives on the grid
    const int Nc = (opt.L_op + 1) * (opt.L_op + 1);
    MatX B(N, Nc), Bt(N, Nc), Bp(N, Nc), Btt(N, Nc), Btp(N, Nc), Bpp(N, Nc);
    VecX unit = VecX::Zero(grid.num_coeffs());
    for (int j = 0; j < Nc; ++j) {
        unit(j) = 1;
        B.col(j) = grid.synthesize(unit, Deriv::none);
        Bt.col(j) = grid.synthesize(unit, Deriv::dtheta);
        Bp.col(j) = grid.synthesize(unit, Deriv::dphi);
        Btt.col(j) = grid.synthesize(unit, Deriv::dtheta2);
        Btp.col(j) = grid.synthesize(unit, Deriv::dthetaphi);
        Bpp.col(j) = grid.synthesize(unit, Deriv::dphi2);
        unit(j) = 0;
    }

    MatX LB = f.inv11.asDiagonal() * Btt + (2 * f.inv12).asDiagonal() * Btp +
              f.inv22.asDiagonal() * Bpp - P1.asDiagonal() * Bt - P2.asDiagonal() * Bp +
              c.asDiagonal() * B;

    LinearizedOperator op;
    op.L_op = opt.L_op;
    op.variant = opt.variant;
    op.area = f.area;
    const MatX Bw = f.dmu.asDiagonal() * B;  // dmu-weighted test functions
    op.constraint_volume = Bw.transpose() * VecX::Ones(N);
    op.constraint_area = Bw.transpose() * f.H;
    const VecX ws = Bw.transpose() * w;
    MatX M = Bw.transpose() * LB + (1.0 / f.area) * op.constraint_volume * ws.transpose();
    op.asymmetry = (M - M.transpose()).cwiseAbs().maxCoeff();
    op.matrix = 0.5 * (M + M.transpose());
    MatX G = Bw.transpose() * B;
    op.gram = 0.5 * (G + G.transpose());
    return op;
}

SpectrumReport spectrum(const LinearizedOperator& op, Constraint constraint) {
    if (op.matrix.rows() == 0) throw PreconditionError("spectrum: operator is not assembled");
    SpectrumReport rep;
    rep.constraint = constraint;
    rep.variant = op.variant;
    rep.L_op = op.L_op;
    rep.l0_eigenvalue = op.matrix(0, 0) / op.gram(0, 0);

    if (constraint == Constraint::none) {
        Eigen::GeneralizedSelfAdjointEigenSolver<MatX> es(op.matrix, op.gram);
        if (es.info() != Eigen::Success) throw Error("spectrum: eigensolver failed");
        rep.eigenvalues = es.eigenvalues();
        rep.modes = es.eigenvectors();
    } else {
        const VecX& cvec = constraint == Constraint::volume ? op.constraint_volume
                                                           : op.constraint_area;
        const MatX Q = nullspace_basis(cvec);
        Eigen::GeneralizedSelfAdjointEigenSolver<MatX> es(Q.transpose() * op.matrix * Q,
                                                          Q.transpose() * op.gram * Q);
        if (es.info() != Eigen::Success) throw Error("spectrum: eigensolver failed");
        rep.eigenvalues = es.eigenvalues();
        rep.modes = Q * es.eigenvectors();
    }
    rep.degree_hint = degree_hints(rep.modes, op.L_op);

    if (constraint == Constraint::none) {
        bool found = false;
        for (int i = int(rep.eigenvalues.size()) - 1; i >= 0; --i) {
            if (rep.degree_hint[i] != 0) {
                rep.predicted_rate = -rep.eigenvalues(i);
                found = true;
                break;
            }
        }
        if (!found) rep.predicted_rate = -rep.eigenvalues(rep.eigenvalues.size() - 1);
    } else {
        rep.predicted_rate = -rep.eigenvalues(rep.eigenvalues.size() - 1);
    }
    return rep;
}

Real rate_for_degree(const SpectrumReport& report, int l) {
    bool found = false;
    Real top = 0;
    for (int i = 0; i < int(report.eigenvalues.size()); ++i) {
        if (report.degree_hint[i] != l) continue;
        if (!found || report.eigenvalues(i) > top) top = report.eigenvalues(i);
        found = true;
    }
    if (!found)
        throw DomainError("rate_for_degree: no mode with dominant degree " + std::to_string(l));
    return -top;
}

Real compare_rates(const SpectrumReport& report, const RateFit& observed,
                   std::optional<int> degree) {
    if (observed.r2 < 0.99) {
        std::ostringstream os;
        os << "compare_rates: fit quality r2 = " << observed.r2 << " below 0.99";
        throw PreconditionError(os.str());
    }
    const Real rate = degree ? rate_for_degree(report, *degree) : report.predicted_rate;
    if (rate <= 0)
        throw DomainError(
            "compare_rates: predicted rate is not positive; a neutral or unstable mode "
            "dominates");
    return std::abs(rate - observed.lambda) / rate;
}

}  // namespace schwarzflow
