#pragma once

// Ambient geometry: conformally flat Schwarzschild metric of mass m on
// R^{n+1} minus the horizon ball, plus optional decaying perturbations.
//
//   gbar_ab = phi^{4/(n-1)} delta_ab + P_ab,   phi(r) = 1 + m / (2 r^{n-1})
//
// Closed forms are templated on the scalar so tests can instantiate them at
// higher precision; the flow pipeline uses the double specialization.

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "schwarzflow/core.hpp"

namespace schwarzflow {

// ====== perturbation interface ======

template <class S>
struct PerturbationJet {
    using M3 = Eigen::Matrix<S, 3, 3>;
    M3 P = M3::Zero();
    std::array<M3, 3> dP{M3::Zero(), M3::Zero(), M3::Zero()};  // dP[c](a,b) = d_c P_ab
    std::array<std::array<M3, 3>, 3> d2P{};                    // d2P[c][d](a,b) = d_c d_d P_ab
};

// A metric perturbation P_ab with two derivatives and a declared falloff
// |P| = O(r^-decay_order). Only the n = 2 (ambient dimension 3) pipeline
// supports perturbed metrics.
template <class S>
struct Perturbation {
    std::function<PerturbationJet<S>(const Eigen::Matrix<S, 3, 1>&)> jet;
    int decay_order = 0;
    std::string id = "custom";
};

// ====== scalar closed forms ======

template <class S>
S schw_conformal_factor(int n, S mass, S r) {
    if (n < 2) throw DomainError("conformal_factor: hypersurface dimension n must be >= 2");
    if (mass < S(0)) throw DomainError("conformal_factor: mass must be nonnegative");
    if (!(r > S(0))) throw DomainError("conformal_factor: radius must be positive");
    using std::pow;
    return S(1) + mass / (S(2) * pow(r, S(n - 1)));
}

template <class S>
S schw_horizon_radius(int n, S mass) {
    if (n < 2) throw DomainError("horizon_radius: hypersurface dimension n must be >= 2");
    if (mass < S(0)) throw DomainError("horizon_radius: mass must be nonnegative");
    if (mass == S(0)) return S(0);
    using std::pow;
    return pow(mass / S(2), S(1) / S(n - 1));
}

// ====== jets ======

template <class S>
struct PhiJet3 {
    S phi;
    Eigen::Matrix<S, 3, 1> dphi;
    Eigen::Matrix<S, 3, 3> d2phi;
};

template <class S>
struct MetricJet3 {
    using M3 = Eigen::Matrix<S, 3, 3>;
    M3 g;
    std::array<M3, 3> dg;                    // dg[c](a,b) = d_c g_ab
    std::array<std::array<M3, 3>, 3> d2g{};  // d2g[c][d](a,b)
    bool has_d2 = false;
};

// Dynamic-dimension jet for general n; the grid pipeline never touches this.
template <class S>
struct MetricJetX {
    using MX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
    MX g;
    std::vector<MX> dg;
    std::vector<std::vector<MX>> d2g;
    bool has_d2 = false;
};

// ====== ambient metric ======

template <class S>
class AmbientMetric {
public:
    using V3 = Eigen::Matrix<S, 3, 1>;
    using M3 = Eigen::Matrix<S, 3, 3>;
    using VX = Eigen::Matrix<S, Eigen::Dynamic, 1>;
    using MX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

    AmbientMetric(int n, S mass) : n_(n), mass_(mass) {
        if (n < 2) throw DomainError("AmbientMetric: hypersurface dimension n must be >= 2");
        if (mass < S(0)) throw DomainError("AmbientMetric: mass must be nonnegative");
        horizon_ = schw_horizon_radius<S>(n, mass);
        // metric exponent q: gbar = phi^q delta
        q_ = S(4) / S(n - 1);
    }

    int n() const { return n_; }
    S mass() const { return mass_; }
    S horizon_radius() const { return horizon_; }
    S conformal_factor(S r) const { return schw_conformal_factor<S>(n_, mass_, r); }

    void set_perturbation(Perturbation<S> p) {
        if (n_ != 2)
            throw DomainError("set_perturbation: perturbed metrics are implemented for n = 2 only");
        pert_ = std::move(p);
    }
    bool has_perturbation() const { return pert_.has_value(); }
    const Perturbation<S>& perturbation() const { return *pert_; }

    // --- scalar radial jets -------------------------------------------------
    // phi = 1 + (m/2) r^{1-n};  phi' = (m/2)(1-n) r^{-n};  phi'' = (m/2)(1-n)(-n) r^{-n-1}

    S phi_radial(S r) const { return conformal_factor(r); }

    // --- Cartesian phi jet, ambient dimension 3 -----------------------------
    // d_a phi = c r^{-n-1} y_a,  d_a d_b phi = c [ delta_ab r^{-n-1} + (-n-1) y_a y_b r^{-n-3} ]
    // with c = (m/2)(1-n).

    PhiJet3<S> phi_jet(const V3& y) const {
        check_point(y);
        using std::pow;
        const S r = y.norm();
        const S c = mass_ / S(2) * S(1 - n_);
        const S rn = pow(r, S(-n_));
        PhiJet3<S> j;
        j.phi = S(1) + mass_ / S(2) * pow(r, S(1 - n_));
        j.dphi = (c * rn / r) * y;
        j.d2phi = c * rn / r * M3::Identity() + c * S(-n_ - 1) * rn / (r * r * r) * y * y.transpose();
        return j;
    }

    // --- full metric jet, ambient dimension 3 (n = 2) -----------------------

    MetricJet3<S> jet3(const V3& y, int order = 1) const {
        require_n2("jet3");
        check_point(y);
        MetricJet3<S> out;
        const PhiJet3<S> pj = phi_jet(y);
        const S phi = pj.phi;
        using std::pow;
        const S pq = pow(phi, q_);
        const S pq1 = q_ * pow(phi, q_ - S(1));
        out.g = pq * M3::Identity();
        for (int c = 0; c < 3; ++c) out.dg[c] = pq1 * pj.dphi[c] * M3::Identity();
        if (order >= 2) {
            const S pq2 = q_ * (q_ - S(1)) * pow(phi, q_ - S(2));
            for (int c = 0; c < 3; ++c)
                for (int d = 0; d < 3; ++d)
                    out.d2g[c][d] =
                        (pq2 * pj.dphi[c] * pj.dphi[d] + pq1 * pj.d2phi(c, d)) * M3::Identity();
            out.has_d2 = true;
        }
        if (pert_) {
            const PerturbationJet<S> pp = pert_->jet(y);
            out.g += pp.P;
            for (int c = 0; c < 3; ++c) out.dg[c] += pp.dP[c];
            if (order >= 2)
                for (int c = 0; c < 3; ++c)
                    for (int d = 0; d < 3; ++d) out.d2g[c][d] += pp.d2P[c][d];
        }
        return out;
    }

    // --- general-dimension metric jet (conformal part only) -----------------

    MetricJetX<S> metric_jet(const VX& y, int order = 1) const {
        check_point(y);
        if (pert_ && y.size() != 3)
            throw DomainError("metric_jet: perturbed metrics require ambient dimension 3");
        const int d = int(y.size());
        using std::pow;
        const S r = y.norm();
        const S phi = S(1) + mass_ / S(2) * pow(r, S(1 - n_));
        const S c1 = mass_ / S(2) * S(1 - n_);
        const S rn = pow(r, S(-n_));
        VX dphi = (c1 * rn / r) * y;
        MetricJetX<S> out;
        const S pq = pow(phi, q_);
        const S pq1 = q_ * pow(phi, q_ - S(1));
        out.g = pq * MX::Identity(d, d);
        out.dg.resize(d);
        for (int c = 0; c < d; ++c) out.dg[c] = pq1 * dphi[c] * MX::Identity(d, d);
        if (order >= 2) {
            MX d2phi = c1 * rn / r * MX::Identity(d, d) +
                       c1 * S(-n_ - 1) * rn / (r * r * r) * y * y.transpose();
            const S pq2 = q_ * (q_ - S(1)) * pow(phi, q_ - S(2));
            out.d2g.assign(d, std::vector<MX>(d));
            for (int c = 0; c < d; ++c)
                for (int e = 0; e < d; ++e)
                    out.d2g[c][e] = (pq2 * dphi[c] * dphi[e] + pq1 * d2phi(c, e)) * MX::Identity(d, d);
            out.has_d2 = true;
        }
        if (pert_ && y.size() == 3) {
            const PerturbationJet<S> pp = pert_->jet(V3(y[0], y[1], y[2]));
            out.g += pp.P;
            for (int c = 0; c < 3; ++c) out.dg[c] += pp.dP[c];
            if (order >= 2)
                for (int c = 0; c < 3; ++c)
                    for (int e = 0; e < 3; ++e) out.d2g[c][e] += pp.d2P[c][e];
        }
        return out;
    }

    // --- Christoffel symbols ------------------------------------------------
    // Gamma^a_bc = (1/2) g^{am} (d_b g_mc + d_c g_mb - d_m g_bc)

    std::array<M3, 3> christoffels3(const V3& y) const {
        require_n2("christoffels3");
        const MetricJet3<S> j = jet3(y, 1);
        const M3 ginv = j.g.inverse();
        std::array<M3, 3> gam;
        for (int a = 0; a < 3; ++a) gam[a].setZero();
        for (int b = 0; b < 3; ++b)
            for (int c = 0; c < 3; ++c) {
                V3 lower;
                for (int mu = 0; mu < 3; ++mu)
                    lower[mu] = S(0.5) * (j.dg[b](mu, c) + j.dg[c](mu, b) - j.dg[mu](b, c));
                const V3 up = ginv * lower;
                for (int a = 0; a < 3; ++a) gam[a](b, c) = up[a];
            }
        return gam;
    }

    std::vector<MX> christoffels(const VX& y) const {
        const MetricJetX<S> j = metric_jet(y, 1);
        const int d = int(y.size());
        const MX ginv = j.g.inverse();
        std::vector<MX> gam(d, MX::Zero(d, d));
        for (int b = 0; b < d; ++b)
            for (int c = 0; c < d; ++c) {
                VX lower(d);
                for (int mu = 0; mu < d; ++mu)
                    lower[mu] = S(0.5) * (j.dg[b](mu, c) + j.dg[c](mu, b) - j.dg[mu](b, c));
                const VX up = ginv * lower;
                for (int a = 0; a < d; ++a) gam[a](b, c) = up[a];
            }
        return gam;
    }

    // --- conformal connection in closed form (flat indices) -----------------
    // For gbar = e^{2w} delta:  Gamma^a_bc = delta^a_b w_c + delta^a_c w_b - delta_bc w_a
    // with w = (q/2) log phi, so  w_a = (q/2) phi_a / phi.

    V3 conformal_w_grad(const PhiJet3<S>& pj) const { return (q_ / S(2)) * pj.dphi / pj.phi; }

    M3 conformal_w_hess(const PhiJet3<S>& pj) const {
        return (q_ / S(2)) *
               (pj.d2phi / pj.phi - pj.dphi * pj.dphi.transpose() / (pj.phi * pj.phi));
    }

    // Gamma(U,V)^a contracted against two vectors, avoiding the 27 components.
    static V3 conformal_gamma_contract(const V3& w, const V3& U, const V3& V) {
        return U * w.dot(V) + V * w.dot(U) - U.dot(V) * w;
    }

    std::array<M3, 3> conformal_christoffels3(const V3& y) const {
        require_n2("conformal_christoffels3");
        const V3 w = conformal_w_grad(phi_jet(y));
        std::array<M3, 3> gam;
        for (int a = 0; a < 3; ++a) {
            gam[a].setZero();
            for (int b = 0; b < 3; ++b)
                for (int c = 0; c < 3; ++c) {
                    S v = S(0);
                    if (a == b) v += w[c];
                    if (a == c) v += w[b];
                    if (b == c) v -= w[a];
                    gam[a](b, c) = v;
                }
        }
        return gam;
    }

    // --- Ricci curvature ----------------------------------------------------
    // Conformal part in closed form; the perturbation contribution enters via
    // fourth-order central differences of the Christoffel symbols.

    M3 ricci3(const V3& y) const {
        require_n2("ricci3");
        check_point(y);
        if (!pert_) return ricci_conformal(y);

        // dGam[c][a](b,d) = d_c Gamma^a_bd, conformal part analytic
        const PhiJet3<S> pj = phi_jet(y);
        const M3 whess = conformal_w_hess(pj);
        std::array<std::array<M3, 3>, 3> dgam;
        for (int c = 0; c < 3; ++c)
            for (int a = 0; a < 3; ++a) {
                dgam[c][a].setZero();
                for (int b = 0; b < 3; ++b)
                    for (int d = 0; d < 3; ++d) {
                        S v = S(0);
                        if (a == b) v += whess(d, c);
                        if (a == d) v += whess(b, c);
                        if (b == d) v -= whess(a, c);
                        dgam[c][a](b, d) = v;
                    }
            }

        // finite differences of DeltaGamma = Gamma_total - Gamma_conformal
        const S r = y.norm();
        const S h = S(1e-5) * r;
        if (r - S(2) * h <= horizon_)
            throw DomainError("ricci: finite-difference stencil crosses the horizon");
        for (int c = 0; c < 3; ++c) {
            V3 e = V3::Zero();
            e[c] = S(1);
            const auto fp2 = delta_gamma(y + S(2) * h * e);
            const auto fp1 = delta_gamma(y + h * e);
            const auto fm1 = delta_gamma(y - h * e);
            const auto fm2 = delta_gamma(y - S(2) * h * e);
            for (int a = 0; a < 3; ++a)
                dgam[c][a] +=
                    (-fp2[a] + S(8) * fp1[a] - S(8) * fm1[a] + fm2[a]) / (S(12) * h);
        }

        const std::array<M3, 3> gam = christoffels3(y);
        return ricci_from_parts(gam, dgam);
    }

    // Euclidean-orthonormal radial direction has gbar-unit version
    // nu = phi^{-q/2} y/r; on coordinate spheres Ric(nu,nu) drives the
    // stability operator.
    S ricci_radial_radial(const V3& y) const {
        const M3 R = ricci3(y);
        const PhiJet3<S> pj = phi_jet(y);
        using std::pow;
        const V3 nu = pow(pj.phi, -q_ / S(2)) * y.normalized();
        return nu.dot(R * nu);
    }

private:
    int n_;
    S mass_;
    S horizon_;
    S q_;
    std::optional<Perturbation<S>> pert_;

    void require_n2(const char* who) const {
        if (n_ != 2)
            throw DomainError(std::string(who) + ": fixed-size path requires n = 2");
    }

    template <class Vec>
    void check_point(const Vec& y) const {
        const S r = y.norm();
        if (!(r > horizon_)) {
            std::ostringstream os;
            os << "ambient point with |y| = " << double(r)
               << " is not outside the horizon r_h = " << double(horizon_);
            throw DomainError(os.str());
        }
    }

    std::array<M3, 3> delta_gamma(const V3& y) const {
        const std::array<M3, 3> full = christoffels3(y);
        const std::array<M3, 3> conf = conformal_christoffels3(y);
        return {full[0] - conf[0], full[1] - conf[1], full[2] - conf[2]};
    }

    // R_bd = d_a Gamma^a_bd - d_d Gamma^a_ba + Gamma^a_am Gamma^m_bd - Gamma^a_dm Gamma^m_ba
    static M3 ricci_from_parts(const std::array<M3, 3>& gam,
                               const std::array<std::array<M3, 3>, 3>& dgam) {
        M3 R = M3::Zero();
        for (int b = 0; b < 3; ++b)
            for (int d = 0; d < 3; ++d) {
                S v = S(0);
                for (int a = 0; a < 3; ++a) {
                    v += dgam[a][a](b, d) - dgam[d][a](b, a);
                    for (int mu = 0; mu < 3; ++mu)
                        v += gam[a](a, mu) * gam[mu](b, d) - gam[a](d, mu) * gam[mu](b, a);
                }
                R(b, d) = v;
            }
        return R;
    }

    // Conformal metric e^{2w} delta in dimension 3:
    //   R_ab = -(w_ab - w_a w_b) - delta_ab (Lap w + |grad w|^2)
    M3 ricci_conformal(const V3& y) const {
        const PhiJet3<S> pj = phi_jet(y);
        const V3 wg = conformal_w_grad(pj);
        const M3 wh = conformal_w_hess(pj);
        return -(wh - wg * wg.transpose()) -
               M3::Identity() * (wh.trace() + wg.squaredNorm());
    }
};

using Ambient = AmbientMetric<Real>;

// ====== built-in perturbations ======

// Quadrupole perturbation for n = 2:
//   P_ab = eps * cut(r) * (3 y3^2 - r^2) / (2 r^5) * delta_ab
// The angular factor is the max-normalized degree-2 zonal harmonic and the
// radial falloff r^{-(n+1)} sits inside the asymptotically Schwarzschild
// class. cut is a C^3 step that vanishes below 1.5 r_h and is identically 1
// beyond 2 r_h, keeping evaluations near the horizon finite.
template <class S>
Perturbation<S> make_quadrupole_perturbation(S mass, S epsilon) {
    const S rh = schw_horizon_radius<S>(2, mass);
    const S a = S(1.5) * rh;
    const S b = S(2) * rh;
    Perturbation<S> p;
    p.decay_order = 3;
    p.id = "quadrupole";
    p.jet = [a, b, epsilon](const Eigen::Matrix<S, 3, 1>& y) {
        using V3 = Eigen::Matrix<S, 3, 1>;
        using M3 = Eigen::Matrix<S, 3, 3>;
        const S r = y.norm();
        const S r2 = r * r;

        // cut and two derivatives (C^3 smoothstep 35t^4-84t^5+70t^6-20t^7)
        S cut = S(1), dcut = S(0), d2cut = S(0);
        if (b > a && r < b) {
            if (r <= a) {
                cut = dcut = d2cut = S(0);
            } else {
                const S t = (r - a) / (b - a);
                const S t2 = t * t, t3 = t2 * t;
                cut = (((S(-20) * t + S(70)) * t - S(84)) * t + S(35)) * t3 * t;
                const S omt = S(1) - t;
                const S ds = S(140) * t3 * omt * omt * omt;
                const S d2s = S(420) * t2 * omt * omt * (S(1) - S(2) * t);
                dcut = ds / (b - a);
                d2cut = d2s / ((b - a) * (b - a));
            }
        }

        // w = N / r^5 with N = (3 y3^2 - r^2)/2
        const S N = (S(3) * y[2] * y[2] - r2) / S(2);
        V3 dN = -y;
        dN[2] += S(3) * y[2];
        M3 d2N = -M3::Identity();
        d2N(2, 2) += S(3);
        const S ir5 = S(1) / (r2 * r2 * r);
        const V3 dir5 = S(-5) * y * ir5 / r2;
        const M3 d2ir5 = S(-5) * ir5 / r2 * M3::Identity() +
                         S(35) * ir5 / (r2 * r2) * y * y.transpose();
        const S w = N * ir5;
        const V3 dw = dN * ir5 + N * dir5;
        const M3 d2w = d2N * ir5 + dN * dir5.transpose() + dir5 * dN.transpose() + N * d2ir5;

        // u = cut * w, radial chain rule for cut
        const V3 yr = y / r;
        const S u = cut * w;
        const V3 du = dcut * w * yr + cut * dw;
        const M3 d2u = d2cut * w * yr * yr.transpose() +
                       dcut * (w * (M3::Identity() - yr * yr.transpose()) / r +
                               yr * dw.transpose() + dw * yr.transpose()) +
                       cut * d2w;

        PerturbationJet<S> out;
        out.P = epsilon * u * M3::Identity();
        for (int c = 0; c < 3; ++c) out.dP[c] = epsilon * du[c] * M3::Identity();
        for (int c = 0; c < 3; ++c)
            for (int d = 0; d < 3; ++d) out.d2P[c][d] = epsilon * d2u(c, d) * M3::Identity();
        return out;
    };
    return p;
}

}  // namespace schwarzflow
