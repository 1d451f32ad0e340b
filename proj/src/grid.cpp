#include "schwarzflow/grid.hpp"

#include <cmath>

namespace schwarzflow {

namespace {

constexpr Real kPi = 3.14159265358979323846;

// Legendre polynomial P_N and derivative at x, by upward recurrence.
void legendre_pn(int N, Real x, Real& p, Real& dp) {
    Real p0 = 1, p1 = x;
    for (int k = 2; k <= N; ++k) {
        const Real pk = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = pk;
    }
    p = (N == 0) ? p0 : p1;
    if (N == 0) {
        dp = 0;
        return;
    }
    dp = N * (x * p1 - p0) / (x * x - 1);
}

// Gauss-Legendre nodes (ascending) and weights on [-1, 1].
void gauss_legendre(int N, VecX& x, VecX& w) {
    x.resize(N);
    w.resize(N);
    for (int i = 0; i < N; ++i) {
        // Tricomi initial guess, then Newton
        Real xi = std::cos(kPi * (i + 0.75) / (N + 0.5));
        Real p, dp;
        for (int it = 0; it < 64; ++it) {
            legendre_pn(N, xi, p, dp);
            const Real dx = p / dp;
            xi -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        legendre_pn(N, xi, p, dp);
        x[i] = xi;
        w[i] = 2.0 / ((1 - xi * xi) * dp * dp);
    }
}

// Fully normalized associated Legendre values Q_l^m and dQ/dx at one x, for
// l = m..L, appended to the output arrays. Normalization: the real harmonics
// built from Q are orthonormal on the unit sphere.
void normalized_legendre_row(int L, int m, Real x, Real* Q, Real* dQ) {
    const Real s2 = 1 - x * x;
    // seed Q_m^m = sqrt((2m+1)/(4pi)) sqrt((2m-1)!!/(2m)!!) (1-x^2)^{m/2}
    Real qmm = std::sqrt(1.0 / (4.0 * kPi));
    for (int k = 1; k <= m; ++k) qmm *= std::sqrt(s2 * (2 * k + 1) / (2.0 * k));
    Real dqmm = (s2 > 0) ? -m * x * qmm / s2 : 0.0;
    Q[0] = qmm;
    dQ[0] = dqmm;
    if (L == m) return;
    Real qprev = qmm, dqprev = dqmm;
    Real q = std::sqrt(2.0 * m + 3.0) * x * qmm;
    Real dq = std::sqrt(2.0 * m + 3.0) * (qmm + x * dqmm);
    Q[1] = q;
    dQ[1] = dq;
    Real aprev = 0;
    for (int l = m + 2; l <= L; ++l) {
        const Real a = std::sqrt((4.0 * l * l - 1.0) / (Real(l) * l - Real(m) * m));
        if (l == m + 2) aprev = std::sqrt((4.0 * (l - 1.0) * (l - 1.0) - 1.0) /
                                          ((l - 1.0) * (l - 1.0) - Real(m) * m));
        const Real qn = a * (x * q - qprev / aprev);
        const Real dqn = a * (q + x * dq - dqprev / aprev);
        qprev = q;
        dqprev = dq;
        q = qn;
        dq = dqn;
        Q[l - m] = q;
        dQ[l - m] = dq;
        aprev = a;
    }
}

}  // namespace

SphericalGrid::SphericalGrid(int L, Real phi_offset) : L_(L) {
    if (L < 2 || L > 64) throw DomainError("SphericalGrid: band limit L must lie in [2, 64]");
    ntheta_ = L + 1;
    nphi_ = 2 * L + 2;
    wphi_ = 2.0 * kPi / nphi_;

    VecX x, w;
    gauss_legendre(ntheta_, x, w);
    // x ascending means theta descending; store theta ascending
    theta_.resize(ntheta_);
    wgl_.resize(ntheta_);
    cos_theta_.resize(ntheta_);
    sin_theta_.resize(ntheta_);
    for (int i = 0; i < ntheta_; ++i) {
        const int src = ntheta_ - 1 - i;
        theta_[i] = std::acos(x[src]);
        wgl_[i] = w[src];
        cos_theta_[i] = x[src];
        sin_theta_[i] = std::sin(theta_[i]);
    }

    phi_.resize(nphi_);
    for (int j = 0; j < nphi_; ++j) phi_[j] = wphi_ * j + phi_offset;

    wnode_.resize(num_nodes());
    for (int i = 0; i < ntheta_; ++i)
        for (int j = 0; j < nphi_; ++j) wnode_[i * nphi_ + j] = wgl_[i] * wphi_;

    // Legendre tables with theta-derivatives:
    //   d/dtheta = -sin(theta) d/dx
    //   d2/dtheta2 = -cos(theta) d/dx + sin^2(theta) d2/dx2
    // with d2Q/dx2 from the associated Legendre ODE
    //   (1-x^2) Q'' = 2 x Q' - [l(l+1) - m^2/(1-x^2)] Q.
    P_.resize(L + 1);
    dP_.resize(L + 1);
    d2P_.resize(L + 1);
    std::vector<Real> Q(ntheta_ + 1), dQ(ntheta_ + 1);
    for (int m = 0; m <= L; ++m) {
        const int cols = L + 1 - m;
        P_[m].resize(ntheta_, cols);
        dP_[m].resize(ntheta_, cols);
        d2P_[m].resize(ntheta_, cols);
        for (int i = 0; i < ntheta_; ++i) {
            const Real xi = cos_theta_[i];
            const Real s = sin_theta_[i];
            const Real s2 = s * s;
            normalized_legendre_row(L, m, xi, Q.data(), dQ.data());
            for (int l = m; l <= L; ++l) {
                const Real q = Q[l - m], dq = dQ[l - m];
                const Real d2q = (2 * xi * dq - (Real(l) * (l + 1) - Real(m) * m / s2) * q) / s2;
                P_[m](i, l - m) = q;
                dP_[m](i, l - m) = -s * dq;
                d2P_[m](i, l - m) = -xi * dq + s2 * d2q;
            }
        }
    }

    cosm_.resize(nphi_, L + 1);
    sinm_.resize(nphi_, L + 1);
    for (int j = 0; j < nphi_; ++j)
        for (int m = 0; m <= L; ++m) {
            cosm_(j, m) = std::cos(m * phi_[j]);
            sinm_(j, m) = std::sin(m * phi_[j]);
        }
}

VecX SphericalGrid::analyze(const VecX& field) const {
    if (field.size() != num_nodes()) throw PreconditionError("analyze: field size mismatch");
    // reshape to (nphi x ntheta), each column one latitude ring
    Eigen::Map<const MatX> F(field.data(), nphi_, ntheta_);
    // longitude projections: Fc(m, i) = sum_j F(j, i) cos(m phi_j) * wphi
    MatX Fc = cosm_.transpose() * F * wphi_;
    MatX Fs = sinm_.transpose() * F * wphi_;
    // fold in GL weights once
    Fc.array().rowwise() *= wgl_.transpose().array();
    Fs.array().rowwise() *= wgl_.transpose().array();

    VecX a = VecX::Zero(num_coeffs());
    const Real rt2 = std::sqrt(2.0);
    for (int m = 0; m <= L_; ++m) {
        const VecX ac = P_[m].transpose() * Fc.row(m).transpose();
        if (m == 0) {
            for (int l = 0; l <= L_; ++l) a[coeff_index(l, 0)] = ac[l];
        } else {
            const VecX as = P_[m].transpose() * Fs.row(m).transpose();
            for (int l = m; l <= L_; ++l) {
                a[coeff_index(l, m)] = rt2 * ac[l - m];
                a[coeff_index(l, -m)] = rt2 * as[l - m];
            }
        }
    }
    return a;
}

VecX SphericalGrid::synthesize(const VecX& coeffs, Deriv d) const {
    if (coeffs.size() != num_coeffs()) throw PreconditionError("synthesize: coeff size mismatch");
    int theta_order = 0, phi_order = 0;
    switch (d) {
        case Deriv::none: break;
        case Deriv::dtheta: theta_order = 1; break;
        case Deriv::dtheta2: theta_order = 2; break;
        case Deriv::dphi: phi_order = 1; break;
        case Deriv::dthetaphi: theta_order = 1; phi_order = 1; break;
        case Deriv::dphi2: phi_order = 2; break;
    }
    const std::vector<MatX>& T = (theta_order == 0) ? P_ : (theta_order == 1) ? dP_ : d2P_;

    MatX Gc = MatX::Zero(L_ + 1, ntheta_);
    MatX Gs = MatX::Zero(L_ + 1, ntheta_);
    const Real rt2 = std::sqrt(2.0);
    for (int m = 0; m <= L_; ++m) {
        VecX ac(L_ + 1 - m), as(L_ + 1 - m);
        for (int l = m; l <= L_; ++l) {
            ac[l - m] = (m == 0) ? coeffs[coeff_index(l, 0)] : rt2 * coeffs[coeff_index(l, m)];
            as[l - m] = (m == 0) ? 0.0 : rt2 * coeffs[coeff_index(l, -m)];
        }
        Gc.row(m) = (T[m] * ac).transpose();
        if (m > 0) Gs.row(m) = (T[m] * as).transpose();
    }

    MatX F(nphi_, ntheta_);
    if (phi_order == 0) {
        F = cosm_ * Gc + sinm_ * Gs;
    } else if (phi_order == 1) {
        // d/dphi: cos -> -m sin, sin -> m cos
        for (int m = 0; m <= L_; ++m) {
            Gc.row(m) *= Real(m);
            Gs.row(m) *= Real(m);
        }
        F = cosm_ * Gs - sinm_ * Gc;
    } else {
        for (int m = 0; m <= L_; ++m) {
            Gc.row(m) *= Real(m) * Real(m);
            Gs.row(m) *= Real(m) * Real(m);
        }
        F = -(cosm_ * Gc + sinm_ * Gs);
    }
    return Eigen::Map<VecX>(F.data(), num_nodes());
}

VecX SphericalGrid::basis_field(int l, int m) const {
    if (l < 0 || l > L_ || std::abs(m) > l)
        throw PreconditionError("basis_field: (l, m) outside the band limit");
    VecX e = VecX::Zero(num_coeffs());
    e[coeff_index(l, m)] = 1.0;
    return synthesize(e);
}

VecX SphericalGrid::truncated(const VecX& coeffs, int lmax) const {
    if (coeffs.size() != num_coeffs()) throw PreconditionError("truncated: coeff size mismatch");
    VecX out = coeffs;
    for (int l = lmax + 1; l <= L_; ++l)
        for (int m = -l; m <= l; ++m) out[coeff_index(l, m)] = 0.0;
    return out;
}

VecX SphericalGrid::degree_energy(const VecX& coeffs) const {
    VecX e = VecX::Zero(L_ + 1);
    for (int l = 0; l <= L_; ++l)
        for (int m = -l; m <= l; ++m) e[l] += coeffs[coeff_index(l, m)] * coeffs[coeff_index(l, m)];
    const Real tot = e.sum();
    if (tot > 0) e /= tot;
    return e;
}

Real real_harmonic_max(int l, int m) {
    if (l < 0 || std::abs(m) > l) throw PreconditionError("real_harmonic_max: invalid (l, m)");
    const int mm = std::abs(m);
    // longitude factor attains 1; scan the colatitude profile
    const int ns = 200000;
    std::vector<Real> Q(l - mm + 1), dQ(l - mm + 1);
    auto profile = [&](Real th) {
        normalized_legendre_row(l, mm, std::cos(th), Q.data(), dQ.data());
        return std::abs(Q[l - mm]);
    };
    Real best = 0, best_th = 0;
    for (int i = 0; i <= ns; ++i) {
        const Real th = kPi * i / ns;
        const Real v = profile(th);
        if (v > best) {
            best = v;
            best_th = th;
        }
    }
    // parabolic refinement away from the endpoints
    const Real h = kPi / ns;
    if (best_th > 0 && best_th < kPi) {
        const Real fm = profile(best_th - h), f0 = best, fp = profile(best_th + h);
        const Real denom = fm - 2 * f0 + fp;
        if (denom < 0) {
            const Real dth = 0.5 * h * (fm - fp) / denom;
            best = std::max(best, profile(best_th + dth));
        }
    }
    return (mm == 0) ? best : std::sqrt(2.0) * best;
}

Real real_harmonic_signed_min(int l, int m) {
    if (m != 0) return -real_harmonic_max(l, m);
    const int ns = 200000;
    std::vector<Real> Q(l + 1), dQ(l + 1);
    Real best = std::numeric_limits<Real>::infinity();
    Real best_th = 0;
    auto profile = [&](Real th) {
        normalized_legendre_row(l, 0, std::cos(th), Q.data(), dQ.data());
        return Q[l];
    };
    for (int i = 0; i <= ns; ++i) {
        const Real th = kPi * i / ns;
        const Real v = profile(th);
        if (v < best) {
            best = v;
            best_th = th;
        }
    }
    const Real h = kPi / ns;
    if (best_th > 0 && best_th < kPi) {
        const Real fm = profile(best_th - h), f0 = best, fp = profile(best_th + h);
        const Real denom = fm - 2 * f0 + fp;
        if (denom > 0) {
            const Real dth = 0.5 * h * (fm - fp) / denom;
            best = std::min(best, profile(best_th + dth));
        }
    }
    return best;
}

}  // namespace schwarzflow
