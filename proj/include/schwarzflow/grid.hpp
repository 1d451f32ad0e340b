#pragma once

// Pseudospectral grid on S^2: Gauss-Legendre colatitudes x uniform longitudes,
// with real orthonormal spherical-harmonic transforms up to band limit L.
//
// Conventions:
//   N_theta = L+1 Gauss-Legendre nodes (exact for polynomial degree 2L+1),
//   N_phi   = 2L+2 equispaced longitudes,
//   node index = i_theta * N_phi + j_phi  (theta outer, phi inner),
//   coefficient index = l^2 + l + m with m in [-l, l]; m > 0 are the
//   sqrt(2) cos(m phi) harmonics, m < 0 the sqrt(2) sin(|m| phi) ones.
//
// Quadrature of any product of two band-limited fields is exact, which makes
// analyze/synthesize mutually inverse on band-limited data.

#include <vector>

#include "schwarzflow/core.hpp"

namespace schwarzflow {

enum class Deriv { none, dtheta, dphi, dtheta2, dthetaphi, dphi2 };

class SphericalGrid {
public:
    explicit SphericalGrid(int L, Real phi_offset = 0);

    int band_limit() const { return L_; }
    int ntheta() const { return ntheta_; }
    int nphi() const { return nphi_; }
    int num_nodes() const { return ntheta_ * nphi_; }
    int num_coeffs() const { return (L_ + 1) * (L_ + 1); }

    static int coeff_index(int l, int m) { return l * l + l + m; }

    // node geometry
    const VecX& theta() const { return theta_; }          // ascending, size ntheta
    const VecX& phi() const { return phi_; }              // size nphi
    const VecX& sin_theta() const { return sin_theta_; }  // per theta row
    Real node_theta(int node) const { return theta_[node / nphi_]; }
    Real node_phi(int node) const { return phi_[node % nphi_]; }
    // solid-angle quadrature weight per node; sums to 4 pi
    const VecX& quad_weights() const { return wnode_; }
    const VecX& gl_weights() const { return wgl_; }
    Real phi_weight() const { return wphi_; }

    // transforms
    VecX analyze(const VecX& field) const;
    VecX synthesize(const VecX& coeffs, Deriv d = Deriv::none) const;
    VecX basis_field(int l, int m) const;

    // zero all coefficients with degree > lmax
    VecX truncated(const VecX& coeffs, int lmax) const;

    // fraction of coefficient energy per degree, for mode diagnostics
    VecX degree_energy(const VecX& coeffs) const;

private:
    int L_, ntheta_, nphi_;
    VecX theta_, phi_, sin_theta_, cos_theta_;
    VecX wgl_;    // Gauss-Legendre weights in x = cos theta
    VecX wnode_;  // wgl_i * wphi
    Real wphi_;

    // Legendre tables per order m: column l-m holds the fully normalized
    // Q_l^m at the colatitude nodes, plus theta-derivative tables
    std::vector<MatX> P_, dP_, d2P_;
    MatX cosm_, sinm_;  // nphi x (L+1), cos(m phi_j) and sin(m phi_j)
};

// max_{S^2} |Y_lm| of the real orthonormal harmonic, by dense scan with
// parabolic refinement; used to max-normalize perturbation modes
Real real_harmonic_max(int l, int m);

// min_{S^2} Y_lm with sign; for m != 0 the longitude factor makes this
// -real_harmonic_max
Real real_harmonic_signed_min(int l, int m);

}  // namespace schwarzflow
