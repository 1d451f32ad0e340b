#pragma once

// Radial graphs over S^2 in the ambient metric and their extrinsic geometry.
//
// A surface is y(omega) = rho(omega) * omega with rho stored at grid nodes.
// Derivatives of rho are taken spectrally, so geometry() works with the
// band-limited representative of rho; with dealiasing active during a flow
// the two coincide at machine precision.

#include <memory>
#include <string>

#include "schwarzflow/ambient.hpp"
#include "schwarzflow/core.hpp"
#include "schwarzflow/grid.hpp"

namespace schwarzflow {

struct RadialGraph {
    std::shared_ptr<const SphericalGrid> grid;
    std::shared_ptr<const Ambient> metric;
    VecX rho;
};

enum class GeomLevel { rhs, full };

// Pointwise extrinsic geometry, one entry per grid node.
struct GeometryFields {
    // smoothed radius and its spectral derivatives
    VecX rho, rho_t, rho_p, rho_tt, rho_tp, rho_pp;
    // embedding and frame
    MatX pos, F_th, F_ph, nu;  // N x 3
    // induced metric g_ij, inverse, and area element
    VecX g11, g12, g22;
    VecX inv11, inv12, inv22;
    VecX sqrt_det_g;
    VecX dmu;  // sqrt(det g)/sin(theta) * quadrature weight
    // graph condition chi = gbar(omega, nu)
    VecX chi;
    // second fundamental form and scalar curvatures
    VecX A11, A12, A22;
    VecX H;            // g^{ij} A_ij
    VecX A2;           // |A|^2
    VecX ring2;        // |A|^2 - H^2/n, squared norm of the traceless part
    VecX kappa1, kappa2;  // principal curvatures, kappa1 <= kappa2 (full level)
    VecX gradH2;          // g^{ij} d_i H d_j H (full level)
    Real area = 0;
};

struct GeometryOptions {
    GeomLevel level = GeomLevel::full;
    Real eps_graph = 1e-3;
};

struct IsoperimetricReport {
    Real area;
    Real volume;
    Real ratio;  // area^{n+1} / volume^n
};

struct VariationReport {
    Real finite_difference;  // d/deps Area(rho + eps psi), central difference
    Real analytic;           // integral of H * psi * chi dmu
};

RadialGraph make_sphere(std::shared_ptr<const SphericalGrid> grid,
                        std::shared_ptr<const Ambient> metric, Real r0);

// rho <- rho * (1 + eps * Y_lm / max|Y_lm|); keeps the result a valid graph
// or reports the worst node
RadialGraph perturb(const RadialGraph& graph, int l, int m, Real eps);

GeometryFields geometry(const RadialGraph& graph, const GeometryOptions& opt = {});

Real area(const RadialGraph& graph);

// volume between the horizon (or the origin for m = 0) and the surface,
// per-node adaptive Gauss-Legendre in the radial direction
Real enclosed_volume(const RadialGraph& graph, Real rel_tol = 1e-10);

IsoperimetricReport isoperimetric_ratio(const RadialGraph& graph);

// radii of the coordinate spheres with prescribed enclosed volume / area,
// bisection bracketing plus Newton polish to 1e-12 relative
Real sphere_of_volume(std::shared_ptr<const SphericalGrid> grid,
                      std::shared_ptr<const Ambient> metric, Real volume);
Real sphere_of_area(std::shared_ptr<const SphericalGrid> grid,
                    std::shared_ptr<const Ambient> metric, Real target_area);

// first-variation identity  d/dt Area = integral of H * (speed) dmu  for the
// radial variation rho -> rho + eps psi, whose normal speed is psi * chi
VariationReport variation_check(const RadialGraph& graph, const VecX& psi, Real eps_fd = 1e-5);

// d/ds of the enclosed volume behind radius s along omega:
// sqrt(det gbar(s omega)) * s^2
Real volume_radial_density(const Ambient& am, Real s, const Vec3& omega);

// snapshot files: header "theta,phi,rho", one node per row, 17 significant digits
void write_snapshot(const std::string& path, const RadialGraph& graph);
RadialGraph read_snapshot(const std::string& path, std::shared_ptr<const SphericalGrid> grid,
                          std::shared_ptr<const Ambient> metric);

}  // namespace schwarzflow
