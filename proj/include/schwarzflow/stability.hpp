#pragma once

// Linearization of the flow about a CMC surface and its constrained spectrum.
//
// The normal perturbation eta evolves by d eta / dt = L eta with
//
//   L eta = Lap_g eta + (Ric(nu,nu) + |A|^2) eta
//           + avg over M of (H^2 - |A|^2 - Ric(nu,nu)) eta dmu
//
// in the full variant; the reduced variant drops the local |A|^2 eta term and
// keeps the same nonlocal average. Matrix elements <Y_a, L Y_b> are taken in
// the dmu inner product over a real spherical-harmonic basis of degree <= L_op
// and symmetrized before solving, so eigenvalues are real; stability means all
// constrained eigenvalues negative and the decay rate is minus the largest.

#include <optional>
#include <vector>

#include "schwarzflow/diagnostics.hpp"
#include "schwarzflow/surface.hpp"

namespace schwarzflow {

enum class Variant { full, reduced };
enum class Constraint { volume, area, none };

const char* to_string(Variant v);
const char* to_string(Constraint c);

struct StabilityOptions {
    int L_op = 8;
    Variant variant = Variant::full;
    // the assembly is meaningful near a CMC, umbilic surface; callers working
    // on a converged non-round limit loosen these
    Real tol_cmc = 1e-8;      // allowed max |H - havg|
    Real tol_umbilic = 1e-8;  // allowed max |A - (H/n) g|
};

struct LinearizedOperator {
    int L_op = 0;
    Variant variant = Variant::full;
    MatX matrix;  // <Y_a, L Y_b>_dmu, symmetrized
    MatX gram;    // <Y_a, Y_b>_dmu
    VecX constraint_volume;  // <Y_a, 1>_dmu
    VecX constraint_area;    // <Y_a, H>_dmu
    Real asymmetry = 0;      // max entry of |M - M^T| before symmetrization
    Real area = 0;
};

struct SpectrumReport {
    VecX eigenvalues;              // ascending
    MatX modes;                    // coefficient-space eigenvectors, one column per eigenvalue
    std::vector<int> degree_hint;  // degree carrying the most coefficient energy
    Real predicted_rate = 0;   // -(largest eigenvalue among non-constant modes)
    Real l0_eigenvalue = 0;    // Rayleigh quotient of the constant function
    Constraint constraint = Constraint::volume;
    Variant variant = Variant::full;
    int L_op = 0;
};

LinearizedOperator assemble(const RadialGraph& graph, const StabilityOptions& opt = {});

SpectrumReport spectrum(const LinearizedOperator& op, Constraint constraint);

// -(largest eigenvalue whose dominant degree is l); DomainError when the
// spectrum has no such mode
Real rate_for_degree(const SpectrumReport& report, int l);

// relative error |predicted - observed.lambda| / predicted. The default
// prediction is the report's overall rate; passing a degree compares against
// that block instead, for initial data confined to one symmetry class.
Real compare_rates(const SpectrumReport& report, const RateFit& observed,
                   std::optional<int> degree = std::nullopt);

}  // namespace schwarzflow
