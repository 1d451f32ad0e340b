#pragma once

// Volume- and area-preserving mean curvature flow of radial graphs:
//
//   d rho / dt = (havg - H) / chi
//
// where havg is the area average of H (volume-preserving) or the ratio
// integral H^2 dmu / integral H dmu (area-preserving). Time stepping is
// classical RK4 with the nonlocal average recomputed in every stage.

#include <functional>
#include <string>
#include <vector>

#include "schwarzflow/surface.hpp"

namespace schwarzflow {

enum class FlowKind { VolumePreserving, AreaPreserving };
enum class Termination { Converged, MaxTime, GraphFail, Blowup, FlowUndefined };

const char* to_string(FlowKind k);
const char* to_string(Termination t);

struct FlowConfig {
    FlowKind kind = FlowKind::VolumePreserving;
    Real dt = 0;  // explicit step size; <= 0 selects the automatic rule below
    Real c_cfl = 0.5;
    Real t_max = 10;
    Real tol_H = 1e-8;     // converged when max |H - havg| < tol_H
    bool dealias = true;   // project rho to degree <= floor(2L/3) after each step
    bool volume_renorm = false;  // shift rho to restore the initial volume (VPMCF)
    Real eps_graph = 1e-3;
    int record_every = 10;
};

struct FlowState {
    RadialGraph graph;
    Real t = 0;
    int step = 0;
    // set on first use when volume_renorm is active
    Real v_ref = std::numeric_limits<Real>::quiet_NaN();
};

// havg for the given flow; throws FlowUndefinedError for APMCF when
// integral H dmu <= 0
Real speed_average(const GeometryFields& fields, FlowKind kind);

// d rho / dt at the nodes
VecX radial_velocity(const GeometryFields& fields, Real havg);

// dt = c_cfl * (min node spacing)^2 / max(|A|^2, 1), spacing measured as the
// smallest angular gap of the grid times the smallest radius
Real auto_dt(const GeometryFields& fields, const SphericalGrid& grid, Real c_cfl);

// One RK4 step. Non-finite stage values are retried once with dt/2 before
// raising BlowupError; graph-condition and horizon violations propagate.
FlowState step(const FlowState& state, const FlowConfig& cfg);

struct RunResult {
    Termination termination = Termination::MaxTime;
    FlowState final_state;
    Real max_dev = 0;           // max |H - havg| at the final state
    Real conserved_initial = 0;  // volume for VPMCF, area for APMCF
    Real conserved_final = 0;
    Real conservation_drift = 0;  // |final - initial| / initial
    Real r_ref = 0;               // coordinate sphere matching the conserved quantity
    Real max_dist_ref = 0;        // max |rho - r_ref| at the final state
    std::string message;          // failure detail for non-clean terminations
    int failed_node = -1;
    int steps_taken = 0;
};

// Called on every recorded step and once more at termination (final = true).
// havg is NaN when the speed average is undefined at the final state.
using RecordHook =
    std::function<void(const FlowState&, const GeometryFields&, Real havg, bool final)>;

RunResult run(const RadialGraph& initial, const FlowConfig& cfg, const RecordHook& hook = {});

// ====== perturbation-threshold sweep ======

struct SweepProbe {
    Real eps;
    Termination termination;
};

struct SweepResult {
    Real threshold = 0;  // largest probed amplitude that converged
    Real eps_max = 0;    // upper end of the probe range
    bool basin_exceeds_probe = false;  // the largest probe converged too
    std::vector<SweepProbe> probes;
};

// Bisect between converging and non-converging perturbation amplitudes of the
// (l, m) mode on the sphere of radius r0. eps_max <= 0 selects the largest
// amplitude keeping min rho > 1.05 * horizon.
SweepResult sweep_threshold(std::shared_ptr<const SphericalGrid> grid,
                            std::shared_ptr<const Ambient> metric, Real r0, int l, int m,
                            const FlowConfig& cfg, Real eps_max = 0, int bisections = 8);

}  // namespace schwarzflow
