#pragma once

// Orchestration: build the scene a RunSpec describes, execute its command,
// and emit series/snapshot/spectrum files plus summary.json into the output
// directory. Everything here is deterministic for a fixed config; the only
// output that varies between runs is the summary timestamp.

#include <memory>
#include <optional>
#include <string>

#include "schwarzflow/config.hpp"

namespace schwarzflow {

inline constexpr const char* kToolVersion = "0.1.0";

struct RunSummary {
    Command command = Command::flow;
    Termination termination = Termination::Converged;
    int exit_code = 0;
    Real final_t = 0;
    Real final_max_dev = 0;
    int steps = 0;
    Real r_ref = 0;
    Real max_dist_ref = 0;
    Real conserved_initial = 0;
    Real conserved_final = 0;
    Real conservation_drift = 0;
    std::optional<Real> lambda;
    std::optional<Real> r2;
    std::optional<std::pair<Real, Real>> fit_window;
    std::optional<Real> predicted_rate;
    std::optional<Real> l0_eigenvalue;
    std::optional<Real> threshold;
    bool basin_exceeds_probe = false;
    std::optional<Real> area;  // geometry command
    std::optional<Real> volume;
    std::optional<Real> iso_ratio;
    std::string message;
};

int exit_code(Termination t);

std::shared_ptr<const Ambient> make_metric(const RunSpec& spec);
RadialGraph make_initial_surface(const RunSpec& spec,
                                 std::shared_ptr<const SphericalGrid> grid,
                                 std::shared_ptr<const Ambient> metric);

// out_dir empty uses spec.output.directory; quiet suppresses the
// one-line progress prints
RunSummary execute(const RunSpec& spec, const std::string& out_dir = "", bool quiet = true);

}  // namespace schwarzflow
