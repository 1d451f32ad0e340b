#pragma once

// Strict JSON run configuration. Unknown keys are errors, every reported
// problem names the offending key, and the parsed document is echoed into the
// run summary so a job can be reproduced from its output alone.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "schwarzflow/diagnostics.hpp"
#include "schwarzflow/flow.hpp"
#include "schwarzflow/stability.hpp"

namespace schwarzflow {

enum class Command { flow, spectrum, geometry, sweep };
const char* to_string(Command c);

struct ModeSpec {
    int l = 2;
    int m = 0;
    Real epsilon = 0;
};

struct SweepSpec {
    int l = 2;
    int m = 0;
    Real eps_max = 0;  // 0 selects the automatic horizon-margin bound
    int bisections = 8;
};

struct OutputSpec {
    std::string directory = "out";
    int record_every = 10;
    int snapshot_every = 0;  // 0 selects 10 * record_every
};

struct RunSpec {
    Command command = Command::flow;

    // metric block
    int n = 2;
    Real mass = 0;
    std::string perturbation_id = "none";
    Real perturbation_epsilon = 0;

    // grid block
    int L = 24;
    Real phi_offset = 0;

    // initial block: either r0 (+ optional modes) or a snapshot path
    Real r0 = 0;
    std::vector<ModeSpec> modes;
    std::string snapshot;

    // flow block
    FlowConfig flow;
    bool kind_set = false;
    std::optional<std::pair<Real, Real>> fit_window;
    DiagField fit_field = DiagField::max_dev;

    // spectrum block
    StabilityOptions stability;
    Constraint constraint = Constraint::volume;
    bool spectrum_requested = false;

    // sweep block
    SweepSpec sweep;

    OutputSpec output;
    long long seed = 0;

    std::string echo;  // canonical serialization of the parsed document
};

RunSpec parse_config(const std::string& path, Command command);
RunSpec parse_config_text(const std::string& text, Command command);

}  // namespace schwarzflow
