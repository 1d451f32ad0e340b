#pragma once

// Per-step scalar diagnostics of a flow trajectory, exponential-rate fits,
// and monotonicity audits of the conservation laws.

#include <string>
#include <vector>

#include "schwarzflow/flow.hpp"

namespace schwarzflow {

struct DiagRow {
    int step = 0;  // kept for snapshot bookkeeping; not a CSV column
    Real t = 0;
    Real area = 0;
    Real volume = 0;
    Real avg_speed = 0;  // havg of the active flow
    Real max_dev = 0;    // max |H - havg|
    Real l2_dev = 0;     // sqrt(integral (H - havg)^2 dmu)
    Real iso_ratio = 0;  // area^{n+1} / volume^n
    Real kappa_min = 0;
    Real kappa_max = 0;
    Real max_ring = 0;   // max |A - (H/n) g|
    Real min_chi = 0;
    Real max_gradH = 0;  // max |grad H|_g
};

// Pure function of its inputs; requires full-level geometry fields.
DiagRow record(const FlowState& state, const GeometryFields& fields, Real havg);

// Hook for flow::run that appends a row per recorded step.
RecordHook make_series_hook(std::vector<DiagRow>& out);

enum class DiagField { max_dev, l2_dev, area, volume, iso_ratio };
Real field_value(const DiagRow& row, DiagField f);
const char* to_string(DiagField f);

struct RateFit {
    Real lambda = 0;     // decay rate, v ~ exp(-lambda t)
    Real r2 = 0;         // coefficient of determination of the log-linear fit
    Real amplitude = 0;  // fitted v at t = 0
    int samples = 0;
};

// Least-squares fit of log(field) over t in [t_a, t_b]; needs at least 10
// samples, positive values, and a non-constant series
RateFit fit_rate(const std::vector<DiagRow>& series, DiagField field, Real t_a, Real t_b);

struct AuditConfig {
    FlowKind kind = FlowKind::VolumePreserving;
    Real conserved_tol = 1e-8;  // relative drift allowed for the conserved quantity
    Real mono_slack = 1e-10;    // relative slack per recorded interval
    Real iso_floor = 0;         // reference-sphere ratio; 0 disables the floor check
    Real iso_floor_tol = 1e-8;
};

struct AuditViolation {
    int index;          // row where the violation is detected
    std::string field;  // "volume", "area", "iso_ratio", "iso_floor"
    Real amount;        // size of the violation, relative
};

struct AuditReport {
    std::vector<AuditViolation> violations;
    // intervals [k, k+1] where APMCF volume monotonicity is not guaranteed
    // because the surface is not mean-convex there
    std::vector<int> skipped_intervals;
    bool pass() const { return violations.empty(); }
};

AuditReport audit_monotonicity(const std::vector<DiagRow>& series, const AuditConfig& cfg);

// series files: fixed header, 17 significant digits
void write_series(const std::string& path, const std::vector<DiagRow>& series);
std::vector<DiagRow> read_series(const std::string& path);

}  // namespace schwarzflow
