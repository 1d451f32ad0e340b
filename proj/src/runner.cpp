#include "schwarzflow/runner.hpp"

#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <vector>

#include "json.hpp"

namespace schwarzflow {

namespace {

using nlohmann::ordered_json;

std::string iso_timestamp() {
    char buf[32];
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void require_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory " + dir + ": " + ec.message());
}

// Auto fit window: the decade below the peak down to two decades above the
// smallest recorded value, so both the initial transient and the convergence
// floor stay outside the fit.
std::optional<std::pair<Real, Real>> auto_fit_window(const std::vector<DiagRow>& rows,
                                                     DiagField field) {
    Real vmax = 0, vmin = std::numeric_limits<Real>::infinity();
    for (const DiagRow& r : rows) {
        const Real v = field_value(r, field);
        if (v > 0) {
            vmax = std::max(vmax, v);
            vmin = std::min(vmin, v);
        }
    }
    if (!(vmax > 0) || !(vmax / vmin >= 1e3)) return std::nullopt;
    const Real lo = vmin * 1e2, hi = vmax * 1e-1;
    Real t_a = 0, t_b = 0;
    int count = 0;
    for (const DiagRow& r : rows) {
        const Real v = field_value(r, field);
        if (v < lo || v > hi) continue;
        if (count == 0) t_a = r.t;
        t_b = r.t;
        ++count;
    }
    if (count < 10) return std::nullopt;
    return std::make_pair(t_a, t_b);
}

void write_spectrum_csv(const std::string& path, const SpectrumReport& rep) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open spectrum file for writing: " + path);
    out << "index,degree_hint,eigenvalue\n";
    char buf[64];
    for (int i = 0; i < int(rep.eigenvalues.size()); ++i) {
        std::snprintf(buf, sizeof buf, "%d,%d,%.17g\n", i, rep.degree_hint[i],
                      rep.eigenvalues(i));
        out << buf;
    }
    if (!out) throw Error("failed while writing spectrum file: " + path);
}

void write_geometry_csv(const std::string& path, const SphericalGrid& grid,
                        const GeometryFields& f) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open geometry file for writing: " + path);
    out << "theta,phi,rho,H,kappa1,kappa2,ring,chi\n";
    char buf[256];
    for (int k = 0; k < grid.num_nodes(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      grid.node_theta(k), grid.node_phi(k), f.rho(k), f.H(k), f.kappa1(k),
                      f.kappa2(k), std::sqrt(std::max(f.ring2(k), 0.0)), f.chi(k));
        out << buf;
    }
    if (!out) throw Error("failed while writing geometry file: " + path);
}

ordered_json to_json(Real v) {
    return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr);
}

void write_summary(const std::string& dir, const RunSpec& spec, const RunSummary& s,
                   ordered_json extras) {
    ordered_json j;
    j["command"] = to_string(s.command);
    j["version"] = kToolVersion;
    j["timestamp"] = iso_timestamp();
    j["termination"] = s.command == Command::flow ? to_string(s.termination) : "success";
    j["exit_code"] = s.exit_code;
    if (s.command == Command::flow) {
        j["final_t"] = to_json(s.final_t);
        j["final_max_dev"] = to_json(s.final_max_dev);
        j["steps"] = s.steps;
        j["r_ref"] = to_json(s.r_ref);
        j["max_dist_ref"] = to_json(s.max_dist_ref);
        j["conserved_initial"] = to_json(s.conserved_initial);
        j["conserved_final"] = to_json(s.conserved_final);
        j["conservation_drift"] = to_json(s.conservation_drift);
        j["lambda"] = s.lambda ? to_json(*s.lambda) : ordered_json(nullptr);
        j["r2"] = s.r2 ? to_json(*s.r2) : ordered_json(nullptr);
        if (s.fit_window)
            j["fit_window"] = {s.fit_window->first, s.fit_window->second};
        else
            j["fit_window"] = nullptr;
    }
    if (s.predicted_rate) j["predicted_rate"] = to_json(*s.predicted_rate);
    if (s.l0_eigenvalue) j["l0_eigenvalue"] = to_json(*s.l0_eigenvalue);
    if (s.threshold) {
        j["threshold"] = to_json(*s.threshold);
        j["basin_exceeds_probe"] = s.basin_exceeds_probe;
    }
    if (s.area) j["area"] = to_json(*s.area);
    if (s.volume) j["volume"] = to_json(*s.volume);
    if (s.iso_ratio) j["iso_ratio"] = to_json(*s.iso_ratio);
    for (auto& [key, value] : extras.items()) j[key] = value;
    j["message"] = s.message;
    j["config"] = nlohmann::json::parse(spec.echo);

    const std::string path = dir + "/summary.json";
    std::ofstream out(path);
    if (!out) throw Error("cannot open summary file for writing: " + path);
    out << j.dump(2) << "\n";
    if (!out) throw Error("failed while writing summary file: " + path);
}

RunSummary execute_flow(const RunSpec& spec, const std::string& dir, bool quiet) {
    auto grid = std::make_shared<const SphericalGrid>(spec.L, spec.phi_offset);
    auto metric = make_metric(spec);
    const RadialGraph initial = make_initial_surface(spec, grid, metric);

    const int re = spec.output.record_every;
    int snap_every = spec.output.snapshot_every > 0 ? spec.output.snapshot_every : 10 * re;
    snap_every = ((snap_every + re - 1) / re) * re;  // align to the record cadence

    std::vector<DiagRow> rows;
    RecordHook hook = [&](const FlowState& st, const GeometryFields& f, Real havg, bool final) {
        rows.push_back(record(st, f, havg));
        if (final)
            write_snapshot(dir + "/snap_final.csv", st.graph);
        else if (st.step % snap_every == 0)
            write_snapshot(dir + "/snap_" + std::to_string(st.step) + ".csv", st.graph);
    };

    const RunResult rr = run(initial, spec.flow, hook);
    write_series(dir + "/series.csv", rows);

    RunSummary s;
    s.command = Command::flow;
    s.termination = rr.termination;
    s.exit_code = exit_code(rr.termination);
    s.final_t = rr.final_state.t;
    s.final_max_dev = rr.max_dev;
    s.steps = rr.steps_taken;
    s.r_ref = rr.r_ref;
    s.max_dist_ref = rr.max_dist_ref;
    s.conserved_initial = rr.conserved_initial;
    s.conserved_final = rr.conserved_final;
    s.conservation_drift = rr.conservation_drift;
    s.message = rr.message;

    const auto window = spec.fit_window ? spec.fit_window : auto_fit_window(rows, spec.fit_field);
    if (window) {
        try {
            const RateFit fit = fit_rate(rows, spec.fit_field, window->first, window->second);
            s.lambda = fit.lambda;
            s.r2 = fit.r2;
            s.fit_window = *window;
        } catch (const Error& e) {
            s.message += s.message.empty() ? "" : "; ";
            s.message += std::string("rate fit skipped: ") + e.what();
        }
    }

    if (spec.spectrum_requested) {
        try {
            const LinearizedOperator op = assemble(rr.final_state.graph, spec.stability);
            const SpectrumReport rep = spectrum(op, spec.constraint);
            write_spectrum_csv(dir + "/spectrum.csv", rep);
            s.predicted_rate = rep.predicted_rate;
            s.l0_eigenvalue = rep.l0_eigenvalue;
        } catch (const Error& e) {
            s.message += s.message.empty() ? "" : "; ";
            s.message += std::string("spectrum skipped: ") + e.what();
        }
    }

    write_summary(dir, spec, s, {});
    if (!quiet)
        std::cout << "flow " << to_string(rr.termination) << " at t = " << s.final_t << " after "
                  << s.steps << " steps, max |H - havg| = " << s.final_max_dev << "\n";
    return s;
}

RunSummary execute_spectrum(const RunSpec& spec, const std::string& dir, bool quiet) {
    auto grid = std::make_shared<const SphericalGrid>(spec.L, spec.phi_offset);
    auto metric = make_metric(spec);
    const RadialGraph surface = make_initial_surface(spec, grid, metric);

    const LinearizedOperator op = assemble(surface, spec.stability);
    const SpectrumReport rep = spectrum(op, spec.constraint);
    write_spectrum_csv(dir + "/spectrum.csv", rep);

    RunSummary s;
    s.command = Command::spectrum;
    s.predicted_rate = rep.predicted_rate;
    s.l0_eigenvalue = rep.l0_eigenvalue;

    ordered_json extras;
    extras["variant"] = to_string(rep.variant);
    extras["constraint"] = to_string(rep.constraint);
    extras["l_op"] = rep.L_op;
    extras["operator_asymmetry"] = op.asymmetry;
    write_summary(dir, spec, s, extras);
    if (!quiet)
        std::cout << "spectrum: " << rep.eigenvalues.size() << " modes, predicted rate "
                  << rep.predicted_rate << "\n";
    return s;
}

RunSummary execute_geometry(const RunSpec& spec, const std::string& dir, bool quiet) {
    auto grid = std::make_shared<const SphericalGrid>(spec.L, spec.phi_offset);
    auto metric = make_metric(spec);
    const RadialGraph surface = make_initial_surface(spec, grid, metric);

    GeometryOptions opt;
    opt.eps_graph = spec.flow.eps_graph;
    const GeometryFields f = geometry(surface, opt);
    write_geometry_csv(dir + "/geometry.csv", *grid, f);

    FlowState st;
    st.graph = surface;
    const DiagRow row = record(st, f, weighted_sum(f.H, f.dmu) / f.area);

    RunSummary s;
    s.command = Command::geometry;
    s.final_max_dev = row.max_dev;
    s.area = row.area;
    s.volume = row.volume;
    s.iso_ratio = row.iso_ratio;

    ordered_json extras;
    extras["kappa_min"] = row.kappa_min;
    extras["kappa_max"] = row.kappa_max;
    extras["max_ring"] = row.max_ring;
    extras["min_chi"] = row.min_chi;
    extras["max_dev"] = row.max_dev;
    write_summary(dir, spec, s, extras);
    if (!quiet)
        std::cout << "geometry: area " << row.area << ", volume " << row.volume
                  << ", isoperimetric ratio " << row.iso_ratio << "\n";
    return s;
}

RunSummary execute_sweep(const RunSpec& spec, const std::string& dir, bool quiet) {
    auto grid = std::make_shared<const SphericalGrid>(spec.L, spec.phi_offset);
    auto metric = make_metric(spec);

    const SweepResult sr = sweep_threshold(grid, metric, spec.r0, spec.sweep.l, spec.sweep.m,
                                           spec.flow, spec.sweep.eps_max, spec.sweep.bisections);

    const std::string path = dir + "/sweep.csv";
    std::ofstream out(path);
    if (!out) throw Error("cannot open sweep file for writing: " + path);
    out << "epsilon,termination\n";
    char buf[64];
    for (const SweepProbe& p : sr.probes) {
        std::snprintf(buf, sizeof buf, "%.17g,%s\n", p.eps, to_string(p.termination));
        out << buf;
    }
    if (!out) throw Error("failed while writing sweep file: " + path);

    RunSummary s;
    s.command = Command::sweep;
    s.threshold = sr.threshold;
    s.basin_exceeds_probe = sr.basin_exceeds_probe;

    ordered_json extras;
    extras["eps_max"] = sr.eps_max;
    ordered_json probes = ordered_json::array();
    for (const SweepProbe& p : sr.probes)
        probes.push_back({{"epsilon", p.eps}, {"termination", to_string(p.termination)}});
    extras["probes"] = probes;
    write_summary(dir, spec, s, extras);
    if (!quiet)
        std::cout << "sweep: threshold " << sr.threshold
                  << (sr.basin_exceeds_probe ? " (basin exceeds probe)" : "") << " from "
                  << sr.probes.size() << " probes\n";
    return s;
}

}  // namespace

int exit_code(Termination t) {
    switch (t) {
        case Termination::Converged: return 0;
        case Termination::MaxTime: return 2;
        case Termination::GraphFail: return 3;
        case Termination::Blowup: return 4;
        case Termination::FlowUndefined: return 5;
    }
    return 1;
}

std::shared_ptr<const Ambient> make_metric(const RunSpec& spec) {
    auto metric = std::make_shared<Ambient>(spec.n, spec.mass);
    if (spec.perturbation_id == "quadrupole")
        metric->set_perturbation(
            make_quadrupole_perturbation<Real>(spec.mass, spec.perturbation_epsilon));
    return metric;
}

RadialGraph make_initial_surface(const RunSpec& spec,
                                 std::shared_ptr<const SphericalGrid> grid,
                                 std::shared_ptr<const Ambient> metric) {
    if (!spec.snapshot.empty()) return read_snapshot(spec.snapshot, grid, metric);
    RadialGraph g = make_sphere(grid, metric, spec.r0);
    for (const ModeSpec& mode : spec.modes) g = perturb(g, mode.l, mode.m, mode.epsilon);
    return g;
}

RunSummary execute(const RunSpec& spec, const std::string& out_dir, bool quiet) {
    const std::string dir = out_dir.empty() ? spec.output.directory : out_dir;
    require_dir(dir);
    switch (spec.command) {
        case Command::flow: return execute_flow(spec, dir, quiet);
        case Command::spectrum: return execute_spectrum(spec, dir, quiet);
        case Command::geometry: return execute_geometry(spec, dir, quiet);
        case Command::sweep: return execute_sweep(spec, dir, quiet);
    }
    throw Error("execute: unreachable command");
}

}  // namespace schwarzflow
