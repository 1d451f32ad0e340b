#include "schwarzflow/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "json.hpp"

#include "schwarzflow/ambient.hpp"

namespace schwarzflow {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& key, const std::string& what) {
    throw ConfigError(key + ": " + what);
}

std::string joined(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* a : allowed)
            if (it.key() == a) {
                known = true;
                break;
            }
        if (!known) throw ConfigError("unknown key \"" + joined(path, it.key()) + "\"");
    }
}

const json* find(const json& obj, const char* key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

const json& as_object(const json& j, const std::string& key) {
    if (!j.is_object()) fail(key, "expected an object");
    return j;
}

Real as_real(const json& j, const std::string& key) {
    if (!j.is_number()) fail(key, "expected a number");
    const Real v = j.get<Real>();
    if (!std::isfinite(v)) fail(key, "value is not finite");
    return v;
}

int as_int(const json& j, const std::string& key) {
    if (!j.is_number_integer()) fail(key, "expected an integer");
    return j.get<int>();
}

bool as_bool(const json& j, const std::string& key) {
    if (!j.is_boolean()) fail(key, "expected true or false");
    return j.get<bool>();
}

std::string as_string(const json& j, const std::string& key) {
    if (!j.is_string()) fail(key, "expected a string");
    return j.get<std::string>();
}

void parse_metric(const json& j, RunSpec& spec) {
    check_keys(as_object(j, "metric"), "metric", {"n", "m", "perturbation"});
    if (const json* p = find(j, "n")) {
        spec.n = as_int(*p, "metric.n");
        if (spec.n != 2) fail("metric.n", "only n = 2 is supported by the surface pipeline");
    }
    if (const json* p = find(j, "m")) {
        spec.mass = as_real(*p, "metric.m");
        if (spec.mass < 0) fail("metric.m", "mass must be nonnegative");
    }
    if (const json* p = find(j, "perturbation")) {
        check_keys(as_object(*p, "metric.perturbation"), "metric.perturbation",
                   {"id", "epsilon"});
        if (const json* q = find(*p, "id")) {
            spec.perturbation_id = as_string(*q, "metric.perturbation.id");
            if (spec.perturbation_id != "none" && spec.perturbation_id != "quadrupole")
                fail("metric.perturbation.id", "expected \"none\" or \"quadrupole\", got \"" +
                                                   spec.perturbation_id + "\"");
        }
        if (const json* q = find(*p, "epsilon"))
            spec.perturbation_epsilon = as_real(*q, "metric.perturbation.epsilon");
    }
}

void parse_grid(const json& j, RunSpec& spec) {
    check_keys(as_object(j, "grid"), "grid", {"L", "phi_offset"});
    if (const json* p = find(j, "L")) {
        spec.L = as_int(*p, "grid.L");
        if (spec.L < 2 || spec.L > 64)
            fail("grid.L", "band limit " + std::to_string(spec.L) + " out of range [2, 64]");
    }
    if (const json* p = find(j, "phi_offset")) spec.phi_offset = as_real(*p, "grid.phi_offset");
}

void parse_flow(const json& j, RunSpec& spec) {
    check_keys(as_object(j, "flow"), "flow",
               {"kind", "dt", "c_cfl", "t_max", "tol_H", "dealias", "volume_renorm", "eps_graph",
                "fit_window", "fit_field"});
    if (const json* p = find(j, "kind")) {
        const std::string k = as_string(*p, "flow.kind");
        if (k == "vpmcf")
            spec.flow.kind = FlowKind::VolumePreserving;
        else if (k == "apmcf")
            spec.flow.kind = FlowKind::AreaPreserving;
        else
            fail("flow.kind", "expected \"vpmcf\" or \"apmcf\", got \"" + k + "\"");
        spec.kind_set = true;
    }
    if (const json* p = find(j, "dt")) {
        if (p->is_string()) {
            if (p->get<std::string>() != "auto")
                fail("flow.dt", "expected \"auto\" or a positive number");
            spec.flow.dt = 0;
        } else {
            spec.flow.dt = as_real(*p, "flow.dt");
            if (spec.flow.dt <= 0) fail("flow.dt", "step size must be positive (or \"auto\")");
        }
    }
    if (const json* p = find(j, "c_cfl")) {
        spec.flow.c_cfl = as_real(*p, "flow.c_cfl");
        if (spec.flow.c_cfl <= 0) fail("flow.c_cfl", "must be positive");
    }
    if (const json* p = find(j, "t_max")) {
        spec.flow.t_max = as_real(*p, "flow.t_max");
        if (spec.flow.t_max <= 0) fail("flow.t_max", "must be positive");
    }
    if (const json* p = find(j, "tol_H")) {
        spec.flow.tol_H = as_real(*p, "flow.tol_H");
        if (spec.flow.tol_H <= 0) fail("flow.tol_H", "must be positive");
    }
    if (const json* p = find(j, "dealias")) spec.flow.dealias = as_bool(*p, "flow.dealias");
    if (const json* p = find(j, "volume_renorm"))
        spec.flow.volume_renorm = as_bool(*p, "flow.volume_renorm");
    if (const json* p = find(j, "eps_graph")) {
        spec.flow.eps_graph = as_real(*p, "flow.eps_graph");
        if (spec.flow.eps_graph <= 0) fail("flow.eps_graph", "must be positive");
    }
    if (const json* p = find(j, "fit_window")) {
        if (!p->is_array() || p->size() != 2)
            fail("flow.fit_window", "expected an array [t_a, t_b]");
        const Real a = as_real((*p)[0], "flow.fit_window[0]");
        const Real b = as_real((*p)[1], "flow.fit_window[1]");
        if (!(a < b)) fail("flow.fit_window", "window start must precede its end");
        spec.fit_window = {a, b};
    }
    if (const json* p = find(j, "fit_field")) {
        const std::string f = as_string(*p, "flow.fit_field");
        if (f == "max_dev")
            spec.fit_field = DiagField::max_dev;
        else if (f == "l2_dev")
            spec.fit_field = DiagField::l2_dev;
        else
            fail("flow.fit_field", "expected \"max_dev\" or \"l2_dev\", got \"" + f + "\"");
    }
}

void parse_spectrum(const json& j, RunSpec& spec) {
    check_keys(as_object(j, "spectrum"), "spectrum",
               {"L_op", "variant", "constraint", "tol_cmc", "tol_umbilic"});
    spec.spectrum_requested = true;
    if (const json* p = find(j, "L_op")) {
        spec.stability.L_op = as_int(*p, "spectrum.L_op");
        if (spec.stability.L_op < 1) fail("spectrum.L_op", "must be at least 1");
    }
    if (const json* p = find(j, "variant")) {
        const std::string v = as_string(*p, "spectrum.variant");
        if (v == "full")
            spec.stability.variant = Variant::full;
        else if (v == "reduced")
            spec.stability.variant = Variant::reduced;
        else
            fail("spectrum.variant", "expected \"full\" or \"reduced\", got \"" + v + "\"");
    }
    if (const json* p = find(j, "constraint")) {
        const std::string c = as_string(*p, "spectrum.constraint");
        if (c == "volume")
            spec.constraint = Constraint::volume;
        else if (c == "area")
            spec.constraint = Constraint::area;
        else if (c == "none")
            spec.constraint = Constraint::none;
        else
            fail("spectrum.constraint",
                 "expected \"volume\", \"area\" or \"none\", got \"" + c + "\"");
    }
    if (const json* p = find(j, "tol_cmc")) {
        spec.stability.tol_cmc = as_real(*p, "spectrum.tol_cmc");
        if (spec.stability.tol_cmc <= 0) fail("spectrum.tol_cmc", "must be positive");
    }
    if (const json* p = find(j, "tol_umbilic")) {
        spec.stability.tol_umbilic = as_real(*p, "spectrum.tol_umbilic");
        if (spec.stability.tol_umbilic <= 0) fail("spectrum.tol_umbilic", "must be positive");
    }
}

void parse_sweep(const json& j, RunSpec& spec) {
    check_keys(as_object(j, "sweep"), "sweep", {"l", "m", "eps_max", "bisections"});
    if (const json* p = find(j, "l")) {
        spec.sweep.l = as_int(*p, "sweep.l");
        if (spec.sweep.l < 1) fail("sweep.l", "mode degree must be at least 1");
    }
    if (const json* p = find(j, "m")) spec.sweep.m = as_int(*p, "sweep.m");
    if (std::abs(spec.sweep.m) > spec.sweep.l)
        fail("sweep.m", "order must satisfy |m| <= l");
    if (const json* p = find(j, "eps_max")) {
        spec.sweep.eps_max = as_real(*p, "sweep.eps_max");
        if (spec.sweep.eps_max < 0) fail("sweep.eps_max", "must be nonnegative");
    }
    if (const json* p = find(j, "bisections")) {
        spec.sweep.bisections = as_int(*p, "sweep.bisections");
        if (spec.sweep.bisections < 1 || spec.sweep.bisections > 60)
            fail("sweep.bisections", "out of range [1, 60]");
    }
}

void parse_output(const json& j, RunSpec& spec) {
    check_keys(as_object(j, "output"), "output", {"directory", "record_every", "snapshot_every"});
    if (const json* p = find(j, "directory")) {
        spec.output.directory = as_string(*p, "output.directory");
        if (spec.output.directory.empty()) fail("output.directory", "must not be empty");
    }
    if (const json* p = find(j, "record_every")) {
        spec.output.record_every = as_int(*p, "output.record_every");
        if (spec.output.record_every < 1) fail("output.record_every", "must be at least 1");
    }
    if (const json* p = find(j, "snapshot_every")) {
        spec.output.snapshot_every = as_int(*p, "output.snapshot_every");
        if (spec.output.snapshot_every < 0) fail("output.snapshot_every", "must be nonnegative");
    }
}

}  // namespace

const char* to_string(Command c) {
    switch (c) {
        case Command::flow: return "flow";
        case Command::spectrum: return "spectrum";
        case Command::geometry: return "geometry";
        case Command::sweep: return "sweep";
    }
    return "unknown";
}

RunSpec parse_config_text(const std::string& text, Command command) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config root must be a JSON object");
    check_keys(doc, "",
               {"metric", "grid", "initial", "flow", "spectrum", "sweep", "output", "seed"});

    RunSpec spec;
    spec.command = command;
    if (const json* p = find(doc, "metric")) parse_metric(*p, spec);
    if (const json* p = find(doc, "grid")) parse_grid(*p, spec);
    if (const json* p = find(doc, "flow")) parse_flow(*p, spec);
    if (const json* p = find(doc, "spectrum")) parse_spectrum(*p, spec);
    if (const json* p = find(doc, "sweep")) parse_sweep(*p, spec);
    if (const json* p = find(doc, "output")) parse_output(*p, spec);
    if (const json* p = find(doc, "seed")) spec.seed = [&] {
            if (!p->is_number_integer()) fail("seed", "expected an integer");
            return p->get<long long>();
        }();

    // the initial block needs the metric for its horizon check
    if (const json* p = find(doc, "initial")) {
        const json& j = as_object(*p, "initial");
        check_keys(j, "initial", {"r0", "modes", "snapshot"});
        if (const json* q = find(j, "snapshot")) {
            if (j.size() != 1)
                fail("initial.snapshot", "a snapshot path excludes r0 and modes");
            spec.snapshot = as_string(*q, "initial.snapshot");
            if (!std::filesystem::exists(spec.snapshot))
                fail("initial.snapshot", "file does not exist: " + spec.snapshot);
        } else {
            if (const json* q = find(j, "r0")) {
                spec.r0 = as_real(*q, "initial.r0");
                const Real rh = schw_horizon_radius<Real>(spec.n, spec.mass);
                if (spec.r0 <= rh) {
                    std::ostringstream os;
                    os << "initial.r0: radius " << spec.r0
                       << " does not exceed the horizon radius " << rh << " of the m = "
                       << spec.mass << " metric";
                    throw ConfigError(os.str());
                }
            }
            if (const json* q = find(j, "modes")) {
                if (!q->is_array()) fail("initial.modes", "expected an array of mode objects");
                for (size_t i = 0; i < q->size(); ++i) {
                    const std::string base = "initial.modes[" + std::to_string(i) + "]";
                    const json& mj = as_object((*q)[i], base);
                    check_keys(mj, base, {"l", "m", "epsilon"});
                    ModeSpec mode;
                    const json* l = find(mj, "l");
                    if (!l) fail(base + ".l", "is required");
                    mode.l = as_int(*l, base + ".l");
                    if (mode.l < 0 || mode.l > spec.L)
                        fail(base + ".l", "degree out of range [0, grid.L]");
                    if (const json* m = find(mj, "m")) mode.m = as_int(*m, base + ".m");
                    if (std::abs(mode.m) > mode.l) fail(base + ".m", "order must satisfy |m| <= l");
                    const json* e = find(mj, "epsilon");
                    if (!e) fail(base + ".epsilon", "is required");
                    mode.epsilon = as_real(*e, base + ".epsilon");
                    spec.modes.push_back(mode);
                }
            }
        }
    }

    // cross-field and per-command requirements
    if (spec.snapshot.empty() && !(spec.r0 > 0)) {
        if (command == Command::sweep)
            throw ConfigError("initial.r0 is required for the sweep command");
        throw ConfigError("initial.r0 (or initial.snapshot) is required");
    }
    if (command == Command::sweep && !spec.snapshot.empty())
        throw ConfigError("initial.snapshot: the sweep command starts from coordinate spheres; "
                          "give initial.r0");
    if ((command == Command::flow || command == Command::sweep) && !spec.kind_set)
        throw ConfigError("flow.kind is required for the " + std::string(to_string(command)) +
                          " command");
    if (command == Command::sweep && !find(doc, "sweep"))
        throw ConfigError("a sweep block is required for the sweep command");
    if (spec.flow.volume_renorm && spec.kind_set && spec.flow.kind == FlowKind::AreaPreserving)
        throw ConfigError("flow.volume_renorm applies to the volume-preserving flow only");
    if (spec.spectrum_requested && spec.stability.L_op > spec.L)
        throw ConfigError("spectrum.L_op: operator degree " +
                          std::to_string(spec.stability.L_op) + " exceeds grid.L = " +
                          std::to_string(spec.L));
    if (spec.perturbation_id != "none" && spec.mass <= 0)
        throw ConfigError("metric.perturbation.id: a perturbation needs m > 0 to anchor its "
                          "cutoff radius");

    spec.flow.record_every = spec.output.record_every;
    spec.echo = doc.dump();
    return spec;
}

RunSpec parse_config(const std::string& path, Command command) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), command);
}

}  // namespace schwarzflow
