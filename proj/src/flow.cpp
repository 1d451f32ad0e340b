#include "schwarzflow/flow.hpp"

#include <cmath>
#include <optional>
#include <sstream>

namespace schwarzflow {

const char* to_string(FlowKind k) {
    return k == FlowKind::VolumePreserving ? "vpmcf" : "apmcf";
}

const char* to_string(Termination t) {
    switch (t) {
        case Termination::Converged: return "converged";
        case Termination::MaxTime: return "max_time";
        case Termination::GraphFail: return "graph_fail";
        case Termination::Blowup: return "blowup";
        case Termination::FlowUndefined: return "flow_undefined";
    }
    return "unknown";
}

Real speed_average(const GeometryFields& fields, FlowKind kind) {
    const Real int_H = weighted_sum(fields.H, fields.dmu);
    if (kind == FlowKind::VolumePreserving) return int_H / fields.area;
    if (!(int_H > 0)) {
        std::ostringstream os;
        os << "area-preserving speed undefined: integral of H dmu = " << int_H << " <= 0";
        throw FlowUndefinedError(os.str());
    }
    VecX H2mu = fields.H.cwiseProduct(fields.H).cwiseProduct(fields.dmu);
    return pairwise_sum(H2mu) / int_H;
}

VecX radial_velocity(const GeometryFields& fields, Real havg) {
    return ((havg - fields.H.array()) / fields.chi.array()).matrix();
}

Real auto_dt(const GeometryFields& fields, const SphericalGrid& grid, Real c_cfl) {
    Real dth = std::numeric_limits<Real>::infinity();
    for (int i = 0; i + 1 < grid.ntheta(); ++i)
        dth = std::min(dth, grid.theta()[i + 1] - grid.theta()[i]);
    const Real dphi_gap = grid.sin_theta().minCoeff() * grid.phi_weight();
    const Real s = std::min(dth, dphi_gap) * fields.rho.minCoeff();
    return c_cfl * s * s / std::max(fields.A2.maxCoeff(), 1.0);
}

namespace {

GeometryOptions rhs_options(const FlowConfig& cfg) {
    GeometryOptions opt;
    opt.level = GeomLevel::rhs;
    opt.eps_graph = cfg.eps_graph;
    return opt;
}

GeometryOptions full_options(const FlowConfig& cfg) {
    GeometryOptions opt;
    opt.level = GeomLevel::full;
    opt.eps_graph = cfg.eps_graph;
    return opt;
}

// One RK4 attempt at fixed dt; nullopt signals a non-finite stage.
std::optional<VecX> rk4_attempt(const FlowState& st, const FlowConfig& cfg, const VecX& k1,
                                Real dt) {
    const GeometryOptions opt = rhs_options(cfg);
    auto stage = [&](const VecX& rho) {
        RadialGraph g{st.graph.grid, st.graph.metric, rho};
        const GeometryFields f = geometry(g, opt);
        return radial_velocity(f, speed_average(f, cfg.kind));
    };
    if (!k1.allFinite()) return std::nullopt;
    const VecX& rho = st.graph.rho;
    const VecX k2 = stage(rho + (0.5 * dt) * k1);
    if (!k2.allFinite()) return std::nullopt;
    const VecX k3 = stage(rho + (0.5 * dt) * k2);
    if (!k3.allFinite()) return std::nullopt;
    const VecX k4 = stage(rho + dt * k3);
    if (!k4.allFinite()) return std::nullopt;
    VecX out = rho + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!out.allFinite()) return std::nullopt;
    return out;
}

// RK4 with stage-1 velocity supplied, returning the advanced state.
FlowState advance(const FlowState& st, const FlowConfig& cfg, const VecX& k1, Real dt) {
    if (cfg.volume_renorm && cfg.kind != FlowKind::VolumePreserving)
        throw PreconditionError("volume_renorm applies to the volume-preserving flow only");

    FlowState next = st;
    if (cfg.volume_renorm && std::isnan(next.v_ref))
        next.v_ref = enclosed_volume(st.graph, 1e-12);

    Real dt_used = dt;
    std::optional<VecX> rho_new = rk4_attempt(st, cfg, k1, dt);
    if (!rho_new) {
        dt_used = 0.5 * dt;
        rho_new = rk4_attempt(st, cfg, k1, dt_used);
        if (!rho_new)
            throw BlowupError("non-finite values in RK4 stages (after one dt/2 retry) at step " +
                                  std::to_string(st.step),
                              st.step);
    }

    const SphericalGrid& grid = *st.graph.grid;
    if (cfg.dealias)
        *rho_new = grid.synthesize(grid.truncated(grid.analyze(*rho_new), 2 * grid.band_limit() / 3));

    if (cfg.volume_renorm) {
        // Newton on the uniform shift c: V(rho + c) = v_ref
        RadialGraph g{st.graph.grid, st.graph.metric, *rho_new};
        Real c = 0;
        for (int it = 0; it < 8; ++it) {
            g.rho = *rho_new + VecX::Constant(rho_new->size(), c);
            const Real V = enclosed_volume(g, 1e-12);
            if (std::abs(V - next.v_ref) <= 1e-12 * std::abs(next.v_ref)) break;
            Real dV = 0;
            const int nphi = grid.nphi();
            for (int k = 0; k < g.rho.size(); ++k) {
                const int i = k / nphi, j = k % nphi;
                const Real stheta = grid.sin_theta()[i];
                const Vec3 om(stheta * std::cos(grid.phi()[j]), stheta * std::sin(grid.phi()[j]),
                              std::cos(grid.theta()[i]));
                dV += grid.quad_weights()[k] * volume_radial_density(*st.graph.metric, g.rho[k], om);
            }
            c -= (V - next.v_ref) / dV;
        }
        *rho_new = g.rho;
    }

    next.graph.rho = std::move(*rho_new);
    next.t = st.t + dt_used;
    next.step = st.step + 1;
    return next;
}

}  // namespace

FlowState step(const FlowState& state, const FlowConfig& cfg) {
    const GeometryFields f = geometry(state.graph, rhs_options(cfg));
    const VecX k1 = radial_velocity(f, speed_average(f, cfg.kind));
    const Real dt = cfg.dt > 0 ? cfg.dt : auto_dt(f, *state.graph.grid, cfg.c_cfl);
    return advance(state, cfg, k1, dt);
}

RunResult run(const RadialGraph& initial, const FlowConfig& cfg, const RecordHook& hook) {
    if (cfg.record_every < 1) throw PreconditionError("run: record_every must be >= 1");
    RunResult res;
    FlowState st;
    st.graph = initial;

    const bool vp = cfg.kind == FlowKind::VolumePreserving;
    try {
        res.conserved_initial = vp ? enclosed_volume(initial, 1e-12) : area(initial);
        res.r_ref = vp ? sphere_of_volume(initial.grid, initial.metric, res.conserved_initial)
                       : sphere_of_area(initial.grid, initial.metric, res.conserved_initial);
    } catch (const GraphConditionError& e) {
        res.termination = Termination::GraphFail;
        res.message = e.what();
        res.failed_node = e.node;
        res.final_state = st;
        return res;
    } catch (const DomainError& e) {
        res.termination = Termination::GraphFail;
        res.message = e.what();
        res.final_state = st;
        return res;
    }

    for (;;) {
        const bool record = (st.step % cfg.record_every) == 0;
        GeometryFields f;
        Real havg = std::numeric_limits<Real>::quiet_NaN();
        bool failed = false;
        try {
            f = geometry(st.graph, record ? full_options(cfg) : rhs_options(cfg));
            havg = speed_average(f, cfg.kind);
        } catch (const GraphConditionError& e) {
            res.termination = Termination::GraphFail;
            res.message = e.what();
            res.failed_node = e.node;
            failed = true;
        } catch (const FlowUndefinedError& e) {
            res.termination = Termination::FlowUndefined;
            res.message = e.what();
            failed = true;
        } catch (const DomainError& e) {
            res.termination = Termination::GraphFail;
            res.message = e.what();
            failed = true;
        }
        if (failed) break;

        res.max_dev = (f.H.array() - havg).abs().maxCoeff();

        const bool converged = res.max_dev < cfg.tol_H;
        const bool out_of_time = st.t >= cfg.t_max;
        if (converged || out_of_time) {
            res.termination = converged ? Termination::Converged : Termination::MaxTime;
            if (hook) {
                if (!record) f = geometry(st.graph, full_options(cfg));
                hook(st, f, havg, true);
            }
            break;
        }
        if (record && hook) hook(st, f, havg, false);

        Real dt = cfg.dt > 0 ? cfg.dt : auto_dt(f, *st.graph.grid, cfg.c_cfl);
        bool clipped = false;
        if (st.t + dt >= cfg.t_max) {
            dt = cfg.t_max - st.t;
            clipped = true;
        }
        try {
            const VecX k1 = radial_velocity(f, havg);
            st = advance(st, cfg, k1, dt);
            if (clipped) st.t = cfg.t_max;
        } catch (const GraphConditionError& e) {
            res.termination = Termination::GraphFail;
            res.message = e.what();
            res.failed_node = e.node;
            break;
        } catch (const FlowUndefinedError& e) {
            res.termination = Termination::FlowUndefined;
            res.message = e.what();
            break;
        } catch (const BlowupError& e) {
            res.termination = Termination::Blowup;
            res.message = e.what();
            break;
        } catch (const DomainError& e) {
            res.termination = Termination::GraphFail;
            res.message = e.what();
            break;
        }
    }

    res.final_state = st;
    res.steps_taken = st.step;
    try {
        res.conserved_final =
            vp ? enclosed_volume(st.graph, 1e-12) : area(st.graph);
        res.conservation_drift =
            std::abs(res.conserved_final - res.conserved_initial) / res.conserved_initial;
    } catch (const Error&) {
        res.conserved_final = std::numeric_limits<Real>::quiet_NaN();
        res.conservation_drift = std::numeric_limits<Real>::quiet_NaN();
    }
    res.max_dist_ref = (st.graph.rho.array() - res.r_ref).abs().maxCoeff();
    return res;
}

SweepResult sweep_threshold(std::shared_ptr<const SphericalGrid> grid,
                            std::shared_ptr<const Ambient> metric, Real r0, int l, int m,
                            const FlowConfig& cfg, Real eps_max, int bisections) {
    SweepResult out;
    const Real rh = metric->horizon_radius();
    if (eps_max <= 0) {
        const Real ymax = real_harmonic_max(l, m);
        const Real ymin = real_harmonic_signed_min(l, m);
        if (ymin >= 0)
            throw DomainError(
                "sweep_threshold: mode never approaches the horizon; provide eps_max");
        const Real margin = 1.0 - 1.05 * rh / r0;
        if (margin <= 0)
            throw DomainError("sweep_threshold: r0 is too close to the horizon for probing");
        eps_max = margin / (-ymin / ymax);
    }
    out.eps_max = eps_max;

    const Real eps_lo = 1e-3;
    if (eps_max <= eps_lo) throw DomainError("sweep_threshold: probe range is empty");

    auto probe = [&](Real eps) {
        Termination t;
        try {
            const RadialGraph g = perturb(make_sphere(grid, metric, r0), l, m, eps);
            t = run(g, cfg).termination;
        } catch (const DomainError&) {
            t = Termination::GraphFail;
        }
        out.probes.push_back({eps, t});
        return t;
    };

    if (probe(eps_lo) != Termination::Converged) {
        out.threshold = 0;
        return out;
    }
    if (probe(eps_max) == Termination::Converged) {
        out.threshold = eps_max;
        out.basin_exceeds_probe = true;
        return out;
    }
    Real lo = eps_lo, hi = eps_max;
    for (int i = 0; i < bisections; ++i) {
        const Real mid = 0.5 * (lo + hi);
        if (probe(mid) == Termination::Converged)
            lo = mid;
        else
            hi = mid;
    }
    out.threshold = lo;
    return out;
}

}  // namespace schwarzflow
