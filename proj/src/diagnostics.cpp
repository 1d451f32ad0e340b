#include "schwarzflow/diagnostics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace schwarzflow {

namespace {

const char* kSeriesHeader =
    "t,area,volume,avg_speed,max_dev,l2_dev,iso_ratio,kappa_min,kappa_max,max_ring,min_chi,"
    "max_gradH";

}  // namespace

DiagRow record(const FlowState& state, const GeometryFields& fields, Real havg) {
    if (fields.kappa1.size() == 0 || fields.gradH2.size() == 0)
        throw PreconditionError("record: full-level geometry fields are required");
    DiagRow row;
    row.step = state.step;
    row.t = state.t;
    row.area = fields.area;
    row.volume = enclosed_volume(state.graph, 1e-12);
    row.avg_speed = havg;
    VecX dev = fields.H.array() - havg;
    row.max_dev = dev.cwiseAbs().maxCoeff();
    VecX dev2mu = dev.cwiseProduct(dev).cwiseProduct(fields.dmu);
    row.l2_dev = std::sqrt(pairwise_sum(dev2mu));
    const int n = state.graph.metric->n();
    row.iso_ratio = std::pow(row.area, n + 1) / std::pow(row.volume, n);
    row.kappa_min = fields.kappa1.minCoeff();
    row.kappa_max = fields.kappa2.maxCoeff();
    row.max_ring = std::sqrt(std::max(fields.ring2.maxCoeff(), 0.0));
    row.min_chi = fields.chi.minCoeff();
    row.max_gradH = std::sqrt(std::max(fields.gradH2.maxCoeff(), 0.0));

    const Real vals[] = {row.t,         row.area,      row.volume,   row.avg_speed,
                         row.max_dev,   row.l2_dev,    row.iso_ratio, row.kappa_min,
                         row.kappa_max, row.max_ring,  row.min_chi,  row.max_gradH};
    for (Real v : vals)
        if (!std::isfinite(v)) throw PreconditionError("record: non-finite diagnostic value");
    return row;
}

RecordHook make_series_hook(std::vector<DiagRow>& out) {
    return [&out](const FlowState& st, const GeometryFields& f, Real havg, bool) {
        out.push_back(record(st, f, havg));
    };
}

Real field_value(const DiagRow& row, DiagField f) {
    switch (f) {
        case DiagField::max_dev: return row.max_dev;
        case DiagField::l2_dev: return row.l2_dev;
        case DiagField::area: return row.area;
        case DiagField::volume: return row.volume;
        case DiagField::iso_ratio: return row.iso_ratio;
    }
    return 0;
}

const char* to_string(DiagField f) {
    switch (f) {
        case DiagField::max_dev: return "max_dev";
        case DiagField::l2_dev: return "l2_dev";
        case DiagField::area: return "area";
        case DiagField::volume: return "volume";
        case DiagField::iso_ratio: return "iso_ratio";
    }
    return "unknown";
}

RateFit fit_rate(const std::vector<DiagRow>& series, DiagField field, Real t_a, Real t_b) {
    std::vector<Real> ts, logs;
    for (const DiagRow& row : series) {
        if (row.t < t_a || row.t > t_b) continue;
        const Real v = field_value(row, field);
        if (!(v > 0)) {
            std::ostringstream os;
            os << "fit_rate: " << to_string(field) << " = " << v << " at t = " << row.t
               << " is not positive";
            throw DomainError(os.str());
        }
        ts.push_back(row.t);
        logs.push_back(std::log(v));
    }
    if (ts.size() < 10)
        throw PreconditionError("fit_rate: at least 10 samples required in the window, got " +
                                std::to_string(ts.size()));
    const int n = int(ts.size());
    Real tbar = 0, ybar = 0;
    for (int i = 0; i < n; ++i) {
        tbar += ts[i];
        ybar += logs[i];
    }
    tbar /= n;
    ybar /= n;
    Real stt = 0, sty = 0, syy = 0;
    for (int i = 0; i < n; ++i) {
        stt += (ts[i] - tbar) * (ts[i] - tbar);
        sty += (ts[i] - tbar) * (logs[i] - ybar);
        syy += (logs[i] - ybar) * (logs[i] - ybar);
    }
    // compare against the roundoff left behind by the mean subtraction
    const Real eps_y = 16 * std::numeric_limits<Real>::epsilon() * (std::abs(ybar) + 1);
    if (syy <= n * eps_y * eps_y)
        throw DomainError("fit_rate: series is constant over the window");
    if (stt == 0) throw DomainError("fit_rate: all samples share one time");
    const Real slope = sty / stt;
    Real ssres = 0;
    for (int i = 0; i < n; ++i) {
        const Real r = logs[i] - ybar - slope * (ts[i] - tbar);
        ssres += r * r;
    }
    RateFit fit;
    fit.lambda = -slope;
    fit.r2 = 1.0 - ssres / syy;
    fit.amplitude = std::exp(ybar - slope * tbar);
    fit.samples = n;
    return fit;
}

AuditReport audit_monotonicity(const std::vector<DiagRow>& series, const AuditConfig& cfg) {
    AuditReport rep;
    if (series.empty()) return rep;
    const bool vp = cfg.kind == FlowKind::VolumePreserving;

    const Real q0 = vp ? series[0].volume : series[0].area;
    for (int k = 0; k < int(series.size()); ++k) {
        const Real q = vp ? series[k].volume : series[k].area;
        const Real drift = std::abs(q - q0) / std::abs(q0);
        if (drift > cfg.conserved_tol)
            rep.violations.push_back({k, vp ? "volume" : "area", drift});
    }

    for (int k = 0; k + 1 < int(series.size()); ++k) {
        const DiagRow& a = series[k];
        const DiagRow& b = series[k + 1];
        if (vp) {
            // area and isoperimetric ratio must not increase
            if (b.area > a.area * (1 + cfg.mono_slack))
                rep.violations.push_back({k + 1, "area", b.area / a.area - 1});
            if (b.iso_ratio > a.iso_ratio * (1 + cfg.mono_slack))
                rep.violations.push_back({k + 1, "iso_ratio", b.iso_ratio / a.iso_ratio - 1});
        } else {
            // volume growth and ratio decay hold where the surface stays
            // mean-convex; elsewhere the interval is reported, not judged
            if (a.kappa_min > 0 && b.kappa_min > 0) {
                if (b.volume < a.volume * (1 - cfg.mono_slack))
                    rep.violations.push_back({k + 1, "volume", 1 - b.volume / a.volume});
                if (b.iso_ratio > a.iso_ratio * (1 + cfg.mono_slack))
                    rep.violations.push_back({k + 1, "iso_ratio", b.iso_ratio / a.iso_ratio - 1});
            } else {
                rep.skipped_intervals.push_back(k);
            }
        }
    }

    if (cfg.iso_floor > 0) {
        for (int k = 0; k < int(series.size()); ++k)
            if (series[k].iso_ratio < cfg.iso_floor * (1 - cfg.iso_floor_tol))
                rep.violations.push_back(
                    {k, "iso_floor", 1 - series[k].iso_ratio / cfg.iso_floor});
    }
    return rep;
}

void write_series(const std::string& path, const std::vector<DiagRow>& series) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open series file for writing: " + path);
    out << kSeriesHeader << "\n";
    char buf[512];
    for (const DiagRow& r : series) {
        std::snprintf(buf, sizeof buf,
                      "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      r.t, r.area, r.volume, r.avg_speed, r.max_dev, r.l2_dev, r.iso_ratio,
                      r.kappa_min, r.kappa_max, r.max_ring, r.min_chi, r.max_gradH);
        out << buf;
    }
    if (!out) throw Error("failed while writing series file: " + path);
}

std::vector<DiagRow> read_series(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open series file: " + path);
    std::string line;
    if (!std::getline(in, line) || line != kSeriesHeader)
        throw Error("series file has unexpected header: " + path);
    std::vector<DiagRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        DiagRow r;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf", &r.t,
                        &r.area, &r.volume, &r.avg_speed, &r.max_dev, &r.l2_dev, &r.iso_ratio,
                        &r.kappa_min, &r.kappa_max, &r.max_ring, &r.min_chi,
                        &r.max_gradH) != 12)
            throw Error("series file has a malformed row: " + path);
        r.step = int(rows.size());
        rows.push_back(r);
    }
    return rows;
}

}  // namespace schwarzflow
