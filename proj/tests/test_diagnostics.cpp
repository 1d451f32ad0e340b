#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

#include "schwarzflow/diagnostics.hpp"

using namespace schwarzflow;

namespace {

std::vector<DiagRow> exp_series(Real amp, Real lambda, Real t_end, Real dt) {
    std::vector<DiagRow> rows;
    for (Real t = 0; t <= t_end + 1e-12; t += dt) {
        DiagRow r;
        r.t = t;
        r.max_dev = amp * std::exp(-lambda * t);
        r.l2_dev = 2 * r.max_dev;
        r.area = 100;
        r.volume = 50;
        r.iso_ratio = 200;
        r.kappa_min = 0.1;
        rows.push_back(r);
    }
    return rows;
}

}  // namespace

TEST_CASE("record reproduces the field summaries") {
    auto grid = std::make_shared<SphericalGrid>(12);
    auto metric = std::make_shared<Ambient>(2, 2.0);
    FlowState st;
    st.graph = perturb(make_sphere(grid, metric, 3.0), 2, 1, 0.06);
    st.t = 1.25;
    st.step = 7;

    const auto f = geometry(st.graph);
    const Real havg = speed_average(f, FlowKind::VolumePreserving);
    const DiagRow row = record(st, f, havg);

    CHECK(row.step == 7);
    CHECK(row.t == 1.25);
    CHECK(row.area == f.area);
    CHECK(row.volume == doctest::Approx(enclosed_volume(st.graph, 1e-12)).epsilon(1e-14));
    CHECK(row.avg_speed == havg);
    CHECK(row.max_dev == doctest::Approx((f.H.array() - havg).abs().maxCoeff()).epsilon(1e-15));
    Real acc = 0;
    for (int k = 0; k < f.H.size(); ++k)
        acc += (f.H[k] - havg) * (f.H[k] - havg) * f.dmu[k];
    CHECK(row.l2_dev == doctest::Approx(std::sqrt(acc)).epsilon(1e-12));
    CHECK(row.iso_ratio ==
          doctest::Approx(std::pow(row.area, 3) / (row.volume * row.volume)).epsilon(1e-14));
    CHECK(row.kappa_min == f.kappa1.minCoeff());
    CHECK(row.kappa_max == f.kappa2.maxCoeff());
    CHECK(row.max_ring == doctest::Approx(std::sqrt(f.ring2.maxCoeff())).epsilon(1e-12));
    CHECK(row.min_chi == f.chi.minCoeff());
    CHECK(row.max_gradH == doctest::Approx(std::sqrt(f.gradH2.maxCoeff())).epsilon(1e-12));

    GeometryOptions cheap;
    cheap.level = GeomLevel::rhs;
    const auto frhs = geometry(st.graph, cheap);
    CHECK_THROWS_AS(record(st, frhs, havg), PreconditionError);
}

TEST_CASE("field values and names") {
    DiagRow r;
    r.max_dev = 1;
    r.l2_dev = 2;
    r.area = 3;
    r.volume = 4;
    r.iso_ratio = 5;
    CHECK(field_value(r, DiagField::max_dev) == 1);
    CHECK(field_value(r, DiagField::l2_dev) == 2);
    CHECK(field_value(r, DiagField::area) == 3);
    CHECK(field_value(r, DiagField::volume) == 4);
    CHECK(field_value(r, DiagField::iso_ratio) == 5);
    CHECK(std::string(to_string(DiagField::max_dev)) == "max_dev");
    CHECK(std::string(to_string(DiagField::iso_ratio)) == "iso_ratio");
}

TEST_CASE("rate fit recovers an exact exponential") {
    const auto rows = exp_series(3e-2, 0.7, 2.0, 0.1);
    const RateFit fit = fit_rate(rows, DiagField::max_dev, 0.35, 1.85);
    CHECK(fit.lambda == doctest::Approx(0.7).epsilon(1e-9));
    CHECK(fit.amplitude == doctest::Approx(3e-2).epsilon(1e-9));
    CHECK(fit.r2 > 1 - 1e-12);
    CHECK(fit.samples == 15);

    // the l2 channel carries the same rate
    const RateFit fit2 = fit_rate(rows, DiagField::l2_dev, 0.35, 1.85);
    CHECK(fit2.lambda == doctest::Approx(0.7).epsilon(1e-9));
}

TEST_CASE("rate fit isolates the slow mode in a late window") {
    std::vector<DiagRow> rows;
    for (Real t = 0; t <= 12.0 + 1e-12; t += 0.1) {
        DiagRow r;
        r.t = t;
        r.max_dev = 1e-2 * std::exp(-0.5 * t) + 5e-3 * std::exp(-3.0 * t);
        rows.push_back(r);
    }
    const RateFit fit = fit_rate(rows, DiagField::max_dev, 9.5, 12.0);
    CHECK(fit.lambda == doctest::Approx(0.5).epsilon(1e-8));
    CHECK(fit.r2 > 1 - 1e-10);

    // an early window sees the mixture and reports a poorer fit
    const RateFit early = fit_rate(rows, DiagField::max_dev, 0.0, 2.0);
    CHECK(early.lambda > 0.5);
    CHECK(early.r2 < fit.r2);
}

TEST_CASE("rate fit rejects bad windows") {
    auto rows = exp_series(1e-2, 0.5, 2.0, 0.1);
    CHECK_THROWS_AS(fit_rate(rows, DiagField::max_dev, 0.0, 0.5), PreconditionError);
    CHECK_THROWS_AS(fit_rate(rows, DiagField::area, 0.0, 2.0), DomainError);  // constant

    rows[5].max_dev = 0;
    CHECK_THROWS_AS(fit_rate(rows, DiagField::max_dev, 0.0, 2.0), DomainError);
}

TEST_CASE("volume-preserving audit") {
    auto rows = exp_series(1e-2, 0.5, 3.0, 0.1);
    for (size_t k = 0; k < rows.size(); ++k) {
        rows[k].area = 100 - 0.1 * k;
        rows[k].iso_ratio = 200 - 0.05 * k;
    }
    AuditConfig cfg;
    CHECK(audit_monotonicity(rows, cfg).pass());

    SUBCASE("area uptick") {
        rows[10].area = rows[9].area + 1e-3;
        const auto rep = audit_monotonicity(rows, cfg);
        CHECK(!rep.pass());
        REQUIRE(rep.violations.size() == 1);
        CHECK(rep.violations[0].field == "area");
        CHECK(rep.violations[0].index == 10);
    }

    SUBCASE("volume drift") {
        rows[20].volume = 50 * (1 + 1e-6);
        const auto rep = audit_monotonicity(rows, cfg);
        CHECK(!rep.pass());
        CHECK(rep.violations[0].field == "volume");
        CHECK(rep.violations[0].index == 20);
        CHECK(rep.violations[0].amount == doctest::Approx(1e-6).epsilon(1e-6));
    }

    SUBCASE("isoperimetric floor") {
        cfg.iso_floor = rows.back().iso_ratio + 1.0;
        const auto rep = audit_monotonicity(rows, cfg);
        CHECK(!rep.pass());
        CHECK(rep.violations.back().field == "iso_floor");
    }
}

TEST_CASE("area-preserving audit gates on mean convexity") {
    std::vector<DiagRow> rows(6);
    for (int k = 0; k < 6; ++k) {
        rows[k].t = k;
        rows[k].area = 80;
        rows[k].volume = 40 + k;
        rows[k].iso_ratio = 300 - k;
        rows[k].kappa_min = 0.2;
    }
    AuditConfig cfg;
    cfg.kind = FlowKind::AreaPreserving;
    CHECK(audit_monotonicity(rows, cfg).pass());

    SUBCASE("volume decrease flags while mean-convex") {
        rows[4].volume = rows[3].volume - 0.5;
        rows[5].volume = rows[4].volume + 1;
        const auto rep = audit_monotonicity(rows, cfg);
        CHECK(!rep.pass());
        CHECK(rep.violations[0].field == "volume");
        CHECK(rep.violations[0].index == 4);
    }

    SUBCASE("non-convex intervals are skipped, not judged") {
        rows[3].kappa_min = -0.01;
        rows[4].volume = rows[3].volume - 0.5;  // would violate, but straddles k=3
        rows[5].volume = rows[4].volume + 1;
        const auto rep = audit_monotonicity(rows, cfg);
        CHECK(rep.pass());
        REQUIRE(rep.skipped_intervals.size() == 2);
        CHECK(rep.skipped_intervals[0] == 2);
        CHECK(rep.skipped_intervals[1] == 3);
    }

    SUBCASE("area drift flags") {
        rows[2].area = 80 * (1 + 1e-7);
        const auto rep = audit_monotonicity(rows, cfg);
        CHECK(!rep.pass());
        CHECK(rep.violations[0].field == "area");
    }
}

TEST_CASE("series files round-trip") {
    auto rows = exp_series(1e-2, 0.5, 1.0, 0.1);
    rows[3].max_gradH = 1.2345678901234567e-5;
    const std::string path = "/tmp/schwarzflow_test_series.csv";
    write_series(path, rows);

    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header ==
          "t,area,volume,avg_speed,max_dev,l2_dev,iso_ratio,kappa_min,kappa_max,max_ring,"
          "min_chi,max_gradH");
    in.close();

    const auto back = read_series(path);
    REQUIRE(back.size() == rows.size());
    for (size_t k = 0; k < rows.size(); ++k) {
        CHECK(back[k].t == rows[k].t);
        CHECK(back[k].max_dev == rows[k].max_dev);
        CHECK(back[k].max_gradH == rows[k].max_gradH);
    }

    std::ofstream bad("/tmp/schwarzflow_test_series_bad.csv");
    bad << "t,area\n1,2\n";
    bad.close();
    CHECK_THROWS_AS(read_series("/tmp/schwarzflow_test_series_bad.csv"), Error);
    CHECK_THROWS_AS(read_series("/tmp/schwarzflow_no_series.csv"), Error);
    std::remove(path.c_str());
    std::remove("/tmp/schwarzflow_test_series_bad.csv");
}

TEST_CASE("series hook collects rows from a live flow") {
    auto grid = std::make_shared<SphericalGrid>(8);
    auto metric = std::make_shared<Ambient>(2, 0.0);
    auto g = perturb(make_sphere(grid, metric, 1.0), 2, 0, 0.03);

    FlowConfig cfg;
    cfg.t_max = 50.0;
    cfg.record_every = 5;
    std::vector<DiagRow> rows;
    const auto res = run(g, cfg, make_series_hook(rows));
    CHECK(res.termination == Termination::Converged);
    REQUIRE(rows.size() >= 3);
    for (size_t k = 1; k < rows.size(); ++k) {
        CHECK(rows[k].t > rows[k - 1].t);
        CHECK(rows[k].max_dev < rows[k - 1].max_dev);
    }
    CHECK(rows.back().max_dev < cfg.tol_H);

    AuditConfig audit;
    CHECK(audit_monotonicity(rows, audit).pass());
}
