// Phantom synthesis and strategy simulation tests.
#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>

#include "doctest.h"
#include "dwiplan/error.hpp"
#include "dwiplan/needle.hpp"
#include "dwiplan/roi.hpp"
#include "dwiplan/simulate.hpp"
#include "dwiplan/stats.hpp"
#include "helpers.hpp"

using namespace dwiplan;

namespace {

// Long-double two-pass reference for mean and population SD.
struct RefStats {
    double mean, sd_pop;
};
RefStats ref_stats(const std::vector<double>& v) {
    long double s = 0.0L;
    for (double x : v) s += x;
    long double m = s / static_cast<long double>(v.size());
    long double q = 0.0L;
    for (double x : v) {
        long double d = static_cast<long double>(x) - m;
        q += d * d;
    }
    return {static_cast<double>(m),
            static_cast<double>(std::sqrt(q / static_cast<long double>(v.size())))};
}

bool same_values(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) return false;
    return std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

PhantomSpec quiet_spec() {
    PhantomSpec spec;
    spec.dims = {48, 36, 1};
    spec.rx_mm = 10.0;
    spec.ry_mm = 7.5;
    spec.sigma_noise = 0.0;
    spec.seed = 7;
    return spec;
}

} // namespace

TEST_CASE("synthesize_density_map: noiseless output is the clamped model line") {
    auto g = testutil::geom(20, 10, 1, 1.0, 1.0, 3.0);
    auto labels = testutil::all_tumor(g);
    labels.set(3, 2, 0, TissueLabel::fat);
    labels.set(4, 2, 0, TissueLabel::necrosis);
    labels.set(5, 2, 0, TissueLabel::outside);
    auto dmap = testutil::field(g, [](int x, int y, int) { return 1e-4 * (1 + x + 20 * y); });
    dmap.at(6, 2, 0) = testutil::kNaN;

    DensityModel3d model;
    model.slope = -2.5e8;
    model.intercept = 1.125e6; // zero crossing at 4.5e-3, inside the D ramp

    auto out = synthesize_density_map(dmap, labels, model, 0.0, 99);
    CHECK(out.unit == UnitTag::density_3d_cells_per_mm3);
    CHECK(out.geom.dims == g.dims);

    std::size_t clamped = 0;
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 20; ++x) {
            double got = out.at(x, y, 0);
            if (labels.at(x, y, 0) != TissueLabel::tumor || !std::isfinite(dmap.at(x, y, 0))) {
                CHECK(std::isnan(got));
                continue;
            }
            double line = model.slope * dmap.at(x, y, 0) + model.intercept;
            CHECK(got == std::max(0.0, line));
            if (line < 0.0) ++clamped;
        }
    CHECK(clamped > 0);
}

TEST_CASE("synthesize_density_map: noise is reproducible with the stated moments") {
    auto g = testutil::geom(256, 256, 1);
    auto labels = testutil::all_tumor(g);
    auto dmap = testutil::field(g, [](int, int, int) { return 1.5e-3; });
    DensityModel3d model = paper_density_model_3d();
    const double sigma = 6e4;

    auto a = synthesize_density_map(dmap, labels, model, sigma, 31);
    auto b = synthesize_density_map(dmap, labels, model, sigma, 31);
    CHECK(same_values(a.values, b.values));
    auto c = synthesize_density_map(dmap, labels, model, sigma, 32);
    CHECK_FALSE(same_values(a.values, c.values));

    const double pred = model.slope * 1.5e-3 + model.intercept;
    std::vector<double> resid;
    resid.reserve(a.values.size());
    for (double v : a.values) {
        CHECK(v >= 0.0);
        resid.push_back(v - pred);
    }
    auto st = ref_stats(resid); // 65536 draws, far from the clamp at 12.5 sigma
    CHECK(std::fabs(st.mean) < 1e3);
    CHECK(st.sd_pop == doctest::Approx(sigma).epsilon(0.02));
}

TEST_CASE("synthesize_density_map: rejects negative noise") {
    auto g = testutil::geom(4, 4, 1);
    auto labels = testutil::all_tumor(g);
    auto dmap = testutil::field(g, [](int, int, int) { return 1e-3; });
    CHECK_THROWS_AS(synthesize_density_map(dmap, labels, paper_density_model_3d(), -1.0, 1),
                    Error);
}

TEST_CASE("generate_phantom: deterministic and rerolled by the seed") {
    auto spec = quiet_spec();
    spec.sigma_noise = 4e4;
    auto a = generate_phantom(spec);
    auto b = generate_phantom(spec);
    CHECK(same_values(a.dmap.values, b.dmap.values));
    CHECK(a.labels.labels == b.labels.labels);
    CHECK(same_values(a.rho_truth.values, b.rho_truth.values));
    CHECK(a.mu_rho == b.mu_rho);
    CHECK(a.sigma_rho == b.sigma_rho);

    spec.seed = 8;
    auto c = generate_phantom(spec);
    CHECK_FALSE(same_values(a.dmap.values, c.dmap.values));
    CHECK_FALSE(same_values(a.rho_truth.values, c.rho_truth.values));
}

TEST_CASE("generate_phantom: D field spans [d_lo, d_hi] and stats match the map") {
    auto spec = quiet_spec();
    spec.sigma_noise = 5e4;
    auto ph = generate_phantom(spec);

    double dmin = 1e9, dmax = -1e9;
    std::vector<double> rhos;
    for (std::size_t i = 0; i < ph.labels.labels.size(); ++i) {
        if (ph.labels.labels[i] != static_cast<std::uint8_t>(TissueLabel::tumor)) continue;
        double d = ph.dmap.values[i];
        CHECK(std::isfinite(d));
        dmin = std::min(dmin, d);
        dmax = std::max(dmax, d);
        rhos.push_back(ph.rho_truth.values[i]);
    }
    REQUIRE(rhos.size() > 100);
    CHECK(dmin >= spec.d_lo);
    CHECK(dmax <= spec.d_hi);
    CHECK(dmin == doctest::Approx(spec.d_lo).epsilon(1e-12));
    CHECK(dmax == doctest::Approx(spec.d_hi).epsilon(1e-12));

    auto st = ref_stats(rhos);
    CHECK(ph.mu_rho == doctest::Approx(st.mean).epsilon(1e-12));
    CHECK(ph.sigma_rho == doctest::Approx(st.sd_pop).epsilon(1e-12));
    CHECK(ph.seed == spec.seed);
    CHECK(ph.model_truth.slope == spec.model.slope);
}

TEST_CASE("generate_phantom: necrosis and fat blobs get their label conventions") {
    auto spec = quiet_spec();
    spec.necrosis_radius_mm = 2.5;
    spec.necrosis_offset_mm = {3.0, 0.0};
    spec.fat_radius_mm = 1.5;
    spec.fat_offset_mm = {-4.0, 2.0};
    auto ph = generate_phantom(spec);

    std::size_t n_necrosis = 0, n_fat = 0;
    for (std::size_t i = 0; i < ph.labels.labels.size(); ++i) {
        auto l = static_cast<TissueLabel>(ph.labels.labels[i]);
        if (l == TissueLabel::necrosis) {
            ++n_necrosis;
            CHECK(ph.dmap.values[i] == 0.0);
            CHECK(std::isnan(ph.rho_truth.values[i]));
        } else if (l == TissueLabel::fat) {
            ++n_fat;
            CHECK(std::isnan(ph.dmap.values[i]));
            CHECK(std::isnan(ph.rho_truth.values[i]));
        } else if (l == TissueLabel::outside) {
            CHECK(std::isnan(ph.dmap.values[i]));
        }
    }
    CHECK(n_necrosis > 0);
    CHECK(n_fat > 0);
}

TEST_CASE("generate_phantom: bad specs are rejected") {
    auto bad = quiet_spec();
    bad.d_lo = 2e-3;
    bad.d_hi = 1e-3;
    CHECK_THROWS_AS(generate_phantom(bad), Error);

    bad = quiet_spec();
    bad.rx_mm = 100.0; // wider than the grid
    CHECK_THROWS_AS(generate_phantom(bad), Error);

    bad = quiet_spec();
    bad.n_bumps = 0;
    CHECK_THROWS_AS(generate_phantom(bad), Error);

    bad = quiet_spec();
    bad.necrosis_radius_mm = 3.0;
    bad.necrosis_offset_mm = {8.5, 0.0}; // pokes through the boundary
    CHECK_THROWS_AS(generate_phantom(bad), Error);

    try {
        generate_phantom(bad);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == errc::invalid_spec);
    }
}

TEST_CASE("run_strategy random: reproducible, worker-independent, right shape") {
    auto spec = quiet_spec();
    spec.sigma_noise = 3e4;
    auto ph = generate_phantom(spec);
    NeedleConstraints c;

    StrategyOptions opt;
    opt.n_reps = 300;
    opt.seed = 11;
    auto r1 = run_strategy(ph, Strategy::random, c, 2, opt);
    auto r2 = run_strategy(ph, Strategy::random, c, 2, opt);
    CHECK(same_values(r1.rho_bar_samples, r2.rho_bar_samples));
    CHECK(same_values(r1.s_samples, r2.s_samples));
    CHECK(r1.access_indices == r2.access_indices);

    opt.workers = 4;
    auto r4 = run_strategy(ph, Strategy::random, c, 2, opt);
    CHECK(same_values(r1.rho_bar_samples, r4.rho_bar_samples));
    CHECK(r1.access_indices == r4.access_indices);

    CHECK(r1.strategy == Strategy::random);
    CHECK(r1.n_biopsy == 2);
    CHECK(r1.rho_bar_samples.size() == 300);
    CHECK(r1.enumerated == 300);
    CHECK(r1.mu_rho_ref == ph.mu_rho);
    CHECK(r1.sigma_rho_ref == ph.sigma_rho);
    auto sites = access_sites(ph.labels, ph.labels.geom.dims[2] / 2, c);
    for (std::size_t i = 0; i < r1.rho_bar_samples.size(); ++i) {
        CHECK(std::isfinite(r1.rho_bar_samples[i]));
        CHECK(std::isfinite(r1.s_samples[i]));
        CHECK(r1.access_indices[i] >= 0);
        CHECK(r1.access_indices[i] < static_cast<int>(sites.size()));
    }

    opt.seed = 12;
    auto r5 = run_strategy(ph, Strategy::random, c, 2, opt);
    CHECK_FALSE(same_values(r1.rho_bar_samples, r5.rho_bar_samples));

    opt.n_reps = 50;
    auto r6 = run_strategy(ph, Strategy::random, c, 1, opt);
    for (double s : r6.s_samples) CHECK(std::isnan(s));
}

TEST_CASE("run_strategy constrained: matches direct enumeration") {
    PhantomSpec spec;
    spec.dims = {36, 28, 1};
    spec.rx_mm = 7.0;
    spec.ry_mm = 5.0;
    spec.sigma_noise = 0.0;
    spec.seed = 3;
    auto ph = generate_phantom(spec);
    NeedleConstraints c;
    const int slice = ph.labels.geom.dims[2] / 2;

    StrategyOptions opt;
    auto rep = run_strategy(ph, Strategy::constrained, c, 2, opt);

    auto ivs = enumerate_interventions(ph.labels, slice, c, 2, nullptr);
    REQUIRE(rep.rho_bar_samples.size() == ivs.size());
    CHECK(rep.enumerated == ivs.size());
    for (std::size_t i = 0; i < ivs.size(); ++i) {
        std::vector<double> rhos;
        for (const auto& p : ivs[i].paths)
            rhos.push_back(roi_mean_or_nan(ph.rho_truth, p.tip_roi));
        auto st = sample_stats(rhos);
        CHECK(rep.rho_bar_samples[i] == st.mean);
        CHECK(rep.s_samples[i] == st.sd);
        CHECK(rep.access_indices[i] == ivs[i].access_index);
    }

    opt.workers = 4;
    auto rep4 = run_strategy(ph, Strategy::constrained, c, 2, opt);
    CHECK(same_values(rep.rho_bar_samples, rep4.rho_bar_samples));
    CHECK(same_values(rep.s_samples, rep4.s_samples));
    CHECK(rep.access_indices == rep4.access_indices);
}

TEST_CASE("run_strategy constrained: intervention cap takes an even stride") {
    PhantomSpec spec;
    spec.dims = {36, 28, 1};
    spec.rx_mm = 7.0;
    spec.ry_mm = 5.0;
    spec.sigma_noise = 0.0;
    spec.seed = 3;
    auto ph = generate_phantom(spec);
    NeedleConstraints c;

    StrategyOptions opt;
    auto all = run_strategy(ph, Strategy::constrained, c, 2, opt);
    REQUIRE(all.rho_bar_samples.size() > 40);

    opt.max_interventions = 17;
    auto capped = run_strategy(ph, Strategy::constrained, c, 2, opt);
    const std::size_t total = all.rho_bar_samples.size();
    const std::size_t stride = (total + 16) / 17;
    const std::size_t expect = (total - 1) / stride + 1;
    CHECK(capped.rho_bar_samples.size() == expect);
    CHECK(capped.rho_bar_samples.size() <= 17);
    CHECK(capped.enumerated == total);
    for (std::size_t i = 0; i < capped.rho_bar_samples.size(); ++i) {
        CHECK(capped.rho_bar_samples[i] == all.rho_bar_samples[i * stride]);
        CHECK(capped.access_indices[i] == all.access_indices[i * stride]);
    }

    opt.max_interventions = total + 10; // cap above the count changes nothing
    auto loose = run_strategy(ph, Strategy::constrained, c, 2, opt);
    CHECK(same_values(loose.rho_bar_samples, all.rho_bar_samples));
}

TEST_CASE("run_strategy guided: noiseless closure recovers the truth model") {
    PhantomSpec spec;
    spec.dims = {64, 48, 1};
    spec.rx_mm = 13.0;
    spec.ry_mm = 9.5;
    spec.d_lo = 0.9e-3;
    spec.d_hi = 3.0e-3;
    spec.n_bumps = 5;
    spec.sigma_noise = 0.0;
    spec.seed = 5;
    auto ph = generate_phantom(spec);
    NeedleConstraints c;

    StrategyOptions opt;
    auto rep = run_strategy(ph, Strategy::guided, c, 3, opt);
    REQUIRE_FALSE(rep.guided_samples.empty());
    CHECK(rep.guided_samples.size() == rep.rho_bar_samples.size());
    CHECK(rep.enumerated >= rep.guided_samples.size());

    std::set<int> accesses(rep.access_indices.begin(), rep.access_indices.end());
    CHECK(accesses.size() == rep.access_indices.size()); // one line per access point

    for (std::size_t i = 0; i < rep.guided_samples.size(); ++i) {
        const auto& line = rep.guided_samples[i];
        REQUIRE(line.size() == 3);
        std::vector<double> rhos;
        for (std::size_t j = 0; j < line.size(); ++j) {
            CHECK(line[j].intervention_id == static_cast<int>(i));
            CHECK(line[j].path_index == static_cast<int>(j));
            CHECK(std::isfinite(line[j].d_value));
            CHECK(std::isfinite(line[j].rho));
            rhos.push_back(line[j].rho);
        }
        CHECK(rep.rho_bar_samples[i] == sample_stats(rhos).mean);
    }

    // The best line reproduces the generating model: tips sit exactly on it.
    REQUIRE_FALSE(rep.guided_fits.empty());
    const auto& best = rep.guided_samples.front();
    std::vector<double> ds, rhos;
    for (const auto& s : best) {
        ds.push_back(s.d_value);
        rhos.push_back(s.rho);
    }
    auto refit = fit_linear(ds, rhos);
    CHECK(rep.guided_fits.front().k2d == refit.k2d);
    CHECK(rep.guided_fits.front().d2d == refit.d2d);
    CHECK(refit.k2d == doctest::Approx(ph.model_truth.slope).epsilon(1e-6));
    CHECK(refit.d2d == doctest::Approx(ph.model_truth.intercept).epsilon(1e-6));

    REQUIRE_FALSE(rep.cell_load_estimates.empty());
    double truth_load = cell_load(ph.rho_truth, ph.labels);
    CHECK(rep.cell_load_estimates.front() == doctest::Approx(truth_load).epsilon(1e-6));

    // The best tips track the optimal target D values.
    auto part = superpixels_2d(ph.dmap, ph.labels, 0, opt.target_area_mm2);
    std::vector<double> domain;
    for (std::size_t i = 0; i < part.region_labels.size(); ++i)
        if (part.region_labels[i] >= 0) domain.push_back(ph.dmap.values[i]);
    auto targets = optimal_d_values(domain, 3, opt.target_mode);
    const double span = targets.targets.back() - targets.targets.front();
    std::vector<double> sorted_ds = ds;
    std::sort(sorted_ds.begin(), sorted_ds.end());
    for (std::size_t i = 0; i < sorted_ds.size(); ++i)
        CHECK(std::fabs(sorted_ds[i] - targets.targets[i]) < 0.2 * span);
}

TEST_CASE("run_strategy guided: noisy fit stays close to the truth model") {
    PhantomSpec spec;
    spec.dims = {64, 48, 1};
    spec.rx_mm = 13.0;
    spec.ry_mm = 9.5;
    spec.d_lo = 0.9e-3;
    spec.d_hi = 3.0e-3;
    spec.n_bumps = 8; // spreads D well, so the targets cover the whole range
    spec.sigma_noise = 2e4;
    spec.seed = 5;
    auto ph = generate_phantom(spec);
    NeedleConstraints c;

    StrategyOptions opt;
    auto rep = run_strategy(ph, Strategy::guided, c, 4, opt);
    REQUIRE_FALSE(rep.guided_fits.empty());
    CHECK(rep.guided_fits.front().k2d ==
          doctest::Approx(ph.model_truth.slope).epsilon(0.10));

    REQUIRE_FALSE(rep.cell_load_estimates.empty());
    double truth_load = cell_load(ph.rho_truth, ph.labels);
    CHECK(rep.cell_load_estimates.front() == doctest::Approx(truth_load).epsilon(0.10));
}

TEST_CASE("compare_report: rows carry the documented statistics") {
    StrategyReport a;
    a.strategy = Strategy::random;
    a.n_biopsy = 2;
    a.mu_rho_ref = 1000.0;
    a.sigma_rho_ref = 100.0;
    a.rho_bar_samples = {1000.0, 1100.0, 899.0, 1200.0};
    a.s_samples = {95.0, 105.0, 110.0, 90.0};
    a.access_indices = {0, 1, 2, 3};

    auto cmp = compare_report({a});
    REQUIRE(cmp.rows.size() == 1);
    const auto& row = cmp.rows.front();
    CHECK(row.strategy == Strategy::random);
    CHECK(row.n_biopsy == 2);
    CHECK(row.interventions == 4);
    auto st = sample_stats(a.rho_bar_samples);
    CHECK(row.rho_bar_mean == st.mean);
    CHECK(row.rho_bar_sd == st.sd);
    CHECK(row.hit_fraction == doctest::Approx(0.5)); // 1000 hits, 1100 on the edge

    REQUIRE(cmp.rho_bar_edges.size() == 65);
    CHECK(cmp.rho_bar_edges.front() == 0.0);
    CHECK(cmp.rho_bar_edges.back() == doctest::Approx(2000.0));
    REQUIRE(cmp.s_edges.size() == 65);
    CHECK(cmp.s_edges.back() == doctest::Approx(400.0));

    // s samples land in bins 15, 16, 17, 14; ties resolve to the lowest bin.
    CHECK(row.modal_s == doctest::Approx(0.5 * (cmp.s_edges[14] + cmp.s_edges[15])));
    CHECK(row.modal_s_distance == doctest::Approx(std::fabs(row.modal_s - 100.0)));
    CHECK(cmp.rho_bar_hists.front().n_total == doctest::Approx(4.0));
    CHECK(cmp.s_hists.front().n_total == doctest::Approx(4.0));
}

TEST_CASE("compare_report: out-of-range and NaN samples behave") {
    StrategyReport a;
    a.strategy = Strategy::random;
    a.n_biopsy = 1;
    a.mu_rho_ref = 1000.0;
    a.sigma_rho_ref = 100.0;
    a.rho_bar_samples = {500.0, 5000.0}; // the second clips into the top bin
    a.s_samples = {testutil::kNaN, testutil::kNaN};

    auto cmp = compare_report({a});
    CHECK(cmp.rho_bar_hists.front().n_total == doctest::Approx(2.0));
    CHECK(cmp.rho_bar_hists.front().counts.back() == doctest::Approx(1.0));
    CHECK(cmp.s_hists.front().n_total == doctest::Approx(0.0));
    CHECK(std::isnan(cmp.rows.front().modal_s));
    CHECK(std::isnan(cmp.rows.front().modal_s_distance));
}

TEST_CASE("compare_report: identical reports give identical rows") {
    auto spec = quiet_spec();
    spec.sigma_noise = 3e4;
    auto ph = generate_phantom(spec);
    NeedleConstraints c;
    StrategyOptions opt;
    opt.n_reps = 200;
    auto r = run_strategy(ph, Strategy::random, c, 3, opt);

    auto cmp = compare_report({r, r});
    REQUIRE(cmp.rows.size() == 2);
    CHECK(cmp.rows[0].rho_bar_mean == cmp.rows[1].rho_bar_mean);
    CHECK(cmp.rows[0].rho_bar_sd == cmp.rows[1].rho_bar_sd);
    CHECK(cmp.rows[0].hit_fraction == cmp.rows[1].hit_fraction);
    CHECK(cmp.rows[0].modal_s == cmp.rows[1].modal_s);
    CHECK(cmp.mu_rho_ref == ph.mu_rho);
}

TEST_CASE("compare_report: guided beats random on hit fraction for one phantom") {
    auto spec = quiet_spec();
    spec.dims = {64, 48, 1};
    spec.rx_mm = 13.0;
    spec.ry_mm = 9.5;
    spec.sigma_noise = 3e4;
    spec.seed = 9;
    auto ph = generate_phantom(spec);
    NeedleConstraints c;

    StrategyOptions opt;
    opt.n_reps = 500;
    opt.seed = 21;
    auto guided = run_strategy(ph, Strategy::guided, c, 3, opt);
    auto random = run_strategy(ph, Strategy::random, c, 3, opt);

    auto cmp = compare_report({guided, random});
    REQUIRE(cmp.rows.size() == 2);
    CHECK(cmp.rows[0].hit_fraction >= cmp.rows[1].hit_fraction);
    CHECK(cmp.rows[0].hit_fraction > 0.0);
}

TEST_CASE("compare_report: rejects empty and mismatched inputs") {
    CHECK_THROWS_AS(compare_report({}), Error);
    try {
        compare_report({});
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == errc::empty_comparison);
    }

    StrategyReport empty;
    empty.mu_rho_ref = 1.0;
    empty.sigma_rho_ref = 1.0;
    try {
        compare_report({empty});
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.code() == errc::empty_comparison);
    }

    StrategyReport a;
    a.mu_rho_ref = 1000.0;
    a.sigma_rho_ref = 100.0;
    a.rho_bar_samples = {1.0};
    a.s_samples = {testutil::kNaN};
    StrategyReport b = a;
    b.mu_rho_ref = 999.0;
    CHECK_THROWS_AS(compare_report({a, b}), Error);
}

TEST_CASE("strategy names round-trip") {
    for (Strategy s : {Strategy::guided, Strategy::constrained, Strategy::random})
        CHECK(strategy_from_name(strategy_name(s)) == s);
    CHECK_THROWS_AS(strategy_from_name("optimal"), Error);
}
