#include "dwiplan/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "dwiplan/error.hpp"
#include "dwiplan/rng.hpp"
#include "dwiplan/roi.hpp"
#include "dwiplan/stats.hpp"

namespace dwiplan {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Independent sub-streams off one phantom seed.
struct SeedChain {
    std::uint64_t x;
    explicit SeedChain(std::uint64_t seed) : x(seed) {}
    std::uint64_t next() { return Rng::splitmix64(x); }
};

void run_workers(int workers, const std::function<void(int)>& body) {
    if (workers <= 1) {
        body(0);
        return;
    }
    std::vector<std::thread> pool;
    std::exception_ptr err;
    std::mutex err_mu;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            try {
                body(w);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (!err) err = std::current_exception();
            }
        });
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

} // namespace

void PhantomSpec::validate() const {
    if (dims[0] < 4 || dims[1] < 4 || dims[2] < 1)
        fail(errc::invalid_spec, "phantom: grid too small");
    for (double s : spacing_mm)
        if (!(s > 0.0)) fail(errc::invalid_spec, "phantom: spacing must be positive");
    if (!(rx_mm > 0.0) || !(ry_mm > 0.0))
        fail(errc::invalid_spec, "phantom: tumor semi-axes must be positive");
    if (2.0 * rx_mm >= spacing_mm[0] * dims[0] || 2.0 * ry_mm >= spacing_mm[1] * dims[1])
        fail(errc::invalid_spec, "phantom: tumor does not fit the grid");
    if (!(d_lo > 0.0) || d_lo > d_hi)
        fail(errc::invalid_spec, "phantom: need 0 < d_lo <= d_hi");
    if (n_bumps < 1) fail(errc::invalid_spec, "phantom: need at least one bump");
    if (sigma_noise < 0.0) fail(errc::invalid_spec, "phantom: negative noise SD");

    auto blob_fits = [&](double r, Vec2 off) {
        if (r >= std::min(rx_mm, ry_mm)) return false;
        double ex = off.x / (rx_mm - r), ey = off.y / (ry_mm - r);
        return ex * ex + ey * ey <= 1.0;
    };
    if (necrosis_radius_mm > 0.0 && !blob_fits(necrosis_radius_mm, necrosis_offset_mm))
        fail(errc::invalid_spec, "phantom: necrosis blob does not fit inside the tumor");
    if (fat_radius_mm > 0.0 && !blob_fits(fat_radius_mm, fat_offset_mm))
        fail(errc::invalid_spec, "phantom: fat blob does not fit inside the tumor");
}

ScalarGrid3 synthesize_density_map(const ScalarGrid3& dmap, const LabelGrid3& labels,
                                   const DensityModel3d& model, double sigma_noise,
                                   std::uint64_t seed) {
    dmap.validate();
    require_same_geometry(dmap.geom, labels.geom, "synthesize_density_map");
    require_unit(dmap, UnitTag::d_value_mm2_per_s, "synthesize_density_map");
    if (sigma_noise < 0.0)
        fail(errc::invalid_argument, "synthesize_density_map: negative noise SD");

    ScalarGrid3 out(dmap.geom, UnitTag::density_3d_cells_per_mm3, kNaN);
    const std::size_t total = dmap.geom.voxel_count();
    for (std::size_t i = 0; i < total; ++i) {
        if (labels.labels[i] != static_cast<std::uint8_t>(TissueLabel::tumor)) continue;
        double d = dmap.values[i];
        if (!std::isfinite(d)) continue;
        double rho = model.slope * d + model.intercept;
        if (sigma_noise > 0.0) rho += rng_for_draw(seed, i).normal(0.0, sigma_noise);
        out.values[i] = std::max(0.0, rho);
    }
    return out;
}

Phantom generate_phantom(const PhantomSpec& spec) {
    spec.validate();
    GridGeometry g;
    g.dims = spec.dims;
    g.spacing_mm = spec.spacing_mm;

    const double cx = 0.5 * g.spacing_mm[0] * (g.dims[0] - 1);
    const double cy = 0.5 * g.spacing_mm[1] * (g.dims[1] - 1);

    Phantom ph;
    ph.seed = spec.seed;
    ph.model_truth = spec.model;
    ph.labels = LabelGrid3(g, TissueLabel::outside);

    auto in_ellipse = [&](double px, double py) {
        double ex = (px - cx) / spec.rx_mm, ey = (py - cy) / spec.ry_mm;
        return ex * ex + ey * ey <= 1.0;
    };
    auto in_blob = [&](double px, double py, double r, Vec2 off) {
        return r > 0.0 && std::hypot(px - (cx + off.x), py - (cy + off.y)) <= r;
    };

    for (int z = 0; z < g.dims[2]; ++z)
        for (int y = 0; y < g.dims[1]; ++y)
            for (int x = 0; x < g.dims[0]; ++x) {
                double px = g.spacing_mm[0] * x, py = g.spacing_mm[1] * y;
                if (!in_ellipse(px, py)) continue;
                TissueLabel l = TissueLabel::tumor;
                if (in_blob(px, py, spec.necrosis_radius_mm, spec.necrosis_offset_mm))
                    l = TissueLabel::necrosis;
                else if (in_blob(px, py, spec.fat_radius_mm, spec.fat_offset_mm))
                    l = TissueLabel::fat;
                ph.labels.set(x, y, z, l);
            }

    SeedChain chain(spec.seed);
    Rng bump_rng(chain.next());
    const std::uint64_t noise_seed = chain.next();

    struct Bump {
        double x, y, amp, s2;
    };
    std::vector<Bump> bumps;
    const double smin = 0.25 * std::min(spec.rx_mm, spec.ry_mm);
    const double smax = 0.60 * std::min(spec.rx_mm, spec.ry_mm);
    for (int b = 0; b < spec.n_bumps; ++b) {
        double u, v;
        do {
            u = bump_rng.uniform(-1.0, 1.0);
            v = bump_rng.uniform(-1.0, 1.0);
        } while (u * u + v * v > 1.0);
        double s = bump_rng.uniform(smin, smax);
        bumps.push_back({cx + u * spec.rx_mm, cy + v * spec.ry_mm,
                         bump_rng.uniform(0.4, 1.0), s * s});
    }

    // Raw bump field over the tumor, then an affine rescale to [d_lo, d_hi].
    ph.dmap = ScalarGrid3(g, UnitTag::d_value_mm2_per_s, kNaN);
    double raw_min = std::numeric_limits<double>::infinity();
    double raw_max = -raw_min;
    for (int z = 0; z < g.dims[2]; ++z)
        for (int y = 0; y < g.dims[1]; ++y)
            for (int x = 0; x < g.dims[0]; ++x) {
                if (ph.labels.at(x, y, z) != TissueLabel::tumor) continue;
                double px = g.spacing_mm[0] * x, py = g.spacing_mm[1] * y;
                double v = 0.0;
                for (const auto& b : bumps) {
                    double dx = px - b.x, dy = py - b.y;
                    v += b.amp * std::exp(-(dx * dx + dy * dy) / (2.0 * b.s2));
                }
                ph.dmap.at(x, y, z) = v;
                raw_min = std::min(raw_min, v);
                raw_max = std::max(raw_max, v);
            }
    if (!std::isfinite(raw_min))
        fail(errc::invalid_spec, "phantom: tumor mask is empty");

    const double span = raw_max - raw_min;
    for (std::size_t i = 0; i < g.voxel_count(); ++i) {
        if (ph.labels.labels[i] == static_cast<std::uint8_t>(TissueLabel::necrosis)) {
            ph.dmap.values[i] = 0.0;
            continue;
        }
        double& v = ph.dmap.values[i];
        if (!std::isfinite(v)) continue;
        if (span > 0.0) {
            double t = (v - raw_min) / span;
            v = std::clamp(spec.d_lo + t * (spec.d_hi - spec.d_lo), spec.d_lo, spec.d_hi);
        } else {
            v = spec.d_lo;
        }
    }

    ph.rho_truth =
        synthesize_density_map(ph.dmap, ph.labels, spec.model, spec.sigma_noise, noise_seed);

    std::vector<double> rhos;
    for (std::size_t i = 0; i < g.voxel_count(); ++i)
        if (ph.labels.labels[i] == static_cast<std::uint8_t>(TissueLabel::tumor))
            rhos.push_back(ph.rho_truth.values[i]);
    ph.mu_rho = pairwise_sum(rhos) / static_cast<double>(rhos.size());
    std::vector<double> sq(rhos.size());
    for (std::size_t i = 0; i < rhos.size(); ++i) {
        double d = rhos[i] - ph.mu_rho;
        sq[i] = d * d;
    }
    ph.sigma_rho = std::sqrt(pairwise_sum(sq) / static_cast<double>(rhos.size()));
    return ph;
}

const char* strategy_name(Strategy s) {
    switch (s) {
    case Strategy::guided:      return "guided";
    case Strategy::constrained: return "constrained";
    case Strategy::random:      return "random";
    }
    return "unknown";
}

Strategy strategy_from_name(const std::string& name) {
    if (name == "guided") return Strategy::guided;
    if (name == "constrained") return Strategy::constrained;
    if (name == "random") return Strategy::random;
    fail(errc::invalid_argument, "unknown strategy: " + name);
}

namespace {

int middle_slice(const Phantom& ph) { return ph.labels.geom.dims[2] / 2; }

// rho gathered by one needle tip from the synthetic map.
double tip_rho(const Phantom& ph, const ROIRect2& roi) {
    return roi_mean_or_nan(ph.rho_truth, roi);
}

void push_stats(StrategyReport& rep, const std::vector<double>& rhos, int access) {
    auto st = sample_stats(rhos);
    rep.rho_bar_samples.push_back(st.mean);
    rep.s_samples.push_back(st.sd);
    rep.access_indices.push_back(access);
}

StrategyReport run_guided(const Phantom& ph, const NeedleConstraints& c, int n_biopsy,
                          const StrategyOptions& opt) {
    StrategyReport rep;
    const int slice = middle_slice(ph);

    auto part = superpixels_2d(ph.dmap, ph.labels, slice, opt.target_area_mm2);
    std::vector<double> domain_ds;
    for (std::size_t i = 0; i < part.region_labels.size(); ++i)
        if (part.region_labels[i] >= 0) domain_ds.push_back(ph.dmap.values[i]);
    auto targets = optimal_d_values(domain_ds, n_biopsy, opt.target_mode);

    ExclusionRules rules;
    rules.min_boundary_mm = opt.exclusion_boundary_mm;
    rules.overlap_mask = &ph.labels;
    auto sel = select_candidates(part, targets, rules);

    auto plan = guided_search(part, sel.picks, ph.dmap, ph.labels, c);

    // One optimal set per access point: the groups arrive best-first.
    std::vector<const Intervention*> chosen;
    std::vector<int> seen;
    for (const auto& iv : plan) {
        if (std::find(seen.begin(), seen.end(), iv.access_index) != seen.end()) continue;
        seen.push_back(iv.access_index);
        chosen.push_back(&iv);
    }

    for (std::size_t id = 0; id < chosen.size(); ++id) {
        const Intervention& iv = *chosen[id];
        std::vector<BiopsySample> line;
        std::vector<double> ds, rhos;
        for (std::size_t j = 0; j < iv.paths.size(); ++j) {
            BiopsySample s;
            s.d_value = iv.paths[j].d_value;
            s.rho = tip_rho(ph, iv.paths[j].tip_roi);
            s.intervention_id = static_cast<int>(id);
            s.path_index = static_cast<int>(j);
            line.push_back(s);
            ds.push_back(s.d_value);
            rhos.push_back(s.rho);
        }
        push_stats(rep, rhos, iv.access_index);
        rep.guided_samples.push_back(std::move(line));

        // Refit needs D variation; a line with all-equal tips carries no model.
        std::vector<double> uniq = ds;
        std::sort(uniq.begin(), uniq.end());
        uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
        if (uniq.size() < 2) continue;

        auto fit = fit_linear(ds, rhos);
        rep.guided_fits.push_back(fit);

        ScalarGrid3 converted(ph.dmap.geom, UnitTag::density_3d_cells_per_mm3, kNaN);
        for (std::size_t i = 0; i < converted.values.size(); ++i) {
            if (ph.labels.labels[i] != static_cast<std::uint8_t>(TissueLabel::tumor)) continue;
            double d = ph.dmap.values[i];
            if (!std::isfinite(d)) continue;
            converted.values[i] = std::max(0.0, fit.k2d * d + fit.d2d);
        }
        rep.cell_load_estimates.push_back(cell_load(converted, ph.labels));
    }
    rep.enumerated = plan.size();
    return rep;
}

StrategyReport run_constrained(const Phantom& ph, const NeedleConstraints& c, int n_biopsy,
                               const StrategyOptions& opt) {
    StrategyReport rep;
    const int slice = middle_slice(ph);
    auto sites = access_sites(ph.labels, slice, c);

    // Per-path tip densities, reused across every combination.
    std::vector<std::vector<double>> site_rho(sites.size());
    run_workers(opt.workers, [&](int w) {
        for (std::size_t i = w; i < sites.size(); i += std::max(1, opt.workers)) {
            auto& rs = site_rho[i];
            rs.reserve(sites[i].paths.size());
            for (const auto& p : sites[i].paths) rs.push_back(tip_rho(ph, p.tip_roi));
        }
    });

    std::vector<std::size_t> counts(sites.size(), 0);
    run_workers(opt.workers, [&](int w) {
        for (std::size_t i = w; i < sites.size(); i += std::max(1, opt.workers)) {
            std::size_t n = 0;
            for_each_path_set(sites[i], c, n_biopsy, [&](const std::vector<int>&) {
                ++n;
                return true;
            });
            counts[i] = n;
        }
    });
    std::vector<std::size_t> prefix(sites.size() + 1, 0);
    for (std::size_t i = 0; i < sites.size(); ++i) prefix[i + 1] = prefix[i] + counts[i];
    const std::size_t total = prefix.back();
    rep.enumerated = total;

    const std::size_t stride =
        (opt.max_interventions > 0 && total > opt.max_interventions)
            ? (total + opt.max_interventions - 1) / opt.max_interventions
            : 1;

    struct Row {
        double rho_bar, s;
        int access;
    };
    std::vector<std::vector<Row>> rows(sites.size());
    run_workers(opt.workers, [&](int w) {
        std::vector<double> rhos;
        for (std::size_t i = w; i < sites.size(); i += std::max(1, opt.workers)) {
            std::size_t local = 0;
            for_each_path_set(sites[i], c, n_biopsy, [&](const std::vector<int>& idx) {
                std::size_t gidx = prefix[i] + local++;
                if (gidx % stride != 0) return true;
                rhos.clear();
                for (int k : idx) rhos.push_back(site_rho[i][static_cast<std::size_t>(k)]);
                auto st = sample_stats(rhos);
                rows[i].push_back({st.mean, st.sd, sites[i].index});
                return true;
            });
        }
    });

    for (const auto& rs : rows)
        for (const auto& r : rs) {
            rep.rho_bar_samples.push_back(r.rho_bar);
            rep.s_samples.push_back(r.s);
            rep.access_indices.push_back(r.access);
        }
    return rep;
}

StrategyReport run_random(const Phantom& ph, const NeedleConstraints& c, int n_biopsy,
                          const StrategyOptions& opt) {
    if (opt.n_reps < 1)
        fail(errc::invalid_argument, "run_strategy: random needs n_reps >= 1");
    StrategyReport rep;
    const int slice = middle_slice(ph);
    auto sites = access_sites(ph.labels, slice, c);

    struct Row {
        double rho_bar, s;
        int access;
    };
    std::vector<Row> rows(static_cast<std::size_t>(opt.n_reps));
    std::atomic<int> next{0};
    run_workers(opt.workers, [&](int) {
        std::vector<double> rhos;
        for (;;) {
            int rep_i = next.fetch_add(1);
            if (rep_i >= opt.n_reps) break;
            auto iv = random_intervention(sites, c, n_biopsy,
                                          opt.seed ^ static_cast<std::uint64_t>(rep_i));
            rhos.clear();
            for (const auto& p : iv.paths) rhos.push_back(tip_rho(ph, p.tip_roi));
            auto st = sample_stats(rhos);
            rows[static_cast<std::size_t>(rep_i)] = {st.mean, st.sd, iv.access_index};
        }
    });

    for (const auto& r : rows) {
        rep.rho_bar_samples.push_back(r.rho_bar);
        rep.s_samples.push_back(r.s);
        rep.access_indices.push_back(r.access);
    }
    rep.enumerated = static_cast<std::size_t>(opt.n_reps);
    return rep;
}

} // namespace

StrategyReport run_strategy(const Phantom& phantom, Strategy strategy,
                            const NeedleConstraints& c, int n_biopsy,
                            const StrategyOptions& opt) {
    if (n_biopsy < 1)
        fail(errc::invalid_argument, "run_strategy: n_biopsy must be >= 1");
    c.validate();

    StrategyReport rep;
    switch (strategy) {
    case Strategy::guided:      rep = run_guided(phantom, c, n_biopsy, opt); break;
    case Strategy::constrained: rep = run_constrained(phantom, c, n_biopsy, opt); break;
    case Strategy::random:      rep = run_random(phantom, c, n_biopsy, opt); break;
    }
    rep.strategy = strategy;
    rep.n_biopsy = n_biopsy;
    rep.mu_rho_ref = phantom.mu_rho;
    rep.sigma_rho_ref = phantom.sigma_rho;
    return rep;
}

StrategyComparison compare_report(const std::vector<StrategyReport>& reports) {
    if (reports.empty())
        fail(errc::empty_comparison, "compare_report: no reports");
    for (const auto& r : reports) {
        if (r.rho_bar_samples.empty())
            fail(errc::empty_comparison, "compare_report: report without interventions");
        if (r.mu_rho_ref != reports.front().mu_rho_ref ||
            r.sigma_rho_ref != reports.front().sigma_rho_ref)
            fail(errc::invalid_argument, "compare_report: reports from different phantoms");
    }

    StrategyComparison cmp;
    cmp.mu_rho_ref = reports.front().mu_rho_ref;
    cmp.sigma_rho_ref = reports.front().sigma_rho_ref;

    const double mu = cmp.mu_rho_ref;
    const double sigma = cmp.sigma_rho_ref;
    cmp.rho_bar_edges = make_bin_edges(0.0, std::max(2.0 * mu, 1.0), std::max(2.0 * mu, 1.0) / 64.0);
    cmp.s_edges = make_bin_edges(0.0, std::max(4.0 * sigma, 1.0), std::max(4.0 * sigma, 1.0) / 64.0);

    for (const auto& r : reports) {
        ComparisonRow row;
        row.strategy = r.strategy;
        row.n_biopsy = r.n_biopsy;
        row.interventions = r.rho_bar_samples.size();

        auto st = sample_stats(r.rho_bar_samples);
        row.rho_bar_mean = st.mean;
        row.rho_bar_sd = st.sd;

        std::size_t hits = 0;
        for (double rb : r.rho_bar_samples)
            if (std::fabs(rb - mu) <= 0.1 * mu) ++hits;
        row.hit_fraction = static_cast<double>(hits) / r.rho_bar_samples.size();

        cmp.rho_bar_hists.push_back(make_histogram(r.rho_bar_samples, cmp.rho_bar_edges));
        auto sh = make_histogram(r.s_samples, cmp.s_edges);
        if (sh.n_total > 0.0) {
            std::size_t best = 0;
            for (std::size_t b = 1; b < sh.counts.size(); ++b)
                if (sh.counts[b] > sh.counts[best]) best = b;
            row.modal_s = 0.5 * (cmp.s_edges[best] + cmp.s_edges[best + 1]);
            row.modal_s_distance = std::fabs(row.modal_s - sigma);
        } else {
            row.modal_s = kNaN;
            row.modal_s_distance = kNaN;
        }
        cmp.s_hists.push_back(std::move(sh));
        cmp.rows.push_back(row);
    }
    return cmp;
}

namespace {

double json_double(const nlohmann::json& j) {
    return j.is_null() ? kNaN : j.get<double>();
}

nlohmann::ordered_json fit_json(const DensityModel2d& m) {
    nlohmann::ordered_json j;
    j["slope"] = m.k2d;
    j["intercept"] = m.d2d;
    j["pearson_r"] = m.pearson_r;
    j["n"] = m.n;
    j["residual_se"] = m.residual_se;
    j["sxx"] = m.sxx;
    j["x_mean"] = m.x_mean;
    return j;
}

DensityModel2d fit_from_json(const nlohmann::json& j) {
    DensityModel2d m;
    m.k2d = json_double(j.at("slope"));
    m.d2d = json_double(j.at("intercept"));
    m.pearson_r = json_double(j.at("pearson_r"));
    m.n = j.at("n").get<std::size_t>();
    m.residual_se = json_double(j.at("residual_se"));
    m.sxx = json_double(j.at("sxx"));
    m.x_mean = json_double(j.at("x_mean"));
    return m;
}

} // namespace

std::string strategy_report_to_json(const StrategyReport& report) {
    nlohmann::ordered_json j;
    j["strategy"] = strategy_name(report.strategy);
    j["n_biopsy"] = report.n_biopsy;
    j["mu_rho_ref"] = report.mu_rho_ref;
    j["sigma_rho_ref"] = report.sigma_rho_ref;
    j["enumerated"] = report.enumerated;
    j["rho_bar_samples"] = report.rho_bar_samples;
    j["s_samples"] = report.s_samples;
    j["access_indices"] = report.access_indices;
    if (report.strategy == Strategy::guided) {
        auto& lines = j["guided_samples"] = nlohmann::ordered_json::array();
        for (const auto& line : report.guided_samples) {
            nlohmann::ordered_json jl = nlohmann::ordered_json::array();
            for (const auto& s : line) {
                nlohmann::ordered_json js;
                js["d_value"] = s.d_value;
                js["rho"] = s.rho;
                js["intervention_id"] = s.intervention_id;
                js["path_index"] = s.path_index;
                jl.push_back(std::move(js));
            }
            lines.push_back(std::move(jl));
        }
        auto& fits = j["fits"] = nlohmann::ordered_json::array();
        for (const auto& f : report.guided_fits) fits.push_back(fit_json(f));
        j["cell_load_estimates"] = report.cell_load_estimates;
    }
    return j.dump(2) + "\n";
}

StrategyReport strategy_report_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        fail(errc::format_error, std::string("strategy report: malformed JSON: ") + e.what());
    }
    StrategyReport rep;
    try {
        rep.strategy = strategy_from_name(j.at("strategy").get<std::string>());
        rep.n_biopsy = j.at("n_biopsy").get<int>();
        rep.mu_rho_ref = json_double(j.at("mu_rho_ref"));
        rep.sigma_rho_ref = json_double(j.at("sigma_rho_ref"));
        rep.enumerated = j.at("enumerated").get<std::size_t>();
        for (const auto& v : j.at("rho_bar_samples")) rep.rho_bar_samples.push_back(json_double(v));
        for (const auto& v : j.at("s_samples")) rep.s_samples.push_back(json_double(v));
        for (const auto& v : j.at("access_indices")) rep.access_indices.push_back(v.get<int>());
        if (auto it = j.find("guided_samples"); it != j.end()) {
            for (const auto& jl : *it) {
                std::vector<BiopsySample> line;
                for (const auto& js : jl) {
                    BiopsySample s;
                    s.d_value = json_double(js.at("d_value"));
                    s.rho = json_double(js.at("rho"));
                    s.intervention_id = js.at("intervention_id").get<int>();
                    s.path_index = js.at("path_index").get<int>();
                    line.push_back(s);
                }
                rep.guided_samples.push_back(std::move(line));
            }
        }
        if (auto it = j.find("fits"); it != j.end())
            for (const auto& jf : *it) rep.guided_fits.push_back(fit_from_json(jf));
        if (auto it = j.find("cell_load_estimates"); it != j.end())
            for (const auto& v : *it) rep.cell_load_estimates.push_back(json_double(v));
    } catch (const nlohmann::json::exception& e) {
        fail(errc::format_error, std::string("strategy report: bad field: ") + e.what());
    }
    if (rep.s_samples.size() != rep.rho_bar_samples.size() ||
        rep.access_indices.size() != rep.rho_bar_samples.size())
        fail(errc::format_error, "strategy report: sample arrays disagree in length");
    return rep;
}

std::string phantom_meta_to_json(const Phantom& phantom) {
    nlohmann::ordered_json j;
    j["mu_rho"] = phantom.mu_rho;
    j["sigma_rho"] = phantom.sigma_rho;
    j["seed"] = phantom.seed;
    j["model"] = {{"slope", phantom.model_truth.slope},
                  {"intercept", phantom.model_truth.intercept}};
    return j.dump(2) + "\n";
}

void phantom_meta_from_json(const std::string& text, Phantom& phantom) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        fail(errc::format_error, std::string("phantom meta: malformed JSON: ") + e.what());
    }
    try {
        phantom.mu_rho = j.at("mu_rho").get<double>();
        phantom.sigma_rho = j.at("sigma_rho").get<double>();
        phantom.seed = j.at("seed").get<std::uint64_t>();
        phantom.model_truth.slope = j.at("model").at("slope").get<double>();
        phantom.model_truth.intercept = j.at("model").at("intercept").get<double>();
    } catch (const nlohmann::json::exception& e) {
        fail(errc::format_error, std::string("phantom meta: bad field: ") + e.what());
    }
}

} // namespace dwiplan
