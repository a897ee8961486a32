// dwiplan: command-line pipeline for DWI-guided biopsy planning.
//
// Subcommands mirror the protocol stages: phantom, dmap, interp, partition,
// plan, simulate, estimate, report. Files are the only interface between
// stages; identical inputs and seeds give bit-identical outputs.
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dwiplan/config.hpp"
#include "dwiplan/density.hpp"
#include "dwiplan/error.hpp"
#include "dwiplan/gridio.hpp"
#include "dwiplan/histogram.hpp"
#include "dwiplan/ivim.hpp"
#include "dwiplan/needle.hpp"
#include "dwiplan/partition.hpp"
#include "dwiplan/resample.hpp"
#include "dwiplan/roi.hpp"
#include "dwiplan/simulate.hpp"
#include "dwiplan/stats.hpp"
#include "dwiplan/svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;
using namespace dwiplan;

namespace {

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(errc::io_error, "cannot open: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(errc::io_error, "cannot open for writing: " + path);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) fail(errc::io_error, "write failed: " + path);
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(errc::io_error, "cannot create directory " + dir + ": " + ec.message());
}

// Shortest round-trip decimal for CSV cells; NaN spelled out.
std::string csv_num(double v) {
    if (std::isnan(v)) return "nan";
    return json(v).dump();
}

TargetMode target_mode_from_name(const std::string& name) {
    if (name == "automatic") return TargetMode::automatic;
    if (name == "symmetric") return TargetMode::symmetric;
    return TargetMode::asymmetric;
}

int resolve_slice(int flag_slice, const GridGeometry& g) {
    if (flag_slice >= 0) {
        if (flag_slice >= g.dims[2])
            fail(errc::invalid_argument, "slice " + std::to_string(flag_slice) +
                                             " out of range, grid has " +
                                             std::to_string(g.dims[2]) + " slices");
        return flag_slice;
    }
    return g.dims[2] / 2;
}

ordered_json region_json(const RegionStats& r) {
    ordered_json j;
    j["id"] = r.id;
    j["mean_d"] = r.mean_d;
    j["var_d"] = r.var_d;
    j["size"] = r.size;
    j["cell_count"] = r.cell_count;
    j["centroid_mm"] = r.centroid_mm;
    j["min_boundary_distance_mm"] = r.min_boundary_distance_mm;
    j["excluded"] = r.excluded;
    if (r.excluded) j["exclusion_reason"] = r.exclusion_reason;
    return j;
}

ordered_json targets_json(const OptimalDTargets& t) {
    ordered_json j;
    j["n_biopsy"] = t.n_biopsy;
    j["formula"] = t.mode == TargetFormula::symmetric_eq4 ? "symmetric" : "asymmetric";
    j["d_min"] = t.d_min;
    j["d_max"] = t.d_max;
    j["d_median"] = t.d_median;
    j["targets"] = t.targets;
    return j;
}

ordered_json picks_json(const CandidateSelection& sel) {
    ordered_json arr = ordered_json::array();
    for (const auto& p : sel.picks) {
        ordered_json j;
        j["target_d"] = p.target_d;
        j["region_id"] = p.region_id;
        j["mean_d"] = p.mean_d;
        j["abs_error"] = p.abs_error;
        arr.push_back(std::move(j));
    }
    return arr;
}

ordered_json model_json(const DensityModel2d& m) {
    ordered_json j;
    j["slope"] = m.k2d;
    j["intercept"] = m.d2d;
    j["pearson_r"] = m.pearson_r;
    j["n"] = m.n;
    j["residual_se"] = m.residual_se;
    j["sxx"] = m.sxx;
    j["x_mean"] = m.x_mean;
    return j;
}

struct PhantomFlags {
    std::string out_dir;
    std::vector<int> dims;
    std::vector<double> spacing;
    PhantomSpec spec;
    std::vector<double> necrosis_offset, fat_offset;
};

void run_phantom(PhantomFlags& f, const PipelineConfig& cfg, bool sigma_set, bool seed_set) {
    if (f.dims.size() == 3) f.spec.dims = {f.dims[0], f.dims[1], f.dims[2]};
    if (f.spacing.size() == 3) f.spec.spacing_mm = {f.spacing[0], f.spacing[1], f.spacing[2]};
    if (f.necrosis_offset.size() == 2)
        f.spec.necrosis_offset_mm = {f.necrosis_offset[0], f.necrosis_offset[1]};
    if (f.fat_offset.size() == 2) f.spec.fat_offset_mm = {f.fat_offset[0], f.fat_offset[1]};
    if (!sigma_set) f.spec.sigma_noise = cfg.sigma_noise;
    if (!seed_set) f.spec.seed = cfg.seed;

    auto ph = generate_phantom(f.spec);
    ensure_dir(f.out_dir);
    save_grid(ph.dmap, f.out_dir + "/dmap.grid");
    save_grid(ph.labels, f.out_dir + "/labels.grid");
    save_grid(ph.rho_truth, f.out_dir + "/rho_truth.grid");
    write_text(f.out_dir + "/phantom.json", phantom_meta_to_json(ph));
}

Phantom load_phantom(const std::string& dir) {
    Phantom ph;
    ph.dmap = load_scalar_grid(dir + "/dmap.grid");
    ph.labels = load_label_grid(dir + "/labels.grid");
    ph.rho_truth = load_scalar_grid(dir + "/rho_truth.grid");
    phantom_meta_from_json(read_text(dir + "/phantom.json"), ph);
    require_same_geometry(ph.dmap.geom, ph.labels.geom, "phantom directory");
    require_same_geometry(ph.dmap.geom, ph.rho_truth.geom, "phantom directory");
    return ph;
}

struct DmapFlags {
    std::vector<std::string> inputs;
    std::string mask_path, out_path;
    std::vector<double> b_values;
    double max_residual = 0.0;
};

void run_dmap(const DmapFlags& f) {
    if (f.inputs.size() != f.b_values.size())
        fail(errc::invalid_argument, "dmap: got " + std::to_string(f.inputs.size()) +
                                         " input grids for " + std::to_string(f.b_values.size()) +
                                         " b-values");
    std::vector<ScalarGrid3> stack;
    stack.reserve(f.inputs.size());
    for (const auto& p : f.inputs) stack.push_back(load_scalar_grid(p));
    auto mask = load_label_grid(f.mask_path);

    auto res = build_dmap(stack, f.b_values, mask, f.max_residual);
    save_grid(res.dmap, f.out_path);
    if (res.invalid_signal_voxels > 0 || res.residual_rejected_voxels > 0) {
        ordered_json w;
        w["warning"] = "voxels dropped from the fit";
        w["invalid_signal_voxels"] = res.invalid_signal_voxels;
        w["residual_rejected_voxels"] = res.residual_rejected_voxels;
        std::cerr << w.dump() << "\n";
    }
}

struct InterpFlags {
    std::string in_path, mask_path, out_path, out_labels_path, kl_csv_path;
    int u = 0;
    int u_max = 0;
    bool exclude_necrosis = false;
};

std::vector<double> tumor_values(const ScalarGrid3& grid, const LabelGrid3& mask) {
    std::vector<double> out;
    for (std::size_t i = 0; i < grid.values.size(); ++i)
        if (mask.labels[i] == static_cast<std::uint8_t>(TissueLabel::tumor) &&
            std::isfinite(grid.values[i]))
            out.push_back(grid.values[i]);
    return out;
}

void run_interp(const InterpFlags& f, const PipelineConfig& cfg) {
    auto dmap = load_scalar_grid(f.in_path);
    auto mask = load_label_grid(f.mask_path);
    const int u = f.u > 0 ? f.u : cfg.upsample;

    auto up = resample_bicubic(dmap, mask, u, f.exclude_necrosis);
    save_grid(up, f.out_path);
    if (!f.out_labels_path.empty()) save_grid(upsample_labels_nn(mask, u), f.out_labels_path);

    if (f.kl_csv_path.empty()) return;
    const int u_max = f.u_max > 0 ? f.u_max : 60;

    auto orig = tumor_values(dmap, mask);
    if (orig.empty()) fail(errc::empty_mask, "interp: no finite tumor values for the KL curve");
    auto [mn_it, mx_it] = std::minmax_element(orig.begin(), orig.end());
    double lo = *mn_it, hi = *mx_it;
    double width = fd_bin_width(orig);
    if (!(width > 0.0)) width = hi > lo ? hi - lo : 1.0;
    if (!(hi > lo)) hi = lo + width;
    auto edges = make_bin_edges(lo, hi, width);
    auto p = make_histogram(orig, edges);

    std::string csv = "u,kl_divergence\n";
    for (int uu = 1; uu <= u_max; ++uu) {
        auto up_u = resample_bicubic(dmap, mask, uu, f.exclude_necrosis);
        auto labels_u = upsample_labels_nn(mask, uu);
        auto q = make_histogram(tumor_values(up_u, labels_u), edges);
        csv += std::to_string(uu) + "," + csv_num(kl_divergence(p, q)) + "\n";
    }
    write_text(f.kl_csv_path, csv);
}

struct PartitionFlags {
    std::string in_path, mask_path, out_json, out_regions;
    int slice = -1;
    bool three_d = false;
    double area = 0.0, volume = 0.0;
    int n_biopsy = 0;
    std::string target_mode = "automatic";
};

SuperpixelPartition partition_for(const ScalarGrid3& dmap, const LabelGrid3& mask, bool three_d,
                                  int slice, double area, double volume) {
    if (three_d) return supervoxels_3d(dmap, mask, volume);
    return superpixels_2d(dmap, mask, slice, area);
}

std::vector<double> domain_values(const SuperpixelPartition& part, const ScalarGrid3& dmap) {
    std::vector<double> out;
    for (std::size_t i = 0; i < part.region_labels.size(); ++i)
        if (part.region_labels[i] >= 0) out.push_back(dmap.values[i]);
    return out;
}

void run_partition(const PartitionFlags& f, const PipelineConfig& cfg) {
    auto dmap = load_scalar_grid(f.in_path);
    auto mask = load_label_grid(f.mask_path);
    const int slice = f.three_d ? -1 : resolve_slice(f.slice, dmap.geom);
    const double area = f.area > 0.0 ? f.area : cfg.superpixel_area_mm2;
    const double volume = f.volume > 0.0 ? f.volume : cfg.supervoxel_volume_mm3;
    const int n_biopsy = f.n_biopsy > 0 ? f.n_biopsy : cfg.n_biopsy;

    auto part = partition_for(dmap, mask, f.three_d, slice, area, volume);
    auto targets = optimal_d_values(domain_values(part, dmap), n_biopsy,
                                    target_mode_from_name(f.target_mode));
    ExclusionRules rules;
    rules.min_boundary_mm = cfg.exclusion_boundary_mm;
    rules.overlap_mask = &mask;
    auto sel = select_candidates(part, targets, rules);

    ordered_json out;
    out["mode"] = f.three_d ? "volume" : "slice";
    if (!f.three_d) out["slice"] = slice;
    if (!part.warning.empty()) out["warning"] = part.warning;
    out["targets"] = targets_json(targets);
    out["picks"] = picks_json(sel);
    out["excluded"] = {{"boundary", sel.excluded_boundary},
                       {"necrosis", sel.excluded_necrosis},
                       {"fat", sel.excluded_fat}};
    ordered_json regions = ordered_json::array();
    for (const auto& r : sel.regions) regions.push_back(region_json(r));
    out["regions"] = std::move(regions);
    write_text(f.out_json, out.dump(2) + "\n");

    if (!f.out_regions.empty()) {
        ScalarGrid3 ids(dmap.geom, UnitTag::dimensionless,
                        std::numeric_limits<double>::quiet_NaN());
        for (std::size_t i = 0; i < ids.values.size(); ++i)
            if (part.region_labels[i] >= 0) ids.values[i] = part.region_labels[i];
        save_grid(ids, f.out_regions);
    }
}

struct PlanFlags {
    std::string dmap_path, mask_path, out_path;
    int slice = -1;
    double area = 0.0;
    int n_biopsy = 0;
    std::string target_mode = "automatic";
};

void run_plan(const PlanFlags& f, const PipelineConfig& cfg) {
    auto dmap = load_scalar_grid(f.dmap_path);
    auto mask = load_label_grid(f.mask_path);
    const int slice = resolve_slice(f.slice, dmap.geom);
    const double area = f.area > 0.0 ? f.area : cfg.superpixel_area_mm2;
    const int n_biopsy = f.n_biopsy > 0 ? f.n_biopsy : cfg.n_biopsy;

    auto part = superpixels_2d(dmap, mask, slice, area);
    auto targets = optimal_d_values(domain_values(part, dmap), n_biopsy,
                                    target_mode_from_name(f.target_mode));
    ExclusionRules rules;
    rules.min_boundary_mm = cfg.exclusion_boundary_mm;
    rules.overlap_mask = &mask;
    auto sel = select_candidates(part, targets, rules);
    auto plan = guided_search(part, sel.picks, dmap, mask, cfg.constraints);

    ordered_json out;
    out["slice"] = slice;
    out["targets"] = targets_json(targets);
    out["picks"] = picks_json(sel);
    out["interventions"] = json::parse(plan_to_json(plan));
    write_text(f.out_path, out.dump(2) + "\n");
}

struct SimulateFlags {
    std::string phantom_dir, strategy, out_path, samples_csv;
    int n_biopsy = 0;
    int reps = 0;
    std::size_t max_interventions = 0;
    double area = 0.0;
    std::string target_mode = "automatic";
    std::uint64_t seed = 0;
};

void run_simulate(const SimulateFlags& f, const PipelineConfig& cfg, int workers, bool seed_set) {
    auto ph = load_phantom(f.phantom_dir);
    StrategyOptions opt;
    opt.n_reps = f.reps > 0 ? f.reps : 20000;
    opt.max_interventions = f.max_interventions;
    opt.workers = workers;
    opt.seed = seed_set ? f.seed : cfg.seed;
    opt.target_area_mm2 = f.area > 0.0 ? f.area : cfg.superpixel_area_mm2;
    opt.target_mode = target_mode_from_name(f.target_mode);
    opt.exclusion_boundary_mm = cfg.exclusion_boundary_mm;
    const int n_biopsy = f.n_biopsy > 0 ? f.n_biopsy : cfg.n_biopsy;

    auto rep = run_strategy(ph, strategy_from_name(f.strategy), cfg.constraints, n_biopsy, opt);
    write_text(f.out_path, strategy_report_to_json(rep));

    if (!f.samples_csv.empty()) {
        std::string csv = "intervention,access_index,rho_bar,s\n";
        for (std::size_t i = 0; i < rep.rho_bar_samples.size(); ++i)
            csv += std::to_string(i) + "," + std::to_string(rep.access_indices[i]) + "," +
                   csv_num(rep.rho_bar_samples[i]) + "," + csv_num(rep.s_samples[i]) + "\n";
        write_text(f.samples_csv, csv);
    }
}

struct EstimateFlags {
    std::string samples_csv, from_report, dmap_path, mask_path, out_dir;
    std::string samples_unit = "2d";
    int line = 0;
};

void parse_samples_csv(const std::string& path, std::vector<double>& ds,
                       std::vector<double>& rhos) {
    std::ifstream in(path);
    if (!in) fail(errc::io_error, "cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) fail(errc::format_error, path + ": empty samples file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "d,rho")
        fail(errc::format_error, path + ": expected header \"d,rho\", found \"" + line + "\"");
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos)
            fail(errc::format_error, path + ": line " + std::to_string(lineno) + " has no comma");
        try {
            std::size_t used = 0;
            double d = std::stod(line.substr(0, comma), &used);
            double r = std::stod(line.substr(comma + 1));
            (void)used;
            ds.push_back(d);
            rhos.push_back(r);
        } catch (const std::exception&) {
            fail(errc::format_error, path + ": line " + std::to_string(lineno) + " is not numeric");
        }
    }
    if (ds.size() < 2) fail(errc::insufficient_data, path + ": need at least 2 samples");
}

void samples_from_report(const EstimateFlags& f, std::vector<double>& ds,
                         std::vector<double>& rhos) {
    auto rep = strategy_report_from_json(read_text(f.from_report));
    if (rep.guided_samples.empty())
        fail(errc::insufficient_data, f.from_report + ": report carries no biopsy samples");
    auto take_line = [&](const std::vector<BiopsySample>& line) {
        for (const auto& s : line) {
            ds.push_back(s.d_value);
            rhos.push_back(s.rho);
        }
    };
    if (f.line < 0)
        for (const auto& line : rep.guided_samples) take_line(line);
    else if (static_cast<std::size_t>(f.line) < rep.guided_samples.size())
        take_line(rep.guided_samples[static_cast<std::size_t>(f.line)]);
    else
        fail(errc::invalid_argument, "estimate: --line " + std::to_string(f.line) +
                                         " out of range, report has " +
                                         std::to_string(rep.guided_samples.size()) + " lines");
}

void run_estimate(const EstimateFlags& f) {
    std::vector<double> ds, rhos;
    std::string unit = f.samples_unit;
    if (!f.from_report.empty()) {
        samples_from_report(f, ds, rhos);
        unit = "3d"; // guided samples come from the 3d truth map
    } else {
        parse_samples_csv(f.samples_csv, ds, rhos);
    }

    auto dmap = load_scalar_grid(f.dmap_path);
    auto mask = load_label_grid(f.mask_path);
    auto fit = fit_linear(ds, rhos);
    ensure_dir(f.out_dir);

    ordered_json out;
    out["samples_unit"] = unit;
    out["n_samples"] = ds.size();
    out["model"] = model_json(fit);

    std::vector<double> xs = ds;
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    ordered_json pis = ordered_json::array();
    for (double x : xs) {
        auto [lo, hi] = prediction_interval(fit, x, 0.95);
        pis.push_back({{"x", x}, {"lo", lo}, {"hi", hi}});
    }
    out["prediction_interval_95"] = std::move(pis);

    ScalarGrid3 rho3d(dmap.geom, UnitTag::density_3d_cells_per_mm3,
                      std::numeric_limits<double>::quiet_NaN());
    if (unit == "2d") {
        auto maps = density_maps(dmap, fit, paper_cancer_fraction_model());
        DensityScale scale;
        for (std::size_t i = 0; i < rho3d.values.size(); ++i) {
            double c = maps.cancer.values[i], nc = maps.non_cancer.values[i];
            if (std::isfinite(c) && std::isfinite(nc))
                rho3d.values[i] = scale_2d_to_3d(c, scale.m_c) + scale_2d_to_3d(nc, scale.m_nc);
        }
        save_grid(maps.total, f.out_dir + "/total_2d.grid");
        save_grid(maps.cancer, f.out_dir + "/cancer_2d.grid");
        save_grid(maps.non_cancer, f.out_dir + "/non_cancer_2d.grid");
        out["cancer_extrapolated_voxels"] = maps.cancer_extrapolated_voxels;
    } else {
        for (std::size_t i = 0; i < rho3d.values.size(); ++i) {
            if (mask.labels[i] != static_cast<std::uint8_t>(TissueLabel::tumor)) continue;
            double d = dmap.values[i];
            if (!std::isfinite(d)) continue;
            rho3d.values[i] = std::max(0.0, fit.k2d * d + fit.d2d);
        }
    }
    save_grid(rho3d, f.out_dir + "/rho_3d.grid");

    out["cell_load"] = cell_load(rho3d, mask);
    auto vals = tumor_values(rho3d, mask);
    if (!vals.empty()) {
        auto st = sample_stats(vals);
        out["rho3d_mean"] = st.mean;
        out["rho3d_sd"] = std::isnan(st.sd) ? ordered_json() : ordered_json(st.sd);
    }
    write_text(f.out_dir + "/estimate.json", out.dump(2) + "\n");
}

struct ReportFlags {
    std::vector<std::string> inputs;
    std::string out_dir;
};

void run_report(const ReportFlags& f) {
    std::vector<StrategyReport> reports;
    reports.reserve(f.inputs.size());
    for (const auto& p : f.inputs) reports.push_back(strategy_report_from_json(read_text(p)));
    auto cmp = compare_report(reports);
    ensure_dir(f.out_dir);

    std::string csv =
        "strategy,n_biopsy,interventions,rho_bar_mean,rho_bar_sd,hit_fraction,"
        "modal_s,modal_s_distance,mu_rho_ref,sigma_rho_ref\n";
    for (const auto& row : cmp.rows) {
        csv += std::string(strategy_name(row.strategy)) + "," + std::to_string(row.n_biopsy) +
               "," + std::to_string(row.interventions) + "," + csv_num(row.rho_bar_mean) + "," +
               csv_num(row.rho_bar_sd) + "," + csv_num(row.hit_fraction) + "," +
               csv_num(row.modal_s) + "," + csv_num(row.modal_s_distance) + "," +
               csv_num(cmp.mu_rho_ref) + "," + csv_num(cmp.sigma_rho_ref) + "\n";
    }
    write_text(f.out_dir + "/summary.csv", csv);

    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& row = cmp.rows[i];
        char stem[64];
        std::snprintf(stem, sizeof(stem), "%02zu_%s_n%d", i, strategy_name(row.strategy),
                      row.n_biopsy);
        std::string title = std::string(strategy_name(row.strategy)) + " strategy, " +
                            std::to_string(row.n_biopsy) + " biopsies";
        emit_histogram_svg(cmp.rho_bar_hists[i], {{cmp.mu_rho_ref, "mu_rho"}},
                           f.out_dir + "/" + stem + "_rho_bar.svg", title,
                           "mean sampled density (cells/mm^3)");
        emit_histogram_svg(cmp.s_hists[i], {{cmp.sigma_rho_ref, "sigma_rho"}},
                           f.out_dir + "/" + stem + "_s.svg", title,
                           "sample SD (cells/mm^3)");
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"DWI-guided biopsy planning pipeline"};
    app.require_subcommand(1);
    std::string config_path;
    int workers = 1;
    app.add_option("--config", config_path, "pipeline config JSON");
    app.add_option("--workers", workers, "worker threads for compute stages")
        ->check(CLI::Range(1, 256));

    PhantomFlags pf;
    auto* sub_phantom = app.add_subcommand("phantom", "synthesize a ground-truth phantom");
    sub_phantom->add_option("--out-dir", pf.out_dir)->required();
    sub_phantom->add_option("--dims", pf.dims)->expected(3);
    sub_phantom->add_option("--spacing", pf.spacing)->expected(3);
    sub_phantom->add_option("--rx", pf.spec.rx_mm);
    sub_phantom->add_option("--ry", pf.spec.ry_mm);
    sub_phantom->add_option("--d-lo", pf.spec.d_lo);
    sub_phantom->add_option("--d-hi", pf.spec.d_hi);
    sub_phantom->add_option("--bumps", pf.spec.n_bumps);
    auto* opt_sigma = sub_phantom->add_option("--sigma", pf.spec.sigma_noise);
    sub_phantom->add_option("--necrosis-radius", pf.spec.necrosis_radius_mm);
    sub_phantom->add_option("--necrosis-offset", pf.necrosis_offset)->expected(2);
    sub_phantom->add_option("--fat-radius", pf.spec.fat_radius_mm);
    sub_phantom->add_option("--fat-offset", pf.fat_offset)->expected(2);
    auto* opt_phantom_seed = sub_phantom->add_option("--seed", pf.spec.seed);

    DmapFlags df;
    auto* sub_dmap = app.add_subcommand("dmap", "fit a D-map from a DWI stack");
    sub_dmap->add_option("--in", df.inputs, "signal-ratio grids, ascending b order")
        ->required()
        ->expected(-1);
    sub_dmap->add_option("--b", df.b_values, "b-values, s/mm^2")->required()->delimiter(',');
    sub_dmap->add_option("--mask", df.mask_path)->required();
    sub_dmap->add_option("--out", df.out_path)->required();
    sub_dmap->add_option("--max-residual", df.max_residual);

    InterpFlags inf;
    auto* sub_interp = app.add_subcommand("interp", "upsample a D-map");
    sub_interp->add_option("--in", inf.in_path)->required();
    sub_interp->add_option("--mask", inf.mask_path)->required();
    sub_interp->add_option("--out", inf.out_path)->required();
    sub_interp->add_option("--out-labels", inf.out_labels_path);
    sub_interp->add_option("--u", inf.u)->check(CLI::Range(1, 200));
    sub_interp->add_option("--u-max", inf.u_max)->check(CLI::Range(1, 200));
    sub_interp->add_option("--kl-csv", inf.kl_csv_path);
    sub_interp->add_flag("--exclude-necrosis", inf.exclude_necrosis);

    PartitionFlags ptf;
    auto* sub_partition = app.add_subcommand("partition", "superpixel partition and candidates");
    sub_partition->add_option("--in", ptf.in_path)->required();
    sub_partition->add_option("--mask", ptf.mask_path)->required();
    sub_partition->add_option("--out-json", ptf.out_json)->required();
    sub_partition->add_option("--out-regions", ptf.out_regions);
    sub_partition->add_option("--slice", ptf.slice);
    sub_partition->add_flag("--three-d", ptf.three_d);
    sub_partition->add_option("--area", ptf.area);
    sub_partition->add_option("--volume", ptf.volume);
    sub_partition->add_option("--n-biopsy", ptf.n_biopsy);
    sub_partition->add_option("--target-mode", ptf.target_mode)
        ->check(CLI::IsMember({"automatic", "symmetric", "asymmetric"}));

    PlanFlags plf;
    auto* sub_plan = app.add_subcommand("plan", "search guided interventions");
    sub_plan->add_option("--dmap", plf.dmap_path)->required();
    sub_plan->add_option("--mask", plf.mask_path)->required();
    sub_plan->add_option("--out", plf.out_path)->required();
    sub_plan->add_option("--slice", plf.slice);
    sub_plan->add_option("--area", plf.area);
    sub_plan->add_option("--n-biopsy", plf.n_biopsy);
    sub_plan->add_option("--target-mode", plf.target_mode)
        ->check(CLI::IsMember({"automatic", "symmetric", "asymmetric"}));

    SimulateFlags sf;
    auto* sub_simulate = app.add_subcommand("simulate", "run a biopsy strategy on a phantom");
    sub_simulate->add_option("--phantom-dir", sf.phantom_dir)->required();
    sub_simulate->add_option("--strategy", sf.strategy)
        ->required()
        ->check(CLI::IsMember({"guided", "constrained", "random"}));
    sub_simulate->add_option("--out", sf.out_path)->required();
    sub_simulate->add_option("--n-biopsy", sf.n_biopsy);
    sub_simulate->add_option("--reps", sf.reps);
    sub_simulate->add_option("--max-interventions", sf.max_interventions);
    sub_simulate->add_option("--samples-csv", sf.samples_csv);
    sub_simulate->add_option("--area", sf.area);
    sub_simulate->add_option("--target-mode", sf.target_mode)
        ->check(CLI::IsMember({"automatic", "symmetric", "asymmetric"}));
    auto* opt_sim_seed = sub_simulate->add_option("--seed", sf.seed);

    EstimateFlags ef;
    auto* sub_estimate = app.add_subcommand("estimate", "fit the density line and map the tumor");
    auto* opt_samples = sub_estimate->add_option("--samples", ef.samples_csv, "CSV with d,rho");
    auto* opt_from_report =
        sub_estimate->add_option("--from-report", ef.from_report, "guided strategy report JSON");
    sub_estimate->add_option("--line", ef.line, "report line to use; -1 = all");
    sub_estimate->add_option("--dmap", ef.dmap_path)->required();
    sub_estimate->add_option("--mask", ef.mask_path)->required();
    sub_estimate->add_option("--out-dir", ef.out_dir)->required();
    sub_estimate->add_option("--samples-unit", ef.samples_unit)
        ->check(CLI::IsMember({"2d", "3d"}));
    opt_samples->excludes(opt_from_report);

    ReportFlags rf;
    auto* sub_report = app.add_subcommand("report", "compare strategy reports");
    sub_report->add_option("--in", rf.inputs)->required()->expected(-1);
    sub_report->add_option("--out-dir", rf.out_dir)->required();

    std::string config_out;
    auto* sub_config = app.add_subcommand("config", "write the effective config");
    sub_config->add_option("--out", config_out)->required();

    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help and friends
        ordered_json err;
        err["error"] = "usage";
        err["message"] = e.what();
        std::cerr << err.dump() << "\n";
        return 2;
    }

    try {
        PipelineConfig cfg;
        if (!config_path.empty()) cfg = load_config(config_path);
        apply_env_seed(cfg);
        cfg.validate();

        if (sub_phantom->parsed())
            run_phantom(pf, cfg, opt_sigma->count() > 0, opt_phantom_seed->count() > 0);
        else if (sub_dmap->parsed())
            run_dmap(df);
        else if (sub_interp->parsed())
            run_interp(inf, cfg);
        else if (sub_partition->parsed())
            run_partition(ptf, cfg);
        else if (sub_plan->parsed())
            run_plan(plf, cfg);
        else if (sub_simulate->parsed())
            run_simulate(sf, cfg, workers, opt_sim_seed->count() > 0);
        else if (sub_estimate->parsed()) {
            if (ef.samples_csv.empty() && ef.from_report.empty())
                fail(errc::invalid_argument, "estimate: need --samples or --from-report");
            run_estimate(ef);
        } else if (sub_report->parsed())
            run_report(rf);
        else if (sub_config->parsed())
            write_text(config_out, config_to_json(cfg));
    } catch (const Error& e) {
        ordered_json err;
        err["error"] = e.code_name();
        err["message"] = e.what();
        std::cerr << err.dump() << "\n";
        return errc_exit_code(e.code());
    } catch (const std::exception& e) {
        ordered_json err;
        err["error"] = "internal";
        err["message"] = e.what();
        std::cerr << err.dump() << "\n";
        return 3;
    }
    return 0;
}
