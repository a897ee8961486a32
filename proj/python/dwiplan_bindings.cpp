// Python bindings: numpy arrays carry the voxel data, shape (nz, ny, nx);
// report-shaped results come back as the same JSON the CLI writes.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <array>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "dwiplan/config.hpp"
#include "dwiplan/density.hpp"
#include "dwiplan/error.hpp"
#include "dwiplan/gridio.hpp"
#include "dwiplan/histogram.hpp"
#include "dwiplan/ivim.hpp"
#include "dwiplan/needle.hpp"
#include "dwiplan/partition.hpp"
#include "dwiplan/resample.hpp"
#include "dwiplan/simulate.hpp"
#include "dwiplan/stats.hpp"

namespace py = pybind11;
using namespace dwiplan;

namespace {

using Triple = std::array<double, 3>;

GridGeometry geom_from_shape(const py::array& a, Triple spacing, Triple origin) {
    if (a.ndim() != 3) fail(errc::invalid_argument, "expected a (nz, ny, nx) array");
    GridGeometry g;
    g.dims = {static_cast<int>(a.shape(2)), static_cast<int>(a.shape(1)),
              static_cast<int>(a.shape(0))};
    g.spacing_mm = {spacing[0], spacing[1], spacing[2]};
    g.origin_mm = {origin[0], origin[1], origin[2]};
    return g;
}

ScalarGrid3 scalar_from(const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
                        Triple spacing, Triple origin, UnitTag unit) {
    ScalarGrid3 grid(geom_from_shape(a, spacing, origin), unit);
    std::memcpy(grid.values.data(), a.data(), grid.values.size() * sizeof(double));
    return grid;
}

LabelGrid3 labels_from(const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& a,
                       Triple spacing, Triple origin) {
    LabelGrid3 mask(geom_from_shape(a, spacing, origin));
    std::memcpy(mask.labels.data(), a.data(), mask.labels.size());
    mask.validate();
    return mask;
}

py::array_t<double> to_array(const ScalarGrid3& grid) {
    const auto& d = grid.geom.dims;
    py::array_t<double> out({d[2], d[1], d[0]});
    std::memcpy(out.mutable_data(), grid.values.data(), grid.values.size() * sizeof(double));
    return out;
}

py::array_t<std::uint8_t> to_array(const LabelGrid3& mask) {
    const auto& d = mask.geom.dims;
    py::array_t<std::uint8_t> out({d[2], d[1], d[0]});
    std::memcpy(out.mutable_data(), mask.labels.data(), mask.labels.size());
    return out;
}

py::dict fit_to_dict(const DensityModel2d& m) {
    py::dict d;
    d["slope"] = m.k2d;
    d["intercept"] = m.d2d;
    d["pearson_r"] = m.pearson_r;
    d["n"] = m.n;
    d["residual_se"] = m.residual_se;
    d["sxx"] = m.sxx;
    d["x_mean"] = m.x_mean;
    return d;
}

DensityModel2d fit_from_dict(const py::dict& d) {
    DensityModel2d m;
    m.k2d = d["slope"].cast<double>();
    m.d2d = d["intercept"].cast<double>();
    if (d.contains("pearson_r")) m.pearson_r = d["pearson_r"].cast<double>();
    if (d.contains("n")) m.n = d["n"].cast<std::size_t>();
    if (d.contains("residual_se")) m.residual_se = d["residual_se"].cast<double>();
    if (d.contains("sxx")) m.sxx = d["sxx"].cast<double>();
    if (d.contains("x_mean")) m.x_mean = d["x_mean"].cast<double>();
    return m;
}

PhantomSpec spec_from_kwargs(std::array<int, 3> dims, Triple spacing, double rx, double ry,
                             double d_lo, double d_hi, int bumps, double necrosis_radius,
                             std::array<double, 2> necrosis_offset, double fat_radius,
                             std::array<double, 2> fat_offset, double sigma, std::uint64_t seed) {
    PhantomSpec spec;
    spec.dims = dims;
    spec.spacing_mm = {spacing[0], spacing[1], spacing[2]};
    spec.rx_mm = rx;
    spec.ry_mm = ry;
    spec.d_lo = d_lo;
    spec.d_hi = d_hi;
    spec.n_bumps = bumps;
    spec.necrosis_radius_mm = necrosis_radius;
    spec.necrosis_offset_mm = {necrosis_offset[0], necrosis_offset[1]};
    spec.fat_radius_mm = fat_radius;
    spec.fat_offset_mm = {fat_offset[0], fat_offset[1]};
    spec.sigma_noise = sigma;
    spec.seed = seed;
    return spec;
}

Strategy strategy_arg(const std::string& name) { return strategy_from_name(name); }

TargetMode mode_arg(const std::string& name) {
    if (name == "automatic") return TargetMode::automatic;
    if (name == "symmetric") return TargetMode::symmetric;
    if (name == "asymmetric") return TargetMode::asymmetric;
    fail(errc::invalid_argument, "unknown target mode '" + name + "'");
}

} // namespace

PYBIND11_MODULE(_dwiplan, m) {
    m.doc() = "DWI-guided biopsy planning pipeline";

    py::register_exception<Error>(m, "DwiplanError", PyExc_RuntimeError);

    const PhantomSpec def;
    m.def(
        "generate_phantom",
        [def](std::array<int, 3> dims, Triple spacing, double rx, double ry, double d_lo,
              double d_hi, int bumps, double necrosis_radius, std::array<double, 2> necrosis_offset,
              double fat_radius, std::array<double, 2> fat_offset, double sigma,
              std::uint64_t seed) {
            auto ph = generate_phantom(spec_from_kwargs(dims, spacing, rx, ry, d_lo, d_hi, bumps,
                                                        necrosis_radius, necrosis_offset,
                                                        fat_radius, fat_offset, sigma, seed));
            py::dict out;
            out["dmap"] = to_array(ph.dmap);
            out["labels"] = to_array(ph.labels);
            out["rho_truth"] = to_array(ph.rho_truth);
            out["mu_rho"] = ph.mu_rho;
            out["sigma_rho"] = ph.sigma_rho;
            out["seed"] = ph.seed;
            out["slope"] = ph.model_truth.slope;
            out["intercept"] = ph.model_truth.intercept;
            return out;
        },
        py::arg("dims") = def.dims, py::arg("spacing") = Triple{0.6, 0.6, 3.0},
        py::arg("rx") = def.rx_mm, py::arg("ry") = def.ry_mm, py::arg("d_lo") = def.d_lo,
        py::arg("d_hi") = def.d_hi, py::arg("bumps") = def.n_bumps,
        py::arg("necrosis_radius") = 0.0, py::arg("necrosis_offset") = std::array<double, 2>{0, 0},
        py::arg("fat_radius") = 0.0, py::arg("fat_offset") = std::array<double, 2>{0, 0},
        py::arg("sigma") = def.sigma_noise, py::arg("seed") = def.seed,
        "Synthesize a ground-truth phantom; returns arrays plus reference stats.");

    m.def(
        "save_grid",
        [](const std::string& path, py::array a, Triple spacing, Triple origin,
           const std::string& unit) {
            if (a.dtype().is(py::dtype::of<std::uint8_t>()))
                save_grid(labels_from(py::cast<py::array_t<std::uint8_t,
                                                           py::array::c_style |
                                                               py::array::forcecast>>(a),
                                      spacing, origin),
                          path);
            else
                save_grid(scalar_from(py::cast<py::array_t<double, py::array::c_style |
                                                                       py::array::forcecast>>(a),
                                      spacing, origin, unit_tag_from_name(unit)),
                          path);
        },
        py::arg("path"), py::arg("values"), py::arg("spacing") = Triple{1, 1, 1},
        py::arg("origin") = Triple{0, 0, 0}, py::arg("unit") = "dimensionless",
        "Write a grid file; uint8 arrays become label grids, anything else f32 scalars.");

    m.def(
        "load_grid",
        [](const std::string& path) {
            py::dict out;
            try {
                auto grid = load_scalar_grid(path);
                out["values"] = to_array(grid);
                out["unit"] = unit_tag_name(grid.unit);
                out["spacing"] = grid.geom.spacing_mm;
                out["origin"] = grid.geom.origin_mm;
                return out;
            } catch (const Error& e) {
                if (e.code() != errc::format_error) throw;
            }
            auto mask = load_label_grid(path);
            out["values"] = to_array(mask);
            out["unit"] = "dimensionless";
            out["spacing"] = mask.geom.spacing_mm;
            out["origin"] = mask.geom.origin_mm;
            return out;
        },
        py::arg("path"), "Read a grid file; label grids come back as uint8 arrays.");

    m.def(
        "forward_ivim",
        [](double d, double d_star, double f, const std::vector<double>& b_values) {
            auto sig = forward_ivim(IVIMParams{d, d_star, f}, b_values);
            return py::array_t<double>(static_cast<py::ssize_t>(sig.ratios.size()),
                                       sig.ratios.data());
        },
        py::arg("d"), py::arg("d_star"), py::arg("f"), py::arg("b_values"));

    m.def(
        "fit_ivim",
        [](const std::vector<double>& b_values, const std::vector<double>& ratios) {
            IVIMSignal sig{b_values, ratios};
            auto res = fit_ivim(sig);
            py::dict out;
            out["d"] = res.params.d;
            out["d_star"] = res.params.d_star;
            out["f"] = res.params.f;
            out["residual_rms"] = res.residual_rms;
            out["converged"] = res.converged;
            return out;
        },
        py::arg("b_values"), py::arg("ratios"));

    m.def(
        "build_dmap",
        [](const std::vector<py::array_t<double, py::array::c_style | py::array::forcecast>>&
               stack,
           const std::vector<double>& b_values,
           const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& labels,
           Triple spacing, Triple origin, double max_residual_rms) {
            std::vector<ScalarGrid3> grids;
            grids.reserve(stack.size());
            for (const auto& a : stack)
                grids.push_back(scalar_from(a, spacing, origin, UnitTag::dimensionless));
            auto res = build_dmap(grids, b_values, labels_from(labels, spacing, origin),
                                  max_residual_rms);
            py::dict out;
            out["dmap"] = to_array(res.dmap);
            out["invalid_signal_voxels"] = res.invalid_signal_voxels;
            out["residual_rejected_voxels"] = res.residual_rejected_voxels;
            return out;
        },
        py::arg("stack"), py::arg("b_values"), py::arg("labels"),
        py::arg("spacing") = Triple{1, 1, 1}, py::arg("origin") = Triple{0, 0, 0},
        py::arg("max_residual_rms") = 0.0);

    m.def(
        "resample_bicubic",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& values,
           const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& labels,
           Triple spacing, int factor, bool exclude_necrosis) {
            auto grid = scalar_from(values, spacing, {0, 0, 0}, UnitTag::d_value_mm2_per_s);
            auto mask = labels_from(labels, spacing, {0, 0, 0});
            return to_array(resample_bicubic(grid, mask, factor, exclude_necrosis));
        },
        py::arg("values"), py::arg("labels"), py::arg("spacing") = Triple{1, 1, 1},
        py::arg("factor") = 20, py::arg("exclude_necrosis") = false);

    m.def(
        "superpixels_2d",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& values,
           const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& labels,
           Triple spacing, int slice_index, double target_area_mm2) {
            auto grid = scalar_from(values, spacing, {0, 0, 0}, UnitTag::d_value_mm2_per_s);
            auto mask = labels_from(labels, spacing, {0, 0, 0});
            auto part = superpixels_2d(grid, mask, slice_index, target_area_mm2);
            const auto& d = part.geom.dims;
            py::array_t<std::int32_t> ids({d[2], d[1], d[0]});
            std::memcpy(ids.mutable_data(), part.region_labels.data(),
                        part.region_labels.size() * sizeof(std::int32_t));
            py::list regions;
            for (const auto& r : part.regions) {
                py::dict j;
                j["id"] = r.id;
                j["mean_d"] = r.mean_d;
                j["var_d"] = r.var_d;
                j["size"] = r.size;
                j["centroid_mm"] = r.centroid_mm;
                j["min_boundary_distance_mm"] = r.min_boundary_distance_mm;
                regions.append(j);
            }
            py::dict out;
            out["region_labels"] = ids;
            out["regions"] = regions;
            out["slice"] = part.slice;
            if (!part.warning.empty()) out["warning"] = part.warning;
            return out;
        },
        py::arg("values"), py::arg("labels"), py::arg("spacing") = Triple{1, 1, 1},
        py::arg("slice_index") = 0, py::arg("target_area_mm2") = 6.41);

    m.def(
        "optimal_d_values",
        [](const std::vector<double>& values, int n_biopsy, const std::string& mode) {
            auto t = optimal_d_values(values, n_biopsy, mode_arg(mode));
            py::dict out;
            out["targets"] = t.targets;
            out["d_min"] = t.d_min;
            out["d_max"] = t.d_max;
            out["d_median"] = t.d_median;
            out["formula"] =
                t.mode == TargetFormula::symmetric_eq4 ? "symmetric" : "asymmetric";
            return out;
        },
        py::arg("values"), py::arg("n_biopsy"), py::arg("mode") = "automatic");

    m.def(
        "plan_guided",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& values,
           const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& labels,
           Triple spacing, int slice_index, int n_biopsy, double target_area_mm2,
           const std::string& mode, double exclusion_boundary_mm) {
            auto grid = scalar_from(values, spacing, {0, 0, 0}, UnitTag::d_value_mm2_per_s);
            auto mask = labels_from(labels, spacing, {0, 0, 0});
            auto part = superpixels_2d(grid, mask, slice_index, target_area_mm2);
            std::vector<double> domain;
            for (std::size_t i = 0; i < part.region_labels.size(); ++i)
                if (part.region_labels[i] >= 0) domain.push_back(grid.values[i]);
            auto targets = optimal_d_values(domain, n_biopsy, mode_arg(mode));
            ExclusionRules rules;
            rules.min_boundary_mm = exclusion_boundary_mm;
            rules.overlap_mask = &mask;
            auto sel = select_candidates(part, targets, rules);
            auto plan = guided_search(part, sel.picks, grid, mask, NeedleConstraints{});
            return plan_to_json(plan);
        },
        py::arg("values"), py::arg("labels"), py::arg("spacing") = Triple{1, 1, 1},
        py::arg("slice_index") = 0, py::arg("n_biopsy") = 4, py::arg("target_area_mm2") = 6.41,
        py::arg("mode") = "automatic", py::arg("exclusion_boundary_mm") = 2.5,
        "Partition, pick candidates, and search interventions; returns the plan as JSON.");

    m.def(
        "run_strategy",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& dmap,
           const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& labels,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& rho_truth,
           Triple spacing, double mu_rho, double sigma_rho, const std::string& strategy,
           int n_biopsy, int reps, std::size_t max_interventions, int workers, std::uint64_t seed,
           double target_area_mm2, const std::string& mode) {
            Phantom ph;
            ph.dmap = scalar_from(dmap, spacing, {0, 0, 0}, UnitTag::d_value_mm2_per_s);
            ph.labels = labels_from(labels, spacing, {0, 0, 0});
            ph.rho_truth = scalar_from(rho_truth, spacing, {0, 0, 0},
                                       UnitTag::density_3d_cells_per_mm3);
            ph.mu_rho = mu_rho;
            ph.sigma_rho = sigma_rho;
            StrategyOptions opt;
            opt.n_reps = reps;
            opt.max_interventions = max_interventions;
            opt.workers = workers;
            opt.seed = seed;
            opt.target_area_mm2 = target_area_mm2;
            opt.target_mode = mode_arg(mode);
            auto rep = run_strategy(ph, strategy_arg(strategy), NeedleConstraints{}, n_biopsy,
                                    opt);
            return strategy_report_to_json(rep);
        },
        py::arg("dmap"), py::arg("labels"), py::arg("rho_truth"),
        py::arg("spacing") = Triple{1, 1, 1}, py::arg("mu_rho") = 0.0, py::arg("sigma_rho") = 0.0,
        py::arg("strategy") = "guided", py::arg("n_biopsy") = 4, py::arg("reps") = 20000,
        py::arg("max_interventions") = 0, py::arg("workers") = 1, py::arg("seed") = 1,
        py::arg("target_area_mm2") = 6.41, py::arg("mode") = "automatic",
        "Run a biopsy strategy on phantom arrays; returns the report as JSON.");

    m.def(
        "fit_linear",
        [](const std::vector<double>& x, const std::vector<double>& y) {
            return fit_to_dict(fit_linear(x, y));
        },
        py::arg("x"), py::arg("y"));

    m.def(
        "prediction_interval",
        [](const py::dict& fit, double x, double level) {
            return prediction_interval(fit_from_dict(fit), x, level);
        },
        py::arg("fit"), py::arg("x"), py::arg("level") = 0.95);

    m.def(
        "chow_test",
        [](const std::vector<double>& xa, const std::vector<double>& ya,
           const std::vector<double>& xb, const std::vector<double>& yb) {
            auto r = chow_test(xa, ya, xb, yb);
            return py::make_tuple(r.f_stat, r.p_value);
        },
        py::arg("xa"), py::arg("ya"), py::arg("xb"), py::arg("yb"));

    m.def(
        "cell_load",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& rho3d,
           const py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>& labels,
           Triple spacing) {
            return cell_load(scalar_from(rho3d, spacing, {0, 0, 0},
                                         UnitTag::density_3d_cells_per_mm3),
                             labels_from(labels, spacing, {0, 0, 0}));
        },
        py::arg("rho3d"), py::arg("labels"), py::arg("spacing") = Triple{1, 1, 1});

    m.def("paper_density_model_2d", [] { return fit_to_dict(paper_density_model_2d()); });
    m.def("paper_density_model_3d", [] {
        auto m3 = paper_density_model_3d();
        py::dict out;
        out["slope"] = m3.slope;
        out["intercept"] = m3.intercept;
        return out;
    });
}
