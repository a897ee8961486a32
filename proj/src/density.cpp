#include "dwiplan/density.hpp"

#include <cmath>
#include <limits>

#include <json.hpp>

#include "dwiplan/error.hpp"
#include "dwiplan/statdist.hpp"
#include "dwiplan/stats.hpp"

namespace dwiplan {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct OlsFit {
    double slope = 0.0;
    double intercept = 0.0;
    double rss = 0.0;
    double sxx = 0.0;
    double x_mean = 0.0;
};

OlsFit ols(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) fail(errc::invalid_argument, "x/y length mismatch");
    const std::size_t n = x.size();
    if (n < 2) fail(errc::insufficient_data, "linear fit needs at least 2 points");
    const double xm = pairwise_sum(x) / static_cast<double>(n);
    const double ym = pairwise_sum(y) / static_cast<double>(n);
    std::vector<double> sxx_terms(n);
    std::vector<double> sxy_terms(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - xm;
        sxx_terms[i] = dx * dx;
        sxy_terms[i] = dx * (y[i] - ym);
    }
    OlsFit fit;
    fit.sxx = pairwise_sum(sxx_terms);
    fit.x_mean = xm;
    if (fit.sxx <= 0.0) fail(errc::degenerate_x, "all x values identical");
    fit.slope = pairwise_sum(sxy_terms) / fit.sxx;
    fit.intercept = ym - fit.slope * xm;
    std::vector<double> res_terms(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - (fit.intercept + fit.slope * x[i]);
        res_terms[i] = r * r;
    }
    fit.rss = pairwise_sum(res_terms);
    return fit;
}

double interval_half_width(const DensityModel2d& model, double x, double level, bool prediction) {
    if (model.n <= 2) fail(errc::insufficient_data, "interval needs n > 2");
    if (!(level > 0.0 && level < 1.0)) fail(errc::invalid_argument, "level must be in (0, 1)");
    const double df = static_cast<double>(model.n) - 2.0;
    const double t = t_quantile(0.5 * (1.0 + level), df);
    const double dx = x - model.x_mean;
    double v = 1.0 / static_cast<double>(model.n) + dx * dx / model.sxx;
    if (prediction) v += 1.0;
    return t * model.residual_se * std::sqrt(v);
}

} // namespace

DensityModel2d paper_density_model_2d() {
    DensityModel2d m;
    m.k2d = -1.684e6;
    m.d2d = 9363.0;
    m.pearson_r = -0.95;
    m.n = 2; // published constants only; no interval context
    return m;
}

CancerFractionModel paper_cancer_fraction_model() {
    return CancerFractionModel{0.43, 1253.0, 3000.0};
}

DensityModel3d paper_density_model_3d() {
    // rho = 1.125e6 - 2.5e5 * D with D in 1e-3 mm^2/s, restated for D in mm^2/s.
    return DensityModel3d{-2.5e8, 1.125e6};
}

DensityModel2d fit_linear(const std::vector<double>& x, const std::vector<double>& y) {
    const OlsFit fit = ols(x, y);
    DensityModel2d m;
    m.k2d = fit.slope;
    m.d2d = fit.intercept;
    m.n = x.size();
    m.sxx = fit.sxx;
    m.x_mean = fit.x_mean;
    m.residual_se = m.n > 2 ? std::sqrt(fit.rss / (static_cast<double>(m.n) - 2.0)) : 0.0;
    m.pearson_r = pearson_correlation(x, y);
    return m;
}

double predict_density_2d(const DensityModel2d& model, double d) {
    if (!(d >= 0.0)) fail(errc::invalid_argument, "D must be >= 0");
    return std::max(0.0, model.k2d * d + model.d2d);
}

double cancer_density(const CancerFractionModel& model, double rho_2d) {
    if (!(rho_2d >= 0.0)) fail(errc::invalid_argument, "rho_2d must be >= 0");
    return std::max(0.0, model.kc * rho_2d - model.dc);
}

double predict_density_3d(const DensityModel3d& model, double d) {
    if (!(d >= 0.0)) fail(errc::invalid_argument, "D must be >= 0");
    return std::max(0.0, model.slope * d + model.intercept);
}

double scale_2d_to_3d(double rho_2d, double m) {
    if (!(rho_2d >= 0.0) || !(m >= 0.0)) fail(errc::invalid_argument, "negative density or scale");
    return rho_2d * m;
}

DensityMaps density_maps(const ScalarGrid3& dmap, const DensityModel2d& model2d,
                         const CancerFractionModel& cancer) {
    require_unit(dmap, UnitTag::d_value_mm2_per_s, "density_maps");
    DensityMaps out;
    out.total = ScalarGrid3(dmap.geom, UnitTag::density_2d_cells_per_mm2);
    out.cancer = ScalarGrid3(dmap.geom, UnitTag::density_2d_cells_per_mm2);
    out.non_cancer = ScalarGrid3(dmap.geom, UnitTag::density_2d_cells_per_mm2);
    const std::size_t total_voxels = dmap.values.size();
    for (std::size_t i = 0; i < total_voxels; ++i) {
        const double d = dmap.values[i];
        if (!std::isfinite(d)) {
            out.total.values[i] = kNaN;
            out.cancer.values[i] = kNaN;
            out.non_cancer.values[i] = kNaN;
            continue;
        }
        const double rho = predict_density_2d(model2d, d);
        const double rho_c = cancer_density(cancer, rho);
        out.total.values[i] = rho;
        out.cancer.values[i] = rho_c;
        out.non_cancer.values[i] = rho - rho_c;
        if (rho < cancer.valid_from) ++out.cancer_extrapolated_voxels;
    }
    return out;
}

double cell_load(const ScalarGrid3& rho3d_map, const LabelGrid3& mask) {
    require_unit(rho3d_map, UnitTag::density_3d_cells_per_mm3, "cell_load");
    require_same_geometry(rho3d_map.geom, mask.geom, "cell_load");
    const double vox = rho3d_map.geom.voxel_volume_mm3();
    std::vector<double> terms;
    terms.reserve(rho3d_map.values.size() / 4);
    for (std::size_t i = 0; i < rho3d_map.values.size(); ++i) {
        if (mask.labels[i] != static_cast<std::uint8_t>(TissueLabel::tumor)) continue;
        const double v = rho3d_map.values[i];
        if (!std::isfinite(v)) continue;
        terms.push_back(v * vox);
    }
    return pairwise_sum(terms);
}

ChowResult chow_test(const std::vector<double>& xa, const std::vector<double>& ya,
                     const std::vector<double>& xb, const std::vector<double>& yb) {
    if (xa.size() < 3 || xb.size() < 3) fail(errc::insufficient_data, "chow_test needs n >= 3 per group");
    const OlsFit fa = ols(xa, ya);
    const OlsFit fb = ols(xb, yb);
    std::vector<double> xp(xa);
    xp.insert(xp.end(), xb.begin(), xb.end());
    std::vector<double> yp(ya);
    yp.insert(yp.end(), yb.begin(), yb.end());
    const OlsFit fp = ols(xp, yp);
    const double k = 2.0;
    const double df2 = static_cast<double>(xa.size() + xb.size()) - 2.0 * k;
    if (df2 < 1.0) fail(errc::insufficient_data, "chow_test needs n_a + n_b >= 5");
    const double rss_sep = fa.rss + fb.rss;
    const double num = (fp.rss - rss_sep) / k;
    ChowResult r;
    if (rss_sep <= 0.0) {
        // Both groups fit their lines exactly; any pooled misfit is decisive.
        r.f_stat = num > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
        r.p_value = num > 0.0 ? 0.0 : 1.0;
        return r;
    }
    r.f_stat = std::max(0.0, num / (rss_sep / df2));
    r.p_value = f_survival(k, df2, r.f_stat);
    return r;
}

std::pair<double, double> prediction_interval(const DensityModel2d& model, double x, double level) {
    const double y = model.k2d * x + model.d2d;
    const double h = interval_half_width(model, x, level, true);
    return {y - h, y + h};
}

std::pair<double, double> confidence_interval(const DensityModel2d& model, double x, double level) {
    const double y = model.k2d * x + model.d2d;
    const double h = interval_half_width(model, x, level, false);
    return {y - h, y + h};
}

std::string density_model_to_json(const DensityModel2d& model) {
    nlohmann::json j;
    j["k2d"] = model.k2d;
    j["d2d"] = model.d2d;
    j["r"] = model.pearson_r;
    j["n"] = model.n;
    j["residual_se"] = model.residual_se;
    j["sxx"] = model.sxx;
    j["x_mean"] = model.x_mean;
    return j.dump();
}

DensityModel2d density_model_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        fail(errc::format_error, std::string("density model JSON: ") + e.what());
    }
    DensityModel2d m;
    try {
        m.k2d = j.at("k2d").get<double>();
        m.d2d = j.at("d2d").get<double>();
        m.pearson_r = j.value("r", 0.0);
        m.n = j.value("n", std::size_t{0});
        m.residual_se = j.value("residual_se", 0.0);
        m.sxx = j.value("sxx", 0.0);
        m.x_mean = j.value("x_mean", 0.0);
    } catch (const nlohmann::json::exception& e) {
        fail(errc::format_error, std::string("density model JSON fields: ") + e.what());
    }
    return m;
}

} // namespace dwiplan
