// Incomplete beta and friends, accurate enough for bit-stable p-values.
#include "dwiplan/statdist.hpp"

#include <cmath>
#include <limits>

#include "dwiplan/error.hpp"

namespace dwiplan {

namespace {

// Lanczos approximation, g = 7, 9 coefficients.
const double kLanczos[9] = {
    0.99999999999980993,    676.5203681218851,     -1259.1392167224028,
    771.32342877765313,     -176.61502916214059,   12.507343278686905,
    -0.13857109526572012,   9.9843695780195716e-6, 1.5056327351493116e-7};

// Continued fraction for the incomplete beta (Lentz's method).
double beta_cf(double a, double b, double x) {
    const double tiny = 1e-300;
    const double eps = 1e-16;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 500; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) break;
    }
    return h;
}

double t_cdf(double t, double df) {
    const double ib = incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
    return t >= 0.0 ? 1.0 - 0.5 * ib : 0.5 * ib;
}

} // namespace

double log_gamma(double x) {
    if (!(x > 0.0)) fail(errc::invalid_argument, "log_gamma requires x > 0");
    if (x < 0.5) {
        // Reflection keeps the Lanczos series in its accurate range.
        return std::log(M_PI / std::sin(M_PI * x)) - log_gamma(1.0 - x);
    }
    const double z = x - 1.0;
    double sum = kLanczos[0];
    for (int i = 1; i < 9; ++i) sum += kLanczos[i] / (z + i);
    const double t = z + 7.5;
    return 0.5 * std::log(2.0 * M_PI) + (z + 0.5) * std::log(t) - t + std::log(sum);
}

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) fail(errc::invalid_argument, "incomplete_beta requires a, b > 0");
    if (!(x >= 0.0 && x <= 1.0)) fail(errc::invalid_argument, "incomplete_beta requires x in [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double ln_front = log_gamma(a + b) - log_gamma(a) - log_gamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * beta_cf(a, b, x) / a;
    }
    return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double f_survival(double d1, double d2, double f) {
    if (!(d1 > 0.0) || !(d2 > 0.0)) fail(errc::invalid_argument, "f_survival requires positive dof");
    if (!(f >= 0.0)) fail(errc::invalid_argument, "f_survival requires f >= 0");
    // P(F >= f) = I_{d2/(d2 + d1 f)}(d2/2, d1/2); this form avoids 1 - cdf cancellation.
    return incomplete_beta(0.5 * d2, 0.5 * d1, d2 / (d2 + d1 * f));
}

double t_quantile(double p, double df) {
    if (!(p > 0.0 && p < 1.0)) fail(errc::invalid_argument, "t_quantile requires p in (0, 1)");
    if (!(df > 0.0)) fail(errc::invalid_argument, "t_quantile requires df > 0");
    if (p == 0.5) return 0.0;
    if (p < 0.5) return -t_quantile(1.0 - p, df);
    // Bracket then bisect; the cdf is monotone and cheap.
    double lo = 0.0;
    double hi = 1.0;
    while (t_cdf(hi, df) < p) {
        hi *= 2.0;
        if (hi > 1e308) fail(errc::invalid_argument, "t_quantile: p too close to 1");
    }
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        if (t_cdf(mid, df) < p) lo = mid; else hi = mid;
    }
    double t = 0.5 * (lo + hi);
    // Newton polish with the t pdf sharpens the last bits.
    const double ln_norm = log_gamma(0.5 * (df + 1.0)) - log_gamma(0.5 * df) -
                           0.5 * std::log(df * M_PI);
    for (int i = 0; i < 3; ++i) {
        const double pdf = std::exp(ln_norm - 0.5 * (df + 1.0) * std::log1p(t * t / df));
        if (pdf <= 0.0) break;
        t -= (t_cdf(t, df) - p) / pdf;
    }
    return t;
}

} // namespace dwiplan
