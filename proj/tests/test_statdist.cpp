#include <cmath>

#include <doctest.h>

#include "dwiplan/error.hpp"
#include "dwiplan/statdist.hpp"

using namespace dwiplan;

namespace {

// Checks against reference values computed with an independent implementation
// (scipy.special.betainc / scipy.stats.f.sf / scipy.stats.t.ppf).
void check_close(double got, double want, double tol = 1e-10) {
    CHECK(std::fabs(got - want) <= tol * std::max(1.0, std::fabs(want)));
}

} // namespace

TEST_CASE("log_gamma matches factorials and half-integer values") {
    CHECK(log_gamma(1.0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(log_gamma(2.0) == doctest::Approx(0.0).epsilon(1e-12));
    check_close(log_gamma(5.0), std::log(24.0), 1e-13);
    check_close(log_gamma(11.0), std::log(3628800.0), 1e-13);
    check_close(log_gamma(0.5), 0.5 * std::log(M_PI), 1e-13);
    check_close(log_gamma(1.5), std::log(0.5 * std::sqrt(M_PI)), 1e-13);
    CHECK_THROWS_AS(log_gamma(0.0), Error);
    CHECK_THROWS_AS(log_gamma(-1.0), Error);
}

TEST_CASE("incomplete_beta reference values") {
    check_close(incomplete_beta(0.5, 0.5, 0.25), 0.33333333333333337);
    check_close(incomplete_beta(2.0, 3.0, 0.5), 0.6875);
    check_close(incomplete_beta(1e-3, 1e-3, 0.5), 0.49999999999999994);
    check_close(incomplete_beta(50.0, 60.0, 0.45), 0.46423529143060444);
    check_close(incomplete_beta(5.0, 1.0, 0.99), 0.95099004989999991);
    check_close(incomplete_beta(0.5, 8.0, 0.125), 0.84993126829263144);
    check_close(incomplete_beta(10.0, 10.0, 0.5), 0.5);
    check_close(incomplete_beta(3.0, 7.0, 0.3), 0.53716883399999982);
}

TEST_CASE("incomplete_beta limits, symmetry, monotonicity") {
    CHECK(incomplete_beta(2.0, 5.0, 0.0) == 0.0);
    CHECK(incomplete_beta(2.0, 5.0, 1.0) == 1.0);
    for (double a : {0.3, 1.0, 4.0, 25.0}) {
        for (double b : {0.7, 2.0, 9.0}) {
            double prev = -1.0;
            for (int i = 0; i <= 20; ++i) {
                const double x = i / 20.0;
                const double v = incomplete_beta(a, b, x);
                CHECK(v >= prev - 1e-14);
                CHECK(std::fabs(v + incomplete_beta(b, a, 1.0 - x) - 1.0) < 1e-12);
                prev = v;
            }
        }
    }
    CHECK_THROWS_AS(incomplete_beta(0.0, 1.0, 0.5), Error);
    CHECK_THROWS_AS(incomplete_beta(1.0, 1.0, 1.5), Error);
}

TEST_CASE("f_survival reference values") {
    check_close(f_survival(2, 10, 4.10), 0.050077548481083867);
    check_close(f_survival(2, 5, 1.0), 0.43120115037169215);
    check_close(f_survival(2, 40, 3.23), 0.050074395741796576);
    check_close(f_survival(2, 3, 0.05), 0.95200524549283483);
    check_close(f_survival(2, 100, 19.5), 7.0674051281898985e-08, 1e-10);
    check_close(f_survival(1, 10, 4.96), 0.050087650566468203);
    CHECK(f_survival(2, 10, 0.0) == 1.0);
    CHECK(f_survival(3, 7, 12.0) < f_survival(3, 7, 2.0));
    CHECK_THROWS_AS(f_survival(0, 5, 1.0), Error);
    CHECK_THROWS_AS(f_survival(2, 5, -0.1), Error);
}

TEST_CASE("t_quantile reference values") {
    check_close(t_quantile(0.975, 1), 12.706204736432095);
    check_close(t_quantile(0.975, 2), 4.3026527296961419);
    check_close(t_quantile(0.975, 3), 3.1824463052842629);
    check_close(t_quantile(0.975, 5), 2.5705818356363141);
    check_close(t_quantile(0.975, 10), 2.2281388519649385);
    check_close(t_quantile(0.975, 30), 2.0422724563012373);
    check_close(t_quantile(0.975, 100), 1.9839715184496334);
    check_close(t_quantile(0.995, 7), 3.4994832973505026);
    check_close(t_quantile(0.9, 4), 1.5332062740589432);
    check_close(t_quantile(0.6, 12), 0.25903274567688694);
}

TEST_CASE("t_quantile symmetry and domain") {
    CHECK(t_quantile(0.5, 9) == 0.0);
    for (double p : {0.6, 0.9, 0.99}) {
        for (double df : {1.0, 4.0, 37.0}) {
            CHECK(t_quantile(1.0 - p, df) == doctest::Approx(-t_quantile(p, df)).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS(t_quantile(0.0, 5), Error);
    CHECK_THROWS_AS(t_quantile(1.0, 5), Error);
    CHECK_THROWS_AS(t_quantile(0.5, 0.0), Error);
}
