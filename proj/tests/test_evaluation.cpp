#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "epf/evaluation.hpp"
#include "support.hpp"

using namespace epf;

namespace {

HourlyGrid grid(test::Gen& g, std::size_t days, double mu = 40.0, double sd = 10.0) {
    HourlyGrid out(days);
    for (auto& row : out)
        for (double& v : row) v = g.normal(mu, sd);
    return out;
}

HourlyGrid shifted(const HourlyGrid& x, double by) {
    HourlyGrid out = x;
    for (auto& row : out)
        for (double& v : row) v += by;
    return out;
}

// Price of day d, hour h encodes both so the naive source is readable.
MarketSeries coded_series(Date first, std::size_t n) {
    MarketSeries s = test::small_market(std::max<std::size_t>(n, 30)).series;
    s.days.resize(n);
    s.price.resize(n);
    for (std::size_t d = 0; d < n; ++d) {
        s.days[d] = first + std::chrono::days{static_cast<int>(d)};
        for (int h = 0; h < kHours; ++h) s.price[d][h] = 100.0 * static_cast<double>(d) + h;
    }
    return s;
}

}  // namespace

TEST_CASE("point metrics") {
    test::Gen g(1);
    const HourlyGrid y = grid(g, 20);
    const HourlyGrid naive = shifted(y, 4.0);

    const MetricReport perfect = metrics(y, y, naive);
    CHECK(perfect.mae == 0.0);
    CHECK(perfect.rmse == 0.0);
    CHECK(perfect.rmae == 0.0);
    CHECK(perfect.n_days == 20);

    const MetricReport two = metrics(shifted(y, -2.0), y, naive);
    CHECK(two.mae == doctest::Approx(2.0));
    CHECK(two.rmse == doctest::Approx(2.0));
    CHECK(two.rmae == doctest::Approx(0.5));
    for (double v : two.hourly_rmse) CHECK(v == doctest::Approx(2.0));

    const MetricReport self = metrics(naive, y, naive);
    CHECK(self.rmae == 1.0);

    CHECK_THROWS_AS(metrics(HourlyGrid(3), y, naive), ShapeError);
    CHECK_THROWS_AS(metrics(HourlyGrid{}, HourlyGrid{}, HourlyGrid{}), DataError);
}

TEST_CASE("property: rmse and hourly rmse agree") {
    test::Gen g(2);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = 1 + g.index(60);
        const HourlyGrid y = grid(g, n);
        const HourlyGrid f = grid(g, n);
        const MetricReport m = metrics(f, y, grid(g, n));
        double sq = 0.0;
        for (double v : m.hourly_rmse) sq += v * v;
        CHECK(m.rmse == doctest::Approx(std::sqrt(sq / kHours)).epsilon(1e-12));
        CHECK(m.mae <= m.rmse + 1e-12);
        CHECK(hourly_rmse(f, y) == m.hourly_rmse);

        // Day order does not matter.
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        std::shuffle(order.begin(), order.end(), g.engine());
        HourlyGrid fp(n), yp(n);
        for (std::size_t i = 0; i < n; ++i) fp[i] = f[order[i]], yp[i] = y[order[i]];
        const MetricReport mp = metrics(fp, yp, fp);
        CHECK(mp.mae == doctest::Approx(m.mae).epsilon(1e-12));
        CHECK(mp.rmse == doctest::Approx(m.rmse).epsilon(1e-12));
    }
}

TEST_CASE("naive forecast weekday rule") {
    // 2021-03-01 is a Monday.
    const Date monday = test::day(2021, 3, 1);
    const MarketSeries s = coded_series(monday, 28);
    const auto source = [&](Date d) { return naive_forecast(s, d)[5]; };
    CHECK(source(test::day(2021, 3, 9)) == 100.0 * 7 + 5);    // Tuesday: yesterday
    CHECK(source(test::day(2021, 3, 10)) == 100.0 * 8 + 5);   // Wednesday
    CHECK(source(test::day(2021, 3, 12)) == 100.0 * 10 + 5);  // Friday
    CHECK(source(test::day(2021, 3, 13)) == 100.0 * 5 + 5);   // Saturday: a week back
    CHECK(source(test::day(2021, 3, 14)) == 100.0 * 6 + 5);   // Sunday
    CHECK(source(test::day(2021, 3, 15)) == 100.0 * 7 + 5);   // Monday
    CHECK(source(test::day(2021, 3, 2)) == 100.0 * 0 + 5);

    CHECK_THROWS_AS(naive_forecast(s, test::day(2021, 3, 1)), DataError);
    CHECK_THROWS_AS(naive_forecast(s, test::day(2021, 3, 6)), DataError);
    CHECK_THROWS_AS(naive_forecast(s, test::day(2021, 4, 30)), DataError);

    const std::vector<Date> days{test::day(2021, 3, 9), test::day(2021, 3, 13)};
    const HourlyGrid all = naive_forecasts(s, days);
    REQUIRE(all.size() == 2);
    CHECK(all[1] == s.price[5]);
}

TEST_CASE("diebold-mariano by hand") {
    const std::vector<double> diff{-1.0, 0.0, -1.0, 0.0};
    const DmResult r = dm_from_differential(diff);
    // mean -1/2, sample variance 1/3, statistic -0.5 / sqrt(1/12).
    CHECK(r.statistic == doctest::Approx(-std::sqrt(3.0)).epsilon(1e-12));
    CHECK(r.p_value == doctest::Approx(0.0416323).epsilon(1e-5));
    CHECK(r.n_days == 4);
    CHECK_FALSE(r.degenerate_variance);

    CHECK(normal_cdf(0.0) == 0.5);
    CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
}

TEST_CASE("diebold-mariano degenerate cases") {
    const DmResult zero = dm_from_differential(std::vector<double>{0.0, 0.0, 0.0});
    CHECK(zero.degenerate_variance);
    CHECK(zero.p_value == 0.5);
    const DmResult neg = dm_from_differential(std::vector<double>{-2.0, -2.0});
    CHECK(neg.p_value == 0.0);
    const DmResult pos = dm_from_differential(std::vector<double>{3.0, 3.0});
    CHECK(pos.p_value == 1.0);
    CHECK_THROWS_AS(dm_from_differential(std::vector<double>{1.0}), DataError);

    test::Gen g(4);
    const HourlyGrid y = grid(g, 30);
    const HourlyGrid f = grid(g, 30);
    CHECK(dm_test(f, f, y).p_value == 0.5);
}

TEST_CASE("property: diebold-mariano antisymmetry") {
    test::Gen g(5);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 2 + g.index(100);
        const HourlyGrid y = grid(g, n);
        const HourlyGrid a = shifted(grid(g, n, 40.0, 3.0), g.uniform(-2.0, 2.0));
        const HourlyGrid b = grid(g, n, 40.0, 6.0);
        const DmResult ab = dm_test(a, b, y);
        const DmResult ba = dm_test(b, a, y);
        CHECK(ab.statistic == doctest::Approx(-ba.statistic).epsilon(1e-12));
        CHECK(ab.p_value + ba.p_value == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(ab.p_value >= 0.0);
        CHECK(ab.p_value <= 1.0);
    }
}

TEST_CASE("diebold-mariano uses daily aggregate errors") {
    // Hourly errors that cancel within the day make two forecasts equivalent.
    test::Gen g(6);
    const HourlyGrid y = grid(g, 10);
    HourlyGrid zigzag = y;
    for (auto& row : zigzag)
        for (int h = 0; h < kHours; ++h) row[h] += (h % 2 == 0) ? 5.0 : -5.0;
    const DmResult r = dm_test(zigzag, y, y);
    CHECK(r.degenerate_variance);
    CHECK(r.p_value == 0.5);
}

TEST_CASE("pareto front") {
    std::vector<ParetoPoint> pts{{"fast", 1.0, 5.0}, {"slow", 10.0, 2.0}, {"bad", 11.0, 6.0},
                                 {"mid", 5.0, 3.0},  {"twin", 5.0, 3.0},  {"dominated", 5.0, 3.5}};
    mark_pareto(pts);
    CHECK(pts[0].efficient);
    CHECK(pts[1].efficient);
    CHECK_FALSE(pts[2].efficient);
    CHECK(pts[3].efficient);
    CHECK(pts[4].efficient);
    CHECK_FALSE(pts[5].efficient);
}

TEST_CASE("property: pareto points are mutually non-dominated") {
    test::Gen g(7);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<ParetoPoint> pts(1 + g.index(15));
        for (auto& p : pts) p = {"p", static_cast<double>(g.integer(0, 5)), static_cast<double>(g.integer(0, 5))};
        mark_pareto(pts);
        bool any = false;
        for (const auto& p : pts) {
            any = any || p.efficient;
            bool dominated = false;
            for (const auto& q : pts)
                dominated = dominated || (q.runtime <= p.runtime && q.mae <= p.mae && (q.runtime < p.runtime || q.mae < p.mae));
            CHECK(p.efficient == !dominated);
        }
        CHECK(any);
    }
}
