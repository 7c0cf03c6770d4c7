#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "epf/features.hpp"
#include "support.hpp"

using namespace epf;

TEST_CASE("design widths") {
    const FeatureLayout de(true), es(false);
    CHECK(de.full_width() == 175);
    CHECK(de.reduced_width(5) == 15);
    CHECK(de.reduced_width(23) == 14);
    CHECK(es.full_width() == 151);
    CHECK(es.reduced_width(5) == 14);
    CHECK(es.reduced_width(23) == 13);

    const auto designs = build_designs(test::small_market(30).series);
    const DayDesign& d = designs.at(10);
    CHECK(d.full_x.size() == 175);
    CHECK(d.reduced_x[5].size() == 15);
    CHECK(d.reduced_x[23].size() == 14);
    const auto spain = build_designs(test::small_market(30, 11, 0.0, false).series);
    CHECK(spain.at(10).full_x.size() == 151);
    CHECK(spain.at(10).reduced_x[5].size() == 14);
}

TEST_CASE("lag structure and validity") {
    const SyntheticMarket m = test::small_market(40);
    const auto& s = m.series;
    const auto designs = build_designs(s);
    REQUIRE(designs.size() == s.n_days());
    for (std::size_t d = 0; d < 7; ++d) CHECK_FALSE(designs[d].valid);
    const std::size_t d = 20;
    const DayDesign& x = designs[d];
    CHECK(x.valid);
    CHECK(x.targets == s.price[d]);
    CHECK(x.reduced_x[5][0] == s.price[d - 1][5]);
    CHECK(x.reduced_x[5][1] == s.price[d - 2][5]);
    CHECK(x.reduced_x[5][2] == s.price[d - 7][5]);
    CHECK(x.reduced_x[5][3] == s.price[d - 1][23]);
    CHECK(x.reduced_x[5][4] == s.solar[d][5]);
    CHECK(x.reduced_x[5][5] == s.wind_on[d][5]);
    CHECK(x.reduced_x[5][6] == s.wind_off[d][5]);
    CHECK(x.reduced_x[5][7] == s.load[d][5]);
    CHECK(x.reduced_x[5][8] == s.oil[d - 2]);
    CHECK(x.reduced_x[5][9] == s.coal[d - 2]);
    CHECK(x.reduced_x[5][10] == s.eua[d - 2]);
    CHECK(x.reduced_x[5][11] == s.ngas[d - 2]);
    const CalendarDummies c = calendar_dummies(s.days[d]);
    CHECK(x.reduced_x[5][12] == c.monday);
    CHECK(x.reduced_x[5][13] == c.saturday);
    CHECK(x.reduced_x[5][14] == c.sunday);
    // Hour 23 drops the duplicate last-hour lag.
    CHECK(x.reduced_x[23][3] == s.solar[d][23]);
    CHECK(x.full_x[0] == s.price[d - 1][0]);
    CHECK(x.full_x[24 + 3] == s.price[d - 2][3]);
    CHECK(x.full_x[48 + 7] == s.price[d - 7][7]);

    SyntheticSpec spec;
    const SyntheticMarket tiny = generate_synthetic(30, 1, spec);
    MarketSeries short_series = tiny.series;
    short_series.days.resize(7);
    for (Role r : kHourlyRoles) short_series.hourly(r).resize(7);
    for (Role r : kCommodityRoles) short_series.daily(r).resize(7);
    CHECK_THROWS(build_designs(short_series));
}

TEST_CASE("property: reduced slots alias the full vector") {
    for (bool offshore : {true, false}) {
        const auto designs = build_designs(test::small_market(30, 4, 2.0, offshore).series);
        const FeatureLayout layout(offshore);
        for (const DayDesign& d : designs) {
            if (!d.valid) continue;
            for (int h = 0; h < kHours; ++h) {
                for (std::size_t k = 0; k < d.reduced_x[h].size(); ++k) {
                    CHECK(d.reduced_x[h][k] == d.full_x[layout.full_index(h, k)]);
                }
            }
        }
    }
}

TEST_CASE("scaler moments") {
    auto designs = build_designs(test::small_market(30).series);
    std::vector<DayDesign> window(designs.begin() + 10, designs.begin() + 13);
    for (int i = 0; i < 3; ++i) window[i].full_x[0] = i + 1.0;
    for (auto& w : window) w.full_x[100] = 5.0;
    const Scaler sc = fit_scaler(window);
    CHECK(sc.mean[0] == doctest::Approx(2.0));
    CHECK(sc.std[0] == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-14));
    CHECK(sc.mean[100] == doctest::Approx(5.0));
    CHECK(sc.std[100] == 1.0);
    for (std::size_t j = 172; j < 175; ++j) CHECK(sc.std[j] == 1.0);
    CHECK(sc.window_days == 3);
}

TEST_CASE("transform arithmetic") {
    const auto designs = build_designs(test::small_market(60).series);
    const std::vector<DayDesign> window(designs.begin() + 7, designs.end());
    const Scaler sc = fit_scaler(window);

    DayDesign at_mean = window[0];
    at_mean.full_x = sc.mean;
    for (int h = 0; h < kHours; ++h) {
        for (std::size_t k = 0; k < at_mean.reduced_x[h].size(); ++k) at_mean.reduced_x[h][k] = sc.mean[sc.layout.full_index(h, k)];
    }
    const DayDesign z = transform(at_mean, sc);
    for (double v : z.full_x) CHECK(v == 0.0);
    CHECK(z.targets == at_mean.targets);

    Scaler dummy = sc;
    dummy.mean[174] = 0.3;
    DayDesign one = window[0];
    one.full_x[174] = 1.0;
    CHECK(transform(one, dummy).full_x[174] == doctest::Approx(0.7));

    for (const DayDesign& d : window) {
        const DayDesign back = inverse_transform(transform(d, sc), sc);
        for (std::size_t j = 0; j < d.full_x.size(); ++j) {
            CHECK(std::abs(back.full_x[j] - d.full_x[j]) <= 1e-12 * std::max(1.0, std::abs(d.full_x[j])));
        }
    }

    const auto spain = build_designs(test::small_market(30, 1, 0.0, false).series);
    CHECK_THROWS_AS(transform(spain[10], sc), ShapeError);
    CHECK_THROWS_AS(transform(designs[0], sc), DataError);
}

TEST_CASE("property: standardized window columns have zero mean and unit std") {
    test::Gen g(9);
    for (int trial = 0; trial < 5; ++trial) {
        const auto designs = build_designs(test::small_market(50 + g.index(40), 100 + trial, g.uniform(0, 5)).series);
        const std::size_t first = 7 + g.index(10);
        const std::vector<DayDesign> window(designs.begin() + static_cast<long>(first), designs.end());
        const Scaler sc = fit_scaler(window);
        const auto z = transform_all(window, sc);
        const double n = static_cast<double>(z.size());
        for (std::size_t j = 0; j < sc.mean.size(); ++j) {
            if (sc.layout.is_dummy(j)) continue;
            double mean = 0.0, sq = 0.0;
            for (const auto& d : z) mean += d.full_x[j];
            mean /= n;
            for (const auto& d : z) sq += (d.full_x[j] - mean) * (d.full_x[j] - mean);
            CHECK(std::abs(mean) < 1e-10);
            if (sc.std[j] != 1.0) CHECK(std::abs(std::sqrt(sq / n) - 1.0) < 1e-10);
        }
    }
}

TEST_CASE("feature map artifact and lookup") {
    test::TempDir dir("features");
    write_feature_map(FeatureLayout(true), dir.path() / "map.txt");
    const std::string text = test::slurp(dir.path() / "map.txt");
    CHECK(text.find("174") != std::string::npos);
    CHECK(text.find(FeatureLayout(true).full_name(174)) != std::string::npos);

    const auto designs = build_designs(test::small_market(30).series);
    CHECK(find_design(designs, designs[12].date) == 12);
    CHECK_THROWS_AS(find_design(designs, designs.back().date + std::chrono::days{1}), DataError);
}
