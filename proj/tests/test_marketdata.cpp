#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "epf/features.hpp"
#include "epf/marketdata.hpp"
#include "support.hpp"

using namespace epf;
using epf::test::day;
using epf::test::make_csv;

namespace {

ZoneConfig zone(bool offshore = true, DstRule rule = DstRule::None) {
    ZoneConfig z = default_zone_config("T", offshore);
    z.dst_rule = rule;
    return z;
}

RawMarketSeries parse(const std::string& text, const ZoneConfig& z) {
    std::istringstream in(text);
    return parse_csv(in, z);
}

}  // namespace

TEST_CASE("load_csv parses a two-day file") {
    const std::string text = make_csv(day(2023, 5, 1), 2, true, test::default_cell);
    const RawMarketSeries raw = parse(text, zone());
    REQUIRE(raw.series.n_days() == 2);
    CHECK(raw.series.price[1][5] == doctest::Approx(10.0 + 5 + 1));
    CHECK(raw.series.load[0][23] == doctest::Approx(50.0 + 23));
    CHECK(raw.series.oil[1] == doctest::Approx(50.0 + static_cast<double>(Role::Oil) + 1));
    CHECK(raw.series.count_missing() == 0);
}

TEST_CASE("load_csv schema and data errors") {
    SUBCASE("missing mapped column") {
        std::string text = make_csv(day(2023, 5, 1), 1, true, test::default_cell);
        const auto pos = text.find(",load");
        text.replace(pos, 5, ",lode");
        CHECK_THROWS_AS(parse(text, zone()), SchemaError);
    }
    SUBCASE("NA cell becomes missing") {
        const std::string text = make_csv(day(2023, 5, 1), 1, true, [](Role r, std::size_t d, int h) {
            return (r == Role::Solar && h == 12) ? std::string("NA") : test::default_cell(r, d, h);
        });
        const RawMarketSeries raw = parse(text, zone());
        CHECK(is_missing(raw.series.solar[0][12]));
        CHECK(raw.series.count_missing() == 1);
    }
    SUBCASE("duplicate timestamp outside the autumn change") {
        std::string text = make_csv(day(2023, 5, 1), 1, true, test::default_cell);
        const auto first_row = text.find('\n') + 1;
        const auto second_row = text.find('\n', first_row) + 1;
        text += text.substr(first_row, second_row - first_row);
        CHECK_THROWS_AS(parse(text, zone()), DataError);
    }
    SUBCASE("zone without offshore wind needs no wind_off column") {
        const std::string text = make_csv(day(2023, 5, 1), 1, false, test::default_cell);
        const RawMarketSeries raw = parse(text, zone(false));
        CHECK(raw.series.wind_off.empty());
        CHECK_THROWS_AS(parse(text, zone(true)), SchemaError);
    }
}

TEST_CASE("zone config validation and JSON round trip") {
    ZoneConfig z = default_zone_config("DE-LU", true);
    z.actual_columns[Role::Load] = "load_actual";
    const ZoneConfig back = zone_config_from_json(to_json(z));
    CHECK(back.zone_id == "DE-LU");
    CHECK(back.columns == z.columns);
    CHECK(back.actual_columns == z.actual_columns);
    z.columns.erase(Role::Coal);
    CHECK_THROWS_AS(z.validate(), SchemaError);
}

TEST_CASE("impute_locf") {
    const double m = kMissing;
    const std::vector<double> a{1.0, m, m, 2.0};
    CHECK(impute_locf(a) == std::vector<double>{1.0, 1.0, 1.0, 2.0});
    const std::vector<double> b{m, 1.0};
    CHECK_THROWS_AS(impute_locf(b), DataError);
    const std::vector<double> c{3.0, 4.0};
    CHECK(impute_locf(c) == c);
}

TEST_CASE("impute_regression") {
    const double m = kMissing;
    SUBCASE("perfect fit") {
        const std::vector<double> target{1.0, m, 3.0, m, 5.0};
        const std::vector<double> pred{1.0, 2.5, 3.0, 7.0, 5.0};
        const auto r = impute_regression(target, pred);
        CHECK(r.slope == doctest::Approx(1.0));
        CHECK(r.intercept == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(r.values[1] == doctest::Approx(2.5));
        CHECK(r.values[3] == doctest::Approx(7.0));
        CHECK(r.fills == 2);
    }
    SUBCASE("two points") {
        const std::vector<double> target{2.0, 4.0, m};
        const std::vector<double> pred{1.0, 2.0, 3.0};
        CHECK(impute_regression(target, pred).values[2] == doctest::Approx(6.0));
    }
    SUBCASE("constant predictor falls to the target mean") {
        const std::vector<double> target{1.0, 2.0, 6.0, m};
        const std::vector<double> pred{4.0, 4.0, 4.0, 4.0};
        const auto r = impute_regression(target, pred);
        CHECK(r.slope == 0.0);
        CHECK(r.values[3] == doctest::Approx(3.0));
    }
    SUBCASE("missing predictor at a gap carries forward") {
        const std::vector<double> target{1.0, 2.0, 3.0, m};
        const std::vector<double> pred{1.0, 2.0, 3.0, m};
        const auto r = impute_regression(target, pred);
        CHECK(r.fallbacks == 1);
        CHECK(r.values[3] == 3.0);
    }
    SUBCASE("fewer than two complete pairs") {
        const std::vector<double> target{1.0, m};
        const std::vector<double> pred{1.0, 2.0};
        CHECK_THROWS_AS(impute_regression(target, pred), DataError);
    }
}

TEST_CASE("DST dates follow the EU rule") {
    CHECK(is_spring_dst_date(day(2021, 3, 28), DstRule::EU));
    CHECK_FALSE(is_spring_dst_date(day(2021, 3, 21), DstRule::EU));
    CHECK(is_fall_dst_date(day(2021, 10, 31), DstRule::EU));
    CHECK(is_fall_dst_date(day(2024, 10, 27), DstRule::EU));
    CHECK_FALSE(is_fall_dst_date(day(2021, 10, 31), DstRule::None));
}

TEST_CASE("spring and autumn DST normalization") {
    const ZoneConfig z = zone(true, DstRule::EU);
    SUBCASE("spring gap takes the neighbour mean") {
        std::string text = make_csv(day(2021, 3, 27), 3, true, [](Role r, std::size_t d, int h) {
            if (r == Role::Price && d == 1) return std::string(h == 1 ? "10" : h == 3 ? "14" : "20");
            return test::default_cell(r, d, h);
        });
        // Drop 2021-03-28 02:00.
        const auto pos = text.find("2021-03-28T02:00");
        text.erase(pos, text.find('\n', pos) - pos + 1);
        CleaningLog log;
        const RawMarketSeries out = normalize_dst(parse(text, z), z, &log);
        CHECK(out.series.price[1][2] == doctest::Approx(12.0));
        CHECK(out.series.count_missing() == 0);
        CHECK(log.dst_spring_days == 1);
        CHECK(out.series.price[0] == parse(text, z).series.price[0]);
    }
    SUBCASE("spring gap next to another gap") {
        std::string text = make_csv(day(2021, 3, 28), 1, true, [](Role r, std::size_t d, int h) {
            return (r == Role::Price && h == 3) ? std::string("NA") : test::default_cell(r, d, h);
        });
        const auto pos = text.find("2021-03-28T02:00");
        text.erase(pos, text.find('\n', pos) - pos + 1);
        CHECK_THROWS_AS(normalize_dst(parse(text, z), z), DataError);
    }
    SUBCASE("autumn repeat is averaged") {
        std::string text = make_csv(day(2021, 10, 31), 1, true, [](Role r, std::size_t d, int h) {
            return (r == Role::Price && h == 2) ? std::string("8") : test::default_cell(r, d, h);
        });
        const auto pos = text.find("2021-10-31T02:00");
        std::string repeat = text.substr(pos, text.find('\n', pos) - pos + 1);
        repeat.replace(repeat.find(",8,"), 3, ",10,");
        text += repeat;
        CleaningLog log;
        const RawMarketSeries out = normalize_dst(parse(text, z), z, &log);
        CHECK(out.series.price[0][2] == doctest::Approx(9.0));
        CHECK(out.series.n_days() == 1);
        CHECK(log.dst_fall_days == 1);
    }
}

TEST_CASE("cleaning logs per rule") {
    SUBCASE("clean input") {
        const std::string text = make_csv(day(2023, 1, 2), 5, true, test::default_cell);
        const CleanResult r = clean(parse(text, zone()), zone());
        CHECK(r.log.total_imputations() == 0);
    }
    SUBCASE("three commodity gaps") {
        const std::string text = make_csv(day(2023, 1, 2), 8, true, [](Role r, std::size_t d, int h) {
            const bool gap = (r == Role::Oil && (d == 2 || d == 3)) || (r == Role::Eua && d == 6);
            return gap ? std::string("NA") : test::default_cell(r, d, h);
        });
        const CleanResult r = clean(parse(text, zone()), zone());
        CHECK(r.log.commodity_locf_fills == 3);
        CHECK(r.series.oil[3] == r.series.oil[1]);
    }
    SUBCASE("spring date") {
        std::string text = make_csv(day(2021, 3, 27), 3, true, test::default_cell);
        const auto pos = text.find("2021-03-28T02:00");
        text.erase(pos, text.find('\n', pos) - pos + 1);
        const ZoneConfig z = zone(true, DstRule::EU);
        const CleanResult r = clean(parse(text, z), z);
        CHECK(r.log.dst_spring_days == 1);
    }
}

TEST_CASE("property: clean leaves no missing cells") {
    test::Gen g(5);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = 3 + g.index(6);
        std::vector<std::vector<bool>> holes(n * kHours, std::vector<bool>(9, false));
        for (auto& row : holes) {
            for (std::size_t c = 0; c < row.size(); ++c) row[c] = g.coin(0.1);
        }
        for (std::size_t c = 0; c < 9; ++c) holes[0][c] = false;
        const std::string text = make_csv(day(2022, 6, 1), n, true, [&](Role r, std::size_t d, int h) {
            const bool gap = holes[d * kHours + static_cast<std::size_t>(h)][static_cast<std::size_t>(r)];
            // Commodities read the first non-missing hour; keep hour 0 of day 0 intact.
            return gap ? std::string("NA") : test::default_cell(r, d, h);
        });
        const CleanResult res = clean(parse(text, zone()), zone());
        CHECK(res.series.count_missing() == 0);
        CHECK(res.series.n_days() == n);
        for (const auto& row : res.series.price) CHECK(row.size() == static_cast<std::size_t>(kHours));
    }
}

TEST_CASE("calendar dummies") {
    auto same = [](CalendarDummies c, int m, int s, int u) { return c.monday == m && c.saturday == s && c.sunday == u; };
    CHECK(same(calendar_dummies(day(2025, 1, 13)), 1, 0, 0));
    CHECK(same(calendar_dummies(day(2025, 1, 15)), 0, 0, 0));
    CHECK(same(calendar_dummies(day(2025, 1, 18)), 0, 1, 0));
    CHECK(same(calendar_dummies(day(2025, 1, 19)), 0, 0, 1));
    for (int i = 0; i < 800; ++i) {
        const CalendarDummies c = calendar_dummies(day(2020, 1, 1) + std::chrono::days{i});
        const int sum = c.monday + c.saturday + c.sunday;
        CHECK((sum == 0 || sum == 1));
    }
}

TEST_CASE("synthetic generator") {
    CHECK_THROWS(generate_synthetic(29, 1));
    const SyntheticMarket a = test::small_market(60, 3, 4.0);
    const SyntheticMarket b = test::small_market(60, 3, 4.0);
    CHECK(a.series.price == b.series.price);
    CHECK(a.series.ngas == b.series.ngas);
    CHECK(a.series.count_missing() == 0);
    CHECK(test::small_market(60, 4, 4.0).series.price != a.series.price);
    CHECK(test::small_market(60, 3, 0.0, false).series.wind_off.empty());
}

TEST_CASE("noise-free linear synthetic prices follow the generating equation") {
    for (bool offshore : {true, false}) {
        SyntheticSpec spec;
        spec.noise_scale = 0.0;
        spec.nonlinearity = 0.0;
        spec.has_wind_offshore = offshore;
        const SyntheticMarket m = generate_synthetic(45, 8, spec);
        const auto designs = build_designs(m.series);
        double worst = 0.0;
        for (const DayDesign& d : designs) {
            if (!d.valid) continue;
            for (int h = 0; h < kHours; ++h) {
                const auto& c = m.truth.coefficients[h];
                REQUIRE(c.size() == d.reduced_x[h].size());
                double p = m.truth.intercept[h];
                for (std::size_t k = 0; k < c.size(); ++k) p += c[k] * d.reduced_x[h][k];
                worst = std::max(worst, std::abs(p - d.targets[h]));
            }
        }
        CHECK(worst < 1e-9);
    }
}

TEST_CASE("written series reload bit for bit") {
    test::TempDir dir("md");
    const SyntheticMarket m = test::small_market(35, 2, 3.0);
    write_csv(m.series, dir.path() / "s.csv");
    const ZoneConfig z = default_zone_config(m.series.zone_id, true);
    const CleanResult back = clean(load_csv(dir.path() / "s.csv", z), z);
    CHECK(back.series.price == m.series.price);
    CHECK(back.series.wind_off == m.series.wind_off);
    CHECK(back.series.eua == m.series.eua);
    CHECK(back.series.days == m.series.days);
}
