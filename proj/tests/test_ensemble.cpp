#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "epf/ensemble.hpp"
#include "support.hpp"

using namespace epf;

namespace {

DayHours flat(double v) {
    DayHours d;
    d.fill(v);
    return d;
}

HourlyGrid random_grid(test::Gen& g, std::size_t days, double mu, double sd) {
    HourlyGrid out(days);
    for (auto& row : out)
        for (double& v : row) v = g.normal(mu, sd);
    return out;
}

HourlyGrid noisy(test::Gen& g, const HourlyGrid& truth, double sd, double bias = 0.0) {
    HourlyGrid out = truth;
    for (auto& row : out)
        for (double& v : row) v += bias + g.normal(0.0, sd);
    return out;
}

double simplex_gap(const HourWeights& w) {
    double worst = 0.0;
    for (const auto& hour : w) {
        double sum = 0.0;
        for (double v : hour) {
            if (v < 0.0) worst = std::max(worst, -v);
            sum += v;
        }
        worst = std::max(worst, std::abs(sum - 1.0));
    }
    return worst;
}

}  // namespace

TEST_CASE("equal weights and convex prediction") {
    const HourWeights w = equal_weights(4);
    for (const auto& hour : w) {
        REQUIRE(hour.size() == 4);
        for (double v : hour) CHECK(v == 0.25);
    }
    const std::vector<DayHours> experts{flat(1.0), flat(2.0), flat(3.0), flat(6.0)};
    for (double v : ensemble_predict(w, experts)) CHECK(v == doctest::Approx(3.0));

    HourWeights vertex = equal_weights(4);
    for (auto& hour : vertex) hour = {0.0, 0.0, 1.0, 0.0};
    CHECK(ensemble_predict(vertex, experts) == experts[2]);
}

TEST_CASE("boa: one update by hand") {
    BoaState s(2);
    const std::vector<DayHours> experts{flat(1.0), flat(3.0)};
    s.update(experts, flat(1.0));
    // Regrets -1 and +1, eta = min(1/2, sqrt(ln 2)) = 1/2.
    const double w0 = 1.0 / (1.0 + std::exp(-1.0));
    for (int h = 0; h < kHours; ++h) {
        CHECK(s.weights()[h][0] == doctest::Approx(w0).epsilon(1e-14));
        CHECK(s.weights()[h][1] == doctest::Approx(1.0 - w0).epsilon(1e-14));
        CHECK(s.learning_rate()[h][0] == 0.5);
        CHECK(s.regret()[h][0] == -0.5);
        CHECK(s.regret()[h][1] == 1.5);
        CHECK(s.squared_regret()[h][1] == 1.0);
        CHECK(s.loss_range()[h][1] == 1.0);
    }
}

TEST_CASE("boa: degenerate pools") {
    BoaState one(1);
    one.update(std::vector<DayHours>{flat(5.0)}, flat(1.0));
    for (const auto& hour : one.weights()) CHECK(hour == std::vector<double>{1.0});

    // Identical experts never separate.
    BoaState same(3);
    for (int d = 0; d < 50; ++d) same.update(std::vector<DayHours>(3, flat(2.0 + d)), flat(1.0 * d));
    for (const auto& hour : same.weights())
        for (double v : hour) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    CHECK_THROWS_AS(BoaState(0), ShapeError);
    BoaState two(2);
    CHECK_THROWS_AS(two.update(std::vector<DayHours>{flat(1.0)}, flat(1.0)), ShapeError);
    CHECK_THROWS_AS(two.update(std::vector<DayHours>{flat(1.0), flat(NAN)}, flat(1.0)), DataError);
    CHECK_THROWS_AS(two.update(std::vector<DayHours>{flat(1.0), flat(2.0)}, flat(INFINITY)), DataError);
}

TEST_CASE("boa: symmetric experts keep equal weights") {
    test::Gen g(3);
    BoaState s(2);
    for (int d = 0; d < 200; ++d) {
        const double y = g.normal(40.0, 10.0);
        const double e = std::abs(g.normal(0.0, 3.0));
        s.update(std::vector<DayHours>{flat(y - e), flat(y + e)}, flat(y));
    }
    for (const auto& hour : s.weights()) CHECK(hour[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("boa: a dominant expert takes over") {
    test::Gen g(19);
    BoaState s(3);
    int first_above = -1;
    for (int d = 0; d < 500; ++d) {
        const double y = g.normal(50.0, 15.0);
        s.update(std::vector<DayHours>{flat(y + g.normal(0.0, 0.1)), flat(y + g.normal(0.0, 5.0)),
                                       flat(y + 3.0 + g.normal(0.0, 5.0))},
                 flat(y));
        const bool all = std::all_of(s.weights().begin(), s.weights().end(),
                                     [](const std::vector<double>& w) { return w[0] > 0.99; });
        if (all && first_above < 0) first_above = d;
    }
    CHECK(first_above >= 0);
    CHECK(first_above < 500);
}

TEST_CASE("property: weights stay on the simplex") {
    test::Gen g(101);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t k = 1 + g.index(8);
        BoaState s(k);
        std::vector<DayHours> experts(k);
        for (int step = 0; step < 300; ++step) {
            DayHours y;
            for (double& v : y) v = g.normal(0.0, std::pow(10.0, g.uniform(-3.0, 3.0)));
            for (auto& x : experts)
                for (int h = 0; h < kHours; ++h) x[h] = y[h] + g.normal(0.0, std::pow(10.0, g.uniform(-4.0, 3.0)));
            s.update(experts, y);
            REQUIRE(simplex_gap(s.weights()) < 1e-12);
        }
    }
}

TEST_CASE("property: permuting experts permutes weights") {
    test::Gen g(55);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t k = 2 + g.index(5);
        std::vector<std::size_t> perm(k);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), g.engine());
        BoaState a(k), b(k);
        for (int step = 0; step < 100; ++step) {
            DayHours y;
            for (double& v : y) v = g.normal(30.0, 10.0);
            std::vector<DayHours> xs(k), permuted(k);
            for (std::size_t i = 0; i < k; ++i)
                for (int h = 0; h < kHours; ++h) xs[i][h] = y[h] + g.normal(0.0, 1.0 + static_cast<double>(i));
            for (std::size_t i = 0; i < k; ++i) permuted[i] = xs[perm[i]];
            a.update(xs, y);
            b.update(permuted, y);
        }
        for (int h = 0; h < kHours; ++h)
            for (std::size_t i = 0; i < k; ++i)
                CHECK(b.weights()[h][i] == doctest::Approx(a.weights()[h][perm[i]]).epsilon(1e-9));
    }
}

TEST_CASE("property: combined forecast is no worse than the worst expert cell by cell") {
    test::Gen g(8);
    const HourlyGrid truth = random_grid(g, 150, 40.0, 12.0);
    std::vector<HourlyGrid> experts{noisy(g, truth, 2.0), noisy(g, truth, 6.0, 1.0), noisy(g, truth, 4.0, -3.0)};
    const BoaRun run = run_boa(experts, truth, true);
    REQUIRE(run.combined.size() == truth.size());
    double worst = 0.0, best = 1e300;
    for (std::size_t d = 0; d < truth.size(); ++d) {
        for (int h = 0; h < kHours; ++h) {
            double hi = 0.0;
            for (const auto& x : experts) hi = std::max(hi, std::abs(x[d][h] - truth[d][h]));
            CHECK(std::abs(run.combined[d][h] - truth[d][h]) <= hi + 1e-9);
        }
    }
    for (const auto& x : experts) {
        const double m = mean_absolute_error(x, truth);
        worst = std::max(worst, m);
        best = std::min(best, m);
    }
    const double ens = mean_absolute_error(run.combined, truth);
    CHECK(ens < worst);
    CHECK(ens < best * 1.2);
}

TEST_CASE("run_boa forecasts with weights learned from earlier days") {
    test::Gen g(4);
    const HourlyGrid truth = random_grid(g, 30, 40.0, 12.0);
    std::vector<HourlyGrid> experts{noisy(g, truth, 2.0), noisy(g, truth, 6.0)};
    const BoaRun run = run_boa(experts, truth, true);
    REQUIRE(run.trajectory.size() == 30);
    CHECK(run.trajectory[0] == equal_weights(2));
    for (int h = 0; h < kHours; ++h) CHECK(run.combined[0][h] == doctest::Approx(0.5 * (experts[0][0][h] + experts[1][0][h])));

    BoaState s(2);
    for (std::size_t d = 0; d < 30; ++d) {
        std::vector<DayHours> today{experts[0][d], experts[1][d]};
        CHECK(run.trajectory[d] == s.weights());
        CHECK(run.combined[d] == ensemble_predict(s.weights(), today));
        s.update(today, truth[d]);
    }
    CHECK(run_boa(experts, truth).trajectory.empty());

    const HourlyGrid avg = run_equal_weights(experts);
    for (int h = 0; h < kHours; ++h) CHECK(avg[5][h] == doctest::Approx(0.5 * (experts[0][5][h] + experts[1][5][h])));

    std::vector<HourlyGrid> misaligned{experts[0], HourlyGrid(experts[1].begin(), experts[1].end() - 1)};
    CHECK_THROWS_AS(run_boa(misaligned, truth), ShapeError);
}

TEST_CASE("forward selection against a brute-force greedy oracle") {
    test::Gen g(12);
    const HourlyGrid truth = random_grid(g, 60, 40.0, 12.0);
    std::vector<HourlyGrid> pool;
    for (int i = 0; i < 6; ++i) pool.push_back(noisy(g, truth, g.uniform(1.0, 6.0), g.uniform(-3.0, 3.0)));

    // Oracle: recompute every candidate ensemble MAE from scratch.
    auto mae_of = [&](const std::vector<std::size_t>& idx) {
        std::vector<HourlyGrid> members;
        for (std::size_t i : idx) members.push_back(pool[i]);
        if (members.size() == 1) return mean_absolute_error(members[0], truth);
        return mean_absolute_error(run_boa(members, truth).combined, truth);
    };
    std::vector<std::size_t> expect;
    std::vector<double> expect_mae;
    for (int step = 0; step < 4; ++step) {
        std::size_t arg = 0;
        double best = 1e300;
        for (std::size_t c = 0; c < pool.size(); ++c) {
            if (std::find(expect.begin(), expect.end(), c) != expect.end()) continue;
            auto trial = expect;
            trial.push_back(c);
            const double m = mae_of(trial);
            if (m < best) best = m, arg = c;
        }
        expect.push_back(arg);
        expect_mae.push_back(best);
    }
    const Selection sel = forward_select(pool, truth, 4);
    CHECK(sel.members == expect);
    CHECK(sel.mae == expect_mae);
    CHECK_FALSE(sel.pool_too_small);

    const Selection single = forward_select(pool, truth, 1);
    REQUIRE(single.members.size() == 1);
    CHECK(single.members[0] == expect[0]);
}

TEST_CASE("forward selection edge cases") {
    test::Gen g(13);
    const HourlyGrid truth = random_grid(g, 20, 40.0, 12.0);
    const HourlyGrid a = noisy(g, truth, 1.0);
    const HourlyGrid b = noisy(g, truth, 3.0);

    const Selection small = forward_select(std::vector<HourlyGrid>{b, a}, truth, 10);
    CHECK(small.pool_too_small);
    CHECK(small.members == std::vector<std::size_t>{1, 0});

    const Selection exact = forward_select(std::vector<HourlyGrid>{b, a}, truth, 2);
    CHECK(exact.pool_too_small);
    CHECK(exact.members.size() == 2);
    CHECK_FALSE(forward_select(std::vector<HourlyGrid>{b, a}, truth, 1).pool_too_small);

    const Selection ties = forward_select(std::vector<HourlyGrid>{b, a, a}, truth, 1);
    CHECK(ties.members == std::vector<std::size_t>{1});

    CHECK_THROWS_AS(forward_select(std::vector<HourlyGrid>{}, truth, 3), ShapeError);
}

TEST_CASE("weight trajectory csv") {
    std::vector<HourWeights> traj{equal_weights(2), equal_weights(2)};
    traj[1][3] = {0.25, 0.75};
    const std::vector<Date> days{test::day(2021, 3, 1), test::day(2021, 3, 2)};
    const std::vector<std::string> names{"a", "b"};
    std::ostringstream out;
    write_weight_trajectory(out, days, traj, names);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "date,hour,expert,weight");
    std::size_t rows = 0;
    bool found = false;
    while (std::getline(in, line)) {
        ++rows;
        if (line == "2021-03-02,3,b,0.75") found = true;
    }
    CHECK(rows == 2 * kHours * 2);
    CHECK(found);
    CHECK_THROWS_AS(write_weight_trajectory(out, std::vector<Date>{days[0]}, traj, names), ShapeError);
}
