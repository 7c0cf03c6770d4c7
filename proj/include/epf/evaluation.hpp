#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "epf/common.hpp"
#include "epf/marketdata.hpp"

namespace epf {

struct MetricReport {
    double rmse = 0.0;
    double mae = 0.0;
    double rmae = 0.0;
    DayHours hourly_rmse{};
    std::size_t n_days = 0;
};

/// RMSE and MAE over all day-hour cells; rMAE divides the model MAE by the
/// MAE of `naive` on the same days.
MetricReport metrics(const HourlyGrid& forecasts, const HourlyGrid& realized, const HourlyGrid& naive);

DayHours hourly_rmse(const HourlyGrid& forecasts, const HourlyGrid& realized);

/// Yesterday's prices for a Tuesday-Friday target day, otherwise the prices
/// of the same weekday one week earlier.
DayHours naive_forecast(const MarketSeries& series, Date day);
HourlyGrid naive_forecasts(const MarketSeries& series, std::span<const Date> days);

struct DmResult {
    double statistic = 0.0;
    /// One-sided: small values favour "A is more accurate than B".
    double p_value = 0.5;
    std::size_t n_days = 0;
    bool degenerate_variance = false;
};

/// Diebold-Mariano test on daily aggregate errors e_d = sum_h forecast - sum_h price,
/// loss differential |e_A| - |e_B|, sample variance, normal reference.
DmResult dm_test(const HourlyGrid& forecasts_a, const HourlyGrid& forecasts_b, const HourlyGrid& realized);
/// Same statistic computed directly from a loss-differential series.
DmResult dm_from_differential(std::span<const double> differential);

double normal_cdf(double x);

struct ParetoPoint {
    std::string name;
    double runtime = 0.0;
    double mae = 0.0;
    bool efficient = false;
};

/// Marks points not dominated in (runtime, MAE); lower is better in both.
void mark_pareto(std::vector<ParetoPoint>& points);

}  // namespace epf
