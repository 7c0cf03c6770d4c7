#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "epf/features.hpp"
#include "epf/model.hpp"
#include "epf/training.hpp"

namespace epf {

/// Partial online-learning schedule: one long initial fit, then short
/// warm-started refits on the most recent d_up days.
struct OnlineSchedule {
    std::size_t d_init = 365;
    std::size_t d_up = 28;
    int epochs_init = 60;
    int epochs_up = 10;
    double lr_init = 0.1;
    double lr_up = 0.01;
    /// Mini-batch rows per Adam step (0 = whole window).
    std::size_t batch_size = 32;

    void validate() const;
};

struct IterationWindow {
    Date train_first{};
    Date train_last{};
    Date forecast_day{};
    std::size_t train_days = 0;
    int epochs = 0;
};

struct BacktestResult {
    std::vector<Date> days;
    HourlyGrid forecasts;
    HourlyGrid realized;
    std::vector<IterationWindow> windows;
    std::vector<double> iteration_seconds;
    double total_seconds = 0.0;
    double mae = 0.0;
    double rmse = 0.0;
    ParamSet final_params;
    Scaler scaler;
};

using IterationObserver =
    std::function<void(std::size_t iteration, const ParamSet& entering, const ParamSet& exiting)>;

struct BacktestOptions {
    IterationObserver observer;
    /// Replaces the random/OLS initialization of the first iteration.
    std::optional<ParamSet> warm_start;
};

/// Rolling day-ahead backtest over [forecast_start, forecast_end]. The scaler
/// is fitted on the initial window and kept for the whole run.
BacktestResult run_backtest(const ModelSpec& spec, const OnlineSchedule& schedule, std::span<const DayDesign> designs,
                            Date forecast_start, Date forecast_end, const BacktestOptions& options = {});

/// Classic rolling window: every day is a cold start trained for
/// epochs_init on the d_init preceding days, with its own scaler.
BacktestResult run_full_refit_baseline(const ModelSpec& spec, const OnlineSchedule& schedule,
                                       std::span<const DayDesign> designs, Date forecast_start, Date forecast_end);

/// CSV: header "date,h0,...,h23", one row per forecast day.
void write_forecasts_csv(std::ostream& out, std::span<const Date> days, const HourlyGrid& forecasts);

struct ForecastTable {
    std::vector<Date> days;
    HourlyGrid values;
};

ForecastTable read_forecasts_csv(std::istream& in);

/// {"n_days", "forecast_start", "forecast_end", "mae", "rmse"}; timing is
/// kept out so repeated runs produce identical bytes.
nlohmann::json backtest_summary(const BacktestResult& result);
/// {"total_seconds", "iteration_seconds": [...]}
nlohmann::json backtest_runtime(const BacktestResult& result);

}  // namespace epf
