#include "epf/online.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace epf {

namespace {

using Clock = std::chrono::steady_clock;

struct ForecastRange {
    std::size_t first = 0;  // index into designs
    std::size_t count = 0;
};

ForecastRange locate(std::span<const DayDesign> designs, Date start, Date end, std::size_t history) {
    if (end < start) throw UsageError("backtest: forecast_end precedes forecast_start");
    const std::size_t first = find_design(designs, start);
    const std::size_t last = find_design(designs, end);
    for (std::size_t i = first - std::min(first, history); i <= last; ++i) {
        if (!designs[i].valid) {
            throw DataError("backtest: insufficient history, " + format_date(designs[i].date) + " lacks price lags");
        }
        if (i > 0 && designs[i].date != designs[i - 1].date + std::chrono::days{1}) {
            throw DataError("backtest: designs are not consecutive at " + format_date(designs[i].date));
        }
    }
    if (first < history) {
        throw DataError("backtest: insufficient history, need " + std::to_string(history) + " days before " +
                        format_date(start) + ", have " + std::to_string(first));
    }
    return {first, last - first + 1};
}

Batch rows_of(const Batch& batch, std::size_t start, std::size_t count) {
    std::vector<std::size_t> idx(count);
    std::iota(idx.begin(), idx.end(), start);
    return select_rows(batch, idx);
}

ParamSet initial_params(const ModelSpec& spec, const Batch& window, const FeatureLayout& layout) {
    return is_ols_variant(spec.architecture) ? init_ols(spec, window, layout) : init_random(spec, layout);
}

TrainConfig train_config(const ModelSpec& spec, const OnlineSchedule& schedule, bool initial, std::size_t iteration) {
    TrainConfig c;
    c.epochs = initial ? schedule.epochs_init : schedule.epochs_up;
    c.learning_rate = initial ? schedule.lr_init : schedule.lr_up;
    c.batch_size = schedule.batch_size;
    c.shuffle = true;
    c.seed = derive_seed(spec.seed, iteration);
    c.record_trace = false;
    return c;
}

void finish(BacktestResult& r) {
    double abs_sum = 0.0, sq_sum = 0.0;
    for (std::size_t d = 0; d < r.forecasts.size(); ++d) {
        for (int h = 0; h < kHours; ++h) {
            const double e = r.forecasts[d][h] - r.realized[d][h];
            abs_sum += std::abs(e);
            sq_sum += e * e;
        }
    }
    const double cells = static_cast<double>(r.forecasts.size() * kHours);
    r.mae = abs_sum / cells;
    r.rmse = std::sqrt(sq_sum / cells);
    r.total_seconds = std::accumulate(r.iteration_seconds.begin(), r.iteration_seconds.end(), 0.0);
}

DayHours row_forecast(const ModelSpec& spec, const ParamSet& params, const Batch& day) {
    const Eigen::MatrixXd out = predict(spec, params, day);
    DayHours f{};
    for (int h = 0; h < kHours; ++h) {
        f[h] = out(0, h);
        if (!std::isfinite(f[h])) throw NumericalError("backtest: non-finite forecast");
    }
    return f;
}

}  // namespace

void OnlineSchedule::validate() const {
    if (d_up < 1 || d_init < d_up) throw UsageError("schedule: need d_init >= d_up >= 1");
    if (epochs_up < 1 || epochs_init < epochs_up) throw UsageError("schedule: need epochs_init >= epochs_up >= 1");
    if (!(lr_init > 0.0) || !(lr_up > 0.0)) throw UsageError("schedule: learning rates must be positive");
}

BacktestResult run_backtest(const ModelSpec& spec, const OnlineSchedule& schedule, std::span<const DayDesign> designs,
                            Date forecast_start, Date forecast_end, const BacktestOptions& options) {
    spec.validate();
    schedule.validate();
    const ForecastRange range = locate(designs, forecast_start, forecast_end, schedule.d_init);
    const std::size_t origin = range.first - schedule.d_init;

    BacktestResult r;
    r.scaler = fit_scaler(designs.subspan(origin, schedule.d_init));
    // Rows [0, d_init) are the initial window, row d_init + k is forecast day k.
    const Batch all = make_batch(transform_all(designs.subspan(origin, schedule.d_init + range.count), r.scaler));

    ParamSet params;
    for (std::size_t k = 0; k < range.count; ++k) {
        const auto t0 = Clock::now();
        const bool initial = k == 0;
        const std::size_t train_days = initial ? schedule.d_init : schedule.d_up;
        const std::size_t target_row = schedule.d_init + k;
        const Batch window = rows_of(all, target_row - train_days, train_days);
        if (initial) {
            params = options.warm_start ? *options.warm_start : initial_params(spec, window, r.scaler.layout);
        }
        const ParamSet entering = params;
        TrainResult trained = train_window(spec, std::move(params), AdamState::fresh(entering), window,
                                           train_config(spec, schedule, initial, k));
        params = std::move(trained.params);
        if (options.observer) options.observer(k, entering, params);

        const std::size_t day = range.first + k;
        r.days.push_back(designs[day].date);
        r.forecasts.push_back(row_forecast(spec, params, rows_of(all, target_row, 1)));
        r.realized.push_back(designs[day].targets);
        r.windows.push_back({designs[day - train_days].date, designs[day - 1].date, designs[day].date, train_days,
                             initial ? schedule.epochs_init : schedule.epochs_up});
        r.iteration_seconds.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
    }
    r.final_params = std::move(params);
    finish(r);
    return r;
}

BacktestResult run_full_refit_baseline(const ModelSpec& spec, const OnlineSchedule& schedule,
                                       std::span<const DayDesign> designs, Date forecast_start, Date forecast_end) {
    spec.validate();
    schedule.validate();
    const ForecastRange range = locate(designs, forecast_start, forecast_end, schedule.d_init);

    BacktestResult r;
    for (std::size_t k = 0; k < range.count; ++k) {
        const auto t0 = Clock::now();
        const std::size_t day = range.first + k;
        const auto window_designs = designs.subspan(day - schedule.d_init, schedule.d_init);
        r.scaler = fit_scaler(window_designs);
        const Batch window = make_batch(transform_all(window_designs, r.scaler));
        ParamSet params = initial_params(spec, window, r.scaler.layout);
        TrainResult trained = train_window(spec, params, AdamState::fresh(params), window,
                                           train_config(spec, schedule, true, k));
        const DayDesign target = transform(designs[day], r.scaler);
        r.days.push_back(designs[day].date);
        r.forecasts.push_back(row_forecast(spec, trained.params, make_batch(std::span(&target, 1))));
        r.realized.push_back(designs[day].targets);
        r.windows.push_back({window_designs.front().date, window_designs.back().date, designs[day].date,
                             schedule.d_init, schedule.epochs_init});
        r.final_params = std::move(trained.params);
        r.iteration_seconds.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
    }
    finish(r);
    return r;
}

void write_forecasts_csv(std::ostream& out, std::span<const Date> days, const HourlyGrid& forecasts) {
    out << "date";
    for (int h = 0; h < kHours; ++h) out << ",h" << h;
    out << '\n';
    char buf[40];
    for (std::size_t d = 0; d < days.size(); ++d) {
        out << format_date(days[d]);
        for (int h = 0; h < kHours; ++h) {
            std::snprintf(buf, sizeof buf, ",%.17g", forecasts[d][h]);
            out << buf;
        }
        out << '\n';
    }
}

ForecastTable read_forecasts_csv(std::istream& in) {
    ForecastTable t;
    std::string line;
    if (!std::getline(in, line) || line.rfind("date", 0) != 0) throw SchemaError("forecast file: missing header");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        t.days.push_back(parse_date(cell));
        DayHours row{};
        for (int h = 0; h < kHours; ++h) {
            if (!std::getline(ss, cell, ',')) throw SchemaError("forecast file: short row for " + format_date(t.days.back()));
            try {
                row[h] = std::stod(cell);
            } catch (const std::exception&) {
                throw SchemaError("forecast file: bad number '" + cell + "'");
            }
        }
        t.values.push_back(row);
    }
    return t;
}

nlohmann::json backtest_summary(const BacktestResult& r) {
    nlohmann::json j;
    j["n_days"] = r.days.size();
    j["forecast_start"] = r.days.empty() ? "" : format_date(r.days.front());
    j["forecast_end"] = r.days.empty() ? "" : format_date(r.days.back());
    j["mae"] = r.mae;
    j["rmse"] = r.rmse;
    return j;
}

nlohmann::json backtest_runtime(const BacktestResult& r) {
    return nlohmann::json{{"total_seconds", r.total_seconds}, {"iteration_seconds", r.iteration_seconds}};
}

}  // namespace epf
