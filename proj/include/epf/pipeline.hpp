#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "epf/marketdata.hpp"
#include "epf/model.hpp"
#include "epf/online.hpp"
#include "epf/tuner.hpp"

namespace epf {

/// A model to backtest on the test period. With `tuned` set, the
/// hyperparameters come from the best trial of the architecture's study.
struct ModelEntry {
    std::string name;
    Architecture architecture = Architecture::MLPReducedLinear;
    std::size_t hidden_n = 16;
    double leak_alpha = 0.01;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    std::optional<double> ols_share_alpha;
    std::optional<OnlineSchedule> schedule;
    bool tuned = false;
};

struct Periods {
    std::optional<Date> validation_start;
    std::optional<Date> test_start;
    std::optional<Date> test_end;
};

struct ResolvedPeriods {
    Date validation_start{};
    Date test_start{};
    Date test_end{};
};

struct TunerConfig {
    std::vector<Architecture> architectures;  // empty = all seven
    /// Trials run in batches of 8 sharing one history snapshot; --jobs
    /// parallelizes within a batch, so it never changes results.
    StudySettings study = [] {
        StudySettings s;
        s.batch = 8;
        return s;
    }();
    /// Per-dimension bound overrides, name -> [low, high].
    std::map<std::string, std::pair<double, double>> bounds;
};

struct SelectConfig {
    std::size_t size = 10;
    /// Candidates pooled across classes for "BOA all".
    std::size_t pool = 500;
};

/// Experiment description, read from JSON:
///
///   {
///     "seed": 7,
///     "out": "run",
///     "zone": { ...ZoneConfig... },             // or "zone_config": "zone.json"
///     "data": "prices.csv",                     // raw input for ingest
///     "synthetic": {"n_days": 1100, "nonlinearity": 10, "noise_scale": 2,
///                   "has_wind_offshore": true, "start": "2019-01-07", "zone_id": "SYN"},
///     "periods": {"validation_start": "...", "test_start": "...", "test_end": "..."},
///     "schedule": {"d_init": 365, "d_up": 28, "epochs_init": 60, "epochs_up": 10,
///                  "lr_init": 0.1, "lr_up": 0.01, "batch_size": 32},
///     "models": [{"name": "hybrid", "architecture": "MLPReducedLinear", "hidden_n": 16,
///                 "lambda1": 0, "lambda2": 0, "ols_share_alpha": 1, "tuned": false}],
///     "tuner": {"architectures": ["MLPReducedLinear"], "n_trials": 500, "batch": 8,
///               "gamma": 0.25, "startup": 10, "candidates": 24, "random_search": false,
///               "bounds": {"d_init": [56, 730]}},
///     "select": {"size": 10, "pool": 500}
///   }
///
/// Every field is optional; relative paths resolve against the config file.
struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::filesystem::path out = "epf-out";
    std::optional<ZoneConfig> zone;
    std::optional<std::filesystem::path> data;
    std::optional<SyntheticSpec> synthetic;
    std::size_t synthetic_days = 1830;
    Periods periods;
    OnlineSchedule schedule;
    std::vector<ModelEntry> models;
    TunerConfig tuner;
    SelectConfig select;

    static ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
    static ExperimentConfig load(const std::filesystem::path& path);
};

/// Runtime settings shared by every command.
struct RunContext {
    ExperimentConfig config;
    std::filesystem::path out;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    std::ostream* log = nullptr;
};

/// Seed of a named stream (model name, study class, ...).
std::uint64_t named_seed(std::uint64_t seed, const std::string& name);

/// Defaults: test_end = last day, test_start = test_end - 729 days,
/// validation_start = test_start - 730 days, clamped to the first day (the
/// test start to the second). Throws UsageError unless
/// validation_start < test_start <= test_end lie inside the series.
ResolvedPeriods resolve_periods(const Periods& periods, const MarketSeries& series);

/// Days up to and including `last`.
MarketSeries truncate_series(const MarketSeries& series, Date last);

/// Loads the cleaned dataset written by cmd_ingest.
MarketSeries load_cleaned(const std::filesystem::path& out);

/// Writes synthetic.csv and synthetic_truth.json.
void cmd_synth(const RunContext& ctx);
/// Writes cleaned.csv, cleaning_log.json, dataset.json and feature_map.txt.
void cmd_ingest(const RunContext& ctx);
/// Writes tune/<class>/study.csv, runtime.json and trials/trial_<id>.csv
/// (validation forecasts). Sees only data dated before the test period.
void cmd_tune(const RunContext& ctx);
/// Writes backtest/<name>/{forecasts.csv, summary.json, runtime.json, params.txt}.
void cmd_backtest(const RunContext& ctx);
/// Writes select/<ensemble>/{forecasts.csv, summary.json, weights.csv, runtime.json} for
/// each "<class> (BOA)" ensemble and for "BOA all".
void cmd_select(const RunContext& ctx);
/// Writes evaluate/{metrics.csv, hourly_rmse.csv, tracks.json}.
void cmd_evaluate(const RunContext& ctx);
/// Writes report/{metrics.csv, hourly_rmse.csv, dm_pvalues.csv, pareto.csv, summary.txt}.
void cmd_report(const RunContext& ctx);

/// Directory-safe form of an ensemble or model name.
std::string slug(const std::string& name);

/// Parses arguments, dispatches, and maps errors to exit codes
/// (0 success, 1 usage, 2 data or schema, 3 numerical).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace epf
