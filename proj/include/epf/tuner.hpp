#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "epf/features.hpp"
#include "epf/model.hpp"
#include "epf/online.hpp"

namespace epf {

enum class ParamKind { Integer, IntegerLog, Continuous, LogContinuous };

struct Dimension {
    std::string name;
    ParamKind kind = ParamKind::Continuous;
    double low = 0.0;
    double high = 1.0;
};

struct SearchSpace {
    std::vector<Dimension> dims;

    /// Throws UsageError on non-finite or empty bounds, or log bounds <= 0.
    void validate() const;
    const Dimension& at(const std::string& name) const;
    bool contains(const std::string& name) const;
    void set_bounds(const std::string& name, double low, double high);

    /// d_init [56, 1092], d_up [1, 56], hidden_n [8, 256] (log, MLP-bearing only),
    /// lr_init/lr_up [1e-4, 1e-1] (log), lambda1/lambda2 [1e-6, 10] (log),
    /// ols_share_alpha [0, 2] (OLS variants only).
    static SearchSpace defaults(Architecture architecture);
};

using Assignment = std::map<std::string, double>;

struct TrialRecord {
    std::size_t id = 0;
    Assignment params;
    double mae = 0.0;
    bool failed = false;
    std::string error;
    std::vector<Date> days;
    HourlyGrid forecasts;
    double runtime = 0.0;
};

struct TpeSettings {
    double gamma = 0.25;
    std::size_t startup = 10;
    std::size_t n_candidates = 24;
};

/// Number of trials in the "good" set: max(1, ceil(gamma * n)).
std::size_t good_count(std::size_t n_trials, double gamma);

/// Uniform draw (log-uniform for log dimensions), integers rounded.
Assignment random_suggest(const SearchSpace& space, std::uint64_t seed);

/// Tree-structured Parzen Estimator suggestion.
///
/// Below `startup` completed trials this is random_suggest. Otherwise trials
/// are ranked by MAE (failed trials last), the best good_count() form the good
/// set and the rest the bad set. Each dimension gets two truncated Gaussian
/// mixtures, l (good) and g (bad), in its internal space (log for log
/// dimensions): one component per observation plus a prior component centred
/// on the range with sigma = range, all equally weighted. A component's
/// bandwidth is the larger distance to its sorted neighbours (range ends for
/// the extremes), clipped to [range / min(100, n + 1), range].
/// n_candidates points are drawn from l; the one maximizing
/// sum_d log l(x_d) - log g(x_d) is returned.
Assignment tpe_suggest(std::span<const TrialRecord> history, const SearchSpace& space, const TpeSettings& settings,
                       std::uint64_t seed);

struct TrialOutcome {
    double mae = 0.0;
    std::vector<Date> days;
    HourlyGrid forecasts;
};

using Objective = std::function<TrialOutcome(const Assignment& params, std::uint64_t trial_seed)>;

struct StudySettings {
    std::size_t n_trials = 500;
    TpeSettings tpe{};
    /// Trials suggested from the same history snapshot; results do not depend on `jobs`.
    std::size_t batch = 1;
    std::size_t jobs = 1;
    bool random_search = false;
    bool keep_forecasts = true;
};

/// Runs the trials and returns them ranked by MAE (ties by trial id). A trial
/// whose objective throws NumericalError or DataError is recorded as failed
/// with infinite MAE. Seeds: suggestion i uses derive_seed(seed, 2i), its
/// objective derive_seed(seed, 2i + 1).
std::vector<TrialRecord> run_study(const Objective& objective, const SearchSpace& space, const StudySettings& settings,
                                   std::uint64_t seed);

ModelSpec spec_from_assignment(Architecture architecture, const Assignment& params, std::uint64_t seed);
/// Epochs and batch size come from `base`; d_up is clipped to d_init.
OnlineSchedule schedule_from_assignment(const OnlineSchedule& base, const Assignment& params);

/// Objective running a partial online backtest over the validation range.
Objective make_backtest_objective(Architecture architecture, const OnlineSchedule& base,
                                  std::span<const DayDesign> designs, Date validation_start, Date validation_end);

/// CSV "trial,<dimension names...>,mae,failed,runtime" in ranked order.
void write_study_csv(std::ostream& out, std::span<const TrialRecord> records, const SearchSpace& space);
std::vector<TrialRecord> read_study_csv(std::istream& in);

/// Stable identifier of a trial's hyperparameters (FNV-1a of the canonical text).
std::string assignment_key(Architecture architecture, const Assignment& params);

}  // namespace epf
