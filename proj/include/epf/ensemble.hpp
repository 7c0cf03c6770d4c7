#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "epf/common.hpp"

namespace epf {

/// Per-hour expert weights, weights[h][k].
using HourWeights = std::array<std::vector<double>, kHours>;

HourWeights equal_weights(std::size_t n_experts);

/// Per-hour convex combination of the expert forecasts of one day.
DayHours ensemble_predict(const HourWeights& weights, std::span<const DayHours> experts);

/// Fully adaptive Bernstein Online Aggregation, one independent track per hour.
///
/// With absolute loss l, ensemble forecast f and expert forecasts x_k, each
/// observed day updates, per hour and expert:
///   r_k  = l(x_k) - l(f)                       (positive when k did worse)
///   E_k  = max(E_k, |r_k|),  V_k += r_k^2
///   eta_k = min(1 / (2 E_k), sqrt(ln K / V_k))
///   R_k += r_k + eta_k r_k^2
///   w_k  ∝ eta_k exp(-eta_k R_k)
/// eta_k starts at 1 and keeps that value until expert k first shows a
/// nonzero regret.
class BoaState {
  public:
    explicit BoaState(std::size_t n_experts);

    std::size_t n_experts() const { return n_experts_; }
    const HourWeights& weights() const { return weights_; }
    const HourWeights& regret() const { return regret_; }
    const HourWeights& learning_rate() const { return eta_; }
    const HourWeights& squared_regret() const { return v_; }
    const HourWeights& loss_range() const { return e_; }

    /// Throws DataError on non-finite input and ShapeError on an expert-count mismatch.
    void update(std::span<const DayHours> experts, const DayHours& realized);

  private:
    std::size_t n_experts_;
    HourWeights weights_;
    HourWeights regret_;
    HourWeights eta_;
    HourWeights v_;
    HourWeights e_;
};

inline void boa_update(BoaState& state, std::span<const DayHours> experts, const DayHours& realized) {
    state.update(experts, realized);
}

struct BoaRun {
    HourlyGrid combined;
    /// trajectory[d] holds the weights used to forecast day d.
    std::vector<HourWeights> trajectory;
};

/// Sequential BOA over aligned expert tracks: day d is forecast with the
/// weights learned from days < d, then the realized prices update the state.
BoaRun run_boa(std::span<const HourlyGrid> experts, const HourlyGrid& realized, bool keep_trajectory = false);

/// Equal-weight (1/K) combination over aligned tracks.
HourlyGrid run_equal_weights(std::span<const HourlyGrid> experts);

double mean_absolute_error(const HourlyGrid& forecasts, const HourlyGrid& realized);

struct Selection {
    std::vector<std::size_t> members;  // candidate indices in selection order
    std::vector<double> mae;           // validation MAE after each addition
    bool pool_too_small = false;  // pool did not exceed the requested size
};

/// Greedy forward selection: start from the single candidate with lowest MAE,
/// then repeatedly add the candidate whose BOA ensemble with the current
/// members has the lowest MAE. Ties go to the lower candidate index. A pool
/// no larger than `size` is taken whole, with a warning on stderr.
Selection forward_select(std::span<const HourlyGrid> candidates, const HourlyGrid& realized, std::size_t size = 10);

/// CSV "date,hour,expert,weight".
void write_weight_trajectory(std::ostream& out, std::span<const Date> days, const std::vector<HourWeights>& trajectory,
                             std::span<const std::string> expert_names);

}  // namespace epf
