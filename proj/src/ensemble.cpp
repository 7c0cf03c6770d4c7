#include "epf/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>

namespace epf {

HourWeights equal_weights(std::size_t n_experts) {
    if (n_experts == 0) throw ShapeError("equal_weights: empty pool");
    HourWeights w;
    for (auto& hour : w) hour.assign(n_experts, 1.0 / static_cast<double>(n_experts));
    return w;
}

DayHours ensemble_predict(const HourWeights& weights, std::span<const DayHours> experts) {
    DayHours out{};
    for (int h = 0; h < kHours; ++h) {
        if (weights[h].size() != experts.size()) throw ShapeError("ensemble_predict: expert count mismatch");
        double acc = 0.0;
        for (std::size_t k = 0; k < experts.size(); ++k) acc += weights[h][k] * experts[k][h];
        out[h] = acc;
    }
    return out;
}

BoaState::BoaState(std::size_t n_experts) : n_experts_(n_experts) {
    if (n_experts == 0) throw ShapeError("BoaState: empty pool");
    weights_ = equal_weights(n_experts);
    for (int h = 0; h < kHours; ++h) {
        regret_[h].assign(n_experts, 0.0);
        eta_[h].assign(n_experts, 1.0);
        v_[h].assign(n_experts, 0.0);
        e_[h].assign(n_experts, 0.0);
    }
}

void BoaState::update(std::span<const DayHours> experts, const DayHours& realized) {
    if (experts.size() != n_experts_) throw ShapeError("boa_update: expert count mismatch");
    for (int h = 0; h < kHours; ++h) {
        if (!std::isfinite(realized[h])) throw DataError("boa_update: non-finite realized price");
        for (const DayHours& x : experts) {
            if (!std::isfinite(x[h])) throw DataError("boa_update: non-finite expert forecast");
        }
    }
    if (n_experts_ == 1) return;

    const double log_k = std::log(static_cast<double>(n_experts_));
    std::vector<double> logw(n_experts_);
    for (int h = 0; h < kHours; ++h) {
        auto& w = weights_[h];
        double combined = 0.0;
        for (std::size_t k = 0; k < n_experts_; ++k) combined += w[k] * experts[k][h];
        const double ens_loss = std::abs(combined - realized[h]);
        for (std::size_t k = 0; k < n_experts_; ++k) {
            const double r = std::abs(experts[k][h] - realized[h]) - ens_loss;
            e_[h][k] = std::max(e_[h][k], std::abs(r));
            v_[h][k] += r * r;
            if (v_[h][k] > 0.0) eta_[h][k] = std::min(1.0 / (2.0 * e_[h][k]), std::sqrt(log_k / v_[h][k]));
            regret_[h][k] += r + eta_[h][k] * r * r;
            logw[k] = std::log(eta_[h][k]) - eta_[h][k] * regret_[h][k];
        }
        const double top = *std::max_element(logw.begin(), logw.end());
        double total = 0.0;
        for (std::size_t k = 0; k < n_experts_; ++k) {
            w[k] = std::exp(logw[k] - top);
            total += w[k];
        }
        for (double& wk : w) wk /= total;
    }
}

BoaRun run_boa(std::span<const HourlyGrid> experts, const HourlyGrid& realized, bool keep_trajectory) {
    if (experts.empty()) throw ShapeError("run_boa: empty pool");
    for (const auto& track : experts) {
        if (track.size() != realized.size()) throw ShapeError("run_boa: expert tracks not aligned with realized prices");
    }
    BoaState state(experts.size());
    BoaRun run;
    run.combined.reserve(realized.size());
    std::vector<DayHours> today(experts.size());
    for (std::size_t d = 0; d < realized.size(); ++d) {
        for (std::size_t k = 0; k < experts.size(); ++k) today[k] = experts[k][d];
        if (keep_trajectory) run.trajectory.push_back(state.weights());
        run.combined.push_back(ensemble_predict(state.weights(), today));
        state.update(today, realized[d]);
    }
    return run;
}

HourlyGrid run_equal_weights(std::span<const HourlyGrid> experts) {
    if (experts.empty()) throw ShapeError("run_equal_weights: empty pool");
    const HourWeights w = equal_weights(experts.size());
    HourlyGrid out;
    std::vector<DayHours> today(experts.size());
    for (std::size_t d = 0; d < experts.front().size(); ++d) {
        for (std::size_t k = 0; k < experts.size(); ++k) today[k] = experts[k].at(d);
        out.push_back(ensemble_predict(w, today));
    }
    return out;
}

double mean_absolute_error(const HourlyGrid& forecasts, const HourlyGrid& realized) {
    if (forecasts.size() != realized.size() || forecasts.empty()) throw ShapeError("mean_absolute_error: misaligned");
    double total = 0.0;
    for (std::size_t d = 0; d < forecasts.size(); ++d) {
        for (int h = 0; h < kHours; ++h) total += std::abs(forecasts[d][h] - realized[d][h]);
    }
    return total / static_cast<double>(forecasts.size() * kHours);
}

Selection forward_select(std::span<const HourlyGrid> candidates, const HourlyGrid& realized, std::size_t size) {
    if (candidates.empty()) throw ShapeError("forward_select: empty pool");
    Selection sel;
    if (candidates.size() <= size) {
        sel.pool_too_small = true;
        std::cerr << "warning: forward_select: pool of " << candidates.size() << " does not exceed the ensemble size "
                  << size << ", selecting all\n";
        size = candidates.size();
    }
    std::vector<bool> taken(candidates.size(), false);
    std::vector<HourlyGrid> members;
    while (sel.members.size() < size) {
        std::size_t best = candidates.size();
        double best_mae = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < candidates.size(); ++c) {
            if (taken[c]) continue;
            double mae = 0.0;
            if (members.empty()) {
                mae = mean_absolute_error(candidates[c], realized);
            } else {
                members.push_back(candidates[c]);
                mae = mean_absolute_error(run_boa(members, realized).combined, realized);
                members.pop_back();
            }
            if (mae < best_mae || best == candidates.size()) {
                best = c;
                best_mae = mae;
            }
        }
        taken[best] = true;
        members.push_back(candidates[best]);
        sel.members.push_back(best);
        sel.mae.push_back(best_mae);
    }
    return sel;
}

void write_weight_trajectory(std::ostream& out, std::span<const Date> days, const std::vector<HourWeights>& trajectory,
                             std::span<const std::string> expert_names) {
    if (days.size() != trajectory.size()) throw ShapeError("write_weight_trajectory: days/trajectory mismatch");
    out << "date,hour,expert,weight\n";
    char buf[40];
    for (std::size_t d = 0; d < days.size(); ++d) {
        const std::string date = format_date(days[d]);
        for (int h = 0; h < kHours; ++h) {
            for (std::size_t k = 0; k < trajectory[d][h].size(); ++k) {
                std::snprintf(buf, sizeof buf, "%.17g", trajectory[d][h][k]);
                out << date << ',' << h << ',' << (k < expert_names.size() ? expert_names[k] : std::to_string(k)) << ','
                    << buf << '\n';
            }
        }
    }
}

}  // namespace epf
