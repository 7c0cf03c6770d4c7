#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "epf/model.hpp"

namespace epf {

/// L1 is the production loss. Squared exists for closed-form oracle checks.
enum class LossKind { L1, Squared };

struct AdamHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct TrainConfig {
    int epochs = 60;
    double learning_rate = 1e-3;
    AdamHyper adam{};
    /// Rows per Adam step; 0 means the whole window in one step.
    std::size_t batch_size = 0;
    bool shuffle = false;
    std::uint64_t seed = 0;
    LossKind loss_kind = LossKind::L1;
    /// Evaluate the window loss after every epoch.
    bool record_trace = true;

    void validate() const;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t t = 0;

    static AdamState fresh(const ParamSet& params);
};

/// Mean loss over all (day, hour) cells plus
///   lambda1 * sum of squares of every parameter
///   + lambda2 * L1 norm of the output weights W2 and the skip weights.
double loss(const ModelSpec& spec, const ParamSet& params, const Batch& batch, LossKind kind = LossKind::L1);

/// Exact (sub)gradient of `loss`; |.| has subgradient 0 at 0.
ParamSet gradient(const ModelSpec& spec, const ParamSet& params, const Batch& batch, LossKind kind = LossKind::L1);

/// Bias-corrected Adam update in place. Throws NumericalError on a
/// non-finite gradient, leaving params and state untouched.
void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state, double lr, const AdamHyper& hyper = {});

struct TrainResult {
    ParamSet params;
    AdamState state;
    std::vector<double> loss_trace;
    double final_loss = 0.0;
};

TrainResult train_window(const ModelSpec& spec, ParamSet params, AdamState state, const Batch& batch,
                         const TrainConfig& config);

/// CSV with header "epoch,loss", epochs numbered from 1.
void write_loss_trace(std::ostream& out, std::span<const double> trace);

}  // namespace epf
