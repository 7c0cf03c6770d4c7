#include "epf/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <random>

namespace epf {

namespace {

double sign0(double x) {
    return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
}

// Sum of |w| over the weights that carry the L1 penalty: W2 and the skip weights.
double output_l1(const ParamSet& p) {
    const ParamShape& s = p.shape();
    const auto values = p.values();
    double total = 0.0;
    for (std::size_t i = 0; i < s.skip_bias_offset(); ++i) total += std::abs(values[i]);
    for (std::size_t i = s.w2_offset(); i < s.b2_offset(); ++i) total += std::abs(values[i]);
    return total;
}

double sum_squares(const ParamSet& p) {
    const auto values = p.values();
    return std::inner_product(values.begin(), values.end(), values.begin(), 0.0);
}

}  // namespace

void TrainConfig::validate() const {
    if (epochs < 1) throw UsageError("train: epochs must be at least 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw UsageError("train: learning rate must be > 0");
}

AdamState AdamState::fresh(const ParamSet& params) {
    return AdamState{std::vector<double>(params.size(), 0.0), std::vector<double>(params.size(), 0.0), 0};
}

double loss(const ModelSpec& spec, const ParamSet& params, const Batch& batch, LossKind kind) {
    if (batch.rows() == 0) throw DataError("loss: empty window");
    const Eigen::MatrixXd residual = predict(spec, params, batch) - batch.targets;
    const double cells = static_cast<double>(residual.size());
    const double data =
        kind == LossKind::L1 ? residual.cwiseAbs().sum() / cells : residual.squaredNorm() / cells;
    double total = data;
    if (spec.lambda1 > 0.0) total += spec.lambda1 * sum_squares(params);
    if (spec.lambda2 > 0.0) total += spec.lambda2 * output_l1(params);
    return total;
}

ParamSet gradient(const ModelSpec& spec, const ParamSet& params, const Batch& batch, LossKind kind) {
    if (batch.rows() == 0) throw DataError("gradient: empty window");
    ForwardCache cache;
    forward_pass(spec, params, batch, cache);
    const double cells = static_cast<double>(batch.rows() * kHours);
    Eigen::MatrixXd g = cache.output - batch.targets;
    if (kind == LossKind::L1) {
        g = g.unaryExpr([cells](double r) { return sign0(r) / cells; });
    } else {
        g *= 2.0 / cells;
    }

    ParamSet grad(params.shape());
    const ParamShape& s = params.shape();
    switch (s.skip) {
        case SkipKind::Reduced:
            for (int h = 0; h < kHours; ++h) grad.skip(h).noalias() = batch.reduced[h].transpose() * g.col(h);
            grad.skip_bias() = g.colwise().sum().transpose();
            break;
        case SkipKind::Full: {
            Eigen::Map<RowMatrix> gb(grad.values().data(), kHours, static_cast<Eigen::Index>(s.input_dim));
            gb.noalias() = g.transpose() * batch.full;
            grad.skip_bias() = g.colwise().sum().transpose();
            break;
        }
        case SkipKind::None: break;
    }
    if (s.hidden_n > 0) {
        const double alpha = spec.leak_alpha;
        grad.w2().noalias() = g.transpose() * cache.act;
        grad.b2() = g.colwise().sum().transpose();
        Eigen::MatrixXd dz = g * params.w2();
        dz.array() *= cache.pre.unaryExpr([alpha](double z) { return z >= 0.0 ? 1.0 : alpha; }).array();
        grad.w1().noalias() = dz.transpose() * batch.full;
        grad.b1() = dz.colwise().sum().transpose();
    }

    auto gv = grad.values();
    const auto pv = params.values();
    if (spec.lambda1 > 0.0) {
        for (std::size_t i = 0; i < gv.size(); ++i) gv[i] += 2.0 * spec.lambda1 * pv[i];
    }
    if (spec.lambda2 > 0.0) {
        for (std::size_t i = 0; i < s.skip_bias_offset(); ++i) gv[i] += spec.lambda2 * sign0(pv[i]);
        for (std::size_t i = s.w2_offset(); i < s.b2_offset(); ++i) gv[i] += spec.lambda2 * sign0(pv[i]);
    }
    return grad;
}

void adam_step(ParamSet& params, const ParamSet& grads, AdamState& state, double lr, const AdamHyper& hyper) {
    if (!(grads.shape() == params.shape()) || state.m.size() != params.size() || state.v.size() != params.size()) {
        throw ShapeError("adam_step: parameter, gradient and state shapes differ");
    }
    if (!grads.all_finite()) throw NumericalError("adam_step: non-finite gradient");
    state.t += 1;
    const double t = static_cast<double>(state.t);
    const double c1 = 1.0 - std::pow(hyper.beta1, t);
    const double c2 = 1.0 - std::pow(hyper.beta2, t);
    auto p = params.values();
    const auto g = grads.values();
    for (std::size_t i = 0; i < p.size(); ++i) {
        state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * g[i];
        state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * g[i] * g[i];
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        p[i] -= lr * m_hat / (std::sqrt(v_hat) + hyper.epsilon);
    }
}

TrainResult train_window(const ModelSpec& spec, ParamSet params, AdamState state, const Batch& batch,
                         const TrainConfig& config) {
    config.validate();
    const auto n = static_cast<std::size_t>(batch.rows());
    if (n == 0) throw DataError("train_window: empty window");
    if (state.m.size() != params.size()) state = AdamState::fresh(params);

    TrainResult result;
    const bool full_batch = config.batch_size == 0 || config.batch_size >= n;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(config.seed);

    auto check = [](double value, int epoch) {
        if (!std::isfinite(value)) {
            throw NumericalError("training diverged: non-finite loss at epoch " + std::to_string(epoch));
        }
        return value;
    };

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        if (full_batch) {
            adam_step(params, gradient(spec, params, batch, config.loss_kind), state, config.learning_rate,
                      config.adam);
        } else {
            if (config.shuffle) std::shuffle(order.begin(), order.end(), rng);
            for (std::size_t start = 0; start < n; start += config.batch_size) {
                const std::size_t stop = std::min(n, start + config.batch_size);
                const Batch mini = select_rows(batch, std::span(order).subspan(start, stop - start));
                adam_step(params, gradient(spec, params, mini, config.loss_kind), state, config.learning_rate,
                          config.adam);
            }
        }
        if (config.record_trace) {
            result.loss_trace.push_back(check(loss(spec, params, batch, config.loss_kind), epoch));
        }
    }
    result.final_loss = config.record_trace ? result.loss_trace.back()
                                            : check(loss(spec, params, batch, config.loss_kind), config.epochs);
    result.params = std::move(params);
    result.state = std::move(state);
    return result;
}

void write_loss_trace(std::ostream& out, std::span<const double> trace) {
    out << "epoch,loss\n";
    char buf[48];
    for (std::size_t i = 0; i < trace.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i + 1, trace[i]);
        out << buf;
    }
}

}  // namespace epf
