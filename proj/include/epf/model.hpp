#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "epf/common.hpp"
#include "epf/features.hpp"

namespace epf {

enum class Architecture {
    ReducedLinear,
    FullLinear,
    MLP,
    MLPReducedLinear,
    MLPFullLinear,
    ReducedLinearOLS,
    MLPReducedLinearOLS,
};

inline constexpr std::array<Architecture, 7> kArchitectures{
    Architecture::ReducedLinear,    Architecture::FullLinear,       Architecture::MLP,
    Architecture::MLPReducedLinear, Architecture::MLPFullLinear,    Architecture::ReducedLinearOLS,
    Architecture::MLPReducedLinearOLS};

std::string architecture_name(Architecture a);
Architecture architecture_from_name(const std::string& name);

/// Which input feeds the direct input-to-output (skip) path.
enum class SkipKind { None, Reduced, Full };

SkipKind skip_kind(Architecture a);
bool has_hidden_layer(Architecture a);
bool is_ols_variant(Architecture a);

struct ModelSpec {
    Architecture architecture = Architecture::ReducedLinear;
    std::size_t hidden_n = 0;
    double leak_alpha = 0.01;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    std::optional<double> ols_share_alpha;
    std::uint64_t seed = 0;

    /// Throws UsageError on an inconsistent combination.
    void validate() const;
};

/// Sizes and flat offsets of every parameter block. The flat order is
///   skip weights (hour 0..23, concatenated), skip biases (24),
///   W1 (hidden_n x input_dim, row-major), b1 (hidden_n),
///   W2 (24 x hidden_n, row-major), b2 (24)
/// with absent blocks taking zero length.
struct ParamShape {
    SkipKind skip = SkipKind::None;
    std::array<std::size_t, kHours> skip_dims{};
    std::size_t input_dim = 0;
    std::size_t hidden_n = 0;

    static ParamShape for_model(const ModelSpec& spec, const FeatureLayout& layout);

    std::size_t skip_offset(int hour) const;
    std::size_t skip_bias_offset() const;
    std::size_t w1_offset() const;
    std::size_t b1_offset() const;
    std::size_t w2_offset() const;
    std::size_t b2_offset() const;
    std::size_t total() const;
    bool has_skip() const { return skip != SkipKind::None; }

    bool operator==(const ParamShape&) const = default;
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// All trainable weights of one network, stored in a single flat buffer.
/// Gradients share the type.
class ParamSet {
  public:
    ParamSet() = default;
    explicit ParamSet(ParamShape shape) : shape_(shape), data_(shape_.total(), 0.0) {}

    const ParamShape& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    Eigen::Map<Eigen::VectorXd> skip(int hour);
    Eigen::Map<const Eigen::VectorXd> skip(int hour) const;
    Eigen::Map<Eigen::VectorXd> skip_bias();
    Eigen::Map<const Eigen::VectorXd> skip_bias() const;
    /// Full-input skip weights viewed as a 24 x input_dim matrix.
    Eigen::Map<const RowMatrix> skip_matrix() const;
    Eigen::Map<RowMatrix> w1();
    Eigen::Map<const RowMatrix> w1() const;
    Eigen::Map<Eigen::VectorXd> b1();
    Eigen::Map<const Eigen::VectorXd> b1() const;
    Eigen::Map<RowMatrix> w2();
    Eigen::Map<const RowMatrix> w2() const;
    Eigen::Map<Eigen::VectorXd> b2();
    Eigen::Map<const Eigen::VectorXd> b2() const;

    bool all_finite() const;
    /// Bitwise equality of shape and every value.
    bool operator==(const ParamSet& other) const;

  private:
    ParamShape shape_;
    std::vector<double> data_;
};

/// Standardized window in matrix form: one row per day.
struct Batch {
    Eigen::MatrixXd full;
    std::array<Eigen::MatrixXd, kHours> reduced;
    Eigen::MatrixXd targets;

    Eigen::Index rows() const { return targets.rows(); }
};

Batch make_batch(std::span<const DayDesign> standardized);
Batch select_rows(const Batch& batch, std::span<const std::size_t> rows);

double leaky_relu(double z, double alpha);

/// Intermediate activations kept for backpropagation.
struct ForwardCache {
    Eigen::MatrixXd pre;     // N x hidden_n, W1 x + b1
    Eigen::MatrixXd act;     // N x hidden_n, leaky_relu(pre)
    Eigen::MatrixXd output;  // N x 24
};

void forward_pass(const ModelSpec& spec, const ParamSet& params, const Batch& batch, ForwardCache& cache);
Eigen::MatrixXd predict(const ModelSpec& spec, const ParamSet& params, const Batch& batch);
DayHours forward(const ModelSpec& spec, const ParamSet& params, const DayDesign& standardized);

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, seeded by spec.seed.
ParamSet init_random(const ModelSpec& spec, const FeatureLayout& layout);

struct OlsFit {
    DayHours intercept{};
    std::array<Eigen::VectorXd, kHours> beta;
    bool jittered = false;
};

/// Per-hour least squares of price on the standardized reduced regressors.
/// Adds 1e-8 to the normal-equation diagonal when the system is singular.
OlsFit fit_ols(const Batch& standardized);

/// Random initialization with the skip path replaced by ols_share_alpha * OLS
/// (intercepts included).
ParamSet init_ols(const ModelSpec& spec, const Batch& standardized, const FeatureLayout& layout);
ParamSet init_ols(const ModelSpec& spec, std::span<const DayDesign> designs, const Scaler& scaler);

/// Text format:
///   epf-paramset 1
///   architecture <name>
///   skip none|reduced|full
///   skip_dims <24 integers>
///   input_dim <n>
///   hidden_n <n>
///   values <count>
///   <one %.17g value per line, flat order of ParamShape>
void write_params(std::ostream& out, const ParamSet& params, Architecture architecture);
ParamSet read_params(std::istream& in, Architecture* architecture = nullptr);

}  // namespace epf
