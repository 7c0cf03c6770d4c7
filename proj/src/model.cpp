#include "epf/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <istream>
#include <map>
#include <ostream>
#include <random>

namespace epf {

namespace {

const std::map<Architecture, std::string>& names() {
    static const std::map<Architecture, std::string> n{
        {Architecture::ReducedLinear, "ReducedLinear"},
        {Architecture::FullLinear, "FullLinear"},
        {Architecture::MLP, "MLP"},
        {Architecture::MLPReducedLinear, "MLPReducedLinear"},
        {Architecture::MLPFullLinear, "MLPFullLinear"},
        {Architecture::ReducedLinearOLS, "ReducedLinearOLS"},
        {Architecture::MLPReducedLinearOLS, "MLPReducedLinearOLS"}};
    return n;
}

void require_shape(const ParamSet& params, const Batch& batch) {
    const ParamShape& s = params.shape();
    if (s.hidden_n > 0 || s.skip == SkipKind::Full) {
        if (static_cast<std::size_t>(batch.full.cols()) != s.input_dim) {
            throw ShapeError("input width " + std::to_string(batch.full.cols()) + " does not match parameter input_dim " +
                             std::to_string(s.input_dim));
        }
    }
    if (s.skip == SkipKind::Reduced) {
        for (int h = 0; h < kHours; ++h) {
            if (static_cast<std::size_t>(batch.reduced[h].cols()) != s.skip_dims[h]) {
                throw ShapeError("reduced width mismatch at hour " + std::to_string(h));
            }
        }
    }
}

}  // namespace

std::string architecture_name(Architecture a) {
    return names().at(a);
}

Architecture architecture_from_name(const std::string& name) {
    for (const auto& [a, n] : names()) {
        if (n == name) return a;
    }
    throw UsageError("unknown architecture '" + name + "'");
}

SkipKind skip_kind(Architecture a) {
    switch (a) {
        case Architecture::ReducedLinear:
        case Architecture::MLPReducedLinear:
        case Architecture::ReducedLinearOLS:
        case Architecture::MLPReducedLinearOLS: return SkipKind::Reduced;
        case Architecture::FullLinear:
        case Architecture::MLPFullLinear: return SkipKind::Full;
        case Architecture::MLP: return SkipKind::None;
    }
    return SkipKind::None;
}

bool has_hidden_layer(Architecture a) {
    return a == Architecture::MLP || a == Architecture::MLPReducedLinear || a == Architecture::MLPFullLinear ||
           a == Architecture::MLPReducedLinearOLS;
}

bool is_ols_variant(Architecture a) {
    return a == Architecture::ReducedLinearOLS || a == Architecture::MLPReducedLinearOLS;
}

void ModelSpec::validate() const {
    const std::string name = architecture_name(architecture);
    if (has_hidden_layer(architecture) != (hidden_n > 0)) {
        throw UsageError(name + ": hidden_n must be positive iff the architecture has a hidden layer");
    }
    if (is_ols_variant(architecture) != ols_share_alpha.has_value()) {
        throw UsageError(name + ": ols_share_alpha must be set iff the architecture is an OLS variant");
    }
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw UsageError(name + ": penalty weights must be non-negative");
    if (!std::isfinite(leak_alpha)) throw UsageError(name + ": leak_alpha must be finite");
}

// --- ParamShape ---------------------------------------------------------------

ParamShape ParamShape::for_model(const ModelSpec& spec, const FeatureLayout& layout) {
    spec.validate();
    ParamShape s;
    s.skip = skip_kind(spec.architecture);
    for (int h = 0; h < kHours; ++h) {
        if (s.skip == SkipKind::Reduced) s.skip_dims[h] = layout.reduced_width(h);
        if (s.skip == SkipKind::Full) s.skip_dims[h] = layout.full_width();
    }
    s.input_dim = layout.full_width();
    s.hidden_n = spec.hidden_n;
    return s;
}

std::size_t ParamShape::skip_offset(int hour) const {
    std::size_t off = 0;
    for (int h = 0; h < hour; ++h) off += skip_dims[h];
    return off;
}

std::size_t ParamShape::skip_bias_offset() const {
    return skip_offset(kHours);
}

std::size_t ParamShape::w1_offset() const {
    return skip_bias_offset() + (has_skip() ? kHours : 0);
}

std::size_t ParamShape::b1_offset() const {
    return w1_offset() + hidden_n * input_dim;
}

std::size_t ParamShape::w2_offset() const {
    return b1_offset() + hidden_n;
}

std::size_t ParamShape::b2_offset() const {
    return w2_offset() + kHours * hidden_n;
}

std::size_t ParamShape::total() const {
    return b2_offset() + (hidden_n > 0 ? kHours : 0);
}

// --- ParamSet -----------------------------------------------------------------

Eigen::Map<Eigen::VectorXd> ParamSet::skip(int hour) {
    return {data_.data() + shape_.skip_offset(hour), static_cast<Eigen::Index>(shape_.skip_dims[hour])};
}
Eigen::Map<const Eigen::VectorXd> ParamSet::skip(int hour) const {
    return {data_.data() + shape_.skip_offset(hour), static_cast<Eigen::Index>(shape_.skip_dims[hour])};
}
Eigen::Map<Eigen::VectorXd> ParamSet::skip_bias() {
    return {data_.data() + shape_.skip_bias_offset(), shape_.has_skip() ? kHours : 0};
}
Eigen::Map<const Eigen::VectorXd> ParamSet::skip_bias() const {
    return {data_.data() + shape_.skip_bias_offset(), shape_.has_skip() ? kHours : 0};
}
Eigen::Map<const RowMatrix> ParamSet::skip_matrix() const {
    if (shape_.skip != SkipKind::Full) throw ShapeError("skip_matrix: architecture has no full skip path");
    return {data_.data(), kHours, static_cast<Eigen::Index>(shape_.input_dim)};
}
Eigen::Map<RowMatrix> ParamSet::w1() {
    return {data_.data() + shape_.w1_offset(), static_cast<Eigen::Index>(shape_.hidden_n),
            static_cast<Eigen::Index>(shape_.hidden_n > 0 ? shape_.input_dim : 0)};
}
Eigen::Map<const RowMatrix> ParamSet::w1() const {
    return {data_.data() + shape_.w1_offset(), static_cast<Eigen::Index>(shape_.hidden_n),
            static_cast<Eigen::Index>(shape_.hidden_n > 0 ? shape_.input_dim : 0)};
}
Eigen::Map<Eigen::VectorXd> ParamSet::b1() {
    return {data_.data() + shape_.b1_offset(), static_cast<Eigen::Index>(shape_.hidden_n)};
}
Eigen::Map<const Eigen::VectorXd> ParamSet::b1() const {
    return {data_.data() + shape_.b1_offset(), static_cast<Eigen::Index>(shape_.hidden_n)};
}
Eigen::Map<RowMatrix> ParamSet::w2() {
    return {data_.data() + shape_.w2_offset(), shape_.hidden_n > 0 ? kHours : 0,
            static_cast<Eigen::Index>(shape_.hidden_n)};
}
Eigen::Map<const RowMatrix> ParamSet::w2() const {
    return {data_.data() + shape_.w2_offset(), shape_.hidden_n > 0 ? kHours : 0,
            static_cast<Eigen::Index>(shape_.hidden_n)};
}
Eigen::Map<Eigen::VectorXd> ParamSet::b2() {
    return {data_.data() + shape_.b2_offset(), shape_.hidden_n > 0 ? kHours : 0};
}
Eigen::Map<const Eigen::VectorXd> ParamSet::b2() const {
    return {data_.data() + shape_.b2_offset(), shape_.hidden_n > 0 ? kHours : 0};
}

bool ParamSet::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

bool ParamSet::operator==(const ParamSet& other) const {
    if (!(shape_ == other.shape_) || data_.size() != other.data_.size()) return false;
    return std::equal(data_.begin(), data_.end(), other.data_.begin(),
                      [](double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; });
}

// --- batches ------------------------------------------------------------------

Batch make_batch(std::span<const DayDesign> designs) {
    Batch b;
    const auto n = static_cast<Eigen::Index>(designs.size());
    if (n == 0) throw DataError("make_batch: empty window");
    const auto width = static_cast<Eigen::Index>(designs.front().full_x.size());
    b.full.resize(n, width);
    b.targets.resize(n, kHours);
    for (int h = 0; h < kHours; ++h) {
        b.reduced[h].resize(n, static_cast<Eigen::Index>(designs.front().reduced_x[h].size()));
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const DayDesign& d = designs[static_cast<std::size_t>(i)];
        if (!d.valid) throw DataError("make_batch: design for " + format_date(d.date) + " is not valid");
        if (static_cast<Eigen::Index>(d.full_x.size()) != width) throw ShapeError("make_batch: ragged full vectors");
        b.full.row(i) = Eigen::Map<const Eigen::RowVectorXd>(d.full_x.data(), width);
        for (int h = 0; h < kHours; ++h) {
            const auto& x = d.reduced_x[h];
            if (static_cast<Eigen::Index>(x.size()) != b.reduced[h].cols()) {
                throw ShapeError("make_batch: ragged reduced vectors");
            }
            b.reduced[h].row(i) = Eigen::Map<const Eigen::RowVectorXd>(x.data(), b.reduced[h].cols());
            b.targets(i, h) = d.targets[h];
        }
    }
    return b;
}

Batch select_rows(const Batch& batch, std::span<const std::size_t> rows) {
    std::vector<Eigen::Index> idx(rows.begin(), rows.end());
    Batch out;
    out.full = batch.full(idx, Eigen::all);
    out.targets = batch.targets(idx, Eigen::all);
    for (int h = 0; h < kHours; ++h) out.reduced[h] = batch.reduced[h](idx, Eigen::all);
    return out;
}

// --- forward ------------------------------------------------------------------

double leaky_relu(double z, double alpha) {
    return z >= 0.0 ? z : alpha * z;
}

void forward_pass(const ModelSpec& spec, const ParamSet& params, const Batch& batch, ForwardCache& cache) {
    require_shape(params, batch);
    const ParamShape& s = params.shape();
    const Eigen::Index n = batch.rows();
    cache.output.setZero(n, kHours);
    switch (s.skip) {
        case SkipKind::Reduced:
            for (int h = 0; h < kHours; ++h) {
                cache.output.col(h).noalias() = batch.reduced[h] * params.skip(h);
            }
            cache.output.rowwise() += params.skip_bias().transpose();
            break;
        case SkipKind::Full:
            cache.output.noalias() = batch.full * params.skip_matrix().transpose();
            cache.output.rowwise() += params.skip_bias().transpose();
            break;
        case SkipKind::None: break;
    }
    if (s.hidden_n > 0) {
        const double alpha = spec.leak_alpha;
        cache.pre.noalias() = batch.full * params.w1().transpose();
        cache.pre.rowwise() += params.b1().transpose();
        cache.act = cache.pre.unaryExpr([alpha](double z) { return leaky_relu(z, alpha); });
        cache.output.noalias() += cache.act * params.w2().transpose();
        cache.output.rowwise() += params.b2().transpose();
    }
}

Eigen::MatrixXd predict(const ModelSpec& spec, const ParamSet& params, const Batch& batch) {
    ForwardCache cache;
    forward_pass(spec, params, batch, cache);
    return std::move(cache.output);
}

DayHours forward(const ModelSpec& spec, const ParamSet& params, const DayDesign& standardized) {
    const Eigen::MatrixXd out = predict(spec, params, make_batch(std::span(&standardized, 1)));
    DayHours result{};
    for (int h = 0; h < kHours; ++h) result[h] = out(0, h);
    return result;
}

// --- initialization -----------------------------------------------------------

ParamSet init_random(const ModelSpec& spec, const FeatureLayout& layout) {
    ParamSet p(ParamShape::for_model(spec, layout));
    const ParamShape& s = p.shape();
    std::mt19937_64 rng(spec.seed);
    auto fill = [&rng](std::span<double> block, std::size_t fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (double& v : block) v = u(rng);
    };
    auto values = p.values();
    for (int h = 0; h < kHours; ++h) {
        if (s.skip_dims[h] > 0) fill(values.subspan(s.skip_offset(h), s.skip_dims[h]), s.skip_dims[h]);
    }
    if (s.hidden_n > 0) {
        fill(values.subspan(s.w1_offset(), s.hidden_n * s.input_dim), s.input_dim);
        fill(values.subspan(s.w2_offset(), kHours * s.hidden_n), s.hidden_n);
    }
    return p;
}

OlsFit fit_ols(const Batch& batch) {
    OlsFit fit;
    const Eigen::Index n = batch.rows();
    for (int h = 0; h < kHours; ++h) {
        const Eigen::MatrixXd& x = batch.reduced[h];
        const Eigen::Index k = x.cols();
        if (n <= k + 1) {
            throw DataError("OLS needs more days (" + std::to_string(n) + ") than regressors (" + std::to_string(k + 1) +
                            ")");
        }
        Eigen::MatrixXd design(n, k + 1);
        design.col(0).setOnes();
        design.rightCols(k) = x;
        Eigen::MatrixXd gram = design.transpose() * design;
        const Eigen::VectorXd rhs = design.transpose() * batch.targets.col(h);
        Eigen::LLT<Eigen::MatrixXd> llt(gram);
        if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-14)) {
            gram.diagonal().array() += 1e-8;
            llt.compute(gram);
            fit.jittered = true;
            if (llt.info() != Eigen::Success) {
                throw NumericalError("OLS normal equations singular at hour " + std::to_string(h));
            }
        }
        const Eigen::VectorXd coef = llt.solve(rhs);
        if (!coef.allFinite()) throw NumericalError("OLS produced non-finite coefficients at hour " + std::to_string(h));
        fit.intercept[h] = coef(0);
        fit.beta[h] = coef.tail(k);
    }
    return fit;
}

ParamSet init_ols(const ModelSpec& spec, const Batch& standardized, const FeatureLayout& layout) {
    if (!is_ols_variant(spec.architecture)) {
        throw UsageError("init_ols: " + architecture_name(spec.architecture) + " is not an OLS variant");
    }
    ParamSet p = init_random(spec, layout);
    const OlsFit fit = fit_ols(standardized);
    const double share = *spec.ols_share_alpha;
    for (int h = 0; h < kHours; ++h) {
        if (fit.beta[h].size() != p.skip(h).size()) throw ShapeError("init_ols: reduced width mismatch");
        p.skip(h) = share * fit.beta[h];
        p.skip_bias()(h) = share * fit.intercept[h];
    }
    return p;
}

ParamSet init_ols(const ModelSpec& spec, std::span<const DayDesign> designs, const Scaler& scaler) {
    const auto standardized = transform_all(designs, scaler);
    return init_ols(spec, make_batch(standardized), scaler.layout);
}

// --- persistence --------------------------------------------------------------

void write_params(std::ostream& out, const ParamSet& params, Architecture architecture) {
    const ParamShape& s = params.shape();
    static const char* const skip_names[3] = {"none", "reduced", "full"};
    out << "epf-paramset 1\n";
    out << "architecture " << architecture_name(architecture) << '\n';
    out << "skip " << skip_names[static_cast<int>(s.skip)] << '\n';
    out << "skip_dims";
    for (std::size_t d : s.skip_dims) out << ' ' << d;
    out << "\ninput_dim " << s.input_dim << "\nhidden_n " << s.hidden_n << "\nvalues " << params.size() << '\n';
    char buf[40];
    for (double v : params.values()) {
        std::snprintf(buf, sizeof buf, "%.17g\n", v);
        out << buf;
    }
}

ParamSet read_params(std::istream& in, Architecture* architecture) {
    auto expect = [&in](const std::string& key) {
        std::string word;
        if (!(in >> word) || word != key) throw SchemaError("paramset: expected '" + key + "'");
    };
    expect("epf-paramset");
    int version = 0;
    if (!(in >> version) || version != 1) throw SchemaError("paramset: unsupported version");
    expect("architecture");
    std::string arch;
    in >> arch;
    const Architecture a = architecture_from_name(arch);
    if (architecture != nullptr) *architecture = a;
    expect("skip");
    std::string skip;
    in >> skip;
    ParamShape s;
    if (skip == "none") {
        s.skip = SkipKind::None;
    } else if (skip == "reduced") {
        s.skip = SkipKind::Reduced;
    } else if (skip == "full") {
        s.skip = SkipKind::Full;
    } else {
        throw SchemaError("paramset: unknown skip kind '" + skip + "'");
    }
    expect("skip_dims");
    for (auto& d : s.skip_dims) in >> d;
    expect("input_dim");
    in >> s.input_dim;
    expect("hidden_n");
    in >> s.hidden_n;
    expect("values");
    std::size_t count = 0;
    in >> count;
    if (!in || count != s.total()) throw SchemaError("paramset: value count does not match layout header");
    ParamSet p(s);
    for (double& v : p.values()) {
        if (!(in >> v)) throw SchemaError("paramset: truncated value list");
    }
    return p;
}

}  // namespace epf
