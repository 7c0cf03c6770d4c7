#include "epf/tuner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <istream>
#include <limits>
#include <mutex>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "epf/evaluation.hpp"

namespace epf {

namespace {

bool is_log(ParamKind k) {
    return k == ParamKind::IntegerLog || k == ParamKind::LogContinuous;
}

bool is_integer(ParamKind k) {
    return k == ParamKind::Integer || k == ParamKind::IntegerLog;
}

double to_internal(const Dimension& d, double x) {
    return is_log(d.kind) ? std::log(x) : x;
}

double from_internal(const Dimension& d, double u) {
    double x = is_log(d.kind) ? std::exp(u) : u;
    if (is_integer(d.kind)) x = std::round(x);
    return std::clamp(x, d.low, d.high);
}

// Truncated Gaussian mixture over [lo, hi] with equally weighted components.
class Parzen {
  public:
    Parzen(std::vector<double> observations, double lo, double hi) : lo_(lo), hi_(hi) {
        const double range = hi - lo;
        std::sort(observations.begin(), observations.end());
        const std::size_t n = observations.size();
        const double min_sigma = range / static_cast<double>(std::min<std::size_t>(100, n + 1));
        for (std::size_t i = 0; i < n; ++i) {
            const double left = observations[i] - (i == 0 ? lo : observations[i - 1]);
            const double right = (i + 1 == n ? hi : observations[i + 1]) - observations[i];
            mu_.push_back(observations[i]);
            sigma_.push_back(std::clamp(std::max(left, right), min_sigma, range));
        }
        mu_.push_back(0.5 * (lo + hi));
        sigma_.push_back(range);
        for (std::size_t i = 0; i < mu_.size(); ++i) {
            const double mass = normal_cdf((hi_ - mu_[i]) / sigma_[i]) - normal_cdf((lo_ - mu_[i]) / sigma_[i]);
            log_norm_.push_back(std::log(std::max(mass, 1e-300)) + std::log(sigma_[i]));
        }
    }

    double log_pdf(double x) const {
        double top = -std::numeric_limits<double>::infinity();
        std::vector<double> terms(mu_.size());
        for (std::size_t i = 0; i < mu_.size(); ++i) {
            const double z = (x - mu_[i]) / sigma_[i];
            terms[i] = -0.5 * z * z - log_norm_[i];
            top = std::max(top, terms[i]);
        }
        double acc = 0.0;
        for (double t : terms) acc += std::exp(t - top);
        return top + std::log(acc) - std::log(static_cast<double>(mu_.size())) - 0.5 * std::log(2.0 * M_PI);
    }

    double sample(std::mt19937_64& rng) const {
        std::uniform_int_distribution<std::size_t> pick(0, mu_.size() - 1);
        const std::size_t c = pick(rng);
        std::normal_distribution<double> gauss(mu_[c], sigma_[c]);
        for (int attempt = 0; attempt < 100; ++attempt) {
            const double x = gauss(rng);
            if (x >= lo_ && x <= hi_) return x;
        }
        return std::clamp(mu_[c], lo_, hi_);
    }

  private:
    double lo_, hi_;
    std::vector<double> mu_, sigma_, log_norm_;
};

bool ranks_before(const TrialRecord& a, const TrialRecord& b) {
    const double ma = a.failed ? std::numeric_limits<double>::infinity() : a.mae;
    const double mb = b.failed ? std::numeric_limits<double>::infinity() : b.mae;
    if (ma != mb) return ma < mb;
    return a.id < b.id;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

// --- search space -------------------------------------------------------------

void SearchSpace::validate() const {
    if (dims.empty()) throw UsageError("search space is empty");
    for (const Dimension& d : dims) {
        if (!std::isfinite(d.low) || !std::isfinite(d.high) || !(d.low < d.high)) {
            throw UsageError("search space: bad bounds for '" + d.name + "'");
        }
        if (is_log(d.kind) && d.low <= 0.0) throw UsageError("search space: log bounds must be positive for '" + d.name + "'");
    }
}

const Dimension& SearchSpace::at(const std::string& name) const {
    for (const Dimension& d : dims) {
        if (d.name == name) return d;
    }
    throw UsageError("search space has no dimension '" + name + "'");
}

bool SearchSpace::contains(const std::string& name) const {
    return std::any_of(dims.begin(), dims.end(), [&](const Dimension& d) { return d.name == name; });
}

void SearchSpace::set_bounds(const std::string& name, double low, double high) {
    for (Dimension& d : dims) {
        if (d.name == name) {
            d.low = low;
            d.high = high;
            return;
        }
    }
    throw UsageError("search space has no dimension '" + name + "'");
}

SearchSpace SearchSpace::defaults(Architecture a) {
    SearchSpace s;
    s.dims = {{"d_init", ParamKind::Integer, 56, 1092},
              {"d_up", ParamKind::Integer, 1, 56},
              {"lr_init", ParamKind::LogContinuous, 1e-4, 1e-1},
              {"lr_up", ParamKind::LogContinuous, 1e-4, 1e-1},
              {"lambda1", ParamKind::LogContinuous, 1e-6, 1e1},
              {"lambda2", ParamKind::LogContinuous, 1e-6, 1e1}};
    if (has_hidden_layer(a)) s.dims.push_back({"hidden_n", ParamKind::IntegerLog, 8, 256});
    if (is_ols_variant(a)) s.dims.push_back({"ols_share_alpha", ParamKind::Continuous, 0, 2});
    return s;
}

// --- suggestion ---------------------------------------------------------------

std::size_t good_count(std::size_t n_trials, double gamma) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(gamma * static_cast<double>(n_trials))));
}

Assignment random_suggest(const SearchSpace& space, std::uint64_t seed) {
    space.validate();
    std::mt19937_64 rng(seed);
    Assignment a;
    for (const Dimension& d : space.dims) {
        std::uniform_real_distribution<double> u(to_internal(d, d.low), to_internal(d, d.high));
        a[d.name] = from_internal(d, u(rng));
    }
    return a;
}

Assignment tpe_suggest(std::span<const TrialRecord> history, const SearchSpace& space, const TpeSettings& settings,
                       std::uint64_t seed) {
    space.validate();
    if (history.size() < std::max<std::size_t>(settings.startup, 1)) return random_suggest(space, seed);

    std::vector<const TrialRecord*> ranked;
    for (const TrialRecord& r : history) ranked.push_back(&r);
    std::sort(ranked.begin(), ranked.end(), [](const TrialRecord* a, const TrialRecord* b) { return ranks_before(*a, *b); });
    const std::size_t n_good = std::min(good_count(ranked.size(), settings.gamma), ranked.size());

    std::mt19937_64 rng(seed);
    struct Estimators {
        std::optional<Parzen> good, bad;
    };
    std::vector<Estimators> est;
    for (const Dimension& d : space.dims) {
        std::vector<double> good, bad;
        for (std::size_t i = 0; i < ranked.size(); ++i) {
            const auto it = ranked[i]->params.find(d.name);
            if (it == ranked[i]->params.end()) continue;
            (i < n_good ? good : bad).push_back(to_internal(d, it->second));
        }
        const double lo = to_internal(d, d.low), hi = to_internal(d, d.high);
        Estimators e;
        if (!good.empty() && !bad.empty()) {
            e.good.emplace(good, lo, hi);
            e.bad.emplace(bad, lo, hi);
        }
        est.push_back(std::move(e));
    }

    Assignment best;
    double best_score = -std::numeric_limits<double>::infinity();
    const std::size_t n_candidates = std::max<std::size_t>(settings.n_candidates, 1);
    for (std::size_t c = 0; c < n_candidates; ++c) {
        Assignment cand;
        double score = 0.0;
        for (std::size_t i = 0; i < space.dims.size(); ++i) {
            const Dimension& d = space.dims[i];
            if (!est[i].good) {
                std::uniform_real_distribution<double> u(to_internal(d, d.low), to_internal(d, d.high));
                cand[d.name] = from_internal(d, u(rng));
                continue;
            }
            const double x = from_internal(d, est[i].good->sample(rng));
            cand[d.name] = x;
            const double u = to_internal(d, x);
            score += est[i].good->log_pdf(u) - est[i].bad->log_pdf(u);
        }
        if (c == 0 || score > best_score) {
            best_score = score;
            best = std::move(cand);
        }
    }
    return best;
}

// --- study --------------------------------------------------------------------

std::vector<TrialRecord> run_study(const Objective& objective, const SearchSpace& space, const StudySettings& settings,
                                   std::uint64_t seed) {
    space.validate();
    if (settings.n_trials == 0) throw UsageError("study: n_trials must be positive");
    const std::size_t batch = std::max<std::size_t>(settings.batch, 1);
    const std::size_t jobs = std::max<std::size_t>(settings.jobs, 1);

    std::vector<TrialRecord> done;
    done.reserve(settings.n_trials);
    for (std::size_t start = 0; start < settings.n_trials; start += batch) {
        const std::size_t count = std::min(batch, settings.n_trials - start);
        std::vector<TrialRecord> pending(count);
        for (std::size_t j = 0; j < count; ++j) {
            const std::size_t id = start + j;
            pending[j].id = id;
            pending[j].params = settings.random_search ? random_suggest(space, derive_seed(seed, 2 * id))
                                                       : tpe_suggest(done, space, settings.tpe, derive_seed(seed, 2 * id));
        }

        std::atomic<std::size_t> next{0};
        std::exception_ptr fatal;
        std::mutex fatal_mutex;
        auto worker = [&]() {
            for (std::size_t j = next++; j < count; j = next++) {
                TrialRecord& rec = pending[j];
                const auto t0 = std::chrono::steady_clock::now();
                try {
                    TrialOutcome out = objective(rec.params, derive_seed(seed, 2 * rec.id + 1));
                    if (!std::isfinite(out.mae)) throw NumericalError("objective returned a non-finite MAE");
                    rec.mae = out.mae;
                    if (settings.keep_forecasts) {
                        rec.days = std::move(out.days);
                        rec.forecasts = std::move(out.forecasts);
                    }
                } catch (const NumericalError& e) {
                    rec.failed = true;
                    rec.error = e.what();
                } catch (const DataError& e) {
                    rec.failed = true;
                    rec.error = e.what();
                } catch (...) {
                    std::lock_guard lock(fatal_mutex);
                    if (!fatal) fatal = std::current_exception();
                }
                if (rec.failed) rec.mae = std::numeric_limits<double>::infinity();
                rec.runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            }
        };
        const std::size_t n_threads = std::min(jobs, count);
        if (n_threads <= 1) {
            worker();
        } else {
            std::vector<std::thread> threads;
            for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
            for (auto& t : threads) t.join();
        }
        if (fatal) std::rethrow_exception(fatal);
        for (auto& rec : pending) done.push_back(std::move(rec));
    }
    std::sort(done.begin(), done.end(), ranks_before);
    return done;
}

ModelSpec spec_from_assignment(Architecture architecture, const Assignment& params, std::uint64_t seed) {
    auto get = [&](const std::string& key, double fallback) {
        const auto it = params.find(key);
        return it == params.end() ? fallback : it->second;
    };
    ModelSpec spec;
    spec.architecture = architecture;
    spec.seed = seed;
    spec.lambda1 = get("lambda1", 0.0);
    spec.lambda2 = get("lambda2", 0.0);
    if (has_hidden_layer(architecture)) {
        if (!params.contains("hidden_n")) throw UsageError("assignment lacks hidden_n");
        spec.hidden_n = static_cast<std::size_t>(std::llround(params.at("hidden_n")));
    }
    if (is_ols_variant(architecture)) spec.ols_share_alpha = get("ols_share_alpha", 1.0);
    spec.validate();
    return spec;
}

OnlineSchedule schedule_from_assignment(const OnlineSchedule& base, const Assignment& params) {
    OnlineSchedule s = base;
    if (params.contains("d_init")) s.d_init = static_cast<std::size_t>(std::llround(params.at("d_init")));
    if (params.contains("d_up")) s.d_up = static_cast<std::size_t>(std::llround(params.at("d_up")));
    if (params.contains("lr_init")) s.lr_init = params.at("lr_init");
    if (params.contains("lr_up")) s.lr_up = params.at("lr_up");
    s.d_up = std::min(s.d_up, s.d_init);
    return s;
}

Objective make_backtest_objective(Architecture architecture, const OnlineSchedule& base,
                                  std::span<const DayDesign> designs, Date validation_start, Date validation_end) {
    return [=](const Assignment& params, std::uint64_t trial_seed) {
        const ModelSpec spec = spec_from_assignment(architecture, params, trial_seed);
        const OnlineSchedule schedule = schedule_from_assignment(base, params);
        BacktestResult r = run_backtest(spec, schedule, designs, validation_start, validation_end);
        return TrialOutcome{r.mae, std::move(r.days), std::move(r.forecasts)};
    };
}

void write_study_csv(std::ostream& out, std::span<const TrialRecord> records, const SearchSpace& space) {
    out << "trial";
    for (const Dimension& d : space.dims) out << ',' << d.name;
    out << ",mae,failed,runtime\n";
    for (const TrialRecord& r : records) {
        out << r.id;
        for (const Dimension& d : space.dims) {
            const auto it = r.params.find(d.name);
            out << ',' << (it == r.params.end() ? std::string() : fmt(it->second));
        }
        out << ',' << (r.failed ? std::string("inf") : fmt(r.mae)) << ',' << (r.failed ? 1 : 0) << ','
            << fmt(r.runtime) << '\n';
    }
}

std::vector<TrialRecord> read_study_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("study file is empty");
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    if (header.size() < 4 || header.front() != "trial") throw SchemaError("study file: bad header");
    std::vector<TrialRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        TrialRecord r;
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (!std::getline(ss, cell, ',')) cell.clear();
            const std::string& name = header[c];
            try {
                if (c == 0) {
                    r.id = std::stoull(cell);
                } else if (name == "mae") {
                    r.mae = cell == "inf" ? std::numeric_limits<double>::infinity() : std::stod(cell);
                } else if (name == "failed") {
                    r.failed = cell == "1";
                } else if (name == "runtime") {
                    r.runtime = std::stod(cell);
                } else if (!cell.empty()) {
                    r.params[name] = std::stod(cell);
                }
            } catch (const std::exception&) {
                throw SchemaError("study file: bad value '" + cell + "' in column " + name);
            }
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::string assignment_key(Architecture architecture, const Assignment& params) {
    std::string text = architecture_name(architecture);
    for (const auto& [k, v] : params) text += "|" + k + "=" + fmt(v);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace epf
