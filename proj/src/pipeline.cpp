#include "epf/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "epf/ensemble.hpp"
#include "epf/evaluation.hpp"
#include "epf/features.hpp"

namespace epf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ostream& log_of(const RunContext& ctx) {
    static std::ostream null_stream(nullptr);
    return ctx.log ? *ctx.log : null_stream;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void require_artifact(const fs::path& path, const std::string& producer) {
    if (!fs::exists(path)) {
        throw DataError("missing artifact " + path.string() + " (produced by `epf " + producer + "`)");
    }
}

std::ofstream open_out(const fs::path& path) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    return out;
}

std::ifstream open_in(const fs::path& path, const std::string& producer) {
    require_artifact(path, producer);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    return in;
}

void write_json(const fs::path& path, const json& j) {
    auto out = open_out(path);
    out << j.dump(2) << '\n';
}

json read_json(const fs::path& path, const std::string& producer) {
    auto in = open_in(path, producer);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
}

void write_forecasts(const fs::path& path, std::span<const Date> days, const HourlyGrid& forecasts) {
    auto out = open_out(path);
    write_forecasts_csv(out, days, forecasts);
}

ForecastTable read_forecasts(const fs::path& path, const std::string& producer) {
    auto in = open_in(path, producer);
    return read_forecasts_csv(in);
}

HourlyGrid realized_prices(const MarketSeries& series, std::span<const Date> days) {
    HourlyGrid out;
    out.reserve(days.size());
    for (Date d : days) {
        const auto offset = (d - series.days.front()).count();
        if (offset < 0 || static_cast<std::size_t>(offset) >= series.n_days()) {
            throw DataError("no realized prices for " + format_date(d));
        }
        out.push_back(series.price[static_cast<std::size_t>(offset)]);
    }
    return out;
}

std::vector<Date> day_range(Date first, Date last) {
    std::vector<Date> out;
    for (Date d = first; d <= last; d += std::chrono::days{1}) out.push_back(d);
    return out;
}

OnlineSchedule schedule_from_json(const json& j, OnlineSchedule s) {
    s.d_init = j.value("d_init", s.d_init);
    s.d_up = j.value("d_up", s.d_up);
    s.epochs_init = j.value("epochs_init", s.epochs_init);
    s.epochs_up = j.value("epochs_up", s.epochs_up);
    s.lr_init = j.value("lr_init", s.lr_init);
    s.lr_up = j.value("lr_up", s.lr_up);
    s.batch_size = j.value("batch_size", s.batch_size);
    s.validate();
    return s;
}

json schedule_to_json(const OnlineSchedule& s) {
    return json{{"d_init", s.d_init},       {"d_up", s.d_up},   {"epochs_init", s.epochs_init},
                {"epochs_up", s.epochs_up}, {"lr_init", s.lr_init}, {"lr_up", s.lr_up},
                {"batch_size", s.batch_size}};
}

json spec_to_json(const ModelSpec& spec) {
    json j{{"architecture", architecture_name(spec.architecture)},
           {"hidden_n", spec.hidden_n},
           {"leak_alpha", spec.leak_alpha},
           {"lambda1", spec.lambda1},
           {"lambda2", spec.lambda2},
           {"seed", spec.seed}};
    if (spec.ols_share_alpha) j["ols_share_alpha"] = *spec.ols_share_alpha;
    return j;
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) throw SchemaError(where + ": expected an object");
    for (const auto& [key, value] : j.items()) {
        if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) == allowed.end()) {
            throw SchemaError(where + ": unknown key '" + key + "'");
        }
    }
}

std::vector<Architecture> tuned_architectures(const ExperimentConfig& cfg) {
    if (!cfg.tuner.architectures.empty()) return cfg.tuner.architectures;
    return {kArchitectures.begin(), kArchitectures.end()};
}

std::uint64_t study_seed(std::uint64_t seed, Architecture a) {
    return named_seed(seed, "tune:" + architecture_name(a));
}

std::uint64_t trial_seed(std::uint64_t seed, Architecture a, std::size_t trial) {
    return derive_seed(study_seed(seed, a), 2 * trial + 1);
}

fs::path study_dir(const fs::path& out, Architecture a) {
    return out / "tune" / architecture_name(a);
}

fs::path trial_path(const fs::path& out, Architecture a, std::size_t trial) {
    return study_dir(out, a) / "trials" / ("trial_" + std::to_string(trial) + ".csv");
}

struct Candidate {
    Architecture architecture;
    TrialRecord record;
    HourlyGrid validation;
};

std::string candidate_name(const Candidate& c) {
    return architecture_name(c.architecture) + "#" + std::to_string(c.record.id);
}

// Tracks registered by evaluate and consumed by report.
struct Track {
    std::string name;
    fs::path forecasts;
    fs::path runtime;
};

std::vector<Track> discover_tracks(const fs::path& out) {
    std::vector<Track> tracks;
    for (const char* group : {"backtest", "select"}) {
        const fs::path root = out / group;
        if (!fs::is_directory(root)) continue;
        std::vector<fs::path> dirs;
        for (const auto& entry : fs::directory_iterator(root)) {
            if (entry.is_directory() && fs::exists(entry.path() / "forecasts.csv")) dirs.push_back(entry.path());
        }
        std::sort(dirs.begin(), dirs.end());
        for (const auto& dir : dirs) {
            std::string name = dir.filename().string();
            if (fs::exists(dir / "summary.json")) name = read_json(dir / "summary.json", group).value("name", name);
            tracks.push_back({name, dir / "forecasts.csv", dir / "runtime.json"});
        }
    }
    return tracks;
}

}  // namespace

// --- configuration ------------------------------------------------------------

std::uint64_t named_seed(std::uint64_t seed, const std::string& name) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : name) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return derive_seed(seed, h);
}

ExperimentConfig ExperimentConfig::from_json(const json& j, const fs::path& base_dir) {
    auto resolve = [&](const std::string& p) {
        fs::path q(p);
        return (q.is_relative() && !base_dir.empty()) ? base_dir / q : q;
    };
    ExperimentConfig cfg;
    try {
        check_keys(j, {"seed", "out", "zone", "zone_config", "data", "synthetic", "periods", "schedule", "models", "tuner",
                       "select"},
                   "config");
        cfg.seed = j.value("seed", std::uint64_t{0});
        if (j.contains("out")) cfg.out = resolve(j.at("out").get<std::string>());
        if (j.contains("zone")) {
            cfg.zone = zone_config_from_json(j.at("zone"));
        } else if (j.contains("zone_config")) {
            cfg.zone = load_zone_config(resolve(j.at("zone_config").get<std::string>()));
        }
        if (j.contains("data")) cfg.data = resolve(j.at("data").get<std::string>());
        if (j.contains("synthetic")) {
            const json& s = j.at("synthetic");
            check_keys(s, {"n_days", "nonlinearity", "noise_scale", "has_wind_offshore", "start", "zone_id"}, "synthetic");
            SyntheticSpec spec;
            spec.nonlinearity = s.value("nonlinearity", spec.nonlinearity);
            spec.noise_scale = s.value("noise_scale", spec.noise_scale);
            spec.has_wind_offshore = s.value("has_wind_offshore", spec.has_wind_offshore);
            spec.zone_id = s.value("zone_id", spec.zone_id);
            if (s.contains("start")) spec.start = parse_date(s.at("start").get<std::string>());
            cfg.synthetic_days = s.value("n_days", cfg.synthetic_days);
            cfg.synthetic = spec;
        }
        if (j.contains("periods")) {
            const json& p = j.at("periods");
            check_keys(p, {"validation_start", "test_start", "test_end"}, "periods");
            if (p.contains("validation_start")) cfg.periods.validation_start = parse_date(p.at("validation_start").get<std::string>());
            if (p.contains("test_start")) cfg.periods.test_start = parse_date(p.at("test_start").get<std::string>());
            if (p.contains("test_end")) cfg.periods.test_end = parse_date(p.at("test_end").get<std::string>());
        }
        if (j.contains("schedule")) {
            check_keys(j.at("schedule"), {"d_init", "d_up", "epochs_init", "epochs_up", "lr_init", "lr_up", "batch_size"},
                       "schedule");
            cfg.schedule = schedule_from_json(j.at("schedule"), cfg.schedule);
        }
        if (j.contains("models")) {
            std::set<std::string> names;
            for (const json& m : j.at("models")) {
                check_keys(m, {"name", "architecture", "hidden_n", "leak_alpha", "lambda1", "lambda2", "ols_share_alpha",
                               "schedule", "tuned"},
                           "models");
                ModelEntry e;
                e.architecture = architecture_from_name(m.at("architecture").get<std::string>());
                e.name = m.value("name", architecture_name(e.architecture));
                e.hidden_n = has_hidden_layer(e.architecture) ? m.value("hidden_n", e.hidden_n) : 0;
                e.leak_alpha = m.value("leak_alpha", e.leak_alpha);
                e.lambda1 = m.value("lambda1", e.lambda1);
                e.lambda2 = m.value("lambda2", e.lambda2);
                if (m.contains("ols_share_alpha")) e.ols_share_alpha = m.at("ols_share_alpha").get<double>();
                else if (is_ols_variant(e.architecture)) e.ols_share_alpha = 1.0;
                if (m.contains("schedule")) e.schedule = schedule_from_json(m.at("schedule"), cfg.schedule);
                e.tuned = m.value("tuned", false);
                if (!names.insert(e.name).second) throw SchemaError("models: duplicate name '" + e.name + "'");
                cfg.models.push_back(std::move(e));
            }
        }
        if (j.contains("tuner")) {
            const json& t = j.at("tuner");
            check_keys(t, {"architectures", "n_trials", "batch", "gamma", "startup", "candidates", "random_search", "bounds"},
                       "tuner");
            for (const json& a : t.value("architectures", json::array())) {
                cfg.tuner.architectures.push_back(architecture_from_name(a.get<std::string>()));
            }
            StudySettings& s = cfg.tuner.study;
            s.n_trials = t.value("n_trials", s.n_trials);
            s.batch = t.value("batch", s.batch);
            s.tpe.gamma = t.value("gamma", s.tpe.gamma);
            s.tpe.startup = t.value("startup", s.tpe.startup);
            s.tpe.n_candidates = t.value("candidates", s.tpe.n_candidates);
            s.random_search = t.value("random_search", s.random_search);
            if (t.contains("bounds")) {
                for (const auto& [name, range] : t.at("bounds").items()) {
                    if (!range.is_array() || range.size() != 2) throw SchemaError("tuner.bounds." + name + ": expected [low, high]");
                    cfg.tuner.bounds[name] = {range[0].get<double>(), range[1].get<double>()};
                }
            }
            if (s.n_trials == 0 || s.batch == 0) throw SchemaError("tuner: n_trials and batch must be positive");
            if (!(s.tpe.gamma > 0.0 && s.tpe.gamma < 1.0)) throw SchemaError("tuner: gamma must lie in (0, 1)");
        }
        if (j.contains("select")) {
            check_keys(j.at("select"), {"size", "pool"}, "select");
            cfg.select.size = j.at("select").value("size", cfg.select.size);
            cfg.select.pool = j.at("select").value("pool", cfg.select.pool);
            if (cfg.select.size == 0 || cfg.select.pool == 0) throw SchemaError("select: size and pool must be positive");
        }
    } catch (const json::exception& e) {
        throw SchemaError(std::string("config: ") + e.what());
    } catch (const UsageError& e) {
        throw SchemaError(std::string("config: ") + e.what());
    } catch (const DataError& e) {
        throw SchemaError(std::string("config: ") + e.what());
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw SchemaError(path.string() + ": " + e.what());
    }
    return from_json(j, path.parent_path());
}

ResolvedPeriods resolve_periods(const Periods& p, const MarketSeries& series) {
    if (series.days.empty()) throw DataError("empty series");
    ResolvedPeriods r;
    r.test_end = p.test_end.value_or(series.days.back());
    r.test_start = p.test_start.value_or(std::max(series.days.front() + std::chrono::days{1}, r.test_end - std::chrono::days{729}));
    r.validation_start = p.validation_start.value_or(std::max(series.days.front(), r.test_start - std::chrono::days{730}));
    if (r.test_end > series.days.back() || r.validation_start < series.days.front()) {
        throw UsageError("periods extend beyond the data (" + format_date(series.days.front()) + " .. " +
                         format_date(series.days.back()) + ")");
    }
    if (!(r.validation_start < r.test_start && r.test_start <= r.test_end)) {
        throw UsageError("periods must satisfy validation_start < test_start <= test_end");
    }
    return r;
}

MarketSeries truncate_series(const MarketSeries& series, Date last) {
    MarketSeries out = series;
    std::size_t n = 0;
    while (n < series.n_days() && series.days[n] <= last) ++n;
    out.days.resize(n);
    for (Role r : kHourlyRoles) {
        if (r == Role::WindOff && !series.has_wind_offshore) continue;
        out.hourly(r).resize(n);
    }
    for (Role r : kCommodityRoles) out.daily(r).resize(n);
    return out;
}

MarketSeries load_cleaned(const fs::path& out) {
    const json meta = read_json(out / "dataset.json", "ingest");
    require_artifact(out / "cleaned.csv", "ingest");
    const ZoneConfig cfg = default_zone_config(meta.at("zone_id").get<std::string>(), meta.at("has_wind_offshore").get<bool>());
    return clean(load_csv(out / "cleaned.csv", cfg), cfg).series;
}

std::string slug(const std::string& name) {
    std::string s;
    for (char c : name) {
        if (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.') s += c;
        else if (!s.empty() && s.back() != '_') s += '_';
    }
    while (!s.empty() && s.back() == '_') s.pop_back();
    return s.empty() ? "model" : s;
}

// --- commands -----------------------------------------------------------------

void cmd_synth(const RunContext& ctx) {
    const SyntheticSpec spec = ctx.config.synthetic.value_or(SyntheticSpec{});
    const SyntheticMarket market = generate_synthetic(ctx.config.synthetic_days, ctx.seed, spec);
    fs::create_directories(ctx.out);
    write_csv(market.series, ctx.out / "synthetic.csv");
    const SyntheticTruth& t = market.truth;
    json coefficients = json::array();
    for (const auto& c : t.coefficients) coefficients.push_back(c);
    write_json(ctx.out / "synthetic_truth.json",
               json{{"seed", ctx.seed},
                    {"n_days", market.series.n_days()},
                    {"intercept", t.intercept},
                    {"coefficients", coefficients},
                    {"nonlinearity", t.nonlinearity},
                    {"load_center", t.load_center},
                    {"load_scale", t.load_scale},
                    {"wind_center", t.wind_center},
                    {"wind_scale", t.wind_scale}});
    log_of(ctx) << "synth: " << market.series.n_days() << " days -> " << (ctx.out / "synthetic.csv").string() << '\n';
}

void cmd_ingest(const RunContext& ctx) {
    const ExperimentConfig& cfg = ctx.config;
    fs::path input;
    ZoneConfig zone;
    if (cfg.data) {
        input = *cfg.data;
        if (!cfg.zone) throw UsageError("config with \"data\" needs a \"zone\" or \"zone_config\"");
        zone = *cfg.zone;
        require_artifact(input, "ingest input");
    } else {
        const SyntheticSpec spec = cfg.synthetic.value_or(SyntheticSpec{});
        input = ctx.out / "synthetic.csv";
        require_artifact(input, "synth");
        zone = cfg.zone.value_or(default_zone_config(spec.zone_id, spec.has_wind_offshore));
    }
    CleanResult result = clean(load_csv(input, zone), zone);
    fs::create_directories(ctx.out);
    write_csv(result.series, ctx.out / "cleaned.csv");
    write_json(ctx.out / "cleaning_log.json", result.log.to_json());
    write_json(ctx.out / "dataset.json", json{{"zone_id", result.series.zone_id.empty() ? zone.zone_id : result.series.zone_id},
                                              {"has_wind_offshore", result.series.has_wind_offshore},
                                              {"first_day", format_date(result.series.days.front())},
                                              {"last_day", format_date(result.series.days.back())},
                                              {"n_days", result.series.n_days()}});
    write_feature_map(FeatureLayout(result.series.has_wind_offshore), ctx.out / "feature_map.txt");
    for (const auto& w : result.log.warnings) log_of(ctx) << "warning: " << w << '\n';
    log_of(ctx) << "ingest: " << result.series.n_days() << " days, " << result.log.total_imputations()
                << " imputed cells -> " << (ctx.out / "cleaned.csv").string() << '\n';
}

void cmd_tune(const RunContext& ctx) {
    const ExperimentConfig& cfg = ctx.config;
    const MarketSeries series = load_cleaned(ctx.out);
    const ResolvedPeriods periods = resolve_periods(cfg.periods, series);
    const Date validation_end = periods.test_start - std::chrono::days{1};
    // Tuning never sees the test period.
    const std::vector<DayDesign> designs = build_designs(truncate_series(series, validation_end));

    for (Architecture arch : tuned_architectures(cfg)) {
        SearchSpace space = SearchSpace::defaults(arch);
        for (const auto& [name, range] : cfg.tuner.bounds) {
            if (space.contains(name)) space.set_bounds(name, range.first, range.second);
        }
        StudySettings settings = cfg.tuner.study;
        settings.jobs = ctx.jobs;
        settings.keep_forecasts = true;
        const Objective objective =
            make_backtest_objective(arch, cfg.schedule, designs, periods.validation_start, validation_end);
        const auto t0 = std::chrono::steady_clock::now();
        const std::vector<TrialRecord> records = run_study(objective, space, settings, study_seed(ctx.seed, arch));
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        const fs::path dir = study_dir(ctx.out, arch);
        fs::remove_all(dir / "trials");
        {
            auto out = open_out(dir / "study.csv");
            write_study_csv(out, records, space);
        }
        std::size_t failed = 0;
        for (const TrialRecord& r : records) {
            if (r.failed) {
                ++failed;
                continue;
            }
            write_forecasts(trial_path(ctx.out, arch, r.id), r.days, r.forecasts);
        }
        write_json(dir / "runtime.json", json{{"total_seconds", seconds}, {"trials", records.size()}});
        write_json(dir / "study.json", json{{"architecture", architecture_name(arch)},
                                            {"seed", study_seed(ctx.seed, arch)},
                                            {"validation_start", format_date(periods.validation_start)},
                                            {"validation_end", format_date(validation_end)},
                                            {"schedule", schedule_to_json(cfg.schedule)},
                                            {"failed", failed}});
        log_of(ctx) << "tune " << architecture_name(arch) << ": " << records.size() << " trials, " << failed
                    << " failed, best validation MAE " << (records.empty() ? 0.0 : records.front().mae) << '\n';
    }
}

namespace {

struct ResolvedModel {
    ModelSpec spec;
    OnlineSchedule schedule;
};

std::vector<TrialRecord> read_study(const fs::path& out, Architecture arch) {
    auto in = open_in(study_dir(out, arch) / "study.csv", "tune");
    return read_study_csv(in);
}

ResolvedModel resolve_trial(const RunContext& ctx, Architecture arch, const TrialRecord& r) {
    return {spec_from_assignment(arch, r.params, trial_seed(ctx.seed, arch, r.id)),
            schedule_from_assignment(ctx.config.schedule, r.params)};
}

ResolvedModel resolve_entry(const RunContext& ctx, const ModelEntry& e) {
    if (e.tuned) {
        for (const TrialRecord& r : read_study(ctx.out, e.architecture)) {
            if (!r.failed) return resolve_trial(ctx, e.architecture, r);
        }
        throw DataError("study for " + architecture_name(e.architecture) + " has no successful trial");
    }
    ResolvedModel m;
    m.spec.architecture = e.architecture;
    m.spec.hidden_n = e.hidden_n;
    m.spec.leak_alpha = e.leak_alpha;
    m.spec.lambda1 = e.lambda1;
    m.spec.lambda2 = e.lambda2;
    m.spec.ols_share_alpha = e.ols_share_alpha;
    m.spec.seed = named_seed(ctx.seed, "model:" + e.name);
    m.spec.validate();
    m.schedule = e.schedule.value_or(ctx.config.schedule);
    return m;
}

}  // namespace

void cmd_backtest(const RunContext& ctx) {
    const ExperimentConfig& cfg = ctx.config;
    const MarketSeries series = load_cleaned(ctx.out);
    const ResolvedPeriods periods = resolve_periods(cfg.periods, series);
    const std::vector<DayDesign> designs = build_designs(truncate_series(series, periods.test_end));

    std::vector<ModelEntry> models = cfg.models;
    if (models.empty()) {
        ModelEntry fallback;
        fallback.name = "MLPReducedLinear";
        models.push_back(fallback);
    }

    for (const ModelEntry& entry : models) {
        const ResolvedModel m = resolve_entry(ctx, entry);
        const BacktestResult result = run_backtest(m.spec, m.schedule, designs, periods.test_start, periods.test_end);
        const fs::path dir = ctx.out / "backtest" / slug(entry.name);
        write_forecasts(dir / "forecasts.csv", result.days, result.forecasts);
        json summary = backtest_summary(result);
        summary["name"] = entry.name;
        summary["model"] = spec_to_json(m.spec);
        summary["schedule"] = schedule_to_json(m.schedule);
        summary["tuned"] = entry.tuned;
        write_json(dir / "summary.json", summary);
        write_json(dir / "runtime.json", backtest_runtime(result));
        {
            auto out = open_out(dir / "params.txt");
            write_params(out, result.final_params, m.spec.architecture);
        }
        log_of(ctx) << "backtest " << entry.name << ": " << result.days.size() << " days, MAE " << result.mae
                    << ", RMSE " << result.rmse << '\n';
    }
}

void cmd_select(const RunContext& ctx) {
    const ExperimentConfig& cfg = ctx.config;
    const MarketSeries series = load_cleaned(ctx.out);
    const ResolvedPeriods periods = resolve_periods(cfg.periods, series);
    const std::vector<Date> validation_days = day_range(periods.validation_start, periods.test_start - std::chrono::days{1});
    const HourlyGrid validation_realized = realized_prices(series, validation_days);

    std::map<Architecture, std::vector<Candidate>> by_class;
    for (Architecture arch : tuned_architectures(cfg)) {
        std::vector<Candidate>& pool = by_class[arch];
        for (TrialRecord& r : read_study(ctx.out, arch)) {
            if (r.failed) continue;
            ForecastTable t = read_forecasts(trial_path(ctx.out, arch, r.id), "tune");
            if (t.days != validation_days) {
                throw DataError("trial forecasts " + trial_path(ctx.out, arch, r.id).string() +
                                " do not cover the validation period");
            }
            pool.push_back({arch, std::move(r), std::move(t.values)});
        }
        if (pool.empty()) throw DataError("study for " + architecture_name(arch) + " has no successful trial");
    }

    struct Ensemble {
        std::string name;
        std::vector<const Candidate*> members;
        Selection selection;
    };
    auto select_from = [&](const std::string& name, std::vector<const Candidate*> pool) {
        std::vector<HourlyGrid> grids;
        grids.reserve(pool.size());
        for (const Candidate* c : pool) grids.push_back(c->validation);
        Ensemble e{name, {}, forward_select(grids, validation_realized, cfg.select.size)};
        for (std::size_t idx : e.selection.members) e.members.push_back(pool[idx]);
        return e;
    };

    std::vector<Ensemble> ensembles;
    std::vector<const Candidate*> all;
    for (const auto& [arch, pool] : by_class) {
        std::vector<const Candidate*> ptrs;
        for (const Candidate& c : pool) ptrs.push_back(&c);
        all.insert(all.end(), ptrs.begin(), ptrs.end());
        ensembles.push_back(select_from(architecture_name(arch) + " (BOA)", std::move(ptrs)));
    }
    std::stable_sort(all.begin(), all.end(), [](const Candidate* a, const Candidate* b) { return a->record.mae < b->record.mae; });
    if (all.size() > cfg.select.pool) all.resize(cfg.select.pool);
    ensembles.push_back(select_from("BOA all", std::move(all)));

    // Every selected member is refitted on the test period once.
    const std::vector<DayDesign> designs = build_designs(truncate_series(series, periods.test_end));
    std::map<std::string, BacktestResult> member_runs;
    for (const Ensemble& e : ensembles) {
        for (const Candidate* c : e.members) {
            const std::string key = candidate_name(*c);
            if (member_runs.contains(key)) continue;
            const ResolvedModel m = resolve_trial(ctx, c->architecture, c->record);
            BacktestResult r = run_backtest(m.spec, m.schedule, designs, periods.test_start, periods.test_end);
            const fs::path dir = ctx.out / "select" / "members" / slug(key);
            write_forecasts(dir / "forecasts.csv", r.days, r.forecasts);
            write_json(dir / "runtime.json", backtest_runtime(r));
            member_runs.emplace(key, std::move(r));
        }
    }

    const std::vector<Date> test_days = day_range(periods.test_start, periods.test_end);
    const HourlyGrid test_realized = realized_prices(series, test_days);
    for (const Ensemble& e : ensembles) {
        std::vector<HourlyGrid> tracks;
        std::vector<std::string> names;
        double runtime = 0.0;
        json members = json::array();
        for (std::size_t i = 0; i < e.members.size(); ++i) {
            const Candidate& c = *e.members[i];
            const BacktestResult& r = member_runs.at(candidate_name(c));
            tracks.push_back(r.forecasts);
            names.push_back(candidate_name(c));
            runtime += r.total_seconds;
            members.push_back(json{{"name", candidate_name(c)},
                                   {"architecture", architecture_name(c.architecture)},
                                   {"trial", c.record.id},
                                   {"key", assignment_key(c.architecture, c.record.params)},
                                   {"params", c.record.params},
                                   {"validation_mae", c.record.mae},
                                   {"ensemble_validation_mae", e.selection.mae[i]},
                                   {"test_mae", r.mae}});
        }
        const BoaRun run = run_boa(tracks, test_realized, true);
        const fs::path dir = ctx.out / "select" / slug(e.name);
        write_forecasts(dir / "forecasts.csv", test_days, run.combined);
        {
            auto out = open_out(dir / "weights.csv");
            write_weight_trajectory(out, test_days, run.trajectory, names);
        }
        write_json(dir / "summary.json", json{{"name", e.name},
                                              {"n_days", test_days.size()},
                                              {"forecast_start", format_date(test_days.front())},
                                              {"forecast_end", format_date(test_days.back())},
                                              {"mae", mean_absolute_error(run.combined, test_realized)},
                                              {"pool_too_small", e.selection.pool_too_small},
                                              {"members", members}});
        write_json(dir / "runtime.json", json{{"total_seconds", runtime}});
        log_of(ctx) << "select " << e.name << ": " << e.members.size() << " members, test MAE "
                    << mean_absolute_error(run.combined, test_realized) << '\n';
    }
}

void cmd_evaluate(const RunContext& ctx) {
    const MarketSeries series = load_cleaned(ctx.out);
    const ResolvedPeriods periods = resolve_periods(ctx.config.periods, series);
    const std::vector<Track> tracks = discover_tracks(ctx.out);
    if (tracks.empty()) {
        throw DataError("missing artifact " + (ctx.out / "backtest").string() + " (produced by `epf backtest` or `epf select`)");
    }
    std::ostringstream m, hr;
    m << "model,n_days,forecast_start,forecast_end,mae,rmse,rmae\n";
    hr << "model";
    for (int h = 0; h < kHours; ++h) hr << ",h" << h;
    hr << '\n';
    auto emit = [&](const std::string& name, std::span<const Date> days, const MetricReport& r) {
        m << name << ',' << r.n_days << ',' << format_date(days.front()) << ',' << format_date(days.back()) << ','
          << fmt(r.mae) << ',' << fmt(r.rmse) << ',' << fmt(r.rmae) << '\n';
        hr << name;
        for (double v : r.hourly_rmse) hr << ',' << fmt(v);
        hr << '\n';
    };
    json registry = json::array();
    for (const Track& t : tracks) {
        const ForecastTable f = read_forecasts(t.forecasts, "backtest");
        const HourlyGrid realized = realized_prices(series, f.days);
        const MetricReport r = metrics(f.values, realized, naive_forecasts(series, f.days));
        emit(t.name, f.days, r);
        registry.push_back(json{{"name", t.name},
                                {"forecasts", fs::relative(t.forecasts, ctx.out).generic_string()},
                                {"runtime", fs::relative(t.runtime, ctx.out).generic_string()}});
    }
    const std::vector<Date> test_days = day_range(periods.test_start, periods.test_end);
    const HourlyGrid naive = naive_forecasts(series, test_days);
    emit("Naive", test_days, metrics(naive, realized_prices(series, test_days), naive));

    auto out_m = open_out(ctx.out / "evaluate" / "metrics.csv");
    out_m << m.str();
    auto out_h = open_out(ctx.out / "evaluate" / "hourly_rmse.csv");
    out_h << hr.str();
    write_json(ctx.out / "evaluate" / "tracks.json", registry);
    log_of(ctx) << "evaluate: " << tracks.size() << " models -> " << (ctx.out / "evaluate" / "metrics.csv").string() << '\n';
}

void cmd_report(const RunContext& ctx) {
    const MarketSeries series = load_cleaned(ctx.out);
    const ResolvedPeriods periods = resolve_periods(ctx.config.periods, series);
    const json registry = read_json(ctx.out / "evaluate" / "tracks.json", "evaluate");
    require_artifact(ctx.out / "evaluate" / "metrics.csv", "evaluate");

    const std::vector<Date> test_days = day_range(periods.test_start, periods.test_end);
    const HourlyGrid realized = realized_prices(series, test_days);
    const HourlyGrid naive = naive_forecasts(series, test_days);

    struct Row {
        std::string name;
        HourlyGrid forecasts;
        MetricReport metrics;
        std::optional<double> runtime;
    };
    std::vector<Row> rows;
    for (const json& t : registry) {
        const std::string name = t.at("name").get<std::string>();
        ForecastTable f = read_forecasts(ctx.out / t.at("forecasts").get<std::string>(), "evaluate");
        if (f.days != test_days) throw DataError("forecasts of '" + name + "' do not cover the test period");
        Row row{name, std::move(f.values), {}, std::nullopt};
        row.metrics = metrics(row.forecasts, realized, naive);
        const fs::path rt = ctx.out / t.at("runtime").get<std::string>();
        if (fs::exists(rt)) row.runtime = read_json(rt, "backtest").at("total_seconds").get<double>();
        rows.push_back(std::move(row));
    }
    rows.push_back(Row{"Naive", naive, metrics(naive, realized, naive), std::nullopt});

    const fs::path dir = ctx.out / "report";
    {
        std::vector<const Row*> order;
        for (const Row& r : rows) order.push_back(&r);
        std::stable_sort(order.begin(), order.end(), [](const Row* a, const Row* b) { return a->metrics.mae < b->metrics.mae; });
        auto out = open_out(dir / "metrics.csv");
        out << "rank,model,mae,rmse,rmae\n";
        for (std::size_t i = 0; i < order.size(); ++i) {
            out << i + 1 << ',' << order[i]->name << ',' << fmt(order[i]->metrics.mae) << ','
                << fmt(order[i]->metrics.rmse) << ',' << fmt(order[i]->metrics.rmae) << '\n';
        }
    }
    {
        auto out = open_out(dir / "hourly_rmse.csv");
        out << "hour";
        for (const Row& r : rows) out << ',' << r.name;
        out << '\n';
        for (int h = 0; h < kHours; ++h) {
            out << h;
            for (const Row& r : rows) out << ',' << fmt(r.metrics.hourly_rmse[h]);
            out << '\n';
        }
    }
    {
        // Entry (A, B): one-sided p-value of "A is more accurate than B".
        auto out = open_out(dir / "dm_pvalues.csv");
        out << "model";
        for (const Row& r : rows) out << ',' << r.name;
        out << '\n';
        for (const Row& a : rows) {
            out << a.name;
            for (const Row& b : rows) out << ',' << fmt(dm_test(a.forecasts, b.forecasts, realized).p_value);
            out << '\n';
        }
    }
    {
        std::vector<ParetoPoint> points;
        for (const Row& r : rows) {
            if (r.runtime) points.push_back({r.name, *r.runtime, r.metrics.mae, false});
        }
        mark_pareto(points);
        auto out = open_out(dir / "pareto.csv");
        out << "model,runtime_seconds,mae,efficient\n";
        for (const ParetoPoint& p : points) {
            out << p.name << ',' << fmt(p.runtime) << ',' << fmt(p.mae) << ',' << (p.efficient ? 1 : 0) << '\n';
        }
    }
    {
        auto out = open_out(dir / "summary.txt");
        out << "Test period " << format_date(periods.test_start) << " .. " << format_date(periods.test_end) << " ("
            << test_days.size() << " days)\n\n";
        char line[160];
        std::snprintf(line, sizeof line, "%-32s %10s %10s %8s\n", "model", "MAE", "RMSE", "rMAE");
        out << line;
        for (const Row& r : rows) {
            std::snprintf(line, sizeof line, "%-32s %10.4f %10.4f %8.4f\n", r.name.c_str(), r.metrics.mae, r.metrics.rmse,
                          r.metrics.rmae);
            out << line;
        }
    }
    log_of(ctx) << "report: " << rows.size() << " models -> " << dir.string() << '\n';
}

// --- command line -------------------------------------------------------------

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Day-ahead electricity price forecasting"};
    app.require_subcommand(1, 1);
    app.fallthrough();
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::size_t jobs = 1;
    std::string out_dir;
    app.add_option("--config", config_path, "Experiment config (JSON)");
    app.add_option("--seed", seed, "Global seed (overrides the config)");
    app.add_option("--jobs", jobs, "Parallel tuning trials")->check(CLI::PositiveNumber);
    app.add_option("--out", out_dir, "Output directory (overrides the config)");

    const std::vector<std::pair<std::string, void (*)(const RunContext&)>> commands{
        {"synth", cmd_synth},   {"ingest", cmd_ingest},     {"tune", cmd_tune},    {"backtest", cmd_backtest},
        {"select", cmd_select}, {"evaluate", cmd_evaluate}, {"report", cmd_report}};
    const std::map<std::string, std::string> help{
        {"synth", "Generate a synthetic market"},
        {"ingest", "Clean the raw input and write the dataset"},
        {"tune", "Hyperparameter studies per model class"},
        {"backtest", "Online backtest of the configured models on the test period"},
        {"select", "Forward-selected BOA ensembles from the studies"},
        {"evaluate", "Metrics of every forecast track"},
        {"report", "Metric, hourly RMSE, DM and Pareto tables"}};
    for (const auto& [name, fn] : commands) app.add_subcommand(name, help.at(name));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        RunContext ctx;
        ctx.config = config_path.empty() ? ExperimentConfig{} : ExperimentConfig::load(config_path);
        ctx.seed = seed.value_or(ctx.config.seed);
        ctx.out = out_dir.empty() ? ctx.config.out : fs::path(out_dir);
        ctx.jobs = jobs;
        ctx.log = &out;
        for (const auto& [name, fn] : commands) {
            if (app.got_subcommand(name)) fn(ctx);
        }
        return 0;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const Error& e) {
        err << "data error: " << e.what() << '\n';
        return 2;
    } catch (const fs::filesystem_error& e) {
        err << "data error: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace epf
