#include "epf/marketdata.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace epf {

namespace {

const std::map<Role, std::string>& role_names() {
    static const std::map<Role, std::string> names{
        {Role::Price, "price"}, {Role::Solar, "solar"}, {Role::WindOn, "wind_on"},
        {Role::WindOff, "wind_off"}, {Role::Load, "load"}, {Role::Oil, "oil"},
        {Role::Coal, "coal"}, {Role::Eua, "eua"}, {Role::NGas, "ngas"}};
    return names;
}

std::vector<Role> required_roles(bool has_wind_offshore) {
    std::vector<Role> roles{Role::Price, Role::Solar, Role::WindOn};
    if (has_wind_offshore) {
        roles.push_back(Role::WindOff);
    }
    roles.push_back(Role::Load);
    roles.insert(roles.end(), kCommodityRoles.begin(), kCommodityRoles.end());
    return roles;
}

std::string trim(std::string_view s) {
    auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '"'; };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return std::string(s);
}

std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> cells;
    std::string_view rest(line);
    while (true) {
        const auto comma = rest.find(',');
        cells.push_back(trim(rest.substr(0, comma)));
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
    }
    return cells;
}

double parse_cell(const std::string& cell) {
    if (cell.empty()) return kMissing;
    double value = 0.0;
    const auto* end = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(cell.data(), end, value);
    if (ec != std::errc{} || ptr != end || !std::isfinite(value)) return kMissing;
    return value;
}

struct Timestamp {
    Date date;
    int hour = 0;
};

// Accepts "YYYY-MM-DDTHH:MM[:SS][offset]" or a space separator. Local time.
Timestamp parse_timestamp(const std::string& text, std::size_t line) {
    if (text.size() < 13 || (text[10] != 'T' && text[10] != ' ')) {
        throw DataError("line " + std::to_string(line) + ": unparseable timestamp '" + text + "'");
    }
    Timestamp ts;
    try {
        ts.date = parse_date(std::string_view(text).substr(0, 10));
    } catch (const DataError&) {
        throw DataError("line " + std::to_string(line) + ": unparseable timestamp '" + text + "'");
    }
    int hour = -1;
    auto [ptr, ec] = std::from_chars(text.data() + 11, text.data() + 13, hour);
    if (ec != std::errc{} || ptr != text.data() + 13 || hour < 0 || hour > 23) {
        throw DataError("line " + std::to_string(line) + ": unparseable timestamp '" + text + "'");
    }
    ts.hour = hour;
    return ts;
}

Date last_sunday(int year, unsigned month) {
    using namespace std::chrono;
    const year_month_day_last last{std::chrono::year{year} / std::chrono::month{month} / std::chrono::last};
    const sys_days end{last};
    const unsigned back = (weekday{end}.iso_encoding()) % 7;  // Sunday -> 0
    return end - days{back};
}

HourlyGrid missing_grid(std::size_t n) {
    DayHours row;
    row.fill(kMissing);
    return HourlyGrid(n, row);
}

std::vector<double> flatten(const HourlyGrid& grid) {
    std::vector<double> out;
    out.reserve(grid.size() * kHours);
    for (const auto& day : grid) out.insert(out.end(), day.begin(), day.end());
    return out;
}

void unflatten(std::span<const double> flat, HourlyGrid& grid) {
    for (std::size_t d = 0; d < grid.size(); ++d) {
        for (int h = 0; h < kHours; ++h) grid[d][h] = flat[d * kHours + h];
    }
}

std::size_t count_nan(std::span<const double> v) {
    return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [](double x) { return std::isnan(x); }));
}

}  // namespace

bool is_hourly(Role role) {
    return std::find(kHourlyRoles.begin(), kHourlyRoles.end(), role) != kHourlyRoles.end();
}

std::string role_name(Role role) {
    return role_names().at(role);
}

Role role_from_name(const std::string& name) {
    for (const auto& [role, n] : role_names()) {
        if (n == name) return role;
    }
    throw SchemaError("unknown column role '" + name + "'");
}

void ZoneConfig::validate() const {
    if (zone_id.empty()) throw SchemaError("zone config: zone_id is empty");
    if (dst_hour < 1 || dst_hour > 22) throw SchemaError("zone config: dst_hour must lie in [1, 22]");
    for (Role role : required_roles(has_wind_offshore)) {
        if (!columns.contains(role)) throw SchemaError("zone config: role '" + role_name(role) + "' is not mapped");
    }
    if (!has_wind_offshore && columns.contains(Role::WindOff)) {
        throw SchemaError("zone config: wind_off mapped but has_wind_offshore is false");
    }
    std::set<std::string> seen{timestamp_column};
    for (const auto& [role, column] : columns) {
        if (!seen.insert(column).second) {
            throw SchemaError("zone config: column '" + column + "' mapped more than once");
        }
    }
    for (const auto& [role, column] : actual_columns) {
        if (!is_hourly(role) || role == Role::Price) {
            throw SchemaError("zone config: actual column for '" + role_name(role) + "' is not an hourly fundamental");
        }
        if (!columns.contains(role)) {
            throw SchemaError("zone config: actual column declared for unmapped role '" + role_name(role) + "'");
        }
        if (!seen.insert(column).second) {
            throw SchemaError("zone config: column '" + column + "' mapped more than once");
        }
    }
}

ZoneConfig zone_config_from_json(const nlohmann::json& j) {
    ZoneConfig c;
    try {
        c.zone_id = j.at("zone_id").get<std::string>();
        c.has_wind_offshore = j.value("has_wind_offshore", true);
        c.timestamp_column = j.value("timestamp_column", std::string("timestamp"));
        const auto rule = j.value("dst_rule", std::string("eu"));
        if (rule == "eu") {
            c.dst_rule = DstRule::EU;
        } else if (rule == "none") {
            c.dst_rule = DstRule::None;
        } else {
            throw SchemaError("zone config: unknown dst_rule '" + rule + "'");
        }
        c.dst_hour = j.value("dst_hour", 2);
        for (const auto& [name, column] : j.at("columns").items()) {
            c.columns[role_from_name(name)] = column.get<std::string>();
        }
        if (j.contains("actual_columns")) {
            for (const auto& [name, column] : j.at("actual_columns").items()) {
                c.actual_columns[role_from_name(name)] = column.get<std::string>();
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("zone config: ") + e.what());
    }
    c.validate();
    return c;
}

nlohmann::json to_json(const ZoneConfig& c) {
    nlohmann::json j;
    j["zone_id"] = c.zone_id;
    j["has_wind_offshore"] = c.has_wind_offshore;
    j["timestamp_column"] = c.timestamp_column;
    j["dst_rule"] = c.dst_rule == DstRule::EU ? "eu" : "none";
    j["dst_hour"] = c.dst_hour;
    j["columns"] = nlohmann::json::object();
    for (const auto& [role, column] : c.columns) j["columns"][role_name(role)] = column;
    if (!c.actual_columns.empty()) {
        j["actual_columns"] = nlohmann::json::object();
        for (const auto& [role, column] : c.actual_columns) j["actual_columns"][role_name(role)] = column;
    }
    return j;
}

ZoneConfig load_zone_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open zone config '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("zone config '" + path.string() + "': " + e.what());
    }
    return zone_config_from_json(j);
}

ZoneConfig default_zone_config(const std::string& zone_id, bool has_wind_offshore) {
    ZoneConfig c;
    c.zone_id = zone_id;
    c.has_wind_offshore = has_wind_offshore;
    c.dst_rule = DstRule::None;
    for (Role role : required_roles(has_wind_offshore)) c.columns[role] = role_name(role);
    return c;
}

// --- MarketSeries -------------------------------------------------------------

HourlyGrid& MarketSeries::hourly(Role role) {
    return const_cast<HourlyGrid&>(std::as_const(*this).hourly(role));
}

const HourlyGrid& MarketSeries::hourly(Role role) const {
    switch (role) {
        case Role::Price: return price;
        case Role::Solar: return solar;
        case Role::WindOn: return wind_on;
        case Role::WindOff: return wind_off;
        case Role::Load: return load;
        default: throw std::invalid_argument("role '" + role_name(role) + "' is not hourly");
    }
}

std::vector<double>& MarketSeries::daily(Role role) {
    return const_cast<std::vector<double>&>(std::as_const(*this).daily(role));
}

const std::vector<double>& MarketSeries::daily(Role role) const {
    switch (role) {
        case Role::Oil: return oil;
        case Role::Coal: return coal;
        case Role::Eua: return eua;
        case Role::NGas: return ngas;
        default: throw std::invalid_argument("role '" + role_name(role) + "' is not daily");
    }
}

std::size_t MarketSeries::count_missing() const {
    std::size_t n = 0;
    for (Role role : kHourlyRoles) {
        for (const auto& day : hourly(role)) n += count_nan(day);
    }
    for (Role role : kCommodityRoles) n += count_nan(daily(role));
    return n;
}

void MarketSeries::check_invariants() const {
    const std::size_t n = days.size();
    for (std::size_t d = 1; d < n; ++d) {
        if (days[d] != days[d - 1] + std::chrono::days{1}) {
            throw DataError("days not consecutive at " + format_date(days[d]));
        }
    }
    for (Role role : kHourlyRoles) {
        const std::size_t expect = (role == Role::WindOff && !has_wind_offshore) ? 0 : n;
        if (hourly(role).size() != expect) throw DataError(role_name(role) + " has wrong day count");
    }
    for (Role role : kCommodityRoles) {
        if (daily(role).size() != n) throw DataError(role_name(role) + " has wrong day count");
    }
}

std::size_t CleaningLog::total_imputations() const {
    return commodity_locf_fills + regression_fills + regression_fallbacks + hourly_locf_fills + dst_spring_cells +
           dst_fall_cells;
}

nlohmann::json CleaningLog::to_json() const {
    return nlohmann::json{{"commodity_locf_fills", commodity_locf_fills},
                          {"regression_fills", regression_fills},
                          {"regression_fallbacks", regression_fallbacks},
                          {"hourly_locf_fills", hourly_locf_fills},
                          {"dst_spring_days", dst_spring_days},
                          {"dst_spring_cells", dst_spring_cells},
                          {"dst_fall_days", dst_fall_days},
                          {"dst_fall_cells", dst_fall_cells},
                          {"warnings", warnings}};
}

// --- CSV ingestion ------------------------------------------------------------

RawMarketSeries load_csv(const std::filesystem::path& path, const ZoneConfig& config) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open data file '" + path.string() + "'");
    return parse_csv(in, config);
}

RawMarketSeries parse_csv(std::istream& in, const ZoneConfig& config) {
    config.validate();
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("data file is empty");
    const auto header = split_row(line);
    auto column_index = [&](const std::string& name) -> std::size_t {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw SchemaError("missing mapped column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t ts_col = column_index(config.timestamp_column);
    std::map<Role, std::size_t> role_col;
    for (const auto& [role, name] : config.columns) role_col[role] = column_index(name);
    std::map<Role, std::size_t> actual_col;
    for (const auto& [role, name] : config.actual_columns) actual_col[role] = column_index(name);

    struct Row {
        Timestamp ts;
        std::size_t line;
        std::map<Role, double> values;
        std::map<Role, double> actual;
    };
    std::vector<Row> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split_row(line);
        if (cells.size() != header.size()) {
            throw DataError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                            " cells, found " + std::to_string(cells.size()));
        }
        Row row{parse_timestamp(cells[ts_col], line_no), line_no, {}, {}};
        for (const auto& [role, idx] : role_col) row.values[role] = parse_cell(cells[idx]);
        for (const auto& [role, idx] : actual_col) row.actual[role] = parse_cell(cells[idx]);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DataError("data file has no rows");

    auto [lo, hi] = std::minmax_element(rows.begin(), rows.end(),
                                        [](const Row& a, const Row& b) { return a.ts.date < b.ts.date; });
    const Date first = lo->ts.date;
    const std::size_t n_days = static_cast<std::size_t>((hi->ts.date - first).count()) + 1;

    RawMarketSeries raw;
    MarketSeries& s = raw.series;
    s.zone_id = config.zone_id;
    s.has_wind_offshore = config.has_wind_offshore;
    for (std::size_t d = 0; d < n_days; ++d) s.days.push_back(first + std::chrono::days{static_cast<int>(d)});
    for (Role role : kHourlyRoles) {
        if (role == Role::WindOff && !config.has_wind_offshore) continue;
        s.hourly(role) = missing_grid(n_days);
    }
    for (Role role : kCommodityRoles) s.daily(role).assign(n_days, kMissing);
    for (const auto& [role, name] : config.actual_columns) raw.actuals[role] = missing_grid(n_days);

    std::vector<std::array<bool, kHours>> seen(n_days, std::array<bool, kHours>{});
    for (const Row& row : rows) {
        const auto d = static_cast<std::size_t>((row.ts.date - first).count());
        const int h = row.ts.hour;
        if (seen[d][h]) {
            const bool fall_slot = is_fall_dst_date(row.ts.date, config.dst_rule) && h == config.dst_hour;
            const bool already = std::any_of(raw.repeats.begin(), raw.repeats.end(),
                                             [&](const RepeatedHour& r) { return r.day == d && r.hour == h; });
            if (!fall_slot || already) {
                throw DataError("line " + std::to_string(row.line) + ": duplicate timestamp " +
                                format_date(row.ts.date) + " hour " + std::to_string(h));
            }
            RepeatedHour rep{d, h, {}, row.actual};
            for (const auto& [role, v] : row.values) {
                if (is_hourly(role)) rep.values[role] = v;
            }
            raw.repeats.push_back(std::move(rep));
            continue;
        }
        seen[d][h] = true;
        for (const auto& [role, v] : row.values) {
            if (is_hourly(role)) {
                s.hourly(role)[d][h] = v;
            } else if (is_missing(s.daily(role)[d])) {
                s.daily(role)[d] = v;
            }
        }
        for (const auto& [role, v] : row.actual) raw.actuals[role][d][h] = v;
    }
    return raw;
}

// --- imputation ---------------------------------------------------------------

std::vector<double> impute_locf(std::span<const double> values) {
    std::vector<double> out(values.begin(), values.end());
    if (out.empty()) return out;
    if (is_missing(out.front())) throw DataError("LOCF: leading value is missing, nothing to carry forward");
    for (std::size_t i = 1; i < out.size(); ++i) {
        if (is_missing(out[i])) out[i] = out[i - 1];
    }
    return out;
}

RegressionImputation impute_regression(std::span<const double> target, std::span<const double> predictor) {
    if (target.size() != predictor.size()) throw ShapeError("impute_regression: target/predictor length mismatch");
    double sx = 0.0, sy = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        if (!is_missing(target[i]) && !is_missing(predictor[i])) {
            sx += predictor[i];
            sy += target[i];
            ++n;
        }
    }
    if (n < 2) throw DataError("impute_regression: fewer than two complete pairs");
    const double mx = sx / static_cast<double>(n);
    const double my = sy / static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        if (!is_missing(target[i]) && !is_missing(predictor[i])) {
            sxx += (predictor[i] - mx) * (predictor[i] - mx);
            sxy += (predictor[i] - mx) * (target[i] - my);
        }
    }
    RegressionImputation r;
    r.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    r.intercept = my - r.slope * mx;
    r.values.assign(target.begin(), target.end());
    for (std::size_t i = 0; i < r.values.size(); ++i) {
        if (!is_missing(r.values[i])) continue;
        if (!is_missing(predictor[i])) {
            r.values[i] = r.intercept + r.slope * predictor[i];
            ++r.fills;
        } else {
            if (i == 0 || is_missing(r.values[i - 1])) {
                throw DataError("impute_regression: no predictor and no predecessor at position " + std::to_string(i));
            }
            r.values[i] = r.values[i - 1];
            ++r.fallbacks;
        }
    }
    return r;
}

// --- DST ----------------------------------------------------------------------

bool is_spring_dst_date(Date date, DstRule rule) {
    if (rule != DstRule::EU) return false;
    const std::chrono::year_month_day ymd{date};
    return date == last_sunday(static_cast<int>(ymd.year()), 3);
}

bool is_fall_dst_date(Date date, DstRule rule) {
    if (rule != DstRule::EU) return false;
    const std::chrono::year_month_day ymd{date};
    return date == last_sunday(static_cast<int>(ymd.year()), 10);
}

RawMarketSeries normalize_dst(RawMarketSeries raw, const ZoneConfig& config, CleaningLog* log) {
    MarketSeries& s = raw.series;
    const int h = config.dst_hour;
    std::vector<HourlyGrid*> grids;
    std::vector<std::string> names;
    for (Role role : kHourlyRoles) {
        if (role == Role::WindOff && !s.has_wind_offshore) continue;
        grids.push_back(&s.hourly(role));
        names.push_back(role_name(role));
    }
    for (auto& [role, grid] : raw.actuals) {
        grids.push_back(&grid);
        names.push_back(role_name(role) + " (actual)");
    }

    for (std::size_t d = 0; d < s.n_days(); ++d) {
        if (!is_spring_dst_date(s.days[d], config.dst_rule)) continue;
        std::size_t filled = 0;
        for (std::size_t g = 0; g < grids.size(); ++g) {
            auto& row = (*grids[g])[d];
            if (!is_missing(row[h])) continue;
            if (is_missing(row[h - 1]) || is_missing(row[h + 1])) {
                throw DataError("DST " + format_date(s.days[d]) + ": " + names[g] +
                                " missing next to the skipped hour, cannot interpolate");
            }
            row[h] = 0.5 * (row[h - 1] + row[h + 1]);
            ++filled;
        }
        if (log != nullptr && filled > 0) {
            ++log->dst_spring_days;
            log->dst_spring_cells += filled;
        }
    }

    std::set<std::size_t> fall_days;
    for (const RepeatedHour& rep : raw.repeats) {
        std::size_t merged = 0;
        auto merge = [&](double& slot, double second) {
            if (is_missing(second)) return;
            slot = is_missing(slot) ? second : 0.5 * (slot + second);
            ++merged;
        };
        for (const auto& [role, v] : rep.values) {
            if (role == Role::WindOff && !s.has_wind_offshore) continue;
            merge(s.hourly(role)[rep.day][rep.hour], v);
        }
        for (const auto& [role, v] : rep.actual_values) merge(raw.actuals.at(role)[rep.day][rep.hour], v);
        if (log != nullptr) {
            fall_days.insert(rep.day);
            log->dst_fall_cells += merged;
        }
    }
    if (log != nullptr) log->dst_fall_days += fall_days.size();
    raw.repeats.clear();
    return raw;
}

CleanResult clean(RawMarketSeries raw, const ZoneConfig& config) {
    CleanResult result;
    CleaningLog& log = result.log;
    raw = normalize_dst(std::move(raw), config, &log);
    MarketSeries& s = raw.series;

    for (const auto& [role, actual] : raw.actuals) {
        HourlyGrid& grid = s.hourly(role);
        const auto target = flatten(grid);
        if (count_nan(target) == 0) continue;
        const auto imputed = impute_regression(target, flatten(actual));
        unflatten(imputed.values, grid);
        log.regression_fills += imputed.fills;
        log.regression_fallbacks += imputed.fallbacks;
        if (imputed.fallbacks > 0) {
            log.warnings.push_back(role_name(role) + ": " + std::to_string(imputed.fallbacks) +
                                   " cells lacked an actual value and were carried forward");
        }
    }

    for (Role role : kHourlyRoles) {
        if (role == Role::WindOff && !s.has_wind_offshore) continue;
        HourlyGrid& grid = s.hourly(role);
        const auto flat = flatten(grid);
        const std::size_t gaps = count_nan(flat);
        if (gaps == 0) continue;
        unflatten(impute_locf(flat), grid);
        log.hourly_locf_fills += gaps;
        log.warnings.push_back(role_name(role) + ": " + std::to_string(gaps) + " hourly cells carried forward");
    }

    for (Role role : kCommodityRoles) {
        auto& series = s.daily(role);
        log.commodity_locf_fills += count_nan(series);
        series = impute_locf(series);
    }

    s.check_invariants();
    if (s.count_missing() != 0) throw DataError("clean: missing cells remain");
    result.series = std::move(s);
    return result;
}

CalendarDummies calendar_dummies(Date date) {
    const unsigned wd = iso_weekday(date);
    return CalendarDummies{wd == 1 ? 1 : 0, wd == 6 ? 1 : 0, wd == 7 ? 1 : 0};
}

void write_csv(const MarketSeries& s, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw UsageError("cannot write '" + path.string() + "'");
    const ZoneConfig layout = default_zone_config(s.zone_id, s.has_wind_offshore);
    std::vector<Role> roles;
    out << layout.timestamp_column;
    for (const auto& [role, column] : layout.columns) {
        roles.push_back(role);
        out << ',' << column;
    }
    out << '\n';
    char buf[64];
    for (std::size_t d = 0; d < s.n_days(); ++d) {
        const std::string date = format_date(s.days[d]);
        for (int h = 0; h < kHours; ++h) {
            std::snprintf(buf, sizeof buf, "%sT%02d:00", date.c_str(), h);
            out << buf;
            for (Role role : roles) {
                const double v = is_hourly(role) ? s.hourly(role)[d][h] : s.daily(role)[d];
                std::snprintf(buf, sizeof buf, "%.17g", v);
                out << ',' << buf;
            }
            out << '\n';
        }
    }
}

// --- synthetic market ---------------------------------------------------------

SyntheticMarket generate_synthetic(std::size_t n_days, std::uint64_t seed, const SyntheticSpec& spec) {
    if (n_days < 30) throw UsageError("generate_synthetic: n_days must be at least 30");
    constexpr std::size_t kBurnIn = 14;
    constexpr double kTwoPi = 2.0 * std::numbers::pi;
    const std::size_t total = n_days + kBurnIn;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    HourlyGrid price(total), solar(total), wind_on(total), wind_off(total), load(total);
    std::vector<double> oil(total), coal(total), eua(total), ngas(total);
    std::vector<Date> dates(total);

    double load_ar = 0.0, wind_ar = 0.0;
    double x_oil = 70.0, x_coal = 100.0, x_eua = 60.0, x_ngas = 30.0;
    for (std::size_t t = 0; t < total; ++t) {
        dates[t] = spec.start - std::chrono::days{static_cast<int>(kBurnIn)} + std::chrono::days{static_cast<int>(t)};
        const std::chrono::year_month_day ymd{dates[t]};
        const auto jan1 = std::chrono::sys_days{ymd.year() / std::chrono::January / 1};
        const double phase = kTwoPi * static_cast<double>((dates[t] - jan1).count()) / 365.25;
        const CalendarDummies cal = calendar_dummies(dates[t]);

        load_ar = 0.7 * load_ar + gauss(rng);
        wind_ar = 0.8 * wind_ar + 0.6 * gauss(rng);
        const double cloud = 0.25 + 0.75 * unif(rng);
        const double season = 0.55 - 0.35 * std::cos(phase);
        const double base_load = 52000.0 + 6000.0 * std::cos(phase) - 3500.0 * cal.saturday - 6000.0 * cal.sunday +
                                 1500.0 * load_ar;
        for (int h = 0; h < kHours; ++h) {
            const double profile = (h >= 5 && h <= 22) ? std::sin(std::numbers::pi * (h - 5) / 17.0) : 0.0;
            load[t][h] = base_load + 9000.0 * profile + 600.0 * gauss(rng);
            const double daylight = (h > 6 && h < 18) ? std::sin(std::numbers::pi * (h - 6) / 12.0) : 0.0;
            solar[t][h] = daylight * (40000.0 * season * cloud + 200.0 * std::abs(gauss(rng)));
            const double latent = wind_ar + 0.3 * std::cos(phase) + 0.15 * gauss(rng);
            wind_on[t][h] = 1000.0 + 25000.0 / (1.0 + std::exp(-latent));
            wind_off[t][h] = std::max(0.0, 0.22 * wind_on[t][h] + 300.0 * gauss(rng));
        }
        x_oil = 70.0 + 0.97 * (x_oil - 70.0) + 1.5 * gauss(rng);
        x_coal = 100.0 + 0.97 * (x_coal - 100.0) + 2.5 * gauss(rng);
        x_eua = 60.0 + 0.97 * (x_eua - 60.0) + 1.2 * gauss(rng);
        x_ngas = 30.0 + 0.97 * (x_ngas - 30.0) + 1.0 * gauss(rng);
        oil[t] = x_oil;
        coal[t] = x_coal;
        eua[t] = x_eua;
        ngas[t] = x_ngas;
    }

    SyntheticTruth truth;
    truth.nonlinearity = spec.nonlinearity;
    truth.load_center = 55000.0;
    truth.load_scale = 6000.0;
    truth.wind_center = 13500.0;
    truth.wind_scale = 6000.0;

    constexpr double a1 = 0.45, a2 = 0.15, a7 = 0.15, a23 = 0.05;
    for (int h = 0; h < kHours; ++h) {
        const double swing = 1.0 + 0.25 * std::sin(kTwoPi * h / 24.0);
        const double b_solar = -0.00035 * swing;
        const double b_won = -0.0005;
        const double b_woff = -0.0004;
        const double b_load = 0.0012 * swing;
        const double daylight = (h > 6 && h < 18) ? std::sin(std::numbers::pi * (h - 6) / 12.0) : 0.0;
        // Centers the exogenous block so the stationary mean price sits near 50.
        double offset = b_solar * 12000.0 * daylight + b_won * 13500.0 + b_load * 55000.0 + 0.05 * 70.0 +
                        0.04 * 100.0 + 0.12 * 60.0 + 0.35 * 30.0;
        if (spec.has_wind_offshore) offset += b_woff * 3000.0;
        truth.intercept[h] = 10.0 + 2.0 * std::sin(kTwoPi * (h - 6) / 24.0) - offset;

        auto& c = truth.coefficients[h];
        c = {h == 23 ? a1 + a23 : a1, a2, a7};
        if (h != 23) c.push_back(a23);
        c.push_back(b_solar);
        c.push_back(b_won);
        if (spec.has_wind_offshore) c.push_back(b_woff);
        c.push_back(b_load);
        c.insert(c.end(), {0.05, 0.04, 0.12, 0.35, 1.5, -3.0, -5.0});
    }

    for (std::size_t t = 0; t < total; ++t) {
        if (t < 7) {
            for (int h = 0; h < kHours; ++h) price[t][h] = 50.0 + 5.0 * gauss(rng);
            continue;
        }
        const CalendarDummies cal = calendar_dummies(dates[t]);
        const std::array<double, 4> com{oil[t - 2], coal[t - 2], eua[t - 2], ngas[t - 2]};
        for (int h = 0; h < kHours; ++h) {
            std::vector<double> x{price[t - 1][h], price[t - 2][h], price[t - 7][h]};
            if (h != 23) x.push_back(price[t - 1][23]);
            x.push_back(solar[t][h]);
            x.push_back(wind_on[t][h]);
            if (spec.has_wind_offshore) x.push_back(wind_off[t][h]);
            x.push_back(load[t][h]);
            x.insert(x.end(), com.begin(), com.end());
            x.insert(x.end(), {double(cal.monday), double(cal.saturday), double(cal.sunday)});
            double p = truth.intercept[h];
            const auto& c = truth.coefficients[h];
            for (std::size_t j = 0; j < c.size(); ++j) p += c[j] * x[j];
            const double zl = (load[t][h] - truth.load_center) / truth.load_scale;
            const double zw = (wind_on[t][h] - truth.wind_center) / truth.wind_scale;
            p += spec.nonlinearity * zl * zw;
            p += spec.noise_scale * gauss(rng);
            price[t][h] = p;
        }
    }

    SyntheticMarket market;
    market.truth = std::move(truth);
    MarketSeries& s = market.series;
    s.zone_id = spec.zone_id;
    s.has_wind_offshore = spec.has_wind_offshore;
    const auto keep = [&](auto& v) { return std::vector(v.begin() + kBurnIn, v.end()); };
    s.days = keep(dates);
    s.price = keep(price);
    s.solar = keep(solar);
    s.wind_on = keep(wind_on);
    if (spec.has_wind_offshore) s.wind_off = keep(wind_off);
    s.load = keep(load);
    s.oil = keep(oil);
    s.coal = keep(coal);
    s.eua = keep(eua);
    s.ngas = keep(ngas);
    return market;
}

}  // namespace epf
