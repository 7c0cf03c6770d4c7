#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "epf/common.hpp"

namespace epf {

/// Semantic role of a CSV column. Price and the fundamentals are hourly;
/// the four commodities are daily closing prices.
enum class Role { Price, Solar, WindOn, WindOff, Load, Oil, Coal, Eua, NGas };

inline constexpr std::array<Role, 5> kHourlyRoles{Role::Price, Role::Solar, Role::WindOn, Role::WindOff, Role::Load};
inline constexpr std::array<Role, 4> kCommodityRoles{Role::Oil, Role::Coal, Role::Eua, Role::NGas};

bool is_hourly(Role role);
std::string role_name(Role role);
Role role_from_name(const std::string& name);

enum class DstRule { None, EU };

/// Bidding-zone description. Persisted as JSON:
///
///   {
///     "zone_id": "DE-LU",
///     "has_wind_offshore": true,
///     "timestamp_column": "timestamp",
///     "dst_rule": "eu",            // "eu" (last Sunday of March/October) or "none"
///     "dst_hour": 2,               // local hour skipped in spring / repeated in autumn
///     "columns": {"price": "...", "load": "...", "solar": "...", "wind_on": "...",
///                 "wind_off": "...", "oil": "...", "coal": "...", "eua": "...", "ngas": "..."},
///     "actual_columns": {"load": "load_actual", ...}   // optional regression-imputation pairs
///   }
struct ZoneConfig {
    std::string zone_id;
    bool has_wind_offshore = true;
    std::string timestamp_column = "timestamp";
    DstRule dst_rule = DstRule::EU;
    int dst_hour = 2;
    std::map<Role, std::string> columns;
    std::map<Role, std::string> actual_columns;

    /// Throws SchemaError unless every required role is mapped exactly once.
    void validate() const;
};

ZoneConfig zone_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ZoneConfig& config);
ZoneConfig load_zone_config(const std::filesystem::path& path);
/// Column names used by the synthetic generator and the cleaned-data writer.
ZoneConfig default_zone_config(const std::string& zone_id, bool has_wind_offshore);

struct MarketSeries {
    std::string zone_id;
    bool has_wind_offshore = true;
    std::vector<Date> days;
    HourlyGrid price;
    HourlyGrid solar;
    HourlyGrid wind_on;
    HourlyGrid wind_off;  // empty iff !has_wind_offshore
    HourlyGrid load;
    std::vector<double> oil;
    std::vector<double> coal;
    std::vector<double> eua;
    std::vector<double> ngas;

    std::size_t n_days() const { return days.size(); }

    HourlyGrid& hourly(Role role);
    const HourlyGrid& hourly(Role role) const;
    std::vector<double>& daily(Role role);
    const std::vector<double>& daily(Role role) const;

    std::size_t count_missing() const;
    /// Throws DataError when a structural invariant is broken.
    void check_invariants() const;
};

/// A second reading of the autumn DST hour, kept until normalization.
struct RepeatedHour {
    std::size_t day = 0;
    int hour = 0;
    std::map<Role, double> values;
    std::map<Role, double> actual_values;
};

/// Series as read from disk: missing cells are NaN, DST days not yet
/// normalized, plus the "actual" predictor columns used for imputation.
struct RawMarketSeries {
    MarketSeries series;
    std::map<Role, HourlyGrid> actuals;
    std::vector<RepeatedHour> repeats;
};

struct CleaningLog {
    std::size_t commodity_locf_fills = 0;
    std::size_t regression_fills = 0;
    std::size_t regression_fallbacks = 0;
    std::size_t hourly_locf_fills = 0;
    std::size_t dst_spring_days = 0;
    std::size_t dst_spring_cells = 0;
    std::size_t dst_fall_days = 0;
    std::size_t dst_fall_cells = 0;
    std::vector<std::string> warnings;

    std::size_t total_imputations() const;
    nlohmann::json to_json() const;
};

RawMarketSeries load_csv(const std::filesystem::path& path, const ZoneConfig& config);
RawMarketSeries parse_csv(std::istream& in, const ZoneConfig& config);

/// Last observation carried forward. Throws DataError when the first value is missing.
std::vector<double> impute_locf(std::span<const double> values);

struct RegressionImputation {
    std::vector<double> values;
    double intercept = 0.0;
    double slope = 0.0;
    std::size_t fills = 0;
    std::size_t fallbacks = 0;
};

/// Fills gaps in `target` with intercept + slope * predictor, fitted by least
/// squares on the complete pairs. Cells whose predictor is also missing fall
/// back to LOCF and are counted in `fallbacks`.
RegressionImputation impute_regression(std::span<const double> target, std::span<const double> predictor);

bool is_spring_dst_date(Date date, DstRule rule);
bool is_fall_dst_date(Date date, DstRule rule);

/// Spring: missing DST hour = mean of its neighbours. Autumn: duplicated hour
/// = average of the two readings. Leaves other days untouched.
RawMarketSeries normalize_dst(RawMarketSeries raw, const ZoneConfig& config, CleaningLog* log = nullptr);

struct CleanResult {
    MarketSeries series;
    CleaningLog log;
};

/// normalize_dst, then regression imputation for declared pairs, then LOCF for
/// commodities and any hourly cells still missing.
CleanResult clean(RawMarketSeries raw, const ZoneConfig& config);

struct CalendarDummies {
    int monday = 0;
    int saturday = 0;
    int sunday = 0;
};

CalendarDummies calendar_dummies(Date date);

/// Writes a complete series in the wide one-row-per-hour layout of
/// default_zone_config (timestamp column first).
void write_csv(const MarketSeries& series, const std::filesystem::path& path);

// --- synthetic market -------------------------------------------------------

struct SyntheticSpec {
    bool has_wind_offshore = true;
    /// Weight of the planted load x onshore-wind interaction (EUR/MWh per unit
    /// product of standardized deviations). Zero gives a purely linear market.
    double nonlinearity = 0.0;
    /// Standard deviation of the additive Gaussian price noise.
    double noise_scale = 2.0;
    Date start = Date{std::chrono::year{2019} / std::chrono::January / 7};
    std::string zone_id = "SYN";
};

/// Generating equation of a synthetic market, in raw (unstandardized) units.
/// coefficients[h] follows the reduced regressor order of the features module,
/// so for day d >= 7 and nonlinearity = noise = 0:
///   price[d][h] = intercept[h] + coefficients[h] . reduced_x(d, h).
struct SyntheticTruth {
    DayHours intercept{};
    std::array<std::vector<double>, kHours> coefficients;
    double nonlinearity = 0.0;
    double load_center = 0.0;
    double load_scale = 1.0;
    double wind_center = 0.0;
    double wind_scale = 1.0;
};

struct SyntheticMarket {
    MarketSeries series;
    SyntheticTruth truth;
};

SyntheticMarket generate_synthetic(std::size_t n_days, std::uint64_t seed, const SyntheticSpec& spec = {});

}  // namespace epf
