#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "epf/common.hpp"
#include "epf/marketdata.hpp"

namespace epf {

/// Column layout of the design vectors.
///
/// Reduced vector for hour h (skip input of the reduced architectures):
///   [P(d-1,h), P(d-2,h), P(d-7,h), P(d-1,23), Solar(d,h), WindOn(d,h), WindOff(d,h),
///    Load(d,h), Oil(d-2), Coal(d-2), EUA(d-2), NGas(d-2), Mon(d), Sat(d), Sun(d)]
/// The P(d-1,23) slot is absent for h = 23 and WindOff is absent without
/// offshore wind, giving 15/14 or 14/13 columns.
///
/// Full vector (shared by all hours):
///   P(d-1,0..23), P(d-2,0..23), P(d-7,0..23), Solar(d,0..23), WindOn(d,0..23),
///   WindOff(d,0..23), Load(d,0..23), Oil, Coal, EUA, NGas (all d-2), Mon, Sat, Sun
/// giving 175 columns, or 151 without the 24 offshore wind columns.
class FeatureLayout {
  public:
    explicit FeatureLayout(bool has_wind_offshore) : has_wind_offshore_(has_wind_offshore) {}

    bool has_wind_offshore() const { return has_wind_offshore_; }
    std::size_t n_fundamentals() const { return has_wind_offshore_ ? 4 : 3; }
    std::size_t full_width() const { return 72 + 24 * n_fundamentals() + 4 + 3; }
    std::size_t reduced_width(int hour) const { return (hour == 23 ? 3 : 4) + n_fundamentals() + 4 + 3; }

    /// Position in the full vector of reduced slot `slot` of hour `hour`.
    std::size_t full_index(int hour, std::size_t slot) const;
    std::string full_name(std::size_t index) const;
    std::string reduced_name(int hour, std::size_t slot) const;
    /// True for the three calendar dummy columns of the full vector.
    bool is_dummy(std::size_t full_index) const { return full_index + 3 >= full_width(); }

    bool operator==(const FeatureLayout&) const = default;

  private:
    bool has_wind_offshore_;
};

struct DayDesign {
    Date date{};
    std::array<std::vector<double>, kHours> reduced_x;
    std::vector<double> full_x;
    DayHours targets{};
    bool valid = false;
};

/// One DayDesign per day of the series. The first seven days lack the weekly
/// price lag and come back with valid = false and empty regressor vectors.
std::vector<DayDesign> build_designs(const MarketSeries& series, const ZoneConfig& config);
std::vector<DayDesign> build_designs(const MarketSeries& series);

/// Population moments of the full-vector columns over a window. Reduced
/// vectors are scaled with the statistics of the full column they alias, so
/// both views of a day stay value-consistent after standardization.
struct Scaler {
    std::vector<double> mean;
    std::vector<double> std;
    FeatureLayout layout{true};
    Date window_first{};
    Date window_last{};
    std::size_t window_days = 0;
};

Scaler fit_scaler(std::span<const DayDesign> window);
DayDesign transform(const DayDesign& design, const Scaler& scaler);
DayDesign inverse_transform(const DayDesign& design, const Scaler& scaler);
std::vector<DayDesign> transform_all(std::span<const DayDesign> designs, const Scaler& scaler);

/// Index -> regressor name listing, one line per full-vector column followed
/// by the reduced layout of hours 0 and 23.
void write_feature_map(const FeatureLayout& layout, const std::filesystem::path& path);

/// Index of the design dated `date`; throws DataError if absent.
std::size_t find_design(std::span<const DayDesign> designs, Date date);

}  // namespace epf
