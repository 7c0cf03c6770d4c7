#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace epf {

inline constexpr int kHours = 24;

using Date = std::chrono::sys_days;
using DayHours = std::array<double, kHours>;
using HourlyGrid = std::vector<DayHours>;

// Error taxonomy. The CLI maps each family onto a distinct exit code.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class UsageError : public Error {
  public:
    using Error::Error;
};

class SchemaError : public Error {
  public:
    using Error::Error;
};

class DataError : public Error {
  public:
    using Error::Error;
};

class ShapeError : public Error {
  public:
    using Error::Error;
};

class NumericalError : public Error {
  public:
    using Error::Error;
};

/// Parses "YYYY-MM-DD". Throws DataError on malformed or impossible dates.
Date parse_date(std::string_view text);
std::string format_date(Date date);

/// ISO weekday, Monday = 1 ... Sunday = 7.
unsigned iso_weekday(Date date);

/// Deterministic 64-bit mixer used to derive child seeds from a parent seed.
/// child = splitmix64(parent ^ (0x9E3779B97F4A7C15 * (stream + 1))).
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream);

bool is_missing(double value);
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

}  // namespace epf
