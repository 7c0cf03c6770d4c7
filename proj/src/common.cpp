#include "epf/common.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

namespace epf {

namespace {

int parse_int(std::string_view text, std::string_view whole) {
    int value = 0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end) {
        throw DataError("malformed date '" + std::string(whole) + "'");
    }
    return value;
}

}  // namespace

Date parse_date(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
        throw DataError("malformed date '" + std::string(text) + "'");
    }
    const int y = parse_int(text.substr(0, 4), text);
    const int m = parse_int(text.substr(5, 2), text);
    const int d = parse_int(text.substr(8, 2), text);
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                          std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) {
        throw DataError("invalid calendar date '" + std::string(text) + "'");
    }
    return std::chrono::sys_days{ymd};
}

std::string format_date(Date date) {
    const std::chrono::year_month_day ymd{date};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

unsigned iso_weekday(Date date) {
    return std::chrono::weekday{date}.iso_encoding();
}

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream) {
    std::uint64_t z = parent ^ (0x9E3779B97F4A7C15ULL * (stream + 1));
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

bool is_missing(double value) {
    return std::isnan(value);
}

}  // namespace epf
