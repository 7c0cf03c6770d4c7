#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "epf/common.hpp"
#include "epf/features.hpp"
#include "epf/marketdata.hpp"

namespace epf::test {

// Small generator wrapper for property tests.
class Gen {
  public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
    double normal(double mu = 0.0, double sd = 1.0) { return std::normal_distribution<double>(mu, sd)(rng_); }
    std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
    bool coin(double p = 0.5) { return uniform(0.0, 1.0) < p; }
    std::mt19937_64& engine() { return rng_; }

  private:
    std::mt19937_64 rng_;
};

inline Date day(int y, unsigned m, unsigned d) {
    return Date{std::chrono::year{y} / std::chrono::month{m} / std::chrono::day{d}};
}

// Wide CSV in the default column layout. `value(role, day_index, hour)` supplies cells.
inline std::string make_csv(Date first, std::size_t n_days, bool offshore,
                            const std::function<std::string(Role, std::size_t, int)>& value) {
    std::vector<Role> roles{Role::Price, Role::Solar, Role::WindOn};
    if (offshore) roles.push_back(Role::WindOff);
    roles.insert(roles.end(), {Role::Load, Role::Oil, Role::Coal, Role::Eua, Role::NGas});
    std::ostringstream out;
    out << "timestamp";
    for (Role r : roles) out << ',' << role_name(r);
    out << '\n';
    for (std::size_t d = 0; d < n_days; ++d) {
        const std::string date = format_date(first + std::chrono::days{static_cast<int>(d)});
        for (int h = 0; h < kHours; ++h) {
            char ts[32];
            std::snprintf(ts, sizeof ts, "%sT%02d:00", date.c_str(), h);
            out << ts;
            for (Role r : roles) out << ',' << value(r, d, h);
            out << '\n';
        }
    }
    return out.str();
}

inline std::string default_cell(Role r, std::size_t d, int h) {
    const double base = is_hourly(r) ? 10.0 * static_cast<double>(static_cast<int>(r) + 1) + h : 50.0 + static_cast<double>(r);
    std::ostringstream s;
    s << base + static_cast<double>(d);
    return s.str();
}

inline SyntheticMarket small_market(std::size_t n_days = 120, std::uint64_t seed = 11, double nonlinearity = 0.0,
                                    bool offshore = true) {
    SyntheticSpec spec;
    spec.nonlinearity = nonlinearity;
    spec.has_wind_offshore = offshore;
    return generate_synthetic(n_days, seed, spec);
}

class TempDir {
  public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("epf-" + tag + "-" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

  private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace epf::test
