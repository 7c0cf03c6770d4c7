#include "epf/features.hpp"

#include <cmath>
#include <fstream>

namespace epf {

namespace {

const char* const kCommodityNames[4] = {"Oil(d-2)", "Coal(d-2)", "EUA(d-2)", "NGas(d-2)"};
const char* const kCalendarNames[3] = {"Mon(d)", "Sat(d)", "Sun(d)"};

std::vector<std::string> fundamental_names(bool offshore) {
    if (offshore) return {"Solar", "WindOn", "WindOff", "Load"};
    return {"Solar", "WindOn", "Load"};
}

std::vector<const HourlyGrid*> fundamental_grids(const MarketSeries& s) {
    std::vector<const HourlyGrid*> g{&s.solar, &s.wind_on};
    if (s.has_wind_offshore) g.push_back(&s.wind_off);
    g.push_back(&s.load);
    return g;
}

void check_layout(const DayDesign& design, const Scaler& scaler) {
    const FeatureLayout& layout = scaler.layout;
    if (scaler.mean.size() != layout.full_width() || design.full_x.size() != layout.full_width()) {
        throw ShapeError("transform: full vector width does not match the scaler layout");
    }
    for (int h = 0; h < kHours; ++h) {
        if (design.reduced_x[h].size() != layout.reduced_width(h)) {
            throw ShapeError("transform: reduced vector width does not match the scaler layout");
        }
    }
}

}  // namespace

std::size_t FeatureLayout::full_index(int hour, std::size_t slot) const {
    if (hour < 0 || hour >= kHours || slot >= reduced_width(hour)) {
        throw std::out_of_range("FeatureLayout::full_index");
    }
    const std::size_t h = static_cast<std::size_t>(hour);
    const std::size_t lag_slots = hour == 23 ? 3 : 4;
    if (slot < 3) return 24 * slot + h;
    if (slot < lag_slots) return 23;  // P(d-1,23)
    slot -= lag_slots;
    if (slot < n_fundamentals()) return 72 + 24 * slot + h;
    slot -= n_fundamentals();
    return 72 + 24 * n_fundamentals() + slot;
}

std::string FeatureLayout::full_name(std::size_t index) const {
    if (index >= full_width()) throw std::out_of_range("FeatureLayout::full_name");
    static const char* const lags[3] = {"P(d-1,", "P(d-2,", "P(d-7,"};
    if (index < 72) return lags[index / 24] + std::to_string(index % 24) + ")";
    index -= 72;
    const auto fun = fundamental_names(has_wind_offshore_);
    if (index < 24 * fun.size()) return fun[index / 24] + "(d," + std::to_string(index % 24) + ")";
    index -= 24 * fun.size();
    if (index < 4) return kCommodityNames[index];
    return kCalendarNames[index - 4];
}

std::string FeatureLayout::reduced_name(int hour, std::size_t slot) const {
    return full_name(full_index(hour, slot));
}

std::vector<DayDesign> build_designs(const MarketSeries& series, const ZoneConfig& config) {
    if (config.has_wind_offshore != series.has_wind_offshore) {
        throw SchemaError("build_designs: zone config and series disagree on offshore wind");
    }
    return build_designs(series);
}

std::vector<DayDesign> build_designs(const MarketSeries& s) {
    if (s.n_days() < 8) throw DataError("build_designs: need at least 8 days, got " + std::to_string(s.n_days()));
    s.check_invariants();
    const FeatureLayout layout(s.has_wind_offshore);
    const auto fundamentals = fundamental_grids(s);
    const std::size_t nf = fundamentals.size();

    std::vector<DayDesign> out(s.n_days());
    for (std::size_t d = 0; d < s.n_days(); ++d) {
        DayDesign& dd = out[d];
        dd.date = s.days[d];
        dd.targets = s.price[d];
        if (d < 7) continue;
        dd.valid = true;
        const CalendarDummies cal = calendar_dummies(s.days[d]);
        const std::array<double, 4> com{s.oil[d - 2], s.coal[d - 2], s.eua[d - 2], s.ngas[d - 2]};
        const std::array<double, 3> cal_v{double(cal.monday), double(cal.saturday), double(cal.sunday)};

        auto& full = dd.full_x;
        full.reserve(layout.full_width());
        for (std::size_t lag : {1, 2, 7}) full.insert(full.end(), s.price[d - lag].begin(), s.price[d - lag].end());
        for (const HourlyGrid* g : fundamentals) full.insert(full.end(), (*g)[d].begin(), (*g)[d].end());
        full.insert(full.end(), com.begin(), com.end());
        full.insert(full.end(), cal_v.begin(), cal_v.end());

        for (int h = 0; h < kHours; ++h) {
            auto& x = dd.reduced_x[h];
            x.reserve(layout.reduced_width(h));
            x = {s.price[d - 1][h], s.price[d - 2][h], s.price[d - 7][h]};
            if (h != 23) x.push_back(s.price[d - 1][23]);
            for (std::size_t f = 0; f < nf; ++f) x.push_back((*fundamentals[f])[d][h]);
            x.insert(x.end(), com.begin(), com.end());
            x.insert(x.end(), cal_v.begin(), cal_v.end());
        }
    }
    return out;
}

Scaler fit_scaler(std::span<const DayDesign> window) {
    std::size_t n = 0;
    Scaler sc;
    for (const DayDesign& d : window) {
        if (!d.valid) continue;
        if (n == 0) {
            sc.layout = FeatureLayout(d.full_x.size() == FeatureLayout(true).full_width());
            sc.mean.assign(d.full_x.size(), 0.0);
            sc.std.assign(d.full_x.size(), 0.0);
            sc.window_first = d.date;
        } else if (d.full_x.size() != sc.mean.size()) {
            throw ShapeError("fit_scaler: inconsistent design widths in window");
        }
        for (std::size_t j = 0; j < d.full_x.size(); ++j) sc.mean[j] += d.full_x[j];
        sc.window_last = d.date;
        ++n;
    }
    if (n == 0) throw DataError("fit_scaler: window contains no valid designs");
    const double inv_n = 1.0 / static_cast<double>(n);
    for (double& m : sc.mean) m *= inv_n;
    for (const DayDesign& d : window) {
        if (!d.valid) continue;
        for (std::size_t j = 0; j < d.full_x.size(); ++j) {
            const double dev = d.full_x[j] - sc.mean[j];
            sc.std[j] += dev * dev;
        }
    }
    for (std::size_t j = 0; j < sc.std.size(); ++j) {
        const double sd = std::sqrt(sc.std[j] * inv_n);
        // Dummies keep unit scale; near-constant columns would blow up.
        sc.std[j] = (sc.layout.is_dummy(j) || sd <= 1e-12 * std::max(1.0, std::abs(sc.mean[j]))) ? 1.0 : sd;
    }
    sc.window_days = n;
    return sc;
}

DayDesign transform(const DayDesign& design, const Scaler& scaler) {
    if (!design.valid) throw DataError("transform: design for " + format_date(design.date) + " is not valid");
    check_layout(design, scaler);
    DayDesign out = design;
    for (std::size_t j = 0; j < out.full_x.size(); ++j) {
        out.full_x[j] = (design.full_x[j] - scaler.mean[j]) / scaler.std[j];
    }
    for (int h = 0; h < kHours; ++h) {
        for (std::size_t k = 0; k < out.reduced_x[h].size(); ++k) {
            const std::size_t j = scaler.layout.full_index(h, k);
            out.reduced_x[h][k] = (design.reduced_x[h][k] - scaler.mean[j]) / scaler.std[j];
        }
    }
    return out;
}

DayDesign inverse_transform(const DayDesign& design, const Scaler& scaler) {
    check_layout(design, scaler);
    DayDesign out = design;
    for (std::size_t j = 0; j < out.full_x.size(); ++j) {
        out.full_x[j] = design.full_x[j] * scaler.std[j] + scaler.mean[j];
    }
    for (int h = 0; h < kHours; ++h) {
        for (std::size_t k = 0; k < out.reduced_x[h].size(); ++k) {
            const std::size_t j = scaler.layout.full_index(h, k);
            out.reduced_x[h][k] = design.reduced_x[h][k] * scaler.std[j] + scaler.mean[j];
        }
    }
    return out;
}

std::vector<DayDesign> transform_all(std::span<const DayDesign> designs, const Scaler& scaler) {
    std::vector<DayDesign> out;
    out.reserve(designs.size());
    for (const DayDesign& d : designs) out.push_back(transform(d, scaler));
    return out;
}

void write_feature_map(const FeatureLayout& layout, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw UsageError("cannot write '" + path.string() + "'");
    out << "# full vector (" << layout.full_width() << " columns)\n";
    for (std::size_t j = 0; j < layout.full_width(); ++j) out << j << '\t' << layout.full_name(j) << '\n';
    for (int h : {0, 23}) {
        out << "# reduced vector, hour " << h << " (" << layout.reduced_width(h) << " columns)\n";
        for (std::size_t k = 0; k < layout.reduced_width(h); ++k) {
            out << k << '\t' << layout.reduced_name(h, k) << "\tfull[" << layout.full_index(h, k) << "]\n";
        }
    }
}

std::size_t find_design(std::span<const DayDesign> designs, Date date) {
    if (!designs.empty()) {
        const auto offset = (date - designs.front().date).count();
        if (offset >= 0 && static_cast<std::size_t>(offset) < designs.size() &&
            designs[static_cast<std::size_t>(offset)].date == date) {
            return static_cast<std::size_t>(offset);
        }
    }
    for (std::size_t i = 0; i < designs.size(); ++i) {
        if (designs[i].date == date) return i;
    }
    throw DataError("no design for " + format_date(date));
}

}  // namespace epf
