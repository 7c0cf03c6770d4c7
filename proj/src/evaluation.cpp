#include "epf/evaluation.hpp"

#include <cmath>
#include <numeric>

namespace epf {

namespace {

void require_aligned(const HourlyGrid& a, const HourlyGrid& b, const char* what) {
    if (a.empty()) throw DataError(std::string(what) + ": empty input");
    if (a.size() != b.size()) throw ShapeError(std::string(what) + ": grids are not aligned");
}

}  // namespace

DayHours hourly_rmse(const HourlyGrid& forecasts, const HourlyGrid& realized) {
    require_aligned(forecasts, realized, "hourly_rmse");
    DayHours out{};
    for (std::size_t d = 0; d < forecasts.size(); ++d) {
        for (int h = 0; h < kHours; ++h) {
            const double e = forecasts[d][h] - realized[d][h];
            out[h] += e * e;
        }
    }
    for (double& v : out) v = std::sqrt(v / static_cast<double>(forecasts.size()));
    return out;
}

MetricReport metrics(const HourlyGrid& forecasts, const HourlyGrid& realized, const HourlyGrid& naive) {
    require_aligned(forecasts, realized, "metrics");
    require_aligned(naive, realized, "metrics");
    double sq = 0.0, abs_model = 0.0, abs_naive = 0.0;
    for (std::size_t d = 0; d < forecasts.size(); ++d) {
        for (int h = 0; h < kHours; ++h) {
            const double e = forecasts[d][h] - realized[d][h];
            sq += e * e;
            abs_model += std::abs(e);
            abs_naive += std::abs(naive[d][h] - realized[d][h]);
        }
    }
    const double cells = static_cast<double>(forecasts.size() * kHours);
    MetricReport r;
    r.n_days = forecasts.size();
    r.rmse = std::sqrt(sq / cells);
    r.mae = abs_model / cells;
    // Ratio of the two sums: identical tracks give exactly 1.
    r.rmae = abs_naive > 0.0 ? abs_model / abs_naive : (abs_model > 0.0 ? INFINITY : 0.0);
    r.hourly_rmse = hourly_rmse(forecasts, realized);
    return r;
}

DayHours naive_forecast(const MarketSeries& series, Date day) {
    const auto offset = (day - (series.days.empty() ? day : series.days.front())).count();
    if (series.days.empty() || offset < 0 || static_cast<std::size_t>(offset) >= series.n_days()) {
        throw DataError("naive_forecast: " + format_date(day) + " outside the series");
    }
    const unsigned wd = iso_weekday(day);
    const long lag = (wd >= 2 && wd <= 5) ? 1 : 7;
    if (offset < lag) throw DataError("naive_forecast: insufficient history for " + format_date(day));
    return series.price[static_cast<std::size_t>(offset - lag)];
}

HourlyGrid naive_forecasts(const MarketSeries& series, std::span<const Date> days) {
    HourlyGrid out;
    out.reserve(days.size());
    for (Date d : days) out.push_back(naive_forecast(series, d));
    return out;
}

double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

DmResult dm_from_differential(std::span<const double> diff) {
    if (diff.size() < 2) throw DataError("dm_test: need at least two days");
    DmResult r;
    r.n_days = diff.size();
    const double n = static_cast<double>(diff.size());
    const double mean = std::accumulate(diff.begin(), diff.end(), 0.0) / n;
    double ss = 0.0;
    for (double d : diff) ss += (d - mean) * (d - mean);
    const double var = ss / (n - 1.0);
    if (!(var > 0.0)) {
        r.degenerate_variance = true;
        if (mean == 0.0) {
            r.statistic = 0.0;
            r.p_value = 0.5;
        } else {
            r.statistic = mean < 0.0 ? -INFINITY : INFINITY;
            r.p_value = mean < 0.0 ? 0.0 : 1.0;
        }
        return r;
    }
    r.statistic = mean / std::sqrt(var / n);
    r.p_value = normal_cdf(r.statistic);
    return r;
}

DmResult dm_test(const HourlyGrid& a, const HourlyGrid& b, const HourlyGrid& realized) {
    require_aligned(a, realized, "dm_test");
    require_aligned(b, realized, "dm_test");
    std::vector<double> diff(realized.size());
    for (std::size_t d = 0; d < realized.size(); ++d) {
        double sum_a = 0.0, sum_b = 0.0, sum_p = 0.0;
        for (int h = 0; h < kHours; ++h) {
            sum_a += a[d][h];
            sum_b += b[d][h];
            sum_p += realized[d][h];
        }
        diff[d] = std::abs(sum_a - sum_p) - std::abs(sum_b - sum_p);
    }
    return dm_from_differential(diff);
}

void mark_pareto(std::vector<ParetoPoint>& points) {
    for (auto& p : points) {
        p.efficient = true;
        for (const auto& q : points) {
            const bool no_worse = q.runtime <= p.runtime && q.mae <= p.mae;
            const bool better = q.runtime < p.runtime || q.mae < p.mae;
            if (no_worse && better) {
                p.efficient = false;
                break;
            }
        }
    }
}

}  // namespace epf
