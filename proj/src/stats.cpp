#include "htp/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "htp/error.hpp"

namespace htp {

double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw Error(ErrorKind::EmptyInput, "quantile of an empty sample");
    const double pos = static_cast<double>(sorted.size() - 1) * p;
    const auto lower = static_cast<std::size_t>(std::floor(pos));
    const auto upper = std::min(lower + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lower);
    return sorted[lower] + frac * (sorted[upper] - sorted[lower]);
}

Summary summarize(std::span<const double> values) {
    if (values.empty()) throw Error(ErrorKind::EmptyInput, "statistics of an empty sample");

    // Welford's recurrence for mean and the sum of squared deviations.
    double mean = 0.0;
    double m2 = 0.0;
    std::size_t n = 0;
    for (double v : values) {
        ++n;
        const double delta = v - mean;
        mean += delta / static_cast<double>(n);
        m2 += delta * (v - mean);
    }

    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());

    Summary s;
    s.count = n;
    s.mean = mean;
    s.min = sorted.front();
    s.max = sorted.back();
    s.q1 = quantile_sorted(sorted, 0.25);
    s.median = quantile_sorted(sorted, 0.5);
    s.q3 = quantile_sorted(sorted, 0.75);
    s.sd = n > 1 ? std::sqrt(std::max(0.0, m2) / static_cast<double>(n - 1)) : 0.0;
    // keep the mean inside [min, max] despite rounding
    s.mean = std::clamp(s.mean, s.min, s.max);
    return s;
}

double threshold_share(std::span<const double> values, double threshold) {
    if (values.empty()) throw Error(ErrorKind::EmptyInput, "threshold share of an empty sample");
    const auto hits = std::count_if(values.begin(), values.end(), [threshold](double v) { return v >= threshold; });
    return static_cast<double>(hits) / static_cast<double>(values.size());
}

std::vector<HistogramBin> histogram(std::span<const double> values, double bin_width, double anchor) {
    if (!(bin_width > 0.0) || !std::isfinite(bin_width)) {
        throw Error(ErrorKind::InvalidArgument, "histogram bin width must be positive");
    }
    if (values.empty()) throw Error(ErrorKind::EmptyInput, "histogram of an empty sample");
    if (!std::isfinite(anchor)) throw Error(ErrorKind::InvalidArgument, "histogram anchor must be finite");

    const auto edge = [&](long long k) { return anchor + static_cast<double>(k) * bin_width; };
    // index of the half-open bin holding v, corrected against the emitted edges
    const auto bin_of = [&](double v) {
        auto k = static_cast<long long>(std::floor((v - anchor) / bin_width));
        while (edge(k + 1) <= v) ++k;
        while (edge(k) > v) --k;
        return k;
    };

    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    if (!std::isfinite(*lo_it) || !std::isfinite(*hi_it)) {
        throw Error(ErrorKind::NonFinite, "histogram input contains a non-finite value");
    }
    const long long first = bin_of(*lo_it);
    long long last = bin_of(*hi_it);
    if (last > first && edge(last) == *hi_it) --last;

    std::vector<HistogramBin> bins;
    bins.reserve(static_cast<std::size_t>(last - first + 1));
    for (long long k = first; k <= last; ++k) bins.push_back(HistogramBin{edge(k), edge(k + 1), 0});
    for (double v : values) {
        const long long k = std::min(bin_of(v), last);
        ++bins[static_cast<std::size_t>(k - first)].count;
    }
    return bins;
}

double silverman_bandwidth(std::span<const double> values) {
    const Summary s = summarize(values);
    const double iqr = s.q3 - s.q1;
    const double spread = iqr > 0.0 ? std::min(s.sd, iqr / 1.34) : s.sd;
    return 0.9 * spread * std::pow(static_cast<double>(values.size()), -0.2);
}

std::vector<DensityPoint> density_estimate(std::span<const double> values, int grid_points) {
    if (grid_points < 16) throw Error(ErrorKind::InvalidArgument, "density grid needs at least 16 points");
    if (values.empty()) throw Error(ErrorKind::InsufficientData, "density needs at least two distinct values");
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    if (!(*lo_it < *hi_it)) throw Error(ErrorKind::InsufficientData, "density needs at least two distinct values");

    const double h = silverman_bandwidth(values);
    const double lo = *lo_it - 3.0 * h;
    const double hi = *hi_it + 3.0 * h;
    const double step = (hi - lo) / static_cast<double>(grid_points - 1);
    const double norm = 1.0 / (static_cast<double>(values.size()) * h * std::sqrt(2.0 * std::numbers::pi));

    std::vector<DensityPoint> curve;
    curve.reserve(static_cast<std::size_t>(grid_points));
    for (int i = 0; i < grid_points; ++i) {
        const double x = i == grid_points - 1 ? hi : lo + step * i;
        double sum = 0.0;
        for (double v : values) {
            const double z = (x - v) / h;
            sum += std::exp(-0.5 * z * z);
        }
        curve.push_back(DensityPoint{x, sum * norm});
    }
    return curve;
}

Json to_json(const HistogramBin& bin) { return Json{{"lo", bin.lo}, {"hi", bin.hi}, {"count", bin.count}}; }

Json to_json(const DensityPoint& point) { return Json{{"x", point.x}, {"y", point.y}}; }

}  // namespace htp
