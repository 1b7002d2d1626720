#pragma once

#include <span>
#include <string>
#include <vector>

#include "htp/canonical_json.hpp"

namespace htp {

/// Descriptive summary of one sample.
struct Summary {
    std::size_t count = 0;
    double mean = 0.0;
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    double min = 0.0;
    double max = 0.0;
    double sd = 0.0;
};

/// Quantile by linear interpolation between order statistics at position
/// (n - 1) * p ("type 7"). `sorted` must be ascending and non-empty.
double quantile_sorted(std::span<const double> sorted, double p);

/// Sample statistics; sd uses the n - 1 divisor and is 0 for a single value.
/// Throws EmptyInput for an empty sample.
Summary summarize(std::span<const double> values);

/// Fraction of values >= threshold (inclusive).
double threshold_share(std::span<const double> values, double threshold);

struct HistogramBin {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
};

/// Contiguous bins with edges anchor + k * width. Bins are half-open [lo, hi)
/// except the last, which is closed, so a maximum sitting exactly on an edge
/// falls into the bin below it.
std::vector<HistogramBin> histogram(std::span<const double> values, double bin_width, double anchor);

struct DensityPoint {
    double x = 0.0;
    double y = 0.0;
};

/// Silverman rule-of-thumb bandwidth 0.9 * min(sd, IQR / 1.34) * n^(-1/5);
/// falls back to sd when the IQR is zero.
double silverman_bandwidth(std::span<const double> values);

/// Gaussian KDE sampled on `grid_points` evenly spaced points covering
/// [min - 3h, max + 3h]. Needs at least two distinct values and 16 points.
std::vector<DensityPoint> density_estimate(std::span<const double> values, int grid_points);

Json to_json(const HistogramBin& bin);
Json to_json(const DensityPoint& point);

}  // namespace htp
