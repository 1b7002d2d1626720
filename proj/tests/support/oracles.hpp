#pragma once

// Independent reference computations used only by tests. Each one follows the
// textbook definition directly and shares no code with the library.

#include <algorithm>
#include <cmath>
#include <vector>

namespace htp::oracle {

struct Stats {
    double mean, median, q1, q3, min, max, sd;
};

inline double interpolate(const std::vector<double>& sorted, double p) {
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const double lo = std::floor(h);
    const double hi = std::ceil(h);
    const double a = sorted[static_cast<std::size_t>(lo)];
    const double b = sorted[static_cast<std::size_t>(hi)];
    return a + (h - lo) * (b - a);
}

inline Stats brute_stats(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    return {mean, interpolate(values, 0.5), interpolate(values, 0.25), interpolate(values, 0.75),
            values.front(), values.back(), sd};
}

inline double brute_cosine(const std::vector<double>& u, const std::vector<double>& v) {
    long double dot = 0, uu = 0, vv = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += static_cast<long double>(u[i]) * v[i];
        uu += static_cast<long double>(u[i]) * u[i];
        vv += static_cast<long double>(v[i]) * v[i];
    }
    return static_cast<double>(dot / std::sqrt(uu * vv));
}

/// Composite trapezoid rule over sampled (x, y) pairs.
template <class Points>
double trapezoid(const Points& curve) {
    double area = 0.0;
    for (std::size_t i = 1; i < curve.size(); ++i) {
        area += 0.5 * (curve[i].y + curve[i - 1].y) * (curve[i].x - curve[i - 1].x);
    }
    return area;
}

}  // namespace htp::oracle
