#include "causal/histogram.hpp"

#include <algorithm>
#include <cmath>

#include "causal/errors.hpp"

namespace causal {

double sample_mean(std::span<const double> values) {
    if (values.empty()) return 0.0;
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

double sample_variance(std::span<const double> values) {
    const std::size_t n = values.size();
    if (n < 2) return 0.0;
    const double m = sample_mean(values);
    double ss = 0.0;
    for (double v : values) ss += (v - m) * (v - m);
    return ss / static_cast<double>(n - 1);
}

double sample_sd(std::span<const double> values) {
    return std::sqrt(sample_variance(values));
}

Histogram histogram_with_edges(std::span<const double> values, const std::vector<double>& edges) {
    if (edges.size() < 2) {
        throw ValidationError("histogram needs at least two edges");
    }
    Histogram h;
    h.edges = edges;
    h.counts.assign(edges.size() - 1, 0);
    for (double v : values) {
        auto it = std::upper_bound(edges.begin(), edges.end(), v);
        std::ptrdiff_t idx = std::distance(edges.begin(), it) - 1;
        idx = std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(h.counts.size()) - 1);
        ++h.counts[static_cast<std::size_t>(idx)];
    }
    h.n = static_cast<std::int64_t>(values.size());
    h.mean = sample_mean(values);
    h.sd = sample_sd(values);
    return h;
}

Histogram histogram_equal_width(std::span<const double> values, int n_bins) {
    if (n_bins < 1) {
        throw ValidationError("histogram bin count must be >= 1");
    }
    if (values.empty()) {
        Histogram h;
        h.edges = {0.0, 1.0};
        h.counts = {0};
        return h;
    }
    auto [mn_it, mx_it] = std::minmax_element(values.begin(), values.end());
    double lo = *mn_it, hi = *mx_it;
    if (lo == hi) {
        // Constant sample: a single bin centered on the value.
        return histogram_with_edges(values, {lo - 0.5, hi + 0.5});
    }
    std::vector<double> edges(static_cast<std::size_t>(n_bins) + 1);
    for (int i = 0; i <= n_bins; ++i) {
        edges[static_cast<std::size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / n_bins;
    }
    edges.back() = hi;
    return histogram_with_edges(values, edges);
}

std::vector<double> shared_edges(std::span<const double> a, std::span<const double> b, int n_bins) {
    if (n_bins < 1) {
        throw ValidationError("histogram bin count must be >= 1");
    }
    if (a.empty() && b.empty()) return {0.0, 1.0};
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (double v : a) { lo = std::min(lo, v); hi = std::max(hi, v); }
    for (double v : b) { lo = std::min(lo, v); hi = std::max(hi, v); }
    if (lo == hi) return {lo - 0.5, hi + 0.5};
    std::vector<double> edges(static_cast<std::size_t>(n_bins) + 1);
    for (int i = 0; i <= n_bins; ++i) {
        edges[static_cast<std::size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / n_bins;
    }
    edges.back() = hi;
    return edges;
}

}  // namespace causal
