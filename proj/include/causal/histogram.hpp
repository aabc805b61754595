#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace causal {

// Binned summary of a sample. For categorical columns the "bins" are the
// level labels and edges are empty.
struct Histogram {
    std::vector<double> edges;        // n_bins + 1, strictly increasing (numeric)
    std::vector<std::string> labels;  // level labels (categorical)
    std::vector<std::int64_t> counts;
    std::int64_t n = 0;
    double mean = 0.0;
    double sd = 0.0;
};

// Histogram over explicit edges; values outside [edges.front(), edges.back()]
// clamp into the first/last bin. Membership: left-closed, right-open; the
// last bin is closed.
Histogram histogram_with_edges(std::span<const double> values, const std::vector<double>& edges);

// Equal-width bins spanning [min, max]. A constant sample yields one bin.
Histogram histogram_equal_width(std::span<const double> values, int n_bins);

// Shared equal-width edges spanning the pooled range of two samples.
std::vector<double> shared_edges(std::span<const double> a, std::span<const double> b, int n_bins);

double sample_mean(std::span<const double> values);
// Sample variance with n-1 denominator; 0 when fewer than two values.
double sample_variance(std::span<const double> values);
double sample_sd(std::span<const double> values);

}  // namespace causal
