#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "causal/dataset.hpp"
#include "causal/propensity.hpp"

namespace causal {

enum class BinMethod { quantile, fixed_width };

// Stratification of units over the linear propensity score.
struct BinPlan {
    BinMethod method = BinMethod::quantile;
    // n_bins + 1 edges, strictly increasing, covering all scored lp values.
    // Membership is (edges[b], edges[b+1]] with the first bin closed below,
    // so equal lp values always share a bin.
    std::vector<double> edges;
    std::vector<int> bin_of_unit;  // parallel to the score table rows
    std::vector<std::string> unit_ids;
    std::string dataset_digest;

    int n_bins() const { return static_cast<int>(edges.size()) - 1; }
    std::string to_json() const;
    static BinPlan from_json(const std::string& text);
};

BinPlan assign_bins(const ScoreTable& scores, int n_bins, BinMethod method);

struct BalanceCell {
    int bin = -1;  // -1 = overall (unbinned)
    std::string covariate;
    std::int64_t n_treated = 0;
    std::int64_t n_control = 0;
    double treated_mean = 0.0;
    double control_mean = 0.0;
    double pooled_sd = 0.0;
    double smd = 0.0;
    bool one_arm_empty = false;
};

// Standardized mean differences per (bin, covariate) plus unbinned rows.
// smd = (mean_t - mean_c) / sqrt((s_t^2 + s_c^2)/2) with n-1 variances.
// Bins where an arm is empty are flagged and excluded from the verdict.
struct BalanceReport {
    std::vector<BalanceCell> cells;
    double threshold = 0.1;
    double worst_abs_smd = 0.0;  // over within-bin cells with both arms
    bool balanced = false;
    std::vector<int> empty_arm_bins;
    std::string dataset_digest;

    std::string to_csv() const;
};

BalanceReport balance_report(const Dataset& ds, const BinPlan& plan, double threshold = 0.1);

enum class TrimRule { arm_overlap, lp_window };
enum class DropSide { below_support, above_support };

struct TrimDecision {
    TrimRule rule = TrimRule::arm_overlap;
    double support_lo = 0.0;
    double support_hi = 0.0;
    std::vector<std::string> retained_ids;
    std::vector<std::pair<std::string, DropSide>> dropped;
    std::string dataset_digest;

    std::string to_csv() const;
};

// Drops units off common support. arm_overlap keeps the closed interval
// [max(min lp per arm), min(max lp per arm)]; lp_window keeps [lo, hi].
TrimDecision trim_support(const ScoreTable& scores, TrimRule rule, double window_lo = 0.0,
                          double window_hi = 0.0);

// The frozen study design: matching and escrow release key off this.
struct DesignReport {
    std::string model_digest;
    std::string dataset_digest;
    BinPlan plan;
    BalanceReport balance;
    TrimDecision trim;
    bool frozen = false;
    bool override_used = false;
    std::vector<std::string> history;  // user-driven refinement iterations

    std::string to_json() const;
    static DesignReport from_json(const std::string& text);
    std::string digest() const;
};

// Refuses (DesignNotReadyError) when balance failed and override is false;
// throws ProvenanceError when the artifacts reference different datasets.
DesignReport freeze_design(const PropensityModel& model, const BinPlan& plan,
                           const BalanceReport& balance, const TrimDecision& trim,
                           bool override_balance = false,
                           std::vector<std::string> history = {});

}  // namespace causal
