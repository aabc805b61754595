#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "causal/matching.hpp"

namespace causal {

struct EffectRow {
    std::string unit_id;
    int z = 0;        // arm of the focal unit
    int k_prime = 0;  // clones actually used
    double tau_hat = 0.0;
};

// Unit-level causal effect estimates, one row per matched focal unit.
// Sign convention is "effect of the intervention": a treated focal takes its
// own outcome minus the imputed counterfactual, a control focal the imputed
// counterfactual minus its own outcome.
struct EffectTable {
    std::vector<EffectRow> rows;
    std::string dataset_digest;

    std::string to_csv() const;  // unit_id, arm, k_prime, tau_hat
};

EffectTable unit_effects(const MatchSet& ms, const Dataset& ds);

struct AggregateResult {
    double mean = 0.0;
    double sd = 0.0;  // n-1
    std::size_t count = 0;
};

// Mean/sd of tau_hat over rows selected by the predicate. An empty
// selection is an error, not a silent zero.
AggregateResult aggregate(const EffectTable& effects,
                          const std::function<bool(const EffectRow&)>& subgroup);

struct TargetEntry {
    std::string unit_id;
    double tau_hat = 0.0;
    int decile = 0;  // 10 = top
};

// Untreated units ranked by estimated effect of the intervention,
// descending, ties by unit_id, cut into deciles labelled 10 (best) .. 1.
struct TargetList {
    std::vector<TargetEntry> entries;  // descending tau_hat
    std::string tie_break = "unit_id ascending";
    std::string note;  // set when fewer than 10 units collapse the deciles

    std::string to_csv() const;  // rank, unit_id, tau_hat, decile
    static TargetList from_csv(const std::string& text);
};

// Requires a table of control-focal effects (treated rows are rejected: the
// list orders not-yet-treated units only).
TargetList build_target_list(const EffectTable& effects);

struct DecileComparisonRow {
    std::string list;
    int decile = 0;
    double mean_realized = 0.0;
    std::int64_t count = 0;
};

struct DecileComparison {
    std::vector<DecileComparisonRow> rows;
    std::string realized_definition;

    std::string to_csv() const;  // list, decile, mean_realized, count
};

// Decile-by-decile mean of an externally supplied "realized effect" for two
// rankings of the same evaluation population. The realized values are the
// client's criterion (e.g. a before-after change) and are reported as such,
// not endorsed as causal.
DecileComparison compare_lists(const TargetList& list_a, const TargetList& list_b,
                               const std::map<std::string, double>& realized,
                               const std::string& name_a = "causal",
                               const std::string& name_b = "traditional",
                               const std::string& realized_definition = "client-supplied");

}  // namespace causal
