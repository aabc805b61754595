#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "causal/design.hpp"
#include "causal/propensity.hpp"

namespace causal {

enum class MatchMethod { greedy, optimal };
enum class MatchDirection { treated_focal, control_focal, both };

struct MatchSpec {
    MatchMethod method = MatchMethod::greedy;
    int k = 10;
    // Max |lp difference| per pair. kCaliperAuto resolves to
    // 0.2 * sd(pooled retained lp); +infinity disables the caliper.
    static constexpr double kCaliperAuto = -1.0;
    double caliper = kCaliperAuto;
    bool replacement = false;
    MatchDirection direction = MatchDirection::both;
    // Restrict pairs to units sharing a propensity bin (requires a BinPlan).
    bool within_bins = false;
};

enum class UnmatchedReason { caliper, pool_exhausted };

struct MatchGroup {
    std::string focal_id;
    int focal_z = 0;
    std::vector<std::string> clone_ids;  // opposite arm, size in [1, k]
    std::vector<double> distances;       // |lp| gaps, parallel to clone_ids
};

struct MatchSet {
    std::vector<MatchGroup> groups;
    std::vector<std::pair<std::string, UnmatchedReason>> unmatched;
    double total_distance = 0.0;
    double resolved_caliper = std::numeric_limits<double>::infinity();
    std::string dataset_digest;

    std::size_t n_pairs() const;
    std::string to_csv() const;        // focal_id, clone_id, distance, group_index
    std::string unmatched_csv() const; // focal_id, reason
};

// Builds clone groups over the trimmed units.
//
// greedy: focal units in descending lp order (ties by unit_id) each take
// their k nearest available opposite-arm units within the caliper, nearest
// first, distance ties by unit_id.
//
// optimal: minimum-cost assignment on the bipartite graph with each focal
// replicated k times and the caliper encoded as edge deletion, solved by
// successive shortest paths; among maximum-cardinality assignments it
// attains the minimum total distance. Cost is O(pairs * E log V) — use
// within_bins or greedy for very large problems.
//
// Both are deterministic. Infeasibility (a caliper too tight for k) yields
// partial groups and an unmatched list, never a silent drop.
MatchSet match(const ScoreTable& scores, const TrimDecision& trim, const MatchSpec& spec,
               const BinPlan* plan = nullptr);

struct ImputedOutcome {
    std::string focal_id;
    int focal_z = 0;
    int k_prime = 0;
    double counterfactual = 0.0;  // mean outcome of the matched clones
    double own_outcome = 0.0;
};

// Fills each matched focal unit's missing potential outcome with the mean
// outcome of its clones. Requires a released dataset from the same design.
std::vector<ImputedOutcome> impute_clones(const MatchSet& ms, const Dataset& ds);

}  // namespace causal
