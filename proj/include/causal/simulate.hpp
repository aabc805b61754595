#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "causal/dataset.hpp"
#include "causal/effects.hpp"

namespace causal {

// splitmix64: named, portable generator so identical configs reproduce
// byte-identical populations on any platform. Each unit gets its own stream
// derived from (seed, unit index), which makes block-parallel generation
// independent of block size.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t state) : state_(state) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Box-Muller (cosine branch); consumes exactly two uniforms.
    double normal();

    static SplitMix64 unit_stream(std::uint64_t seed, std::uint64_t unit_index);

private:
    std::uint64_t state_;
};

// lattice = equally likely values on an evenly spaced grid spanning
// mean +/- sd*sqrt(3) (a discrete tier score such as a prior-volume decile).
enum class NumericDistribution { normal, uniform, lattice };

struct CovariateSpec {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
    double mean = 0.0;  // numeric
    double sd = 1.0;
    // uniform/lattice draws span mean +/- sd*sqrt(3) so sd means the same.
    NumericDistribution distribution = NumericDistribution::normal;
    int lattice_levels = 10;
    std::vector<std::pair<std::string, double>> levels;  // categorical: label, prob
};

struct QuadraticTerm {
    std::string column;
    double center = 0.0;
    double coefficient = 0.0;
};

// Data-generating process: linear-logit assignment, linear baseline outcome
// with an optional quadratic term, and an effect surface linear in one
// covariate. Coefficient keys are encoded column names.
struct DgpConfig {
    std::string name = "custom";
    std::int64_t n = 0;
    std::uint64_t seed = 0;
    std::vector<CovariateSpec> covariates;
    double assignment_intercept = 0.0;
    std::map<std::string, double> assignment_coefficients;
    double outcome_intercept = 0.0;
    std::map<std::string, double> outcome_coefficients;
    std::optional<QuadraticTerm> outcome_quadratic;
    double noise_sd = 1.0;
    double effect_base = 0.0;
    double effect_slope = 0.0;
    std::string effect_column;  // empty = constant effect

    CovariateSchema schema() const;
    std::string to_json() const;
    static DgpConfig from_json(const std::string& text);
};

// Named presets; n and seed can be overridden after construction.
//   ferrari    - strong positive confounder drives both assignment and the
//                baseline outcome while the effect declines in it; treated
//                units carry ~50% higher mean baseline.
//   doctors    - ferrari plus a 6-level specialty categorical at n=250,000.
//   balanced   - two standard-normal covariates, one strongly confounded.
//   randomized - assignment independent of the covariates.
DgpConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

struct TruthRow {
    double e_true = 0.0;
    double y0 = 0.0;
    double y1 = 0.0;
    double tau = 0.0;
};

struct SyntheticTruth {
    std::vector<std::string> ids;  // generation order
    std::unordered_map<std::string, TruthRow> rows;

    std::string to_csv() const;  // unit_id, e_true, y0, y1, tau_true
    static SyntheticTruth from_csv(const std::string& text);
    double mean_tau(const std::vector<std::string>& unit_ids) const;
};

// A generated population. The observed outcome column is Z*Y(1)+(1-Z)*Y(0);
// the truth table is the test-side answer key and never enters the dataset.
struct SimulatedPopulation {
    DgpConfig config;
    std::vector<std::string> ids;
    std::vector<std::vector<double>> numeric_columns;   // per covariate spec
    std::vector<std::vector<int>> level_columns;        // level index per unit
    std::vector<std::int8_t> z;
    std::vector<double> y_observed;
    SyntheticTruth truth;

    std::string data_csv() const;  // unit_id, covariates..., z, y
    // Loads the emitted CSV through the standard loader, so the dataset and
    // its digest are identical to a file round-trip.
    LoadResult to_dataset() const;
    // Deterministic subsample of m units (drawn with a splitmix stream).
    SimulatedPopulation subsample(std::int64_t m, std::uint64_t seed) const;

    std::vector<std::string> treated_ids() const;
    std::vector<std::string> control_ids() const;
};

SimulatedPopulation generate(const DgpConfig& cfg);

struct BeforeAfterResult {
    std::vector<std::pair<std::string, double>> per_unit;  // outcome - baseline
    double treated_mean_change = 0.0;
    double control_mean_change = 0.0;
};

// The "change in time" foil: outcome minus a baseline covariate. Needs a
// released dataset; the treated mean change is the naive effect estimate.
BeforeAfterResult naive_before_after(const Dataset& ds, const std::string& baseline_column);

struct RegressionResult {
    double z_coefficient = 0.0;
    std::vector<std::string> names;
    std::vector<double> coefficients;
};

// Least squares of outcome on (1, X, Z); the Z coefficient is the
// traditional "causal" estimate. Throws SingularSystemError on a singular
// design matrix.
RegressionResult naive_regression(const Dataset& ds);

struct RunEvaluation {
    double att_estimate = 0.0;
    double att_true = 0.0;   // mean true tau over the evaluated focal units
    double att_bias = 0.0;
    double rmse = 0.0;       // unit-level tau_hat vs tau_true
    double rank_correlation = 0.0;  // Spearman
    std::size_t n = 0;
    std::string estimand;  // which focal arm the ATT summarizes

    std::string to_json() const;
};

// Scores an effect table against the simulator's answer key. ATT summaries
// use treated-focal rows when present, otherwise all rows.
RunEvaluation evaluate_run(const EffectTable& effects, const SyntheticTruth& truth);

// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace causal
