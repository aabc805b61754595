#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "causal/dataset.hpp"
#include "causal/histogram.hpp"

namespace causal {

// Logistic model for e = P(Z=1|X). Coefficients are on the original
// covariate scale: [intercept, one per encoded column].
struct PropensityModel {
    std::vector<std::string> coefficient_names;  // "(intercept)" first
    std::vector<double> coefficients;
    bool converged = false;
    int iterations = 0;
    double final_gradient_norm = 0.0;
    double ridge_lambda = 0.0;
    std::string message;  // diagnostic when not converged
    std::string dataset_digest;
    std::string schema_digest;

    std::string to_json() const;
    static PropensityModel from_json(const std::string& text);
    // Digest of the canonical JSON form; design freezing keys off this.
    std::string digest() const;
};

struct FitOptions {
    double ridge_lambda = 1e-6;  // intercept unpenalized
    int max_iter = 50;
    double tol = 1e-8;  // max-norm of the penalized gradient
};

// Maximizes the ridge-penalized Bernoulli log-likelihood of Z given X by
// iteratively reweighted least squares. Never touches outcome values, so it
// runs on a sealed dataset. Non-convergence (e.g. perfect separation with
// ridge_lambda=0) is reported via converged=false, not an exception;
// a singular system without ridge throws SingularSystemError.
PropensityModel fit_propensity(const Dataset& ds, const FitOptions& opts = {});

struct ScoreRow {
    std::string unit_id;
    int z = 0;
    double e = 0.0;   // clamped to [1e-12, 1-1e-12]
    double lp = 0.0;  // log[e/(1-e)]
};

struct ScoreTable {
    std::vector<ScoreRow> rows;
    std::string dataset_digest;
    std::string model_digest;

    std::vector<double> lp_values() const;
    std::vector<double> lp_values(int arm) const;
    std::string to_csv() const;
};

// Probability clamp bound: e is kept in [kProbClamp, 1-kProbClamp] so the
// linear propensity stays finite.
inline constexpr double kProbClamp = 1e-12;

// Scores every unit: e_i = inverse-logit(intercept + beta . x_i), lp_i its
// logit. Deterministic and independent of n_threads (threads fill disjoint
// slots of a preallocated table).
ScoreTable score(const PropensityModel& model, const Dataset& ds, int n_threads = 1);

struct PairedHistogram {
    Histogram control;  // z = 0
    Histogram treated;  // z = 1
};

// lp distributions per arm over a shared bin grid spanning the pooled range.
PairedHistogram score_histograms(const ScoreTable& scores, int n_bins = 30);

// Bernoulli log-likelihood of Z given X at arbitrary coefficients
// [intercept, beta...] on the original scale; no penalty. Public so tests
// can grid-search and finite-difference against the fitted model.
double log_likelihood(const Dataset& ds, std::span<const double> coefficients);
std::vector<double> log_likelihood_gradient(const Dataset& ds,
                                            std::span<const double> coefficients);

}  // namespace causal
