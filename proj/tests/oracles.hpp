// Test-side oracles, independent of the library's implementation paths:
// a direct Bernoulli log-likelihood, coefficient grid search, central
// finite differences, and exhaustive enumeration of feasible matchings.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "causal/csv.hpp"
#include "causal/dataset.hpp"
#include "causal/design.hpp"
#include "causal/propensity.hpp"

namespace oracles {

// Log-likelihood computed from first principles (no shared code with the
// library's evaluator).
inline double loglik(const std::vector<std::vector<double>>& x, const std::vector<int>& z,
                     const std::vector<double>& coefs) {
    double ll = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double eta = coefs[0];
        for (std::size_t j = 0; j < x[i].size(); ++j) eta += coefs[j + 1] * x[i][j];
        double p = 1.0 / (1.0 + std::exp(-eta));
        p = std::min(std::max(p, 1e-300), 1.0 - 1e-16);
        ll += z[i] == 1 ? std::log(p) : std::log(1.0 - p);
    }
    return ll;
}

// Maximum over the grid [-5,5] step 0.1 per coefficient (<=3 coefficients).
inline double grid_max_loglik(const std::vector<std::vector<double>>& x,
                              const std::vector<int>& z, std::size_t n_coefs) {
    std::vector<double> coefs(n_coefs, 0.0);
    double best = -std::numeric_limits<double>::infinity();
    std::function<void(std::size_t)> walk = [&](std::size_t dim) {
        if (dim == n_coefs) {
            best = std::max(best, loglik(x, z, coefs));
            return;
        }
        for (int step = -50; step <= 50; ++step) {
            coefs[dim] = 0.1 * step;
            walk(dim + 1);
        }
    };
    walk(0);
    return best;
}

inline std::vector<double> central_diff_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& at) {
    std::vector<double> grad(at.size());
    for (std::size_t j = 0; j < at.size(); ++j) {
        double h = 1e-5 * std::max(1.0, std::abs(at[j]));
        std::vector<double> lo = at, hi = at;
        lo[j] -= h;
        hi[j] += h;
        grad[j] = (f(hi) - f(lo)) / (2.0 * h);
    }
    return grad;
}

// Exhaustive search over all feasible without-replacement assignments:
// each pool unit goes to one focal (respecting per-focal capacity k and the
// caliper) or stays unused. Objective: max pairs, then min total distance.
struct BestAssignment {
    int pairs = 0;
    double cost = 0.0;
};

inline BestAssignment enumerate_assignments(const std::vector<double>& focal_lp,
                                            const std::vector<double>& pool_lp, int k,
                                            double caliper) {
    BestAssignment best;
    std::vector<int> load(focal_lp.size(), 0);
    std::function<void(std::size_t, int, double)> walk = [&](std::size_t p, int pairs,
                                                             double cost) {
        if (p == pool_lp.size()) {
            if (pairs > best.pairs || (pairs == best.pairs && cost < best.cost)) {
                best = {pairs, cost};
            }
            return;
        }
        walk(p + 1, pairs, cost);  // pool unit unused
        for (std::size_t f = 0; f < focal_lp.size(); ++f) {
            if (load[f] == k) continue;
            double d = std::abs(focal_lp[f] - pool_lp[p]);
            if (d > caliper) continue;
            ++load[f];
            walk(p + 1, pairs + 1, cost + d);
            --load[f];
        }
    };
    walk(0, 0, 0.0);
    return best;
}

// CSV fixture helpers -------------------------------------------------------

inline std::string simple_csv(const std::vector<double>& x, const std::vector<int>& z,
                              const std::vector<double>& y) {
    std::string csv = "unit_id,x,z,y\n";
    for (std::size_t i = 0; i < x.size(); ++i) {
        csv += "u" + std::to_string(i + 1) + "," + causal::format_double(x[i]) + "," +
               std::to_string(z[i]) + "," + causal::format_double(y[i]) + "\n";
    }
    return csv;
}

inline causal::CovariateSchema simple_schema() {
    causal::CovariateSchema schema;
    schema.columns.push_back({"x", causal::ColumnKind::numeric, {}});
    return schema;
}

inline causal::LoadResult simple_dataset(const std::vector<double>& x,
                                         const std::vector<int>& z,
                                         const std::vector<double>& y) {
    return causal::load_dataset_text(simple_csv(x, z, y), simple_schema(), "y", "z", {});
}

// A frozen design over the given dataset (single bin, keep-everything
// window, balance override) for tests that need the escrow released.
inline causal::DesignReport frozen_design_for(const causal::Dataset& ds) {
    causal::PropensityModel model = causal::fit_propensity(ds);
    causal::ScoreTable scores = causal::score(model, ds);
    causal::BinPlan plan = causal::assign_bins(scores, 1, causal::BinMethod::quantile);
    causal::BalanceReport balance = causal::balance_report(ds, plan, 0.1);
    causal::TrimDecision trim =
        causal::trim_support(scores, causal::TrimRule::lp_window, -1e6, 1e6);
    return causal::freeze_design(model, plan, balance, trim, /*override=*/true);
}

}  // namespace oracles
