#include "causal/design.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "causal/csv.hpp"
#include "causal/digest.hpp"
#include "causal/errors.hpp"

namespace causal {

namespace {

using ordered_json = nlohmann::ordered_json;

int locate_bin(const std::vector<double>& edges, double lp) {
    // (edges[b], edges[b+1]], first bin closed below.
    auto it = std::lower_bound(edges.begin() + 1, edges.end(), lp);
    auto idx = static_cast<int>(it - edges.begin()) - 1;
    return std::clamp(idx, 0, static_cast<int>(edges.size()) - 2);
}

}  // namespace

BinPlan assign_bins(const ScoreTable& scores, int n_bins, BinMethod method) {
    if (n_bins < 1) throw BinningError("n_bins must be >= 1");
    if (scores.rows.empty()) throw BinningError("no scored units to bin");

    std::vector<double> lp = scores.lp_values();
    std::vector<double> sorted = lp;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    double lo = sorted.front();
    double hi = sorted.back();

    std::vector<double> edges;
    if (lo == hi) {
        if (n_bins != 1) {
            throw BinningError("all lp values are equal; only 1 bin is possible (requested " +
                               std::to_string(n_bins) + ")");
        }
        edges = {lo - 0.5, hi + 0.5};
    } else if (method == BinMethod::fixed_width) {
        edges.resize(static_cast<std::size_t>(n_bins) + 1);
        for (int j = 0; j <= n_bins; ++j) {
            edges[static_cast<std::size_t>(j)] = lo + (hi - lo) * static_cast<double>(j) / n_bins;
        }
        edges.back() = hi;
    } else {
        // Quantile cuts at the upper order statistic of each bin. Ties are
        // kept together by advancing a cut to the next distinct value; if
        // the cuts run out of distinct values the request is infeasible.
        std::vector<double> distinct;
        std::vector<std::size_t> cum;  // count of values <= distinct[i]
        for (std::size_t i = 0; i < n; ++i) {
            if (distinct.empty() || sorted[i] != distinct.back()) {
                distinct.push_back(sorted[i]);
                cum.push_back(i + 1);
            } else {
                cum.back() = i + 1;
            }
        }
        std::vector<double> interior;
        std::ptrdiff_t prev_t = -1;
        for (int j = 1; j < n_bins; ++j) {
            std::size_t target = (n * static_cast<std::size_t>(j) +
                                  static_cast<std::size_t>(n_bins) - 1) /
                                 static_cast<std::size_t>(n_bins);  // ceil(n*j/k)
            auto it = std::lower_bound(cum.begin(), cum.end(), target);
            auto t = static_cast<std::ptrdiff_t>(it - cum.begin());
            // Each later cut still needs a distinct value of its own.
            auto cap = static_cast<std::ptrdiff_t>(distinct.size()) - 1 -
                       static_cast<std::ptrdiff_t>(n_bins - j);
            t = std::min(t, cap);
            if (t <= prev_t) t = prev_t + 1;
            if (t > cap) {
                throw BinningError("too few distinct lp values for " + std::to_string(n_bins) +
                                   " quantile bins; try fewer bins");
            }
            interior.push_back(distinct[static_cast<std::size_t>(t)]);
            prev_t = t;
        }
        // The stored edge vector is strictly increasing; when the first cut
        // equals the minimum, the reported lower edge moves one ulp down.
        double first = interior.empty() || interior.front() > lo
                           ? lo
                           : std::nextafter(lo, -std::numeric_limits<double>::infinity());
        edges.push_back(first);
        for (double e : interior) edges.push_back(e);
        edges.push_back(hi);
    }

    BinPlan plan;
    plan.method = method;
    plan.edges = std::move(edges);
    plan.dataset_digest = scores.dataset_digest;
    plan.bin_of_unit.reserve(n);
    plan.unit_ids.reserve(n);
    for (const auto& row : scores.rows) {
        plan.bin_of_unit.push_back(locate_bin(plan.edges, row.lp));
        plan.unit_ids.push_back(row.unit_id);
    }
    return plan;
}

std::string BinPlan::to_json() const {
    ordered_json j;
    j["method"] = method == BinMethod::quantile ? "quantile" : "fixed-width";
    j["n_bins"] = n_bins();
    j["edges"] = edges;
    j["dataset_digest"] = dataset_digest;
    ordered_json assign = ordered_json::array();
    for (std::size_t i = 0; i < unit_ids.size(); ++i) {
        assign.push_back({{"unit_id", unit_ids[i]}, {"bin", bin_of_unit[i]}});
    }
    j["assignments"] = std::move(assign);
    return j.dump(2) + "\n";
}

BinPlan BinPlan::from_json(const std::string& text) {
    ordered_json j = ordered_json::parse(text);
    BinPlan plan;
    plan.method = j.at("method").get<std::string>() == "quantile" ? BinMethod::quantile
                                                                  : BinMethod::fixed_width;
    plan.edges = j.at("edges").get<std::vector<double>>();
    plan.dataset_digest = j.value("dataset_digest", "");
    for (const auto& a : j.at("assignments")) {
        plan.unit_ids.push_back(a.at("unit_id").get<std::string>());
        plan.bin_of_unit.push_back(a.at("bin").get<int>());
    }
    return plan;
}

BalanceReport balance_report(const Dataset& ds, const BinPlan& plan, double threshold) {
    if (plan.unit_ids.size() != ds.n_units()) {
        throw ProvenanceError("bin plan does not cover the dataset's units");
    }
    std::unordered_map<std::string, std::size_t> index;
    index.reserve(ds.n_units());
    for (std::size_t i = 0; i < ds.n_units(); ++i) index.emplace(ds.unit_id(i), i);

    const int k = plan.n_bins();
    const auto names = ds.schema().encoded_names();
    const std::size_t p = names.size();

    // bin -> covariate -> per-arm values. Bin -1 (overall) is handled by
    // folding every unit into an extra slot.
    struct Acc {
        std::vector<double> treated, control;
    };
    std::vector<std::vector<Acc>> acc(static_cast<std::size_t>(k) + 1,
                                      std::vector<Acc>(p));

    for (std::size_t r = 0; r < plan.unit_ids.size(); ++r) {
        auto it = index.find(plan.unit_ids[r]);
        if (it == index.end()) {
            throw ProvenanceError("bin plan references unknown unit id: " + plan.unit_ids[r]);
        }
        std::size_t i = it->second;
        auto x = ds.covariates(i);
        auto bin = static_cast<std::size_t>(plan.bin_of_unit[r]);
        for (std::size_t j = 0; j < p; ++j) {
            auto& cell = acc[bin][j];
            auto& overall = acc[static_cast<std::size_t>(k)][j];
            if (ds.z(i) == 1) {
                cell.treated.push_back(x[j]);
                overall.treated.push_back(x[j]);
            } else {
                cell.control.push_back(x[j]);
                overall.control.push_back(x[j]);
            }
        }
    }

    BalanceReport report;
    report.threshold = threshold;
    report.dataset_digest = ds.digest();
    double worst = 0.0;
    bool all_ok = true;

    auto make_cell = [&](int bin, std::size_t j) {
        const auto& a = acc[bin < 0 ? static_cast<std::size_t>(k) : static_cast<std::size_t>(bin)][j];
        BalanceCell cell;
        cell.bin = bin;
        cell.covariate = names[j];
        cell.n_treated = static_cast<std::int64_t>(a.treated.size());
        cell.n_control = static_cast<std::int64_t>(a.control.size());
        cell.one_arm_empty = a.treated.empty() || a.control.empty();
        cell.treated_mean = sample_mean(a.treated);
        cell.control_mean = sample_mean(a.control);
        double pooled_var = 0.5 * (sample_variance(a.treated) + sample_variance(a.control));
        cell.pooled_sd = std::sqrt(pooled_var);
        if (cell.one_arm_empty) {
            cell.smd = std::numeric_limits<double>::quiet_NaN();
        } else if (cell.pooled_sd > 0) {
            cell.smd = (cell.treated_mean - cell.control_mean) / cell.pooled_sd;
        } else {
            double diff = cell.treated_mean - cell.control_mean;
            cell.smd = diff == 0 ? 0.0
                                 : std::copysign(std::numeric_limits<double>::infinity(), diff);
        }
        return cell;
    };

    for (int bin = 0; bin < k; ++bin) {
        bool flagged = false;
        for (std::size_t j = 0; j < p; ++j) {
            BalanceCell cell = make_cell(bin, j);
            if (cell.one_arm_empty) {
                flagged = true;
            } else {
                worst = std::max(worst, std::abs(cell.smd));
                if (std::abs(cell.smd) > threshold) all_ok = false;
            }
            report.cells.push_back(std::move(cell));
        }
        if (flagged) report.empty_arm_bins.push_back(bin);
    }
    for (std::size_t j = 0; j < p; ++j) report.cells.push_back(make_cell(-1, j));

    report.worst_abs_smd = worst;
    report.balanced = all_ok;
    return report;
}

std::string BalanceReport::to_csv() const {
    CsvWriter w({"bin", "covariate", "n_treated", "n_control", "treated_mean", "control_mean",
                 "pooled_sd", "smd", "one_arm_empty"});
    for (const auto& c : cells) {
        w.add_row({c.bin < 0 ? "overall" : std::to_string(c.bin), c.covariate,
                   std::to_string(c.n_treated), std::to_string(c.n_control),
                   format_double(c.treated_mean), format_double(c.control_mean),
                   format_double(c.pooled_sd), format_double(c.smd),
                   c.one_arm_empty ? "1" : "0"});
    }
    return w.str();
}

TrimDecision trim_support(const ScoreTable& scores, TrimRule rule, double window_lo,
                          double window_hi) {
    std::vector<double> lp_t = scores.lp_values(1);
    std::vector<double> lp_c = scores.lp_values(0);
    if (lp_t.empty() || lp_c.empty()) {
        throw SupportError("both arms must be non-empty before trimming");
    }

    TrimDecision out;
    out.rule = rule;
    out.dataset_digest = scores.dataset_digest;
    if (rule == TrimRule::arm_overlap) {
        out.support_lo = std::max(*std::min_element(lp_t.begin(), lp_t.end()),
                                  *std::min_element(lp_c.begin(), lp_c.end()));
        out.support_hi = std::min(*std::max_element(lp_t.begin(), lp_t.end()),
                                  *std::max_element(lp_c.begin(), lp_c.end()));
    } else {
        if (!(window_lo < window_hi)) {
            throw ConfigError("lp window requires lo < hi");
        }
        out.support_lo = window_lo;
        out.support_hi = window_hi;
    }

    std::size_t kept_t = 0, kept_c = 0;
    for (const auto& row : scores.rows) {
        if (row.lp < out.support_lo) {
            out.dropped.emplace_back(row.unit_id, DropSide::below_support);
        } else if (row.lp > out.support_hi) {
            out.dropped.emplace_back(row.unit_id, DropSide::above_support);
        } else {
            out.retained_ids.push_back(row.unit_id);
            (row.z == 1 ? kept_t : kept_c) += 1;
        }
    }
    if (kept_t == 0 || kept_c == 0) {
        throw SupportError("trim rule empties an arm; the dataset is uninformative here");
    }
    return out;
}

std::string TrimDecision::to_csv() const {
    CsvWriter w({"unit_id", "status", "reason"});
    for (const auto& id : retained_ids) w.add_row({id, "retained", ""});
    for (const auto& [id, side] : dropped) {
        w.add_row({id, "dropped",
                   side == DropSide::below_support ? "below-support" : "above-support"});
    }
    return w.str();
}

DesignReport freeze_design(const PropensityModel& model, const BinPlan& plan,
                           const BalanceReport& balance, const TrimDecision& trim,
                           bool override_balance, std::vector<std::string> history) {
    const std::string& digest = model.dataset_digest;
    if (plan.dataset_digest != digest || balance.dataset_digest != digest ||
        trim.dataset_digest != digest) {
        throw ProvenanceError("model, bin plan, balance report and trim decision must all "
                              "reference the same dataset digest");
    }
    if (!balance.balanced && !override_balance) {
        throw DesignNotReadyError(
            "design not ready: worst within-bin |smd| " + format_double(balance.worst_abs_smd) +
            " exceeds threshold " + format_double(balance.threshold) +
            "; refine the propensity model or pass override");
    }
    DesignReport report;
    report.model_digest = model.digest();
    report.dataset_digest = digest;
    report.plan = plan;
    report.balance = balance;
    report.trim = trim;
    report.frozen = true;
    report.override_used = override_balance && !balance.balanced;
    report.history = std::move(history);
    return report;
}

std::string DesignReport::to_json() const {
    ordered_json j;
    j["frozen"] = frozen;
    j["override_used"] = override_used;
    j["model_digest"] = model_digest;
    j["dataset_digest"] = dataset_digest;
    j["bin_method"] = plan.method == BinMethod::quantile ? "quantile" : "fixed-width";
    j["bin_edges"] = plan.edges;
    j["balance"] = {{"threshold", balance.threshold},
                    {"worst_abs_smd", balance.worst_abs_smd},
                    {"balanced", balance.balanced},
                    {"empty_arm_bins", balance.empty_arm_bins}};
    j["trim"] = {{"rule", trim.rule == TrimRule::arm_overlap ? "arm-overlap" : "lp-window"},
                 {"support_lo", trim.support_lo},
                 {"support_hi", trim.support_hi},
                 {"n_retained", trim.retained_ids.size()},
                 {"n_dropped", trim.dropped.size()}};
    j["retained_ids"] = trim.retained_ids;
    ordered_json dropped = ordered_json::array();
    for (const auto& [id, side] : trim.dropped) {
        dropped.push_back({{"unit_id", id},
                           {"reason", side == DropSide::below_support ? "below-support"
                                                                      : "above-support"}});
    }
    j["dropped"] = std::move(dropped);
    ordered_json assign = ordered_json::array();
    for (std::size_t i = 0; i < plan.unit_ids.size(); ++i) {
        assign.push_back({{"unit_id", plan.unit_ids[i]}, {"bin", plan.bin_of_unit[i]}});
    }
    j["bin_assignments"] = std::move(assign);
    j["history"] = history;
    return j.dump(2) + "\n";
}

DesignReport DesignReport::from_json(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const std::exception& e) {
        throw ValidationError(std::string("invalid design json: ") + e.what());
    }
    DesignReport r;
    r.frozen = j.at("frozen").get<bool>();
    r.override_used = j.value("override_used", false);
    r.model_digest = j.at("model_digest").get<std::string>();
    r.dataset_digest = j.at("dataset_digest").get<std::string>();
    r.plan.method = j.value("bin_method", "quantile") == "quantile" ? BinMethod::quantile
                                                                    : BinMethod::fixed_width;
    r.plan.edges = j.at("bin_edges").get<std::vector<double>>();
    r.plan.dataset_digest = r.dataset_digest;
    r.balance.threshold = j.at("balance").at("threshold").get<double>();
    r.balance.worst_abs_smd = j.at("balance").at("worst_abs_smd").get<double>();
    r.balance.balanced = j.at("balance").at("balanced").get<bool>();
    r.balance.empty_arm_bins = j.at("balance").at("empty_arm_bins").get<std::vector<int>>();
    r.balance.dataset_digest = r.dataset_digest;
    const auto& t = j.at("trim");
    r.trim.rule = t.at("rule").get<std::string>() == "arm-overlap" ? TrimRule::arm_overlap
                                                                   : TrimRule::lp_window;
    r.trim.support_lo = t.at("support_lo").get<double>();
    r.trim.support_hi = t.at("support_hi").get<double>();
    r.trim.retained_ids = j.at("retained_ids").get<std::vector<std::string>>();
    for (const auto& d : j.at("dropped")) {
        r.trim.dropped.emplace_back(d.at("unit_id").get<std::string>(),
                                    d.at("reason").get<std::string>() == "below-support"
                                        ? DropSide::below_support
                                        : DropSide::above_support);
    }
    r.trim.dataset_digest = r.dataset_digest;
    for (const auto& a : j.at("bin_assignments")) {
        r.plan.unit_ids.push_back(a.at("unit_id").get<std::string>());
        r.plan.bin_of_unit.push_back(a.at("bin").get<int>());
    }
    if (j.contains("history")) r.history = j.at("history").get<std::vector<std::string>>();
    return r;
}

std::string DesignReport::digest() const { return digest_bytes(to_json()); }

}  // namespace causal
