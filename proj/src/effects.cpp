#include "causal/effects.hpp"

#include <algorithm>
#include <cmath>

#include "causal/csv.hpp"
#include "causal/errors.hpp"
#include "causal/histogram.hpp"

namespace causal {

EffectTable unit_effects(const MatchSet& ms, const Dataset& ds) {
    auto imputed = impute_clones(ms, ds);
    EffectTable table;
    table.dataset_digest = ds.digest();
    table.rows.reserve(imputed.size());
    for (const auto& rec : imputed) {
        EffectRow row;
        row.unit_id = rec.focal_id;
        row.z = rec.focal_z;
        row.k_prime = rec.k_prime;
        row.tau_hat = rec.focal_z == 1 ? rec.own_outcome - rec.counterfactual
                                       : rec.counterfactual - rec.own_outcome;
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::string EffectTable::to_csv() const {
    CsvWriter w({"unit_id", "arm", "k_prime", "tau_hat"});
    for (const auto& r : rows) {
        w.add_row({r.unit_id, r.z == 1 ? "treated" : "control", std::to_string(r.k_prime),
                   format_double(r.tau_hat)});
    }
    return w.str();
}

AggregateResult aggregate(const EffectTable& effects,
                          const std::function<bool(const EffectRow&)>& subgroup) {
    std::vector<double> selected;
    for (const auto& row : effects.rows) {
        if (subgroup(row)) selected.push_back(row.tau_hat);
    }
    if (selected.empty()) {
        throw EvaluationError("subgroup selects no effect rows");
    }
    return {sample_mean(selected), sample_sd(selected), selected.size()};
}

TargetList build_target_list(const EffectTable& effects) {
    for (const auto& row : effects.rows) {
        if (row.z != 0) {
            throw ValidationError(
                "target lists rank untreated units; pass control-focal effects only");
        }
    }
    if (effects.rows.empty()) {
        throw ValidationError("no effect rows to rank");
    }

    TargetList list;
    list.entries.reserve(effects.rows.size());
    for (const auto& row : effects.rows) {
        list.entries.push_back({row.unit_id, row.tau_hat, 0});
    }
    std::sort(list.entries.begin(), list.entries.end(),
              [](const TargetEntry& a, const TargetEntry& b) {
                  if (a.tau_hat != b.tau_hat) return a.tau_hat > b.tau_hat;
                  return a.unit_id < b.unit_id;
              });
    const std::size_t n = list.entries.size();
    for (std::size_t r = 0; r < n; ++r) {
        list.entries[r].decile = 10 - static_cast<int>(r * 10 / n);
    }
    if (n < 10) {
        list.note = "fewer than 10 units; decile labels are spread over " +
                    std::to_string(n) + " quantile groups";
    }
    return list;
}

std::string TargetList::to_csv() const {
    CsvWriter w({"rank", "unit_id", "tau_hat", "decile"});
    for (std::size_t r = 0; r < entries.size(); ++r) {
        w.add_row({std::to_string(r + 1), entries[r].unit_id,
                   format_double(entries[r].tau_hat), std::to_string(entries[r].decile)});
    }
    return w.str();
}

TargetList TargetList::from_csv(const std::string& text) {
    CsvTable table = parse_csv(text);
    int id_idx = table.column_index("unit_id");
    int tau_idx = table.column_index("tau_hat");
    int dec_idx = table.column_index("decile");
    if (id_idx < 0 || tau_idx < 0 || dec_idx < 0) {
        throw ValidationError("target list csv needs unit_id, tau_hat and decile columns");
    }
    TargetList list;
    for (const auto& row : table.rows) {
        TargetEntry e;
        e.unit_id = row[static_cast<std::size_t>(id_idx)];
        e.tau_hat = std::stod(row[static_cast<std::size_t>(tau_idx)]);
        e.decile = std::stoi(row[static_cast<std::size_t>(dec_idx)]);
        list.entries.push_back(std::move(e));
    }
    return list;
}

DecileComparison compare_lists(const TargetList& list_a, const TargetList& list_b,
                               const std::map<std::string, double>& realized,
                               const std::string& name_a, const std::string& name_b,
                               const std::string& realized_definition) {
    auto ids_of = [](const TargetList& l) {
        std::vector<std::string> ids;
        ids.reserve(l.entries.size());
        for (const auto& e : l.entries) ids.push_back(e.unit_id);
        std::sort(ids.begin(), ids.end());
        return ids;
    };
    if (ids_of(list_a) != ids_of(list_b)) {
        throw EvaluationError("the two lists do not rank the same evaluation population");
    }

    DecileComparison cmp;
    cmp.realized_definition = realized_definition;
    auto add_list = [&](const TargetList& list, const std::string& name) {
        std::map<int, std::pair<double, std::int64_t>> per_decile;
        for (const auto& e : list.entries) {
            auto it = realized.find(e.unit_id);
            if (it == realized.end()) {
                throw EvaluationError("no realized value for unit " + e.unit_id);
            }
            auto& slot = per_decile[e.decile];
            slot.first += it->second;
            slot.second += 1;
        }
        for (auto it = per_decile.rbegin(); it != per_decile.rend(); ++it) {
            cmp.rows.push_back({name, it->first,
                                it->second.first / static_cast<double>(it->second.second),
                                it->second.second});
        }
    };
    add_list(list_a, name_a);
    add_list(list_b, name_b);
    return cmp;
}

std::string DecileComparison::to_csv() const {
    CsvWriter w({"list", "decile", "mean_realized", "count"});
    for (const auto& r : rows) {
        w.add_row({r.list, std::to_string(r.decile), format_double(r.mean_realized),
                   std::to_string(r.count)});
    }
    return w.str();
}

}  // namespace causal
