#include "causal/matching.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <unordered_map>
#include <unordered_set>

#include "causal/csv.hpp"
#include "causal/errors.hpp"
#include "causal/histogram.hpp"

namespace causal {

namespace {

struct Unit {
    std::string id;
    double lp = 0.0;
    int z = 0;
};

bool unit_order(const Unit& a, const Unit& b) {
    if (a.lp != b.lp) return a.lp < b.lp;
    return a.id < b.id;
}

// Greedy k-nearest collection against a sorted pool with removal.
class SortedPool {
public:
    explicit SortedPool(std::vector<Unit> sorted) : units_(std::move(sorted)) {
        const int n = static_cast<int>(units_.size());
        alive_.assign(static_cast<std::size_t>(n), true);
        left_.resize(static_cast<std::size_t>(n));
        right_.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            left_[static_cast<std::size_t>(i)] = i - 1;
            right_[static_cast<std::size_t>(i)] = i + 1;
        }
        n_alive_ = n;
    }

    const Unit& unit(int i) const { return units_[static_cast<std::size_t>(i)]; }
    int size() const { return static_cast<int>(units_.size()); }
    int n_alive() const { return n_alive_; }

    // Nearest alive neighbours around lp, up to k, within caliper; candidates
    // at equal distance break ties by unit id. Returns unit indexes.
    std::vector<int> take_nearest(double lp, const std::string& focal_id, int k, double caliper,
                                  bool remove_taken) {
        std::vector<int> taken;
        if (units_.empty() || n_alive_ == 0) return taken;
        const int n = static_cast<int>(units_.size());
        // First alive index with lp >= focal lp.
        int hi = static_cast<int>(std::lower_bound(units_.begin(), units_.end(), lp,
                                                   [](const Unit& u, double v) {
                                                       return u.lp < v;
                                                   }) -
                                  units_.begin());
        while (hi < n && !alive_[static_cast<std::size_t>(hi)]) {
            hi = right_[static_cast<std::size_t>(hi)];
        }
        int lo = hi > 0 ? hi - 1 : -1;
        if (hi >= n) lo = last_alive_before(n);
        while (lo >= 0 && !alive_[static_cast<std::size_t>(lo)]) {
            lo = left_[static_cast<std::size_t>(lo)];
        }

        while (static_cast<int>(taken.size()) < k && (lo >= 0 || hi < n)) {
            double dlo = lo >= 0 ? std::abs(lp - units_[static_cast<std::size_t>(lo)].lp)
                                 : std::numeric_limits<double>::infinity();
            double dhi = hi < n ? std::abs(units_[static_cast<std::size_t>(hi)].lp - lp)
                                : std::numeric_limits<double>::infinity();
            int pick;
            if (dlo < dhi) {
                pick = lo;
            } else if (dhi < dlo) {
                pick = hi;
            } else if (lo >= 0 && hi < n) {
                pick = units_[static_cast<std::size_t>(lo)].id <
                               units_[static_cast<std::size_t>(hi)].id
                           ? lo
                           : hi;
            } else {
                pick = lo >= 0 ? lo : hi;
            }
            double d = std::abs(units_[static_cast<std::size_t>(pick)].lp - lp);
            if (d > caliper) break;
            taken.push_back(pick);
            if (pick == lo) {
                lo = left_[static_cast<std::size_t>(lo)];
                while (lo >= 0 && !alive_[static_cast<std::size_t>(lo)]) {
                    lo = left_[static_cast<std::size_t>(lo)];
                }
            } else {
                hi = right_[static_cast<std::size_t>(hi)];
                while (hi < n && !alive_[static_cast<std::size_t>(hi)]) {
                    hi = right_[static_cast<std::size_t>(hi)];
                }
            }
        }
        (void)focal_id;
        if (remove_taken) {
            for (int i : taken) detach(i);
        }
        return taken;
    }

    // Any pool unit (alive or not) within caliper of lp?
    bool any_within(double lp, double caliper) const {
        if (units_.empty()) return false;
        auto it = std::lower_bound(units_.begin(), units_.end(), lp,
                                   [](const Unit& u, double v) { return u.lp < v; });
        if (it != units_.end() && std::abs(it->lp - lp) <= caliper) return true;
        if (it != units_.begin() && std::abs(lp - std::prev(it)->lp) <= caliper) return true;
        return false;
    }

private:
    int last_alive_before(int n) {
        int i = n - 1;
        while (i >= 0 && !alive_[static_cast<std::size_t>(i)]) {
            i = left_[static_cast<std::size_t>(i)];
        }
        return i;
    }

    void detach(int i) {
        alive_[static_cast<std::size_t>(i)] = false;
        int l = left_[static_cast<std::size_t>(i)];
        int r = right_[static_cast<std::size_t>(i)];
        if (r < static_cast<int>(units_.size())) left_[static_cast<std::size_t>(r)] = l;
        if (l >= 0) right_[static_cast<std::size_t>(l)] = r;
        --n_alive_;
    }

    std::vector<Unit> units_;
    std::vector<bool> alive_;
    std::vector<int> left_, right_;
    int n_alive_ = 0;
};

void greedy_direction(const std::vector<Unit>& focals_in, std::vector<Unit> pool_sorted,
                      const MatchSpec& spec, double caliper, MatchSet& out) {
    std::vector<Unit> focals = focals_in;
    // Hardest-to-match extremes first: descending lp, ties by id.
    std::sort(focals.begin(), focals.end(), [](const Unit& a, const Unit& b) {
        if (a.lp != b.lp) return a.lp > b.lp;
        return a.id < b.id;
    });
    SortedPool pool(std::move(pool_sorted));
    for (const auto& f : focals) {
        auto taken = pool.take_nearest(f.lp, f.id, spec.k, caliper, !spec.replacement);
        if (taken.empty()) {
            out.unmatched.emplace_back(f.id, pool.any_within(f.lp, caliper)
                                                 ? UnmatchedReason::pool_exhausted
                                                 : UnmatchedReason::caliper);
            continue;
        }
        MatchGroup g;
        g.focal_id = f.id;
        g.focal_z = f.z;
        for (int i : taken) {
            g.clone_ids.push_back(pool.unit(i).id);
            double d = std::abs(pool.unit(i).lp - f.lp);
            g.distances.push_back(d);
            out.total_distance += d;
        }
        out.groups.push_back(std::move(g));
    }
}

// Min-cost max-flow by successive shortest paths with Dijkstra + potentials.
// All arc costs are nonnegative |lp| gaps, so zero initial potentials work.
class MinCostFlow {
public:
    explicit MinCostFlow(int n) : head_(static_cast<std::size_t>(n), -1) {}

    void add_edge(int from, int to, int cap, double cost) {
        edges_.push_back({to, head_[static_cast<std::size_t>(from)], cap, cost});
        head_[static_cast<std::size_t>(from)] = static_cast<int>(edges_.size()) - 1;
        edges_.push_back({from, head_[static_cast<std::size_t>(to)], 0, -cost});
        head_[static_cast<std::size_t>(to)] = static_cast<int>(edges_.size()) - 1;
    }

    // Runs to maximum flow; successive shortest paths give the minimum cost
    // at every intermediate flow value, hence at the maximum too.
    void solve(int source, int sink) {
        const auto n = head_.size();
        std::vector<double> potential(n, 0.0), dist(n);
        std::vector<int> parent_edge(n);
        const double inf = std::numeric_limits<double>::infinity();
        while (true) {
            std::fill(dist.begin(), dist.end(), inf);
            std::fill(parent_edge.begin(), parent_edge.end(), -1);
            dist[static_cast<std::size_t>(source)] = 0.0;
            using Item = std::pair<double, int>;
            std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
            pq.push({0.0, source});
            while (!pq.empty()) {
                auto [d, u] = pq.top();
                pq.pop();
                if (d > dist[static_cast<std::size_t>(u)]) continue;
                for (int e = head_[static_cast<std::size_t>(u)]; e != -1;
                     e = edges_[static_cast<std::size_t>(e)].next) {
                    const auto& edge = edges_[static_cast<std::size_t>(e)];
                    if (edge.cap <= 0) continue;
                    double nd = d + edge.cost + potential[static_cast<std::size_t>(u)] -
                                potential[static_cast<std::size_t>(edge.to)];
                    if (nd < dist[static_cast<std::size_t>(edge.to)]) {
                        dist[static_cast<std::size_t>(edge.to)] = nd;
                        parent_edge[static_cast<std::size_t>(edge.to)] = e;
                        pq.push({nd, edge.to});
                    }
                }
            }
            if (parent_edge[static_cast<std::size_t>(sink)] == -1) break;
            for (std::size_t v = 0; v < n; ++v) {
                if (dist[v] < inf) potential[v] += dist[v];
            }
            // Bottleneck along the path is 1 (focal->pool arcs have cap 1).
            int v = sink;
            while (v != source) {
                int e = parent_edge[static_cast<std::size_t>(v)];
                edges_[static_cast<std::size_t>(e)].cap -= 1;
                edges_[static_cast<std::size_t>(e ^ 1)].cap += 1;
                v = edges_[static_cast<std::size_t>(e ^ 1)].to;
            }
        }
    }

    struct Edge {
        int to;
        int next;
        int cap;
        double cost;
    };
    const std::vector<Edge>& edges() const { return edges_; }

private:
    std::vector<int> head_;
    std::vector<Edge> edges_;
};

void optimal_direction(const std::vector<Unit>& focals_in, std::vector<Unit> pool_sorted,
                       const MatchSpec& spec, double caliper, MatchSet& out) {
    if (spec.replacement) {
        // With replacement each clone choice is independent of the others,
        // so the per-focal k nearest are already optimal.
        greedy_direction(focals_in, std::move(pool_sorted), spec, caliper, out);
        return;
    }

    std::vector<Unit> focals = focals_in;
    std::sort(focals.begin(), focals.end(), unit_order);
    const std::vector<Unit>& pool = pool_sorted;
    const int nf = static_cast<int>(focals.size());
    const int np = static_cast<int>(pool.size());

    // Candidate edges restricted by caliper via range lookup.
    std::vector<std::vector<int>> candidates(static_cast<std::size_t>(nf));
    std::size_t n_edges = 0;
    for (int i = 0; i < nf; ++i) {
        double lp = focals[static_cast<std::size_t>(i)].lp;
        auto lo = std::lower_bound(pool.begin(), pool.end(), lp - caliper,
                                   [](const Unit& u, double v) { return u.lp < v; });
        auto hi = std::upper_bound(pool.begin(), pool.end(), lp + caliper,
                                   [](double v, const Unit& u) { return v < u.lp; });
        for (auto it = lo; it != hi; ++it) {
            candidates[static_cast<std::size_t>(i)].push_back(
                static_cast<int>(it - pool.begin()));
        }
        n_edges += candidates[static_cast<std::size_t>(i)].size();
    }
    if (n_edges > 50'000'000) {
        throw ConfigError("optimal matching graph too large (" + std::to_string(n_edges) +
                          " edges); use a tighter caliper, within-bin matching, or greedy");
    }

    const int source = 0;
    const int sink = nf + np + 1;
    MinCostFlow flow(nf + np + 2);
    for (int i = 0; i < nf; ++i) flow.add_edge(source, 1 + i, spec.k, 0.0);
    std::vector<std::vector<int>> edge_id(static_cast<std::size_t>(nf));
    for (int i = 0; i < nf; ++i) {
        for (int j : candidates[static_cast<std::size_t>(i)]) {
            edge_id[static_cast<std::size_t>(i)].push_back(
                static_cast<int>(flow.edges().size()));
            flow.add_edge(1 + i, 1 + nf + j,  1,
                          std::abs(focals[static_cast<std::size_t>(i)].lp -
                                   pool[static_cast<std::size_t>(j)].lp));
        }
    }
    for (int j = 0; j < np; ++j) flow.add_edge(1 + nf + j, sink, 1, 0.0);
    flow.solve(source, sink);

    for (int i = 0; i < nf; ++i) {
        const auto& f = focals[static_cast<std::size_t>(i)];
        MatchGroup g;
        g.focal_id = f.id;
        g.focal_z = f.z;
        std::vector<std::pair<double, std::string>> clones;
        for (std::size_t c = 0; c < candidates[static_cast<std::size_t>(i)].size(); ++c) {
            int e = edge_id[static_cast<std::size_t>(i)][c];
            // A saturated forward arc (cap drained to 0) carries the match.
            if (flow.edges()[static_cast<std::size_t>(e)].cap == 0) {
                int j = candidates[static_cast<std::size_t>(i)][c];
                clones.emplace_back(std::abs(f.lp - pool[static_cast<std::size_t>(j)].lp),
                                    pool[static_cast<std::size_t>(j)].id);
            }
        }
        if (clones.empty()) {
            out.unmatched.emplace_back(f.id, candidates[static_cast<std::size_t>(i)].empty()
                                                 ? UnmatchedReason::caliper
                                                 : UnmatchedReason::pool_exhausted);
            continue;
        }
        std::sort(clones.begin(), clones.end());
        for (auto& [d, id] : clones) {
            g.clone_ids.push_back(id);
            g.distances.push_back(d);
            out.total_distance += d;
        }
        out.groups.push_back(std::move(g));
    }
}

void run_direction(const std::vector<Unit>& focals, std::vector<Unit> pool,
                   const MatchSpec& spec, double caliper, MatchSet& out) {
    std::sort(pool.begin(), pool.end(), unit_order);
    if (spec.method == MatchMethod::greedy) {
        greedy_direction(focals, std::move(pool), spec, caliper, out);
    } else {
        optimal_direction(focals, std::move(pool), spec, caliper, out);
    }
}

}  // namespace

std::size_t MatchSet::n_pairs() const {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.clone_ids.size();
    return n;
}

std::string MatchSet::to_csv() const {
    CsvWriter w({"focal_id", "clone_id", "distance", "group_index"});
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const auto& g = groups[gi];
        for (std::size_t c = 0; c < g.clone_ids.size(); ++c) {
            w.add_row({g.focal_id, g.clone_ids[c], format_double(g.distances[c]),
                       std::to_string(gi)});
        }
    }
    return w.str();
}

std::string MatchSet::unmatched_csv() const {
    CsvWriter w({"focal_id", "reason"});
    for (const auto& [id, reason] : unmatched) {
        w.add_row({id, reason == UnmatchedReason::caliper ? "caliper" : "pool-exhausted"});
    }
    return w.str();
}

MatchSet match(const ScoreTable& scores, const TrimDecision& trim, const MatchSpec& spec,
               const BinPlan* plan) {
    if (spec.k < 1) throw ConfigError("match ratio k must be >= 1");
    if (spec.caliper != MatchSpec::kCaliperAuto &&
        !(spec.caliper > 0 || std::isinf(spec.caliper))) {
        throw ConfigError("caliper must be positive, infinite (none), or auto");
    }
    if (trim.dataset_digest != scores.dataset_digest) {
        throw ProvenanceError("trim decision and scores reference different datasets");
    }
    if (spec.within_bins && plan == nullptr) {
        throw ConfigError("within-bin matching requires a bin plan");
    }

    std::unordered_set<std::string> retained(trim.retained_ids.begin(),
                                             trim.retained_ids.end());
    std::unordered_map<std::string, int> bin_of;
    if (spec.within_bins) {
        for (std::size_t i = 0; i < plan->unit_ids.size(); ++i) {
            bin_of.emplace(plan->unit_ids[i], plan->bin_of_unit[i]);
        }
    }

    std::vector<Unit> treated, control;
    std::vector<double> pooled_lp;
    for (const auto& row : scores.rows) {
        if (retained.find(row.unit_id) == retained.end()) continue;
        (row.z == 1 ? treated : control).push_back({row.unit_id, row.lp, row.z});
        pooled_lp.push_back(row.lp);
    }

    double caliper = spec.caliper;
    if (caliper == MatchSpec::kCaliperAuto) {
        caliper = 0.2 * sample_sd(pooled_lp);
    }

    MatchSet out;
    out.dataset_digest = scores.dataset_digest;
    out.resolved_caliper = caliper;

    auto run = [&](const std::vector<Unit>& focals, const std::vector<Unit>& pool) {
        if (focals.empty()) {
            throw SupportError("focal arm is empty after trimming");
        }
        if (!spec.within_bins) {
            run_direction(focals, pool, spec, caliper, out);
            return;
        }
        int n_bins = plan->n_bins();
        std::vector<std::vector<Unit>> f_by_bin(static_cast<std::size_t>(n_bins)),
            p_by_bin(static_cast<std::size_t>(n_bins));
        for (const auto& u : focals) {
            auto it = bin_of.find(u.id);
            if (it == bin_of.end()) throw ProvenanceError("bin plan missing unit " + u.id);
            f_by_bin[static_cast<std::size_t>(it->second)].push_back(u);
        }
        for (const auto& u : pool) {
            auto it = bin_of.find(u.id);
            if (it == bin_of.end()) throw ProvenanceError("bin plan missing unit " + u.id);
            p_by_bin[static_cast<std::size_t>(it->second)].push_back(u);
        }
        for (int b = 0; b < n_bins; ++b) {
            const auto& fb = f_by_bin[static_cast<std::size_t>(b)];
            if (fb.empty()) continue;
            const auto& pb = p_by_bin[static_cast<std::size_t>(b)];
            if (pb.empty()) {
                for (const auto& u : fb) {
                    out.unmatched.emplace_back(u.id, UnmatchedReason::pool_exhausted);
                }
                continue;
            }
            run_direction(fb, pb, spec, caliper, out);
        }
    };

    if (spec.direction == MatchDirection::treated_focal ||
        spec.direction == MatchDirection::both) {
        run(treated, control);
    }
    if (spec.direction == MatchDirection::control_focal ||
        spec.direction == MatchDirection::both) {
        run(control, treated);
    }
    return out;
}

std::vector<ImputedOutcome> impute_clones(const MatchSet& ms, const Dataset& ds) {
    if (ds.escrow_sealed()) {
        throw EscrowViolation("impute_clones needs a released dataset");
    }
    if (ms.dataset_digest != ds.digest()) {
        throw ProvenanceError("match set was built on a different dataset");
    }
    std::unordered_map<std::string, std::size_t> index;
    index.reserve(ds.n_units());
    for (std::size_t i = 0; i < ds.n_units(); ++i) index.emplace(ds.unit_id(i), i);

    std::vector<ImputedOutcome> out;
    out.reserve(ms.groups.size());
    for (const auto& g : ms.groups) {
        auto fit = index.find(g.focal_id);
        if (fit == index.end()) {
            throw ProvenanceError("match set references unknown unit " + g.focal_id);
        }
        double sum = 0.0;
        for (const auto& cid : g.clone_ids) {
            auto cit = index.find(cid);
            if (cit == index.end()) {
                throw ProvenanceError("match set references unknown unit " + cid);
            }
            sum += ds.outcome(cit->second);
        }
        ImputedOutcome rec;
        rec.focal_id = g.focal_id;
        rec.focal_z = g.focal_z;
        rec.k_prime = static_cast<int>(g.clone_ids.size());
        rec.counterfactual = sum / static_cast<double>(g.clone_ids.size());
        rec.own_outcome = ds.outcome(fit->second);
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace causal
