#include "causal/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "causal/csv.hpp"
#include "causal/design.hpp"
#include "causal/digest.hpp"
#include "causal/errors.hpp"

namespace causal {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

std::optional<double> parse_double(std::string_view raw) {
    std::string_view s = trim(raw);
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

}  // namespace

std::size_t CovariateSchema::encoded_width() const {
    std::size_t w = 0;
    for (const auto& col : columns) {
        if (col.kind == ColumnKind::numeric) {
            w += 1;
        } else {
            w += col.levels.empty() ? 0 : col.levels.size() - 1;
        }
    }
    return w;
}

std::vector<std::string> CovariateSchema::encoded_names() const {
    std::vector<std::string> names;
    for (const auto& col : columns) {
        if (col.kind == ColumnKind::numeric) {
            names.push_back(col.name);
        } else {
            for (std::size_t l = 1; l < col.levels.size(); ++l) {
                names.push_back(col.name + "=" + col.levels[l]);
            }
        }
    }
    return names;
}

const SchemaColumn* CovariateSchema::find(const std::string& name) const {
    for (const auto& col : columns) {
        if (col.name == name) return &col;
    }
    return nullptr;
}

std::pair<std::size_t, std::size_t> CovariateSchema::encoded_range(const std::string& name) const {
    std::size_t offset = 0;
    for (const auto& col : columns) {
        std::size_t w = col.kind == ColumnKind::numeric
                            ? 1
                            : (col.levels.empty() ? 0 : col.levels.size() - 1);
        if (col.name == name) return {offset, w};
        offset += w;
    }
    throw SchemaError("unknown covariate column: " + name);
}

std::string CovariateSchema::to_json() const {
    ordered_json j;
    j["columns"] = ordered_json::array();
    for (const auto& col : columns) {
        ordered_json c;
        c["name"] = col.name;
        c["kind"] = col.kind == ColumnKind::numeric ? "numeric" : "categorical";
        if (col.kind == ColumnKind::categorical) c["levels"] = col.levels;
        j["columns"].push_back(c);
    }
    return j.dump(2) + "\n";
}

CovariateSchema CovariateSchema::from_json(const std::string& text) {
    ordered_json j;
    try {
        j = ordered_json::parse(text);
    } catch (const std::exception& e) {
        throw SchemaError(std::string("invalid schema json: ") + e.what());
    }
    if (!j.contains("columns") || !j["columns"].is_array()) {
        throw SchemaError("schema json must contain a \"columns\" array");
    }
    CovariateSchema schema;
    for (const auto& c : j["columns"]) {
        SchemaColumn col;
        col.name = c.at("name").get<std::string>();
        std::string kind = c.value("kind", "numeric");
        if (kind == "numeric") {
            col.kind = ColumnKind::numeric;
        } else if (kind == "categorical") {
            col.kind = ColumnKind::categorical;
            if (c.contains("levels")) {
                col.levels = c["levels"].get<std::vector<std::string>>();
                std::sort(col.levels.begin(), col.levels.end());
            }
        } else {
            throw SchemaError("unknown column kind '" + kind + "' for column " + col.name);
        }
        schema.columns.push_back(std::move(col));
    }
    return schema;
}

std::vector<double> Dataset::encoded_column(std::size_t j) const {
    if (j >= width_) throw SchemaError("encoded column index out of range");
    std::vector<double> col(n_units());
    for (std::size_t i = 0; i < col.size(); ++i) col[i] = x_[i * width_ + j];
    return col;
}

std::string Dataset::decode_level(std::size_t i, const std::string& column) const {
    const SchemaColumn* col = schema_.find(column);
    if (col == nullptr) throw SchemaError("unknown covariate column: " + column);
    if (col->kind != ColumnKind::categorical) {
        throw SchemaError("column is not categorical: " + column);
    }
    auto [offset, w] = schema_.encoded_range(column);
    for (std::size_t l = 0; l < w; ++l) {
        if (x_[i * width_ + offset + l] == 1.0) return col->levels[l + 1];
    }
    return col->levels.empty() ? std::string() : col->levels.front();
}

double Dataset::outcome(std::size_t i) const {
    if (escrow_) {
        throw EscrowViolation(
            "outcome values are sealed in escrow; freeze the design and call "
            "release_escrow first");
    }
    return y_[i];
}

std::size_t Dataset::n_treated() const {
    std::size_t n = 0;
    for (auto v : z_) n += static_cast<std::size_t>(v);
    return n;
}

Dataset DatasetBuilder::build(CovariateSchema schema, std::vector<std::string> ids,
                              std::vector<double> x, std::size_t width,
                              std::vector<std::int8_t> z, std::vector<double> y,
                              std::string digest, std::string outcome_column,
                              std::string treatment_column) {
    Dataset ds;
    ds.schema_ = std::move(schema);
    ds.ids_ = std::move(ids);
    ds.x_ = std::move(x);
    ds.width_ = width;
    ds.z_ = std::move(z);
    ds.y_ = std::move(y);
    ds.escrow_ = true;
    ds.digest_ = std::move(digest);
    ds.outcome_column_ = std::move(outcome_column);
    ds.treatment_column_ = std::move(treatment_column);
    return ds;
}

Dataset DatasetBuilder::unsealed_copy(const Dataset& ds, ReleaseRecord record) {
    Dataset out = ds;
    out.escrow_ = false;
    out.audit_.push_back(std::move(record));
    return out;
}

namespace {

LoadResult load_from_table(const CsvTable& table, const std::string& digest,
                           const CovariateSchema& schema, const std::string& outcome_column,
                           const std::string& treatment_column, const LoadOptions& opts) {
    // Resolve declared columns against the header.
    std::vector<int> cov_idx;
    for (const auto& col : schema.columns) {
        int idx = table.column_index(col.name);
        if (idx < 0) throw SchemaError("declared covariate column not in file: " + col.name);
        cov_idx.push_back(idx);
    }
    int out_idx = table.column_index(outcome_column);
    if (out_idx < 0) throw SchemaError("outcome column not in file: " + outcome_column);
    int z_idx = table.column_index(treatment_column);
    if (z_idx < 0) throw SchemaError("treatment column not in file: " + treatment_column);

    int id_idx = -1;
    if (opts.id_column) {
        id_idx = table.column_index(*opts.id_column);
        if (id_idx < 0) throw SchemaError("id column not in file: " + *opts.id_column);
    } else {
        id_idx = table.column_index("unit_id");
    }

    // Hard errors come first: a non-binary treatment value anywhere aborts
    // the load, it is not a per-row rejection.
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        std::string_view raw = trim(table.rows[r][static_cast<std::size_t>(z_idx)]);
        if (raw.empty()) continue;  // missing -> complete-case rejection below
        if (raw != "0" && raw != "1") {
            throw ValidationError("treatment value '" + std::string(raw) + "' at row " +
                                  std::to_string(r + 1) + " is not 0/1");
        }
    }

    std::vector<Rejection> rejections;
    std::vector<std::size_t> kept;
    kept.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        auto reject = [&](const std::string& reason) {
            rejections.push_back({static_cast<std::int64_t>(r + 1), reason});
        };
        if (trim(row[static_cast<std::size_t>(z_idx)]).empty()) {
            reject("missing value in treatment column '" + treatment_column + "'");
            continue;
        }
        if (trim(row[static_cast<std::size_t>(out_idx)]).empty()) {
            reject("missing value in outcome column '" + outcome_column + "'");
            continue;
        }
        if (!parse_double(row[static_cast<std::size_t>(out_idx)])) {
            reject("invalid numeric value in outcome column '" + outcome_column + "'");
            continue;
        }
        if (id_idx >= 0 && trim(row[static_cast<std::size_t>(id_idx)]).empty()) {
            reject("missing unit id");
            continue;
        }
        bool bad = false;
        for (std::size_t c = 0; c < schema.columns.size(); ++c) {
            const auto& col = schema.columns[c];
            std::string_view raw = trim(row[static_cast<std::size_t>(cov_idx[c])]);
            if (raw.empty()) {
                reject("missing value in covariate column '" + col.name + "'");
                bad = true;
                break;
            }
            if (col.kind == ColumnKind::numeric && !parse_double(raw)) {
                reject("invalid numeric value in covariate column '" + col.name + "'");
                bad = true;
                break;
            }
            if (col.kind == ColumnKind::categorical && !col.levels.empty() &&
                !std::binary_search(col.levels.begin(), col.levels.end(), std::string(raw))) {
                reject("unknown level '" + std::string(raw) + "' in categorical column '" +
                       col.name + "'");
                bad = true;
                break;
            }
        }
        if (!bad) kept.push_back(r);
    }

    // Freeze categorical levels: declared ones stay, undeclared ones are the
    // sorted distinct values observed over retained rows.
    CovariateSchema resolved = schema;
    for (std::size_t c = 0; c < resolved.columns.size(); ++c) {
        auto& col = resolved.columns[c];
        if (col.kind != ColumnKind::categorical || !col.levels.empty()) continue;
        std::set<std::string> seen;
        for (std::size_t r : kept) {
            seen.insert(std::string(trim(table.rows[r][static_cast<std::size_t>(cov_idx[c])])));
        }
        col.levels.assign(seen.begin(), seen.end());
    }

    const std::size_t width = resolved.encoded_width();
    std::vector<std::string> ids;
    std::vector<double> x;
    std::vector<std::int8_t> z;
    std::vector<double> y;
    ids.reserve(kept.size());
    x.reserve(kept.size() * width);
    for (std::size_t r : kept) {
        const auto& row = table.rows[r];
        if (id_idx >= 0) {
            ids.emplace_back(trim(row[static_cast<std::size_t>(id_idx)]));
        } else {
            char buf[24];
            std::snprintf(buf, sizeof buf, "u%07zu", r + 1);
            ids.emplace_back(buf);
        }
        for (std::size_t c = 0; c < resolved.columns.size(); ++c) {
            const auto& col = resolved.columns[c];
            std::string_view raw = trim(row[static_cast<std::size_t>(cov_idx[c])]);
            if (col.kind == ColumnKind::numeric) {
                x.push_back(*parse_double(raw));
            } else {
                auto it = std::lower_bound(col.levels.begin(), col.levels.end(), raw);
                std::size_t level = static_cast<std::size_t>(it - col.levels.begin());
                for (std::size_t l = 1; l < col.levels.size(); ++l) {
                    x.push_back(l == level ? 1.0 : 0.0);
                }
            }
        }
        z.push_back(trim(row[static_cast<std::size_t>(z_idx)]) == "1" ? 1 : 0);
        y.push_back(*parse_double(row[static_cast<std::size_t>(out_idx)]));
    }

    std::unordered_set<std::string> unique_ids(ids.begin(), ids.end());
    if (unique_ids.size() != ids.size()) {
        throw ValidationError("duplicate unit ids in input");
    }
    std::size_t nt = 0;
    for (auto v : z) nt += static_cast<std::size_t>(v);
    if (ids.empty() || nt == 0 || nt == ids.size()) {
        throw ValidationError(
            "dataset must contain at least one treated and one control unit");
    }

    LoadResult result{DatasetBuilder::build(resolved, std::move(ids), std::move(x), width,
                                            std::move(z), std::move(y), digest, outcome_column,
                                            treatment_column),
                      std::move(rejections), resolved};
    return result;
}

}  // namespace

LoadResult load_dataset(const std::string& path, const CovariateSchema& schema,
                        const std::string& outcome_column, const std::string& treatment_column,
                        const LoadOptions& opts) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_dataset_text(ss.str(), schema, outcome_column, treatment_column, opts);
}

LoadResult load_dataset_text(std::string_view csv_text, const CovariateSchema& schema,
                             const std::string& outcome_column,
                             const std::string& treatment_column, const LoadOptions& opts) {
    CsvTable table = parse_csv(csv_text);
    return load_from_table(table, digest_bytes(csv_text), schema, outcome_column,
                           treatment_column, opts);
}

Dataset release_escrow(const Dataset& ds, const DesignReport& design) {
    if (!design.frozen) {
        throw EscrowViolation("cannot release escrow: design is not frozen");
    }
    if (design.dataset_digest != ds.digest()) {
        throw ProvenanceError("design was built on a different dataset (digest " +
                              design.dataset_digest + " vs " + ds.digest() + ")");
    }
    return DatasetBuilder::unsealed_copy(ds, ReleaseRecord{design.digest()});
}

Histogram summarize_covariate(const Dataset& ds, const std::string& column, Group group,
                              int n_bins) {
    const SchemaColumn* col = ds.schema().find(column);
    if (col == nullptr) throw SchemaError("unknown covariate column: " + column);

    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < ds.n_units(); ++i) {
        if (group == Group::all || (group == Group::treated) == (ds.z(i) == 1)) {
            members.push_back(i);
        }
    }

    if (col->kind == ColumnKind::categorical) {
        Histogram h;
        h.labels = col->levels;
        h.counts.assign(col->levels.size(), 0);
        for (std::size_t i : members) {
            std::string level = ds.decode_level(i, column);
            auto it = std::lower_bound(col->levels.begin(), col->levels.end(), level);
            ++h.counts[static_cast<std::size_t>(it - col->levels.begin())];
        }
        h.n = static_cast<std::int64_t>(members.size());
        return h;
    }

    auto [offset, w] = ds.schema().encoded_range(column);
    (void)w;
    std::vector<double> values;
    values.reserve(members.size());
    for (std::size_t i : members) values.push_back(ds.covariates(i)[offset]);
    return histogram_equal_width(values, n_bins);
}

std::string rejections_to_csv(const std::vector<Rejection>& rejections) {
    CsvWriter w({"row_index", "reason"});
    for (const auto& r : rejections) {
        w.add_row({std::to_string(r.row_index), r.reason});
    }
    return w.str();
}

}  // namespace causal
