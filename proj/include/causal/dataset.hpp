#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "causal/histogram.hpp"

namespace causal {

struct DesignReport;  // design.hpp

enum class ColumnKind { numeric, categorical };

struct SchemaColumn {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
    // Categorical levels in sorted order; empty means "infer from data at
    // load". The first level is the reference and gets no indicator.
    std::vector<std::string> levels;
};

// Declares the covariate columns and how they encode. Encoding is
// deterministic: numeric columns map to themselves, a categorical column
// with L levels maps to L-1 indicators (reference = first sorted level).
struct CovariateSchema {
    std::vector<SchemaColumn> columns;

    std::size_t encoded_width() const;
    std::vector<std::string> encoded_names() const;
    const SchemaColumn* find(const std::string& name) const;
    // [first encoded column, count) for a schema column.
    std::pair<std::size_t, std::size_t> encoded_range(const std::string& name) const;

    std::string to_json() const;
    static CovariateSchema from_json(const std::string& text);
};

struct Rejection {
    std::int64_t row_index = 0;  // 1-based data row (header excluded)
    std::string reason;
};

enum class Group { treated, control, all };

struct ReleaseRecord {
    std::string design_digest;
};

// Immutable unit-level table. Outcomes are stored but sealed ("in escrow")
// until release_escrow is called with a frozen design whose dataset digest
// matches; every outcome accessor throws EscrowViolation until then.
class Dataset {
public:
    std::size_t n_units() const { return ids_.size(); }
    const CovariateSchema& schema() const { return schema_; }
    const std::string& unit_id(std::size_t i) const { return ids_[i]; }
    const std::vector<std::string>& unit_ids() const { return ids_; }
    int z(std::size_t i) const { return z_[i]; }
    const std::vector<std::int8_t>& treatment() const { return z_; }

    std::span<const double> covariates(std::size_t i) const {
        return {x_.data() + i * width_, width_};
    }
    std::size_t encoded_width() const { return width_; }
    // One encoded column across all units.
    std::vector<double> encoded_column(std::size_t j) const;

    // Decodes the level of a categorical schema column for one unit.
    std::string decode_level(std::size_t i, const std::string& column) const;

    bool escrow_sealed() const { return escrow_; }
    // Throws EscrowViolation while sealed.
    double outcome(std::size_t i) const;
    const std::vector<ReleaseRecord>& audit() const { return audit_; }

    const std::string& digest() const { return digest_; }
    const std::string& outcome_column() const { return outcome_column_; }
    const std::string& treatment_column() const { return treatment_column_; }

    std::size_t n_treated() const;

    friend struct DatasetBuilder;

private:
    CovariateSchema schema_;
    std::vector<std::string> ids_;
    std::vector<double> x_;  // row-major, n x width
    std::size_t width_ = 0;
    std::vector<std::int8_t> z_;
    std::vector<double> y_;
    bool escrow_ = true;
    std::string digest_;
    std::string outcome_column_;
    std::string treatment_column_;
    std::vector<ReleaseRecord> audit_;
};

// Internal access for loaders and release_escrow; not part of the public
// surface probed by the escrow tests.
struct DatasetBuilder {
    static Dataset build(CovariateSchema schema, std::vector<std::string> ids,
                         std::vector<double> x, std::size_t width, std::vector<std::int8_t> z,
                         std::vector<double> y, std::string digest, std::string outcome_column,
                         std::string treatment_column);
    static Dataset unsealed_copy(const Dataset& ds, ReleaseRecord record);
};

struct LoadResult {
    Dataset dataset;
    std::vector<Rejection> rejections;
    // Schema with inferred categorical levels frozen in.
    CovariateSchema resolved_schema;
};

struct LoadOptions {
    // Column holding unit ids; defaults to "unit_id" when present, otherwise
    // ids are synthesized from the row number.
    std::optional<std::string> id_column;
};

LoadResult load_dataset(const std::string& path, const CovariateSchema& schema,
                        const std::string& outcome_column, const std::string& treatment_column,
                        const LoadOptions& opts = {});

// Same contract, over in-memory CSV text. The dataset digest is the FNV-1a
// digest of the text, so a file with identical bytes loads identically.
LoadResult load_dataset_text(std::string_view csv_text, const CovariateSchema& schema,
                             const std::string& outcome_column, const std::string& treatment_column,
                             const LoadOptions& opts = {});

// Unseals outcomes. Requires design.frozen and a dataset digest match;
// records the design digest in the returned dataset's audit trail.
Dataset release_escrow(const Dataset& ds, const DesignReport& design);

// Histogram + moments of one covariate column for a group. Categorical
// columns yield per-level counts.
Histogram summarize_covariate(const Dataset& ds, const std::string& column, Group group,
                              int n_bins = 10);

std::string rejections_to_csv(const std::vector<Rejection>& rejections);

}  // namespace causal
