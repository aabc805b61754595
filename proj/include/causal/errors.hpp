#pragma once

#include <stdexcept>
#include <string>

namespace causal {

// Base class for all library errors. Subclasses map 1:1 onto the CLI's
// documented exit codes.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// A declared column is absent or has the wrong kind.
struct SchemaError : Error {
    using Error::Error;
};

// Input data violates a load-time contract (non-binary treatment, single-arm
// dataset, duplicate ids, ...).
struct ValidationError : Error {
    using Error::Error;
};

// An outcome value was requested while the dataset is still sealed, or a
// release was attempted without a frozen design.
struct EscrowViolation : Error {
    using Error::Error;
};

// Artifacts built from different datasets (digest mismatch).
struct ProvenanceError : Error {
    using Error::Error;
};

// freeze_design refused: balance not met and no override.
struct DesignNotReadyError : Error {
    using Error::Error;
};

// Trimming or matching left an arm empty; the data cannot support the
// requested comparison.
struct SupportError : Error {
    using Error::Error;
};

// Requested stratification is impossible (too few distinct score values).
struct BinningError : Error {
    using Error::Error;
};

// Normal-equation or IRLS system is singular (constant/collinear columns
// without ridge).
struct SingularSystemError : Error {
    using Error::Error;
};

// Simulator configuration cannot produce a usable population.
struct ConfigError : Error {
    using Error::Error;
};

// List-vs-list evaluation over mismatched populations or ids.
struct EvaluationError : Error {
    using Error::Error;
};

// File could not be read or written.
struct IoError : Error {
    using Error::Error;
};

}  // namespace causal
