#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hybridann {

// ---------------------------------------------------------------------------
// Error types
// ---------------------------------------------------------------------------

struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct StateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CalibrationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Parse failures carry the byte offset where the file went bad.
struct ParseError : std::runtime_error {
    std::uint64_t offset;
    ParseError(const std::string& msg, std::uint64_t off)
        : std::runtime_error(msg + " (at byte " + std::to_string(off) + ")"), offset(off) {}
};

// ---------------------------------------------------------------------------
// Vector representations
// ---------------------------------------------------------------------------

using DenseVector = std::vector<float>;

/// Sparse vector as parallel index/value arrays, indices strictly increasing.
struct SparseVector {
    std::vector<std::uint32_t> indices;
    std::vector<float> values;

    std::size_t nnz() const { return indices.size(); }
};

// Non-owning view over one CSR row.
struct SparseView {
    const std::uint32_t* indices = nullptr;
    const float* values = nullptr;
    std::size_t nnz = 0;

    SparseView() = default;
    SparseView(const std::uint32_t* idx, const float* val, std::size_t n)
        : indices(idx), values(val), nnz(n) {}
    SparseView(const SparseVector& v)  // NOLINT: implicit by design
        : indices(v.indices.data()), values(v.values.data()), nnz(v.indices.size()) {}
};

/// Logical concatenation of a dense and a sparse half. Never materialized
/// as one flat array; the two halves are scored by separate kernels.
struct HybridVector {
    DenseVector dense;
    SparseVector sparse;
};

// One retrieved hit. Result lists are sorted ascending by (distance, id).
struct ResultItem {
    std::uint32_t id = 0;
    float distance = 0.0f;
};

using ResultSet = std::vector<ResultItem>;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Fraction of non-zero entries to drop per stored sparse vector.
struct PruneConfig {
    float ratio = 0.0f;  // in [0,1)

    void validate() const {
        if (!(ratio >= 0.0f && ratio < 1.0f))
            throw ConfigError("prune ratio must be in [0,1), got " + std::to_string(ratio));
    }
};

/// Calibration outputs: sparse norm denominator, scale factor gamma,
/// dense fusion weight alpha.
struct AlignmentParams {
    float norm_denominator = 1.0f;
    float gamma = 1.0f;
    float alpha = 0.5f;

    void validate() const {
        if (!(norm_denominator > 0.0f))
            throw ConfigError("norm_denominator must be > 0");
        if (!(gamma > 0.0f)) throw ConfigError("gamma must be > 0");
        if (!(alpha >= 0.0f && alpha <= 1.0f))
            throw ConfigError("alpha must be in [0,1], got " + std::to_string(alpha));
    }
};

}  // namespace hybridann
