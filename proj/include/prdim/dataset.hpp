#pragma once

#include <optional>
#include <string>

#include "prdim/rng.hpp"
#include "prdim/tensor.hpp"

namespace prdim {

// For windowed series data: D = features * steps, flattened feature-major
// so column k*steps + t holds feature k at window offset t. Temporal
// neighbours of a column live at +-1 within the same feature block.
struct AxisMeta {
    std::size_t features = 0;
    std::size_t steps = 0;
};

// x holds ground-truth values where they are known, NaN where the truth is
// genuinely unknown (e.g. natural missing in a CSV). m is the observation
// mask (1 = observed); a, when present, marks artificially hidden entries
// and satisfies a <= m elementwise. Models never read x directly at m=0;
// they see observed_fill(ds).
struct MaskedDataset {
    Tensor x;  // [N x D]
    Tensor m;  // [N x D], binary
    Tensor a;  // [N x D], binary, optional (empty when absent)
    std::optional<AxisMeta> axis_meta;

    std::size_t rows() const { return x.rows(); }
    std::size_t cols() const { return x.cols(); }
    bool has_artificial() const { return !a.empty(); }

    // Throws if the mask invariants are violated.
    void validate() const;
};

struct NormStats {
    std::vector<double> mean;
    std::vector<double> std;  // population convention; degenerate columns get 1
};

// Model input view: x at observed entries, 0.0 elsewhere.
Tensor observed_fill(const MaskedDataset& ds);
Tensor observed_fill(const Tensor& x, const Tensor& m);

// CSV ingestion. Cells equal to missing_token or empty mark missing entries.
// Errors carry 1-based row/column positions.
MaskedDataset load_csv(const std::string& path, bool has_header,
                       const std::string& missing_token = "NaN");

// Dump with the same dialect; finite values use shortest round-trip
// formatting, missing entries are written as the missing token.
void dump_csv(const MaskedDataset& ds, const std::string& path,
              const std::string& missing_token = "NaN");
void write_csv_matrix(const Tensor& x, const std::string& path);

// Slice a [T_total x K] series into N = floor((T_total-L)/stride)+1 windows.
// NaN entries in the series become missing. The mask overload windows a
// matching observation mask alongside the values (used when ground truth is
// retained under a simulated mechanism).
MaskedDataset window_series(const Tensor& series, std::size_t window_len, std::size_t stride);
MaskedDataset window_series(const Tensor& series, const Tensor& series_mask,
                            std::size_t window_len, std::size_t stride);

// Standardize per column over observed training entries only. When stats are
// absent they are computed from ds. NaN entries stay NaN; masks unchanged.
std::pair<MaskedDataset, NormStats> standardize(const MaskedDataset& ds,
                                                const std::optional<NormStats>& stats = std::nullopt);
Tensor unstandardize(const Tensor& x, const NormStats& stats);

struct SplitResult {
    MaskedDataset train;
    MaskedDataset valid;
    MaskedDataset test;
};

// Disjoint row partition by ratios (train, valid, test). Deterministic for a
// fixed seed; rows are shuffled first when shuffle is set, otherwise split
// into contiguous blocks in order.
SplitResult split(const MaskedDataset& ds, double train_ratio, double valid_ratio,
                  double test_ratio, std::uint64_t seed, bool shuffle = true);

} // namespace prdim
