#pragma once

#include "timeemb/array.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace timeemb {

/// A regularly sampled multivariate series, values shaped T×D.
struct TimeSeriesDataset {
    std::string name;
    std::vector<std::string> columns;      // channel names, without the date column
    std::vector<std::int64_t> timestamps;  // seconds since 1970-01-01, naive local time
    std::int64_t frequency_seconds = 0;
    RealArray values;

    std::size_t steps() const { return values.empty() ? 0 : values.dim(0); }
    std::size_t channels() const { return values.empty() ? 0 : values.dim(1); }
};

// Parses "YYYY-MM-DD[ T]HH:MM[:SS]" or "YYYY-MM-DD". Throws ParseError.
std::int64_t parse_timestamp(const std::string& text);

/// Loads a header-first CSV whose first column is a timestamp. When
/// `max_rows` is non-zero only the first `max_rows` data rows are kept.
TimeSeriesDataset load_csv(const std::filesystem::path& path, std::string name = {},
                           std::size_t max_rows = 0);

struct SplitSpec {
    double train = 0.7;
    double val = 0.1;
    double test = 0.2;
    std::size_t context = 0;  // preceding steps granted to val/test windows

    void validate() const;
    // 6:2:2 for the ETT family, 7:1:2 otherwise.
    static SplitSpec for_dataset(const std::string& name, std::size_t lookback);
};

/// Half-open range of global step indices.
struct IndexRange {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const { return end - begin; }
    friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

struct SplitRanges {
    IndexRange train;
    IndexRange val;   // begins `context` steps before the train/val boundary
    IndexRange test;  // begins `context` steps before the val/test boundary
    std::size_t val_boundary = 0;
    std::size_t test_boundary = 0;
};

/// Chronological split: n_train = ⌊T·train⌋, n_test = ⌊T·test⌋, validation
/// takes the remainder. Throws DataError when a split cannot hold one
/// lookback+horizon window.
SplitRanges split(std::size_t steps, const SplitSpec& spec, std::size_t lookback, std::size_t horizon);

/// Per-channel z-scoring statistics.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> std;

    static constexpr double kStdFloor = 1e-8;

    static Standardizer fit(const RealArray& values, IndexRange range);
    RealArray apply(const RealArray& values) const;
};

/// One lookback/horizon window addressed by its first global step.
struct WindowIndex {
    std::size_t start = 0;
    std::uint64_t t_last = 0;  // global index of the last lookback step
};

struct WindowSample {
    RealArray x;  // L×D
    RealArray y;  // H×D
    std::uint64_t t_last = 0;
};

/// Every stride-1 window inside `range`; count = size - L - H + 1.
std::vector<WindowIndex> windows(IndexRange range, std::size_t lookback, std::size_t horizon);

WindowSample materialize(const RealArray& values, const WindowIndex& w, std::size_t lookback,
                         std::size_t horizon);

/// Stacked windows: x is B×L×D, y is B×H×D.
struct Batch {
    RealArray x;
    RealArray y;
    std::vector<std::uint64_t> t_last;

    std::size_t size() const { return t_last.size(); }
};

Batch make_batch(const RealArray& values, std::span<const WindowIndex> ws, std::size_t lookback,
                 std::size_t horizon);

} // namespace timeemb
