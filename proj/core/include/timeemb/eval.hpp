#pragma once

#include "timeemb/data.hpp"
#include "timeemb/model.hpp"

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace timeemb {

struct Metrics {
    double mse = 0.0;
    double mae = 0.0;
    std::size_t n_windows = 0;
};

/// Grand means over every entry; inputs are B×H×D (or any equal shapes, with
/// the leading dimension counted as windows).
Metrics compute_metrics(const RealArray& pred, const RealArray& target);

/// Test metrics of a model over a window set.
Metrics evaluate(TimeEmbModel& model, const RealArray& values, std::span<const WindowIndex> ws,
                 std::size_t batch_size = 512);

/// Baseline that repeats the last lookback value over the horizon.
Metrics evaluate_last_value(const RealArray& values, std::span<const WindowIndex> ws, std::size_t lookback,
                            std::size_t horizon);

struct RunRecord {
    std::string dataset;
    std::size_t lookback = 0;
    std::size_t horizon = 0;
    std::string variant;
    std::uint64_t seed = 0;
    Metrics metrics;
    double seconds = 0.0;
    std::size_t params = 0;
};

struct SummaryRow {
    std::string dataset;
    std::size_t lookback = 0;
    std::size_t horizon = 0;
    std::string variant;
    std::size_t seed_count = 0;
    double mse_mean = 0.0;
    double mse_std = 0.0;
    double mae_mean = 0.0;
    double mae_std = 0.0;
    std::size_t params = 0;
    double seconds = 0.0;  // mean per run
};

/// Mean and unbiased standard deviation per (dataset, L, H, variant), rows
/// sorted by that key. A single record yields std 0.
std::vector<SummaryRow> aggregate(std::span<const RunRecord> records);

void write_summary_csv(std::ostream& os, std::span<const SummaryRow> rows);
void write_summary_text(std::ostream& os, std::span<const SummaryRow> rows);

// Per-seed records, one line each. Reading rejects malformed rows with FormatError.
void write_records_csv(std::ostream& os, std::span<const RunRecord> records);
std::vector<RunRecord> read_records_csv(std::istream& is);

/// Merges `fresh` into `<dir>/runs.csv` (replacing records with the same key)
/// and rewrites `<dir>/<dataset>_<L>_<H>.csv`, `<dir>/summary.csv` and
/// `<dir>/summary.txt` from the merged set.
std::vector<SummaryRow> emit_tables(const std::filesystem::path& dir, std::span<const RunRecord> fresh);

} // namespace timeemb
