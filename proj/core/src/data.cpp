#include "timeemb/data.hpp"

#include "timeemb/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace timeemb {

namespace {

// Days since 1970-01-01 in the proleptic Gregorian calendar.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"'))
        s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (true) {
        const std::size_t comma = line.find(',', pos);
        fields.push_back(trim(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos)));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return fields;
}

} // namespace

std::int64_t parse_timestamp(const std::string& text) {
    int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
    char sep = ' ';
    int consumed = 0;
    const int n = std::sscanf(text.c_str(), "%d-%d-%d%c%d:%d:%d%n", &year, &month, &day, &sep, &hour,
                              &minute, &second, &consumed);
    bool ok = false;
    if (n == 7 || n == 6) {
        ok = sep == ' ' || sep == 'T';
    } else if (n == 3) {
        ok = true;
    }
    if (!ok || month < 1 || month > 12 || day < 1 || day > 31 || hour < 0 || hour > 23 || minute < 0 ||
        minute > 59 || second < 0 || second > 60) {
        throw ParseError("unparseable timestamp '" + text + "'");
    }
    return days_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day)) * 86400 +
           hour * 3600 + minute * 60 + second;
}

TimeSeriesDataset load_csv(const std::filesystem::path& path, std::string name, std::size_t max_rows) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset file " + path.string());

    TimeSeriesDataset ds;
    ds.name = name.empty() ? path.stem().string() : std::move(name);

    std::string line;
    if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file");
    const auto header = split_fields(line);
    if (header.size() < 2) throw FormatError(path.string() + ": need a date column and at least one channel");
    for (std::size_t i = 1; i < header.size(); ++i) ds.columns.emplace_back(header[i]);
    const std::size_t channels = ds.columns.size();

    std::vector<double> values;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        if (max_rows != 0 && row >= max_rows) break;
        const auto fields = split_fields(line);
        if (fields.size() != channels + 1) {
            throw FormatError(path.string() + ": row " + std::to_string(row) + " has " +
                              std::to_string(fields.size()) + " fields, expected " +
                              std::to_string(channels + 1));
        }
        try {
            ds.timestamps.push_back(parse_timestamp(std::string(fields[0])));
        } catch (const ParseError& e) {
            throw ParseError(path.string() + ": row " + std::to_string(row) + ": " + e.what());
        }
        for (std::size_t c = 1; c <= channels; ++c) {
            double v = 0.0;
            const auto f = fields[c];
            const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
            if (ec != std::errc{} || ptr != f.data() + f.size()) {
                throw ParseError(path.string() + ": row " + std::to_string(row) + ", column '" +
                                 ds.columns[c - 1] + "': non-numeric cell '" + std::string(f) + "'");
            }
            if (!std::isfinite(v)) {
                throw DataError(path.string() + ": row " + std::to_string(row) + ", column '" +
                                ds.columns[c - 1] + "': missing value");
            }
            values.push_back(v);
        }
        ++row;
    }
    if (row == 0) throw FormatError(path.string() + ": no data rows");

    if (row >= 2) {
        ds.frequency_seconds = ds.timestamps[1] - ds.timestamps[0];
        if (ds.frequency_seconds <= 0) {
            throw FormatError(path.string() + ": timestamps not strictly increasing at row 1");
        }
        for (std::size_t i = 2; i < row; ++i) {
            if (ds.timestamps[i] - ds.timestamps[i - 1] != ds.frequency_seconds) {
                throw FormatError(path.string() + ": irregular spacing at row " + std::to_string(i) +
                                  " (expected " + std::to_string(ds.frequency_seconds) + " s, got " +
                                  std::to_string(ds.timestamps[i] - ds.timestamps[i - 1]) + " s)");
            }
        }
    }
    ds.values = RealArray({row, channels}, std::move(values));
    return ds;
}

void SplitSpec::validate() const {
    if (train <= 0.0 || val <= 0.0 || test <= 0.0) throw ConfigError("split: every ratio must be positive");
    if (std::abs(train + val + test - 1.0) > 1e-9) throw ConfigError("split: ratios must sum to 1");
}

SplitSpec SplitSpec::for_dataset(const std::string& name, std::size_t lookback) {
    std::string lower = name;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower.rfind("ett", 0) == 0) return SplitSpec{0.6, 0.2, 0.2, lookback};
    return SplitSpec{0.7, 0.1, 0.2, lookback};
}

SplitRanges split(std::size_t steps, const SplitSpec& spec, std::size_t lookback, std::size_t horizon) {
    spec.validate();
    // The epsilon keeps exact products such as 17420·0.6 from flooring low.
    const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(steps) * spec.train + 1e-9));
    const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(steps) * spec.test + 1e-9));
    if (n_train + n_test >= steps) throw DataError("split: no steps left for validation");
    const std::size_t n_val = steps - n_train - n_test;

    SplitRanges r;
    r.val_boundary = n_train;
    r.test_boundary = n_train + n_val;
    if (spec.context > r.val_boundary) throw DataError("split: context exceeds the training range");
    r.train = {0, n_train};
    r.val = {r.val_boundary - spec.context, r.test_boundary};
    r.test = {r.test_boundary - spec.context, steps};

    const std::size_t need = lookback + horizon;
    auto check = [&](const IndexRange& range, const char* which) {
        if (range.size() < need) {
            throw DataError(std::string("split: ") + which + " range of " + std::to_string(range.size()) +
                            " steps cannot hold one window of " + std::to_string(need));
        }
    };
    check(r.train, "train");
    check(r.val, "validation");
    check(r.test, "test");
    return r;
}

Standardizer Standardizer::fit(const RealArray& values, IndexRange range) {
    if (range.size() == 0) throw DataError("standardize: empty training range");
    const std::size_t d = values.dim(1);
    Standardizer s;
    s.mean.assign(d, 0.0);
    s.std.assign(d, 0.0);
    const double n = static_cast<double>(range.size());
    for (std::size_t t = range.begin; t < range.end; ++t)
        for (std::size_t c = 0; c < d; ++c) s.mean[c] += values.at(t, c);
    for (double& m : s.mean) m /= n;
    for (std::size_t t = range.begin; t < range.end; ++t)
        for (std::size_t c = 0; c < d; ++c) {
            const double dev = values.at(t, c) - s.mean[c];
            s.std[c] += dev * dev;
        }
    for (double& v : s.std) v = std::max(std::sqrt(v / n), kStdFloor);
    return s;
}

RealArray Standardizer::apply(const RealArray& values) const {
    RealArray out = values;
    const std::size_t d = values.dim(1);
    if (d != mean.size()) throw DimensionError("standardize: channel count mismatch");
    for (std::size_t t = 0; t < values.dim(0); ++t)
        for (std::size_t c = 0; c < d; ++c) out.at(t, c) = (values.at(t, c) - mean[c]) / std[c];
    return out;
}

std::vector<WindowIndex> windows(IndexRange range, std::size_t lookback, std::size_t horizon) {
    if (range.size() < lookback + horizon) {
        throw DataError("windows: range of " + std::to_string(range.size()) + " steps is shorter than " +
                        std::to_string(lookback + horizon));
    }
    const std::size_t count = range.size() - lookback - horizon + 1;
    std::vector<WindowIndex> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t start = range.begin + i;
        out.push_back({start, static_cast<std::uint64_t>(start + lookback - 1)});
    }
    return out;
}

WindowSample materialize(const RealArray& values, const WindowIndex& w, std::size_t lookback,
                         std::size_t horizon) {
    const std::size_t d = values.dim(1);
    if (w.start + lookback + horizon > values.dim(0)) throw DataError("materialize: window past end of data");
    WindowSample s{RealArray({lookback, d}), RealArray({horizon, d}), w.t_last};
    std::copy_n(values.data() + w.start * d, lookback * d, s.x.data());
    std::copy_n(values.data() + (w.start + lookback) * d, horizon * d, s.y.data());
    return s;
}

Batch make_batch(const RealArray& values, std::span<const WindowIndex> ws, std::size_t lookback,
                 std::size_t horizon) {
    const std::size_t d = values.dim(1);
    const std::size_t b = ws.size();
    Batch batch{RealArray({b, lookback, d}), RealArray({b, horizon, d}), {}};
    batch.t_last.reserve(b);
    for (std::size_t i = 0; i < b; ++i) {
        const auto& w = ws[i];
        if (w.start + lookback + horizon > values.dim(0)) throw DataError("make_batch: window past end of data");
        std::copy_n(values.data() + w.start * d, lookback * d, batch.x.data() + i * lookback * d);
        std::copy_n(values.data() + (w.start + lookback) * d, horizon * d, batch.y.data() + i * horizon * d);
        batch.t_last.push_back(w.t_last);
    }
    return batch;
}

} // namespace timeemb
