#include "timeemb/eval.hpp"

#include "timeemb/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

namespace timeemb {

namespace {

using Key = std::tuple<std::string, std::size_t, std::size_t, std::string>;

Key key_of(const RunRecord& r) { return {r.dataset, r.lookback, r.horizon, r.variant}; }

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string exact(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

constexpr const char* kSummaryHeader =
    "dataset,L,H,variant,seed_count,mse_mean,mse_std,mae_mean,mae_std,params,seconds";
constexpr const char* kRecordsHeader = "dataset,L,H,variant,seed,mse,mae,n_windows,seconds,params";

} // namespace

Metrics compute_metrics(const RealArray& pred, const RealArray& target) {
    require_same_shape(pred.shape(), target.shape(), "compute_metrics");
    if (pred.empty()) throw DataError("compute_metrics: empty window set");
    double se = 0.0;
    double ae = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = pred[i] - target[i];
        se += e * e;
        ae += std::abs(e);
    }
    const auto n = static_cast<double>(pred.size());
    return {se / n, ae / n, pred.rank() == 0 ? 1 : pred.dim(0)};
}

Metrics evaluate(TimeEmbModel& model, const RealArray& values, std::span<const WindowIndex> ws,
                 std::size_t batch_size) {
    if (ws.empty()) throw DataError("evaluate: empty window set");
    const auto& mc = model.config();
    double se = 0.0;
    double ae = 0.0;
    std::size_t count = 0;
    for (std::size_t begin = 0; begin < ws.size(); begin += batch_size) {
        const auto chunk = ws.subspan(begin, std::min(batch_size, ws.size() - begin));
        const Batch batch = make_batch(values, chunk, mc.lookback, mc.horizon);
        const RealArray pred = model.predict(batch);
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const double e = pred[i] - batch.y[i];
            se += e * e;
            ae += std::abs(e);
        }
        count += pred.size();
    }
    return {se / static_cast<double>(count), ae / static_cast<double>(count), ws.size()};
}

Metrics evaluate_last_value(const RealArray& values, std::span<const WindowIndex> ws, std::size_t lookback,
                            std::size_t horizon) {
    if (ws.empty()) throw DataError("evaluate_last_value: empty window set");
    const Batch batch = make_batch(values, ws, lookback, horizon);
    const std::size_t d = values.dim(1);
    RealArray pred(batch.y.shape());
    for (std::size_t b = 0; b < ws.size(); ++b)
        for (std::size_t t = 0; t < horizon; ++t)
            for (std::size_t c = 0; c < d; ++c)
                pred[(b * horizon + t) * d + c] = batch.x[(b * lookback + lookback - 1) * d + c];
    return compute_metrics(pred, batch.y);
}

std::vector<SummaryRow> aggregate(std::span<const RunRecord> records) {
    std::map<Key, std::vector<const RunRecord*>> groups;
    for (const auto& r : records) groups[key_of(r)].push_back(&r);

    std::vector<SummaryRow> rows;
    for (const auto& [key, group] : groups) {
        SummaryRow row;
        std::tie(row.dataset, row.lookback, row.horizon, row.variant) = key;
        row.seed_count = group.size();
        row.params = group.front()->params;
        const auto n = static_cast<double>(group.size());
        for (const auto* r : group) {
            row.mse_mean += r->metrics.mse;
            row.mae_mean += r->metrics.mae;
            row.seconds += r->seconds;
        }
        row.mse_mean /= n;
        row.mae_mean /= n;
        row.seconds /= n;
        if (group.size() > 1) {
            for (const auto* r : group) {
                row.mse_std += (r->metrics.mse - row.mse_mean) * (r->metrics.mse - row.mse_mean);
                row.mae_std += (r->metrics.mae - row.mae_mean) * (r->metrics.mae - row.mae_mean);
            }
            row.mse_std = std::sqrt(row.mse_std / (n - 1.0));
            row.mae_std = std::sqrt(row.mae_std / (n - 1.0));
        }
        rows.push_back(row);
    }
    return rows;
}

void write_summary_csv(std::ostream& os, std::span<const SummaryRow> rows) {
    os << kSummaryHeader << '\n';
    for (const auto& r : rows) {
        os << r.dataset << ',' << r.lookback << ',' << r.horizon << ',' << r.variant << ',' << r.seed_count << ','
           << fixed(r.mse_mean, 6) << ',' << fixed(r.mse_std, 6) << ',' << fixed(r.mae_mean, 6) << ','
           << fixed(r.mae_std, 6) << ',' << r.params << ',' << fixed(r.seconds, 2) << '\n';
    }
}

void write_summary_text(std::ostream& os, std::span<const SummaryRow> rows) {
    std::vector<std::vector<std::string>> cells{
        {"dataset", "L", "H", "variant", "seeds", "MSE", "MAE", "params", "seconds"}};
    for (const auto& r : rows) {
        cells.push_back({r.dataset, std::to_string(r.lookback), std::to_string(r.horizon), r.variant,
                         std::to_string(r.seed_count), fixed(r.mse_mean, 3) + "±" + fixed(r.mse_std, 3),
                         fixed(r.mae_mean, 3) + "±" + fixed(r.mae_std, 3), std::to_string(r.params),
                         fixed(r.seconds, 1)});
    }
    // "±" is two bytes but one column wide.
    auto width = [](const std::string& s) {
        return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char ch) {
            return (static_cast<unsigned char>(ch) & 0xC0) != 0x80;
        }));
    };
    std::vector<std::size_t> widths(cells.front().size(), 0);
    for (const auto& row : cells)
        for (std::size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], width(row[i]));
    for (const auto& row : cells) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i > 0) os << "  ";
            os << row[i];
            if (i + 1 < row.size()) os << std::string(widths[i] - width(row[i]), ' ');
        }
        os << '\n';
    }
}

void write_records_csv(std::ostream& os, std::span<const RunRecord> records) {
    os << kRecordsHeader << '\n';
    for (const auto& r : records) {
        os << r.dataset << ',' << r.lookback << ',' << r.horizon << ',' << r.variant << ',' << r.seed << ','
           << exact(r.metrics.mse) << ',' << exact(r.metrics.mae) << ',' << r.metrics.n_windows << ','
           << exact(r.seconds) << ',' << r.params << '\n';
    }
}

std::vector<RunRecord> read_records_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) return {};
    if (line != kRecordsHeader) throw FormatError("run records: unexpected header '" + line + "'");
    std::vector<RunRecord> out;
    std::size_t row = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto f = split_line(line);
        if (f.size() != 10) throw FormatError("run records: row " + std::to_string(row) + " is malformed");
        try {
            RunRecord r;
            r.dataset = f[0];
            r.lookback = std::stoull(f[1]);
            r.horizon = std::stoull(f[2]);
            r.variant = f[3];
            r.seed = std::stoull(f[4]);
            r.metrics = {std::stod(f[5]), std::stod(f[6]), static_cast<std::size_t>(std::stoull(f[7]))};
            r.seconds = std::stod(f[8]);
            r.params = std::stoull(f[9]);
            out.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw FormatError("run records: row " + std::to_string(row) + " has a non-numeric field");
        }
        ++row;
    }
    return out;
}

std::vector<SummaryRow> emit_tables(const std::filesystem::path& dir, std::span<const RunRecord> fresh) {
    std::filesystem::create_directories(dir);
    const auto runs_path = dir / "runs.csv";
    std::vector<RunRecord> merged;
    if (std::ifstream in(runs_path); in) merged = read_records_csv(in);

    auto same = [](const RunRecord& a, const RunRecord& b) {
        return key_of(a) == key_of(b) && a.seed == b.seed;
    };
    for (const auto& r : fresh) {
        auto it = std::find_if(merged.begin(), merged.end(), [&](const RunRecord& m) { return same(m, r); });
        if (it != merged.end()) *it = r;
        else merged.push_back(r);
    }
    std::stable_sort(merged.begin(), merged.end(), [](const RunRecord& a, const RunRecord& b) {
        return std::tie(a.dataset, a.lookback, a.horizon, a.variant, a.seed) <
               std::tie(b.dataset, b.lookback, b.horizon, b.variant, b.seed);
    });

    auto write = [](const std::filesystem::path& path, auto&& body) {
        std::ofstream out(path);
        if (!out) throw DataError("cannot write " + path.string());
        body(out);
    };
    write(runs_path, [&](std::ostream& os) { write_records_csv(os, merged); });

    const auto rows = aggregate(merged);
    std::map<std::tuple<std::string, std::size_t, std::size_t>, std::vector<SummaryRow>> per_config;
    for (const auto& r : rows) per_config[{r.dataset, r.lookback, r.horizon}].push_back(r);
    for (const auto& [key, group] : per_config) {
        const auto& [name, l, h] = key;
        write(dir / (name + "_" + std::to_string(l) + "_" + std::to_string(h) + ".csv"),
              [&](std::ostream& os) { write_summary_csv(os, group); });
    }
    write(dir / "summary.csv", [&](std::ostream& os) { write_summary_csv(os, rows); });
    write(dir / "summary.txt", [&](std::ostream& os) { write_summary_text(os, rows); });
    return rows;
}

} // namespace timeemb
