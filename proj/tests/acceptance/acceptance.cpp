// Acceptance gate: one PASS/FAIL line per criterion, exit 1 if any fails.
#include "commands.hpp"
#include "manifest.hpp"

#include "timeemb/eval.hpp"
#include "timeemb/model.hpp"
#include "timeemb/train.hpp"
#include "timeemb/verify.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

using namespace timeemb;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool passed = false;
    std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

cli::RunManifest load_manifest(const std::string& name, const cli::KeyValues& overrides = {}) {
    cli::KeyValues kv = cli::read_key_values(fs::path(TIMEEMB_CONFIG_DIR) / (name + ".toml"));
    for (const auto& [k, v] : overrides) kv[k] = v;
    cli::RunManifest m = cli::manifest_from(kv);
    if (m.dataset_path.is_relative()) m.dataset_path = fs::path(TIMEEMB_DATA_DIR) / m.dataset_path.filename();
    return m;
}

std::vector<SummaryRow> read_summary(const fs::path& runs_csv) {
    std::ifstream in(runs_csv);
    if (!in) return {};
    const auto records = read_records_csv(in);
    return aggregate(records);
}

const SummaryRow* find_row(const std::vector<SummaryRow>& rows, const std::string& variant) {
    for (const auto& r : rows)
        if (r.variant == variant) return &r;
    return nullptr;
}

class Gate {
public:
    explicit Gate(fs::path work) : work_(std::move(work)) {}

    Outcome theory_oracles() {
        const auto t0 = std::chrono::steady_clock::now();
        std::vector<OracleResult> all;
        for (auto part : {fft_roundtrip_oracle(kSeed), naive_dft_oracle(kSeed), parseval_oracle(kSeed),
                          convolution_theorem_oracle(kSeed), lti_equivalence_oracle(kSeed)})
            all.insert(all.end(), part.begin(), part.end());
        const double elapsed = seconds_since(t0);
        std::string detail;
        for (const auto& r : all) detail += r.property + "=" + fmt("%.1e", r.max_error) + " ";
        detail += fmt("(%.2f s)", elapsed);
        return {all_passed(all) && elapsed < 10.0, detail};
    }

    Outcome gradient_check() {
        const auto t0 = std::chrono::steady_clock::now();
        const auto results = gradient_oracle(VerifyOptions{});
        const double elapsed = seconds_since(t0);
        double worst = 0.0;
        for (const auto& r : results) worst = std::max(worst, r.max_error);
        return {all_passed(results) && results.size() == 7 && elapsed < 1.0,
                std::to_string(results.size()) + " groups, max rel error " + fmt("%.2e", worst) +
                    fmt(" (%.3f s)", elapsed)};
    }

    Outcome parameter_counts() {
        cli::RunManifest m = load_manifest("etth1");
        cli::prepare_data(m);
        const TimeEmbModel model = TimeEmbModel::create(m.model, 0);
        std::size_t bank = 0;
        for (const auto& b : model.banks) bank += b.values.value.size();
        const std::size_t closed = parameter_count(m.model);
        return {bank == 8232 && model.parameter_count() == closed,
                "bank " + std::to_string(bank) + ", total " + std::to_string(model.parameter_count()) +
                    ", closed form " + std::to_string(closed)};
    }

    Outcome neutrality() {
        cli::RunManifest m = load_manifest("etth1");
        const auto data = cli::prepare_data(m);
        ModelConfig plain = m.model;
        plain.embedding_mode = EmbeddingMode::none;
        plain.filter_enabled = false;
        TimeEmbModel full = TimeEmbModel::create(m.model, 7);
        TimeEmbModel bare = TimeEmbModel::create(plain, 7);

        std::mt19937_64 rng(kSeed);
        std::vector<WindowIndex> all = data.train;
        all.insert(all.end(), data.test.begin(), data.test.end());
        std::shuffle(all.begin(), all.end(), rng);
        all.resize(100);
        const Batch batch = make_batch(data.values, all, m.model.lookback, m.model.horizon);
        const RealArray a = full.predict(batch);
        const RealArray b = bare.predict(batch);
        std::size_t differing = 0;
        for (std::size_t i = 0; i < a.size(); ++i) differing += a[i] != b[i];
        return {differing == 0, "100 windows, " + std::to_string(differing) + " differing outputs"};
    }

    Outcome etth1_reproduction() {
        const int rc = cli::cmd_train(etth1_manifest(), std::cout);
        const auto rows = read_summary(etth1_dir() / "results" / "runs.csv");
        const SummaryRow* full = find_row(rows, "full");
        if (rc != 0 || !full || full->seed_count != 5) return {false, "training did not complete"};
        return {full->mse_mean <= 0.385 && full->mae_mean <= 0.405,
                fmt("MSE %.4f±%.4f (<= 0.385), ", full->mse_mean, full->mse_std) +
                    fmt("MAE %.4f±%.4f (<= 0.405), ", full->mae_mean, full->mae_std) +
                    fmt("%.0f s per seed", full->seconds)};
    }

    Outcome etth2_reproduction() {
        const fs::path csv = fs::path(TIMEEMB_DATA_DIR) / "ETTh2.csv";
        if (!fs::exists(csv)) return {false, "dataset file " + csv.string() + " is not available"};
        cli::RunManifest m = load_manifest("etth2");
        m.output_dir = work_ / "etth2" / "runs";
        m.results_dir = work_ / "etth2" / "results";
        const int rc = cli::cmd_train(m, std::cout);
        const SummaryRow* full = find_row(read_summary(m.results_dir / "runs.csv"), "full");
        if (rc != 0 || !full) return {false, "training did not complete"};
        return {full->mse_mean <= 0.292, fmt("MSE %.4f±%.4f (<= 0.292)", full->mse_mean, full->mse_std)};
    }

    Outcome ablation_ordering() {
        cli::RunManifest m = etth1_manifest();
        m.variants = {"no_embedding", "last_value"};
        const int rc = cli::cmd_ablate(m, std::cout);
        const auto rows = read_summary(etth1_dir() / "results" / "runs.csv");
        const SummaryRow* full = find_row(rows, "full");
        const SummaryRow* none = find_row(rows, "no_embedding");
        const SummaryRow* last = find_row(rows, "last_value");
        if (rc != 0 || !full || !none || !last) return {false, "ablation did not complete"};
        return {full->mse_mean < none->mse_mean && none->mse_mean < last->mse_mean,
                fmt("full %.4f < no_embedding %.4f < last value %.4f", full->mse_mean, none->mse_mean,
                    last->mse_mean)};
    }

    Outcome loss_degeneracy() {
        std::mt19937_64 rng(kSeed);
        std::normal_distribution<double> dist(0.0, 1.0);
        double worst0 = 0.0, worst1 = 0.0;
        for (int trial = 0; trial < 20; ++trial) {
            const std::size_t h = 4 + static_cast<std::size_t>(trial) * 5, d = 1 + static_cast<std::size_t>(trial % 7);
            RealArray p({h, d}), y({h, d});
            for (double& v : p.storage()) v = dist(rng);
            for (double& v : y.storage()) v = dist(rng) * 3.0;
            worst0 = std::max(worst0, std::abs(combined_loss(p, y, 0.0) - mean_squared_error(p, y)));
            worst1 = std::max(worst1, std::abs(combined_loss(p, y, 1.0) - frequency_mae(p, y)));
        }
        return {worst0 <= 1e-12 && worst1 <= 1e-12,
                fmt("|L(0) - MSE| = %.1e, |L(1) - FMAE| = %.1e over 20 draws", worst0, worst1)};
    }

    Outcome determinism() {
        std::vector<std::string> summaries;
        for (const char* run : {"a", "b"}) {
            cli::RunManifest m = load_manifest("etth1", {{"run.seeds", "[0]"}, {"run.record_timing", "false"}});
            m.output_dir = work_ / "determinism" / run / "runs";
            m.results_dir = work_ / "determinism" / run / "results";
            fs::remove_all(work_ / "determinism" / run);
            if (cli::cmd_train(m, std::cout) != 0) {
                return {false, "training did not complete"};
            }
            summaries.push_back(slurp(m.results_dir / "summary.csv"));
        }
        const bool same = summaries[0] == summaries[1] && !summaries[0].empty();
        return {same, same ? std::to_string(summaries[0].size()) + " identical bytes" : "summaries differ"};
    }

    Outcome slot_determinism() {
        cli::RunManifest m = etth1_manifest();
        const fs::path ckpt = etth1_dir() / "runs" / "ETTh1_96_96_full" / "seed_0" / "checkpoint.json";
        if (!fs::exists(ckpt)) return {false, "no trained checkpoint"};
        const std::size_t start = 12000;
        m.checkpoint = ckpt;
        m.windows = {start, start + 24, start + 24 * 7};
        m.output_dir = work_ / "export";
        if (cli::cmd_export_components(m, std::cout) != 0) return {false, "export failed"};

        std::ifstream in(m.output_dir / "xs.csv");
        std::string line;
        std::getline(in, line);
        std::map<std::string, std::vector<std::string>> by_window;
        std::size_t nonzero = 0;
        while (std::getline(in, line)) {
            const auto comma = line.find(',');
            const std::string rest = line.substr(comma);
            by_window[line.substr(0, comma)].push_back(rest);
            nonzero += rest.substr(rest.rfind(',', rest.size() - 3)) != ",0,0";
        }
        const auto& a = by_window[std::to_string(start)];
        const bool same = !a.empty() && a == by_window[std::to_string(start + 24)] &&
                          a == by_window[std::to_string(start + 24 * 7)];
        return {same && nonzero > 0, std::to_string(a.size()) + " rows per window, identical across one and seven periods"};
    }

private:
    static constexpr std::uint64_t kSeed = 20240611;

    fs::path etth1_dir() const { return work_ / "etth1"; }

    cli::RunManifest etth1_manifest() const {
        cli::RunManifest m = load_manifest("etth1", {{"run.record_timing", "true"}});
        m.output_dir = etth1_dir() / "runs";
        m.results_dir = etth1_dir() / "results";
        return m;
    }

    fs::path work_;
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::string work = "acceptance_work";
    std::vector<int> only;
    app.add_option("--work-dir", work, "Scratch directory for runs and results");
    app.add_option("--only", only, "Run a subset of criteria")->delimiter(',');
    CLI11_PARSE(app, argc, argv);

    fs::remove_all(fs::path(work) / "etth1");
    Gate gate{fs::path(work)};
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"theory oracles", [&] { return gate.theory_oracles(); }},
        {"gradient check", [&] { return gate.gradient_check(); }},
        {"parameter counts", [&] { return gate.parameter_counts(); }},
        {"neutrality", [&] { return gate.neutrality(); }},
        {"ETTh1 96->96 reproduction", [&] { return gate.etth1_reproduction(); }},
        {"ETTh2 96->96 reproduction", [&] { return gate.etth2_reproduction(); }},
        {"ablation ordering", [&] { return gate.ablation_ordering(); }},
        {"loss degeneracy", [&] { return gate.loss_degeneracy(); }},
        {"summary determinism", [&] { return gate.determinism(); }},
        {"slot determinism", [&] { return gate.slot_determinism(); }},
    };

    std::vector<std::string> lines;
    bool ok = true;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i + 1);
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        ok = ok && o.passed;
        char head[96];
        std::snprintf(head, sizeof head, "[%s] %2d %-28s", o.passed ? "PASS" : "FAIL", id, criteria[i].first.c_str());
        lines.push_back(std::string(head) + " " + o.detail);
        std::cout << lines.back() << std::endl;
    }
    std::cout << "\nacceptance summary\n";
    for (const auto& l : lines) std::cout << l << "\n";
    return ok ? 0 : 1;
}
