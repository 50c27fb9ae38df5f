#include "commands.hpp"
#include "manifest.hpp"

#include "timeemb/checkpoint.hpp"
#include "timeemb/error.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

using namespace timeemb;
using namespace timeemb::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "timeemb_test_cli" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Hourly synthetic series with a daily cycle.
fs::path synthetic_csv(const fs::path& dir, std::size_t steps, std::size_t channels) {
    const fs::path p = dir / "synthetic.csv";
    std::ofstream out(p);
    out << "date";
    for (std::size_t c = 0; c < channels; ++c) out << ",c" << c;
    out << "\n";
    const std::time_t base = 1577836800;  // 2020-01-01 00:00:00 UTC
    for (std::size_t t = 0; t < steps; ++t) {
        const std::time_t now = base + static_cast<std::time_t>(t) * 3600;
        std::tm parts{};
        gmtime_r(&now, &parts);
        char stamp[32];
        std::strftime(stamp, sizeof stamp, "%Y-%m-%d %H:%M:%S", &parts);
        out << stamp;
        const double hour = static_cast<double>(t % 24);
        for (std::size_t c = 0; c < channels; ++c) {
            out << "," << std::sin(2 * M_PI * hour / 24.0 + static_cast<double>(c)) + 0.01 * static_cast<double>(t % 7);
        }
        out << "\n";
    }
    return p;
}

int run_args(std::vector<std::string> args) {
    args.insert(args.begin(), "timeemb");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return run(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

} // namespace

TEST_CASE("manifest parsing handles sections, comments and quoting") {
    const auto kv = parse_key_values(
        "# comment\n"
        "[dataset]\n"
        "path = \"data/x#1.csv\"   # trailing\n"
        "[train]\n"
        "lr = 0.002\n"
        "[run]\n"
        "seeds = [0, 1, 2]\n",
        "inline");
    CHECK(kv.at("dataset.path") == "data/x#1.csv");
    CHECK(kv.at("train.lr") == "0.002");
    const RunManifest m = manifest_from(kv);
    CHECK(m.train.learning_rate == 0.002);
    CHECK(m.seeds == std::vector<std::uint64_t>{0, 1, 2});
    CHECK(m.dataset_name == "x#1");
    CHECK_THROWS_AS(parse_key_values("no equals sign\n", "inline"), ConfigError);
}

TEST_CASE("manifest errors name the offending key") {
    auto message = [](const KeyValues& kv) {
        try {
            manifest_from(kv);
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    CHECK(message({{"train.learning", "1"}}).rfind("train.learning", 0) == 0);
    CHECK(message({{"train.batch_size", "-3"}}).rfind("train.batch_size", 0) == 0);
    CHECK(message({{"model.banks", "[\"5/24\"]"}}).find("model") != std::string::npos);
    CHECK(message({{"run.seeds", "[]"}}).rfind("run.seeds", 0) == 0);
    CHECK(message({{"model.topk", "3"}, {"model.lowpass", "0.5"}}).find("mutually exclusive") != std::string::npos);
}

TEST_CASE("the effective manifest reproduces itself") {
    KeyValues kv{{"dataset.path", "data/ETTh1.csv"}, {"model.banks", "[\"24/24\", \"7/168\"]"},
                 {"train.alpha", "0.3"},          {"model.topk", "12"},
                 {"run.variants", "[full, \"lowpass:0.5\"]"}, {"split.train", "0.7"},
                 {"split.val", "0.1"},            {"split.test", "0.2"}};
    const RunManifest m = manifest_from(kv);
    const KeyValues echoed = manifest_keys(m);
    const RunManifest again = manifest_from(parse_key_values(format_key_values(echoed), "echo"));
    CHECK(manifest_keys(again) == echoed);
    CHECK(again.model == m.model);
    CHECK(again.model.banks.size() == 2);
    CHECK(again.variants == std::vector<std::string>{"full", "lowpass:0.5"});
}

TEST_CASE("variant tokens map onto model configurations") {
    const ModelConfig base;
    CHECK(apply_variant(base, "full") == base);
    CHECK(apply_variant(base, "no_embedding").embedding_mode == EmbeddingMode::none);
    CHECK(apply_variant(base, "zero").embedding_mode == EmbeddingMode::zero_fixed);
    CHECK(apply_variant(base, "mean").embedding_mode == EmbeddingMode::mean_fixed);
    CHECK(apply_variant(base, "random").embedding_mode == EmbeddingMode::random_reinit);
    CHECK_FALSE(apply_variant(base, "no_filter").filter_enabled);
    CHECK_FALSE(apply_variant(base, "no_revin").revin_enabled);
    CHECK(apply_variant(base, "topk:49").topk_mask == 49u);
    CHECK(apply_variant(base, "lowpass:0.25").lowpass_ratio == 0.25);
    CHECK_THROWS_AS(apply_variant(base, "topk:50"), ConfigError);
    CHECK_THROWS_AS(apply_variant(base, "topk:abc"), ConfigError);
    CHECK_THROWS_AS(apply_variant(base, "bogus"), ConfigError);
}

TEST_CASE("exit codes") {
    CHECK(run_args({"verify"}) == kExitOk);
    CHECK(run_args({"verify", "--perturb-filter-gradient"}) == kExitFailure);
    CHECK(run_args({"train", "--dataset", "/nonexistent.csv"}) == kExitConfig);
    CHECK(run_args({"train", "--set", "train.alpha=2"}) == kExitConfig);
    CHECK(run_args({"no-such-command"}) == kExitConfig);
    CHECK(run_args({"param-count"}) == kExitOk);

    const fs::path dir = scratch("exit");
    const fs::path csv = synthetic_csv(dir, 600, 2);
    CHECK(run_args({"ablate", "--dataset", csv.string(), "--variants", "full,sideways"}) == kExitConfig);
    CHECK(run_args({"evaluate", "--dataset", csv.string()}) == kExitConfig);
}

TEST_CASE("train, evaluate and export on a small synthetic dataset") {
    const fs::path dir = scratch("flow");
    const fs::path csv = synthetic_csv(dir, 720, 2);
    const std::vector<std::string> common{
        "--dataset", csv.string(), "--output", (dir / "runs").string(), "--results", (dir / "results").string(),
        "--set", "model.lookback=48", "model.horizon=24", "model.hidden=16", "train.max_epochs=2",
        "train.patience=1", "train.batch_size=32", "run.record_timing=false"};

    auto with = [&](std::vector<std::string> head, std::vector<std::string> tail = {}) {
        head.insert(head.end(), common.begin(), common.end());
        head.insert(head.end(), tail.begin(), tail.end());
        return head;
    };
    REQUIRE(run_args(with({"train"}, {"run.seeds=[0, 1]"})) == kExitOk);
    const fs::path run_dir = dir / "runs" / "synthetic_48_24_full";
    CHECK(fs::exists(run_dir / "seed_0" / "checkpoint.json"));
    CHECK(fs::exists(run_dir / "seed_1" / "train_log.csv"));
    CHECK(fs::exists(dir / "runs" / "manifest.toml"));
    const std::string summary = slurp(dir / "results" / "summary.csv");
    CHECK(count_lines(summary) == 2);
    CHECK(summary.find("synthetic,48,24,full,2,") != std::string::npos);
    CHECK(summary.find(",0.00\n") != std::string::npos);

    // The echoed manifest reproduces the run.
    const fs::path replay = dir / "replay";
    REQUIRE(run_args({"train", "-c", (dir / "runs" / "manifest.toml").string(), "--output", (replay / "runs").string(),
                      "--results", (replay / "results").string()}) == kExitOk);
    CHECK(slurp(replay / "results" / "summary.csv") == summary);

    const std::string ckpt = (run_dir / "seed_0" / "checkpoint.json").string();
    CHECK(run_args(with({"evaluate", "--checkpoint", ckpt})) == kExitOk);

    // Windows 24 steps apart share a slot of the daily bank.
    const fs::path out = dir / "export";
    REQUIRE(run_args({"export-components", "--dataset", csv.string(), "--checkpoint", ckpt, "--windows", "5,29",
                      "--output", out.string()}) == kExitOk);
    std::ifstream xs(out / "xs.csv");
    std::string line;
    std::getline(xs, line);
    CHECK(line == "window,bin,channel,re,im");
    std::vector<std::string> first, second;
    while (std::getline(xs, line)) {
        const auto rest = line.substr(line.find(','));
        (line.rfind("5,", 0) == 0 ? first : second).push_back(rest);
    }
    CHECK(first.size() == 25 * 2);
    CHECK(first == second);
    CHECK(fs::exists(out / "bank.csv"));
    CHECK(fs::exists(out / "filter.csv"));
    CHECK(count_lines(slurp(out / "xbar.csv")) == 1 + 2 * 25 * 2);

    CHECK(run_args({"export-components", "--dataset", csv.string(), "--checkpoint", ckpt, "--windows", "100000",
                    "--output", out.string()}) == kExitConfig);
}

TEST_CASE("a zero-bank checkpoint exports X_d equal to the input spectrum") {
    const fs::path dir = scratch("zero_bank");
    const fs::path csv = synthetic_csv(dir, 200, 3);
    ModelConfig c;
    c.lookback = 24;
    c.horizon = 12;
    c.channels = 3;
    c.hidden = 4;
    save_checkpoint(dir / "fresh.json", TimeEmbModel::create(c, 0));
    REQUIRE(run_args({"export-components", "--dataset", csv.string(), "--checkpoint", (dir / "fresh.json").string(),
                      "--windows", "0", "--output", (dir / "out").string()}) == kExitOk);
    const std::string xbar = slurp(dir / "out" / "xbar.csv");
    CHECK(count_lines(xbar) == 1 + 13 * 3);
    CHECK(slurp(dir / "out" / "xd.csv") == xbar);

    c.channels = 2;
    save_checkpoint(dir / "narrow.json", TimeEmbModel::create(c, 0));
    CHECK(run_args({"export-components", "--dataset", csv.string(), "--checkpoint", (dir / "narrow.json").string(),
                    "--windows", "0", "--output", (dir / "out").string()}) == kExitConfig);
}

TEST_CASE("wide-dataset manifests run end to end on a 2000-step slice") {
    for (const auto& [name, channels] : {std::pair<std::string, std::size_t>{"electricity", 321},
                                         std::pair<std::string, std::size_t>{"traffic", 862}}) {
        CAPTURE(name);
        const fs::path dir = scratch("wide_" + name);
        const fs::path csv = synthetic_csv(dir, 2100, channels);
        const std::string config = (fs::path(TIMEEMB_CONFIG_DIR) / (name + ".toml")).string();
        REQUIRE(run_args({"train", "-c", config, "--dataset", csv.string(), "--set", "dataset.max_rows=2000",
                          "--set", "train.max_epochs=1", "--set", "train.patience=1", "--set", "train.lr_grid=[]",
                          "--seeds", "0", "--output", (dir / "runs").string(), "--results",
                          (dir / "results").string()}) == kExitOk);
        const std::string summary = slurp(dir / "results" / "summary.csv");
        CHECK(count_lines(summary) == 2);
        CHECK(summary.find("nan") == std::string::npos);
    }
}
