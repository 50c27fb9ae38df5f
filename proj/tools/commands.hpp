#pragma once

#include "manifest.hpp"

#include "timeemb/data.hpp"
#include "timeemb/eval.hpp"
#include "timeemb/model.hpp"
#include "timeemb/train.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace timeemb::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;

inline constexpr const char* kResultsEnv = "TIMEEMB_RESULTS_DIR";

/// Loaded, split and standardized data for one manifest.
struct PreparedData {
    TimeSeriesDataset dataset;
    RealArray values;  // standardized with training statistics
    SplitRanges ranges;
    std::vector<WindowIndex> train;
    std::vector<WindowIndex> val;
    std::vector<WindowIndex> test;
};

// Loads the dataset and fixes model.channels to its channel count.
PreparedData prepare_data(RunManifest& manifest);

/// Model configuration for an ablation token (full, random, zero, mean,
/// no_embedding, no_filter, no_revin, topk:k, lowpass:γ). Throws ConfigError.
ModelConfig apply_variant(const ModelConfig& base, const std::string& variant);
bool is_known_variant(const std::string& variant);

struct SeedRun {
    TrainLog log;
    Metrics test;
    double learning_rate = 0.0;
    double seconds = 0.0;
    std::size_t params = 0;
};

/// Trains one seed of `config` (after lr selection when a grid is set) and
/// evaluates it on the test windows. The trained model is returned through `out`.
SeedRun run_seed(const RunManifest& manifest, const PreparedData& data, const ModelConfig& config,
                 std::uint64_t seed, std::optional<TimeEmbModel>& out);

int cmd_train(RunManifest manifest, std::ostream& out);
int cmd_evaluate(RunManifest manifest, std::ostream& out);
int cmd_ablate(RunManifest manifest, std::ostream& out);
int cmd_verify(bool perturb_filter_gradient, std::ostream& out);
int cmd_export_components(RunManifest manifest, std::ostream& out);
int cmd_param_count(RunManifest manifest, std::ostream& out);

/// Full command-line entry point; returns the process exit code.
int run(int argc, char** argv);

} // namespace timeemb::cli
