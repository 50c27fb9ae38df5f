#pragma once

#include "timeemb/autodiff.hpp"
#include "timeemb/data.hpp"
#include "timeemb/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace timeemb {

// How the complex difference of two spectra is reduced to a scalar per bin.
enum class FrequencyLoss {
    modulus,        // |ΔX|
    componentwise,  // |Re ΔX| + |Im ΔX|
};

std::string to_string(FrequencyLoss kind);
FrequencyLoss parse_frequency_loss(const std::string& text);

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t batch_size = 256;
    std::size_t max_epochs = 30;
    std::size_t patience = 5;
    double alpha = 0.75;
    std::uint64_t seed = 0;
    FrequencyLoss frequency_loss = FrequencyLoss::modulus;
    // Forward-only chunk size for validation; does not affect results.
    std::size_t eval_batch_size = 512;

    void validate() const;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double seconds = 0.0;
};

struct TrainLog {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0;
    double best_val_loss = 0.0;

    // Columns epoch,train_loss,val_loss,seconds. With record_timing off the
    // seconds column is written as 0 so the file is reproducible.
    void write_csv(std::ostream& os, bool record_timing = true) const;
};

/// Mean over bins and channels of the reduced spectral difference; pred and
/// target are H×D and transformed along H.
double frequency_mae(const RealArray& pred, const RealArray& target,
                     FrequencyLoss kind = FrequencyLoss::modulus);
double mean_squared_error(const RealArray& pred, const RealArray& target);
/// α·frequency_mae + (1 − α)·MSE. Throws ConfigError for α outside [0, 1].
double combined_loss(const RealArray& pred, const RealArray& target, double alpha,
                     FrequencyLoss kind = FrequencyLoss::modulus);

// Graph versions on R×H rows, each row one channel of one sample.
Graph::Var frequency_mae(Graph& g, Graph::Var pred_rows, Graph::Var target_rows, FrequencyLoss kind);
Graph::Var combined_loss(Graph& g, Graph::Var pred_rows, Graph::Var target_rows, double alpha,
                         FrequencyLoss kind);

/// Mean combined loss of the model over a window set (no gradients).
double dataset_loss(TimeEmbModel& model, const RealArray& values, std::span<const WindowIndex> ws,
                    const TrainConfig& config);

/// Mini-batch Adam with per-epoch validation and early stopping. The model is
/// left holding the parameters of the best validation epoch.
TrainLog fit(TimeEmbModel& model, const RealArray& values, std::span<const WindowIndex> train,
             std::span<const WindowIndex> val, const TrainConfig& config);

} // namespace timeemb
