#pragma once

#include "timeemb/array.hpp"
#include "timeemb/autodiff.hpp"
#include "timeemb/data.hpp"
#include "timeemb/disentangle.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace timeemb {

enum class EmbeddingMode { learned, none, zero_fixed, mean_fixed, random_reinit };
enum class BackboneKind { timeemb_head, plain_linear, plain_mlp, trend_residual_linear };
// Scope of the statistics behind EmbeddingMode::mean_fixed.
enum class MeanScope { per_slot, global };

std::string to_string(EmbeddingMode mode);
std::string to_string(BackboneKind kind);
std::string to_string(MeanScope scope);
EmbeddingMode parse_embedding_mode(const std::string& text);
BackboneKind parse_backbone(const std::string& text);
MeanScope parse_mean_scope(const std::string& text);

struct ModelConfig {
    std::size_t lookback = 96;
    std::size_t horizon = 96;
    std::size_t channels = 7;
    std::size_t hidden = 512;
    std::vector<BankSpec> banks{BankSpec{24, 24}};
    EmbeddingMode embedding_mode = EmbeddingMode::learned;
    MeanScope mean_scope = MeanScope::per_slot;
    bool filter_enabled = true;
    bool revin_enabled = true;
    std::optional<std::size_t> topk_mask;
    std::optional<double> lowpass_ratio;
    BackboneKind backbone = BackboneKind::timeemb_head;
    double revin_eps = 1e-5;

    std::size_t bins() const { return lookback / 2 + 1; }
    // Banks are materialized for these modes; the others use X_s = 0 or a fixed table.
    bool has_learned_banks() const {
        return embedding_mode == EmbeddingMode::learned || embedding_mode == EmbeddingMode::random_reinit;
    }
    void validate() const;
    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Per-channel statistics of one lookback window; std = sqrt(var + eps).
struct InstanceNormState {
    std::vector<double> mean;
    std::vector<double> std;
    double eps = 1e-5;
};

std::pair<RealArray, InstanceNormState> instance_normalize(const RealArray& window, double eps = 1e-5);
RealArray inverse_normalize(const RealArray& normalized, const InstanceNormState& state);

/// Channel-independent predictor mapping R×L rows to R×H rows.
class Backbone {
public:
    static Backbone create(BackboneKind kind, std::size_t lookback, std::size_t horizon, std::size_t hidden,
                           std::mt19937_64& rng);

    BackboneKind kind() const noexcept { return kind_; }
    std::size_t lookback() const noexcept { return lookback_; }
    std::size_t horizon() const noexcept { return horizon_; }

    Graph::Var forward(Graph& g, Graph::Var rows);
    std::vector<Parameter*> parameters();
    std::vector<const Parameter*> parameters() const;
    std::size_t parameter_count() const;

    // Closed-form count for a backbone of this shape.
    static std::size_t parameter_count(BackboneKind kind, std::size_t lookback, std::size_t horizon,
                                       std::size_t hidden);

    // Moving-average trend extractor (kernel 25, edge replication) as an L×L matrix.
    static RealArray trend_kernel(std::size_t lookback, std::size_t kernel = 25);

    std::vector<Parameter> params;

private:
    BackboneKind kind_ = BackboneKind::timeemb_head;
    std::size_t lookback_ = 0;
    std::size_t horizon_ = 0;
    RealArray trend_;
};

/// f(x) = W₂·ReLU(W₁x + b₁) + b₂ for a single channel; `head` must be a
/// timeemb_head backbone.
std::vector<double> head_forward(std::span<const double> x, const Backbone& head);

/// Zeroes all but the top-k magnitudes per channel (ties: lower bin wins) or
/// all bins from ⌈γ·F⌉ upward. X_s is F×D.
RealArray apply_spectrum_masks(const RealArray& invariant, const ModelConfig& config);

/// Exact trainable parameter count for a configuration.
std::size_t parameter_count(const ModelConfig& config);

/// Rows b·D + c of an R×T matrix hold channel c of sample b.
RealArray to_rows(const RealArray& batched);                  // B×T×D -> (B·D)×T
RealArray from_rows(const RealArray& rows, std::size_t channels);  // (B·D)×T -> B×T×D

class TimeEmbModel {
public:
    static TimeEmbModel create(const ModelConfig& config, std::uint64_t seed);

    const ModelConfig& config() const noexcept { return config_; }

    // Full pipeline on a batch; returns (B·D)×H prediction rows in data space.
    Graph::Var forward(Graph& g, const Batch& batch);
    // B×H×D predictions.
    RealArray predict(const Batch& batch);

    std::vector<Parameter*> trainable();
    std::vector<const Parameter*> all_parameters() const;
    std::size_t parameter_count() const;

    // X_s for one window after masking (F×D); zeros when no embedding is used.
    RealArray invariant_for(std::uint64_t t_last) const;

    // Fills the fixed table used by EmbeddingMode::mean_fixed from the real
    // spectra of the given (normalized) training windows.
    void fit_mean_invariant(const RealArray& values, std::span<const WindowIndex> train);
    // Redraws every bank entry from N(0, 0.02²).
    void reinitialize_banks(std::uint64_t seed);

    std::vector<EmbeddingBank> banks;
    FrequencyFilter filter;
    Backbone backbone;
    RealArray fixed_invariant;  // M₀×F×D, mean_fixed only

    static constexpr double kRandomBankStd = 0.02;

private:
    explicit TimeEmbModel(ModelConfig config) : config_(std::move(config)) {}
    ModelConfig config_;
};

} // namespace timeemb
