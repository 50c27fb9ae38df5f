#include "timeemb/model.hpp"

#include "timeemb/error.hpp"
#include "timeemb/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace timeemb {

namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(const std::string& text, const std::pair<const char*, Enum> (&table)[N], const char* what) {
    for (const auto& [name, value] : table) {
        if (text == name) return value;
    }
    throw ConfigError(std::string("unknown ") + what + " '" + text + "'");
}

constexpr std::pair<const char*, EmbeddingMode> kModes[] = {
    {"learned", EmbeddingMode::learned},       {"none", EmbeddingMode::none},
    {"zero_fixed", EmbeddingMode::zero_fixed}, {"mean_fixed", EmbeddingMode::mean_fixed},
    {"random_reinit", EmbeddingMode::random_reinit},
};

constexpr std::pair<const char*, BackboneKind> kBackbones[] = {
    {"timeemb_head", BackboneKind::timeemb_head},
    {"plain_linear", BackboneKind::plain_linear},
    {"plain_mlp", BackboneKind::plain_mlp},
    {"trend_residual_linear", BackboneKind::trend_residual_linear},
};

constexpr std::pair<const char*, MeanScope> kScopes[] = {
    {"per_slot", MeanScope::per_slot},
    {"global", MeanScope::global},
};

Parameter uniform_param(std::string name, Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    RealArray v(std::move(shape));
    for (double& x : v.storage()) x = dist(rng);
    return Parameter(std::move(name), std::move(v));
}

// 0/1 mask over an R×F matrix, one row per channel.
RealArray mask_rows(const RealArray& rows, const ModelConfig& config) {
    const std::size_t r = rows.dim(0);
    const std::size_t f = rows.dim(1);
    RealArray mask({r, f}, 1.0);
    if (config.lowpass_ratio) {
        const auto keep = static_cast<std::size_t>(std::ceil(*config.lowpass_ratio * static_cast<double>(f) - 1e-12));
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t k = std::min(keep, f); k < f; ++k) mask.at(i, k) = 0.0;
    } else if (config.topk_mask) {
        const std::size_t keep = std::min(*config.topk_mask, f);
        std::vector<std::size_t> order(f);
        for (std::size_t i = 0; i < r; ++i) {
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return std::abs(rows.at(i, a)) > std::abs(rows.at(i, b));
            });
            for (std::size_t j = keep; j < f; ++j) mask.at(i, order[j]) = 0.0;
        }
    }
    return mask;
}

RealArray transpose2(const RealArray& a) {
    RealArray t({a.dim(1), a.dim(0)});
    for (std::size_t i = 0; i < a.dim(0); ++i)
        for (std::size_t j = 0; j < a.dim(1); ++j) t.at(j, i) = a.at(i, j);
    return t;
}

} // namespace

std::string to_string(EmbeddingMode mode) {
    for (const auto& [name, value] : kModes)
        if (value == mode) return name;
    return "?";
}

std::string to_string(BackboneKind kind) {
    for (const auto& [name, value] : kBackbones)
        if (value == kind) return name;
    return "?";
}

std::string to_string(MeanScope scope) {
    for (const auto& [name, value] : kScopes)
        if (value == scope) return name;
    return "?";
}

EmbeddingMode parse_embedding_mode(const std::string& text) { return parse_enum(text, kModes, "embedding mode"); }
BackboneKind parse_backbone(const std::string& text) { return parse_enum(text, kBackbones, "backbone"); }
MeanScope parse_mean_scope(const std::string& text) { return parse_enum(text, kScopes, "mean scope"); }

void ModelConfig::validate() const {
    if (lookback < 2) throw ConfigError("model.lookback must be at least 2");
    if (horizon < 1) throw ConfigError("model.horizon must be at least 1");
    if (channels < 1) throw ConfigError("model.channels must be at least 1");
    if (hidden < 1) throw ConfigError("model.hidden must be at least 1");
    if (topk_mask && lowpass_ratio) throw ConfigError("model.topk and model.lowpass are mutually exclusive");
    if (topk_mask && *topk_mask > bins()) {
        throw ConfigError("model.topk " + std::to_string(*topk_mask) + " exceeds " + std::to_string(bins()) + " bins");
    }
    if (lowpass_ratio && !(*lowpass_ratio >= 0.0 && *lowpass_ratio <= 1.0)) {
        throw ConfigError("model.lowpass must lie in [0, 1]");
    }
    if (!(revin_eps > 0.0)) throw ConfigError("model.revin_eps must be positive");
    if (embedding_mode != EmbeddingMode::none && embedding_mode != EmbeddingMode::zero_fixed && banks.empty()) {
        throw ConfigError("model.banks must list at least one bank for embedding mode " + to_string(embedding_mode));
    }
    for (const auto& b : banks) b.validate();
}

std::pair<RealArray, InstanceNormState> instance_normalize(const RealArray& window, double eps) {
    if (window.rank() != 2 || window.dim(0) < 2) {
        throw DimensionError("instance_normalize: need an L×D window with L >= 2");
    }
    const std::size_t l = window.dim(0);
    const std::size_t d = window.dim(1);
    InstanceNormState state{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0), eps};
    for (std::size_t c = 0; c < d; ++c) {
        double mean = 0.0;
        for (std::size_t t = 0; t < l; ++t) mean += window.at(t, c);
        mean /= static_cast<double>(l);
        double var = 0.0;
        for (std::size_t t = 0; t < l; ++t) {
            const double dev = window.at(t, c) - mean;
            var += dev * dev;
        }
        var /= static_cast<double>(l);
        state.mean[c] = mean;
        state.std[c] = std::sqrt(var + eps);
    }
    RealArray out(window.shape());
    for (std::size_t t = 0; t < l; ++t)
        for (std::size_t c = 0; c < d; ++c) out.at(t, c) = (window.at(t, c) - state.mean[c]) / state.std[c];
    return {std::move(out), std::move(state)};
}

RealArray inverse_normalize(const RealArray& normalized, const InstanceNormState& state) {
    if (normalized.rank() != 2 || normalized.dim(1) != state.mean.size()) {
        throw DimensionError("inverse_normalize: channel count mismatch");
    }
    RealArray out(normalized.shape());
    for (std::size_t t = 0; t < normalized.dim(0); ++t)
        for (std::size_t c = 0; c < normalized.dim(1); ++c)
            out.at(t, c) = normalized.at(t, c) * state.std[c] + state.mean[c];
    return out;
}

Backbone Backbone::create(BackboneKind kind, std::size_t lookback, std::size_t horizon, std::size_t hidden,
                          std::mt19937_64& rng) {
    Backbone b;
    b.kind_ = kind;
    b.lookback_ = lookback;
    b.horizon_ = horizon;
    switch (kind) {
    case BackboneKind::timeemb_head:
        b.params.push_back(uniform_param("head.w1", {hidden, lookback}, lookback, rng));
        b.params.push_back(uniform_param("head.b1", {hidden}, lookback, rng));
        b.params.push_back(uniform_param("head.w2", {horizon, hidden}, hidden, rng));
        b.params.push_back(uniform_param("head.b2", {horizon}, hidden, rng));
        break;
    case BackboneKind::plain_linear:
        b.params.push_back(uniform_param("linear.w", {horizon, lookback}, lookback, rng));
        b.params.push_back(uniform_param("linear.b", {horizon}, lookback, rng));
        break;
    case BackboneKind::plain_mlp:
        b.params.push_back(uniform_param("mlp.w1", {hidden, lookback}, lookback, rng));
        b.params.push_back(uniform_param("mlp.b1", {hidden}, lookback, rng));
        b.params.push_back(uniform_param("mlp.w2", {hidden, hidden}, hidden, rng));
        b.params.push_back(uniform_param("mlp.b2", {hidden}, hidden, rng));
        b.params.push_back(uniform_param("mlp.w3", {horizon, hidden}, hidden, rng));
        b.params.push_back(uniform_param("mlp.b3", {horizon}, hidden, rng));
        break;
    case BackboneKind::trend_residual_linear:
        b.params.push_back(uniform_param("trend.w", {horizon, lookback}, lookback, rng));
        b.params.push_back(uniform_param("trend.b", {horizon}, lookback, rng));
        b.params.push_back(uniform_param("resid.w", {horizon, lookback}, lookback, rng));
        b.params.push_back(uniform_param("resid.b", {horizon}, lookback, rng));
        b.trend_ = trend_kernel(lookback);
        break;
    }
    return b;
}

RealArray Backbone::trend_kernel(std::size_t lookback, std::size_t kernel) {
    RealArray a({lookback, lookback});
    const auto half = static_cast<std::ptrdiff_t>((kernel - 1) / 2);
    const double w = 1.0 / static_cast<double>(2 * half + 1);
    const auto last = static_cast<std::ptrdiff_t>(lookback) - 1;
    for (std::ptrdiff_t i = 0; i <= last; ++i)
        for (std::ptrdiff_t j = -half; j <= half; ++j) {
            const std::ptrdiff_t src = std::clamp<std::ptrdiff_t>(i + j, 0, last);
            a.at(static_cast<std::size_t>(i), static_cast<std::size_t>(src)) += w;
        }
    return a;
}

Graph::Var Backbone::forward(Graph& g, Graph::Var rows) {
    auto p = [&](std::size_t i) { return g.param(params[i]); };
    switch (kind_) {
    case BackboneKind::timeemb_head: {
        const auto hidden = g.relu(g.affine(rows, p(0), p(1)));
        return g.affine(hidden, p(2), p(3));
    }
    case BackboneKind::plain_linear:
        return g.affine(rows, p(0), p(1));
    case BackboneKind::plain_mlp: {
        const auto h1 = g.relu(g.affine(rows, p(0), p(1)));
        const auto h2 = g.relu(g.affine(h1, p(2), p(3)));
        return g.affine(h2, p(4), p(5));
    }
    case BackboneKind::trend_residual_linear: {
        const auto trend = g.affine(rows, g.constant(trend_), Graph::Var{});
        const auto resid = g.sub(rows, trend);
        return g.add(g.affine(trend, p(0), p(1)), g.affine(resid, p(2), p(3)));
    }
    }
    throw ConfigError("unknown backbone");
}

std::vector<Parameter*> Backbone::parameters() {
    std::vector<Parameter*> out;
    for (auto& p : params) out.push_back(&p);
    return out;
}

std::vector<const Parameter*> Backbone::parameters() const {
    std::vector<const Parameter*> out;
    for (const auto& p : params) out.push_back(&p);
    return out;
}

std::size_t Backbone::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params) n += p.value.size();
    return n;
}

std::size_t Backbone::parameter_count(BackboneKind kind, std::size_t l, std::size_t h, std::size_t d) {
    switch (kind) {
    case BackboneKind::timeemb_head: return d * l + d + h * d + h;
    case BackboneKind::plain_linear: return h * l + h;
    case BackboneKind::plain_mlp: return d * l + d + d * d + d + h * d + h;
    case BackboneKind::trend_residual_linear: return 2 * (h * l + h);
    }
    return 0;
}

std::vector<double> head_forward(std::span<const double> x, const Backbone& head) {
    if (head.kind() != BackboneKind::timeemb_head) throw ConfigError("head_forward: backbone is not a timeemb_head");
    const RealArray& w1 = head.params[0].value;
    const RealArray& b1 = head.params[1].value;
    const RealArray& w2 = head.params[2].value;
    const RealArray& b2 = head.params[3].value;
    const std::size_t hidden = w1.dim(0);
    const std::size_t l = w1.dim(1);
    const std::size_t h = w2.dim(0);
    if (x.size() != l) throw DimensionError("head_forward: input length mismatch");
    std::vector<double> z(hidden);
    for (std::size_t i = 0; i < hidden; ++i) {
        double acc = b1[i];
        for (std::size_t j = 0; j < l; ++j) acc += w1.at(i, j) * x[j];
        z[i] = std::max(acc, 0.0);
    }
    std::vector<double> y(h);
    for (std::size_t i = 0; i < h; ++i) {
        double acc = b2[i];
        for (std::size_t j = 0; j < hidden; ++j) acc += w2.at(i, j) * z[j];
        y[i] = acc;
    }
    return y;
}

RealArray apply_spectrum_masks(const RealArray& invariant, const ModelConfig& config) {
    if (config.topk_mask && config.lowpass_ratio) {
        throw ConfigError("model.topk and model.lowpass are mutually exclusive");
    }
    if (invariant.rank() != 2) throw DimensionError("apply_spectrum_masks: X_s must be F×D");
    if (!config.topk_mask && !config.lowpass_ratio) return invariant;
    const RealArray rows = transpose2(invariant);
    const RealArray mask = mask_rows(rows, config);
    RealArray out = invariant;
    for (std::size_t k = 0; k < out.dim(0); ++k)
        for (std::size_t c = 0; c < out.dim(1); ++c) out.at(k, c) *= mask.at(c, k);
    return out;
}

std::size_t parameter_count(const ModelConfig& config) {
    std::size_t n = 0;
    if (config.has_learned_banks()) {
        for (const auto& b : config.banks) n += b.slots * config.bins() * config.channels;
    }
    if (config.filter_enabled) n += 2 * config.bins();
    n += Backbone::parameter_count(config.backbone, config.lookback, config.horizon, config.hidden);
    return n;
}

RealArray to_rows(const RealArray& batched) {
    if (batched.rank() != 3) throw DimensionError("to_rows: expected B×T×D");
    const std::size_t b = batched.dim(0), t = batched.dim(1), d = batched.dim(2);
    RealArray rows({b * d, t});
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t s = 0; s < t; ++s)
            for (std::size_t c = 0; c < d; ++c) rows[(i * d + c) * t + s] = batched[(i * t + s) * d + c];
    return rows;
}

RealArray from_rows(const RealArray& rows, std::size_t channels) {
    if (rows.rank() != 2 || rows.dim(0) % channels != 0) throw DimensionError("from_rows: bad row count");
    const std::size_t b = rows.dim(0) / channels, t = rows.dim(1), d = channels;
    RealArray out({b, t, d});
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t s = 0; s < t; ++s)
            for (std::size_t c = 0; c < d; ++c) out[(i * t + s) * d + c] = rows[(i * d + c) * t + s];
    return out;
}

TimeEmbModel TimeEmbModel::create(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    TimeEmbModel m(config);
    std::mt19937_64 rng(seed);
    const std::size_t f = config.bins();
    if (config.has_learned_banks()) {
        for (std::size_t i = 0; i < config.banks.size(); ++i) {
            m.banks.push_back(EmbeddingBank::zeros("bank" + std::to_string(i), config.banks[i], f, config.channels));
        }
    }
    m.filter = FrequencyFilter::identity(f);
    m.backbone = Backbone::create(config.backbone, config.lookback, config.horizon, config.hidden, rng);
    if (config.embedding_mode == EmbeddingMode::mean_fixed) {
        m.fixed_invariant = RealArray({config.banks.front().slots, f, config.channels});
    }
    return m;
}

std::vector<Parameter*> TimeEmbModel::trainable() {
    std::vector<Parameter*> out;
    for (auto& b : banks) out.push_back(&b.values);
    if (config_.filter_enabled) {
        out.push_back(&filter.re);
        out.push_back(&filter.im);
    }
    for (Parameter* p : backbone.parameters()) out.push_back(p);
    return out;
}

std::vector<const Parameter*> TimeEmbModel::all_parameters() const {
    std::vector<const Parameter*> out;
    for (const auto& b : banks) out.push_back(&b.values);
    out.push_back(&filter.re);
    out.push_back(&filter.im);
    for (const Parameter* p : backbone.parameters()) out.push_back(p);
    return out;
}

std::size_t TimeEmbModel::parameter_count() const {
    std::size_t n = backbone.parameter_count();
    for (const auto& b : banks) n += b.values.value.size();
    if (config_.filter_enabled) n += filter.re.value.size() + filter.im.value.size();
    return n;
}

Graph::Var TimeEmbModel::forward(Graph& g, const Batch& batch) {
    const ModelConfig& cfg = config_;
    if (batch.x.rank() != 3 || batch.x.dim(1) != cfg.lookback || batch.x.dim(2) != cfg.channels) {
        throw DimensionError("TimeEmbModel::forward: batch " + shape_string(batch.x.shape()) + " vs lookback " +
                             std::to_string(cfg.lookback) + ", channels " + std::to_string(cfg.channels));
    }
    const std::size_t l = cfg.lookback;
    const std::size_t h = cfg.horizon;
    const std::size_t f = cfg.bins();
    RealArray rows = to_rows(batch.x);
    const std::size_t r = rows.dim(0);

    RealArray row_mean, row_std;
    if (cfg.revin_enabled) {
        row_mean = RealArray({r, h});
        row_std = RealArray({r, h});
        for (std::size_t i = 0; i < r; ++i) {
            double* x = rows.data() + i * l;
            double mean = 0.0;
            for (std::size_t t = 0; t < l; ++t) mean += x[t];
            mean /= static_cast<double>(l);
            double var = 0.0;
            for (std::size_t t = 0; t < l; ++t) var += (x[t] - mean) * (x[t] - mean);
            const double sd = std::sqrt(var / static_cast<double>(l) + cfg.revin_eps);
            for (std::size_t t = 0; t < l; ++t) x[t] = (x[t] - mean) / sd;
            std::fill_n(row_mean.data() + i * h, h, mean);
            std::fill_n(row_std.data() + i * h, h, sd);
        }
    }

    const Graph::CVar spectrum = g.rfft_rows(g.constant(std::move(rows)));

    // X_s rows, R×F.
    std::optional<Graph::Var> invariant;
    switch (cfg.embedding_mode) {
    case EmbeddingMode::learned:
    case EmbeddingMode::random_reinit:
        for (auto& bank : banks) {
            std::vector<std::size_t> slots;
            slots.reserve(batch.size());
            for (auto t : batch.t_last) slots.push_back(slot_index(t, bank.spec));
            const auto part = g.gather_slots(g.param(bank.values), slots);
            invariant = invariant ? g.add(*invariant, part) : part;
        }
        break;
    case EmbeddingMode::mean_fixed: {
        std::vector<std::size_t> slots;
        for (auto t : batch.t_last) slots.push_back(slot_index(t, cfg.banks.front()));
        invariant = g.gather_slots(g.constant(fixed_invariant), slots);
        break;
    }
    case EmbeddingMode::none:
    case EmbeddingMode::zero_fixed:
        break;
    }
    if (invariant && (cfg.topk_mask || cfg.lowpass_ratio)) {
        invariant = g.mul(*invariant, g.constant(mask_rows(g.value(*invariant), cfg)));
    }

    Graph::CVar varying = spectrum;
    if (invariant) varying.re = g.sub(spectrum.re, *invariant);

    Graph::CVar filtered = varying;
    if (cfg.filter_enabled) {
        // The imaginary gain of the DC (and Nyquist) bin has no effect on a
        // real signal; masking it keeps the filtered spectrum Hermitian.
        RealArray reality({f}, 1.0);
        reality[0] = 0.0;
        if (l % 2 == 0) reality[f - 1] = 0.0;
        const Graph::CVar gain{g.param(filter.re), g.mul(g.param(filter.im), g.constant(std::move(reality)))};
        filtered = g.complex_mul_rows(varying, gain);
    }

    Graph::CVar combined = filtered;
    if (invariant) combined.re = g.add(filtered.re, *invariant);

    const auto signal = g.irfft_rows(combined, l);
    auto out = backbone.forward(g, signal);
    if (cfg.revin_enabled) {
        out = g.add(g.mul(out, g.constant(std::move(row_std))), g.constant(std::move(row_mean)));
    }
    return out;
}

RealArray TimeEmbModel::predict(const Batch& batch) {
    Graph g;
    const auto out = forward(g, batch);
    return from_rows(g.value(out), config_.channels);
}

RealArray TimeEmbModel::invariant_for(std::uint64_t t_last) const {
    const std::size_t f = config_.bins();
    const std::size_t d = config_.channels;
    RealArray xs({f, d});
    switch (config_.embedding_mode) {
    case EmbeddingMode::learned:
    case EmbeddingMode::random_reinit:
        xs = lookup_invariant(banks, t_last);
        break;
    case EmbeddingMode::mean_fixed: {
        const std::size_t slot = slot_index(t_last, config_.banks.front());
        std::copy_n(fixed_invariant.data() + slot * f * d, f * d, xs.data());
        break;
    }
    case EmbeddingMode::none:
    case EmbeddingMode::zero_fixed:
        return xs;
    }
    return apply_spectrum_masks(xs, config_);
}

void TimeEmbModel::fit_mean_invariant(const RealArray& values, std::span<const WindowIndex> train) {
    if (config_.embedding_mode != EmbeddingMode::mean_fixed) return;
    if (train.empty()) throw DataError("fit_mean_invariant: no training windows");
    const std::size_t f = config_.bins();
    const std::size_t d = config_.channels;
    const BankSpec& spec = config_.banks.front();
    RealArray sums({spec.slots, f, d});
    std::vector<std::size_t> counts(spec.slots, 0);
    RealArray global({f, d});
    for (const auto& w : train) {
        RealArray x = materialize(values, w, config_.lookback, 0).x;
        if (config_.revin_enabled) x = instance_normalize(x, config_.revin_eps).first;
        const Spectrum s = forward_rfft(x);
        const std::size_t slot = slot_index(w.t_last, spec);
        double* dst = sums.data() + slot * f * d;
        for (std::size_t i = 0; i < f * d; ++i) {
            dst[i] += s.bins.re()[i];
            global[i] += s.bins.re()[i];
        }
        ++counts[slot];
    }
    fixed_invariant = RealArray({spec.slots, f, d});
    for (std::size_t m = 0; m < spec.slots; ++m) {
        for (std::size_t i = 0; i < f * d; ++i) {
            double v = global[i] / static_cast<double>(train.size());
            if (config_.mean_scope == MeanScope::per_slot && counts[m] > 0) {
                v = sums[m * f * d + i] / static_cast<double>(counts[m]);
            }
            fixed_invariant[m * f * d + i] = v;
        }
    }
}

void TimeEmbModel::reinitialize_banks(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, kRandomBankStd);
    for (auto& bank : banks)
        for (double& v : bank.values.value.storage()) v = dist(rng);
}

} // namespace timeemb
