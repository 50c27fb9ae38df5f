#include "timeemb/train.hpp"

#include "timeemb/error.hpp"
#include "timeemb/optim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

namespace timeemb {

namespace {

void check_alpha(double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("loss weight alpha must lie in [0, 1]");
}

// H×D -> D×H so that the graph transforms along the horizon.
RealArray channel_rows(const RealArray& a) {
    if (a.rank() != 2) throw DimensionError("expected an H×D array, got " + shape_string(a.shape()));
    RealArray rows({a.dim(1), a.dim(0)});
    for (std::size_t t = 0; t < a.dim(0); ++t)
        for (std::size_t c = 0; c < a.dim(1); ++c) rows.at(c, t) = a.at(t, c);
    return rows;
}

double scalar_of(const std::function<Graph::Var(Graph&)>& build) { return evaluate(build).first; }

} // namespace

std::string to_string(FrequencyLoss kind) {
    return kind == FrequencyLoss::modulus ? "modulus" : "componentwise";
}

FrequencyLoss parse_frequency_loss(const std::string& text) {
    if (text == "modulus") return FrequencyLoss::modulus;
    if (text == "componentwise") return FrequencyLoss::componentwise;
    throw ConfigError("unknown frequency loss '" + text + "'");
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("train.lr must be positive");
    if (batch_size == 0) throw ConfigError("train.batch_size must be at least 1");
    if (patience > max_epochs) throw ConfigError("train.patience cannot exceed train.max_epochs");
    if (eval_batch_size == 0) throw ConfigError("train.eval_batch_size must be at least 1");
    check_alpha(alpha);
}

void TrainLog::write_csv(std::ostream& os, bool record_timing) const {
    os << "epoch,train_loss,val_loss,seconds\n" << std::setprecision(17);
    for (const auto& e : epochs) {
        os << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ',' << (record_timing ? e.seconds : 0.0)
           << '\n';
    }
}

Graph::Var frequency_mae(Graph& g, Graph::Var pred_rows, Graph::Var target_rows, FrequencyLoss kind) {
    if (g.value(pred_rows).shape() != g.value(target_rows).shape()) {
        throw DimensionError("frequency_mae: prediction " + shape_string(g.value(pred_rows).shape()) +
                             " vs target " + shape_string(g.value(target_rows).shape()));
    }
    const auto p = g.rfft_rows(pred_rows);
    const auto t = g.rfft_rows(target_rows);
    const Graph::CVar diff{g.sub(p.re, t.re), g.sub(p.im, t.im)};
    if (kind == FrequencyLoss::modulus) return g.mean(g.modulus(diff));
    return g.mean(g.add(g.abs(diff.re), g.abs(diff.im)));
}

Graph::Var combined_loss(Graph& g, Graph::Var pred_rows, Graph::Var target_rows, double alpha,
                         FrequencyLoss kind) {
    check_alpha(alpha);
    const auto mse = g.mean(g.square(g.sub(pred_rows, target_rows)));
    const auto fmae = frequency_mae(g, pred_rows, target_rows, kind);
    return g.add(g.scale(fmae, alpha), g.scale(mse, 1.0 - alpha));
}

double frequency_mae(const RealArray& pred, const RealArray& target, FrequencyLoss kind) {
    require_same_shape(pred.shape(), target.shape(), "frequency_mae");
    return scalar_of([&](Graph& g) {
        return frequency_mae(g, g.constant(channel_rows(pred)), g.constant(channel_rows(target)), kind);
    });
}

double mean_squared_error(const RealArray& pred, const RealArray& target) {
    require_same_shape(pred.shape(), target.shape(), "mean_squared_error");
    if (pred.empty()) throw DimensionError("mean_squared_error: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) acc += (pred[i] - target[i]) * (pred[i] - target[i]);
    return acc / static_cast<double>(pred.size());
}

double combined_loss(const RealArray& pred, const RealArray& target, double alpha, FrequencyLoss kind) {
    check_alpha(alpha);
    require_same_shape(pred.shape(), target.shape(), "combined_loss");
    return scalar_of([&](Graph& g) {
        return combined_loss(g, g.constant(channel_rows(pred)), g.constant(channel_rows(target)), alpha, kind);
    });
}

double dataset_loss(TimeEmbModel& model, const RealArray& values, std::span<const WindowIndex> ws,
                    const TrainConfig& config) {
    if (ws.empty()) throw DataError("dataset_loss: empty window set");
    const auto& mc = model.config();
    double total = 0.0;
    for (std::size_t begin = 0; begin < ws.size(); begin += config.eval_batch_size) {
        const auto chunk = ws.subspan(begin, std::min(config.eval_batch_size, ws.size() - begin));
        const Batch batch = make_batch(values, chunk, mc.lookback, mc.horizon);
        Graph g;
        const auto pred = model.forward(g, batch);
        const auto loss = combined_loss(g, pred, g.constant(to_rows(batch.y)), config.alpha, config.frequency_loss);
        total += g.value(loss)[0] * static_cast<double>(chunk.size());
    }
    return total / static_cast<double>(ws.size());
}

TrainLog fit(TimeEmbModel& model, const RealArray& values, std::span<const WindowIndex> train,
             std::span<const WindowIndex> val, const TrainConfig& config) {
    config.validate();
    if (train.empty()) throw DataError("fit: empty training split");
    if (val.empty()) throw DataError("fit: empty validation split");
    const auto& mc = model.config();

    const std::vector<Parameter*> params = model.trainable();
    AdamState adam;
    adam.options.learning_rate = config.learning_rate;
    adam.initialize(params);

    std::mt19937_64 rng(config.seed ^ 0x5eedba7c4u);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::vector<RealArray> best;
    auto snapshot = [&] {
        best.clear();
        for (const Parameter* p : params) best.push_back(p->value);
    };
    snapshot();

    TrainLog log;
    log.best_val_loss = std::numeric_limits<double>::infinity();
    std::size_t stale = 0;
    std::vector<WindowIndex> chunk;
    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        std::shuffle(order.begin(), order.end(), rng);

        double train_total = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
            const std::size_t n = std::min(config.batch_size, order.size() - begin);
            chunk.clear();
            for (std::size_t i = 0; i < n; ++i) chunk.push_back(train[order[begin + i]]);
            const Batch batch = make_batch(values, chunk, mc.lookback, mc.horizon);
            // TODO: split the batch across worker threads with private gradient buffers summed before adam_step.
            const double loss = evaluate_with_gradients(params, [&](Graph& g) {
                const auto pred = model.forward(g, batch);
                return combined_loss(g, pred, g.constant(to_rows(batch.y)), config.alpha, config.frequency_loss);
            });
            adam_step(params, adam);
            train_total += loss * static_cast<double>(n);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = train_total / static_cast<double>(train.size());
        rec.val_loss = dataset_loss(model, values, val, config);
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        log.epochs.push_back(rec);

        if (rec.val_loss < log.best_val_loss) {
            log.best_val_loss = rec.val_loss;
            log.best_epoch = epoch;
            snapshot();
            stale = 0;
        } else if (++stale >= config.patience) {
            break;
        }
    }

    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best[i];
    return log;
}

} // namespace timeemb
