#include "commands.hpp"

#include "timeemb/checkpoint.hpp"
#include "timeemb/disentangle.hpp"
#include "timeemb/error.hpp"
#include "timeemb/spectral.hpp"
#include "timeemb/verify.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>

namespace timeemb::cli {

namespace {

namespace fs = std::filesystem;

constexpr const char* kLastValue = "last_value";

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << content;
}

void echo_manifest(const RunManifest& m) {
    write_file(m.output_dir / "manifest.toml", format_key_values(manifest_keys(m)));
}

std::string run_label(const RunManifest& m, const std::string& variant) {
    return m.dataset_name + "_" + std::to_string(m.model.lookback) + "_" + std::to_string(m.model.horizon) + "_" +
           variant;
}

// Directory-safe spelling of a variant token.
std::string variant_dir(std::string v) {
    for (char& c : v)
        if (c == ':' || c == '/') c = '_';
    return v;
}

void save_seed(const RunManifest& m, const std::string& variant, std::uint64_t seed, const TimeEmbModel& model,
               const SeedRun& run) {
    const fs::path dir = m.output_dir / variant_dir(run_label(m, variant)) / ("seed_" + std::to_string(seed));
    fs::create_directories(dir);
    save_checkpoint(dir / "checkpoint.json", model);
    std::ofstream log(dir / "train_log.csv");
    run.log.write_csv(log, m.record_timing);
}

RunRecord make_record(const RunManifest& m, const std::string& variant, std::uint64_t seed, const SeedRun& run) {
    RunRecord r;
    r.dataset = m.dataset_name;
    r.lookback = m.model.lookback;
    r.horizon = m.model.horizon;
    r.variant = variant;
    r.seed = seed;
    r.metrics = run.test;
    r.seconds = m.record_timing ? run.seconds : 0.0;
    r.params = run.params;
    return r;
}

void print_seed(std::ostream& out, const std::string& variant, std::uint64_t seed, const SeedRun& run) {
    char line[256];
    std::snprintf(line, sizeof line, "%-14s seed=%-3llu lr=%-7g epochs=%-3zu best=%-3zu mse=%.4f mae=%.4f\n",
                  variant.c_str(), static_cast<unsigned long long>(seed), run.learning_rate, run.log.epochs.size(),
                  run.log.best_epoch, run.test.mse, run.test.mae);
    out << line << std::flush;
}

struct Loaded {
    TimeEmbModel model;
    PreparedData data;
};

// Windows follow the checkpoint's lookback and horizon, not the manifest's.
Loaded load_compatible(RunManifest& m) {
    if (m.checkpoint.empty()) throw ConfigError("run.checkpoint: a checkpoint path is required");
    if (!fs::exists(m.checkpoint)) throw ConfigError("run.checkpoint: " + m.checkpoint.string() + " not found");
    TimeEmbModel model = load_checkpoint(m.checkpoint);
    m.model = model.config();
    PreparedData data = prepare_data(m);
    if (model.config().channels != data.dataset.channels()) {
        throw ConfigError("checkpoint has " + std::to_string(model.config().channels) + " channels, dataset " +
                          std::to_string(data.dataset.channels()));
    }
    return {std::move(model), std::move(data)};
}

} // namespace

PreparedData prepare_data(RunManifest& m) {
    if (m.dataset_path.empty()) throw ConfigError("dataset.path: no dataset configured");
    if (!fs::exists(m.dataset_path)) throw ConfigError("dataset.path: " + m.dataset_path.string() + " not found");
    PreparedData d;
    d.dataset = load_csv(m.dataset_path, m.dataset_name, m.max_rows);
    m.model.channels = d.dataset.channels();
    m.model.validate();
    const std::size_t l = m.model.lookback;
    const std::size_t h = m.model.horizon;
    d.ranges = split(d.dataset.steps(), m.effective_split(), l, h);
    d.values = Standardizer::fit(d.dataset.values, d.ranges.train).apply(d.dataset.values);
    d.train = windows(d.ranges.train, l, h);
    d.val = windows(d.ranges.val, l, h);
    d.test = windows(d.ranges.test, l, h);
    return d;
}

bool is_known_variant(const std::string& v) {
    static const std::vector<std::string> plain{"full", "random", "zero", "mean", "no_embedding",
                                                "no_filter", "no_revin", kLastValue};
    if (std::find(plain.begin(), plain.end(), v) != plain.end()) return true;
    return v.rfind("topk:", 0) == 0 || v.rfind("lowpass:", 0) == 0;
}

ModelConfig apply_variant(const ModelConfig& base, const std::string& variant) {
    ModelConfig c = base;
    auto argument = [&](const std::string& prefix) { return variant.substr(prefix.size()); };
    if (variant == "full" || variant == kLastValue) {
    } else if (variant == "random") {
        c.embedding_mode = EmbeddingMode::random_reinit;
    } else if (variant == "zero") {
        c.embedding_mode = EmbeddingMode::zero_fixed;
    } else if (variant == "mean") {
        c.embedding_mode = EmbeddingMode::mean_fixed;
    } else if (variant == "no_embedding") {
        c.embedding_mode = EmbeddingMode::none;
    } else if (variant == "no_filter") {
        c.filter_enabled = false;
    } else if (variant == "no_revin") {
        c.revin_enabled = false;
    } else if (variant.rfind("topk:", 0) == 0) {
        try {
            c.topk_mask = std::stoull(argument("topk:"));
        } catch (const std::exception&) {
            throw ConfigError("variant '" + variant + "': k must be a non-negative integer");
        }
    } else if (variant.rfind("lowpass:", 0) == 0) {
        try {
            c.lowpass_ratio = std::stod(argument("lowpass:"));
        } catch (const std::exception&) {
            throw ConfigError("variant '" + variant + "': ratio must be a number");
        }
    } else {
        throw ConfigError("unknown variant '" + variant + "'");
    }
    c.validate();
    return c;
}

SeedRun run_seed(const RunManifest& m, const PreparedData& data, const ModelConfig& config,
                 std::uint64_t seed, std::optional<TimeEmbModel>& out) {
    const auto started = std::chrono::steady_clock::now();
    const std::vector<double> grid = m.lr_grid.empty() ? std::vector<double>{m.train.learning_rate} : m.lr_grid;
    SeedRun best;
    for (double lr : grid) {
        TimeEmbModel model = TimeEmbModel::create(config, seed);
        model.fit_mean_invariant(data.values, data.train);
        TrainConfig tc = m.train;
        tc.learning_rate = lr;
        tc.seed = seed;
        TrainLog log = fit(model, data.values, data.train, data.val, tc);
        if (!out || log.best_val_loss < best.log.best_val_loss) {
            best.log = std::move(log);
            best.learning_rate = lr;
            out.emplace(std::move(model));
        }
    }
    if (config.embedding_mode == EmbeddingMode::random_reinit) out->reinitialize_banks(seed ^ 0x9e3779b97f4a7c15ULL);
    best.test = evaluate(*out, data.values, data.test, m.train.eval_batch_size);
    best.params = out->parameter_count();
    best.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return best;
}

int cmd_train(RunManifest m, std::ostream& out) {
    if (!is_known_variant(m.variant) || m.variant == kLastValue) {
        throw ConfigError("run.variant: unknown variant '" + m.variant + "'");
    }
    PreparedData data = prepare_data(m);
    const ModelConfig config = apply_variant(m.model, m.variant);
    echo_manifest(m);
    std::vector<RunRecord> records;
    for (std::uint64_t seed : m.seeds) {
        std::optional<TimeEmbModel> model;
        const SeedRun run = run_seed(m, data, config, seed, model);
        save_seed(m, m.variant, seed, *model, run);
        print_seed(out, m.variant, seed, run);
        records.push_back(make_record(m, m.variant, seed, run));
    }
    const auto rows = emit_tables(m.results_dir, records);
    write_summary_text(out, rows);
    return kExitOk;
}

int cmd_evaluate(RunManifest m, std::ostream& out) {
    auto [model, data] = load_compatible(m);
    const auto& mc = model.config();
    const Metrics metrics = evaluate(model, data.values, data.test, m.train.eval_batch_size);
    char line[256];
    std::snprintf(line, sizeof line, "dataset=%s L=%zu H=%zu windows=%zu mse=%.6f mae=%.6f\n",
                  m.dataset_name.c_str(), mc.lookback, mc.horizon, metrics.n_windows, metrics.mse, metrics.mae);
    out << line;
    return kExitOk;
}

int cmd_ablate(RunManifest m, std::ostream& out) {
    if (m.variants.empty()) throw ConfigError("run.variants: no variants listed");
    for (const auto& v : m.variants)
        if (!is_known_variant(v)) throw ConfigError("run.variants: unknown variant '" + v + "'");
    PreparedData data = prepare_data(m);
    std::vector<ModelConfig> configs;
    for (const auto& v : m.variants) configs.push_back(apply_variant(m.model, v));
    echo_manifest(m);

    std::vector<RunRecord> records;
    for (std::size_t i = 0; i < m.variants.size(); ++i) {
        const std::string& variant = m.variants[i];
        for (std::uint64_t seed : m.seeds) {
            SeedRun run;
            if (variant == kLastValue) {
                run.test = evaluate_last_value(data.values, data.test, m.model.lookback, m.model.horizon);
            } else {
                std::optional<TimeEmbModel> model;
                run = run_seed(m, data, configs[i], seed, model);
                save_seed(m, variant, seed, *model, run);
            }
            print_seed(out, variant, seed, run);
            records.push_back(make_record(m, variant, seed, run));
        }
    }
    const auto rows = emit_tables(m.results_dir, records);
    write_summary_text(out, rows);
    return kExitOk;
}

int cmd_verify(bool perturb_filter_gradient, std::ostream& out) {
    VerifyOptions options;
    options.perturb_filter_gradient = perturb_filter_gradient;
    const auto results = run_theory_oracles(options);
    write_report(out, results);
    const bool ok = all_passed(results);
    out << (ok ? "all properties hold\n" : "verification failed\n");
    return ok ? kExitOk : kExitFailure;
}

int cmd_export_components(RunManifest m, std::ostream& out) {
    if (m.windows.empty()) throw ConfigError("run.windows: list at least one window start");
    auto [model, data] = load_compatible(m);
    const auto& mc = model.config();

    std::ostringstream xbar, xs, xd;
    for (auto* os : {&xbar, &xs, &xd}) write_component_header(*os);
    for (std::size_t start : m.windows) {
        if (start + mc.lookback > data.dataset.steps()) {
            throw ConfigError("run.windows: window " + std::to_string(start) + " runs past the end of the data");
        }
        RealArray x = materialize(data.values, {start, start + mc.lookback - 1}, mc.lookback, 0).x;
        if (mc.revin_enabled) x = instance_normalize(x, mc.revin_eps).first;
        const Spectrum spectrum = forward_rfft(x);
        const RealArray invariant = model.invariant_for(start + mc.lookback - 1);
        write_component_rows(xbar, start, spectrum.bins);
        write_component_rows(xs, start, invariant);
        write_component_rows(xd, start, subtract_invariant(spectrum, invariant));
    }
    write_file(m.output_dir / "xbar.csv", xbar.str());
    write_file(m.output_dir / "xs.csv", xs.str());
    write_file(m.output_dir / "xd.csv", xd.str());
    std::ostringstream bank, filter;
    write_bank_csv(bank, model.banks);
    write_filter_csv(filter, model.filter);
    write_file(m.output_dir / "bank.csv", bank.str());
    write_file(m.output_dir / "filter.csv", filter.str());
    out << "wrote " << m.windows.size() << " window(s) to " << m.output_dir.string() << "\n";
    return kExitOk;
}

int cmd_param_count(RunManifest m, std::ostream& out) {
    if (!m.dataset_path.empty()) {
        if (!fs::exists(m.dataset_path)) throw ConfigError("dataset.path: " + m.dataset_path.string() + " not found");
        m.model.channels = load_csv(m.dataset_path, m.dataset_name, 2).channels();
    }
    const ModelConfig config = apply_variant(m.model, m.variant);
    const TimeEmbModel model = TimeEmbModel::create(config, 0);
    std::size_t bank = 0;
    for (const auto& b : model.banks) bank += b.values.value.size();
    const std::size_t filter = config.filter_enabled ? 2 * config.bins() : 0;
    const std::size_t backbone = model.backbone.parameter_count();
    out << "bank " << bank << "\nfilter " << filter << "\nbackbone " << backbone << "\ntotal "
        << model.parameter_count() << "\n";
    if (model.parameter_count() != parameter_count(config)) {
        out << "closed form disagrees: " << parameter_count(config) << "\n";
        return kExitFailure;
    }
    return kExitOk;
}

int run(int argc, char** argv) {
    CLI::App app{"Time-series forecasting with a spectral embedding bank"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    std::string dataset, output, results, checkpoint, seeds, variants, windows, variant;
    bool perturb = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", config_path, "Manifest file (key = value)");
        sub->add_option("--set", overrides, "Override a manifest key: key=value")->take_all();
        sub->add_option("--dataset", dataset, "dataset.path");
        sub->add_option("--output", output, "run.output_dir");
        sub->add_option("--results", results, "run.results_dir (default $" + std::string(kResultsEnv) + ")");
        sub->add_option("--seeds", seeds, "run.seeds, comma separated");
    };
    auto* train = app.add_subcommand("train", "Train every seed and record test metrics");
    add_common(train);
    train->add_option("--variant", variant, "run.variant");
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint on the test split");
    add_common(evaluate_cmd);
    evaluate_cmd->add_option("--checkpoint", checkpoint, "run.checkpoint");
    auto* ablate = app.add_subcommand("ablate", "Train and compare model variants under shared seeds");
    add_common(ablate);
    ablate->add_option("--variants", variants, "run.variants, comma separated");
    auto* verify = app.add_subcommand("verify", "Run the spectral and gradient property suite");
    verify->add_flag("--perturb-filter-gradient", perturb)->group("");
    auto* exporter = app.add_subcommand("export-components", "Dump input, invariant and varying spectra");
    add_common(exporter);
    exporter->add_option("--checkpoint", checkpoint, "run.checkpoint");
    exporter->add_option("--windows", windows, "run.windows: window start steps, comma separated");
    auto* params = app.add_subcommand("param-count", "Print the trainable parameter breakdown");
    add_common(params);
    params->add_option("--variant", variant, "run.variant");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (verify->parsed()) return cmd_verify(perturb, std::cout);

        KeyValues kv;
        if (!config_path.empty()) kv = read_key_values(config_path);
        if (const char* env = std::getenv(kResultsEnv); env && *env) kv["run.results_dir"] = env;
        auto as_list = [](const std::string& csv) { return "[" + csv + "]"; };
        if (!dataset.empty()) kv["dataset.path"] = dataset;
        if (!output.empty()) kv["run.output_dir"] = output;
        if (!results.empty()) kv["run.results_dir"] = results;
        if (!checkpoint.empty()) kv["run.checkpoint"] = checkpoint;
        if (!seeds.empty()) kv["run.seeds"] = as_list(seeds);
        if (!variants.empty()) kv["run.variants"] = as_list(variants);
        if (!windows.empty()) kv["run.windows"] = as_list(windows);
        if (!variant.empty()) kv["run.variant"] = variant;
        for (const auto& o : overrides) {
            const auto [key, value] = parse_override(o);
            kv[key] = value;
        }
        RunManifest manifest = manifest_from(kv);

        if (train->parsed()) return cmd_train(std::move(manifest), std::cout);
        if (evaluate_cmd->parsed()) return cmd_evaluate(std::move(manifest), std::cout);
        if (ablate->parsed()) return cmd_ablate(std::move(manifest), std::cout);
        if (exporter->parsed()) return cmd_export_components(std::move(manifest), std::cout);
        if (params->parsed()) return cmd_param_count(std::move(manifest), std::cout);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitFailure;
}

} // namespace timeemb::cli
