#include "manifest.hpp"

#include "timeemb/error.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace timeemb::cli {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string unquote(std::string s) {
    s = trim(s);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
    return s;
}

// Drops a trailing comment that is not inside quotes.
std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

std::vector<std::string> list_items(const std::string& key, const std::string& raw) {
    std::string s = trim(raw);
    if (s.size() < 2 || s.front() != '[' || s.back() != ']') {
        throw ConfigError(key + ": expected a list like [a, b], got '" + raw + "'");
    }
    s = s.substr(1, s.size() - 2);
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = unquote(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string exact(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <typename T>
std::string list_text(const std::vector<T>& items, const std::function<std::string(const T&)>& fmt) {
    std::string out = "[";
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", " : "") + fmt(items[i]);
    return out + "]";
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used == v.size()) return d;
    } catch (const std::exception&) {
    }
    throw ConfigError(key + ": expected a number, got '" + v + "'");
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        if (!v.empty() && v.front() != '-') {
            const auto n = std::stoull(v, &used);
            if (used == v.size()) return n;
        }
    } catch (const std::exception&) {
    }
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

BankSpec to_bank(const std::string& key, const std::string& v) {
    const auto slash = v.find('/');
    if (slash == std::string::npos) {
        const auto m = to_uint(key, v);
        return {m, m};
    }
    return {to_uint(key, v.substr(0, slash)), to_uint(key, v.substr(slash + 1))};
}

template <typename Fn>
void with_config_context(const std::string& key, Fn&& fn) {
    try {
        fn();
    } catch (const ConfigError& e) {
        const std::string what = e.what();
        if (what.rfind(key, 0) == 0) throw;
        throw ConfigError(key + ": " + what);
    }
}

} // namespace

KeyValues parse_key_values(const std::string& text, const std::string& origin) {
    KeyValues kv;
    std::stringstream in(text);
    std::string line;
    std::string section;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        line = trim(strip_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']' && line.find('=') == std::string::npos) {
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(number) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError(origin + ":" + std::to_string(number) + ": empty key");
        kv[section.empty() ? key : section + "." + key] = unquote(line.substr(eq + 1));
    }
    return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open manifest " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_key_values(buf.str(), path.string());
}

std::pair<std::string, std::string> parse_override(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + text + "' is not key=value");
    return {trim(text.substr(0, eq)), unquote(text.substr(eq + 1))};
}

SplitSpec RunManifest::effective_split() const {
    SplitSpec s = split ? *split : SplitSpec::for_dataset(dataset_name, model.lookback);
    s.context = model.lookback;
    return s;
}

RunManifest manifest_from(const KeyValues& kv) {
    RunManifest m;
    ModelConfig& mc = m.model;
    TrainConfig& tc = m.train;
    std::optional<double> split_train, split_val, split_test;

    using Setter = std::function<void(const std::string&, const std::string&)>;
    const std::map<std::string, Setter> setters{
        {"dataset.path", [&](auto&, auto& v) { m.dataset_path = v; }},
        {"dataset.name", [&](auto&, auto& v) { m.dataset_name = v; }},
        {"dataset.max_rows", [&](auto& k, auto& v) { m.max_rows = to_uint(k, v); }},
        {"split.train", [&](auto& k, auto& v) { split_train = to_double(k, v); }},
        {"split.val", [&](auto& k, auto& v) { split_val = to_double(k, v); }},
        {"split.test", [&](auto& k, auto& v) { split_test = to_double(k, v); }},
        {"model.lookback", [&](auto& k, auto& v) { mc.lookback = to_uint(k, v); }},
        {"model.horizon", [&](auto& k, auto& v) { mc.horizon = to_uint(k, v); }},
        {"model.channels", [&](auto& k, auto& v) { mc.channels = to_uint(k, v); }},
        {"model.hidden", [&](auto& k, auto& v) { mc.hidden = to_uint(k, v); }},
        {"model.banks",
         [&](auto& k, auto& v) {
             mc.banks.clear();
             for (const auto& item : list_items(k, v)) mc.banks.push_back(to_bank(k, item));
         }},
        {"model.embedding_mode", [&](auto&, auto& v) { mc.embedding_mode = parse_embedding_mode(v); }},
        {"model.mean_scope", [&](auto&, auto& v) { mc.mean_scope = parse_mean_scope(v); }},
        {"model.filter", [&](auto& k, auto& v) { mc.filter_enabled = to_bool(k, v); }},
        {"model.revin", [&](auto& k, auto& v) { mc.revin_enabled = to_bool(k, v); }},
        {"model.topk",
         [&](auto& k, auto& v) {
             if (v == "none") mc.topk_mask.reset();
             else mc.topk_mask = to_uint(k, v);
         }},
        {"model.lowpass",
         [&](auto& k, auto& v) {
             if (v == "none") mc.lowpass_ratio.reset();
             else mc.lowpass_ratio = to_double(k, v);
         }},
        {"model.backbone", [&](auto&, auto& v) { mc.backbone = parse_backbone(v); }},
        {"model.revin_eps", [&](auto& k, auto& v) { mc.revin_eps = to_double(k, v); }},
        {"train.lr", [&](auto& k, auto& v) { tc.learning_rate = to_double(k, v); }},
        {"train.lr_grid",
         [&](auto& k, auto& v) {
             m.lr_grid.clear();
             for (const auto& item : list_items(k, v)) m.lr_grid.push_back(to_double(k, item));
         }},
        {"train.batch_size", [&](auto& k, auto& v) { tc.batch_size = to_uint(k, v); }},
        {"train.eval_batch_size", [&](auto& k, auto& v) { tc.eval_batch_size = to_uint(k, v); }},
        {"train.max_epochs", [&](auto& k, auto& v) { tc.max_epochs = to_uint(k, v); }},
        {"train.patience", [&](auto& k, auto& v) { tc.patience = to_uint(k, v); }},
        {"train.alpha", [&](auto& k, auto& v) { tc.alpha = to_double(k, v); }},
        {"train.frequency_loss", [&](auto&, auto& v) { tc.frequency_loss = parse_frequency_loss(v); }},
        {"run.seeds",
         [&](auto& k, auto& v) {
             m.seeds.clear();
             for (const auto& item : list_items(k, v)) m.seeds.push_back(to_uint(k, item));
         }},
        {"run.variant", [&](auto&, auto& v) { m.variant = v; }},
        {"run.variants", [&](auto& k, auto& v) { m.variants = list_items(k, v); }},
        {"run.output_dir", [&](auto&, auto& v) { m.output_dir = v; }},
        {"run.results_dir", [&](auto&, auto& v) { m.results_dir = v; }},
        {"run.record_timing", [&](auto& k, auto& v) { m.record_timing = to_bool(k, v); }},
        {"run.checkpoint", [&](auto&, auto& v) { m.checkpoint = v; }},
        {"run.windows",
         [&](auto& k, auto& v) {
             m.windows.clear();
             for (const auto& item : list_items(k, v)) m.windows.push_back(to_uint(k, item));
         }},
    };

    for (const auto& [key, value] : kv) {
        const auto it = setters.find(key);
        if (it == setters.end()) throw ConfigError(key + ": unknown manifest key");
        with_config_context(key, [&] { it->second(key, value); });
    }

    if (m.dataset_name.empty()) m.dataset_name = m.dataset_path.stem().string();
    if (split_train || split_val || split_test) {
        if (!(split_train && split_val && split_test)) {
            throw ConfigError("split: set all of split.train, split.val and split.test");
        }
        m.split = SplitSpec{*split_train, *split_val, *split_test, 0};
        with_config_context("split", [&] { m.split->validate(); });
    }
    if (m.seeds.empty()) throw ConfigError("run.seeds: at least one seed is required");
    for (double lr : m.lr_grid)
        if (!(lr > 0.0)) throw ConfigError("train.lr_grid: learning rates must be positive");
    with_config_context("model", [&] { mc.validate(); });
    with_config_context("train", [&] { tc.validate(); });
    return m;
}

KeyValues manifest_keys(const RunManifest& m) {
    const ModelConfig& mc = m.model;
    const TrainConfig& tc = m.train;
    KeyValues kv;
    kv["dataset.path"] = m.dataset_path.string();
    kv["dataset.name"] = m.dataset_name;
    kv["dataset.max_rows"] = std::to_string(m.max_rows);
    if (m.split) {
        kv["split.train"] = exact(m.split->train);
        kv["split.val"] = exact(m.split->val);
        kv["split.test"] = exact(m.split->test);
    }
    kv["model.lookback"] = std::to_string(mc.lookback);
    kv["model.horizon"] = std::to_string(mc.horizon);
    kv["model.channels"] = std::to_string(mc.channels);
    kv["model.hidden"] = std::to_string(mc.hidden);
    kv["model.banks"] = list_text<BankSpec>(mc.banks, [](const BankSpec& b) {
        return "\"" + std::to_string(b.slots) + "/" + std::to_string(b.period) + "\"";
    });
    kv["model.embedding_mode"] = to_string(mc.embedding_mode);
    kv["model.mean_scope"] = to_string(mc.mean_scope);
    kv["model.filter"] = mc.filter_enabled ? "true" : "false";
    kv["model.revin"] = mc.revin_enabled ? "true" : "false";
    kv["model.topk"] = mc.topk_mask ? std::to_string(*mc.topk_mask) : "none";
    kv["model.lowpass"] = mc.lowpass_ratio ? exact(*mc.lowpass_ratio) : "none";
    kv["model.backbone"] = to_string(mc.backbone);
    kv["model.revin_eps"] = exact(mc.revin_eps);
    kv["train.lr"] = exact(tc.learning_rate);
    kv["train.lr_grid"] = list_text<double>(m.lr_grid, [](const double& v) { return exact(v); });
    kv["train.batch_size"] = std::to_string(tc.batch_size);
    kv["train.eval_batch_size"] = std::to_string(tc.eval_batch_size);
    kv["train.max_epochs"] = std::to_string(tc.max_epochs);
    kv["train.patience"] = std::to_string(tc.patience);
    kv["train.alpha"] = exact(tc.alpha);
    kv["train.frequency_loss"] = to_string(tc.frequency_loss);
    kv["run.seeds"] = list_text<std::uint64_t>(m.seeds, [](const std::uint64_t& s) { return std::to_string(s); });
    kv["run.variant"] = m.variant;
    kv["run.variants"] = list_text<std::string>(m.variants, [](const std::string& s) { return "\"" + s + "\""; });
    kv["run.output_dir"] = m.output_dir.string();
    kv["run.results_dir"] = m.results_dir.string();
    kv["run.record_timing"] = m.record_timing ? "true" : "false";
    kv["run.checkpoint"] = m.checkpoint.string();
    kv["run.windows"] =
        list_text<std::size_t>(m.windows, [](const std::size_t& w) { return std::to_string(w); });
    return kv;
}

std::string format_key_values(const KeyValues& kv) {
    std::string out;
    for (const auto& [key, value] : kv) {
        const bool bare = !value.empty() && (value.front() == '[' || value == "true" || value == "false" ||
                                             value.find_first_not_of("0123456789.eE+-") == std::string::npos);
        out += key + " = " + (bare ? value : "\"" + value + "\"") + "\n";
    }
    return out;
}

} // namespace timeemb::cli
