#pragma once

#include "timeemb/data.hpp"
#include "timeemb/model.hpp"
#include "timeemb/train.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace timeemb::cli {

// Raw `key = value` pairs; `[section]` headers prefix keys with "section.".
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(const std::string& text, const std::string& origin);
KeyValues read_key_values(const std::filesystem::path& path);
// "key=value" override from the command line.
std::pair<std::string, std::string> parse_override(const std::string& text);

struct RunManifest {
    std::filesystem::path dataset_path;
    std::string dataset_name;          // defaults to the file stem
    std::size_t max_rows = 0;          // 0 keeps every row
    std::optional<SplitSpec> split;    // defaults by dataset family
    ModelConfig model;
    TrainConfig train;
    std::vector<double> lr_grid;       // when non-empty, lr is picked by validation loss
    std::vector<std::uint64_t> seeds{0};
    std::string variant = "full";
    std::vector<std::string> variants{"full", "no_embedding"};
    std::filesystem::path output_dir = "runs";
    std::filesystem::path results_dir = "results";
    bool record_timing = true;
    std::filesystem::path checkpoint;
    std::vector<std::size_t> windows;  // export-components: window start steps

    // Split actually used for a dataset of this name.
    SplitSpec effective_split() const;
};

/// Builds a manifest from defaults overlaid with `kv`. Unknown keys and bad
/// values throw ConfigError naming the key.
RunManifest manifest_from(const KeyValues& kv);
/// Every key with its effective value; feeding this back reproduces the manifest.
KeyValues manifest_keys(const RunManifest& m);
std::string format_key_values(const KeyValues& kv);

} // namespace timeemb::cli
