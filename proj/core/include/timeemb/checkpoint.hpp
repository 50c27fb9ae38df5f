#pragma once

#include "timeemb/model.hpp"

#include <filesystem>
#include <string>

namespace timeemb {

inline constexpr int kCheckpointVersion = 1;

// Versioned JSON holding the model configuration and every parameter.
void save_checkpoint(const std::filesystem::path& path, const TimeEmbModel& model);
// Throws FormatError on a malformed file or unsupported version.
TimeEmbModel load_checkpoint(const std::filesystem::path& path);

std::string serialize_checkpoint(const TimeEmbModel& model);
TimeEmbModel deserialize_checkpoint(const std::string& text);

} // namespace timeemb
