#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "retts/model.hpp"
#include "retts/train_config.hpp"

namespace retts {

struct RunConfig {
  ModelConfig model;
  TrainConfig train;

  bool operator==(const RunConfig&) const = default;
};

/// Applies `key=value` lines (blank lines and `#` comments ignored) on top of
/// `base`. Unknown keys and unparsable values are InputErrors naming the line.
RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path);

/// Every field, one per line, in a fixed order; parse_config(format_config(c))
/// reproduces c exactly.
std::string format_config(const RunConfig& config);

/// Names of every addressable key, in format order.
std::vector<std::string> config_keys();

}  // namespace retts
