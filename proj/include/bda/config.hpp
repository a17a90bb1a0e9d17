#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "bda/model.hpp"
#include "bda/trainer.hpp"

namespace bda {

struct DataConfig {
  std::string manifest;              // dataset manifest (JSON)
  std::string valid_split = "valid"; // split used for checkpoint selection
  std::string eval_split = "test";   // split scored by eval
  std::string name;                  // dataset label for reports
};

// Everything a CLI run can be configured with. Serialized as flat
// "key=value" lines with namespaced keys (model.*, losses.*, train.*, data.*).
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
};

struct ConfigKey {
  std::string key;
  std::string default_value;
  std::string help;
};

// Every accepted key with its default, in canonical order.
const std::vector<ConfigKey>& config_keys();

// Throws ConfigError for unknown keys or unparsable values.
void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value);
std::string get_config_value(const RunConfig& cfg, std::string_view key);

// Applies "key=value" lines on top of cfg. Blank lines and lines starting
// with '#' are skipped.
void apply_config_text(RunConfig& cfg, std::string_view text);
RunConfig parse_config_text(std::string_view text);

// All keys in canonical order; parse_config_text(format_config(c)) == c.
std::string format_config(const RunConfig& cfg);

}  // namespace bda
