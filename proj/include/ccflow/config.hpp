#pragma once

// Flat key-value configuration with [sections]; every run echoes the fully
// resolved form into its output directory so experiments stay auditable.

#include <map>
#include <string>
#include <vector>

#include "ccflow/model.hpp"
#include "ccflow/scenario.hpp"
#include "ccflow/training.hpp"

namespace ccflow::config {

struct KvConfig {
  std::map<std::string, std::string> values;  // "section.key" -> value

  bool has(const std::string& key) const { return values.count(key) > 0; }
  void set(const std::string& key, const std::string& value) { values[key] = value; }

  static KvConfig parse(const std::string& text);
  static KvConfig parse_file(const std::string& path);
  std::string serialize() const;  // sections and keys sorted; stable for hashing
};

// One experiment: world generator, model and trainer settings.
struct Experiment {
  scenario::ScenarioConfig world;
  model::ModelConfig model;
  train::TrainConfig train;

  // Fills model.input_channels / flow_input_channels / grid dims from the
  // world settings.
  void sync_model_to_world();
};

// Named presets: micro, cv-desk, womd-desk, av2-desk, womd-full.
Experiment preset(const std::string& name);
std::vector<std::string> preset_names();

// Applies key-value overrides on top; unknown keys raise ConfigError.
void apply_kv(Experiment& e, const KvConfig& kv);

KvConfig to_kv(const Experiment& e);

}  // namespace ccflow::config
