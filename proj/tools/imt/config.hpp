#pragma once

#include "imt/model/trainer.hpp"
#include "imt/session/session.hpp"
#include "imt/sim/pipeline.hpp"
#include "imt/sim/simulator.hpp"

#include "json.hpp"

#include <filesystem>
#include <functional>
#include <set>
#include <string>

namespace imt::cli {

/// Hyperparameters from three layers, later ones winning: a JSON config file,
/// IMT_* environment variables (IMT_MEMORY_THRESHOLD for memory_threshold),
/// then command-line flags. Every key has a built-in default.
class LayeredConfig {
 public:
  LayeredConfig();

  static const nlohmann::json& defaults();

  /// Keys must be known and values must have the default's type.
  void merge_file(const std::filesystem::path& path);
  void merge_json(const nlohmann::json& layer);
  /// `lookup` returns the variable's value or nullptr.
  void merge_env(const std::function<const char*(const char*)>& lookup);
  /// Parses `text` according to the key's type.
  void set(const std::string& key, const std::string& text);

  const nlohmann::json& values() const { return values_; }
  /// True when some layer set `key`, as opposed to the built-in default.
  bool is_set(const std::string& key) const { return set_.contains(key); }

  std::uint64_t seed() const;
  SessionOptions session_options() const;
  PipelineOptions pipeline_options() const;
  SimulationOptions simulation_options() const;

 private:
  void assign(const std::string& key, nlohmann::json value);

  nlohmann::json values_;
  std::set<std::string> set_;
};

/// Environment variable for a config key.
std::string env_name(const std::string& key);

}  // namespace imt::cli
