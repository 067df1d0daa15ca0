#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <stdexcept>

namespace imt::cli {

using nlohmann::json;

const json& LayeredConfig::defaults() {
  static const json d = {
      {"seed", 1},
      // session
      {"beam", kDefaultBeamSize},
      {"memory_capacity", RevisionMemory::kDefaultCapacity},
      {"memory_threshold", RevisionMemory::kDefaultThreshold},
      {"online_lr", kDefaultOnlineLearningRate},
      {"strategy", "bidir"},
      {"memory", true},
      {"online", true},
      // simulation
      {"budget", 4},
      {"global_online", false},
      // training
      {"vocab_size", 200},
      {"embed", 32},
      {"enc_hidden", 32},
      {"dec_hidden", 64},
      {"readout", 32},
      {"epochs", 12},
      {"batch_size", 16},
      {"lr", 5e-3},
      {"clip_norm", 5.0},
      {"train_memory", true},
      {"memory_epochs", 30},
      {"memory_lr", 0.05},
  };
  return d;
}

std::string env_name(const std::string& key) {
  std::string out = "IMT_";
  for (const char c : key) out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

LayeredConfig::LayeredConfig() : values_(defaults()) {}

void LayeredConfig::assign(const std::string& key, json value) {
  const auto it = defaults().find(key);
  if (it == defaults().end()) throw std::invalid_argument("unknown config key '" + key + "'");
  const bool same_kind = (it->is_boolean() && value.is_boolean()) || (it->is_string() && value.is_string()) ||
                         (it->is_number_integer() && value.is_number_integer()) ||
                         (it->is_number_float() && value.is_number());
  if (!same_kind) throw std::invalid_argument("config key '" + key + "' expects a " + it->type_name());
  if (it->is_number_integer() && value.get<std::int64_t>() < 0) {
    throw std::invalid_argument("config key '" + key + "' must be nonnegative");
  }
  if (it->is_number_float()) value = value.get<double>();
  values_[key] = std::move(value);
  set_.insert(key);
}

void LayeredConfig::merge_json(const json& layer) {
  if (!layer.is_object()) throw std::invalid_argument("config must be a JSON object");
  for (const auto& [key, value] : layer.items()) assign(key, value);
}

void LayeredConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error("config " + path.string() + ": " + e.what());
  }
  merge_json(j);
}

void LayeredConfig::merge_env(const std::function<const char*(const char*)>& lookup) {
  for (const auto& [key, _] : defaults().items()) {
    if (const char* v = lookup(env_name(key).c_str())) {
      try {
        set(key, v);
      } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(env_name(key) + ": " + e.what());
      }
    }
  }
}

void LayeredConfig::set(const std::string& key, const std::string& text) {
  const auto it = defaults().find(key);
  if (it == defaults().end()) throw std::invalid_argument("unknown config key '" + key + "'");
  const auto bad = [&] { return std::invalid_argument("bad value '" + text + "' for " + key); };
  if (it->is_boolean()) {
    std::string t = text;
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
    if (t == "1" || t == "true" || t == "yes" || t == "on") return assign(key, true);
    if (t == "0" || t == "false" || t == "no" || t == "off") return assign(key, false);
    throw bad();
  }
  if (it->is_string()) return assign(key, text);
  std::size_t used = 0;
  try {
    if (it->is_number_integer()) {
      if (text.empty() || text[0] == '-') throw bad();
      const auto v = std::stoull(text, &used);
      if (used != text.size()) throw bad();
      return assign(key, static_cast<std::int64_t>(v));
    }
    const double v = std::stod(text, &used);
    if (used != text.size()) throw bad();
    assign(key, v);
  } catch (const std::logic_error&) {
    throw bad();
  }
}

std::uint64_t LayeredConfig::seed() const { return values_.at("seed").get<std::uint64_t>(); }

SessionOptions LayeredConfig::session_options() const {
  SessionOptions o;
  o.beam_size = values_.at("beam").get<std::size_t>();
  o.memory_capacity = values_.at("memory_capacity").get<std::size_t>();
  o.memory_threshold = values_.at("memory_threshold").get<std::size_t>();
  o.online_lr = values_.at("online_lr").get<double>();
  o.strategy = parse_strategy(values_.at("strategy").get<std::string>());
  o.memory = values_.at("memory").get<bool>();
  o.online_learning = values_.at("online").get<bool>();
  if (o.beam_size == 0) throw std::invalid_argument("beam must be positive");
  if (o.memory_capacity == 0) throw std::invalid_argument("memory_capacity must be positive");
  return o;
}

PipelineOptions LayeredConfig::pipeline_options() const {
  PipelineOptions o;
  o.vocab_size = values_.at("vocab_size").get<std::size_t>();
  o.model.embed = values_.at("embed").get<std::size_t>();
  o.model.enc_hidden = values_.at("enc_hidden").get<std::size_t>();
  o.model.dec_hidden = values_.at("dec_hidden").get<std::size_t>();
  o.model.readout = values_.at("readout").get<std::size_t>();
  o.model.seed = seed();
  o.training.epochs = values_.at("epochs").get<std::size_t>();
  o.training.batch_size = values_.at("batch_size").get<std::size_t>();
  o.training.learning_rate = values_.at("lr").get<double>();
  o.training.clip_norm = values_.at("clip_norm").get<double>();
  o.training.seed = seed();
  o.train_memory = values_.at("train_memory").get<bool>();
  o.memory.epochs = values_.at("memory_epochs").get<std::size_t>();
  o.memory.learning_rate = values_.at("memory_lr").get<double>();
  o.memory.capacity = values_.at("memory_capacity").get<std::size_t>();
  o.memory.seed = seed();
  for (const auto* key : {"embed", "enc_hidden", "dec_hidden", "readout", "epochs", "batch_size"}) {
    if (values_.at(key).get<std::size_t>() == 0) throw std::invalid_argument(std::string(key) + " must be positive");
  }
  return o;
}

SimulationOptions LayeredConfig::simulation_options() const {
  SimulationOptions o;
  o.max_revisions = values_.at("budget").get<std::size_t>();
  o.session = session_options();
  o.global_online = values_.at("global_online").get<bool>();
  return o;
}

}  // namespace imt::cli
