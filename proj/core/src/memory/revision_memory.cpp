#include "imt/memory/revision_memory.hpp"

#include "imt/math/ops.hpp"
#include "imt/math/param_store.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace imt {

RevisionMemory::RevisionMemory(std::size_t capacity, std::size_t threshold)
    : capacity_(capacity), threshold_(threshold) {
  if (capacity_ == 0) throw std::invalid_argument("revision memory: capacity must be positive");
}

void RevisionMemory::write(Vec key_state, Vec key_context, TokenId value, std::string surface) {
  if (surface.empty()) throw std::invalid_argument("revision memory: empty surface");
  if (value < 0) throw std::invalid_argument("revision memory: negative value id");
  items_.push_back({std::move(key_state), std::move(key_context), value, std::move(surface), next_index_++});
  if (items_.size() > capacity_) {
    items_.erase(items_.begin(), items_.begin() + static_cast<std::ptrdiff_t>(items_.size() - capacity_));
  }
}

std::size_t RevisionMemory::value_bound() const {
  std::size_t bound = 0;
  for (const auto& item : items_) bound = std::max(bound, static_cast<std::size_t>(item.value) + 1);
  return bound;
}

std::string RevisionMemory::dump() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& item : items_) {
    out.push_back({{"index", item.index},
                   {"surface", item.surface},
                   {"value", item.value},
                   {"state_norm", item.key_state.norm()},
                   {"context_norm", item.key_context.norm()}});
  }
  return out.dump();
}

namespace {

Vec item_scores(std::span<const MemoryItem> items, const Vec& s, const Vec& c,
                const MemoryGateParams& gate, Vec* sim_s = nullptr, Vec* sim_c = nullptr) {
  const auto n = static_cast<Eigen::Index>(items.size());
  Vec scores(n);
  if (sim_s) sim_s->resize(n);
  if (sim_c) sim_c->resize(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto& item = items[static_cast<std::size_t>(t)];
    if (item.key_state.size() != s.size() || item.key_context.size() != c.size()) {
      throw std::invalid_argument("revision memory: key dimension mismatch");
    }
    const double a = std::abs(s.dot(item.key_state));
    const double b = std::abs(c.dot(item.key_context));
    scores[t] = gate.w1 * a + gate.w2 * b;
    if (sim_s) (*sim_s)[t] = a;
    if (sim_c) (*sim_c)[t] = b;
  }
  return scores;
}

}  // namespace

Vec mem_read(std::span<const MemoryItem> items, const Vec& s, const Vec& c,
             const MemoryGateParams& gate) {
  if (items.empty()) throw std::invalid_argument("mem_read: empty memory");
  return softmax(item_scores(items, s, c, gate));
}

Vec mem_read(const RevisionMemory& memory, const Vec& s, const Vec& c, const MemoryGateParams& gate) {
  return mem_read(std::span<const MemoryItem>(memory.items()), s, c, gate);
}

double copy_gate(const Vec& s, const Vec& c, const MemoryGateParams& gate) {
  if (s.size() != gate.ws.size() || c.size() != gate.wc.size()) {
    throw std::invalid_argument("copy_gate: dimension mismatch");
  }
  return sigmoid(gate.ws.dot(s) + gate.wc.dot(c));
}

Vec mix_distributions(const Vec& model_probs, const Vec& r, double theta,
                      std::span<const MemoryItem> items, std::size_t outcome_count) {
  if (r.size() != static_cast<Eigen::Index>(items.size())) {
    throw std::invalid_argument("mix_distributions: copy distribution size mismatch");
  }
  if (outcome_count < static_cast<std::size_t>(model_probs.size())) {
    throw std::invalid_argument("mix_distributions: outcome count below vocabulary size");
  }
  Vec out = Vec::Zero(static_cast<Eigen::Index>(outcome_count));
  out.head(model_probs.size()) = (1.0 - theta) * model_probs;
  for (std::size_t t = 0; t < items.size(); ++t) {
    const auto v = static_cast<std::size_t>(items[t].value);
    if (v >= outcome_count) throw std::out_of_range("mix_distributions: item value beyond outcomes");
    out[static_cast<Eigen::Index>(v)] += theta * r[static_cast<Eigen::Index>(t)];
  }
  return out;
}

Vec mix_distributions(const Vec& model_probs, const Vec& r, double theta,
                      const RevisionMemory& memory, std::size_t outcome_count) {
  return mix_distributions(model_probs, r, theta, std::span<const MemoryItem>(memory.items()),
                           outcome_count);
}

double mixed_step_nll(const MemoryGateParams& gate, std::span<const MemoryItem> items,
                      const Vec& s, const Vec& c, const Vec& model_probs, TokenId gold,
                      MemoryGateGrad* grad) {
  if (gold < 0) throw std::invalid_argument("mixed_step_nll: negative gold id");
  const bool in_vocab = gold < static_cast<TokenId>(model_probs.size());
  const double p_gold = in_vocab ? model_probs[gold] : 0.0;
  if (items.empty()) {
    if (p_gold <= 0.0) throw std::invalid_argument("mixed_step_nll: gold has zero probability");
    return -std::log(p_gold);
  }

  Vec sim_s, sim_c;
  const Vec r = softmax(item_scores(items, s, c, gate, &sim_s, &sim_c));
  const double theta = copy_gate(s, c, gate);
  double q = 0.0;
  for (std::size_t t = 0; t < items.size(); ++t) {
    if (items[t].value == gold) q += r[static_cast<Eigen::Index>(t)];
  }
  const double p = (1.0 - theta) * p_gold + theta * q;
  if (!(p > 0.0)) throw std::invalid_argument("mixed_step_nll: gold has zero probability");

  if (grad) {
    if (grad->ws.size() == 0) grad->ws = Vec::Zero(s.size());
    if (grad->wc.size() == 0) grad->wc = Vec::Zero(c.size());
    // Through the gate: dL/da with a = ws.s + wc.c.
    const double da = -(q - p_gold) / p * theta * (1.0 - theta);
    grad->ws += da * s;
    grad->wc += da * c;
    // Through the copy distribution.
    Vec dr = Vec::Zero(r.size());
    for (std::size_t t = 0; t < items.size(); ++t) {
      if (items[t].value == gold) dr[static_cast<Eigen::Index>(t)] = -theta / p;
    }
    const Vec de = softmax_backward(r, dr);
    grad->w1 += de.dot(sim_s);
    grad->w2 += de.dot(sim_c);
  }
  return -std::log(p);
}

namespace {

struct TrainingStep {
  Vec s;
  Vec c;
  Vec probs;
  TokenId gold;
};

struct TrainingSentence {
  std::vector<TrainingStep> steps;
  std::vector<MemoryItem> written;  // items this sentence contributes to later ones
};

std::vector<TokenId> as_model_input(std::span<const TokenId> target, std::size_t vocab) {
  std::vector<TokenId> out(target.begin(), target.end());
  for (auto& t : out) {
    if (t >= static_cast<TokenId>(vocab)) t = kUnk;
  }
  return out;
}

}  // namespace

MemoryTrainingReport train_memory_params(Seq2Seq& model, std::span<const Discourse> discourses,
                                         const MemoryTrainingOptions& options) {
  if (discourses.empty()) throw std::invalid_argument("train_memory_params: no discourses");
  const std::size_t vocab = model.config().tgt_vocab;
  std::mt19937_64 rng(options.seed);
  std::bernoulli_distribution sample(options.sample_rate);

  // The base model is frozen, so decoder states can be computed once.
  std::vector<std::vector<TrainingSentence>> data;
  for (const auto& discourse : discourses) {
    auto& sentences = data.emplace_back();
    for (const auto& pair : discourse) {
      const Annotations ann = model.encode(pair.source);
      const auto input = as_model_input(pair.target, vocab);
      const auto outputs = model.teacher_force(Direction::kForward, ann, input);
      auto& sentence = sentences.emplace_back();
      for (std::size_t j = 0; j < outputs.size(); ++j) {
        const TokenId gold = j < pair.target.size() ? pair.target[j] : kEos;
        const auto& st = outputs[j].state;
        sentence.steps.push_back({st.s, st.c, softmax(outputs[j].logits), gold});
        if (j < pair.target.size() && gold != kEos) {
          const bool oov = gold >= static_cast<TokenId>(vocab);
          if (oov || sample(rng)) sentence.written.push_back({st.s, st.c, gold, std::to_string(gold), 0});
        }
      }
    }
  }

  // Local store for the gate weights so their optimizer state is independent
  // of the base model's.
  ParamStore local;
  const auto& names = Seq2Seq::memory_gate_names();
  for (const auto& name : names) {
    const auto& p = model.params().get(name);
    const std::size_t idx = local.add(name, p.value.shape());
    local.at(idx).value = p.value;
  }
  const ParamStore& clocal = local;
  auto gate_view = [&] {
    return MemoryGateParams{clocal.at(0).value[0], clocal.at(1).value[0], clocal.at(2).value.vec(),
                            clocal.at(3).value.vec()};
  };

  auto gold_for = [&](const TrainingStep& step, std::span<const MemoryItem> memory) {
    if (step.gold < static_cast<TokenId>(vocab)) return step.gold;
    const bool stored = std::any_of(memory.begin(), memory.end(),
                                    [&](const MemoryItem& m) { return m.value == step.gold; });
    return stored ? step.gold : kUnk;
  };

  MemoryTrainingReport report;
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t d : order) {
      std::vector<MemoryItem> memory;
      for (const auto& sentence : data[d]) {
        if (!memory.empty()) {
          MemoryGateGrad grad;
          const MemoryGateParams gate = gate_view();
          for (const auto& step : sentence.steps) {
            total += mixed_step_nll(gate, memory, step.s, step.c, step.probs, gold_for(step, memory), &grad);
            ++count;
          }
          const double scale = 1.0 / static_cast<double>(sentence.steps.size());
          local.at(0).grad[0] += scale * grad.w1;
          local.at(1).grad[0] += scale * grad.w2;
          local.at(2).grad.vec() += scale * grad.ws;
          local.at(3).grad.vec() += scale * grad.wc;
          adam_step(local, options.learning_rate);
        }
        memory.insert(memory.end(), sentence.written.begin(), sentence.written.end());
        if (memory.size() > options.capacity) {
          memory.erase(memory.begin(), memory.begin() + static_cast<std::ptrdiff_t>(memory.size() - options.capacity));
        }
      }
    }
    report.epoch_loss.push_back(count ? total / static_cast<double>(count) : 0.0);
    report.steps = count;
  }

  for (std::size_t i = 0; i < names.size(); ++i) model.params().get(names[i]).value = local.at(i).value;

  const MemoryGateParams gate = model.memory_gate();
  double in_sum = 0.0, out_sum = 0.0;
  std::size_t in_n = 0, out_n = 0;
  for (const auto& sentences : data) {
    std::vector<MemoryItem> memory;
    for (const auto& sentence : sentences) {
      if (!memory.empty()) {
        for (const auto& step : sentence.steps) {
          const double theta = copy_gate(step.s, step.c, gate);
          const bool stored = std::any_of(memory.begin(), memory.end(),
                                          [&](const MemoryItem& m) { return m.value == step.gold; });
          (stored ? in_sum : out_sum) += theta;
          ++(stored ? in_n : out_n);
        }
      }
      memory.insert(memory.end(), sentence.written.begin(), sentence.written.end());
      if (memory.size() > options.capacity) {
        memory.erase(memory.begin(), memory.begin() + static_cast<std::ptrdiff_t>(memory.size() - options.capacity));
      }
    }
  }
  report.mean_gate_gold_in_memory = in_n ? in_sum / static_cast<double>(in_n) : 0.0;
  report.mean_gate_gold_absent = out_n ? out_sum / static_cast<double>(out_n) : 0.0;
  return report;
}

}  // namespace imt
