#include "imt/sim/simulator.hpp"

#include "imt/sim/align.hpp"

#include "json.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>
#include <tuple>

namespace imt {

namespace {

std::vector<std::string> raw_surfaces(const Session& s, std::span<const TokenId> tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const TokenId t : tokens) out.push_back(s.target_vocab().surface(t));
  return out;
}

std::size_t count_unk(const Sentence& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), Vocab::reserved_surfaces()[kUnk]));
}

}  // namespace

std::vector<RevisionRequest> candidate_revisions(std::span<const std::string> hyp, std::span<const std::size_t> pinned,
                                                 const Sentence& ref) {
  std::vector<RevisionRequest> out;
  std::set<std::tuple<std::size_t, bool, std::string>> seen;
  const auto& reserved = Vocab::reserved_surfaces();
  for (const auto& op : align<std::string>(hyp, ref)) {
    if (op.kind != EditKind::kMatch && op.kind != EditKind::kDelete &&
        std::find(reserved.begin(), reserved.end(), ref[op.ref_index]) != reserved.end()) {
      continue;  // not something a translator can type
    }
    RevisionRequest r;
    if (op.kind == EditKind::kSubstitute) {
      if (std::find(pinned.begin(), pinned.end(), op.hyp_index) != pinned.end()) continue;
      r = {op.hyp_index, ref[op.ref_index], false};
    } else if (op.kind == EditKind::kInsert) {
      r = {op.hyp_index, ref[op.ref_index], true};
    } else {
      continue;
    }
    if (seen.emplace(r.position, r.insert, r.new_surface).second) out.push_back(std::move(r));
  }
  return out;
}

std::optional<std::size_t> pick_critical(std::span<const double> scores, double baseline) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] > baseline && (!best || scores[i] > scores[*best])) best = i;
  }
  return best;
}

std::vector<OracleCandidate> oracle_candidates(const Session& session, std::size_t round_id, const Sentence& ref) {
  const Snapshot& current = session.round(round_id).current();
  std::vector<std::size_t> pinned;
  for (const auto& p : current.constraints.pins) pinned.push_back(p.position);
  std::vector<OracleCandidate> out;
  for (auto& req : candidate_revisions(raw_surfaces(session, current.tokens), pinned, ref)) {
    OracleCandidate c;
    c.result = session.preview(round_id, req, &c.output);
    c.bleu = sentence_bleu_smoothed(c.output, ref);
    c.request = std::move(req);
    out.push_back(std::move(c));
  }
  return out;
}

std::optional<OracleCandidate> critical_revision_oracle(const Session& session, std::size_t round_id,
                                                        const Sentence& ref) {
  const Sentence now = session.render(session.round(round_id).current());
  if (now == ref) return std::nullopt;
  auto candidates = oracle_candidates(session, round_id, ref);
  std::vector<double> scores;
  for (const auto& c : candidates) scores.push_back(c.bleu);
  const auto best = pick_critical(scores, sentence_bleu_smoothed(now, ref));
  if (!best) return std::nullopt;
  return std::move(candidates[*best]);
}

SimulationMetrics run_ideal_session(std::shared_ptr<const TranslationModel> model, const ParallelCorpus& test,
                                    const SimulationOptions& options) {
  if (test.pairs.empty()) throw std::invalid_argument("run_ideal_session: empty test set");
  const std::size_t budgets = options.max_revisions + 1;
  std::vector<BleuStats> stats(budgets), half_stats(budgets);
  SimulationMetrics m;
  m.strategy = strategy_name(options.session.strategy);
  m.memory = options.session.memory;
  m.online_learning = options.session.online_learning;
  m.unk.assign(budgets, 0);
  std::size_t revisions = 0;

  std::shared_ptr<const TranslationModel> base = std::move(model);
  for (std::size_t si = 0; si < test.sessions.size(); ++si) {
    const SessionSpan& span = test.sessions[si];
    Session session(base, options.session, "sim-" + std::to_string(si));
    for (std::size_t k = 0; k < span.length; ++k) {
      const SentencePair& pair = test.pairs[span.start + k];
      const std::span<const Sentence> refs(&pair.target, 1);
      const std::size_t rid = session.translate(pair.source).id;
      std::vector<Sentence> outputs{session.render(session.round(rid).current())};
      bool stopped = false;
      while (outputs.size() < budgets) {
        if (!stopped) {
          if (const auto best = critical_revision_oracle(session, rid, pair.target)) {
            session.revise(rid, best->request);
            outputs.push_back(session.render(session.round(rid).current()));
            ++revisions;
            continue;
          }
          stopped = true;
        }
        outputs.push_back(outputs.back());
      }
      const bool second_half = k >= span.length / 2;
      for (std::size_t b = 0; b < budgets; ++b) {
        const BleuStats s = bleu_stats(outputs[b], refs);
        stats[b] += s;
        if (second_half) half_stats[b] += s;
        m.unk[b] += count_unk(outputs[b]);
      }
      if (options.on_sentence) options.on_sentence({si, k, &pair.target, outputs});
      session.accept(rid);
      ++m.sentences;
    }
    if (options.global_online) base = with_parameters(*base, session.adapted());
  }
  for (std::size_t b = 0; b < budgets; ++b) {
    m.bleu.push_back(bleu_from_stats(stats[b]));
    m.second_half_bleu.push_back(bleu_from_stats(half_stats[b]));
  }
  m.average_revisions = static_cast<double>(revisions) / static_cast<double>(m.sentences);
  return m;
}

std::string format_report(const std::vector<SimulationMetrics>& runs) {
  if (runs.empty()) throw std::invalid_argument("format_report: no metrics");
  std::size_t budgets = 0;
  for (const auto& r : runs) budgets = std::max(budgets, r.bleu.size());
  std::ostringstream out;
  char buf[64];
  out << "system              ";
  for (std::size_t b = 0; b < budgets; ++b) {
    std::snprintf(buf, sizeof buf, " %7s", ("@" + std::to_string(b)).c_str());
    out << buf;
  }
  out << "       Δ   Ave.rev     UNK\n";
  for (const auto& r : runs) {
    std::string name = r.strategy;
    if (r.memory) name += "+mem";
    if (r.online_learning) name += "+ol";
    std::snprintf(buf, sizeof buf, "%-20s", name.c_str());
    out << buf;
    for (std::size_t b = 0; b < budgets; ++b) {
      if (b < r.bleu.size()) {
        std::snprintf(buf, sizeof buf, " %7.2f", 100.0 * r.bleu[b]);
      } else {
        std::snprintf(buf, sizeof buf, " %7s", "-");
      }
      out << buf;
    }
    const double delta = r.bleu.empty() ? 0.0 : 100.0 * (r.bleu.back() - r.bleu.front());
    std::snprintf(buf, sizeof buf, " %+7.2f %9.2f %7zu\n", delta, r.average_revisions,
                  r.unk.empty() ? std::size_t{0} : r.unk.back());
    out << buf;
  }
  return out.str();
}

std::string metrics_to_json(const std::vector<SimulationMetrics>& runs) {
  if (runs.empty()) throw std::invalid_argument("metrics_to_json: no metrics");
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : runs) {
    arr.push_back({{"strategy", r.strategy},
                   {"memory", r.memory},
                   {"online_learning", r.online_learning},
                   {"sentences", r.sentences},
                   {"bleu", r.bleu},
                   {"second_half_bleu", r.second_half_bleu},
                   {"unk", r.unk},
                   {"average_revisions", r.average_revisions}});
  }
  return arr.dump(2);
}

std::vector<SimulationMetrics> metrics_from_json(const std::string& text) {
  const auto arr = nlohmann::json::parse(text);
  std::vector<SimulationMetrics> out;
  for (const auto& j : arr) {
    SimulationMetrics m;
    m.strategy = j.at("strategy").get<std::string>();
    m.memory = j.at("memory").get<bool>();
    m.online_learning = j.at("online_learning").get<bool>();
    m.sentences = j.at("sentences").get<std::size_t>();
    m.bleu = j.at("bleu").get<std::vector<double>>();
    m.second_half_bleu = j.at("second_half_bleu").get<std::vector<double>>();
    m.unk = j.at("unk").get<std::vector<std::size_t>>();
    m.average_revisions = j.at("average_revisions").get<double>();
    out.push_back(std::move(m));
  }
  if (out.empty()) throw std::invalid_argument("metrics_from_json: no metrics");
  return out;
}

}  // namespace imt
