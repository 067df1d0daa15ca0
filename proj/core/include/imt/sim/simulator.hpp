#pragma once

#include "imt/corpus/corpus.hpp"
#include "imt/session/session.hpp"
#include "imt/sim/bleu.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace imt {

/// One simulated revision and what the round would look like after it.
struct OracleCandidate {
  RevisionRequest request;
  Snapshot result;
  Sentence output;    // rendered result
  double bleu = 0.0;  // smoothed sentence BLEU of `output`
};

/// Substitutions and insertions suggested by aligning `hyp` with `ref`, left
/// to right, without duplicates. Positions in `pinned` are never substituted.
std::vector<RevisionRequest> candidate_revisions(std::span<const std::string> hyp, std::span<const std::size_t> pinned,
                                                 const Sentence& ref);

/// Index of the best score strictly above `baseline` (earliest on ties).
std::optional<std::size_t> pick_critical(std::span<const double> scores, double baseline);

/// Every candidate revision of the round's current hypothesis, regenerated
/// through the session's strategy with the round's earlier revisions pinned.
std::vector<OracleCandidate> oracle_candidates(const Session& session, std::size_t round_id, const Sentence& ref);

/// The candidate with the highest smoothed BLEU, or none when the hypothesis
/// already equals the reference or nothing strictly improves it.
std::optional<OracleCandidate> critical_revision_oracle(const Session& session, std::size_t round_id,
                                                        const Sentence& ref);

/// Outputs of one simulated sentence at every budget.
struct SentenceTrace {
  std::size_t session = 0;
  std::size_t index = 0;  // within the session
  const Sentence* reference = nullptr;
  std::vector<Sentence> outputs;  // outputs[k]: after at most k revisions
};

struct SimulationOptions {
  std::size_t max_revisions = 4;  // per sentence
  SessionOptions session;         // strategy, beam, memory and online-learning toggles
  /// Carry online updates across sessions instead of resetting to the base model.
  bool global_online = false;
  /// Called after every sentence.
  std::function<void(const SentenceTrace&)> on_sentence;
};

struct SimulationMetrics {
  std::string strategy;
  bool memory = false;
  bool online_learning = false;
  std::size_t sentences = 0;
  /// Corpus BLEU when each sentence may use at most k revisions, k = 0..max.
  std::vector<double> bleu;
  /// Same, restricted to the second half of every session.
  std::vector<double> second_half_bleu;
  /// "<unk>" tokens in the outputs at each budget.
  std::vector<std::size_t> unk;
  double average_revisions = 0.0;

  bool operator==(const SimulationMetrics&) const = default;
};

/// Ideal interactive environment: every sentence is translated, revised by the
/// oracle until it stops or the budget runs out, then accepted. Sessions of
/// `test` get fresh sessions (unless global_online).
SimulationMetrics run_ideal_session(std::shared_ptr<const TranslationModel> model, const ParallelCorpus& test,
                                    const SimulationOptions& options);

/// Fixed-width comparison table with a delta column against budget 0.
std::string format_report(const std::vector<SimulationMetrics>& runs);
std::string metrics_to_json(const std::vector<SimulationMetrics>& runs);
std::vector<SimulationMetrics> metrics_from_json(const std::string& text);

}  // namespace imt
