#include "imt/decoding/search.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace imt {

double Hypothesis::normalized_score() const {
  const std::size_t steps = tokens.size() + (complete ? 1 : 0);
  return steps == 0 ? score : score / static_cast<double>(steps);
}

bool contains_subsequence(std::span<const TokenId> haystack, std::span<const TokenId> needles) {
  std::size_t k = 0;
  for (TokenId t : haystack) {
    if (k < needles.size() && t == needles[k]) ++k;
  }
  return k == needles.size();
}

namespace {

struct Node {
  std::vector<TokenId> tokens;
  double score = 0.0;
  Cursor cursor;
};

struct Candidate {
  const Node* parent;
  TokenId token;
  double score;
};

// Strict order: higher score first, then lexicographically smaller sequence.
bool better(const Candidate& a, const Candidate& b) {
  if (a.score != b.score) return a.score > b.score;
  const auto& pa = a.parent->tokens;
  const auto& pb = b.parent->tokens;
  const std::size_t n = std::min(pa.size(), pb.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (pa[i] != pb[i]) return pa[i] < pb[i];
  }
  if (pa.size() != pb.size()) return pa.size() < pb.size();
  return a.token < b.token;
}

bool better_final(const Hypothesis& a, const Hypothesis& b) {
  const double na = a.normalized_score(), nb = b.normalized_score();
  if (na != nb) return na > nb;
  return a.tokens < b.tokens;
}

}  // namespace

Hypothesis grid_beam_search(const StepScorer& scorer, const Cursor& root,
                            std::span<const TokenId> constraints, const SearchOptions& options) {
  if (options.beam_size == 0) throw std::invalid_argument("search: beam size must be positive");
  if (options.max_len == 0) throw std::invalid_argument("search: max_len must be positive");
  for (TokenId t : constraints) {
    if (t < 0 || static_cast<std::size_t>(t) >= scorer.outcome_count()) {
      throw std::out_of_range("search: constraint token " + std::to_string(t) + " outside outcomes");
    }
  }
  const std::size_t C = constraints.size();
  const TokenId end = scorer.end_token();

  std::vector<std::vector<Node>> cells(C + 1);
  cells[0].push_back({{}, 0.0, root});
  std::vector<Hypothesis> finished;
  std::vector<Hypothesis> partial;

  for (std::size_t t = 1; t <= options.max_len; ++t) {
    const std::size_t top_budget = options.beam_size - std::min(options.beam_size, finished.size());
    if (top_budget == 0) break;

    std::vector<std::vector<Candidate>> pool(C + 1);
    for (std::size_t c = 0; c <= C; ++c) {
      for (const Node& node : cells[c]) {
        const Vec& lp = node.cursor.log_probs;
        for (Eigen::Index tok = 0; tok < lp.size(); ++tok) {
          const auto id = static_cast<TokenId>(tok);
          if (id == end && c < C) continue;
          const double p = scorer.free_log_prob(node.cursor, id);
          if (p == -INFINITY) continue;
          pool[c].push_back({&node, id, node.score + p});
        }
        if (c < C) {
          const double p = scorer.forced_log_prob(node.cursor, constraints[c]);
          if (p != -INFINITY) pool[c + 1].push_back({&node, constraints[c], node.score + p});
        }
      }
    }

    std::vector<std::vector<Node>> next(C + 1);
    bool any_live = false;
    for (std::size_t c = 0; c <= C; ++c) {
      auto& cands = pool[c];
      std::sort(cands.begin(), cands.end(), better);
      const std::size_t width = c == C ? top_budget : options.beam_size;
      std::set<std::vector<TokenId>> seen;
      std::size_t taken = 0;
      for (const Candidate& cand : cands) {
        if (taken == width) break;
        std::vector<TokenId> seq = cand.parent->tokens;
        if (cand.token == end && c == C) {
          if (!seen.insert(seq).second) continue;
          finished.push_back({std::move(seq), cand.score, C, true});
          ++taken;
          continue;
        }
        seq.push_back(cand.token);
        if (!seen.insert(seq).second) continue;
        ++taken;
        if (t == options.max_len) {
          partial.push_back({std::move(seq), cand.score, c, false});
          continue;
        }
        Cursor cursor = scorer.advance(cand.parent->cursor, cand.token);
        next[c].push_back({std::move(seq), cand.score, std::move(cursor)});
        any_live = true;
      }
    }
    cells = std::move(next);
    if (!any_live) break;
  }

  if (!finished.empty()) {
    return *std::min_element(finished.begin(), finished.end(), better_final);
  }
  // Nothing reached the terminal: prefer partials covering the most constraints.
  for (auto& row : cells) {
    for (auto& node : row) partial.push_back({node.tokens, node.score, 0, false});
  }
  if (partial.empty()) return {{}, -INFINITY, 0, false};
  for (auto& h : partial) {
    std::size_t k = 0;
    for (TokenId tok : h.tokens) {
      if (k < C && tok == constraints[k]) ++k;
    }
    h.constraints_met = k;
  }
  return *std::min_element(partial.begin(), partial.end(), [](const Hypothesis& a, const Hypothesis& b) {
    if (a.constraints_met != b.constraints_met) return a.constraints_met > b.constraints_met;
    return better_final(a, b);
  });
}

Hypothesis grid_beam_search(const StepScorer& scorer, std::span<const TokenId> constraints,
                            const SearchOptions& options) {
  return grid_beam_search(scorer, scorer.start(), constraints, options);
}

Hypothesis beam_search(const StepScorer& scorer, const SearchOptions& options) {
  return grid_beam_search(scorer, scorer.start(), {}, options);
}

Hypothesis beam_search(const StepScorer& scorer, const Cursor& root, const SearchOptions& options) {
  return grid_beam_search(scorer, root, {}, options);
}

}  // namespace imt
