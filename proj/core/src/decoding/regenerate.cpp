#include "imt/decoding/regenerate.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace imt {

std::vector<TokenId> ConstraintSet::tokens() const {
  std::vector<TokenId> out;
  out.reserve(pins.size());
  for (const auto& p : pins) out.push_back(p.token);
  return out;
}

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kUniDir: return "unidir";
    case Strategy::kUniDirGrid: return "unidir_g";
    case Strategy::kBiDir: return "bidir";
  }
  return "unknown";
}

Strategy parse_strategy(const std::string& name) {
  if (name == "unidir") return Strategy::kUniDir;
  if (name == "unidir_g") return Strategy::kUniDirGrid;
  if (name == "bidir") return Strategy::kBiDir;
  throw std::invalid_argument("unknown strategy '" + name + "' (expected unidir, unidir_g or bidir)");
}

namespace {

struct Split {
  std::vector<TokenId> prefix;
  std::vector<PinnedToken> left;
  std::vector<PinnedToken> right;
  std::size_t dropped = 0;
};

Split split(std::span<const TokenId> current, const EditAction& revision,
            const ConstraintSet& accumulated) {
  const std::size_t p = revision.position;
  if (revision.insert ? p > current.size() : p >= current.size()) {
    throw std::out_of_range("revision position " + std::to_string(p) + " outside hypothesis of length " +
                            std::to_string(current.size()));
  }
  Split out;
  out.prefix.assign(current.begin(), current.begin() + static_cast<std::ptrdiff_t>(p));
  for (const auto& pin : accumulated.pins) {
    if (pin.position >= current.size()) {
      throw std::out_of_range("pinned position " + std::to_string(pin.position) + " outside hypothesis");
    }
    if (pin.position < p) {
      out.left.push_back(pin);
    } else if (pin.position > p || revision.insert) {
      out.right.push_back(pin);
    } else {
      ++out.dropped;  // the newer revision takes over this slot
    }
  }
  return out;
}

std::vector<TokenId> tokens_of(std::span<const PinnedToken> pins) {
  std::vector<TokenId> out;
  for (const auto& p : pins) out.push_back(p.token);
  return out;
}

// Locates pins by first match, left to right, inside output[begin, end).
void locate(std::span<const TokenId> output, std::size_t begin, std::size_t end,
            std::span<const PinnedToken> pins, std::vector<PinnedToken>& into) {
  std::size_t cursor = begin;
  for (const auto& pin : pins) {
    std::size_t i = cursor;
    while (i < end && output[i] != pin.token) ++i;
    if (i == end) continue;  // not reproduced (plain left-to-right search ignores pins)
    into.push_back({pin.token, i});
    cursor = i + 1;
  }
}

ConstraintSet remap(std::span<const TokenId> output, std::size_t left_len, TokenId revised,
                    std::span<const PinnedToken> left, std::span<const PinnedToken> right) {
  ConstraintSet out;
  locate(output, 0, left_len, left, out.pins);
  out.anchor = out.pins.size();
  out.pins.push_back({revised, left_len});
  locate(output, left_len + 1, output.size(), right, out.pins);
  return out;
}

std::size_t budget(std::size_t max_len, std::size_t used, std::size_t constraints) {
  const std::size_t rest = max_len > used ? max_len - used : 1;
  return std::max(rest, constraints + 1);
}

struct StageOne {
  double prefix_score = 0.0;
  DecoderState context;
  double revised_score = 0.0;
  Hypothesis right;
};

StageOne stage_one(const StepScorer& forward, const Split& parts, TokenId revised,
                   bool constrained, const SearchOptions& options) {
  if (forward.direction() != Direction::kForward) {
    throw std::invalid_argument("regenerate: first scorer must be a forward scorer");
  }
  StageOne out;
  const Cursor at_slot = forward.prime(parts.prefix, &out.prefix_score);
  out.context = at_slot.state;
  out.revised_score = forward.forced_log_prob(at_slot, revised);
  const Cursor after = forward.advance(at_slot, revised);
  const auto right_tokens = constrained ? tokens_of(parts.right) : std::vector<TokenId>{};
  SearchOptions o = options;
  o.max_len = budget(options.max_len, parts.prefix.size() + 1, right_tokens.size());
  out.right = grid_beam_search(forward, after, right_tokens, o);
  return out;
}

}  // namespace

Regeneration unidir_regenerate(const StepScorer& forward, std::span<const TokenId> current,
                               const EditAction& revision, const ConstraintSet& accumulated,
                               const SearchOptions& options, bool use_grid) {
  const Split parts = split(current, revision, accumulated);
  const StageOne one = stage_one(forward, parts, revision.token, use_grid, options);

  Regeneration out;
  auto& tokens = out.hypothesis.tokens;
  tokens = parts.prefix;
  tokens.push_back(revision.token);
  tokens.insert(tokens.end(), one.right.tokens.begin(), one.right.tokens.end());
  out.hypothesis.score = one.prefix_score + one.revised_score + one.right.score;
  out.hypothesis.complete = one.right.complete;
  out.revised_position = parts.prefix.size();
  out.revision_context = one.context;
  out.dropped = parts.dropped;
  out.constraints = remap(tokens, parts.prefix.size(), revision.token, parts.left, parts.right);
  out.hypothesis.constraints_met = out.constraints.pins.size();
  return out;
}

Regeneration bidir_regenerate(const StepScorer& forward, const StepScorer& backward,
                              std::span<const TokenId> current, const EditAction& revision,
                              const ConstraintSet& accumulated, const SearchOptions& options) {
  if (backward.direction() != Direction::kBackward) {
    throw std::invalid_argument("bidir_regenerate: second scorer must be a backward scorer");
  }
  const Split parts = split(current, revision, accumulated);
  const StageOne one = stage_one(forward, parts, revision.token, true, options);
  const auto& right = one.right.tokens;

  // Stage 2 reads the frozen right part and the revised word right to left.
  std::vector<TokenId> reversed(right.rbegin(), right.rend());
  reversed.push_back(revision.token);
  const Cursor at_slot = backward.prime(reversed);
  auto left_tokens = tokens_of(parts.left);
  std::reverse(left_tokens.begin(), left_tokens.end());
  SearchOptions o = options;
  o.max_len = budget(options.max_len, right.size() + 1, left_tokens.size());
  const Hypothesis left = grid_beam_search(backward, at_slot, left_tokens, o);

  Regeneration out;
  auto& tokens = out.hypothesis.tokens;
  tokens.assign(left.tokens.rbegin(), left.tokens.rend());
  const std::size_t left_len = tokens.size();
  tokens.push_back(revision.token);
  tokens.insert(tokens.end(), right.begin(), right.end());
  out.hypothesis.score = forward.sequence_score(tokens);
  out.hypothesis.complete = one.right.complete && left.complete;
  out.revised_position = left_len;
  out.revision_context = one.context;
  out.dropped = parts.dropped;
  out.constraints = remap(tokens, left_len, revision.token, parts.left, parts.right);
  out.hypothesis.constraints_met = out.constraints.pins.size();
  return out;
}

Regeneration regenerate(Strategy strategy, const StepScorer& forward, const StepScorer& backward,
                        std::span<const TokenId> current, const EditAction& revision,
                        const ConstraintSet& accumulated, const SearchOptions& options) {
  switch (strategy) {
    case Strategy::kUniDir: return unidir_regenerate(forward, current, revision, accumulated, options, false);
    case Strategy::kUniDirGrid: return unidir_regenerate(forward, current, revision, accumulated, options, true);
    case Strategy::kBiDir: return bidir_regenerate(forward, backward, current, revision, accumulated, options);
  }
  throw std::invalid_argument("regenerate: unknown strategy");
}

std::vector<ConstraintEntry> parse_constraints(const std::string& text) {
  std::vector<ConstraintEntry> out;
  std::set<std::size_t> seen;
  std::istringstream in(text);
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto tab = line.find('\t');
    const std::string where = "constraint line " + std::to_string(line_no);
    if (tab == std::string::npos) throw std::invalid_argument(where + ": expected order<TAB>surface");
    ConstraintEntry e;
    const char* first = line.data();
    const auto [ptr, ec] = std::from_chars(first, first + tab, e.order);
    if (ec != std::errc() || ptr != first + tab) throw std::invalid_argument(where + ": bad order index");
    e.surface = line.substr(tab + 1);
    if (e.surface.empty() || e.surface.find_first_of(" \t") != std::string::npos) {
      throw std::invalid_argument(where + ": surface must be one non-empty word");
    }
    if (!seen.insert(e.order).second) throw std::invalid_argument(where + ": duplicate order index");
    out.push_back(std::move(e));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.order < b.order; });
  return out;
}

std::vector<ConstraintEntry> read_constraint_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read constraint file: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_constraints(buffer.str());
}

}  // namespace imt
