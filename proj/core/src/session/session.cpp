#include "imt/session/session.hpp"

#include "imt/sim/align.hpp"

#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <random>

namespace imt {

std::string SessionOptions::to_json() const {
  nlohmann::json j;
  j["beam_size"] = beam_size;
  j["memory_capacity"] = memory_capacity;
  j["memory_threshold"] = memory_threshold;
  j["online_lr"] = online_lr;
  j["memory"] = memory;
  j["online_learning"] = online_learning;
  j["strategy"] = strategy_name(strategy);
  return j.dump();
}

SessionOptions SessionOptions::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  SessionOptions o;
  o.beam_size = j.value("beam_size", o.beam_size);
  o.memory_capacity = j.value("memory_capacity", o.memory_capacity);
  o.memory_threshold = j.value("memory_threshold", o.memory_threshold);
  o.online_lr = j.value("online_lr", o.online_lr);
  o.memory = j.value("memory", o.memory);
  o.online_learning = j.value("online_learning", o.online_learning);
  o.strategy = parse_strategy(j.value("strategy", std::string(strategy_name(o.strategy))));
  return o;
}

const char* origin_name(TokenOrigin o) {
  switch (o) {
    case TokenOrigin::kModel: return "model";
    case TokenOrigin::kConstraint: return "constraint";
    case TokenOrigin::kCopy: return "copy";
    case TokenOrigin::kAutoFixed: return "auto-fixed";
  }
  return "unknown";
}

Session::Session(std::shared_ptr<const TranslationModel> base, SessionOptions options, std::string id)
    : base_(std::move(base)),
      options_(std::move(options)),
      id_(std::move(id)),
      adapted_(base_ ? base_->model : throw std::invalid_argument("session: no base model")),
      memory_(options_.memory_capacity, options_.memory_threshold),
      target_vocab_(base_->target_vocab) {
  if (options_.beam_size == 0) throw std::invalid_argument("session: beam size must be positive");
}

const Round& Session::round(std::size_t id) const {
  if (id >= rounds_.size()) throw SessionError(SessionError::Code::kNotFound, "unknown round " + std::to_string(id));
  return rounds_[id];
}

Round& Session::open_round(std::size_t round_id) {
  if (round_id >= rounds_.size()) {
    throw SessionError(SessionError::Code::kNotFound, "unknown round " + std::to_string(round_id));
  }
  Round& r = rounds_[round_id];
  if (r.accepted) throw SessionError(SessionError::Code::kRoundClosed, "round " + std::to_string(round_id) + " is closed");
  return r;
}

SearchOptions Session::search_options(std::size_t source_length) const {
  return {options_.beam_size, default_max_len(source_length)};
}

const Round& Session::translate(const Sentence& source) {
  if (source.empty()) throw SessionError(SessionError::Code::kBadRequest, "empty source sentence");
  Round r;
  r.id = rounds_.size();
  r.source = source;
  r.source_ids = base_->source_vocab.encode(source);
  const Annotations ann = adapted_.encode(r.source_ids);
  const ModelScorer forward(adapted_, ann, Direction::kForward, target_vocab_.extended_count(),
                            options_.memory ? &memory_ : nullptr);
  const Hypothesis h = beam_search(forward, search_options(source.size()));
  r.initial.tokens = h.tokens;
  r.initial.complete = h.complete;
  r.initial.origins = origins_for(h.tokens, {}, nullptr);
  rounds_.push_back(std::move(r));
  return rounds_.back();
}

Session::Planned Session::plan(const Round& round, const RevisionRequest& request) const {
  if (round.accepted) throw SessionError(SessionError::Code::kRoundClosed, "round " + std::to_string(round.id) + " is closed");
  const auto& current = round.current().tokens;
  const std::size_t limit = request.insert ? current.size() : current.size() - (current.empty() ? 0 : 1);
  if (request.position > limit || (!request.insert && current.empty())) {
    throw SessionError(SessionError::Code::kOutOfRange,
                       "position " + std::to_string(request.position) + " outside hypothesis of length " +
                           std::to_string(current.size()));
  }
  const std::string& surface = request.new_surface;
  if (surface.find_first_of(" \t\r\n") != std::string::npos) {
    throw SessionError(SessionError::Code::kBadRequest, "a revision is a single word");
  }
  if (surface.empty() && request.insert) throw SessionError(SessionError::Code::kBadRequest, "cannot insert an empty word");
  const auto& reserved = Vocab::reserved_surfaces();
  if (std::find(reserved.begin(), reserved.end(), surface) != reserved.end()) {
    throw SessionError(SessionError::Code::kBadRequest, "reserved token '" + surface + "' cannot be typed");
  }

  Planned p;
  p.action.position = request.position;
  p.action.insert = request.insert;
  std::size_t extended = target_vocab_.extended_count();
  if (surface.empty()) {
    p.action.token = kBlank;
  } else {
    p.action.token = target_vocab_.lookup(surface);
    if (p.action.token == kUnk) {
      p.action.token = static_cast<TokenId>(target_vocab_.size());
      p.new_extended = surface;
      ++extended;
    }
  }
  const Annotations ann = adapted_.encode(round.source_ids);
  const ModelScorer forward(adapted_, ann, Direction::kForward, extended, options_.memory ? &memory_ : nullptr);
  const ModelScorer backward(adapted_, ann, Direction::kBackward, extended);
  p.regeneration = regenerate(options_.strategy, forward, backward, current, p.action,
                              round.current().constraints, search_options(round.source.size()));
  return p;
}

Snapshot Session::preview(std::size_t round_id, const RevisionRequest& request, Sentence* rendered) const {
  const Round& r = round(round_id);
  const Planned p = plan(r, request);
  Snapshot s;
  s.tokens = p.regeneration.hypothesis.tokens;
  s.constraints = p.regeneration.constraints;
  s.complete = p.regeneration.hypothesis.complete;
  s.origins = origins_for(s.tokens, s.constraints, &r.current().tokens);
  if (rendered) {
    rendered->clear();
    for (const TokenId t : s.tokens) {
      if (t == kBlank) continue;
      rendered->push_back(p.new_extended && t == p.action.token ? *p.new_extended : target_vocab_.surface(t));
    }
  }
  return s;
}

const Round& Session::revise(std::size_t round_id, const RevisionRequest& request) {
  Round& r = open_round(round_id);
  Planned p = plan(r, request);
  if (p.new_extended) target_vocab_.intern(*p.new_extended);

  Revision rev;
  rev.position = request.position;
  rev.insert = request.insert;
  if (!request.insert) rev.old_surface = target_vocab_.surface(r.current().tokens[request.position]);
  rev.new_surface = request.new_surface;
  rev.token = p.action.token;
  rev.context = p.regeneration.revision_context;

  Snapshot s;
  s.tokens = std::move(p.regeneration.hypothesis.tokens);
  s.constraints = std::move(p.regeneration.constraints);
  s.complete = p.regeneration.hypothesis.complete;
  s.origins = origins_for(s.tokens, s.constraints, &r.current().tokens);

  memory_.record_revision();
  if (options_.memory && rev.token != kBlank) {
    memory_.write(rev.context.s, rev.context.c, rev.token, rev.new_surface);
  }
  r.revisions.push_back(std::move(rev));
  r.snapshots.push_back(std::move(s));
  ++total_revisions_;
  return r;
}

std::vector<TokenId> Session::training_target(const std::vector<TokenId>& tokens) const {
  std::vector<TokenId> out;
  for (const TokenId t : tokens) {
    if (t == kBlank) continue;
    out.push_back(target_vocab_.is_extended(t) ? kUnk : t);
  }
  return out;
}

const Round& Session::accept(std::size_t round_id) {
  Round& r = open_round(round_id);
  if (options_.online_learning) {
    const auto target = training_target(r.current().tokens);
    if (!target.empty()) {
      ParamStore& params = adapted_.params();
      params.zero_grad();
      adapted_.joint_loss_and_grad(r.source_ids, target);
      adam_step(params, options_.online_lr);
    }
  }
  r.accepted = true;
  return r;
}

std::vector<TokenOrigin> Session::origins_for(const std::vector<TokenId>& tokens, const ConstraintSet& pins,
                                              const std::vector<TokenId>* previous) const {
  std::vector<TokenOrigin> out(tokens.size(), TokenOrigin::kModel);
  if (previous) {
    for (const auto& op : align<TokenId>(*previous, tokens)) {
      if (op.kind == EditKind::kSubstitute || op.kind == EditKind::kInsert) out[op.ref_index] = TokenOrigin::kAutoFixed;
    }
  }
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (target_vocab_.is_extended(tokens[i])) out[i] = TokenOrigin::kCopy;
  }
  for (const auto& pin : pins.pins) out[pin.position] = TokenOrigin::kConstraint;
  return out;
}

Sentence Session::render(std::span<const TokenId> tokens) const {
  Sentence out;
  for (const TokenId t : tokens) {
    if (t != kBlank) out.push_back(target_vocab_.surface(t));
  }
  return out;
}

std::unique_ptr<Session> open_session(std::shared_ptr<const TranslationModel> base, const SessionOptions& options) {
  static std::atomic<std::uint64_t> counter{0};
  static const std::uint32_t salt = std::random_device{}();
  char id[32];
  std::snprintf(id, sizeof id, "s%06llu-%08x", static_cast<unsigned long long>(++counter), salt);
  return std::make_unique<Session>(std::move(base), options, id);
}

std::shared_ptr<const TranslationModel> with_parameters(const TranslationModel& base, const Seq2Seq& model) {
  return std::make_shared<const TranslationModel>(TranslationModel{model, base.source_vocab, base.target_vocab});
}

}  // namespace imt
