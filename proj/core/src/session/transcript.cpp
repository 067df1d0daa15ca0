#include "imt/session/transcript.hpp"

#include "json.hpp"

namespace imt {

namespace {

using nlohmann::json;

std::vector<std::string> raw_surfaces(const Session& s, const std::vector<TokenId>& tokens) {
  std::vector<std::string> out;
  for (const TokenId t : tokens) out.push_back(s.target_vocab().surface(t));
  return out;
}

std::vector<std::string> origin_names(const std::vector<TokenOrigin>& origins) {
  std::vector<std::string> out;
  for (const auto o : origins) out.emplace_back(origin_name(o));
  return out;
}

json snapshot_json(const Session& s, const Snapshot& snap) {
  return {{"tokens", raw_surfaces(s, snap.tokens)}, {"origins", origin_names(snap.origins)}};
}

json parse_line(const std::string& line, std::size_t n) {
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw std::runtime_error("transcript line " + std::to_string(n + 1) + ": " + e.what());
  }
}

}  // namespace

Transcript::Transcript(const std::filesystem::path& path)
    : out_(std::make_unique<std::ofstream>(path, std::ios::app)) {
  if (!*out_) throw std::runtime_error("cannot open transcript: " + path.string());
}

Transcript Transcript::resume(const std::filesystem::path& path) {
  auto lines = read_transcript(path);
  Transcript t(path);
  t.lines_ = std::move(lines);
  return t;
}

void Transcript::append(std::string line) {
  if (out_) {
    *out_ << line << '\n';
    out_->flush();
  }
  lines_.push_back(std::move(line));
}

void Transcript::record_open(const Session& session, const std::string& checkpoint, const std::string& created) {
  json j{{"event", "open"},
         {"session", session.id()},
         {"checkpoint", checkpoint},
         {"options", json::parse(session.options().to_json())}};
  if (!created.empty()) j["created"] = created;
  append(j.dump());
}

void Transcript::record_translate(const Session& session, const Round& round) {
  json j{{"event", "translate"}, {"round", round.id}, {"source", round.source}};
  j.update(snapshot_json(session, round.initial));
  append(j.dump());
}

void Transcript::record_revise(const Session& session, const Round& round) {
  const Revision& rev = round.revisions.back();
  json j{{"event", "revise"},       {"round", round.id},
         {"position", rev.position}, {"insert", rev.insert},
         {"old_surface", rev.old_surface}, {"new_surface", rev.new_surface}};
  j.update(snapshot_json(session, round.snapshots.back()));
  append(j.dump());
}

void Transcript::record_accept(const Session& session, const Round& round) {
  append(json{{"event", "accept"}, {"round", round.id}, {"translation", session.render(round.current())}}.dump());
}

std::vector<std::string> read_transcript(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read transcript: " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::string transcript_checkpoint(const std::vector<std::string>& lines) {
  if (lines.empty()) throw std::runtime_error("empty transcript");
  const json head = parse_line(lines.front(), 0);
  if (head.value("event", "") != "open") throw std::runtime_error("transcript does not start with an open record");
  return head.value("checkpoint", "");
}

std::unique_ptr<Session> replay_transcript(std::shared_ptr<const TranslationModel> base,
                                           const std::vector<std::string>& lines) {
  if (lines.empty()) throw std::runtime_error("empty transcript");
  const json head = parse_line(lines.front(), 0);
  if (head.value("event", "") != "open") throw std::runtime_error("transcript does not start with an open record");
  auto session = std::make_unique<Session>(std::move(base), SessionOptions::from_json(head.at("options").dump()),
                                           head.at("session").get<std::string>());
  const auto check = [&](std::size_t n, const json& rec, const Snapshot& snap) {
    if (rec.at("tokens") != raw_surfaces(*session, snap.tokens)) {
      throw ReplayMismatch("transcript line " + std::to_string(n + 1) + ": replayed hypothesis differs");
    }
  };
  for (std::size_t n = 1; n < lines.size(); ++n) {
    const json rec = parse_line(lines[n], n);
    const std::string event = rec.at("event").get<std::string>();
    if (event == "translate") {
      const Round& r = session->translate(rec.at("source").get<Sentence>());
      if (r.id != rec.at("round").get<std::size_t>()) throw ReplayMismatch("round ids out of order");
      check(n, rec, r.initial);
    } else if (event == "revise") {
      RevisionRequest req{rec.at("position").get<std::size_t>(), rec.at("new_surface").get<std::string>(),
                          rec.value("insert", false)};
      const Round& r = session->revise(rec.at("round").get<std::size_t>(), req);
      check(n, rec, r.snapshots.back());
    } else if (event == "accept") {
      session->accept(rec.at("round").get<std::size_t>());
    } else {
      throw std::runtime_error("transcript line " + std::to_string(n + 1) + ": unknown event '" + event + "'");
    }
  }
  return session;
}

}  // namespace imt
