#include "imt/service/service.hpp"

#include "httplib.h"
#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <set>

namespace imt {

namespace {

using nlohmann::json;

struct ApiError {
  int status;
  std::string code;
  std::string message;
};

ApiResponse error_response(int status, const std::string& code, const std::string& message) {
  return {status, json{{"code", code}, {"message", message}}.dump()};
}

ApiResponse ok(const json& body, int status = 200) { return {status, body.dump()}; }

json parse_body(const std::string& body) {
  if (body.empty()) return json::object();
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw ApiError{400, "invalid_json", e.what()};
  }
  if (!j.is_object()) throw ApiError{400, "invalid_json", "request body must be a JSON object"};
  return j;
}

template <class T>
T field(const json& j, const char* name) {
  const auto it = j.find(name);
  if (it == j.end()) throw ApiError{400, "missing_field", std::string("missing field '") + name + "'"};
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ApiError{400, "invalid_field", std::string("field '") + name + "' has the wrong type"};
  }
}

template <class T>
T optional_field(const json& j, const char* name, T fallback) {
  return j.contains(name) ? field<T>(j, name) : fallback;
}

std::size_t parse_index(const std::string& text, const char* what) {
  if (text.empty() || text.size() > 18 || !std::all_of(text.begin(), text.end(), ::isdigit)) {
    throw ApiError{404, std::string("unknown_") + what, std::string("no ") + what + " '" + text + "'"};
  }
  return std::stoull(text);
}

bool valid_checkpoint_name(const std::string& name) {
  if (name.empty() || name.front() == '.') return false;
  return std::all_of(name.begin(), name.end(),
                     [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-'; });
}

std::string now_iso8601() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const std::size_t end = path.find('?');
  const std::string p = path.substr(0, end);
  while (i < p.size()) {
    const std::size_t j = p.find('/', i);
    const std::size_t stop = j == std::string::npos ? p.size() : j;
    if (stop > i) out.push_back(p.substr(i, stop - i));
    i = stop + 1;
  }
  return out;
}

// Deleted slots are returned as empty strings, the same spelling a revise
// request uses to delete a word.
json snapshot_json(const Session& s, const Snapshot& snap) {
  json tokens = json::array(), origins = json::array();
  for (std::size_t i = 0; i < snap.tokens.size(); ++i) {
    tokens.push_back(snap.tokens[i] == kBlank ? std::string() : s.target_vocab().surface(snap.tokens[i]));
    origins.push_back(origin_name(snap.origins[i]));
  }
  return {{"tokens", tokens},
          {"token_origins", origins},
          {"complete", snap.complete},
          {"text", detokenize(s.render(snap))}};
}

json session_json(const Session& s, const std::string& checkpoint, const std::string& created) {
  const SessionOptions& o = s.options();
  return {{"session_id", s.id()},
          {"checkpoint", checkpoint},
          {"created", created},
          {"toggles", {{"memory", o.memory}, {"online_learning", o.online_learning}}},
          {"options", json::parse(o.to_json())},
          {"rounds", s.rounds().size()},
          {"revisions", s.total_revisions()}};
}

SessionOptions options_from_request(const json& req, const SessionOptions& defaults) {
  SessionOptions o = defaults;
  if (req.contains("options")) {
    const json& j = req.at("options");
    if (!j.is_object()) throw ApiError{400, "invalid_field", "field 'options' must be an object"};
    o.beam_size = optional_field<std::size_t>(j, "beam_size", o.beam_size);
    o.memory_capacity = optional_field<std::size_t>(j, "memory_capacity", o.memory_capacity);
    o.memory_threshold = optional_field<std::size_t>(j, "memory_threshold", o.memory_threshold);
    o.online_lr = optional_field<double>(j, "online_lr", o.online_lr);
    if (j.contains("strategy")) {
      try {
        o.strategy = parse_strategy(field<std::string>(j, "strategy"));
      } catch (const std::invalid_argument& e) {
        throw ApiError{400, "invalid_field", e.what()};
      }
    }
    if (o.beam_size == 0) throw ApiError{400, "invalid_field", "beam_size must be positive"};
  }
  if (req.contains("toggles")) {
    const json& t = req.at("toggles");
    if (!t.is_object()) throw ApiError{400, "invalid_field", "field 'toggles' must be an object"};
    o.memory = optional_field<bool>(t, "memory", o.memory);
    o.online_learning = optional_field<bool>(t, "online_learning", o.online_learning);
  }
  return o;
}

ApiError from_session_error(const SessionError& e) {
  switch (e.code()) {
    case SessionError::Code::kBadRequest: return {400, "invalid_revision", e.what()};
    case SessionError::Code::kOutOfRange: return {400, "position_out_of_range", e.what()};
    case SessionError::Code::kRoundClosed: return {409, "round_closed", e.what()};
    case SessionError::Code::kNotFound: return {404, "unknown_round", e.what()};
  }
  return {500, "internal", e.what()};
}

}  // namespace

void CheckpointRegistry::add(const std::string& name, std::shared_ptr<const TranslationModel> model) {
  if (!model) throw std::invalid_argument("checkpoint registry: null model");
  std::lock_guard lock(mu_);
  models_[name] = std::move(model);
}

std::shared_ptr<const TranslationModel> CheckpointRegistry::get(const std::string& name) {
  std::lock_guard lock(mu_);
  if (const auto it = models_.find(name); it != models_.end()) return it->second;
  if (dir_.empty() || !valid_checkpoint_name(name)) return nullptr;
  for (const auto& candidate : {dir_ / name, dir_ / (name + ".bin")}) {
    if (std::filesystem::is_regular_file(candidate)) {
      auto model = std::make_shared<const TranslationModel>(load_translation_model(candidate));
      models_[name] = model;
      return model;
    }
  }
  return nullptr;
}

std::vector<std::string> CheckpointRegistry::names() const {
  std::lock_guard lock(mu_);
  std::set<std::string> out;
  for (const auto& [name, _] : models_) out.insert(name);
  if (!dir_.empty() && std::filesystem::is_directory(dir_)) {
    for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
      if (!entry.is_regular_file() || entry.path().extension() != ".bin") continue;
      if (const std::string name = entry.path().stem().string(); valid_checkpoint_name(name)) out.insert(name);
    }
  }
  return {out.begin(), out.end()};
}

TranslationService::TranslationService(std::shared_ptr<CheckpointRegistry> checkpoints, ServiceOptions options)
    : checkpoints_(std::move(checkpoints)), options_(std::move(options)) {
  if (!checkpoints_) throw std::invalid_argument("service: no checkpoint registry");
  if (!options_.transcript_dir.empty()) std::filesystem::create_directories(options_.transcript_dir);
}

std::size_t TranslationService::session_count() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

std::shared_ptr<TranslationService::Entry> TranslationService::find(const std::string& id) const {
  std::lock_guard lock(mu_);
  const auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

bool TranslationService::inspect(const std::string& id, const std::function<void(const Session&)>& fn) const {
  const auto entry = find(id);
  if (!entry) return false;
  std::lock_guard lock(entry->mu);
  fn(*entry->session);
  return true;
}

ApiResponse TranslationService::with_session(const std::string& id, const std::function<ApiResponse(Entry&)>& fn) {
  const auto entry = find(id);
  if (!entry) throw ApiError{404, "unknown_session", "no session '" + id + "'"};
  std::lock_guard lock(entry->mu);
  return fn(*entry);
}

ApiResponse TranslationService::create_session(const std::string& body) {
  const json req = parse_body(body);
  const std::string checkpoint = field<std::string>(req, "checkpoint");
  const SessionOptions options = options_from_request(req, options_.defaults);
  std::shared_ptr<const TranslationModel> model;
  try {
    model = checkpoints_->get(checkpoint);
  } catch (const std::exception& e) {
    throw ApiError{500, "checkpoint_unreadable", e.what()};
  }
  if (!model) throw ApiError{404, "unknown_checkpoint", "no checkpoint '" + checkpoint + "'"};

  auto entry = std::make_shared<Entry>();
  entry->session = open_session(model, options);
  entry->checkpoint = checkpoint;
  entry->created = now_iso8601();
  if (!options_.transcript_dir.empty()) {
    entry->transcript = Transcript(options_.transcript_dir / (entry->session->id() + ".jsonl"));
  }
  entry->transcript.record_open(*entry->session, checkpoint, entry->created);
  const json out = session_json(*entry->session, checkpoint, entry->created);
  {
    std::lock_guard lock(mu_);
    sessions_.emplace(entry->session->id(), entry);
  }
  return ok(out, 201);
}

ApiResponse TranslationService::handle(const std::string& method, const std::string& path, const std::string& body) {
  try {
    const auto seg = split_path(path);
    const bool get = method == "GET" || method == "HEAD";
    const bool post = method == "POST";
    const auto wrong_method = [&] { return error_response(405, "method_not_allowed", method + " " + path); };

    if (seg.size() == 1 && seg[0] == "health") {
      if (!get) return wrong_method();
      return ok({{"status", "ok"}, {"sessions", session_count()}});
    }
    if (seg.size() == 1 && seg[0] == "checkpoints") {
      if (!get) return wrong_method();
      return ok({{"checkpoints", checkpoints_->names()}});
    }
    if (seg.empty() || seg[0] != "sessions") return error_response(404, "not_found", "no route " + path);

    if (seg.size() == 1) {
      if (!post) return wrong_method();
      return create_session(body);
    }
    const std::string& id = seg[1];
    if (seg.size() == 2) {
      if (!get) return wrong_method();
      return with_session(id, [](Entry& e) { return ok(session_json(*e.session, e.checkpoint, e.created)); });
    }
    if (seg.size() == 3 && seg[2] == "history") {
      if (!get) return wrong_method();
      return with_session(id, [](Entry& e) {
        json records = json::array();
        for (const auto& line : e.transcript.lines()) records.push_back(json::parse(line));
        json out = session_json(*e.session, e.checkpoint, e.created);
        out["records"] = std::move(records);
        return ok(out);
      });
    }
    if (seg.size() == 3 && seg[2] == "translate") {
      if (!post) return wrong_method();
      const json req = parse_body(body);
      const std::string source = field<std::string>(req, "source");
      return with_session(id, [&](Entry& e) {
        const Round& r = e.session->translate(source);
        e.transcript.record_translate(*e.session, r);
        json out = snapshot_json(*e.session, r.initial);
        out["round_id"] = r.id;
        return ok(out);
      });
    }
    if (seg.size() == 5 && seg[2] == "rounds" && (seg[4] == "revise" || seg[4] == "accept")) {
      if (!post) return wrong_method();
      const std::size_t rid = parse_index(seg[3], "round");
      if (seg[4] == "revise") {
        const json req = parse_body(body);
        const auto position = field<std::int64_t>(req, "position");
        if (position < 0) throw ApiError{400, "position_out_of_range", "position must be nonnegative"};
        const RevisionRequest request{static_cast<std::size_t>(position), field<std::string>(req, "new_surface"),
                                      optional_field<bool>(req, "insert", false)};
        return with_session(id, [&](Entry& e) {
          const Round& r = e.session->revise(rid, request);
          e.transcript.record_revise(*e.session, r);
          json out = snapshot_json(*e.session, r.current());
          out["round_id"] = r.id;
          out["revision"] = r.revisions.size();
          return ok(out);
        });
      }
      return with_session(id, [&](Entry& e) {
        const Round& r = e.session->accept(rid);
        e.transcript.record_accept(*e.session, r);
        return ok({{"adapted", e.session->options().online_learning},
                   {"round_id", r.id},
                   {"text", detokenize(e.session->render(r.current()))}});
      });
    }
    return error_response(404, "not_found", "no route " + path);
  } catch (const ApiError& e) {
    return error_response(e.status, e.code, e.message);
  } catch (const SessionError& e) {
    const ApiError a = from_session_error(e);
    return error_response(a.status, a.code, a.message);
  } catch (const std::exception& e) {
    return error_response(500, "internal", e.what());
  }
}

std::size_t TranslationService::restore(std::vector<std::string>* failures) {
  if (options_.transcript_dir.empty() || !std::filesystem::is_directory(options_.transcript_dir)) return 0;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(options_.transcript_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::size_t restored = 0;
  for (const auto& file : files) {
    try {
      const auto lines = read_transcript(file);
      const std::string checkpoint = transcript_checkpoint(lines);
      auto model = checkpoints_->get(checkpoint);
      if (!model) throw std::runtime_error("unknown checkpoint '" + checkpoint + "'");
      auto entry = std::make_shared<Entry>();
      entry->session = replay_transcript(model, lines);
      entry->checkpoint = checkpoint;
      entry->created = json::parse(lines.front()).value("created", "");
      entry->transcript = Transcript::resume(file);
      std::lock_guard lock(mu_);
      if (sessions_.contains(entry->session->id())) throw std::runtime_error("duplicate session id");
      sessions_.emplace(entry->session->id(), std::move(entry));
      ++restored;
    } catch (const std::exception& e) {
      if (failures) failures->push_back(file.filename().string() + ": " + e.what());
    }
  }
  return restored;
}

HttpFrontend::HttpFrontend(TranslationService& service)
    : service_(service), server_(std::make_unique<httplib::Server>()) {
  const auto forward = [this](const httplib::Request& req, httplib::Response& res) {
    const ApiResponse r = service_.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  server_->set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  server_->Options(".*", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
  server_->Get(".*", forward);
  server_->Post(".*", forward);
  server_->Put(".*", forward);
  server_->Delete(".*", forward);
  server_->Patch(".*", forward);
  const auto& dir = service_.options().static_dir;
  if (!dir.empty() && !server_->set_mount_point("/", dir.string())) {
    throw std::runtime_error("static directory not found: " + dir.string());
  }
}

HttpFrontend::~HttpFrontend() { stop(); }

int HttpFrontend::bind(const std::string& host, int port) {
  if (port < 0 || port > 65535) throw std::runtime_error("invalid port " + std::to_string(port));
  if (port == 0) {
    const int bound = server_->bind_to_any_port(host);
    if (bound <= 0) throw std::runtime_error("cannot bind " + host);
    return bound;
  }
  if (!server_->bind_to_port(host, port)) {
    throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpFrontend::serve() { server_->listen_after_bind(); }

void HttpFrontend::stop() {
  if (server_) server_->stop();
}

}  // namespace imt
