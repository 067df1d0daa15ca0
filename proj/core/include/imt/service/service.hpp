#pragma once

#include "imt/model/translation_model.hpp"
#include "imt/session/session.hpp"
#include "imt/session/transcript.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace httplib {
class Server;
}

namespace imt {

/// Named, immutable base models shared read-only by every session. Names not
/// registered explicitly are looked up as <dir>/<name> and <dir>/<name>.bin.
class CheckpointRegistry {
 public:
  explicit CheckpointRegistry(std::filesystem::path dir = {}) : dir_(std::move(dir)) {}

  void add(const std::string& name, std::shared_ptr<const TranslationModel> model);
  /// Null when no such checkpoint exists. Files that fail to load throw.
  std::shared_ptr<const TranslationModel> get(const std::string& name);
  std::vector<std::string> names() const;

 private:
  std::filesystem::path dir_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<const TranslationModel>> models_;
};

struct ServiceOptions {
  std::filesystem::path transcript_dir;  // empty: transcripts are kept in memory only
  std::filesystem::path static_dir;      // served under "/" when set
  SessionOptions defaults;               // for fields a creation request leaves out
};

struct ApiResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

/// JSON API over sessions. Transport-independent: HttpFrontend forwards
/// requests here, tests may call handle() directly. Requests on different
/// sessions run in parallel; requests on one session are serialized.
///
///   GET  /health
///   GET  /checkpoints
///   POST /sessions                          {checkpoint, toggles?, options?}
///   GET  /sessions/{id}
///   POST /sessions/{id}/translate           {source}
///   POST /sessions/{id}/rounds/{rid}/revise {position, new_surface, insert?}
///   POST /sessions/{id}/rounds/{rid}/accept
///   GET  /sessions/{id}/history
///
/// Errors are {"code", "message"} with a stable code string.
class TranslationService {
 public:
  TranslationService(std::shared_ptr<CheckpointRegistry> checkpoints, ServiceOptions options);

  ApiResponse handle(const std::string& method, const std::string& path, const std::string& body);

  /// Rebuilds sessions from the transcript directory by replaying each file.
  /// Returns the number restored; files that fail to replay are skipped and
  /// reported through `failures`.
  std::size_t restore(std::vector<std::string>* failures = nullptr);

  std::size_t session_count() const;
  /// Runs `fn` on a session under its lock; false when the id is unknown.
  bool inspect(const std::string& id, const std::function<void(const Session&)>& fn) const;
  const ServiceOptions& options() const { return options_; }

 private:
  struct Entry {
    std::mutex mu;
    std::unique_ptr<Session> session;
    Transcript transcript;
    std::string checkpoint;
    std::string created;
  };

  ApiResponse create_session(const std::string& body);
  ApiResponse with_session(const std::string& id, const std::function<ApiResponse(Entry&)>& fn);
  std::shared_ptr<Entry> find(const std::string& id) const;

  std::shared_ptr<CheckpointRegistry> checkpoints_;
  ServiceOptions options_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
};

/// HTTP transport for a TranslationService.
class HttpFrontend {
 public:
  explicit HttpFrontend(TranslationService& service);
  ~HttpFrontend();
  HttpFrontend(const HttpFrontend&) = delete;
  HttpFrontend& operator=(const HttpFrontend&) = delete;

  /// Binds `host:port` (port 0 picks a free port) and returns the bound port.
  /// Throws std::runtime_error when the address cannot be bound.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void serve();
  void stop();

 private:
  TranslationService& service_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace imt
