#pragma once

#include "imt/session/session.hpp"

#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace imt {

/// Line-delimited JSON log of one session: an "open" record followed by
/// "translate", "revise" and "accept" records in the order they happened.
/// Each record carries the resulting tokens so a replay can verify itself.
class Transcript {
 public:
  /// In-memory transcript.
  Transcript() = default;
  /// Also appends every record to `path` (flushed per record).
  explicit Transcript(const std::filesystem::path& path);
  /// Reads the records already in `path` and appends new ones after them.
  static Transcript resume(const std::filesystem::path& path);

  /// `created` is an optional timestamp kept in the record.
  void record_open(const Session& session, const std::string& checkpoint, const std::string& created = {});
  void record_translate(const Session& session, const Round& round);
  void record_revise(const Session& session, const Round& round);
  void record_accept(const Session& session, const Round& round);

  const std::vector<std::string>& lines() const { return lines_; }

 private:
  void append(std::string line);

  std::vector<std::string> lines_;
  std::unique_ptr<std::ofstream> out_;
};

std::vector<std::string> read_transcript(const std::filesystem::path& path);

class ReplayMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Re-executes a transcript against `base` and checks that every recorded
/// hypothesis is reproduced. Throws ReplayMismatch when it is not.
std::unique_ptr<Session> replay_transcript(std::shared_ptr<const TranslationModel> base,
                                           const std::vector<std::string>& lines);

/// Checkpoint name stored in a transcript's open record.
std::string transcript_checkpoint(const std::vector<std::string>& lines);

}  // namespace imt
