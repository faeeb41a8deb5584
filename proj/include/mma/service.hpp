#pragma once

// HTTP facade over studies and sessions with file-backed persistence.
//
// Layout under the data directory:
//   studies/{id}.study     canonical study text
//   studies/index.jsonl    {"study_id","name","created_at"} per line, creation order
//   sessions/{id}.log      event log
//   sessions/index.jsonl   {"session_id","study_id","created_at"} per line, creation order
//
// route() is transport-independent; serve() binds it to a socket.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mma/event_log.hpp"
#include "mma/session.hpp"
#include "mma/study.hpp"

namespace mma {

struct Request {
  std::string method;
  std::string path;
  std::string body;
};

struct Response {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;

  nlohmann::json json() const { return nlohmann::json::parse(body, nullptr, false); }
};

/// 128 random bits, base64url without padding (22 characters).
std::string random_token();

class Service {
 public:
  /// Creates the layout if missing and replays every persisted session.
  /// Throws Io, or the replay error of a corrupt log.
  explicit Service(std::filesystem::path data_dir);

  Response route(const Request& request);

  /// Throws NotFound.
  std::string export_csv(const std::string& study_id);

  std::size_t study_count() const;
  std::size_t session_count() const;
  const std::filesystem::path& data_dir() const { return data_dir_; }

 private:
  struct StudyRecord {
    std::string id;
    std::string name;
    std::string source;
    Study study;
    std::int64_t created_at = 0;
  };
  struct SessionRecord {
    std::string study_id;
    std::mutex writer;  // one logical writer per session
    SessionState state;
    LogWriter log;
  };

  Response create_study(const nlohmann::json& body);
  Response get_study(const std::string& id);
  Response create_session_route(const nlohmann::json& body);
  Response get_step(const std::string& id);
  Response post_event(const std::string& id, const nlohmann::json& body);
  Response get_report(const std::string& id);
  Response get_export(const std::string& id);

  std::shared_ptr<const StudyRecord> find_study(const std::string& id) const;
  std::shared_ptr<SessionRecord> find_session(const std::string& id) const;
  nlohmann::json step_json(const SessionState& state) const;
  void load();

  std::filesystem::path data_dir_;
  mutable std::shared_mutex registry_;
  std::map<std::string, std::shared_ptr<const StudyRecord>> studies_;
  std::map<std::string, std::shared_ptr<SessionRecord>> sessions_;
  std::vector<std::string> session_order_;
  std::mutex index_writer_;
};

/// Serves `service` until the process is interrupted. `listen` is HOST:PORT.
/// Static files under `assets` (if non-empty) are served at /.
int serve(Service& service, const std::string& listen, const std::filesystem::path& assets);

}  // namespace mma
