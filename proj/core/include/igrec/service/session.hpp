#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "igrec/agent/episode.hpp"
#include "igrec/common/error.hpp"
#include "igrec/pipeline/pipeline.hpp"

namespace igrec::service {

/// An error with an HTTP status and a stable machine-readable code.
class ServiceError : public Error {
 public:
  ServiceError(int status, std::string code, const std::string& message)
      : Error(message), status_(status), code_(std::move(code)) {}
  int status() const { return status_; }
  const std::string& code() const { return code_; }

 private:
  int status_;
  std::string code_;
};

enum class FeedbackMode { kProxy, kHuman };

struct ServiceOptions {
  std::size_t max_sessions = 64;
  std::chrono::seconds session_timeout{1800};
  std::size_t steps = agent::kDefaultEpisodeLength;
  std::optional<std::filesystem::path> journal;  // completed episodes, one JSON line per step
  std::uint64_t id_salt = 0;
};

/// The service's view of one workdir: frozen artifacts plus the serving policy.
struct ServiceModels {
  pipeline::Artifacts artifacts;
  std::shared_ptr<const agent::Policy> policy;
};

/// Deterministic display placeholder derived from the garment's feature bytes.
nlohmann::json swatch(const Eigen::VectorXd& feature);

/// In-memory session store. Every public method is safe to call concurrently;
/// operations on one session are serialized by that session's mutex.
///
/// Request and response bodies are the JSON documents of the HTTP API, so the
/// HTTP layer only maps routes and errors.
class SessionManager {
 public:
  using Clock = std::function<std::chrono::steady_clock::time_point()>;

  SessionManager(ServiceModels models, ServiceOptions options, Clock clock = std::chrono::steady_clock::now);
  ~SessionManager();

  /// {top_id, mode: "proxy"|"human", user_tag?, seed?} -> {session_id, step, status, bottom}
  nlohmann::json start_session(const nlohmann::json& request);
  /// {score?, idempotency_key?} -> {status, step, recorded, next, history_summary[, history]}
  nlohmann::json post_feedback(const std::string& session_id, const nlohmann::json& request);
  nlohmann::json get_session(const std::string& session_id);
  nlohmann::json catalog_tops(std::size_t offset, std::size_t limit) const;
  nlohmann::json health() const;

  /// Drops sessions idle for longer than the timeout; returns how many.
  std::size_t evict_expired();
  std::size_t session_count() const;

  const ServiceModels& models() const { return models_; }

 private:
  struct Session;

  std::shared_ptr<Session> find(const std::string& session_id);
  nlohmann::json bottom_payload(std::size_t action) const;
  nlohmann::json snapshot(const Session& session) const;
  void journal(const Session& session);

  ServiceModels models_;
  ServiceOptions options_;
  Clock clock_;
  mutable std::mutex mutex_;  // guards sessions_ and next_id_
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 0;
  std::mutex journal_mutex_;
};

/// JSON service config. Paths are relative to the config file's directory.
///   {"workdir": "...", "policy": "rl", "host": "127.0.0.1", "port": 8080,
///    "max_sessions": 64, "session_timeout_s": 1800, "steps": 10, "journal": "sessions.jsonl"}
struct ServiceConfig {
  std::filesystem::path workdir;
  std::string policy = "rl";
  std::string host = "127.0.0.1";
  int port = 8080;
  ServiceOptions options;

  /// Throws LoadError on unreadable or invalid files.
  static ServiceConfig load(const std::filesystem::path& path);
};

/// Loads artifacts (with the proxy when present) and the configured policy.
ServiceModels load_models(const std::filesystem::path& workdir, const std::string& policy);

}  // namespace igrec::service
