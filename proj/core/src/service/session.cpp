#include "igrec/service/session.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>
#include <vector>

#include "igrec/common/binary_io.hpp"
#include "igrec/common/rng.hpp"

namespace igrec::service {
namespace {

ServiceError bad_request(const std::string& message) { return {400, "bad_request", message}; }
ServiceError not_found(const std::string& message) { return {404, "not_found", message}; }
ServiceError conflict(const std::string& message) { return {409, "conflict", message}; }

std::string_view mode_name(FeedbackMode mode) { return mode == FeedbackMode::kProxy ? "proxy" : "human"; }

template <typename T>
T field(const nlohmann::json& body, const char* name) {
  try {
    return body.at(name).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw bad_request(std::string("field '") + name + "' is missing or has the wrong type");
  }
}

}  // namespace

nlohmann::json swatch(const Eigen::VectorXd& feature) {
  std::string bytes;
  for (const double v : feature) {
    const float f = static_cast<float>(v);
    bytes.append(reinterpret_cast<const char*>(&f), sizeof f);
  }
  const std::uint64_t h = io::fnv1a64(bytes);
  static constexpr const char* kPatterns[] = {"solid", "stripes", "dots", "checks"};
  char color[8];
  std::snprintf(color, sizeof color, "#%06x", static_cast<unsigned>(h & 0xffffffu));
  return {{"color", color}, {"pattern", kPatterns[(h >> 24) & 3u]}};
}

struct SessionManager::Session {
  std::mutex mutex;
  std::string id;
  std::string top_id;
  std::string user_tag;
  FeedbackMode mode = FeedbackMode::kHuman;
  std::uint64_t seed = 0;
  std::unique_ptr<agent::InteractiveEpisode> episode;
  std::map<std::string, nlohmann::json> replies;  // idempotency key -> response
  std::chrono::steady_clock::time_point last_access;
};

SessionManager::SessionManager(ServiceModels models, ServiceOptions options, Clock clock)
    : models_(std::move(models)), options_(std::move(options)), clock_(std::move(clock)) {
  if (!models_.policy || !models_.artifacts.space || !models_.artifacts.dataset) {
    throw ContractError("the session manager needs a dataset, an action space and a policy");
  }
  if (options_.max_sessions == 0) throw ContractError("max_sessions must be positive");
  if (options_.steps == 0 || options_.steps > models_.artifacts.space->size()) {
    throw ContractError("episode length must lie in [1, |A|]");
  }
  if (options_.id_salt == 0) options_.id_salt = (std::uint64_t{std::random_device{}()} << 32) | std::random_device{}();
}

SessionManager::~SessionManager() = default;

nlohmann::json SessionManager::bottom_payload(std::size_t action) const {
  const auto& space = *models_.artifacts.space;
  const auto& garment = models_.artifacts.dataset->garment(space.bottom_id(action));
  nlohmann::json out = {{"id", garment.id},
                        {"action", action},
                        {"cluster", space.candidates.items.at(action).cluster},
                        {"swatch", swatch(garment.feature)}};
  if (!garment.image_url.empty()) out["image_url"] = garment.image_url;
  return out;
}

nlohmann::json SessionManager::snapshot(const Session& s) const {
  nlohmann::json history = nlohmann::json::array();
  for (const auto& step : s.episode->steps()) {
    history.push_back({{"step", step.step},
                       {"bottom", bottom_payload(step.action)},
                       {"score", step.normalized},
                       {"raw", step.raw},
                       {"reward", step.reward}});
  }
  const auto pending = s.episode->pending();
  nlohmann::json out = {{"session_id", s.id},
                        {"top_id", s.top_id},
                        {"mode", mode_name(s.mode)},
                        {"status", s.episode->done() ? "done" : "active"},
                        {"satisfied", s.episode->satisfied()},
                        {"step", s.episode->steps().size()},
                        {"max_steps", s.episode->max_steps()},
                        {"history", history},
                        {"pending", pending ? bottom_payload(*pending) : nlohmann::json(nullptr)}};
  if (!s.user_tag.empty()) out["user_tag"] = s.user_tag;
  return out;
}

std::size_t SessionManager::evict_expired() {
  const auto now = clock_();
  std::vector<std::shared_ptr<Session>> expired;
  {
    std::lock_guard lock(mutex_);
    for (auto it = sessions_.begin(); it != sessions_.end();) {
      // try_lock: a session busy serving a request is not idle.
      std::unique_lock session_lock(it->second->mutex, std::try_to_lock);
      if (session_lock && now - it->second->last_access > options_.session_timeout) {
        expired.push_back(it->second);
        it = sessions_.erase(it);
      } else {
        ++it;
      }
    }
  }
  return expired.size();
}

std::size_t SessionManager::session_count() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

std::shared_ptr<SessionManager::Session> SessionManager::find(const std::string& session_id) {
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw not_found("no session '" + session_id + "'");
  return it->second;
}

nlohmann::json SessionManager::start_session(const nlohmann::json& request) {
  if (!request.is_object()) throw bad_request("request body must be a JSON object");
  auto session = std::make_shared<Session>();
  session->top_id = field<std::string>(request, "top_id");
  const auto mode = request.contains("mode") ? field<std::string>(request, "mode") : std::string("human");
  if (mode == "proxy") {
    session->mode = FeedbackMode::kProxy;
  } else if (mode != "human") {
    throw bad_request("mode must be 'proxy' or 'human', got '" + mode + "'");
  }
  if (request.contains("user_tag") && !request["user_tag"].is_null()) session->user_tag = field<std::string>(request, "user_tag");
  if (request.contains("seed")) session->seed = field<std::uint64_t>(request, "seed");
  const auto* top = models_.artifacts.dataset->find(session->top_id);
  if (!top || top->category != data::Category::kTop) throw not_found("no top garment '" + session->top_id + "'");
  if (session->mode == FeedbackMode::kProxy) {
    if (!models_.artifacts.scorer) throw conflict("proxy mode is unavailable: the service has no proxy loaded");
    if (session->user_tag.empty()) throw bad_request("proxy mode needs a user_tag naming the simulated user");
  }
  session->episode = std::make_unique<agent::InteractiveEpisode>(*models_.policy, *models_.artifacts.space, top->feature,
                                                                  session->seed, options_.steps,
                                                                  session->mode == FeedbackMode::kHuman);
  const std::size_t action = session->episode->propose();
  session->last_access = clock_();

  {
    std::lock_guard lock(mutex_);
    if (sessions_.size() >= options_.max_sessions) {
      // Finished sessions give way first, oldest activity first.
      std::vector<std::pair<std::chrono::steady_clock::time_point, std::string>> done;
      for (const auto& [id, s] : sessions_) {
        std::unique_lock session_lock(s->mutex, std::try_to_lock);
        if (session_lock && s->episode->done()) done.emplace_back(s->last_access, id);
      }
      std::sort(done.begin(), done.end());
      for (std::size_t i = 0; i < done.size() && sessions_.size() >= options_.max_sessions; ++i) sessions_.erase(done[i].second);
    }
    if (sessions_.size() >= options_.max_sessions) {
      throw ServiceError(503, "capacity", "session capacity reached (" + std::to_string(options_.max_sessions) + ")");
    }
    session->id = "s-" + io::hex64(Rng::mix(options_.id_salt ^ next_id_++));
    sessions_.emplace(session->id, session);
  }
  nlohmann::json out = {{"session_id", session->id},
                        {"step", 1},
                        {"status", "active"},
                        {"mode", mode_name(session->mode)},
                        {"max_steps", options_.steps},
                        {"bottom", bottom_payload(action)}};
  return out;
}

nlohmann::json SessionManager::post_feedback(const std::string& session_id, const nlohmann::json& request) {
  if (!request.is_object()) throw bad_request("request body must be a JSON object");
  const auto session = find(session_id);
  std::lock_guard lock(session->mutex);
  session->last_access = clock_();
  std::string key;
  if (request.contains("idempotency_key") && !request["idempotency_key"].is_null()) {
    key = field<std::string>(request, "idempotency_key");
    if (const auto it = session->replies.find(key); it != session->replies.end()) return it->second;
  }
  auto& episode = *session->episode;
  if (episode.done() || !episode.pending()) throw conflict("session '" + session_id + "' has no pending recommendation");
  const std::size_t action = *episode.pending();

  agent::Feedback fb;
  if (session->mode == FeedbackMode::kHuman) {
    if (!request.contains("score") || !request["score"].is_number()) throw bad_request("human feedback needs a numeric score");
    fb.normalized = fb.raw = request["score"].get<double>();
    if (!(fb.normalized >= 0.0 && fb.normalized <= 1.0)) throw bad_request("score must lie in [0, 1]");
  } else {
    if (request.contains("score")) throw bad_request("proxy-mode sessions are scored by the proxy; omit score");
    agent::ProxyFeedbackSource source(*models_.artifacts.scorer, session->user_tag, session->top_id);
    fb = source.score(action, models_.artifacts.space->bottom_id(action));
  }
  // Human sessions may end on satisfaction; proxy sessions mirror offline episodes and run all steps.
  const auto step = episode.feedback(fb);
  const bool satisfied = episode.satisfied();

  nlohmann::json scores = nlohmann::json::array();
  double best = 0.0, sum = 0.0;
  for (const auto& s : episode.steps()) {
    scores.push_back(s.normalized);
    best = std::max(best, s.normalized);
    sum += s.normalized;
  }
  const bool done = episode.done();
  nlohmann::json out = {
      {"session_id", session->id},
      {"status", done ? "done" : "active"},
      {"satisfied", satisfied},
      {"step", episode.steps().size()},
      {"recorded", {{"step", step.step}, {"bottom_id", step.bottom_id}, {"score", step.normalized}, {"raw", step.raw}, {"reward", step.reward}}},
      {"history_summary",
       {{"steps", episode.steps().size()},
        {"scores", scores},
        {"best_score", best},
        {"mean_score", sum / static_cast<double>(episode.steps().size())}}},
      {"next", nullptr}};
  if (done) {
    out["history"] = snapshot(*session).at("history");
    journal(*session);
  } else {
    out["next"] = bottom_payload(episode.propose());
  }
  if (!key.empty()) session->replies.emplace(key, out);
  return out;
}

nlohmann::json SessionManager::get_session(const std::string& session_id) {
  const auto session = find(session_id);
  std::lock_guard lock(session->mutex);
  session->last_access = clock_();
  return snapshot(*session);
}

nlohmann::json SessionManager::catalog_tops(std::size_t offset, std::size_t limit) const {
  if (limit == 0 || limit > 500) throw bad_request("limit must lie in [1, 500]");
  const auto tops = models_.artifacts.dataset->ids(data::Category::kTop);
  nlohmann::json items = nlohmann::json::array();
  for (std::size_t i = offset; i < tops.size() && i < offset + limit; ++i) {
    const auto& g = models_.artifacts.dataset->garment(tops[i]);
    nlohmann::json item = {{"id", g.id}, {"swatch", swatch(g.feature)}};
    if (!g.image_url.empty()) item["image_url"] = g.image_url;
    items.push_back(std::move(item));
  }
  return {{"total", tops.size()}, {"offset", offset}, {"limit", limit}, {"items", items}};
}

nlohmann::json SessionManager::health() const {
  return {{"status", "ok"},
          {"policy", models_.policy->kind()},
          {"actions", models_.artifacts.space->size()},
          {"proxy", models_.artifacts.scorer != nullptr},
          {"sessions", session_count()},
          {"candidate_hash", io::hex64(models_.artifacts.space->candidates.hash())}};
}

void SessionManager::journal(const Session& s) {
  if (!options_.journal) return;
  agent::EpisodeLog log{models_.policy->kind(), s.user_tag, s.top_id, s.episode->steps(), s.episode->satisfied(), false, {}};
  std::lock_guard lock(journal_mutex_);
  std::ofstream out(*options_.journal, std::ios::app);
  if (!out) throw Error("cannot append to the session journal " + options_.journal->string());
  agent::write_jsonl(out, log);
}

ServiceConfig ServiceConfig::load(const std::filesystem::path& path) {
  try {
    const auto doc = nlohmann::json::parse(io::read_text_file(path));
    const auto base = path.parent_path();
    auto resolve = [&](const std::string& p) { return std::filesystem::path(p).is_absolute() ? std::filesystem::path(p) : base / p; };
    ServiceConfig c;
    c.workdir = resolve(doc.at("workdir").get<std::string>());
    c.policy = doc.value("policy", c.policy);
    c.host = doc.value("host", c.host);
    c.port = doc.value("port", c.port);
    c.options.max_sessions = doc.value("max_sessions", c.options.max_sessions);
    c.options.session_timeout = std::chrono::seconds(doc.value("session_timeout_s", c.options.session_timeout.count()));
    c.options.steps = doc.value("steps", c.options.steps);
    if (doc.contains("journal") && !doc["journal"].is_null()) c.options.journal = resolve(doc["journal"].get<std::string>());
    if (c.port < 0 || c.port > 65535) throw LoadError("port out of range");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  } catch (const LoadError& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
}

ServiceModels load_models(const std::filesystem::path& workdir, const std::string& policy) {
  const pipeline::Workdir wd{workdir};
  ServiceModels models;
  models.artifacts = pipeline::load_artifacts(wd, std::filesystem::exists(wd.proxy() / "gpbpr.json"));
  models.policy = pipeline::load_policy(policy, wd.agent(policy), models.artifacts.space, models.artifacts.candidate_hash());
  return models;
}

}  // namespace igrec::service
