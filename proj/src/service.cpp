#include "mma/service.hpp"

#include <array>
#include <random>

#include "mma/error.hpp"
#include "mma/export.hpp"
#include "mma/serialization.hpp"

namespace mma {

namespace fs = std::filesystem;

namespace {

Response json_response(int status, nlohmann::json body) {
  body["format"] = 1;
  return {status, "application/json", body.dump()};
}

Response error_response(int status, std::string_view code, const std::string& message,
                        nlohmann::json extra = nlohmann::json::object()) {
  extra["code"] = std::string(code);
  extra["message"] = message;
  return json_response(status, std::move(extra));
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kIllegalTransition:
    case ErrorCode::kDuplicateSequence:
    case ErrorCode::kSequenceGap:
    case ErrorCode::kPhaseTooEarly: return 409;
    case ErrorCode::kInvalidStudy:
    case ErrorCode::kMenuViolation:
    case ErrorCode::kMenuExhausted:
    case ErrorCode::kCoverageUnsatisfiable: return 422;
    case ErrorCode::kInvalidPayload:
    case ErrorCode::kInvalidValue:
    case ErrorCode::kUnknownFeature:
    case ErrorCode::kIllegalComparator: return 400;
    default: return 500;
  }
}

Response from_error(const Error& e) { return error_response(status_for(e.code()), error_code_name(e.code()), e.what()); }

std::vector<std::string> split_path(std::string_view path) {
  if (auto q = path.find('?'); q != std::string_view::npos) path = path.substr(0, q);
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (pos <= path.size()) {
    auto slash = path.find('/', pos);
    if (slash == std::string_view::npos) slash = path.size();
    if (slash > pos) parts.emplace_back(path.substr(pos, slash - pos));
    pos = slash + 1;
  }
  return parts;
}

std::vector<nlohmann::json> read_index(const fs::path& path) {
  std::vector<nlohmann::json> out;
  if (!fs::exists(path)) return out;
  std::string text = read_file(path);
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string::npos) break;  // torn final line
    auto j = nlohmann::json::parse(text.begin() + static_cast<std::ptrdiff_t>(pos),
                                   text.begin() + static_cast<std::ptrdiff_t>(nl), nullptr, false);
    pos = nl + 1;
    if (j.is_discarded()) throw Error(ErrorCode::kIo, "corrupt index file '" + path.string() + "'");
    out.push_back(std::move(j));
  }
  return out;
}

// A crash mid-append leaves a line without its newline; cut it before appending again.
void drop_torn_tail(const fs::path& path) {
  if (!fs::exists(path)) return;
  std::string text = read_file(path);
  if (text.empty() || text.back() == '\n') return;
  auto nl = text.rfind('\n');
  fs::resize_file(path, nl == std::string::npos ? 0 : nl + 1);
}

}  // namespace

std::string random_token() {
  static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_";
  std::random_device rd;
  std::array<std::uint8_t, 16> bytes{};
  for (std::size_t i = 0; i < bytes.size(); i += 4) {
    std::uint32_t r = rd();
    for (std::size_t k = 0; k < 4; ++k) bytes[i + k] = static_cast<std::uint8_t>(r >> (8 * k));
  }
  std::string out;
  std::uint32_t acc = 0;
  int bits = 0;
  for (std::uint8_t b : bytes) {
    acc = (acc << 8) | b;
    bits += 8;
    while (bits >= 6) {
      bits -= 6;
      out += kAlphabet[(acc >> bits) & 63];
    }
  }
  if (bits > 0) out += kAlphabet[(acc << (6 - bits)) & 63];
  return out;
}

Service::Service(fs::path data_dir) : data_dir_(std::move(data_dir)) {
  std::error_code ec;
  fs::create_directories(data_dir_ / "studies", ec);
  if (!ec) fs::create_directories(data_dir_ / "sessions", ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create data directory '" + data_dir_.string() + "': " + ec.message());
  load();
}

void Service::load() {
  drop_torn_tail(data_dir_ / "studies" / "index.jsonl");
  drop_torn_tail(data_dir_ / "sessions" / "index.jsonl");
  for (const auto& entry : read_index(data_dir_ / "studies" / "index.jsonl")) {
    auto rec = std::make_shared<StudyRecord>();
    rec->id = entry.value("study_id", "");
    rec->name = entry.value("name", "");
    rec->created_at = entry.value("created_at", std::int64_t{0});
    rec->source = read_file(data_dir_ / "studies" / (rec->id + ".study"));
    ParseResult parsed = parse_study(rec->source);
    if (!parsed.ok()) throw Error(ErrorCode::kInvalidStudy, "stored study '" + rec->id + "' no longer parses");
    rec->study = std::move(*parsed.study);
    studies_[rec->id] = std::move(rec);
  }
  for (const auto& entry : read_index(data_dir_ / "sessions" / "index.jsonl")) {
    std::string id = entry.value("session_id", "");
    auto study = find_study(entry.value("study_id", ""));
    if (!study) throw Error(ErrorCode::kNotFound, "session '" + id + "' refers to an unknown study");
    fs::path log_path = data_dir_ / "sessions" / (id + ".log");
    drop_torn_tail(log_path);
    auto rec = std::make_shared<SessionRecord>();
    rec->study_id = study->id;
    rec->state = replay(read_log_file(log_path), study->study);
    rec->log = LogWriter(log_path);
    sessions_[id] = std::move(rec);
    session_order_.push_back(id);
  }
}

std::size_t Service::study_count() const {
  std::shared_lock lock(registry_);
  return studies_.size();
}

std::size_t Service::session_count() const {
  std::shared_lock lock(registry_);
  return sessions_.size();
}

std::shared_ptr<const Service::StudyRecord> Service::find_study(const std::string& id) const {
  auto it = studies_.find(id);
  return it == studies_.end() ? nullptr : it->second;
}

std::shared_ptr<Service::SessionRecord> Service::find_session(const std::string& id) const {
  std::shared_lock lock(registry_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

Response Service::route(const Request& req) {
  try {
    auto parts = split_path(req.path);
    if (parts.empty() || parts[0] != "api") return error_response(404, "not_found", "no such endpoint");
    auto body = [&]() -> std::optional<nlohmann::json> {
      auto j = nlohmann::json::parse(req.body, nullptr, false);
      if (j.is_discarded() || !j.is_object()) return std::nullopt;
      return j;
    };
    auto malformed = [] { return error_response(400, "invalid_payload", "request body must be a JSON object"); };
    const bool get = req.method == "GET", post = req.method == "POST";

    if (parts.size() == 2 && parts[1] == "health" && get) return json_response(200, {{"status", "ok"}});
    if (parts.size() >= 2 && parts[1] == "studies") {
      if (parts.size() == 2 && post) {
        auto b = body();
        return b ? create_study(*b) : malformed();
      }
      if (parts.size() == 3 && get) return get_study(parts[2]);
      if (parts.size() == 4 && parts[3] == "export.csv" && get) return get_export(parts[2]);
    }
    if (parts.size() >= 2 && parts[1] == "sessions") {
      if (parts.size() == 2 && post) {
        auto b = body();
        return b ? create_session_route(*b) : malformed();
      }
      if (parts.size() == 4 && parts[3] == "step" && get) return get_step(parts[2]);
      if (parts.size() == 4 && parts[3] == "report" && get) return get_report(parts[2]);
      if (parts.size() == 4 && parts[3] == "events" && post) {
        auto b = body();
        return b ? post_event(parts[2], *b) : malformed();
      }
    }
    return error_response(404, "not_found", "no such endpoint: " + req.method + " " + req.path);
  } catch (const Error& e) {
    return from_error(e);
  } catch (const std::exception& e) {
    return error_response(500, "internal", e.what());
  }
}

Response Service::create_study(const nlohmann::json& body) {
  auto src = body.find("source");
  if (src == body.end() || !src->is_string())
    return error_response(400, "invalid_payload", "body needs a 'source' string");
  ParseResult parsed = parse_study(src->get<std::string>());
  nlohmann::json issues = nlohmann::json::array();
  nlohmann::json warnings = nlohmann::json::array();
  for (const auto& issue : parsed.issues)
    (issue.severity == Severity::kError ? issues : warnings).push_back(issue_to_json(issue));
  if (!parsed.ok())
    return error_response(422, "invalid_study", "study source has errors", {{"issues", issues}});
  // stimuli must be producible before anyone can start a session
  prepare_stimuli(*parsed.study, 0);

  auto rec = std::make_shared<StudyRecord>();
  rec->id = random_token();
  rec->study = std::move(*parsed.study);
  rec->name = body.contains("name") && body["name"].is_string() ? body["name"].get<std::string>() : rec->study.name;
  rec->source = print_study(rec->study);
  rec->created_at = now_ms();

  write_file(data_dir_ / "studies" / (rec->id + ".study"), rec->source);
  {
    std::lock_guard lock(index_writer_);
    LogWriter index(data_dir_ / "studies" / "index.jsonl", "");
    index.append_line(nlohmann::json{{"study_id", rec->id}, {"name", rec->name}, {"created_at", rec->created_at}}.dump());
  }
  std::string id = rec->id;
  std::string fingerprint = study_fingerprint(rec->study);
  {
    std::unique_lock lock(registry_);
    studies_[id] = std::move(rec);
  }
  return json_response(201, {{"study_id", id}, {"fingerprint", fingerprint}, {"warnings", warnings}});
}

Response Service::get_study(const std::string& id) {
  std::shared_ptr<const StudyRecord> rec;
  {
    std::shared_lock lock(registry_);
    rec = find_study(id);
  }
  if (!rec) return error_response(404, "not_found", "unknown study '" + id + "'");
  const Study& s = rec->study;
  nlohmann::json features = nlohmann::json::array();
  for (const auto& f : s.features) features.push_back(feature_to_json(f));
  return json_response(200, {{"study_id", rec->id},
                             {"name", rec->name},
                             {"classes", s.classes},
                             {"features", features},
                             {"observation_params",
                              {{"count", s.observation_params.count},
                               {"demonstrate_each", s.observation_params.demonstrate_each}}},
                             {"prediction_params", {{"count", s.prediction_params.count}}}});
}

Response Service::create_session_route(const nlohmann::json& body) {
  auto sid = body.find("study_id");
  if (sid == body.end() || !sid->is_string()) return error_response(400, "invalid_payload", "body needs 'study_id'");
  std::shared_ptr<const StudyRecord> study;
  {
    std::shared_lock lock(registry_);
    study = find_study(sid->get<std::string>());
  }
  if (!study) return error_response(404, "not_found", "unknown study '" + sid->get<std::string>() + "'");
  auto cond_it = body.find("condition");
  if (cond_it == body.end() || !cond_it->is_string())
    return error_response(400, "invalid_payload", "body needs a 'condition' of none, full or targeted");
  auto condition = parse_condition(cond_it->get<std::string>());
  if (!condition) return error_response(400, "invalid_payload", "condition must be none, full or targeted");
  std::uint64_t seed = 0;
  if (auto s = body.find("seed"); s != body.end()) {
    if (!s->is_number_unsigned() && !(s->is_number_integer() && s->get<std::int64_t>() >= 0))
      return error_response(400, "invalid_payload", "seed must be a non-negative integer");
    seed = s->get<std::uint64_t>();
  } else {
    std::random_device rd;
    seed = (static_cast<std::uint64_t>(rd()) << 32) | rd();
  }

  auto rec = std::make_shared<SessionRecord>();
  rec->study_id = study->id;
  std::string id = random_token();
  rec->state = create_session(study->study, *condition, seed, id);
  rec->log = LogWriter(data_dir_ / "sessions" / (id + ".log"));
  rec->log.append(rec->state.events.front());
  {
    std::lock_guard lock(index_writer_);
    LogWriter index(data_dir_ / "sessions" / "index.jsonl", "");
    index.append_line(
        nlohmann::json{{"session_id", id}, {"study_id", study->id}, {"created_at", rec->state.events.front().ts}}
            .dump());
  }
  nlohmann::json step = step_json(rec->state);
  {
    std::unique_lock lock(registry_);
    sessions_[id] = rec;
    session_order_.push_back(id);
  }
  return json_response(201, {{"session_id", id}, {"step", step}});
}

nlohmann::json Service::step_json(const SessionState& s) const {
  const Stimuli& st = *s.stimuli;
  const Study& study = st.study;
  nlohmann::json payload;
  switch (s.phase.kind) {
    case PhaseKind::kBriefing: {
      nlohmann::json features = nlohmann::json::array();
      for (const auto& f : study.features) features.push_back(feature_to_json(f));
      payload = {{"study", study.name},
                 {"classes", study.classes},
                 {"features", features},
                 {"n_observations", st.observations.size()},
                 {"n_predictions", st.rounds[0].size()}};
      break;
    }
    case PhaseKind::kObserving: {
      const Observation& o = st.observations.at(s.phase.index);
      payload = {{"index", o.index},
                 {"total", st.observations.size()},
                 {"profile", profile_to_json(o.profile, study.features)},
                 {"label", study.classes.at(o.classification.label)}};
      break;
    }
    case PhaseKind::kEliciting:
      payload = {{"round", s.phase.round}, {"menu", menu_to_json(st.menu, study)}};
      break;
    case PhaseKind::kPredicting: {
      const PredictionItem& item = st.rounds[s.phase.round - 1].at(s.phase.index);
      payload = {{"round", s.phase.round},
                 {"item", item.index},
                 {"total", st.rounds[s.phase.round - 1].size()},
                 {"profile", profile_to_json(item.profile, study.features)},
                 {"classes", study.classes}};
      break;
    }
    case PhaseKind::kIntervention:
      payload = {{"texts", intervention_texts(s)}};
      break;
    case PhaseKind::kDone:
      payload = {{"completed", true}};
      break;
  }
  return {{"session_id", s.session_id}, {"seq", s.next_seq()}, {"phase", phase_to_json(s.phase)}, {"payload", payload}};
}

Response Service::get_step(const std::string& id) {
  auto rec = find_session(id);
  if (!rec) return error_response(404, "not_found", "unknown session");
  std::lock_guard lock(rec->writer);
  return json_response(200, step_json(rec->state));
}

Response Service::post_event(const std::string& id, const nlohmann::json& body) {
  auto rec = find_session(id);
  if (!rec) return error_response(404, "not_found", "unknown session");
  auto seq = body.find("seq");
  auto kind = body.find("kind");
  if (seq == body.end() || !seq->is_number_unsigned())
    return error_response(400, "invalid_payload", "body needs a non-negative integer 'seq'");
  if (kind == body.end() || !kind->is_string()) return error_response(400, "invalid_payload", "body needs a 'kind'");
  auto k = parse_event_kind(kind->get<std::string>());
  if (!k) return error_response(400, "invalid_payload", "unknown event kind '" + kind->get<std::string>() + "'");

  SessionEvent event;
  event.seq = seq->get<std::uint64_t>();
  event.ts = now_ms();
  event.kind = *k;
  if (auto p = body.find("payload"); p != body.end() && !p->is_null()) {
    if (!p->is_object()) return error_response(400, "invalid_payload", "'payload' must be an object");
    event.payload = *p;
  }

  std::lock_guard lock(rec->writer);
  SessionState next = apply_event(rec->state, event);
  rec->log.append(event);
  rec->state = std::move(next);
  return json_response(200, step_json(rec->state));
}

Response Service::get_report(const std::string& id) {
  auto rec = find_session(id);
  if (!rec) return error_response(404, "not_found", "unknown session");
  std::lock_guard lock(rec->writer);
  nlohmann::json j = session_report_to_json(session_report(rec->state), rec->state.study());
  j["study_id"] = rec->study_id;
  return json_response(200, std::move(j));
}

std::string Service::export_csv(const std::string& study_id) {
  std::vector<std::shared_ptr<SessionRecord>> records;
  {
    std::shared_lock lock(registry_);
    if (!find_study(study_id)) throw Error(ErrorCode::kNotFound, "unknown study '" + study_id + "'");
    for (const auto& id : session_order_) {
      const auto& rec = sessions_.at(id);
      if (rec->study_id == study_id) records.push_back(rec);
    }
  }
  std::vector<SessionReport> reports;
  for (const auto& rec : records) {
    std::lock_guard lock(rec->writer);
    try {
      reports.push_back(session_report(rec->state));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kPhaseTooEarly) throw;
    }
  }
  return csv_document(reports);
}

Response Service::get_export(const std::string& id) {
  return {200, "text/csv; charset=utf-8", export_csv(id)};
}

}  // namespace mma
