#include "mma/session.hpp"

#include <algorithm>
#include <chrono>

#include "mma/error.hpp"
#include "mma/serialization.hpp"

namespace mma {

namespace {

Error illegal(const SessionState& s, std::string_view what) {
  return Error(ErrorCode::kIllegalTransition,
               std::string(what) + " is not allowed in phase " + phase_to_json(s.phase).dump());
}

std::string stimuli_digest(const Stimuli& st) {
  std::string buf;
  auto add_profile = [&](const PatientProfile& p) {
    for (auto v : p.values) buf += std::to_string(v) + ",";
    buf += ";";
  };
  for (const auto& o : st.observations) {
    add_profile(o.profile);
    buf += std::to_string(o.classification.label) + "\n";
  }
  for (const auto& round : st.rounds)
    for (const auto& item : round) {
      add_profile(item.profile);
      buf += std::to_string(item.truth_label) + "\n";
    }
  for (const auto* list : {&st.menu.relevance_atoms, &st.menu.satisfaction_atoms})
    for (const auto& a : *list) buf += atom_source_text(a, st.study.features) + "\n";
  return hex64(fnv1a64(buf));
}

std::size_t prediction_count(const SessionState& s) { return s.stimuli->rounds[0].size(); }

// Eliciting(round) done: on to predictions, or straight past them when M == 0.
Phase after_elicitation(const SessionState& s, int round) {
  if (prediction_count(s) > 0) return {PhaseKind::kPredicting, round, 0};
  return round == 1 ? Phase{PhaseKind::kIntervention} : Phase{PhaseKind::kDone};
}

std::size_t expect_index(const nlohmann::json& payload, const char* key, std::size_t expected,
                         const SessionState& s, bool required) {
  if (!payload.is_object() || !payload.contains(key)) {
    if (required) throw Error(ErrorCode::kInvalidPayload, std::string("payload needs '") + key + "'");
    return expected;
  }
  const auto& v = payload[key];
  if (!v.is_number_unsigned() && !v.is_number_integer())
    throw Error(ErrorCode::kInvalidPayload, std::string("'") + key + "' must be an integer");
  auto got = v.get<std::int64_t>();
  if (got < 0 || static_cast<std::size_t>(got) != expected)
    throw illegal(s, std::string(key) + " " + std::to_string(got) + " (expected " + std::to_string(expected) + ")");
  return expected;
}

RuleSet accept_elicitation(const SessionState& s, const nlohmann::json& payload) {
  const Study& study = s.study();
  RuleSet rules = rules_from_json(payload, study);
  for (const auto& r : rules.rules) {
    for (const auto* clause : {&r.relevance, &r.satisfaction})
      for (const auto& a : *clause)
        if (!s.stimuli->menu.offers(a, study.features))
          throw Error(ErrorCode::kMenuViolation,
                      "atom '" + atom_source_text(a, study.features) + "' is not on the selection list");
    if (!s.stimuli->menu.offers(ClassChoice{r.effect_class, r.direction}))
      throw Error(ErrorCode::kMenuViolation, "classification is not on the selection list");
  }
  return rules;
}

}  // namespace

std::string_view condition_text(Condition c) {
  switch (c) {
    case Condition::kNone: return "none";
    case Condition::kFull: return "full";
    case Condition::kTargeted: return "targeted";
  }
  return "?";
}

std::optional<Condition> parse_condition(std::string_view text) {
  if (text == "none") return Condition::kNone;
  if (text == "full") return Condition::kFull;
  if (text == "targeted") return Condition::kTargeted;
  return std::nullopt;
}

std::string phase_name(PhaseKind kind) {
  switch (kind) {
    case PhaseKind::kBriefing: return "briefing";
    case PhaseKind::kObserving: return "observing";
    case PhaseKind::kEliciting: return "eliciting";
    case PhaseKind::kPredicting: return "predicting";
    case PhaseKind::kIntervention: return "intervention";
    case PhaseKind::kDone: return "done";
  }
  return "?";
}

nlohmann::json phase_to_json(const Phase& phase) {
  nlohmann::json j = {{"name", phase_name(phase.kind)}};
  if (phase.kind == PhaseKind::kEliciting || phase.kind == PhaseKind::kPredicting) j["round"] = phase.round;
  if (phase.kind == PhaseKind::kObserving || phase.kind == PhaseKind::kPredicting) j["index"] = phase.index;
  return j;
}

std::string_view event_kind_text(EventKind kind) {
  switch (kind) {
    case EventKind::kStarted: return "started";
    case EventKind::kBriefingAck: return "briefing_ack";
    case EventKind::kObservationAck: return "observation_ack";
    case EventKind::kElicitationSubmitted: return "elicitation_submitted";
    case EventKind::kPredictionSubmitted: return "prediction_submitted";
    case EventKind::kInterventionAck: return "intervention_ack";
  }
  return "?";
}

std::optional<EventKind> parse_event_kind(std::string_view text) {
  for (auto k : {EventKind::kStarted, EventKind::kBriefingAck, EventKind::kObservationAck,
                 EventKind::kElicitationSubmitted, EventKind::kPredictionSubmitted, EventKind::kInterventionAck})
    if (event_kind_text(k) == text) return k;
  return std::nullopt;
}

bool same_event(const SessionEvent& a, const SessionEvent& b) {
  return a.seq == b.seq && a.kind == b.kind && a.payload == b.payload;
}

std::int64_t now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

std::shared_ptr<const Stimuli> prepare_stimuli(const Study& study, std::uint64_t seed, MenuShortfall shortfall) {
  auto st = std::make_shared<Stimuli>();
  st->study = study;
  // Each session draws its own observation and prediction streams; the
  // selection list is shared by every participant of the study.
  st->study.observation_params.seed = mix_seeds(study.observation_params.seed, seed);
  st->observations = generate_observations(st->study);
  const std::uint64_t m = study.prediction_params.count;
  st->prediction_pool = generate_prediction_items(st->study, st->observations, 2 * m);
  for (std::size_t i = 0; i < st->prediction_pool.items.size(); ++i) {
    PredictionItem item = st->prediction_pool.items[i];
    int round = i < m ? 0 : 1;
    item.index = round == 0 ? i : i - m;
    st->rounds[round].push_back(std::move(item));
  }
  st->menu = build_menu(study, study.menu_params.seed, shortfall);
  st->fingerprint = stimuli_digest(*st);
  return st;
}

bool replay_equal(const SessionState& a, const SessionState& b) {
  if (a.session_id != b.session_id || a.study_fingerprint != b.study_fingerprint || a.condition != b.condition ||
      a.seed != b.seed || a.phase != b.phase || a.observation_cursor != b.observation_cursor ||
      a.elicitations != b.elicitations || a.predictions != b.predictions || a.events.size() != b.events.size())
    return false;
  if ((a.stimuli == nullptr) != (b.stimuli == nullptr)) return false;
  if (a.stimuli && a.stimuli->fingerprint != b.stimuli->fingerprint) return false;
  return std::equal(a.events.begin(), a.events.end(), b.events.begin(), same_event);
}

SessionState create_session(const Study& study, Condition condition, std::uint64_t seed, std::string session_id,
                            std::int64_t ts) {
  SessionState s;
  s.session_id = std::move(session_id);
  s.study_fingerprint = study_fingerprint(study);
  s.condition = condition;
  s.seed = seed;
  s.stimuli = prepare_stimuli(study, seed);
  s.phase = {PhaseKind::kBriefing};
  SessionEvent started;
  started.seq = 0;
  started.ts = ts;
  started.kind = EventKind::kStarted;
  started.payload = {{"session_id", s.session_id},
                     {"study_fingerprint", s.study_fingerprint},
                     {"condition", std::string(condition_text(condition))},
                     {"seed", seed},
                     {"stimuli_fingerprint", s.stimuli->fingerprint},
                     {"n_observations", s.stimuli->observations.size()},
                     {"n_predictions", s.stimuli->rounds[0].size()}};
  s.events.push_back(std::move(started));
  return s;
}

SessionState apply_event(const SessionState& state, const SessionEvent& event) {
  if (event.seq < state.events.size())
    throw Error(ErrorCode::kDuplicateSequence, "sequence number " + std::to_string(event.seq) + " was already applied");
  if (event.seq > state.events.size())
    throw Error(ErrorCode::kSequenceGap, "expected sequence number " + std::to_string(state.events.size()) +
                                             ", got " + std::to_string(event.seq));

  SessionState next = state;
  const std::size_t n_obs = state.stimuli->observations.size();
  const std::size_t n_pred = prediction_count(state);
  const Phase& ph = state.phase;

  switch (event.kind) {
    case EventKind::kStarted:
      throw illegal(state, "started");
    case EventKind::kBriefingAck:
      if (ph.kind != PhaseKind::kBriefing) throw illegal(state, "briefing_ack");
      next.phase = n_obs > 0 ? Phase{PhaseKind::kObserving, 0, 0} : Phase{PhaseKind::kEliciting, 1, 0};
      break;
    case EventKind::kObservationAck:
      if (ph.kind != PhaseKind::kObserving) throw illegal(state, "observation_ack");
      expect_index(event.payload, "index", ph.index, state, false);
      next.observation_cursor = ph.index + 1;
      next.phase = ph.index + 1 < n_obs ? Phase{PhaseKind::kObserving, 0, ph.index + 1}
                                        : Phase{PhaseKind::kEliciting, 1, 0};
      break;
    case EventKind::kElicitationSubmitted:
      if (ph.kind != PhaseKind::kEliciting) throw illegal(state, "elicitation_submitted");
      next.elicitations.push_back(accept_elicitation(state, event.payload));
      next.predictions.emplace_back();
      next.phase = after_elicitation(state, ph.round);
      break;
    case EventKind::kPredictionSubmitted: {
      if (ph.kind != PhaseKind::kPredicting) throw illegal(state, "prediction_submitted");
      expect_index(event.payload, "item", ph.index, state, true);
      if (!event.payload.contains("class") || !event.payload["class"].is_string())
        throw Error(ErrorCode::kInvalidPayload, "payload needs a 'class' string");
      auto cls = state.study().class_index(event.payload["class"].get<std::string>());
      if (!cls) throw Error(ErrorCode::kInvalidPayload, "undeclared class '" + event.payload["class"].get<std::string>() + "'");
      next.predictions.back().push_back({ph.index, *cls});
      if (ph.index + 1 < n_pred) next.phase = {PhaseKind::kPredicting, ph.round, ph.index + 1};
      else next.phase = ph.round == 1 ? Phase{PhaseKind::kIntervention} : Phase{PhaseKind::kDone};
      break;
    }
    case EventKind::kInterventionAck:
      if (ph.kind != PhaseKind::kIntervention) throw illegal(state, "intervention_ack");
      next.phase = {PhaseKind::kEliciting, 2, 0};
      break;
  }
  next.events.push_back(event);
  return next;
}

SessionState submit(const SessionState& state, EventKind kind, nlohmann::json payload, std::int64_t ts) {
  SessionEvent e;
  e.seq = state.next_seq();
  e.ts = ts;
  e.kind = kind;
  e.payload = std::move(payload);
  return apply_event(state, e);
}

SessionState replay(const std::vector<SessionEvent>& events, const Study& study) {
  if (events.empty() || events.front().kind != EventKind::kStarted || events.front().seq != 0)
    throw Error(ErrorCode::kMissingStarted, "event log must begin with a 'started' event at sequence 0");
  const auto& p = events.front().payload;
  std::string fingerprint = study_fingerprint(study);
  std::optional<Condition> condition;
  try {
    if (p.at("study_fingerprint").get<std::string>() != fingerprint)
      throw Error(ErrorCode::kFingerprintMismatch, "event log belongs to a different study");
    condition = parse_condition(p.at("condition").get<std::string>());
    if (!condition) throw Error(ErrorCode::kInvalidPayload, "unknown condition in 'started' event");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidPayload, std::string("malformed 'started' payload: ") + e.what());
  }
  SessionState s = create_session(study, *condition, p.at("seed").get<std::uint64_t>(),
                                  p.at("session_id").get<std::string>(), events.front().ts);
  if (p.value("stimuli_fingerprint", "") != s.stimuli->fingerprint)
    throw Error(ErrorCode::kFingerprintMismatch, "regenerated stimuli differ from the logged ones");
  for (std::size_t i = 1; i < events.size(); ++i) {
    try {
      s = apply_event(s, events[i]);
    } catch (const Error& e) {
      throw Error(e.code(), "event seq " + std::to_string(events[i].seq) + ": " + e.what());
    }
  }
  return s;
}

std::vector<ConstraintRule> select_explanations(Condition condition, const CongruenceReport& report,
                                                const RuleSet& truth) {
  std::vector<ConstraintRule> out;
  switch (condition) {
    case Condition::kNone:
      break;
    case Condition::kFull:
      out = truth.rules;
      break;
    case Condition::kTargeted:
      for (std::size_t t = 0; t < truth.size(); ++t) {
        bool flagged = std::any_of(report.relation_errors.begin(), report.relation_errors.end(),
                                   [&](const RelationError& e) { return e.truth_index == t; });
        if (flagged) out.push_back(truth.rules[t]);
      }
      break;
  }
  return out;
}

std::vector<std::string> intervention_texts(const SessionState& state) {
  if (state.elicitations.empty()) throw Error(ErrorCode::kPhaseTooEarly, "no elicitation has been submitted yet");
  const Study& study = state.study();
  if (state.condition == Condition::kNone) return {std::string(kFillerText)};
  CongruenceReport pre = congruence_report(state.elicitations.front(), study.truth, study.features);
  std::vector<std::string> out;
  for (const auto& r : select_explanations(state.condition, pre, study.truth))
    out.push_back(render_rule_text(r, study.features, study.classes));
  return out;
}

SessionReport session_report(const SessionState& state, const CompositeWeights& weights) {
  const PhaseKind k = state.phase.kind;
  bool round_one_done = k == PhaseKind::kIntervention || k == PhaseKind::kDone ||
                        (state.elicitations.size() >= 1 &&
                         (k == PhaseKind::kEliciting || k == PhaseKind::kPredicting) && state.phase.round == 2);
  if (!round_one_done)
    throw Error(ErrorCode::kPhaseTooEarly, "the first elicitation and prediction round is not complete");

  const Study& study = state.study();
  auto accuracy = [&](int round) {
    const auto& answers = state.predictions.at(static_cast<std::size_t>(round));
    const auto& items = state.stimuli->rounds[round];
    if (answers.empty()) return 1.0;
    std::size_t hits = 0;
    for (const auto& a : answers)
      if (items.at(a.item).truth_label == a.cls) ++hits;
    return static_cast<double>(hits) / static_cast<double>(answers.size());
  };

  SessionReport rep;
  rep.session_id = state.session_id;
  rep.condition = state.condition;
  rep.seed = state.seed;
  rep.n_observations = state.stimuli->observations.size();
  rep.n_predictions = prediction_count(state);
  rep.pre = congruence_report(state.elicitations.at(0), study.truth, study.features, weights);
  rep.prediction_accuracy_pre = accuracy(0);
  rep.completed = k == PhaseKind::kDone;
  if (rep.completed) {
    rep.post = congruence_report(state.elicitations.at(1), study.truth, study.features, weights);
    rep.delta = congruence_delta(rep.pre, *rep.post, study.features);
    rep.prediction_accuracy_post = accuracy(1);
  }
  if (!state.events.empty()) rep.duration_ms = state.events.back().ts - state.events.front().ts;
  return rep;
}

nlohmann::json session_report_to_json(const SessionReport& r, const Study& study) {
  nlohmann::json j = {{"session_id", r.session_id},
                      {"condition", std::string(condition_text(r.condition))},
                      {"seed", r.seed},
                      {"pre", report_to_json(r.pre, study)},
                      {"post", nullptr},
                      {"delta", nullptr},
                      {"prediction_accuracy_pre", r.prediction_accuracy_pre},
                      {"prediction_accuracy_post", nullptr},
                      {"n_observations", r.n_observations},
                      {"n_predictions", r.n_predictions},
                      {"duration_ms", r.duration_ms},
                      {"completed", r.completed}};
  if (r.post) j["post"] = report_to_json(*r.post, study);
  if (r.delta) j["delta"] = delta_to_json(*r.delta, study);
  if (r.prediction_accuracy_post) j["prediction_accuracy_post"] = *r.prediction_accuracy_post;
  return j;
}

}  // namespace mma
