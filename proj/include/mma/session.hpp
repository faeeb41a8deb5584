#pragma once

// Event-sourced participant sessions.
//
// A session walks a fixed phase graph:
//   Briefing -> Observing(0..N-1) -> Eliciting(1) -> Predicting(1, 0..M-1)
//   -> Intervention -> Eliciting(2) -> Predicting(2, 0..M-1) -> Done
// and its state is a pure fold of its event log. All stimuli are generated
// when the session is created so that (study, condition, seed, events)
// reproduce it exactly.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mma/congruence.hpp"
#include "mma/profile_gen.hpp"
#include "mma/study.hpp"

namespace mma {

enum class Condition { kNone, kFull, kTargeted };

std::string_view condition_text(Condition c);
std::optional<Condition> parse_condition(std::string_view text);

enum class PhaseKind { kBriefing, kObserving, kEliciting, kPredicting, kIntervention, kDone };

struct Phase {
  PhaseKind kind = PhaseKind::kBriefing;
  int round = 0;          // Eliciting / Predicting
  std::size_t index = 0;  // Observing / Predicting

  bool operator==(const Phase&) const = default;
};

std::string phase_name(PhaseKind kind);
nlohmann::json phase_to_json(const Phase& phase);

enum class EventKind {
  kStarted,
  kBriefingAck,
  kObservationAck,
  kElicitationSubmitted,
  kPredictionSubmitted,
  kInterventionAck,
};

std::string_view event_kind_text(EventKind kind);
std::optional<EventKind> parse_event_kind(std::string_view text);

struct SessionEvent {
  std::uint64_t seq = 0;
  std::int64_t ts = 0;  // ms since epoch, informational only
  EventKind kind = EventKind::kStarted;
  nlohmann::json payload = nlohmann::json::object();
};

/// Equality ignoring timestamps.
bool same_event(const SessionEvent& a, const SessionEvent& b);

std::int64_t now_ms();

struct Stimuli {
  Study study;  // with session-derived seeds
  std::vector<Observation> observations;
  PredictionSet prediction_pool;  // both rounds, 2M items
  std::vector<PredictionItem> rounds[2];
  ClauseMenu menu;
  std::string fingerprint;
};

/// Deterministic stimuli for (study, session seed). Throws CoverageUnsatisfiable
/// or MenuExhausted.
std::shared_ptr<const Stimuli> prepare_stimuli(const Study& study, std::uint64_t seed,
                                               MenuShortfall shortfall = MenuShortfall::kClamp);

struct PredictionAnswer {
  std::size_t item = 0;
  std::size_t cls = 0;
  bool operator==(const PredictionAnswer&) const = default;
};

struct SessionState {
  std::string session_id;
  std::string study_fingerprint;
  Condition condition = Condition::kNone;
  std::uint64_t seed = 0;
  std::shared_ptr<const Stimuli> stimuli;

  Phase phase;
  std::size_t observation_cursor = 0;  // observations acknowledged so far
  std::vector<RuleSet> elicitations;   // one per completed round
  std::vector<std::vector<PredictionAnswer>> predictions;  // per round
  std::vector<SessionEvent> events;

  const Study& study() const { return stimuli->study; }
  std::uint64_t next_seq() const { return events.size(); }
};

/// Equality of everything but timestamps.
bool replay_equal(const SessionState& a, const SessionState& b);

SessionState create_session(const Study& study, Condition condition, std::uint64_t seed,
                            std::string session_id, std::int64_t ts = now_ms());

/// Pure transition. Throws IllegalTransition, MenuViolation, InvalidPayload,
/// DuplicateSequence or SequenceGap; the input state is never modified.
SessionState apply_event(const SessionState& state, const SessionEvent& event);

/// Convenience: builds the event with the next sequence number and applies it.
SessionState submit(const SessionState& state, EventKind kind, nlohmann::json payload = nlohmann::json::object(),
                    std::int64_t ts = now_ms());

/// Rebuilds a session from its log. Errors name the offending sequence number.
SessionState replay(const std::vector<SessionEvent>& events, const Study& study);

std::vector<ConstraintRule> select_explanations(Condition condition, const CongruenceReport& report,
                                                const RuleSet& truth);

inline constexpr std::string_view kFillerText =
    "Please take a short break. When you are ready, continue to describe the AI's rules once more.";

/// Explanation texts for the Intervention phase (filler for condition none).
std::vector<std::string> intervention_texts(const SessionState& state);

struct SessionReport {
  std::string session_id;
  Condition condition = Condition::kNone;
  std::uint64_t seed = 0;
  CongruenceReport pre;
  std::optional<CongruenceReport> post;
  std::optional<CongruenceDelta> delta;
  double prediction_accuracy_pre = 0;
  std::optional<double> prediction_accuracy_post;
  std::size_t n_observations = 0;
  std::size_t n_predictions = 0;
  std::int64_t duration_ms = 0;
  bool completed = false;
};

/// Throws PhaseTooEarly until the first prediction round is complete.
SessionReport session_report(const SessionState& state, const CompositeWeights& weights = {});

nlohmann::json session_report_to_json(const SessionReport& report, const Study& study);

}  // namespace mma
