#include "mma/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <thread>

#include "mma/error.hpp"
#include "mma/serialization.hpp"

namespace mma {

std::uint64_t session_seed(std::uint64_t run_seed, std::size_t index) {
  return mix_seeds(stream_seed(run_seed, Stream::kSession), index);
}

std::string simulated_session_id(std::uint64_t seed) { return "sim-" + hex64(seed); }

SimulatedSession run_bot_session(const Study& study, BotSpec spec, Condition condition, std::uint64_t seed,
                                 std::size_t index) {
  spec.seed = stream_seed(seed, Stream::kBot);
  SessionState s = create_session(study, condition, seed, simulated_session_id(seed), 0);
  const Stimuli& st = *s.stimuli;
  Bot bot(spec, st.study.features, st.study.classes.size(), st.menu);
  auto step = [&](EventKind kind, nlohmann::json payload) {
    auto ts = static_cast<std::int64_t>(s.next_seq());
    s = submit(s, kind, std::move(payload), ts);
  };

  step(EventKind::kBriefingAck, nlohmann::json::object());
  for (const auto& obs : st.observations) {
    bot.observe(obs);
    step(EventKind::kObservationAck, {{"index", obs.index}});
  }
  for (int round = 0; round < 2; ++round) {
    if (round == 1) {
      CongruenceReport pre = congruence_report(s.elicitations.front(), st.study.truth, st.study.features);
      bot.learn(select_explanations(condition, pre, st.study.truth));
      step(EventKind::kInterventionAck, nlohmann::json::object());
    }
    step(EventKind::kElicitationSubmitted, rules_to_json(bot.elicit(st.study.truth), st.study));
    for (const auto& item : st.rounds[round])
      step(EventKind::kPredictionSubmitted,
           {{"item", item.index}, {"class", st.study.classes.at(bot.predict(item.profile))}});
  }
  SessionReport report = session_report(s);
  return SimulatedSession{index, std::move(s), std::move(report), std::move(bot)};
}

std::vector<SimulatedSession> simulate(const Study& study, const SimulationConfig& config) {
  std::vector<std::optional<SimulatedSession>> slots(config.n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= config.n) return;
      try {
        slots[i] = run_bot_session(study, config.bot, config.condition, session_seed(config.seed, i), i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = config.n;
      }
    }
  };
  unsigned threads = std::clamp<unsigned>(config.threads, 1, 64);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  std::vector<SimulatedSession> out;
  out.reserve(config.n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

Quartiles quartiles(std::vector<double> v) {
  Quartiles q;
  q.n = v.size();
  if (v.empty()) return q;
  std::sort(v.begin(), v.end());
  auto at = [&](double p) {
    double h = p * static_cast<double>(v.size() - 1);
    auto lo = static_cast<std::size_t>(h);
    std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  q.median = at(0.5);
  q.q1 = at(0.25);
  q.q3 = at(0.75);
  q.iqr = q.q3 - q.q1;
  return q;
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw Error(ErrorCode::kInvalidValue, "rank correlation needs equally long samples");
  const std::size_t n = xs.size();
  if (n < 2) return 0.0;
  std::vector<double> rx = average_ranks(xs), ry = average_ranks(ys);
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

nlohmann::json summary_json(const Study& study, const SimulationConfig& config,
                            const std::vector<SimulatedSession>& sessions) {
  using Pick = std::function<std::optional<double>(const SessionReport&)>;
  const std::vector<std::pair<std::string, Pick>> metrics = {
      {"pre_recall", [](const SessionReport& r) { return std::optional(r.pre.element_recall); }},
      {"pre_precision", [](const SessionReport& r) { return std::optional(r.pre.element_precision); }},
      {"pre_relation_acc", [](const SessionReport& r) { return std::optional(r.pre.relation_accuracy); }},
      {"pre_composite", [](const SessionReport& r) { return std::optional(r.pre.composite); }},
      {"post_recall",
       [](const SessionReport& r) { return r.post ? std::optional(r.post->element_recall) : std::nullopt; }},
      {"post_precision",
       [](const SessionReport& r) { return r.post ? std::optional(r.post->element_precision) : std::nullopt; }},
      {"post_relation_acc",
       [](const SessionReport& r) { return r.post ? std::optional(r.post->relation_accuracy) : std::nullopt; }},
      {"post_composite",
       [](const SessionReport& r) { return r.post ? std::optional(r.post->composite) : std::nullopt; }},
      {"delta_composite",
       [](const SessionReport& r) { return r.delta ? std::optional(r.delta->composite) : std::nullopt; }},
      {"pred_acc_pre", [](const SessionReport& r) { return std::optional(r.prediction_accuracy_pre); }},
      {"pred_acc_post", [](const SessionReport& r) { return r.prediction_accuracy_post; }},
  };

  nlohmann::json stats = nlohmann::json::object();
  for (const auto& [name, pick] : metrics) {
    std::vector<double> values;
    for (const auto& s : sessions)
      if (auto v = pick(s.report)) values.push_back(*v);
    Quartiles q = quartiles(values);
    if (q.n == 0) {
      stats[name] = {{"n", 0}, {"median", nullptr}, {"q1", nullptr}, {"q3", nullptr}, {"iqr", nullptr}};
    } else {
      stats[name] = {{"n", q.n}, {"median", q.median}, {"q1", q.q1}, {"q3", q.q3}, {"iqr", q.iqr}};
    }
  }

  nlohmann::json rows = nlohmann::json::array();
  for (const auto& s : sessions) rows.push_back(session_report_to_json(s.report, study));

  return {{"format", 1},
          {"study", study.name},
          {"study_fingerprint", study_fingerprint(study)},
          {"bot", config.bot.text()},
          {"condition", std::string(condition_text(config.condition))},
          {"n", config.n},
          {"seed", config.seed},
          {"metrics", stats},
          {"sessions", rows}};
}

double domain_accuracy(Bot& bot, const Study& study, std::span<const PatientProfile> domain) {
  if (domain.empty()) return 1.0;
  std::size_t hits = 0;
  for (const auto& p : domain)
    if (bot.predict(p) == classify(study.truth, study.base_scores, p).label) ++hits;
  return static_cast<double>(hits) / static_cast<double>(domain.size());
}

}  // namespace mma
