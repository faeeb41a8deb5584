#pragma once

// Full sessions driven by bots, through the same event path as live participants.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mma/bots.hpp"
#include "mma/session.hpp"

namespace mma {

struct SimulatedSession {
  std::size_t index = 0;
  SessionState state;
  SessionReport report;
  Bot bot;
};

/// Runs one complete session. Bot timestamps are logical (ts = seq), so logs
/// and reports are reproducible byte for byte.
SimulatedSession run_bot_session(const Study& study, BotSpec bot, Condition condition, std::uint64_t session_seed,
                                 std::size_t index = 0);

struct SimulationConfig {
  BotSpec bot;
  Condition condition = Condition::kNone;
  std::size_t n = 20;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

std::uint64_t session_seed(std::uint64_t run_seed, std::size_t index);
std::string simulated_session_id(std::uint64_t session_seed);

/// Sessions come back ordered by index whatever the thread count.
std::vector<SimulatedSession> simulate(const Study& study, const SimulationConfig& config);

struct Quartiles {
  double median = 0;
  double q1 = 0;
  double q3 = 0;
  double iqr = 0;
  std::size_t n = 0;
};

/// Linear interpolation between order statistics. Empty input gives n = 0.
Quartiles quartiles(std::vector<double> values);

/// 1-based ranks; tied values share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

/// Pearson correlation of average ranks; 0 when either sample is constant.
/// Throws InvalidValue on samples of different length.
double spearman(std::span<const double> xs, std::span<const double> ys);

/// Median/IQR per metric plus one report per session; contains no wall-clock data.
nlohmann::json summary_json(const Study& study, const SimulationConfig& config,
                            const std::vector<SimulatedSession>& sessions);

/// Fraction of profiles on which the bot's current model agrees with the Mock-Up label.
double domain_accuracy(Bot& bot, const Study& study, std::span<const PatientProfile> domain);

}  // namespace mma
