#include "mma/cli.hpp"

#include <algorithm>
#include <filesystem>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mma/bots.hpp"
#include "mma/error.hpp"
#include "mma/event_log.hpp"
#include "mma/export.hpp"
#include "mma/serialization.hpp"
#include "mma/service.hpp"
#include "mma/simulation.hpp"

namespace mma {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kBotHelp =
    "bot kind: perfect | random | forgetful:p=P | frequency:min_support=K,lift=L "
    "(defaults p=0.5, min_support=3, lift=0.3)";

struct Diagnostics {
  std::ostream& out;
  std::ostream& err;
  bool json = false;
  bool color = false;

  std::string paint(std::string_view text, const char* ansi) const {
    if (!color) return std::string(text);
    return std::string("\x1b[") + ansi + "m" + std::string(text) + "\x1b[0m";
  }

  int fail(int code, const std::string& kind, const std::string& message,
           nlohmann::json issues = nlohmann::json::array()) const {
    if (json) {
      out << nlohmann::json{{"ok", false}, {"code", kind}, {"message", message}, {"issues", issues}}.dump(2) << "\n";
    } else {
      err << paint("error", "1;31") << ": " << message << "\n";
    }
    return code;
  }

  int fail(const Error& e) const {
    return fail(e.code() == ErrorCode::kIo ? kExitIo : kExitInvalid, std::string(error_code_name(e.code())), e.what());
  }
};

struct LoadedStudy {
  Study study;
  std::vector<ParseIssue> warnings;
};

// Throws Io; parse errors come back as InvalidStudy with every issue listed.
LoadedStudy load_study(const fs::path& path, std::vector<ParseIssue>* issues_out = nullptr) {
  std::string text = read_file(path);
  ParseResult parsed = parse_study(text);
  if (issues_out) *issues_out = parsed.issues;
  if (!parsed.ok()) {
    std::string msg = path.string() + " has errors";
    for (const auto& i : parsed.issues)
      if (i.severity == Severity::kError) msg += "\n  " + path.string() + ":" + format_issue(i);
    throw Error(ErrorCode::kInvalidStudy, msg);
  }
  LoadedStudy out{std::move(*parsed.study), {}};
  for (const auto& i : parsed.issues)
    if (i.severity == Severity::kWarning) out.warnings.push_back(i);
  return out;
}

int cmd_validate(const Diagnostics& d, const std::string& file, bool strict_menu) {
  std::string text;
  try {
    text = read_file(file);
  } catch (const Error& e) {
    return d.fail(e);
  }
  ParseResult parsed = parse_study(text);
  nlohmann::json issues = nlohmann::json::array();
  for (const auto& i : parsed.issues) issues.push_back(issue_to_json(i));

  if (!parsed.ok()) {
    if (d.json) {
      d.out << nlohmann::json{{"ok", false}, {"code", "invalid_study"}, {"file", file}, {"issues", issues}}.dump(2)
            << "\n";
    } else {
      for (const auto& i : parsed.issues) {
        const char* ansi = i.severity == Severity::kError ? "1;31" : "1;33";
        d.err << file << ":" << i.line << ":" << i.column << ": "
              << d.paint(i.severity == Severity::kError ? "error" : "warning", ansi) << ": " << i.message << "\n";
      }
    }
    return kExitInvalid;
  }

  const Study& s = *parsed.study;
  std::shared_ptr<const Stimuli> st;
  try {
    st = prepare_stimuli(s, 0, strict_menu ? MenuShortfall::kThrow : MenuShortfall::kClamp);
  } catch (const Error& e) {
    return d.fail(kExitInvalid, std::string(error_code_name(e.code())), file + ": " + e.what());
  }
  std::size_t menu_atoms = st->menu.relevance_atoms.size();
  if (d.json) {
    nlohmann::json menu_warnings = st->menu.warnings;
    d.out << nlohmann::json{{"ok", true},
                            {"file", file},
                            {"study", s.name},
                            {"fingerprint", study_fingerprint(s)},
                            {"classes", s.classes.size()},
                            {"features", s.features.size()},
                            {"rules", s.truth.size()},
                            {"menu_atoms", menu_atoms},
                            {"menu_classifications", st->menu.classifications.size()},
                            {"observations", s.observation_params.count},
                            {"predictions_per_round", s.prediction_params.count},
                            {"issues", issues},
                            {"menu_warnings", menu_warnings}}
                 .dump(2)
          << "\n";
    return kExitOk;
  }
  for (const auto& i : parsed.issues)
    d.err << file << ":" << i.line << ":" << i.column << ": " << d.paint("warning", "1;33") << ": " << i.message
          << "\n";
  for (const auto& w : st->menu.warnings) d.err << file << ": " << d.paint("warning", "1;33") << ": " << w << "\n";
  d.out << file << ": ok\n"
        << "  study        " << s.name << "\n"
        << "  classes      " << s.classes.size() << "\n"
        << "  features     " << s.features.size() << "\n"
        << "  rules        " << s.truth.size() << "\n"
        << "  menu         " << menu_atoms << " atoms, " << st->menu.classifications.size() << " classifications\n"
        << "  observations " << s.observation_params.count << "\n"
        << "  predictions  " << s.prediction_params.count << " per round\n"
        << "  fingerprint  " << study_fingerprint(s) << "\n";
  return kExitOk;
}

struct SimulateArgs {
  std::string study;
  std::string bot;
  std::string condition = "none";
  std::size_t n = 20;
  std::uint64_t seed = 1;
  std::string out_dir;
  unsigned threads = 1;
  std::optional<std::uint64_t> observations;
  std::optional<std::uint64_t> demonstrate_each;
};

int cmd_simulate(const Diagnostics& d, const SimulateArgs& a) {
  SimulationConfig config;
  try {
    config.bot = BotSpec::parse(a.bot);
  } catch (const Error& e) {
    return d.fail(kExitUsage, "usage", std::string("--bot: ") + e.what());
  }
  auto condition = parse_condition(a.condition);
  if (!condition) return d.fail(kExitUsage, "usage", "--condition must be none, full or targeted");
  config.condition = *condition;
  config.n = a.n;
  config.seed = a.seed;
  config.threads = a.threads;

  try {
    Study study = load_study(a.study).study;
    if (a.observations) study.observation_params.count = *a.observations;
    if (a.demonstrate_each) study.observation_params.demonstrate_each = *a.demonstrate_each;
    auto sessions = simulate(study, config);
    nlohmann::json summary = summary_json(study, config, sessions);
    std::string summary_text = summary.dump(2) + "\n";
    if (!a.out_dir.empty()) {
      fs::path dir(a.out_dir);
      std::error_code ec;
      fs::create_directories(dir / "logs", ec);
      if (ec) throw Error(ErrorCode::kIo, "cannot create '" + (dir / "logs").string() + "': " + ec.message());
      std::vector<SessionReport> reports;
      for (const auto& s : sessions) {
        write_file(dir / "logs" / (s.state.session_id + ".log"), format_log(s.state.events));
        reports.push_back(s.report);
      }
      write_file(dir / "summary.json", summary_text);
      write_file(dir / "sessions.csv", csv_document(reports));
      write_file(dir / "study.study", print_study(study));
    }
    d.out << summary_text;
    return kExitOk;
  } catch (const Error& e) {
    return d.fail(e);
  }
}

int cmd_score(const Diagnostics& d, const std::string& log, const std::string& study_file) {
  try {
    Study study = load_study(study_file).study;
    SessionState state = replay(read_log_file(log), study);
    d.out << session_report_to_json(session_report(state), study).dump(2) << "\n";
    return kExitOk;
  } catch (const Error& e) {
    return d.fail(e);
  }
}

int cmd_export(const Diagnostics& d, const std::string& data, const std::string& study_id, const std::string& out) {
  try {
    if (!fs::is_directory(data)) throw Error(ErrorCode::kIo, "no data directory '" + data + "'");
    Service service(data);
    std::string csv = service.export_csv(study_id);
    if (out.empty() || out == "-") d.out << csv;
    else write_file(out, csv);
    return kExitOk;
  } catch (const Error& e) {
    return d.fail(e);
  }
}

int cmd_serve(const Diagnostics& d, const std::string& data, const std::string& listen, const std::string& assets) {
  try {
    Service service(data);
    return serve(service, listen, assets);
  } catch (const Error& e) {
    return d.fail(e);
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, CliOptions options) {
  CLI::App app{"Mental model analysis study platform", "mma"};
  app.require_subcommand(1);
  bool json = false;
  app.add_flag("--json", json, "machine-readable JSON on stdout");

  std::string validate_file;
  bool strict_menu = false;
  auto* validate = app.add_subcommand("validate", "check a study file and summarise it");
  validate->add_option("file", validate_file, "study file")->required();
  validate->add_flag("--strict-menu", strict_menu, "fail instead of clamping when distractors run out");
  validate->add_flag("--json", json, "machine-readable JSON on stdout");

  std::string data = "data", listen = "127.0.0.1:8080", assets;
  auto* serve_cmd = app.add_subcommand("serve", "run the HTTP API (and UI assets) until interrupted");
  serve_cmd->add_option("--data", data, "data directory")->capture_default_str();
  serve_cmd->add_option("--listen", listen, "HOST:PORT")->capture_default_str();
  serve_cmd->add_option("--assets", assets, "static asset directory");
  serve_cmd->add_flag("--json", json, "machine-readable JSON on stdout");

  SimulateArgs sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "run bot sessions and summarise them");
  simulate_cmd->add_option("--study", sim.study, "study file")->required();
  simulate_cmd->add_option("--bot", sim.bot, std::string(kBotHelp))->required();
  simulate_cmd->add_option("--condition", sim.condition, "none | full | targeted")->capture_default_str();
  simulate_cmd->add_option("--n", sim.n, "number of sessions")->capture_default_str()->check(CLI::NonNegativeNumber);
  simulate_cmd->add_option("--seed", sim.seed, "run seed")->capture_default_str();
  simulate_cmd->add_option("--out", sim.out_dir, "write summary.json, sessions.csv, study.study and logs/ here");
  simulate_cmd->add_option("--threads", sim.threads, "worker threads")->capture_default_str()->check(CLI::Range(1, 64));
  simulate_cmd->add_option("--observations", sim.observations, "override the study's observation count");
  simulate_cmd->add_option("--demonstrate-each", sim.demonstrate_each, "override demonstrate_each");
  simulate_cmd->add_flag("--json", json, "machine-readable JSON on stdout");

  std::string log_file, score_study;
  auto* score = app.add_subcommand("score", "replay a session log and print its report");
  score->add_option("--log", log_file, "session log")->required();
  score->add_option("--study", score_study, "study file")->required();
  score->add_flag("--json", json, "machine-readable JSON on stdout");

  std::string export_data, study_id, export_out;
  auto* export_cmd = app.add_subcommand("export", "write the CSV of one study's sessions");
  export_cmd->add_option("--data", export_data, "data directory")->required();
  export_cmd->add_option("--study-id", study_id, "study id")->required();
  export_cmd->add_option("--out", export_out, "output file (default stdout)");
  export_cmd->add_flag("--json", json, "machine-readable JSON on stdout");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  Diagnostics d{out, err, json, options.color};
  if (validate->parsed()) return cmd_validate(d, validate_file, strict_menu);
  if (serve_cmd->parsed()) return cmd_serve(d, data, listen, assets);
  if (simulate_cmd->parsed()) return cmd_simulate(d, sim);
  if (score->parsed()) return cmd_score(d, log_file, score_study);
  if (export_cmd->parsed()) return cmd_export(d, export_data, study_id, export_out);
  return kExitUsage;
}

}  // namespace mma
