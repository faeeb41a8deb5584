// Python bindings. Structured results cross the boundary as JSON text and are
// decoded by the mma package.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "mma/congruence.hpp"
#include "mma/error.hpp"
#include "mma/event_log.hpp"
#include "mma/serialization.hpp"
#include "mma/service.hpp"
#include "mma/session.hpp"
#include "mma/simulation.hpp"
#include "mma/study.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

mma::Study load(const std::string& source) {
  mma::ParseResult parsed = mma::parse_study(source);
  if (!parsed.ok()) {
    std::string msg = "study has errors";
    for (const auto& i : parsed.issues)
      if (i.severity == mma::Severity::kError) msg += "\n  " + mma::format_issue(i);
    throw mma::Error(mma::ErrorCode::kInvalidStudy, msg);
  }
  return std::move(*parsed.study);
}

std::string validate(const std::string& source) {
  mma::ParseResult parsed = mma::parse_study(source);
  json issues = json::array();
  for (const auto& i : parsed.issues) issues.push_back(mma::issue_to_json(i));
  json out{{"ok", parsed.ok()}, {"issues", issues}};
  if (parsed.ok()) {
    out["name"] = parsed.study->name;
    out["fingerprint"] = mma::study_fingerprint(*parsed.study);
  }
  return out.dump();
}

std::string simulate(const std::string& source, const std::string& bot, const std::string& condition, std::size_t n,
                     std::uint64_t seed, unsigned threads) {
  mma::SimulationConfig config;
  config.bot = mma::BotSpec::parse(bot);
  auto c = mma::parse_condition(condition);
  if (!c) throw mma::Error(mma::ErrorCode::kInvalidValue, "condition must be none, full or targeted");
  config.condition = *c;
  config.n = n;
  config.seed = seed;
  config.threads = threads == 0 ? 1 : threads;
  mma::Study study = load(source);
  std::vector<mma::SimulatedSession> sessions;
  {
    py::gil_scoped_release release;
    sessions = mma::simulate(study, config);
  }
  return mma::summary_json(study, config, sessions).dump();
}

std::string score(const std::string& log_text, const std::string& source) {
  mma::Study study = load(source);
  mma::SessionState state = mma::replay(mma::parse_log(log_text), study);
  return mma::session_report_to_json(mma::session_report(state), study).dump();
}

std::string congruence(const std::string& source, const std::string& elicited) {
  mma::Study study = load(source);
  json j = json::parse(elicited, nullptr, false);
  if (j.is_discarded()) throw mma::Error(mma::ErrorCode::kInvalidPayload, "elicited rules are not valid JSON");
  mma::RuleSet rules = mma::rules_from_json(j, study);
  return mma::report_to_json(mma::congruence_report(rules, study.truth, study.features), study).dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Mental model analysis core";

  static py::exception<mma::Error> error(m, "Error");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const mma::Error& e) {
      py::tuple args = py::make_tuple(std::string(mma::error_code_name(e.code())), e.what());
      PyErr_SetObject(error.ptr(), args.ptr());
    }
  });

  m.def("validate", &validate, py::arg("source"), "Parse a study; JSON with ok, issues, name and fingerprint.");
  m.def("canonical", [](const std::string& source) { return mma::print_study(load(source)); }, py::arg("source"),
        "Canonical study text.");
  m.def("fingerprint", [](const std::string& source) { return mma::study_fingerprint(load(source)); },
        py::arg("source"), "Hex digest of the canonical study text.");
  m.def("simulate", &simulate, py::arg("source"), py::arg("bot"), py::arg("condition"), py::arg("n") = 20,
        py::arg("seed") = 1, py::arg("threads") = 1, "Run bot sessions; JSON summary.");
  m.def("score", &score, py::arg("log_text"), py::arg("source"), "Replay a session log; JSON report.");
  m.def("congruence", &congruence, py::arg("source"), py::arg("elicited"),
        "Score JSON rules against the study's truth; JSON report.");
  m.def("spearman", [](const std::vector<double>& xs, const std::vector<double>& ys) { return mma::spearman(xs, ys); },
        py::arg("xs"), py::arg("ys"));

  py::class_<mma::Service>(m, "Service")
      .def(py::init<std::filesystem::path>(), py::arg("data_dir"))
      .def(
          "route",
          [](mma::Service& s, const std::string& method, const std::string& path, const std::string& body) {
            mma::Response r;
            {
              py::gil_scoped_release release;
              r = s.route({method, path, body});
            }
            return py::make_tuple(r.status, r.content_type, r.body);
          },
          py::arg("method"), py::arg("path"), py::arg("body") = "")
      .def("export_csv", &mma::Service::export_csv, py::arg("study_id"))
      .def_property_readonly("study_count", &mma::Service::study_count)
      .def_property_readonly("session_count", &mma::Service::session_count);
}
