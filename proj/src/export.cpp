#include "mma/export.hpp"

#include <cmath>

namespace mma {

std::string format_metric(double v) {
  double r = std::round(v * 10000.0) / 10000.0;
  if (r == 0) r = 0;  // no "-0.0"
  return format_number(r, true);
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string csv_row(const SessionReport& r) {
  std::vector<std::string> f;
  f.push_back(csv_field(r.session_id));
  f.push_back(csv_field(condition_text(r.condition)));
  f.push_back(std::to_string(r.seed));
  f.push_back(std::to_string(r.n_observations));
  f.push_back(format_metric(r.pre.element_recall));
  f.push_back(format_metric(r.pre.element_precision));
  f.push_back(format_metric(r.pre.relation_accuracy));
  f.push_back(format_metric(r.pre.composite));
  if (r.post) {
    f.push_back(format_metric(r.post->element_recall));
    f.push_back(format_metric(r.post->element_precision));
    f.push_back(format_metric(r.post->relation_accuracy));
    f.push_back(format_metric(r.post->composite));
  } else {
    f.insert(f.end(), 4, "");
  }
  f.push_back(r.delta ? format_metric(r.delta->composite) : "");
  f.push_back(format_metric(r.prediction_accuracy_pre));
  f.push_back(r.prediction_accuracy_post ? format_metric(*r.prediction_accuracy_post) : "");
  f.push_back(r.completed ? "true" : "false");

  std::string out;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (i) out += ',';
    out += f[i];
  }
  return out;
}

std::string csv_document(std::span<const SessionReport> reports) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& r : reports) out += csv_row(r) + '\n';
  return out;
}

}  // namespace mma
