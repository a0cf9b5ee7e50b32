#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "spamtopic/pipeline.hpp"

namespace spamtopic::eval {

using nlohmann::ordered_json;

namespace {

ordered_json averages_json(const Averages& a) {
  return ordered_json{{"precision", a.precision}, {"recall", a.recall}, {"f1", a.f1}};
}

ordered_json report_json(const MetricsReport& r) {
  ordered_json per_class = ordered_json::array();
  for (std::size_t c = 0; c < r.classes.size(); ++c) {
    const auto& m = r.per_class[c];
    per_class.push_back({{"class", r.classes[c]},
                         {"precision", m.precision},
                         {"recall", m.recall},
                         {"f1", m.f1},
                         {"accuracy", m.accuracy},
                         {"support", m.support}});
  }
  ordered_json j{{"accuracy", r.accuracy},
                 {"macro", averages_json(r.macro)},
                 {"micro", averages_json(r.micro)},
                 {"weighted", averages_json(r.weighted)},
                 {"runtime_ms_per_email", r.runtime_ms_per_email ? ordered_json(*r.runtime_ms_per_email) : ordered_json()},
                 {"per_class", per_class},
                 {"confusion", {{"classes", r.confusion.classes}, {"counts", r.confusion.counts}}}};
  return j;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width, bool left_align) {
  if (s.size() >= width) return s;
  return left_align ? s + std::string(width - s.size(), ' ') : std::string(width - s.size(), ' ') + s;
}

std::string render(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths;
  for (const auto& row : rows) {
    if (widths.size() < row.size()) widths.resize(row.size(), 0);
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
  }
  std::string out;
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) line += "  ";
      line += pad(row[c], widths[c], c == 0);
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + '\n';
  }
  return out;
}

}  // namespace

std::string report_to_json(const MetricsReport& report) { return report_json(report).dump(2); }

std::string grid_to_json(const GridReport& grid) {
  ordered_json rows = ordered_json::array();
  for (const auto& row : grid.rows) {
    ordered_json r{{"encoder", to_string(row.encoder)},
                   {"classifier", models::short_name(row.algorithm)},
                   {"pipeline", std::string(to_string(row.encoder)) + "+" + std::string(models::to_string(row.algorithm))},
                   {"status", row.skipped ? "skipped" : "ok"}};
    if (row.skipped) r["reason"] = row.skip_reason;
    if (row.report) r["metrics"] = report_json(*row.report);
    rows.push_back(std::move(r));
  }
  ordered_json baseline{{"keywords_per_class", grid.baseline.model.top},
                        {"train_accuracy", grid.baseline.train_accuracy},
                        {"cv_accuracy", grid.baseline.cv.accuracy},
                        {"cv_macro_f1", grid.baseline.cv.macro.f1},
                        {"keywords", grid.baseline.model.keywords}};
  ordered_json j{{"documents", grid.documents},
                 {"folds", grid.folds},
                 {"seed", grid.seed},
                 {"balance", balance::to_string(grid.balance)},
                 {"rows", rows},
                 {"keyword_baseline", baseline},
                 {"warnings", grid.warnings}};
  return j.dump(2);
}

std::string grid_to_table(const GridReport& grid) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"pipeline", "macro_p", "macro_r", "macro_f1", "micro_p", "micro_r", "micro_f1", "weighted_p",
                  "weighted_r", "weighted_f1", "acc", "rt_ms"});
  std::vector<std::string> notes;
  for (const auto& row : grid.rows) {
    std::vector<std::string> cells{std::string(to_string(row.encoder)) + "+" + std::string(models::short_name(row.algorithm))};
    if (row.skipped || !row.report) {
      cells.resize(12, "-");
      notes.push_back(cells[0] + " skipped: " + row.skip_reason);
    } else {
      const auto& r = *row.report;
      for (const auto* a : {&r.macro, &r.micro, &r.weighted}) {
        cells.push_back(fixed(a->precision, 3));
        cells.push_back(fixed(a->recall, 3));
        cells.push_back(fixed(a->f1, 3));
      }
      cells.push_back(fixed(r.accuracy, 3));
      cells.push_back(r.runtime_ms_per_email ? fixed(*r.runtime_ms_per_email, 3) : "-");
    }
    rows.push_back(std::move(cells));
  }
  std::string out = render(rows);
  for (const auto& n : notes) out += n + "\n";
  out += "\nkeyword baseline (top " + std::to_string(grid.baseline.model.top) +
         "): train acc " + fixed(grid.baseline.train_accuracy, 3) + ", cv acc " + fixed(grid.baseline.cv.accuracy, 3) +
         "\n";
  out += "documents " + std::to_string(grid.documents) + ", folds " + std::to_string(grid.folds) + ", balance " +
         std::string(balance::to_string(grid.balance)) + ", seed " + std::to_string(grid.seed) + "\n";
  return out;
}

std::string report_to_table(const MetricsReport& report) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"class", "precision", "recall", "f1", "accuracy", "support"});
  for (std::size_t c = 0; c < report.classes.size(); ++c) {
    const auto& m = report.per_class[c];
    rows.push_back({report.classes[c], fixed(m.precision, 3), fixed(m.recall, 3), fixed(m.f1, 3), fixed(m.accuracy, 3),
                    std::to_string(m.support)});
  }
  rows.push_back({"macro", fixed(report.macro.precision, 3), fixed(report.macro.recall, 3), fixed(report.macro.f1, 3)});
  rows.push_back({"micro", fixed(report.micro.precision, 3), fixed(report.micro.recall, 3), fixed(report.micro.f1, 3)});
  rows.push_back(
      {"weighted", fixed(report.weighted.precision, 3), fixed(report.weighted.recall, 3), fixed(report.weighted.f1, 3)});
  std::string out = render(rows);
  out += "\naccuracy " + fixed(report.accuracy, 4);
  if (report.runtime_ms_per_email) out += ", runtime " + fixed(*report.runtime_ms_per_email, 3) + " ms/email";
  out += "\n";
  return out;
}

std::string confusion_to_csv(const ConfusionMatrix& cm) {
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  };
  std::ostringstream out;
  out << "true\\predicted";
  for (const auto& c : cm.classes) out << ',' << quote(c);
  out << '\n';
  for (std::size_t i = 0; i < cm.classes.size(); ++i) {
    out << quote(cm.classes[i]);
    for (std::size_t v : cm.counts[i]) out << ',' << v;
    out << '\n';
  }
  return out.str();
}

std::string runtime_to_json(const RuntimeReport& report) {
  return ordered_json{{"pipeline", report.pipeline},
                      {"documents", report.documents},
                      {"mean_ms_per_email", report.mean_ms},
                      {"p95_ms_per_email", report.p95_ms}}
      .dump(2);
}

}  // namespace spamtopic::eval
