#include "eegspec/eval_report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "eegspec/error.hpp"
#include "eegspec/stft.hpp"

namespace eegspec {

std::uint64_t ConfusionMatrix::Total() const {
  std::uint64_t total = 0;
  for (const auto& row : counts) {
    for (std::uint64_t v : row) total += v;
  }
  return total;
}

std::uint64_t ConfusionMatrix::Trace() const {
  std::uint64_t trace = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) trace += counts[i][i];
  return trace;
}

std::vector<std::vector<double>> ConfusionMatrix::RowNormalized() const {
  std::vector<std::vector<double>> out(k(), std::vector<double>(k(), 0.0));
  for (std::size_t i = 0; i < k(); ++i) {
    std::uint64_t row_sum = 0;
    for (std::uint64_t v : counts[i]) row_sum += v;
    if (row_sum == 0) continue;
    for (std::size_t j = 0; j < k(); ++j) out[i][j] = static_cast<double>(counts[i][j]) / static_cast<double>(row_sum);
  }
  return out;
}

ConfusionMatrix MakeConfusionMatrix(std::span<const int> preds, std::span<const int> truths, std::size_t k,
                                    std::vector<std::string> class_names) {
  if (preds.size() != truths.size()) {
    Fail(ErrorCode::kInvalidArgument, "prediction and truth lists differ in length (" + std::to_string(preds.size()) +
                                          " vs " + std::to_string(truths.size()) + ")");
  }
  if (k == 0) Fail(ErrorCode::kInvalidArgument, "confusion matrix needs at least one class");
  if (class_names.empty()) {
    for (std::size_t i = 0; i < k; ++i) class_names.push_back("class" + std::to_string(i));
  }
  if (class_names.size() != k) Fail(ErrorCode::kInvalidArgument, "class name count does not match k");
  ConfusionMatrix cm{std::vector<std::vector<std::uint64_t>>(k, std::vector<std::uint64_t>(k, 0)),
                     std::move(class_names)};
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const int t = truths[i], p = preds[i];
    if (t < 0 || p < 0 || static_cast<std::size_t>(t) >= k || static_cast<std::size_t>(p) >= k) {
      Fail(ErrorCode::kInvalidArgument, "label outside [0, " + std::to_string(k) + ") at position " + std::to_string(i));
    }
    ++cm.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
  }
  return cm;
}

double Accuracy(const ConfusionMatrix& cm) {
  const std::uint64_t total = cm.Total();
  if (total == 0) Fail(ErrorCode::kInvalidArgument, "accuracy of an empty confusion matrix");
  return static_cast<double>(cm.Trace()) / static_cast<double>(total);
}

SubjectResult MakeSubjectResult(std::uint16_t subject_id, ConfusionMatrix confusion, Scheme scheme,
                                std::uint64_t split_seed, SplitStrategy strategy) {
  SubjectResult r;
  r.subject_id = subject_id;
  r.accuracy = Accuracy(confusion);
  r.confusion = std::move(confusion);
  r.scheme = scheme;
  r.split_seed = split_seed;
  r.strategy = strategy;
  return r;
}

SubjectTable MakeSubjectTable(std::span<const SubjectResult> results) {
  if (results.empty()) Fail(ErrorCode::kInvalidArgument, "subject table needs at least one result");
  SubjectTable table;
  std::set<std::uint16_t> seen;
  for (const SubjectResult& r : results) {
    if (!seen.insert(r.subject_id).second) {
      Fail(ErrorCode::kInvalidArgument, "duplicate subject S" + std::to_string(r.subject_id));
    }
    table.rows.push_back({r.subject_id, r.accuracy});
  }
  std::sort(table.rows.begin(), table.rows.end(),
            [](const SubjectTable::Row& a, const SubjectTable::Row& b) { return a.subject_id < b.subject_id; });
  // Summed in subject order so the mean does not depend on input order.
  double sum = 0.0;
  for (const auto& row : table.rows) sum += row.accuracy;
  table.average = sum / static_cast<double>(table.rows.size());
  return table;
}

std::string FormatPercent(double accuracy) {
  // Half-up on the hundredths of a percent. The small guard absorbs binary
  // representation error on exact decimal ties such as 0.87365.
  const double hundredths = std::floor(accuracy * 10000.0 + 0.5 + 1e-7);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", hundredths / 100.0);
  return buf;
}

std::string TableToCsv(const SubjectTable& table) {
  std::ostringstream os;
  os << "Subject,Accuracy\n";
  for (const auto& row : table.rows) os << "S" << row.subject_id << "," << FormatPercent(row.accuracy) << "%\n";
  os << "Average," << FormatPercent(table.average) << "%\n";
  return os.str();
}

SubjectTable TableFromCsv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != "Subject,Accuracy") Fail(ErrorCode::kFormat, "missing table header");
  SubjectTable table;
  bool have_average = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.back() != '%') Fail(ErrorCode::kFormat, "bad table row: " + line);
    const std::string name = line.substr(0, comma);
    const double pct = std::stod(line.substr(comma + 1, line.size() - comma - 2));
    if (name == "Average") {
      table.average = pct / 100.0;
      have_average = true;
    } else if (name.size() > 1 && name[0] == 'S') {
      table.rows.push_back({static_cast<std::uint16_t>(std::stoul(name.substr(1))), pct / 100.0});
    } else {
      Fail(ErrorCode::kFormat, "bad table row: " + line);
    }
  }
  if (!have_average) Fail(ErrorCode::kFormat, "table has no Average row");
  return table;
}

std::string ResultsToJson(std::span<const SubjectResult> results, const std::string& resolved_config) {
  const SubjectTable table = MakeSubjectTable(results);
  std::vector<const SubjectResult*> ordered;
  for (const SubjectResult& r : results) ordered.push_back(&r);
  std::sort(ordered.begin(), ordered.end(),
            [](const SubjectResult* a, const SubjectResult* b) { return a->subject_id < b->subject_id; });

  nlohmann::ordered_json j;
  j["scheme"] = SchemeName(ordered.front()->scheme);
  j["class_names"] = ordered.front()->confusion.class_names;
  j["subjects"] = nlohmann::ordered_json::array();
  for (const SubjectResult* r : ordered) {
    nlohmann::ordered_json s;
    s["id"] = r->subject_id;
    s["accuracy"] = r->accuracy;
    s["confusion"] = r->confusion.counts;
    s["seed"] = r->split_seed;
    s["strategy"] = SplitStrategyName(r->strategy);
    j["subjects"].push_back(std::move(s));
  }
  j["average"] = table.average;
  j["average_percent"] = FormatPercent(table.average);
  if (!resolved_config.empty()) j["config"] = resolved_config;
  return j.dump(1);
}

std::vector<SubjectResult> ResultsFromJson(const std::string& text) {
  std::vector<SubjectResult> out;
  try {
    const auto j = nlohmann::json::parse(text);
    const auto scheme = ParseScheme(j.at("scheme").get<std::string>());
    if (!scheme) Fail(ErrorCode::kFormat, "unknown scheme in results");
    const auto names = j.at("class_names").get<std::vector<std::string>>();
    for (const auto& s : j.at("subjects")) {
      SubjectResult r;
      r.subject_id = s.at("id").get<std::uint16_t>();
      r.accuracy = s.at("accuracy").get<double>();
      r.confusion.counts = s.at("confusion").get<std::vector<std::vector<std::uint64_t>>>();
      r.confusion.class_names = names;
      r.scheme = *scheme;
      r.split_seed = s.at("seed").get<std::uint64_t>();
      const auto strategy = ParseSplitStrategy(s.at("strategy").get<std::string>());
      if (!strategy) Fail(ErrorCode::kFormat, "unknown split strategy in results");
      r.strategy = *strategy;
      out.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kFormat, std::string("bad results JSON: ") + e.what());
  }
  return out;
}

void ExportConfusionImage(const ConfusionMatrix& cm, const std::filesystem::path& path, std::size_t cell) {
  if (cm.k() == 0 || cell == 0) Fail(ErrorCode::kInvalidArgument, "empty confusion image");
  std::uint64_t mx = 0;
  for (const auto& row : cm.counts) {
    for (std::uint64_t v : row) mx = std::max(mx, v);
  }
  Matrix<std::uint8_t> image(cm.k() * cell, cm.k() * cell, 0);
  for (std::size_t i = 0; i < cm.k(); ++i) {
    for (std::size_t j = 0; j < cm.k(); ++j) {
      const auto level = mx == 0 ? std::uint8_t{0}
                                 : static_cast<std::uint8_t>(std::lround(255.0 * static_cast<double>(cm.counts[i][j]) /
                                                                         static_cast<double>(mx)));
      for (std::size_t y = 0; y < cell; ++y) {
        for (std::size_t x = 0; x < cell; ++x) image(i * cell + y, j * cell + x) = level;
      }
    }
  }
  WriteGrayImage(image, path, ImageFormat::kPgm);
}

}  // namespace eegspec
