#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "eegspec/dataset.hpp"

namespace eegspec {

// counts[true][predicted]
struct ConfusionMatrix {
  std::vector<std::vector<std::uint64_t>> counts;
  std::vector<std::string> class_names;

  std::size_t k() const { return counts.size(); }
  std::uint64_t Total() const;
  std::uint64_t Trace() const;
  // Rows scaled to sum 1 (rows without examples stay zero).
  std::vector<std::vector<double>> RowNormalized() const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix MakeConfusionMatrix(std::span<const int> preds, std::span<const int> truths, std::size_t k,
                                    std::vector<std::string> class_names = {});

// trace / total; throws on an empty matrix.
double Accuracy(const ConfusionMatrix& cm);

struct SubjectResult {
  std::uint16_t subject_id = 0;
  double accuracy = 0.0;
  ConfusionMatrix confusion;
  Scheme scheme = Scheme::kFourClass;
  std::uint64_t split_seed = 0;
  SplitStrategy strategy = SplitStrategy::kPerExampleStratified;

  friend bool operator==(const SubjectResult&, const SubjectResult&) = default;
};

SubjectResult MakeSubjectResult(std::uint16_t subject_id, ConfusionMatrix confusion, Scheme scheme,
                                std::uint64_t split_seed, SplitStrategy strategy);

struct SubjectTable {
  struct Row {
    std::uint16_t subject_id = 0;
    double accuracy = 0.0;
  };
  std::vector<Row> rows;  // ascending subject id
  double average = 0.0;   // arithmetic mean of the row accuracies
};

SubjectTable MakeSubjectTable(std::span<const SubjectResult> results);

// Percentage of a [0, 1] accuracy, half-up at two decimals, e.g. "87.36".
std::string FormatPercent(double accuracy);

// Subject,Accuracy / S1,86.51% / ... / Average,87.36%
std::string TableToCsv(const SubjectTable& table);
// Accuracies parsed back from TableToCsv output, as fractions.
SubjectTable TableFromCsv(const std::string& csv);

// {"scheme", "class_names", "subjects": [{"id","accuracy","confusion","seed",
// "strategy"}], "average", "average_percent", optional "config"}
std::string ResultsToJson(std::span<const SubjectResult> results, const std::string& resolved_config = "");
std::vector<SubjectResult> ResultsFromJson(const std::string& json);

// Heat image of raw counts, `cell` pixels per matrix cell, brightest = max.
void ExportConfusionImage(const ConfusionMatrix& cm, const std::filesystem::path& path, std::size_t cell = 32);

}  // namespace eegspec
