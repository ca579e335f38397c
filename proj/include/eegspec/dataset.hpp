#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eegspec/filters.hpp"
#include "eegspec/stft.hpp"
#include "eegspec/trial_store.hpp"

namespace eegspec {

enum class Scheme { kFourClass, kThreeClass };

// Class indices: hand 0, elbow 1, forearm 2, rest 3 (four-class only).
enum class MergedLabel : std::uint8_t {
  kHandMovement = 0,
  kElbowMovement = 1,
  kForearmMovement = 2,
  kRest = 3,
};

std::size_t NumClasses(Scheme scheme);
std::vector<std::string> ClassNames(Scheme scheme);
std::string_view SchemeName(Scheme scheme);
std::optional<Scheme> ParseScheme(std::string_view name);
std::string_view MergedLabelName(MergedLabel label);

// Opposing movements of the same joint collapse into one class. Under the
// three-class scheme rest has no class and the trial is dropped.
std::optional<MergedLabel> MergeClasses(RawLabel raw, Scheme scheme);

// First n samples of every channel.
Trial SliceTrial(const Trial& t, std::size_t n = kPaperSliceLength);

struct ExampleKey {
  std::uint16_t subject_id = 0;
  std::uint16_t run_index = 0;
  std::uint16_t trial_index = 0;
  std::uint16_t channel_index = 0;  // 0-based
  MergedLabel label = MergedLabel::kRest;

  // "s{subject}r{run}t{trial}c{channel}"
  std::string Id() const;
  auto SortKey() const { return std::array<int, 4>{subject_id, run_index, trial_index, channel_index}; }

  friend bool operator==(const ExampleKey&, const ExampleKey&) = default;
};

struct Example {
  ExampleKey key;
  StackedSpectrogram stacked;
};

// Keys that BuildExamples would produce, without computing spectrograms.
std::vector<ExampleKey> EnumerateExamples(const TrialSet& set, Scheme scheme);

// Trials of a single subject, preserving order.
TrialSet SubjectSubset(const TrialSet& set, std::uint16_t subject_id);
std::vector<std::uint16_t> SubjectIds(const TrialSet& set);

// Per (trial, channel): cascades in order over the full trial, slice to
// slice_len, STFT, log power, three-component stack. Output is sorted by
// (subject, run, trial, channel).
std::vector<Example> BuildExamples(const TrialSet& set, std::span<const SosCascade> cascades, const StftConfig& cfg,
                                   Scheme scheme, std::size_t slice_len = kPaperSliceLength);

// Filtered, sliced log-power spectrogram of one channel.
Spectrogram ChannelSpectrogram(const Trial& t, std::size_t channel, std::span<const SosCascade> cascades,
                               const StftConfig& cfg, std::size_t slice_len = kPaperSliceLength);

enum class SplitStrategy { kPerExampleStratified, kPerTrialGrouped };
std::string_view SplitStrategyName(SplitStrategy s);
std::optional<SplitStrategy> ParseSplitStrategy(std::string_view name);

struct SplitRatios {
  unsigned train = 7;
  unsigned val = 1;
  unsigned test = 2;

  friend bool operator==(const SplitRatios&, const SplitRatios&) = default;
};

struct SplitManifest {
  std::vector<std::string> train, val, test;
  std::uint64_t seed = 0;
  SplitStrategy strategy = SplitStrategy::kPerExampleStratified;

  friend bool operator==(const SplitManifest&, const SplitManifest&) = default;
};

// Allocation of n items across the three partitions: floor shares, then
// leftovers one at a time to train, test, val.
std::array<std::size_t, 3> AllocateSplit(std::size_t n, const SplitRatios& ratios);

// Stratified by label. Keys are sorted canonically first, so the result does
// not depend on input order. Within each class (in class order) a seeded
// shuffle decides membership; each partition list is emitted in canonical
// order. The grouped strategy stratifies whole trials and keeps all of a
// trial's channels together.
SplitManifest Split(std::span<const ExampleKey> keys, Scheme scheme, const SplitRatios& ratios, std::uint64_t seed,
                    SplitStrategy strategy);

// {"seed":..,"strategy":..,"train":[..],"val":[..],"test":[..]} plus an
// optional "config" string.
std::string ManifestToJson(const SplitManifest& manifest, const std::string& resolved_config = "");
SplitManifest ManifestFromJson(const std::string& json);

// EXS1 example file: "EXS1", u32 count, u32 rows, u32 cols, then per
// example u16 subject, u16 run, u16 trial, u16 channel, u8 label and the
// normalised plane as rows*cols little-endian f32.
void WriteExamples(std::span<const Example> examples, const std::filesystem::path& path);
std::vector<Example> ReadExamples(const std::filesystem::path& path);

}  // namespace eegspec
