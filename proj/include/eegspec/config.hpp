#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "eegspec/dataset.hpp"
#include "eegspec/model.hpp"
#include "eegspec/stft.hpp"
#include "eegspec/trial_store.hpp"

namespace eegspec {

struct FilterParams {
  bool bandpass_enabled = true;
  int order = 8;
  double low_hz = 0.01;
  double high_hz = 200.0;
  double ripple_db = 0.5;
  bool notch_enabled = true;
  double notch_hz = 50.0;
  double notch_q = 35.0;
};

struct ImportParams {
  std::filesystem::path csv;
  TrialMeta meta;
  std::vector<std::string> channel_names;  // used when creating a new archive
};

struct ExportParams {
  ImageFormat format = ImageFormat::kPgm;
  std::string channel = "C6";  // falls back to the first channel when absent
  std::uint16_t subject = 0;   // 0 = lowest subject id in the archive
  bool dump = false;           // also write SPG1 matrices
};

// Defaults are the published pipeline parameters. Sampling rate for the
// STFT is taken from the archive at run time.
struct PipelineConfig {
  std::string preset = "paper";
  std::filesystem::path archive = "eeg.etc";
  std::filesystem::path out_dir = "out";
  FilterParams filter;
  StftConfig stft = PaperStftConfig();
  std::size_t slice_len = kPaperSliceLength;
  Scheme scheme = Scheme::kFourClass;
  SplitRatios ratios;
  std::uint64_t split_seed = 1;
  SplitStrategy strategy = SplitStrategy::kPerExampleStratified;
  TrainConfig train;
  std::vector<std::size_t> widths = {16, 32, 64, 64};
  std::size_t hidden = 128;
  SynthSpec synth;
  ImportParams import;
  ExportParams exporter;

  // Module invariants; messages name the offending key.
  void Validate() const;
  // Sorted "key=value" lines covering every key.
  std::string Resolved() const;
};

// Named presets: "paper" (default) and "reduced" (3x32x32 inputs, small
// synthetic set).
PipelineConfig PresetConfig(const std::string& name);

// Merges a "section.key=value" file (may be empty path) with overrides
// given as (key, value) pairs; overrides win. A "preset" key, from either
// source, selects the base before anything else is applied. Unknown keys
// and malformed values throw kInvalidArgument naming the key.
PipelineConfig ParseConfig(const std::filesystem::path& file,
                           const std::vector<std::pair<std::string, std::string>>& overrides = {});
PipelineConfig ParseConfigText(const std::string& text,
                               const std::vector<std::pair<std::string, std::string>>& overrides = {});

// Applies one key to an existing config (no validation).
void SetConfigValue(PipelineConfig& cfg, const std::string& key, const std::string& value);
std::string GetConfigValue(const PipelineConfig& cfg, const std::string& key);
std::vector<std::string> ConfigKeys();

}  // namespace eegspec
