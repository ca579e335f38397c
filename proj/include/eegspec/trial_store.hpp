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

namespace eegspec {

// The seven recorded movement labels, in on-disk code order (0..6).
enum class RawLabel : std::uint8_t {
  kElbowFlexion = 0,
  kElbowExtension = 1,
  kForearmSupination = 2,
  kForearmPronation = 3,
  kHandOpen = 4,
  kHandClose = 5,
  kRest = 6,
};

inline constexpr std::size_t kNumRawLabels = 7;
inline constexpr std::array<RawLabel, kNumRawLabels> kAllRawLabels = {
    RawLabel::kElbowFlexion,      RawLabel::kElbowExtension,
    RawLabel::kForearmSupination, RawLabel::kForearmPronation,
    RawLabel::kHandOpen,          RawLabel::kHandClose,
    RawLabel::kRest};

std::string_view RawLabelName(RawLabel label);
std::optional<RawLabel> ParseRawLabel(std::string_view name);

// One labelled multi-channel recording. Samples are stored channel-major:
// sample n of channel c lives at samples[c * n_samples + n].
struct Trial {
  std::uint16_t subject_id = 0;
  std::uint16_t run_index = 0;
  std::uint16_t trial_index = 0;
  RawLabel raw_label = RawLabel::kRest;
  double fs = 0.0;
  std::size_t n_channels = 0;
  std::size_t n_samples = 0;
  std::vector<double> samples;

  std::span<const double> channel(std::size_t c) const {
    return {samples.data() + c * n_samples, n_samples};
  }
  std::span<double> channel(std::size_t c) {
    return {samples.data() + c * n_samples, n_samples};
  }

  // Throws kInvalidArgument when shape, rate or values are invalid.
  void Validate() const;

  friend bool operator==(const Trial&, const Trial&) = default;
};

struct TrialSet {
  std::vector<Trial> trials;
  std::vector<std::string> channel_names;
  double fs = 0.0;

  std::size_t n_channels() const { return channel_names.size(); }

  // Checks per-trial invariants, shared channel count and rate, and
  // uniqueness of (subject, run, trial).
  void Validate() const;

  friend bool operator==(const TrialSet&, const TrialSet&) = default;
};

// ETC1 archive I/O. See README for the byte layout.
void WriteArchive(const TrialSet& set, const std::filesystem::path& path);
TrialSet ReadArchive(const std::filesystem::path& path);

struct TrialMeta {
  std::uint16_t subject_id = 1;
  std::uint16_t run_index = 1;
  std::uint16_t trial_index = 1;
  RawLabel raw_label = RawLabel::kRest;
  double fs = 512.0;
};

// One channel per line, comma-separated samples, no header.
Trial ImportCsv(const std::filesystem::path& signal_path, const TrialMeta& meta);

struct SynthSpec {
  std::size_t n_subjects = 1;
  std::size_t n_runs = 10;
  std::size_t trials_per_class_per_run = 6;
  std::size_t n_channels = 61;
  std::size_t n_samples = 1024;
  double fs = 512.0;
  // Carrier frequency per raw label, indexed by the label code.
  std::array<double, kNumRawLabels> class_tone_hz = {20, 40, 60, 80, 100, 120, 140};
  double noise_sigma = 0.2;
  std::uint64_t seed = 1;

  void Validate() const;
};

// Trials are laid out subject-major, then run, then label code, then
// repetition. trial_index restarts at 1 within each run. Each channel is
// cos(2*pi*f*n/fs + phase) with a per-channel uniform phase, plus white
// Gaussian noise.
TrialSet SynthesizeDataset(const SynthSpec& spec);

// Per-channel phases drawn for a given trial, in channel order. Exposed so
// tests can reconstruct noiseless channels exactly.
std::vector<double> SynthPhases(const SynthSpec& spec, std::size_t trial_ordinal);

// A 61-electrode 10-10 montage (which contains "C6") when n_channels == 61,
// otherwise "Ch1".."ChN".
std::vector<std::string> DefaultChannelNames(std::size_t n_channels);

}  // namespace eegspec
