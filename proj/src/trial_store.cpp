#include "eegspec/trial_store.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <tuple>

#include "binary_io.hpp"
#include "eegspec/error.hpp"
#include "eegspec/rng.hpp"

namespace eegspec {
namespace {

constexpr char kMagic[4] = {'E', 'T', 'C', '1'};
constexpr std::uint16_t kVersion = 1;

std::string TrialTag(const Trial& t) {
  std::ostringstream os;
  os << "s" << t.subject_id << "r" << t.run_index << "t" << t.trial_index;
  return os.str();
}

std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

Rng TrialRng(std::uint64_t seed, std::size_t ordinal) {
  return Rng(SplitMix64(seed ^ SplitMix64(static_cast<std::uint64_t>(ordinal))));
}

}  // namespace

std::string_view RawLabelName(RawLabel label) {
  switch (label) {
    case RawLabel::kElbowFlexion: return "elbow_flexion";
    case RawLabel::kElbowExtension: return "elbow_extension";
    case RawLabel::kForearmSupination: return "forearm_supination";
    case RawLabel::kForearmPronation: return "forearm_pronation";
    case RawLabel::kHandOpen: return "hand_open";
    case RawLabel::kHandClose: return "hand_close";
    case RawLabel::kRest: return "rest";
  }
  return "unknown";
}

std::optional<RawLabel> ParseRawLabel(std::string_view name) {
  for (RawLabel label : kAllRawLabels) {
    if (RawLabelName(label) == name) return label;
  }
  return std::nullopt;
}

void Trial::Validate() const {
  if (n_channels < 1) Fail(ErrorCode::kInvalidArgument, "trial " + TrialTag(*this) + " has no channels");
  if (n_samples < 1) Fail(ErrorCode::kInvalidArgument, "trial " + TrialTag(*this) + " has no samples");
  if (!(fs > 0.0) || !std::isfinite(fs)) {
    Fail(ErrorCode::kInvalidArgument, "trial " + TrialTag(*this) + " has non-positive sampling rate");
  }
  if (samples.size() != n_channels * n_samples) {
    Fail(ErrorCode::kInvalidArgument, "trial " + TrialTag(*this) + " sample matrix does not match its shape");
  }
  if (static_cast<std::uint8_t>(raw_label) >= kNumRawLabels) {
    Fail(ErrorCode::kInvalidArgument, "trial " + TrialTag(*this) + " has an unknown label");
  }
  for (double v : samples) {
    if (!std::isfinite(v)) Fail(ErrorCode::kInvalidArgument, "trial " + TrialTag(*this) + " has non-finite samples");
  }
}

void TrialSet::Validate() const {
  if (channel_names.empty()) Fail(ErrorCode::kInvalidArgument, "trial set has no channels");
  if (!(fs > 0.0)) Fail(ErrorCode::kInvalidArgument, "trial set has non-positive sampling rate");
  std::set<std::tuple<int, int, int>> seen;
  for (const Trial& t : trials) {
    t.Validate();
    if (t.n_channels != channel_names.size()) {
      Fail(ErrorCode::kInvalidArgument, "trial " + TrialTag(t) + " has " + std::to_string(t.n_channels) +
                                            " channels, set has " + std::to_string(channel_names.size()));
    }
    if (t.fs != fs) Fail(ErrorCode::kInvalidArgument, "trial " + TrialTag(t) + " sampling rate differs from set");
    if (!seen.emplace(t.subject_id, t.run_index, t.trial_index).second) {
      Fail(ErrorCode::kInvalidArgument, "duplicate trial " + TrialTag(t));
    }
  }
}

void WriteArchive(const TrialSet& set, const std::filesystem::path& path) {
  set.Validate();
  if (set.trials.size() > 0xFFFFFFFFu) Fail(ErrorCode::kInvalidArgument, "too many trials for ETC1");

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");

  detail::WriteBytes(out, kMagic, 4);
  detail::WriteLe<std::uint16_t>(out, kVersion);
  detail::WriteLe<double>(out, set.fs);
  detail::WriteLe<std::uint32_t>(out, static_cast<std::uint32_t>(set.n_channels()));
  detail::WriteLe<std::uint32_t>(out, static_cast<std::uint32_t>(set.trials.size()));
  for (const std::string& name : set.channel_names) detail::WriteString16(out, name);

  for (const Trial& t : set.trials) {
    detail::WriteLe<std::uint16_t>(out, t.subject_id);
    detail::WriteLe<std::uint16_t>(out, t.run_index);
    detail::WriteLe<std::uint16_t>(out, t.trial_index);
    detail::WriteLe<std::uint8_t>(out, static_cast<std::uint8_t>(t.raw_label));
    detail::WriteLe<std::uint32_t>(out, static_cast<std::uint32_t>(t.n_samples));
    detail::WriteBytes(out, t.samples.data(), t.samples.size() * sizeof(double));
  }
  out.flush();
  if (!out) Fail(ErrorCode::kIo, "write failed for " + path.string());
}

TrialSet ReadArchive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIo, "cannot open " + path.string());
  std::error_code ec;
  const auto file_size = std::filesystem::file_size(path, ec);
  if (ec) Fail(ErrorCode::kIo, "cannot stat " + path.string());

  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) {
    Fail(ErrorCode::kFormat, "bad magic in " + path.string());
  }
  const auto version = detail::ReadLe<std::uint16_t>(in, "version");
  if (version != kVersion) {
    Fail(ErrorCode::kFormat, "version mismatch: expected 1, found " + std::to_string(version));
  }

  TrialSet set;
  set.fs = detail::ReadLe<double>(in, "fs");
  const auto n_channels = detail::ReadLe<std::uint32_t>(in, "channel count");
  const auto n_trials = detail::ReadLe<std::uint32_t>(in, "trial count");
  set.channel_names.reserve(std::min<std::uint64_t>(n_channels, file_size / 2));
  for (std::uint32_t c = 0; c < n_channels; ++c) {
    set.channel_names.push_back(detail::ReadString16(in, "channel names"));
  }

  set.trials.reserve(std::min<std::uint64_t>(n_trials, file_size / 11));
  for (std::uint32_t i = 0; i < n_trials; ++i) {
    Trial t;
    t.subject_id = detail::ReadLe<std::uint16_t>(in, "trial header");
    t.run_index = detail::ReadLe<std::uint16_t>(in, "trial header");
    t.trial_index = detail::ReadLe<std::uint16_t>(in, "trial header");
    const auto code = detail::ReadLe<std::uint8_t>(in, "trial header");
    if (code >= kNumRawLabels) Fail(ErrorCode::kFormat, "invalid label code " + std::to_string(code));
    t.raw_label = static_cast<RawLabel>(code);
    t.n_samples = detail::ReadLe<std::uint32_t>(in, "trial header");
    t.n_channels = n_channels;
    t.fs = set.fs;
    const auto remaining = static_cast<std::uint64_t>(file_size) - static_cast<std::uint64_t>(in.tellg());
    if (static_cast<std::uint64_t>(t.n_channels) * t.n_samples * sizeof(double) > remaining) {
      Fail(ErrorCode::kFormat, "truncated file while reading trial samples");
    }
    t.samples.resize(t.n_channels * t.n_samples);
    detail::ReadBytes(in, t.samples.data(), t.samples.size() * sizeof(double), "trial samples");
    set.trials.push_back(std::move(t));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    Fail(ErrorCode::kFormat, "trailing bytes after last trial in " + path.string());
  }
  try {
    set.Validate();
  } catch (const Error& e) {
    Fail(ErrorCode::kFormat, std::string("invalid archive content: ") + e.what());
  }
  return set;
}

Trial ImportCsv(const std::filesystem::path& signal_path, const TrialMeta& meta) {
  std::ifstream in(signal_path);
  if (!in) Fail(ErrorCode::kIo, "cannot open " + signal_path.string());

  Trial t;
  t.subject_id = meta.subject_id;
  t.run_index = meta.run_index;
  t.trial_index = meta.trial_index;
  t.raw_label = meta.raw_label;
  t.fs = meta.fs;

  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t count = 0;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      std::size_t end = line.find(',', pos);
      if (end == std::string::npos) end = line.size();
      std::string_view token(line.data() + pos, end - pos);
      while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
      while (!token.empty() && token.back() == ' ') token.remove_suffix(1);
      if (!token.empty() && token.front() == '+') token.remove_prefix(1);
      double value = 0.0;
      const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
      if (token.empty() || ec != std::errc() || ptr != token.data() + token.size()) {
        Fail(ErrorCode::kFormat, "unparsable token '" + std::string(token) + "' on row " + std::to_string(row));
      }
      t.samples.push_back(value);
      ++count;
      pos = end + 1;
    }
    if (t.n_channels == 0) {
      t.n_samples = count;
    } else if (count != t.n_samples) {
      Fail(ErrorCode::kFormat, "ragged CSV: row " + std::to_string(row) + " has " + std::to_string(count) +
                                   " values, expected " + std::to_string(t.n_samples));
    }
    ++t.n_channels;
  }
  if (t.n_channels == 0) Fail(ErrorCode::kFormat, "empty CSV file " + signal_path.string());
  t.Validate();
  return t;
}

void SynthSpec::Validate() const {
  if (n_subjects < 1 || n_runs < 1 || trials_per_class_per_run < 1 || n_channels < 1 || n_samples < 1) {
    Fail(ErrorCode::kInvalidArgument, "synthetic dataset dimensions must be positive");
  }
  if (n_subjects > 0xFFFF || n_runs > 0xFFFF || trials_per_class_per_run * kNumRawLabels > 0xFFFF) {
    Fail(ErrorCode::kInvalidArgument, "synthetic dataset dimensions exceed 16-bit indices");
  }
  if (!(fs > 0.0)) Fail(ErrorCode::kInvalidArgument, "synthetic fs must be positive");
  if (!(noise_sigma >= 0.0)) Fail(ErrorCode::kInvalidArgument, "noise_sigma must be >= 0");
  for (std::size_t i = 0; i < kNumRawLabels; ++i) {
    const double f = class_tone_hz[i];
    if (!(f >= 0.0) || f >= fs / 2.0) {
      Fail(ErrorCode::kInvalidArgument, "tone for " + std::string(RawLabelName(kAllRawLabels[i])) +
                                            " must lie in [0, fs/2)");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (class_tone_hz[j] == f) Fail(ErrorCode::kInvalidArgument, "class tones must be distinct");
    }
  }
}

std::vector<double> SynthPhases(const SynthSpec& spec, std::size_t trial_ordinal) {
  Rng rng = TrialRng(spec.seed, trial_ordinal);
  std::vector<double> phases(spec.n_channels);
  for (double& p : phases) p = rng.Uniform(0.0, 2.0 * std::numbers::pi);
  return phases;
}

TrialSet SynthesizeDataset(const SynthSpec& spec) {
  spec.Validate();
  TrialSet set;
  set.fs = spec.fs;
  set.channel_names = DefaultChannelNames(spec.n_channels);
  set.trials.reserve(spec.n_subjects * spec.n_runs * spec.trials_per_class_per_run * kNumRawLabels);

  std::size_t ordinal = 0;
  for (std::size_t s = 0; s < spec.n_subjects; ++s) {
    for (std::size_t r = 0; r < spec.n_runs; ++r) {
      std::uint16_t trial_index = 1;
      for (RawLabel label : kAllRawLabels) {
        const double tone = spec.class_tone_hz[static_cast<std::size_t>(label)];
        const double omega = 2.0 * std::numbers::pi * tone / spec.fs;
        for (std::size_t rep = 0; rep < spec.trials_per_class_per_run; ++rep, ++ordinal) {
          Trial t;
          t.subject_id = static_cast<std::uint16_t>(s + 1);
          t.run_index = static_cast<std::uint16_t>(r + 1);
          t.trial_index = trial_index++;
          t.raw_label = label;
          t.fs = spec.fs;
          t.n_channels = spec.n_channels;
          t.n_samples = spec.n_samples;
          t.samples.resize(t.n_channels * t.n_samples);

          // Phases come first from the trial stream, then the noise.
          Rng rng = TrialRng(spec.seed, ordinal);
          std::vector<double> phases(spec.n_channels);
          for (double& p : phases) p = rng.Uniform(0.0, 2.0 * std::numbers::pi);
          for (std::size_t c = 0; c < t.n_channels; ++c) {
            auto ch = t.channel(c);
            for (std::size_t n = 0; n < t.n_samples; ++n) {
              ch[n] = std::cos(omega * static_cast<double>(n) + phases[c]);
              if (spec.noise_sigma > 0.0) ch[n] += spec.noise_sigma * rng.Normal();
            }
          }
          set.trials.push_back(std::move(t));
        }
      }
    }
  }
  return set;
}

std::vector<std::string> DefaultChannelNames(std::size_t n_channels) {
  static const char* const kMontage61[] = {
      "Fp1", "Fpz", "Fp2", "AF7", "AF3", "AFz", "AF4", "AF8", "F7",  "F5",  "F3",  "F1",  "Fz",  "F2",  "F4",  "F6",
      "F8",  "FT7", "FC5", "FC3", "FC1", "FCz", "FC2", "FC4", "FC6", "FT8", "T7",  "C5",  "C3",  "C1",  "Cz",  "C2",
      "C4",  "C6",  "T8",  "TP7", "CP5", "CP3", "CP1", "CPz", "CP2", "CP4", "CP6", "TP8", "P7",  "P5",  "P3",  "P1",
      "Pz",  "P2",  "P4",  "P6",  "P8",  "PO7", "PO3", "POz", "PO4", "PO8", "O1",  "Oz",  "O2"};
  static_assert(std::size(kMontage61) == 61);
  std::vector<std::string> names;
  names.reserve(n_channels);
  for (std::size_t c = 0; c < n_channels; ++c) {
    names.push_back(n_channels == 61 ? std::string(kMontage61[c]) : "Ch" + std::to_string(c + 1));
  }
  return names;
}

}  // namespace eegspec
