#include "eegspec/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "binary_io.hpp"
#include "eegspec/error.hpp"
#include "eegspec/rng.hpp"

namespace eegspec {

std::size_t NumClasses(Scheme scheme) { return scheme == Scheme::kFourClass ? 4 : 3; }

std::string_view MergedLabelName(MergedLabel label) {
  switch (label) {
    case MergedLabel::kHandMovement: return "hand_movement";
    case MergedLabel::kElbowMovement: return "elbow_movement";
    case MergedLabel::kForearmMovement: return "forearm_movement";
    case MergedLabel::kRest: return "rest";
  }
  return "unknown";
}

std::vector<std::string> ClassNames(Scheme scheme) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < NumClasses(scheme); ++i) {
    names.emplace_back(MergedLabelName(static_cast<MergedLabel>(i)));
  }
  return names;
}

std::string_view SchemeName(Scheme scheme) { return scheme == Scheme::kFourClass ? "four_class" : "three_class"; }

std::optional<Scheme> ParseScheme(std::string_view name) {
  if (name == "four_class") return Scheme::kFourClass;
  if (name == "three_class") return Scheme::kThreeClass;
  return std::nullopt;
}

std::optional<MergedLabel> MergeClasses(RawLabel raw, Scheme scheme) {
  switch (raw) {
    case RawLabel::kHandOpen:
    case RawLabel::kHandClose:
      return MergedLabel::kHandMovement;
    case RawLabel::kElbowFlexion:
    case RawLabel::kElbowExtension:
      return MergedLabel::kElbowMovement;
    case RawLabel::kForearmSupination:
    case RawLabel::kForearmPronation:
      return MergedLabel::kForearmMovement;
    case RawLabel::kRest:
      if (scheme == Scheme::kFourClass) return MergedLabel::kRest;
      return std::nullopt;
  }
  return std::nullopt;
}

Trial SliceTrial(const Trial& t, std::size_t n) {
  if (t.n_samples < n) {
    Fail(ErrorCode::kInvalidArgument, "trial s" + std::to_string(t.subject_id) + "r" + std::to_string(t.run_index) +
                                          "t" + std::to_string(t.trial_index) + " has " + std::to_string(t.n_samples) +
                                          " samples, needs at least " + std::to_string(n));
  }
  Trial out = t;
  out.n_samples = n;
  out.samples.resize(t.n_channels * n);
  for (std::size_t c = 0; c < t.n_channels; ++c) {
    auto src = t.channel(c);
    std::copy_n(src.begin(), n, out.samples.begin() + static_cast<std::ptrdiff_t>(c * n));
  }
  return out;
}

std::string ExampleKey::Id() const {
  return "s" + std::to_string(subject_id) + "r" + std::to_string(run_index) + "t" + std::to_string(trial_index) + "c" +
         std::to_string(channel_index);
}

namespace {

std::vector<const Trial*> CanonicalTrials(const TrialSet& set) {
  std::vector<const Trial*> trials;
  for (const Trial& t : set.trials) trials.push_back(&t);
  std::sort(trials.begin(), trials.end(), [](const Trial* a, const Trial* b) {
    return std::tie(a->subject_id, a->run_index, a->trial_index) <
           std::tie(b->subject_id, b->run_index, b->trial_index);
  });
  return trials;
}

}  // namespace

std::vector<ExampleKey> EnumerateExamples(const TrialSet& set, Scheme scheme) {
  std::vector<ExampleKey> keys;
  for (const Trial* t : CanonicalTrials(set)) {
    const auto label = MergeClasses(t->raw_label, scheme);
    if (!label) continue;
    for (std::size_t c = 0; c < t->n_channels; ++c) {
      keys.push_back({t->subject_id, t->run_index, t->trial_index, static_cast<std::uint16_t>(c), *label});
    }
  }
  return keys;
}

TrialSet SubjectSubset(const TrialSet& set, std::uint16_t subject_id) {
  TrialSet out;
  out.fs = set.fs;
  out.channel_names = set.channel_names;
  for (const Trial& t : set.trials) {
    if (t.subject_id == subject_id) out.trials.push_back(t);
  }
  return out;
}

std::vector<std::uint16_t> SubjectIds(const TrialSet& set) {
  std::set<std::uint16_t> ids;
  for (const Trial& t : set.trials) ids.insert(t.subject_id);
  return {ids.begin(), ids.end()};
}

Spectrogram ChannelSpectrogram(const Trial& t, std::size_t channel, std::span<const SosCascade> cascades,
                               const StftConfig& cfg, std::size_t slice_len) {
  if (channel >= t.n_channels) Fail(ErrorCode::kInvalidArgument, "channel index out of range");
  if (t.n_samples < slice_len) {
    Fail(ErrorCode::kInvalidArgument, "trial s" + std::to_string(t.subject_id) + "r" + std::to_string(t.run_index) +
                                          "t" + std::to_string(t.trial_index) + " has " + std::to_string(t.n_samples) +
                                          " samples, needs at least " + std::to_string(slice_len));
  }
  auto raw = t.channel(channel);
  std::vector<double> x(raw.begin(), raw.end());
  for (const SosCascade& c : cascades) x = ApplySos(c, x);
  x.resize(slice_len);
  return LogPower(Stft(x, cfg));
}

std::vector<Example> BuildExamples(const TrialSet& set, std::span<const SosCascade> cascades, const StftConfig& cfg,
                                   Scheme scheme, std::size_t slice_len) {
  if (set.trials.empty()) Fail(ErrorCode::kInvalidArgument, "cannot build examples from an empty trial set");
  cfg.Validate();
  if (slice_len < cfg.win_len) Fail(ErrorCode::kInvalidArgument, "slice length shorter than the STFT window");

  std::vector<Example> examples;
  for (const Trial* t : CanonicalTrials(set)) {
    const auto label = MergeClasses(t->raw_label, scheme);
    if (!label) continue;
    for (std::size_t c = 0; c < t->n_channels; ++c) {
      Example ex;
      ex.key = {t->subject_id, t->run_index, t->trial_index, static_cast<std::uint16_t>(c), *label};
      try {
        ex.stacked = Stack3(ChannelSpectrogram(*t, c, cascades, cfg, slice_len));
      } catch (const Error& e) {
        Fail(e.code(), ex.key.Id() + ": " + e.what());
      }
      examples.push_back(std::move(ex));
    }
  }
  if (examples.empty()) Fail(ErrorCode::kInvalidArgument, "no trials map to a class under this scheme");
  return examples;
}

std::string_view SplitStrategyName(SplitStrategy s) {
  return s == SplitStrategy::kPerExampleStratified ? "per_example_stratified" : "per_trial_grouped";
}

std::optional<SplitStrategy> ParseSplitStrategy(std::string_view name) {
  if (name == "per_example_stratified") return SplitStrategy::kPerExampleStratified;
  if (name == "per_trial_grouped") return SplitStrategy::kPerTrialGrouped;
  return std::nullopt;
}

std::array<std::size_t, 3> AllocateSplit(std::size_t n, const SplitRatios& ratios) {
  const std::size_t total = std::size_t{ratios.train} + ratios.val + ratios.test;
  if (total == 0) Fail(ErrorCode::kInvalidArgument, "split ratios must not all be zero");
  // Index order: train, val, test.
  std::array<std::size_t, 3> counts = {n * ratios.train / total, n * ratios.val / total, n * ratios.test / total};
  std::size_t leftover = n - counts[0] - counts[1] - counts[2];
  constexpr std::array<std::size_t, 3> kLeftoverOrder = {0, 2, 1};
  for (std::size_t i = 0; leftover > 0; ++i, --leftover) ++counts[kLeftoverOrder[i % 3]];
  return counts;
}

SplitManifest Split(std::span<const ExampleKey> keys, Scheme scheme, const SplitRatios& ratios, std::uint64_t seed,
                    SplitStrategy strategy) {
  std::vector<ExampleKey> sorted(keys.begin(), keys.end());
  std::sort(sorted.begin(), sorted.end(), [](const ExampleKey& a, const ExampleKey& b) { return a.SortKey() < b.SortKey(); });

  // Units are examples or whole trials; each unit carries its member keys.
  using TrialTag = std::array<int, 3>;
  const std::size_t k = NumClasses(scheme);
  std::vector<std::vector<std::vector<const ExampleKey*>>> units(k);
  std::map<TrialTag, std::size_t> trial_unit;
  for (const ExampleKey& key : sorted) {
    const auto cls = static_cast<std::size_t>(key.label);
    if (cls >= k) Fail(ErrorCode::kInvalidArgument, "example " + key.Id() + " has a label outside the scheme");
    if (strategy == SplitStrategy::kPerExampleStratified) {
      units[cls].push_back({&key});
      continue;
    }
    const TrialTag tag = {key.subject_id, key.run_index, key.trial_index};
    auto [it, inserted] = trial_unit.try_emplace(tag, units[cls].size());
    if (inserted) units[cls].emplace_back();
    std::vector<const ExampleKey*>& unit = units[cls][it->second];
    if (!unit.empty() && unit.front()->label != key.label) {
      Fail(ErrorCode::kInvalidArgument, "trial of example " + key.Id() + " carries more than one label");
    }
    unit.push_back(&key);
  }

  const auto names = ClassNames(scheme);
  for (std::size_t c = 0; c < k; ++c) {
    if (units[c].empty()) Fail(ErrorCode::kInvalidArgument, "class " + names[c] + " has no examples");
    if (strategy == SplitStrategy::kPerExampleStratified && units[c].size() < 10) {
      Fail(ErrorCode::kInvalidArgument, "class " + names[c] + " has " + std::to_string(units[c].size()) +
                                            " examples; stratified splitting needs at least 10");
    }
  }

  Rng rng(seed);
  std::vector<const ExampleKey*> parts[3];
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<std::size_t> order(units[c].size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.Shuffle(order.begin(), order.end());
    const auto counts = AllocateSplit(order.size(), ratios);
    std::size_t pos = 0;
    for (std::size_t p = 0; p < 3; ++p) {
      for (std::size_t i = 0; i < counts[p]; ++i, ++pos) {
        for (const ExampleKey* key : units[c][order[pos]]) parts[p].push_back(key);
      }
    }
  }

  SplitManifest manifest;
  manifest.seed = seed;
  manifest.strategy = strategy;
  std::vector<std::string>* lists[3] = {&manifest.train, &manifest.val, &manifest.test};
  for (std::size_t p = 0; p < 3; ++p) {
    std::sort(parts[p].begin(), parts[p].end(),
              [](const ExampleKey* a, const ExampleKey* b) { return a->SortKey() < b->SortKey(); });
    lists[p]->reserve(parts[p].size());
    for (const ExampleKey* key : parts[p]) lists[p]->push_back(key->Id());
  }
  return manifest;
}

std::string ManifestToJson(const SplitManifest& manifest, const std::string& resolved_config) {
  nlohmann::ordered_json j;
  j["seed"] = manifest.seed;
  j["strategy"] = SplitStrategyName(manifest.strategy);
  j["train"] = manifest.train;
  j["val"] = manifest.val;
  j["test"] = manifest.test;
  if (!resolved_config.empty()) j["config"] = resolved_config;
  return j.dump(1);
}

SplitManifest ManifestFromJson(const std::string& text) {
  SplitManifest m;
  try {
    const auto j = nlohmann::json::parse(text);
    m.seed = j.at("seed").get<std::uint64_t>();
    const auto strategy = ParseSplitStrategy(j.at("strategy").get<std::string>());
    if (!strategy) Fail(ErrorCode::kFormat, "unknown split strategy in manifest");
    m.strategy = *strategy;
    m.train = j.at("train").get<std::vector<std::string>>();
    m.val = j.at("val").get<std::vector<std::string>>();
    m.test = j.at("test").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kFormat, std::string("bad manifest JSON: ") + e.what());
  }
  return m;
}

void WriteExamples(std::span<const Example> examples, const std::filesystem::path& path) {
  const std::size_t rows = examples.empty() ? 0 : examples.front().stacked.height();
  const std::size_t cols = examples.empty() ? 0 : examples.front().stacked.width();
  for (const Example& ex : examples) {
    if (ex.stacked.height() != rows || ex.stacked.width() != cols) {
      Fail(ErrorCode::kInvalidArgument, "examples must share one geometry");
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  detail::WriteBytes(out, "EXS1", 4);
  detail::WriteLe<std::uint32_t>(out, static_cast<std::uint32_t>(examples.size()));
  detail::WriteLe<std::uint32_t>(out, static_cast<std::uint32_t>(rows));
  detail::WriteLe<std::uint32_t>(out, static_cast<std::uint32_t>(cols));
  for (const Example& ex : examples) {
    detail::WriteLe<std::uint16_t>(out, ex.key.subject_id);
    detail::WriteLe<std::uint16_t>(out, ex.key.run_index);
    detail::WriteLe<std::uint16_t>(out, ex.key.trial_index);
    detail::WriteLe<std::uint16_t>(out, ex.key.channel_index);
    detail::WriteLe<std::uint8_t>(out, static_cast<std::uint8_t>(ex.key.label));
    detail::WriteBytes(out, ex.stacked.plane.data.data(), ex.stacked.plane.data.size() * sizeof(float));
  }
  out.flush();
  if (!out) Fail(ErrorCode::kIo, "write failed for " + path.string());
}

std::vector<Example> ReadExamples(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kNotFound, "missing example file " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::string_view(magic, 4) != "EXS1") Fail(ErrorCode::kFormat, "bad magic in " + path.string());
  const auto count = detail::ReadLe<std::uint32_t>(in, "example count");
  const auto rows = detail::ReadLe<std::uint32_t>(in, "rows");
  const auto cols = detail::ReadLe<std::uint32_t>(in, "cols");
  std::vector<Example> examples(count);
  for (Example& ex : examples) {
    ex.key.subject_id = detail::ReadLe<std::uint16_t>(in, "example header");
    ex.key.run_index = detail::ReadLe<std::uint16_t>(in, "example header");
    ex.key.trial_index = detail::ReadLe<std::uint16_t>(in, "example header");
    ex.key.channel_index = detail::ReadLe<std::uint16_t>(in, "example header");
    const auto label = detail::ReadLe<std::uint8_t>(in, "example header");
    if (label > static_cast<std::uint8_t>(MergedLabel::kRest)) Fail(ErrorCode::kFormat, "invalid class code in " + path.string());
    ex.key.label = static_cast<MergedLabel>(label);
    ex.stacked.plane = Matrix<float>(rows, cols);
    detail::ReadBytes(in, ex.stacked.plane.data.data(), ex.stacked.plane.data.size() * sizeof(float), "example plane");
  }
  return examples;
}

}  // namespace eegspec
