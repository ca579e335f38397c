#include "eegspec/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "eegspec/error.hpp"

namespace eegspec {
namespace {

[[noreturn]] void BadValue(const std::string& key, const std::string& value, const char* expected) {
  Fail(ErrorCode::kInvalidArgument, "config key '" + key + "': cannot parse '" + value + "' as " + expected);
}

std::string Trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

double ToDouble(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) BadValue(key, v, "a number");
  return out;
}

std::uint64_t ToU64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) BadValue(key, v, "a non-negative integer");
  return out;
}

std::uint16_t ToU16(const std::string& key, const std::string& v) {
  const std::uint64_t x = ToU64(key, v);
  if (x > 0xFFFF) BadValue(key, v, "a 16-bit integer");
  return static_cast<std::uint16_t>(x);
}

bool ToBool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  BadValue(key, v, "a boolean");
}

std::vector<std::string> SplitList(const std::string& v, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(Trim(item));
  return out;
}

std::string FromDouble(double d) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), d);
  return std::string(buf, ptr);
}

template <typename T>
std::string JoinNumbers(const T& values) {
  std::string out;
  for (const auto& v : values) {
    if (!out.empty()) out += ",";
    if constexpr (std::is_floating_point_v<std::decay_t<decltype(v)>>) {
      out += FromDouble(v);
    } else {
      out += std::to_string(v);
    }
  }
  return out;
}

std::string JoinStrings(const std::vector<std::string>& values) {
  std::string out;
  for (const auto& v : values) {
    if (!out.empty()) out += ",";
    out += v;
  }
  return out;
}

struct Field {
  std::function<void(PipelineConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

template <typename Get>
Field DoubleField(Get member) {
  return {[member](PipelineConfig& c, const std::string& k, const std::string& v) { member(c) = ToDouble(k, v); },
          [member](const PipelineConfig& c) { return FromDouble(member(c)); }};
}

template <typename Get>
Field SizeField(Get member) {
  return {[member](PipelineConfig& c, const std::string& k, const std::string& v) {
            member(c) = static_cast<std::remove_reference_t<decltype(member(c))>>(ToU64(k, v));
          },
          [member](const PipelineConfig& c) { return std::to_string(member(c)); }};
}

template <typename Get>
Field U16Field(Get member) {
  return {[member](PipelineConfig& c, const std::string& k, const std::string& v) { member(c) = ToU16(k, v); },
          [member](const PipelineConfig& c) { return std::to_string(member(c)); }};
}

template <typename Get>
Field BoolField(Get member) {
  return {[member](PipelineConfig& c, const std::string& k, const std::string& v) { member(c) = ToBool(k, v); },
          [member](const PipelineConfig& c) {
            return std::string(member(c) ? "true" : "false");
          }};
}

template <typename Get>
Field StringField(Get member) {
  return {[member](PipelineConfig& c, const std::string&, const std::string& v) { member(c) = v; },
          [member](const PipelineConfig& c) { return std::string(member(c)); }};
}

template <typename Get>
Field PathField(Get member) {
  return {[member](PipelineConfig& c, const std::string&, const std::string& v) { member(c) = v; },
          [member](const PipelineConfig& c) { return member(c).string(); }};
}

const std::map<std::string, Field>& Fields() {
  static const std::map<std::string, Field> fields = [] {
    std::map<std::string, Field> f;
    f["preset"] = StringField([](auto& c) -> auto& { return c.preset; });
    f["paths.archive"] = PathField([](auto& c) -> auto& { return c.archive; });
    f["paths.out_dir"] = PathField([](auto& c) -> auto& { return c.out_dir; });

    f["filter.bandpass"] = BoolField([](auto& c) -> auto& { return c.filter.bandpass_enabled; });
    f["filter.order"] = {[](PipelineConfig& c, const std::string& k, const std::string& v) {
                           const std::uint64_t x = ToU64(k, v);
                           if (x > 64) BadValue(k, v, "a filter order <= 64");
                           c.filter.order = static_cast<int>(x);
                         },
                         [](const PipelineConfig& c) { return std::to_string(c.filter.order); }};
    f["filter.low_hz"] = DoubleField([](auto& c) -> auto& { return c.filter.low_hz; });
    f["filter.high_hz"] = DoubleField([](auto& c) -> auto& { return c.filter.high_hz; });
    f["filter.ripple_db"] = DoubleField([](auto& c) -> auto& { return c.filter.ripple_db; });
    f["filter.notch"] = BoolField([](auto& c) -> auto& { return c.filter.notch_enabled; });
    f["filter.notch_hz"] = DoubleField([](auto& c) -> auto& { return c.filter.notch_hz; });
    f["filter.notch_q"] = DoubleField([](auto& c) -> auto& { return c.filter.notch_q; });

    f["stft.win"] = SizeField([](auto& c) -> auto& { return c.stft.win_len; });
    f["stft.hop"] = SizeField([](auto& c) -> auto& { return c.stft.hop; });
    f["stft.nfft"] = SizeField([](auto& c) -> auto& { return c.stft.nfft; });
    f["stft.epsilon"] = DoubleField([](auto& c) -> auto& { return c.stft.epsilon; });
    f["dataset.slice_len"] = SizeField([](auto& c) -> auto& { return c.slice_len; });
    f["dataset.scheme"] = {[](PipelineConfig& c, const std::string& k, const std::string& v) {
                             const auto s = ParseScheme(v);
                             if (!s) BadValue(k, v, "four_class or three_class");
                             c.scheme = *s;
                           },
                           [](const PipelineConfig& c) { return std::string(SchemeName(c.scheme)); }};

    f["split.ratios"] = {[](PipelineConfig& c, const std::string& k, const std::string& v) {
                           const auto parts = SplitList(v, ':');
                           if (parts.size() != 3) BadValue(k, v, "train:val:test");
                           c.ratios = {static_cast<unsigned>(ToU64(k, parts[0])), static_cast<unsigned>(ToU64(k, parts[1])),
                                       static_cast<unsigned>(ToU64(k, parts[2]))};
                         },
                         [](const PipelineConfig& c) {
                           return std::to_string(c.ratios.train) + ":" + std::to_string(c.ratios.val) + ":" +
                                  std::to_string(c.ratios.test);
                         }};
    f["split.seed"] = SizeField([](auto& c) -> auto& { return c.split_seed; });
    f["split.strategy"] = {[](PipelineConfig& c, const std::string& k, const std::string& v) {
                             const auto s = ParseSplitStrategy(v);
                             if (!s) BadValue(k, v, "per_example_stratified or per_trial_grouped");
                             c.strategy = *s;
                           },
                           [](const PipelineConfig& c) { return std::string(SplitStrategyName(c.strategy)); }};

    f["train.lr"] = DoubleField([](auto& c) -> auto& { return c.train.lr; });
    f["train.momentum"] = DoubleField([](auto& c) -> auto& { return c.train.momentum; });
    f["train.batch_size"] = SizeField([](auto& c) -> auto& { return c.train.batch_size; });
    f["train.epochs"] = SizeField([](auto& c) -> auto& { return c.train.epochs; });
    f["train.seed"] = SizeField([](auto& c) -> auto& { return c.train.seed; });
    f["train.selection"] = {[](PipelineConfig& c, const std::string& k, const std::string& v) {
                              if (v == "best_val") {
                                c.train.selection = Selection::kBestVal;
                              } else if (v == "final_epoch") {
                                c.train.selection = Selection::kFinalEpoch;
                              } else {
                                BadValue(k, v, "best_val or final_epoch");
                              }
                            },
                            [](const PipelineConfig& c) {
                              return std::string(c.train.selection == Selection::kBestVal ? "best_val" : "final_epoch");
                            }};

    f["model.widths"] = {[](PipelineConfig& c, const std::string& k, const std::string& v) {
                           std::vector<std::size_t> w;
                           for (const auto& part : SplitList(v, ',')) w.push_back(ToU64(k, part));
                           if (w.empty()) BadValue(k, v, "a comma-separated width list");
                           c.widths = std::move(w);
                         },
                         [](const PipelineConfig& c) { return JoinNumbers(c.widths); }};
    f["model.hidden"] = SizeField([](auto& c) -> auto& { return c.hidden; });

    f["synth.subjects"] = SizeField([](auto& c) -> auto& { return c.synth.n_subjects; });
    f["synth.runs"] = SizeField([](auto& c) -> auto& { return c.synth.n_runs; });
    f["synth.trials_per_class"] =
        SizeField([](auto& c) -> auto& { return c.synth.trials_per_class_per_run; });
    f["synth.channels"] = SizeField([](auto& c) -> auto& { return c.synth.n_channels; });
    f["synth.samples"] = SizeField([](auto& c) -> auto& { return c.synth.n_samples; });
    f["synth.fs"] = DoubleField([](auto& c) -> auto& { return c.synth.fs; });
    f["synth.noise_sigma"] = DoubleField([](auto& c) -> auto& { return c.synth.noise_sigma; });
    f["synth.seed"] = SizeField([](auto& c) -> auto& { return c.synth.seed; });
    f["synth.tones"] = {[](PipelineConfig& c, const std::string& k, const std::string& v) {
                          const auto parts = SplitList(v, ',');
                          if (parts.size() != kNumRawLabels) BadValue(k, v, "7 comma-separated frequencies");
                          for (std::size_t i = 0; i < kNumRawLabels; ++i) c.synth.class_tone_hz[i] = ToDouble(k, parts[i]);
                        },
                        [](const PipelineConfig& c) { return JoinNumbers(c.synth.class_tone_hz); }};

    f["import.csv"] = PathField([](auto& c) -> auto& { return c.import.csv; });
    f["import.subject"] = U16Field([](auto& c) -> auto& { return c.import.meta.subject_id; });
    f["import.run"] = U16Field([](auto& c) -> auto& { return c.import.meta.run_index; });
    f["import.trial"] = U16Field([](auto& c) -> auto& { return c.import.meta.trial_index; });
    f["import.fs"] = DoubleField([](auto& c) -> auto& { return c.import.meta.fs; });
    f["import.label"] = {[](PipelineConfig& c, const std::string& k, const std::string& v) {
                           const auto l = ParseRawLabel(v);
                           if (!l) BadValue(k, v, "a movement label such as hand_open");
                           c.import.meta.raw_label = *l;
                         },
                         [](const PipelineConfig& c) { return std::string(RawLabelName(c.import.meta.raw_label)); }};
    f["import.channels"] = {[](PipelineConfig& c, const std::string&, const std::string& v) {
                              c.import.channel_names = v.empty() ? std::vector<std::string>{} : SplitList(v, ',');
                            },
                            [](const PipelineConfig& c) { return JoinStrings(c.import.channel_names); }};

    f["export.format"] = {[](PipelineConfig& c, const std::string& k, const std::string& v) {
                            if (v == "pgm") {
                              c.exporter.format = ImageFormat::kPgm;
                            } else if (v == "png") {
                              c.exporter.format = ImageFormat::kPng;
                            } else {
                              BadValue(k, v, "pgm or png");
                            }
                          },
                          [](const PipelineConfig& c) {
                            return std::string(c.exporter.format == ImageFormat::kPgm ? "pgm" : "png");
                          }};
    f["export.channel"] = StringField([](auto& c) -> auto& { return c.exporter.channel; });
    f["export.subject"] = U16Field([](auto& c) -> auto& { return c.exporter.subject; });
    f["export.dump"] = BoolField([](auto& c) -> auto& { return c.exporter.dump; });
    return f;
  }();
  return fields;
}

const Field& FindField(const std::string& key) {
  const auto& fields = Fields();
  const auto it = fields.find(key);
  if (it == fields.end()) Fail(ErrorCode::kInvalidArgument, "unknown config key '" + key + "'");
  return it->second;
}

std::vector<std::pair<std::string, std::string>> ParseLines(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = Trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      Fail(ErrorCode::kInvalidArgument, "config line " + std::to_string(line_no) + " is not key=value: " + line);
    }
    entries.emplace_back(Trim(line.substr(0, eq)), Trim(line.substr(eq + 1)));
  }
  return entries;
}

// Re-raise module invariant failures with the config key that feeds them.
template <typename Fn>
void CheckWithKey(const char* key, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    Fail(e.code(), std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

void PipelineConfig::Validate() const {
  CheckWithKey("stft", [&] { stft.Validate(); });
  if (slice_len < stft.win_len) {
    Fail(ErrorCode::kInvalidArgument, "config key 'dataset.slice_len': must be >= stft.win");
  }
  if (filter.bandpass_enabled) {
    if (filter.order < 2 || filter.order % 2 != 0) {
      Fail(ErrorCode::kInvalidArgument, "config key 'filter.order': must be even and >= 2");
    }
    if (!(filter.low_hz >= 0.0 && filter.low_hz < filter.high_hz)) {
      Fail(ErrorCode::kInvalidArgument, "config key 'filter.low_hz': must satisfy 0 <= low_hz < high_hz");
    }
    if (!(filter.ripple_db > 0.0)) Fail(ErrorCode::kInvalidArgument, "config key 'filter.ripple_db': must be > 0");
  }
  if (filter.notch_enabled) {
    if (!(filter.notch_hz > 0.0)) Fail(ErrorCode::kInvalidArgument, "config key 'filter.notch_hz': must be > 0");
    if (!(filter.notch_q > 0.0)) Fail(ErrorCode::kInvalidArgument, "config key 'filter.notch_q': must be > 0");
  }
  if (ratios.train + ratios.val + ratios.test == 0) {
    Fail(ErrorCode::kInvalidArgument, "config key 'split.ratios': must not all be zero");
  }
  CheckWithKey("train", [&] { train.Validate(); });
  NetShape shape;
  shape.widths = widths;
  shape.hidden = hidden;
  shape.input_height = shape.input_width = std::size_t{1} << std::min<std::size_t>(widths.size(), 16);
  CheckWithKey("model", [&] { shape.Validate(); });
  CheckWithKey("synth", [&] { synth.Validate(); });
}

std::string PipelineConfig::Resolved() const {
  std::string out;
  for (const auto& [key, field] : Fields()) out += key + "=" + field.get(*this) + "\n";
  return out;
}

PipelineConfig PresetConfig(const std::string& name) {
  PipelineConfig cfg;
  if (name == "paper") return cfg;
  if (name != "reduced") Fail(ErrorCode::kInvalidArgument, "config key 'preset': unknown preset '" + name + "'");
  cfg.preset = "reduced";
  // 186 samples -> (186 - 62) / 4 + 1 = 32 frames; (63 + 1) / 2 = 32 bins.
  cfg.stft.win_len = 62;
  cfg.stft.hop = 4;
  cfg.stft.nfft = 63;
  cfg.slice_len = 186;
  cfg.synth.n_subjects = 1;
  cfg.synth.n_runs = 2;
  cfg.synth.trials_per_class_per_run = 6;
  cfg.synth.n_channels = 8;
  cfg.synth.n_samples = 256;
  // Opposing movements sit 2 Hz apart, far below the 8 Hz bin spacing, so
  // each merged class is effectively one tone: 20 / 60 / 100 / 140 Hz.
  cfg.synth.class_tone_hz = {60, 62, 100, 102, 20, 22, 140};
  return cfg;
}

void SetConfigValue(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  FindField(key).set(cfg, key, value);
}

std::string GetConfigValue(const PipelineConfig& cfg, const std::string& key) { return FindField(key).get(cfg); }

std::vector<std::string> ConfigKeys() {
  std::vector<std::string> keys;
  for (const auto& [key, field] : Fields()) keys.push_back(key);
  return keys;
}

PipelineConfig ParseConfigText(const std::string& text,
                               const std::vector<std::pair<std::string, std::string>>& overrides) {
  const auto entries = ParseLines(text);
  for (const auto& [key, value] : entries) FindField(key);
  for (const auto& [key, value] : overrides) FindField(key);

  std::string preset = "paper";
  for (const auto& [key, value] : entries) {
    if (key == "preset") preset = value;
  }
  for (const auto& [key, value] : overrides) {
    if (key == "preset") preset = value;
  }
  PipelineConfig cfg = PresetConfig(preset);
  for (const auto& [key, value] : entries) {
    if (key != "preset") SetConfigValue(cfg, key, value);
  }
  for (const auto& [key, value] : overrides) {
    if (key != "preset") SetConfigValue(cfg, key, value);
  }
  cfg.Validate();
  return cfg;
}

PipelineConfig ParseConfig(const std::filesystem::path& file,
                           const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::string text;
  if (!file.empty()) {
    std::ifstream in(file);
    if (!in) Fail(ErrorCode::kIo, "cannot read config file " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  return ParseConfigText(text, overrides);
}

}  // namespace eegspec
