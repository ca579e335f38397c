#include "eegspec/pipeline.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "eegspec/dataset.hpp"
#include "eegspec/error.hpp"
#include "eegspec/eval_report.hpp"
#include "eegspec/model.hpp"
#include "eegspec/trial_store.hpp"

namespace eegspec {
namespace {

std::string ReadText(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorCode::kNotFound, "missing file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) Fail(ErrorCode::kIo, "write failed for " + path.string());
}

void EnsureOutDir(const PipelineConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec) Fail(ErrorCode::kIo, "cannot create " + cfg.out_dir.string() + ": " + ec.message());
}

// The resolved configuration is recorded next to every command's outputs.
void WriteAuditTrail(const PipelineConfig& cfg, std::string_view command) {
  EnsureOutDir(cfg);
  WriteText(cfg.out_dir / (std::string(command) + ".config"), cfg.Resolved());
}

StftConfig StftFor(const PipelineConfig& cfg, double fs) {
  StftConfig s = cfg.stft;
  s.fs = fs;
  s.Validate();
  return s;
}

// Network input geometry implied by the STFT settings.
void CheckGeometry(const PipelineConfig& cfg) {
  const std::size_t bins = cfg.stft.OneSidedBins();
  const std::size_t frames = cfg.stft.NumFrames(cfg.slice_len);
  const std::size_t div = std::size_t{1} << cfg.widths.size();
  if (bins != frames) {
    Fail(ErrorCode::kInvalidArgument, "spectrogram is " + std::to_string(bins) + "x" + std::to_string(frames) +
                                          "; the network needs square inputs (adjust stft.* or dataset.slice_len)");
  }
  if (bins % div != 0) {
    Fail(ErrorCode::kInvalidArgument, "spectrogram side " + std::to_string(bins) + " is not a multiple of " +
                                          std::to_string(div) + " required by model.widths");
  }
}

void RunSynth(const PipelineConfig& cfg) {
  WriteAuditTrail(cfg, "synth");
  WriteArchive(SynthesizeDataset(cfg.synth), cfg.archive);
}

void RunImport(const PipelineConfig& cfg) {
  if (cfg.import.csv.empty()) Fail(ErrorCode::kInvalidArgument, "config key 'import.csv' is required for import");
  WriteAuditTrail(cfg, "import");
  Trial trial = ImportCsv(cfg.import.csv, cfg.import.meta);
  TrialSet set;
  if (std::filesystem::exists(cfg.archive)) {
    set = ReadArchive(cfg.archive);
  } else {
    set.fs = trial.fs;
    set.channel_names = cfg.import.channel_names.empty() ? DefaultChannelNames(trial.n_channels)
                                                          : cfg.import.channel_names;
  }
  set.trials.push_back(std::move(trial));
  WriteArchive(set, cfg.archive);
}

void RunSpectrogram(const PipelineConfig& cfg) {
  CheckGeometry(cfg);
  WriteAuditTrail(cfg, "spectrogram");
  const TrialSet set = ReadArchive(cfg.archive);
  const auto cascades = BuildCascades(cfg.filter, set.fs);
  const StftConfig stft = StftFor(cfg, set.fs);
  for (std::uint16_t subject : SubjectIds(set)) {
    const std::vector<Example> examples = BuildExamples(SubjectSubset(set, subject), cascades, stft, cfg.scheme,
                                                        cfg.slice_len);
    std::vector<ExampleKey> keys;
    keys.reserve(examples.size());
    for (const Example& ex : examples) keys.push_back(ex.key);
    const SplitManifest manifest = Split(keys, cfg.scheme, cfg.ratios, cfg.split_seed, cfg.strategy);
    WriteExamples(examples, ExamplesPath(cfg, subject));
    WriteText(ManifestPath(cfg, subject), ManifestToJson(manifest, cfg.Resolved()));
  }
}

struct SubjectData {
  std::vector<Example> examples;
  SplitManifest manifest;
  std::map<std::string, std::size_t> index;  // id -> position in examples
};

SubjectData LoadSubject(const PipelineConfig& cfg, std::uint16_t subject) {
  SubjectData d;
  d.examples = ReadExamples(ExamplesPath(cfg, subject));
  d.manifest = ManifestFromJson(ReadText(ManifestPath(cfg, subject)));
  for (std::size_t i = 0; i < d.examples.size(); ++i) d.index.emplace(d.examples[i].key.Id(), i);
  return d;
}

LabeledImages Select(const SubjectData& d, const std::vector<std::string>& ids) {
  LabeledImages out;
  for (const std::string& id : ids) {
    const auto it = d.index.find(id);
    if (it == d.index.end()) Fail(ErrorCode::kFormat, "manifest refers to unknown example " + id);
    out.images.push_back(&d.examples[it->second].stacked);
    out.labels.push_back(static_cast<int>(d.examples[it->second].key.label));
  }
  return out;
}

std::vector<std::uint16_t> ArchiveSubjects(const PipelineConfig& cfg) {
  const std::vector<std::uint16_t> subjects = SubjectIds(ReadArchive(cfg.archive));
  if (subjects.empty()) Fail(ErrorCode::kInvalidArgument, "archive " + cfg.archive.string() + " has no trials");
  return subjects;
}

void RunTrain(const PipelineConfig& cfg) {
  WriteAuditTrail(cfg, "train");
  for (std::uint16_t subject : ArchiveSubjects(cfg)) {
    const SubjectData d = LoadSubject(cfg, subject);
    if (d.examples.empty()) Fail(ErrorCode::kInvalidArgument, "no examples for subject " + std::to_string(subject));

    NetShape shape;
    shape.input_height = d.examples.front().stacked.height();
    shape.input_width = d.examples.front().stacked.width();
    shape.widths = cfg.widths;
    shape.hidden = cfg.hidden;
    shape.classes = NumClasses(Scheme::kFourClass);
    const std::uint64_t seed = cfg.train.seed + subject;
    // A four-way base network whose final layer is swapped for the scheme's.
    const VggLiteNet net = ReplaceHead(InitNet(shape, seed), NumClasses(cfg.scheme), seed);

    TrainConfig tc = cfg.train;
    tc.seed = seed;
    try {
      const TrainResult result = Train(net, Select(d, d.manifest.train), Select(d, d.manifest.val), tc);
      SaveCheckpoint(result.net, CheckpointPath(cfg, subject));
      WriteText(HistoryPath(cfg, subject), HistoryToCsv(result.history));
    } catch (const Error& e) {
      Fail(e.code(), "subject " + std::to_string(subject) + ": " + e.what());
    }
  }
}

void RunEval(const PipelineConfig& cfg) {
  WriteAuditTrail(cfg, "eval");
  std::vector<SubjectResult> results;
  for (std::uint16_t subject : ArchiveSubjects(cfg)) {
    const auto ckpt = CheckpointPath(cfg, subject);
    if (!std::filesystem::exists(ckpt)) Fail(ErrorCode::kNotFound, "missing checkpoint " + ckpt.string());
    const VggLiteNet net = LoadCheckpoint(ckpt);
    const SubjectData d = LoadSubject(cfg, subject);
    const LabeledImages test = Select(d, d.manifest.test);
    if (net.num_classes() != NumClasses(cfg.scheme)) {
      Fail(ErrorCode::kInvalidArgument, "checkpoint " + ckpt.string() + " has " + std::to_string(net.num_classes()) +
                                            " classes but dataset.scheme is " + std::string(SchemeName(cfg.scheme)));
    }
    const std::vector<Prediction> preds = Predict(net, test);
    std::vector<int> predicted;
    for (const Prediction& p : preds) predicted.push_back(p.label);
    ConfusionMatrix cm = MakeConfusionMatrix(predicted, test.labels, NumClasses(cfg.scheme), ClassNames(cfg.scheme));
    ExportConfusionImage(cm, cfg.out_dir / ("confusion_s" + std::to_string(subject) + ".pgm"));
    results.push_back(MakeSubjectResult(subject, std::move(cm), cfg.scheme, d.manifest.seed, d.manifest.strategy));
  }
  WriteText(cfg.out_dir / "results.json", ResultsToJson(results, cfg.Resolved()));
  WriteText(cfg.out_dir / "table.csv", TableToCsv(MakeSubjectTable(results)));
}

void RunExportImages(const PipelineConfig& cfg) {
  WriteAuditTrail(cfg, "export-images");
  const TrialSet set = ReadArchive(cfg.archive);
  const std::vector<std::uint16_t> subjects = SubjectIds(set);
  if (subjects.empty()) Fail(ErrorCode::kInvalidArgument, "archive has no trials");
  const std::uint16_t subject = cfg.exporter.subject == 0 ? subjects.front() : cfg.exporter.subject;

  std::size_t channel = set.channel_names.size();
  for (std::size_t c = 0; c < set.channel_names.size(); ++c) {
    if (set.channel_names[c] == cfg.exporter.channel) channel = c;
  }
  if (channel == set.channel_names.size()) {
    if (cfg.exporter.channel != ExportParams{}.channel) {
      Fail(ErrorCode::kNotFound, "channel '" + cfg.exporter.channel + "' not in archive");
    }
    channel = 0;
  }

  const auto cascades = BuildCascades(cfg.filter, set.fs);
  const StftConfig stft = StftFor(cfg, set.fs);
  const TrialSet subset = SubjectSubset(set, subject);
  const std::string ext = cfg.exporter.format == ImageFormat::kPgm ? ".pgm" : ".png";
  for (std::size_t cls = 0; cls < NumClasses(cfg.scheme); ++cls) {
    const Trial* chosen = nullptr;
    for (const Trial& t : subset.trials) {
      const auto label = MergeClasses(t.raw_label, cfg.scheme);
      if (!label || static_cast<std::size_t>(*label) != cls) continue;
      if (!chosen || std::tie(t.run_index, t.trial_index) < std::tie(chosen->run_index, chosen->trial_index)) {
        chosen = &t;
      }
    }
    const std::string class_name(MergedLabelName(static_cast<MergedLabel>(cls)));
    if (!chosen) Fail(ErrorCode::kNotFound, "subject " + std::to_string(subject) + " has no " + class_name + " trial");
    const Spectrogram spec = ChannelSpectrogram(*chosen, channel, cascades, stft, cfg.slice_len);
    const std::string stem = "spectrogram_s" + std::to_string(subject) + "_" + class_name + "_" + set.channel_names[channel];
    ExportImage(spec, cfg.out_dir / (stem + ext), cfg.exporter.format);
    if (cfg.exporter.dump) WriteSpectrogramDump(spec.values, cfg.out_dir / (stem + ".spg"));
  }
}

}  // namespace

std::vector<SosCascade> BuildCascades(const FilterParams& params, double fs) {
  std::vector<SosCascade> cascades;
  if (params.bandpass_enabled) {
    cascades.push_back(DesignChebyBandpass(params.order, params.low_hz, params.high_hz, fs, params.ripple_db));
  }
  if (params.notch_enabled) cascades.push_back(DesignNotch(params.notch_hz, fs, params.notch_q));
  return cascades;
}

std::filesystem::path ExamplesPath(const PipelineConfig& cfg, std::uint16_t subject) {
  return cfg.out_dir / ("examples_s" + std::to_string(subject) + ".exs");
}
std::filesystem::path ManifestPath(const PipelineConfig& cfg, std::uint16_t subject) {
  return cfg.out_dir / ("split_s" + std::to_string(subject) + ".json");
}
std::filesystem::path CheckpointPath(const PipelineConfig& cfg, std::uint16_t subject) {
  return cfg.out_dir / ("model_s" + std::to_string(subject) + ".vgl");
}
std::filesystem::path HistoryPath(const PipelineConfig& cfg, std::uint16_t subject) {
  return cfg.out_dir / ("history_s" + std::to_string(subject) + ".csv");
}

void RunCommand(std::string_view command, const PipelineConfig& cfg) {
  cfg.Validate();
  if (command == "synth") return RunSynth(cfg);
  if (command == "import") return RunImport(cfg);
  if (command == "spectrogram") return RunSpectrogram(cfg);
  if (command == "train") return RunTrain(cfg);
  if (command == "eval") return RunEval(cfg);
  if (command == "export-images") return RunExportImages(cfg);
  Fail(ErrorCode::kInvalidArgument, "unknown command '" + std::string(command) + "'");
}

}  // namespace eegspec
