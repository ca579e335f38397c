// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "eegspec/config.hpp"
#include "eegspec/dataset.hpp"
#include "eegspec/eval_report.hpp"
#include "eegspec/filters.hpp"
#include "eegspec/model.hpp"
#include "eegspec/pipeline.hpp"
#include "eegspec/stft.hpp"
#include "eegspec/trial_store.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace eegspec;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double Seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

char Buf[256];
template <typename... Args>
std::string Fmt(const char* f, Args... args) {
  std::snprintf(Buf, sizeof Buf, f, args...);
  return Buf;
}

fs::path WorkDir(const std::string& name) {
  fs::path p = fs::current_path() / "acceptance_work" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Max over bins/frames of |X - Xo|, divided by max |Xo|.
double StftRelErr(std::span<const double> x, const StftConfig& cfg) {
  const ComplexStft s = Stft(x, cfg);
  const auto ref = oracle::Stft(x, cfg.win_len, cfg.hop, cfg.nfft);
  if (ref.size() != s.values.cols || ref.empty() || ref[0].size() != s.values.rows) return INFINITY;
  double diff = 0.0, scale = 0.0;
  for (std::size_t f = 0; f < ref.size(); ++f) {
    for (std::size_t k = 0; k < ref[f].size(); ++k) {
      diff = std::max(diff, std::abs(s.values(k, f) - ref[f][k]));
      scale = std::max(scale, std::abs(ref[f][k]));
    }
  }
  if (scale == 0.0) return diff == 0.0 ? 0.0 : INFINITY;
  return diff / scale;
}

Outcome StftOracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 gen(1001);
  double worst_paper = 0.0, worst_small = 0.0;
  const StftConfig paper = PaperStftConfig();
  for (int i = 0; i < 100; ++i) {
    const auto x = oracle::RandomSignal(kPaperSliceLength, gen);
    worst_paper = std::max(worst_paper, StftRelErr(x, paper));
  }
  std::uniform_int_distribution<std::size_t> pick(1, 64);
  for (int i = 0; i < 100; ++i) {
    StftConfig c;
    c.win_len = pick(gen);
    c.hop = std::uniform_int_distribution<std::size_t>(1, c.win_len)(gen);
    c.nfft = c.win_len + std::uniform_int_distribution<std::size_t>(0, 40)(gen);
    const std::size_t len = c.win_len + std::uniform_int_distribution<std::size_t>(0, 200)(gen);
    const auto x = oracle::RandomSignal(len, gen);
    worst_small = std::max(worst_small, StftRelErr(x, c));
  }
  const double t = Seconds(t0);
  const double worst = std::max(worst_paper, worst_small);
  return {worst <= 1e-9 && t < 30.0,
          Fmt("max rel err paper %.2e, small configs %.2e (<= 1e-9); %.1f s (< 30 s)", worst_paper, worst_small, t)};
}

Outcome Geometry() {
  const StftConfig c = PaperStftConfig();
  std::mt19937_64 gen(1002);
  const auto x = oracle::RandomSignal(kPaperSliceLength, gen);
  const Spectrogram s = LogPower(Stft(x, c));
  bool ok = c.win_len == 342 && c.hop == 2 && c.nfft == 447 && s.values.rows == 224 && s.values.cols == 224;

  // The same plane, stacked, goes through the default 224x224 network.
  const StackedSpectrogram img = Stack3(s);
  const VggLiteNet net = InitNet(NetShape{}, 1);
  const LabeledImages set{{&img, &img}, {0, 0}};
  const std::size_t idx[] = {0, 1};
  const RealMatrix logits = ForwardEval(net, MakeBatch(set, idx));
  bool finite = logits.rows == 2 && logits.cols == 4;
  for (double v : logits.data) finite = finite && std::isfinite(v);
  ok = ok && finite;
  return {ok, Fmt("%zu bins x %zu frames from %zu samples; 3x%zux%zu input gives %zux%zu finite logits: %s",
                  s.values.rows, s.values.cols, kPaperSliceLength, img.height(), img.width(), logits.rows,
                  logits.cols, finite ? "yes" : "no")};
}

Outcome Parseval() {
  std::mt19937_64 gen(2002);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const std::size_t m = std::uniform_int_distribution<std::size_t>(1, 400)(gen);
    const std::size_t nfft = m + std::uniform_int_distribution<std::size_t>(0, 150)(gen);
    const auto x = oracle::RandomSignal(m, gen);
    const auto w = BlackmanWindow(m);
    std::vector<double> frame(m);
    double time_energy = 0.0;
    for (std::size_t n = 0; n < m; ++n) {
      frame[n] = x[n] * w[n];
      time_energy += frame[n] * frame[n];
    }
    const auto X = ZeroPaddedDft(frame, nfft);
    double freq_energy = 0.0;
    for (const auto& v : X) freq_energy += std::norm(v);
    freq_energy /= static_cast<double>(nfft);
    if (X.size() != nfft) return {false, "DFT length mismatch"};
    worst = std::max(worst, std::abs(freq_energy - time_energy) / time_energy);
  }
  return {worst <= 1e-9, Fmt("max rel err %.2e over 50 frames (<= 1e-9)", worst)};
}

Outcome Filters() {
  const auto t0 = std::chrono::steady_clock::now();
  const SosCascade notch = DesignNotch(50.0, 512.0, 35.0);
  const double f50[] = {50.0};
  const double notch_db = 20.0 * std::log10(std::abs(FrequencyResponse(notch, f50, 512.0)[0]));

  const SosCascade bp = DesignChebyBandpass(8, 0.01, 200.0, 512.0, 0.5);
  std::vector<double> grid(50);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = 1.0 + 179.0 * static_cast<double>(i) / 49.0;
  double lo = INFINITY, hi = 0.0;
  for (const auto& h : FrequencyResponse(bp, grid, 512.0)) {
    lo = std::min(lo, std::abs(h));
    hi = std::max(hi, std::abs(h));
  }
  double max_pole = 0.0;
  for (const SosCascade* c : {&notch, &bp}) {
    for (const Biquad& s : c->sections) {
      const auto [p1, p2] = s.Poles();
      max_pole = std::max({max_pole, std::abs(p1), std::abs(p2)});
    }
  }
  const double t = Seconds(t0);
  const bool ok = notch_db <= -100.0 && lo >= 0.94406 && hi <= 1.0 + 1e-6 && max_pole < 1.0 && t < 5.0;
  return {ok, Fmt("notch %.1f dB at 50 Hz; passband |H| in [%.6f, %.9f]; max |pole| %.12f; %.2f s", notch_db, lo, hi,
                  max_pole, t)};
}

double GradCheck(VggLiteNet& net, const ImageBatch& batch, const std::vector<int>& labels) {
  const Gradients g = Backward(net, batch, labels);
  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t p = 0; p < net.params.size(); ++p) {
    for (std::size_t i = 0; i < net.params[p].size(); ++i) {
      double& v = net.params[p].data[i];
      const double saved = v;
      v = saved + h;
      const double up = Backward(net, batch, labels).loss;
      v = saved - h;
      const double down = Backward(net, batch, labels).loss;
      v = saved;
      const double numeric = (up - down) / (2.0 * h);
      worst = std::max(worst, oracle::RelErr(g.grads[p].data[i], numeric, 1e-4));
    }
  }
  return worst;
}

Outcome GradientCheck() {
  const auto t0 = std::chrono::steady_clock::now();
  NetShape shape;
  shape.in_channels = 3;
  shape.input_height = shape.input_width = 16;
  shape.widths = {4, 8};
  shape.hidden = 16;
  shape.classes = 3;
  VggLiteNet net = InitNet(shape, 7);
  std::mt19937_64 gen(3003);
  std::normal_distribution<double> d(0.0, 1.0);
  ImageBatch batch(4, 3, 16, 16);
  for (double& v : batch.data) v = d(gen);
  const std::vector<int> labels = {0, 1, 2, 1};
  // Non-trivial affine BN parameters and biases so every path is exercised.
  for (Tensor& t : net.params) {
    if (t.shape.size() == 1) {
      for (double& v : t.data) v += 0.3 * d(gen);
    }
  }

  net.mode = Mode::kTrain;
  const double train_err = GradCheck(net, batch, labels);
  Forward(net, batch);  // populate running statistics
  net.mode = Mode::kEval;
  const double eval_err = GradCheck(net, batch, labels);
  const double t = Seconds(t0);
  const double worst = std::max(train_err, eval_err);
  return {worst <= 1e-4 && t < 120.0,
          Fmt("max rel err train-mode %.2e, eval-mode %.2e (<= 1e-4); %.1f s (< 120 s)", train_err, eval_err, t)};
}

PipelineConfig ReducedConfig(const fs::path& dir) {
  PipelineConfig cfg = PresetConfig("reduced");
  cfg.archive = dir / "synthetic.etc";
  cfg.out_dir = dir / "out";
  return cfg;
}

void RunAll(const PipelineConfig& cfg) {
  for (const char* cmd : {"synth", "spectrogram", "train", "eval"}) RunCommand(cmd, cfg);
}

Outcome Learning(Scheme scheme, const std::string& name) {
  const auto t0 = std::chrono::steady_clock::now();
  PipelineConfig cfg = ReducedConfig(WorkDir(name));
  cfg.scheme = scheme;
  if (cfg.synth.n_subjects != 1 || cfg.synth.n_runs != 2 || cfg.synth.trials_per_class_per_run != 6 ||
      cfg.synth.n_channels != 8 || cfg.train.epochs != 20 || cfg.train.batch_size != 16 || cfg.train.lr != 0.001 ||
      cfg.train.momentum != 0.9) {
    return {false, "reduced preset does not match the required conditions"};
  }
  // Signal power 1/2 against noise_sigma^2.
  const double snr_db = 10.0 * std::log10(0.5 / (cfg.synth.noise_sigma * cfg.synth.noise_sigma));
  RunAll(cfg);
  const auto results = ResultsFromJson(oracle::ReadFile(cfg.out_dir / "results.json"));
  const auto& r = results.at(0);
  std::uint64_t test_n = r.confusion.Total();
  const double t = Seconds(t0);
  const bool ok = r.accuracy >= 0.95 && r.confusion.k() == NumClasses(scheme) && snr_db >= 10.0 && t < 600.0;
  return {ok, Fmt("%zu classes, test accuracy %.4f on %llu examples (>= 0.95); SNR %.1f dB; %.1f s (< 600 s)",
                  r.confusion.k(), r.accuracy, static_cast<unsigned long long>(test_n), snr_db, t)};
}

Outcome Counts() {
  SynthSpec spec;
  spec.n_subjects = 1;
  spec.n_runs = 10;
  spec.trials_per_class_per_run = 6;
  spec.n_channels = 61;
  spec.n_samples = kPaperSliceLength;
  const TrialSet set = SynthesizeDataset(spec);
  const auto keys = EnumerateExamples(set, Scheme::kFourClass);
  std::map<MergedLabel, std::size_t> per_class;
  for (const auto& k : keys) ++per_class[k.label];
  const SplitManifest m = Split(keys, Scheme::kFourClass, SplitRatios{}, 1, SplitStrategy::kPerExampleStratified);
  const bool ok = per_class[MergedLabel::kHandMovement] == 7320 && per_class[MergedLabel::kElbowMovement] == 7320 &&
                  per_class[MergedLabel::kForearmMovement] == 7320 && per_class[MergedLabel::kRest] == 3660 &&
                  keys.size() == 25620 && m.train.size() == 17934 && m.val.size() == 2562 && m.test.size() == 5124;
  return {ok, Fmt("hand %zu, elbow %zu, forearm %zu, rest %zu, total %zu; split %zu/%zu/%zu",
                  per_class[MergedLabel::kHandMovement], per_class[MergedLabel::kElbowMovement],
                  per_class[MergedLabel::kForearmMovement], per_class[MergedLabel::kRest], keys.size(), m.train.size(),
                  m.val.size(), m.test.size())};
}

Outcome Determinism() {
  const fs::path dir = WorkDir("determinism");
  const PipelineConfig cfg = ReducedConfig(dir);
  RunAll(cfg);
  const std::string results1 = oracle::ReadFile(cfg.out_dir / "results.json");
  const std::string model1 = oracle::ReadFile(CheckpointPath(cfg, 1));
  fs::remove_all(dir);
  fs::create_directories(dir);
  RunAll(cfg);
  const std::string results2 = oracle::ReadFile(cfg.out_dir / "results.json");
  const std::string model2 = oracle::ReadFile(CheckpointPath(cfg, 1));
  const bool ok = !results1.empty() && !model1.empty() && results1 == results2 && model1 == model2;
  return {ok, Fmt("results.json %zu bytes %s, checkpoint %zu bytes %s", results1.size(),
                  results1 == results2 ? "identical" : "DIFFER", model1.size(), model1 == model2 ? "identical" : "DIFFER")};
}

Outcome ReportFixture() {
  const double table1[] = {86.51, 88.68, 76.69, 78.12, 83.27, 80.52, 91.80, 97.03,
                           88.70, 93.59, 89.11, 90.00, 84.07, 87.39, 94.96};
  std::vector<SubjectResult> results;
  for (std::size_t i = 0; i < std::size(table1); ++i) {
    // 10000 test examples per subject with round(acc * 100) of them correct.
    const auto correct = static_cast<std::uint64_t>(std::llround(table1[i] * 100.0));
    ConfusionMatrix cm;
    cm.counts = {{correct, 10000 - correct, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}};
    cm.class_names = ClassNames(Scheme::kFourClass);
    results.push_back(MakeSubjectResult(static_cast<std::uint16_t>(i + 1), cm, Scheme::kFourClass, 1,
                                        SplitStrategy::kPerExampleStratified));
  }
  const SubjectTable table = MakeSubjectTable(results);
  const std::string csv = TableToCsv(table);
  const std::string avg = FormatPercent(table.average);
  const bool ok = avg == "87.36" && csv.find("Average,87.36%") != std::string::npos &&
                  csv.find("S8,97.03%") != std::string::npos;
  return {ok, Fmt("average renders as %s%% (mean %.6f)", avg.c_str(), table.average * 100.0)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 STFT matches naive DFT oracle", StftOracle},
      {"2 paper geometry 224x224", Geometry},
      {"3 Parseval per frame", Parseval},
      {"4 notch and Chebyshev bandpass bounds", Filters},
      {"5 finite-difference gradient check", GradientCheck},
      {"6 synthetic end-to-end learning, four classes", [] { return Learning(Scheme::kFourClass, "four_class"); }},
      {"7 example and split count fixtures", Counts},
      {"8 byte-identical reruns", Determinism},
      {"9 subject table average fixture", ReportFixture},
      {"10 three-class head path", [] { return Learning(Scheme::kThreeClass, "three_class"); }},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s criterion %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
