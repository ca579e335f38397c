// End-to-end runs of the pipeline, in process and through the CLI binary.
#include <doctest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "eegspec/config.hpp"
#include "eegspec/eval_report.hpp"
#include "eegspec/pipeline.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace eegspec;

namespace {

struct CliResult {
  int status = -1;
  std::string output;
};

// Runs the CLI named by $EEGSPEC_CLI with stderr folded into stdout.
CliResult RunCli(const std::string& args) {
  const char* cli = std::getenv("EEGSPEC_CLI");
  REQUIRE_MESSAGE(cli != nullptr, "EEGSPEC_CLI is not set");
  CliResult r;
  FILE* pipe = popen((std::string(cli) + " " + args + " 2>&1").c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 512> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) r.output += buf.data();
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

PipelineConfig Quick(const fs::path& dir) {
  PipelineConfig cfg = PresetConfig("reduced");
  cfg.archive = dir / "a.etc";
  cfg.out_dir = dir / "out";
  cfg.train.epochs = 3;
  return cfg;
}

}  // namespace

TEST_CASE("in-process synth, spectrogram, train, eval") {
  const fs::path dir = ScratchDir("pipeline_inproc");
  const PipelineConfig cfg = Quick(dir);
  for (const char* cmd : {"synth", "spectrogram", "train", "eval"}) {
    CAPTURE(cmd);
    REQUIRE_NOTHROW(RunCommand(cmd, cfg));
    CHECK(fs::exists(cfg.out_dir / (std::string(cmd) + ".config")));
  }
  CHECK(oracle::ReadFile(cfg.out_dir / "train.config") == cfg.Resolved());
  const std::string json = oracle::ReadFile(cfg.out_dir / "results.json");
  CHECK(json.find("\"config\"") != std::string::npos);
  CHECK(json.find("stft.nfft=63") != std::string::npos);
  const auto results = ResultsFromJson(json);
  REQUIRE(results.size() == 1);
  CHECK(results[0].confusion.Total() > 0);
  CHECK(oracle::ReadFile(ManifestPath(cfg, 1)).find("\"config\"") != std::string::npos);
  CHECK(fs::exists(CheckpointPath(cfg, 1)));
  CHECK(fs::exists(HistoryPath(cfg, 1)));
  CHECK(fs::exists(cfg.out_dir / "table.csv"));
  CHECK(fs::exists(cfg.out_dir / "confusion_s1.pgm"));

  // The eval step refuses a checkpoint trained for another scheme.
  PipelineConfig three = cfg;
  three.scheme = Scheme::kThreeClass;
  CHECK_FAILS_WITH(RunCommand("eval", three), ErrorCode::kInvalidArgument, "classes");
  CHECK_FAILS_WITH(RunCommand("dance", cfg), ErrorCode::kInvalidArgument, "unknown command");
}

TEST_CASE("geometry mismatch is reported before work starts") {
  const fs::path dir = ScratchDir("pipeline_geometry");
  PipelineConfig cfg = Quick(dir);
  cfg.slice_len = 190;
  CHECK_FAILS_WITH(RunCommand("spectrogram", cfg), ErrorCode::kInvalidArgument, "square");
}

TEST_CASE("export images, default channel C6") {
  const fs::path dir = ScratchDir("pipeline_export");
  PipelineConfig cfg = Quick(dir);
  cfg.synth.n_channels = 61;
  cfg.synth.n_runs = 1;
  cfg.synth.trials_per_class_per_run = 1;
  RunCommand("synth", cfg);
  RunCommand("export-images", cfg);
  std::size_t images = 0;
  for (const auto& entry : fs::directory_iterator(cfg.out_dir)) {
    if (entry.path().extension() == ".pgm") {
      ++images;
      CHECK(entry.path().stem().string().find("_C6") != std::string::npos);
    }
  }
  CHECK(images == 4);
  CHECK(fs::exists(cfg.out_dir / "spectrogram_s1_hand_movement_C6.pgm"));

  cfg.exporter.format = ImageFormat::kPng;
  cfg.exporter.channel = "Cz";
  cfg.exporter.dump = true;
  RunCommand("export-images", cfg);
  CHECK(fs::exists(cfg.out_dir / "spectrogram_s1_rest_Cz.png"));
  CHECK(fs::exists(cfg.out_dir / "spectrogram_s1_rest_Cz.spg"));
  cfg.exporter.channel = "Q9";
  CHECK_FAILS_WITH(RunCommand("export-images", cfg), ErrorCode::kNotFound, "Q9");
}

TEST_CASE("import appends csv trials to an archive") {
  const fs::path dir = ScratchDir("pipeline_import");
  std::ofstream(dir / "t1.csv") << "1,2,3\n4,5,6\n";
  std::ofstream(dir / "t2.csv") << "7,8\n9,10\n";
  PipelineConfig cfg = Quick(dir);
  cfg.import.csv = dir / "t1.csv";
  cfg.import.meta.raw_label = RawLabel::kElbowFlexion;
  RunCommand("import", cfg);
  cfg.import.csv = dir / "t2.csv";
  cfg.import.meta.trial_index = 2;
  RunCommand("import", cfg);
  const TrialSet set = ReadArchive(cfg.archive);
  REQUIRE(set.trials.size() == 2);
  CHECK(set.trials[1].channel(1)[1] == 10.0);
  CHECK(set.trials[0].raw_label == RawLabel::kElbowFlexion);
  // Same identity again is rejected.
  CHECK_THROWS_AS(RunCommand("import", cfg), Error);
}

TEST_CASE("cli end to end") {
  const fs::path dir = ScratchDir("pipeline_cli");
  const std::string common = "--preset=reduced --paths.archive=" + (dir / "a.etc").string() +
                             " --paths.out_dir=" + (dir / "out").string() + " --train.epochs 2";
  for (const char* cmd : {"synth", "spectrogram", "train", "eval"}) {
    const CliResult r = RunCli(std::string(cmd) + " " + common);
    CAPTURE(r.output);
    CHECK(r.status == 0);
  }
  CHECK(fs::exists(dir / "out" / "results.json"));
  CHECK(oracle::ReadFile(dir / "out" / "eval.config").find("train.epochs=2\n") != std::string::npos);
}

TEST_CASE("cli diagnostics") {
  const fs::path dir = ScratchDir("pipeline_cli_errors");
  RunCommand("synth", Quick(dir));

  const CliResult missing = RunCli("eval --preset=reduced --paths.archive=" + (dir / "a.etc").string() +
                                   " --paths.out_dir=" + (dir / "empty").string());
  CHECK(missing.status == 5);
  CHECK(missing.output.find("missing checkpoint") != std::string::npos);
  CHECK(std::count(missing.output.begin(), missing.output.end(), '\n') == 1);

  const CliResult bad_key = RunCli("synth --stft.bogus=1");
  CHECK(bad_key.status == 1);
  CHECK(bad_key.output.find("stft.bogus") != std::string::npos);

  const CliResult bad_hop = RunCli("synth --stft.hop=0");
  CHECK(bad_hop.status == 1);
  CHECK(bad_hop.output.find("stft.hop") != std::string::npos);

  const CliResult bad_cmd = RunCli("fly");
  CHECK(bad_cmd.status != 0);

  const CliResult dangling = RunCli("synth --stft.nfft");
  CHECK(dangling.status == 1);
  CHECK(dangling.output.find("invalid argument") != std::string::npos);

  // Flags override the file.
  std::ofstream(dir / "c.cfg") << "stft.nfft=63\nstft.win=31\nstft.hop=1\n";
  const CliResult shown = RunCli("synth --config " + (dir / "c.cfg").string() + " --stft.nfft=31 --print-config" +
                                 " --paths.out_dir=" + (dir / "o").string() + " --paths.archive=" +
                                 (dir / "b.etc").string() + " --synth.runs=1 --synth.channels=2");
  CHECK(shown.status == 0);
  CHECK(shown.output.find("stft.nfft=31\n") != std::string::npos);
}
