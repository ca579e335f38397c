// eegspec command-line front end. Talks to the library only through the C API.
#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "eegspec/eegspec.h"

namespace {

int Report(eegspec_status status) {
  std::fprintf(stderr, "eegspec: %s: %s\n", eegspec_status_name(status), eegspec_last_error());
  return static_cast<int>(status);
}

// Leftover arguments are config overrides: --section.key=value or
// --section.key value.
bool CollectOverrides(const std::vector<std::string>& extras,
                      std::vector<std::pair<std::string, std::string>>& out, std::string& error) {
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (arg.rfind("--", 0) != 0 || arg.size() <= 2) {
      error = "unexpected argument '" + arg + "'";
      return false;
    }
    const std::string body = arg.substr(2);
    const auto eq = body.find('=');
    if (eq != std::string::npos) {
      out.emplace_back(body.substr(0, eq), body.substr(eq + 1));
    } else if (i + 1 < extras.size()) {
      out.emplace_back(body, extras[++i]);
    } else {
      error = "override '" + arg + "' has no value";
      return false;
    }
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EEG spectrogram classification pipeline"};
  app.allow_extras();
  app.set_version_flag("--version", std::string(eegspec_version()));

  std::string command;
  std::string config_path;
  bool print_config = false;
  app.add_option("command", command, "synth | import | spectrogram | train | eval | export-images")
      ->required()
      ->check(CLI::IsMember({"synth", "import", "spectrogram", "train", "eval", "export-images"}));
  app.add_option("-c,--config", config_path, "section.key=value config file");
  app.add_flag("--print-config", print_config, "print the resolved config before running");
  app.footer("Any config key can be overridden with --section.key=value, e.g. --stft.nfft=63.");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  std::vector<std::pair<std::string, std::string>> overrides;
  std::string error;
  if (!CollectOverrides(app.remaining(), overrides, error)) {
    std::fprintf(stderr, "eegspec: %s: %s\n", eegspec_status_name(EEGSPEC_ERR_INVALID_ARGUMENT), error.c_str());
    return EEGSPEC_ERR_INVALID_ARGUMENT;
  }

  eegspec_config* cfg = nullptr;
  eegspec_status st = eegspec_config_create(&cfg);
  if (st != EEGSPEC_OK) return Report(st);
  if (!config_path.empty()) st = eegspec_config_set_file(cfg, config_path.c_str());
  for (const auto& [key, value] : overrides) {
    if (st != EEGSPEC_OK) break;
    st = eegspec_config_set(cfg, key.c_str(), value.c_str());
  }
  if (st == EEGSPEC_OK) st = eegspec_config_resolve(cfg);
  if (st == EEGSPEC_OK && print_config) {
    std::size_t needed = 0;
    st = eegspec_config_dump(cfg, nullptr, 0, &needed);
    if (st == EEGSPEC_OK) {
      std::string text(needed, '\0');
      st = eegspec_config_dump(cfg, text.data(), text.size(), &needed);
      if (st == EEGSPEC_OK) std::fputs(text.c_str(), stdout);
    }
  }
  if (st == EEGSPEC_OK) st = eegspec_run(cfg, command.c_str());
  const int rc = st == EEGSPEC_OK ? 0 : Report(st);
  eegspec_config_destroy(cfg);
  return rc;
}
