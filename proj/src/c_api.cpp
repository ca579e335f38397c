#include "eegspec/eegspec.h"

#include <cstring>
#include <algorithm>
#include <exception>
#include <memory>
#include <new>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "eegspec/config.hpp"
#include "eegspec/error.hpp"
#include "eegspec/filters.hpp"
#include "eegspec/pipeline.hpp"
#include "eegspec/stft.hpp"
#include "eegspec/trial_store.hpp"

struct eegspec_config {
  std::string file;
  std::vector<std::pair<std::string, std::string>> overrides;
  std::optional<eegspec::PipelineConfig> resolved;
};

struct eegspec_trialset {
  eegspec::TrialSet set;
};

struct eegspec_cascade {
  eegspec::SosCascade cascade;
};

namespace {

thread_local std::string g_last_error;

eegspec_status FromCode(eegspec::ErrorCode code) {
  switch (code) {
    case eegspec::ErrorCode::kInvalidArgument: return EEGSPEC_ERR_INVALID_ARGUMENT;
    case eegspec::ErrorCode::kIo: return EEGSPEC_ERR_IO;
    case eegspec::ErrorCode::kFormat: return EEGSPEC_ERR_FORMAT;
    case eegspec::ErrorCode::kNumeric: return EEGSPEC_ERR_NUMERIC;
    case eegspec::ErrorCode::kNotFound: return EEGSPEC_ERR_NOT_FOUND;
  }
  return EEGSPEC_ERR_INTERNAL;
}

template <typename Fn>
eegspec_status Guard(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return EEGSPEC_OK;
  } catch (const eegspec::Error& e) {
    g_last_error = e.what();
    return FromCode(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return EEGSPEC_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return EEGSPEC_ERR_INTERNAL;
  }
}

void Require(bool ok, const char* what) {
  if (!ok) eegspec::Fail(eegspec::ErrorCode::kInvalidArgument, what);
}

const eegspec::PipelineConfig& Resolved(const eegspec_config* cfg) {
  Require(cfg != nullptr, "config handle is NULL");
  if (!cfg->resolved) eegspec::Fail(eegspec::ErrorCode::kInvalidArgument, "config has not been resolved");
  return *cfg->resolved;
}

void CopyOut(const std::string& s, char* buf, std::size_t buf_size, std::size_t* needed) {
  if (needed) *needed = s.size() + 1;
  if (!buf) return;
  if (buf_size < s.size() + 1) eegspec::Fail(eegspec::ErrorCode::kInvalidArgument, "output buffer too small");
  std::memcpy(buf, s.c_str(), s.size() + 1);
}

}  // namespace

extern "C" {

const char* eegspec_version(void) { return "1.0.0"; }

const char* eegspec_last_error(void) { return g_last_error.c_str(); }

const char* eegspec_status_name(eegspec_status status) {
  switch (status) {
    case EEGSPEC_OK: return "ok";
    case EEGSPEC_ERR_INVALID_ARGUMENT: return "invalid argument";
    case EEGSPEC_ERR_IO: return "i/o error";
    case EEGSPEC_ERR_FORMAT: return "format error";
    case EEGSPEC_ERR_NUMERIC: return "numeric error";
    case EEGSPEC_ERR_NOT_FOUND: return "not found";
    case EEGSPEC_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

eegspec_status eegspec_config_create(eegspec_config** out) {
  return Guard([&] {
    Require(out != nullptr, "out is NULL");
    auto cfg = std::make_unique<eegspec_config>();
    cfg->resolved = eegspec::PipelineConfig{};
    *out = cfg.release();
  });
}

void eegspec_config_destroy(eegspec_config* cfg) { delete cfg; }

eegspec_status eegspec_config_set_file(eegspec_config* cfg, const char* path) {
  return Guard([&] {
    Require(cfg != nullptr, "config handle is NULL");
    cfg->file = path ? path : "";
    cfg->resolved.reset();
  });
}

eegspec_status eegspec_config_set(eegspec_config* cfg, const char* key, const char* value) {
  return Guard([&] {
    Require(cfg != nullptr && key != nullptr && value != nullptr, "NULL argument");
    cfg->overrides.emplace_back(key, value);
    cfg->resolved.reset();
  });
}

eegspec_status eegspec_config_resolve(eegspec_config* cfg) {
  return Guard([&] {
    Require(cfg != nullptr, "config handle is NULL");
    cfg->resolved = eegspec::ParseConfig(cfg->file, cfg->overrides);
  });
}

eegspec_status eegspec_config_get(const eegspec_config* cfg, const char* key, char* buf, size_t buf_size,
                                  size_t* needed) {
  return Guard([&] {
    Require(key != nullptr, "key is NULL");
    CopyOut(eegspec::GetConfigValue(Resolved(cfg), key), buf, buf_size, needed);
  });
}

eegspec_status eegspec_config_dump(const eegspec_config* cfg, char* buf, size_t buf_size, size_t* needed) {
  return Guard([&] { CopyOut(Resolved(cfg).Resolved(), buf, buf_size, needed); });
}

eegspec_status eegspec_run(const eegspec_config* cfg, const char* command) {
  return Guard([&] {
    Require(command != nullptr, "command is NULL");
    eegspec::RunCommand(command, Resolved(cfg));
  });
}

eegspec_status eegspec_trialset_read(const char* path, eegspec_trialset** out) {
  return Guard([&] {
    Require(path != nullptr && out != nullptr, "NULL argument");
    *out = new eegspec_trialset{eegspec::ReadArchive(path)};
  });
}

eegspec_status eegspec_trialset_write(const eegspec_trialset* set, const char* path) {
  return Guard([&] {
    Require(set != nullptr && path != nullptr, "NULL argument");
    eegspec::WriteArchive(set->set, path);
  });
}

eegspec_status eegspec_trialset_synthesize(const eegspec_config* cfg, eegspec_trialset** out) {
  return Guard([&] {
    Require(out != nullptr, "out is NULL");
    *out = new eegspec_trialset{eegspec::SynthesizeDataset(Resolved(cfg).synth)};
  });
}

void eegspec_trialset_destroy(eegspec_trialset* set) { delete set; }

eegspec_status eegspec_trialset_info(const eegspec_trialset* set, size_t* n_trials, size_t* n_channels, double* fs) {
  return Guard([&] {
    Require(set != nullptr, "trial set handle is NULL");
    if (n_trials) *n_trials = set->set.trials.size();
    if (n_channels) *n_channels = set->set.n_channels();
    if (fs) *fs = set->set.fs;
  });
}

eegspec_status eegspec_trialset_channel(const eegspec_trialset* set, size_t index, size_t channel, double* out,
                                        size_t capacity, size_t* needed) {
  return Guard([&] {
    Require(set != nullptr, "trial set handle is NULL");
    Require(index < set->set.trials.size(), "trial index out of range");
    const eegspec::Trial& t = set->set.trials[index];
    Require(channel < t.n_channels, "channel index out of range");
    if (needed) *needed = t.n_samples;
    if (!out) return;
    Require(capacity >= t.n_samples, "output buffer too small");
    const auto ch = t.channel(channel);
    std::copy(ch.begin(), ch.end(), out);
  });
}

eegspec_status eegspec_cascade_cheby_bandpass(int order, double low_hz, double high_hz, double fs, double ripple_db,
                                              eegspec_cascade** out) {
  return Guard([&] {
    Require(out != nullptr, "out is NULL");
    *out = new eegspec_cascade{eegspec::DesignChebyBandpass(order, low_hz, high_hz, fs, ripple_db)};
  });
}

eegspec_status eegspec_cascade_notch(double f0_hz, double fs, double q, eegspec_cascade** out) {
  return Guard([&] {
    Require(out != nullptr, "out is NULL");
    *out = new eegspec_cascade{eegspec::DesignNotch(f0_hz, fs, q)};
  });
}

void eegspec_cascade_destroy(eegspec_cascade* cascade) { delete cascade; }

eegspec_status eegspec_cascade_apply(const eegspec_cascade* cascade, const double* signal, size_t n, double* out) {
  return Guard([&] {
    Require(cascade != nullptr && (n == 0 || (signal != nullptr && out != nullptr)), "NULL argument");
    const auto y = eegspec::ApplySos(cascade->cascade, std::span<const double>(signal, n));
    std::copy(y.begin(), y.end(), out);
  });
}

eegspec_status eegspec_cascade_response(const eegspec_cascade* cascade, const double* freqs_hz, size_t n, double fs,
                                        double* out_re_im) {
  return Guard([&] {
    Require(cascade != nullptr && (n == 0 || (freqs_hz != nullptr && out_re_im != nullptr)), "NULL argument");
    const auto h = eegspec::FrequencyResponse(cascade->cascade, std::span<const double>(freqs_hz, n), fs);
    for (std::size_t i = 0; i < h.size(); ++i) {
      out_re_im[2 * i] = h[i].real();
      out_re_im[2 * i + 1] = h[i].imag();
    }
  });
}

eegspec_status eegspec_cascade_json(const eegspec_cascade* cascade, char* buf, size_t buf_size, size_t* needed) {
  return Guard([&] {
    Require(cascade != nullptr, "cascade handle is NULL");
    CopyOut(eegspec::CascadeToJson(cascade->cascade), buf, buf_size, needed);
  });
}

eegspec_status eegspec_log_spectrogram(const double* signal, size_t n, size_t win_len, size_t hop, size_t nfft,
                                       double fs, double epsilon, double* out, size_t capacity, size_t* rows,
                                       size_t* cols) {
  return Guard([&] {
    Require(signal != nullptr || n == 0, "signal is NULL");
    const eegspec::StftConfig cfg{win_len, hop, nfft, fs, epsilon};
    cfg.Validate();
    const std::size_t r = cfg.OneSidedBins();
    const std::size_t c = cfg.NumFrames(n);
    if (rows) *rows = r;
    if (cols) *cols = c;
    if (!out) return;
    Require(capacity >= r * c, "output buffer too small");
    const eegspec::Spectrogram s = eegspec::LogPower(eegspec::Stft(std::span<const double>(signal, n), cfg));
    std::copy(s.values.data.begin(), s.values.data.end(), out);
  });
}

}  // extern "C"
