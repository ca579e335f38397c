#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "eegspec/config.hpp"
#include "eegspec/filters.hpp"

namespace eegspec {

// Bandpass then notch, each only when enabled.
std::vector<SosCascade> BuildCascades(const FilterParams& params, double fs);

// Commands: synth, import, spectrogram, train, eval, export-images.
// Throws eegspec::Error on failure.
void RunCommand(std::string_view command, const PipelineConfig& cfg);

// Files the commands read and write inside cfg.out_dir.
std::filesystem::path ExamplesPath(const PipelineConfig& cfg, std::uint16_t subject);
std::filesystem::path ManifestPath(const PipelineConfig& cfg, std::uint16_t subject);
std::filesystem::path CheckpointPath(const PipelineConfig& cfg, std::uint16_t subject);
std::filesystem::path HistoryPath(const PipelineConfig& cfg, std::uint16_t subject);

}  // namespace eegspec
