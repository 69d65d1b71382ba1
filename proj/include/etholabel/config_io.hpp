#pragma once

#include <filesystem>

#include "json.hpp"

#include "etholabel/core.hpp"

namespace etholabel {

nlohmann::ordered_json pipeline_config_to_json(const PipelineConfig& config);
PipelineConfig pipeline_config_from_json(const nlohmann::json& json);

// JSON config file; unknown keys rejected so typos surface as errors.
PipelineConfig load_config_file(const std::filesystem::path& path);

void save_config_file(const PipelineConfig& config, const std::filesystem::path& path);

// The 2x2x2 ablation grid: {Simple, Complex} x {ICL off, on} x
// {WholeVideo, SegmentFrames}, with `base` supplying the operational fields.
std::vector<PipelineConfig> default_grid(const PipelineConfig& base);

// Grid file: JSON array of config objects.
std::vector<PipelineConfig> load_grid_file(const std::filesystem::path& path);

}  // namespace etholabel
