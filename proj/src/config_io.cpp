#include "etholabel/config_io.hpp"

#include <set>

#include "etholabel/util.hpp"

namespace etholabel {

using ordered_json = nlohmann::ordered_json;

ordered_json pipeline_config_to_json(const PipelineConfig& config) {
    ordered_json json;
    json["prompt_style"] = std::string(to_string(config.prompt_style));
    json["icl_enabled"] = config.icl_enabled;
    json["input_mode"] = std::string(to_string(config.input_mode));
    json["fps_target"] = config.fps_target;
    json["icl_count"] = config.icl_count;
    json["temperature"] = config.decoding.temperature;
    json["max_output_tokens"] = config.decoding.max_output_tokens;
    json["concurrency_limit"] = config.concurrency_limit;
    json["backend_endpoint"] = config.backend_endpoint;
    json["cache_dir"] = config.cache_dir;
    return json;
}

PipelineConfig pipeline_config_from_json(const nlohmann::json& json) {
    static const std::set<std::string> known = {
        "prompt_style",  "icl_enabled",       "input_mode",        "fps_target", "icl_count",
        "temperature",   "max_output_tokens", "concurrency_limit", "backend_endpoint",
        "cache_dir"};
    for (const auto& [key, value] : json.items()) {
        if (!known.count(key)) {
            throw std::invalid_argument("unknown config key '" + key + "'");
        }
    }
    PipelineConfig config;
    if (json.contains("prompt_style")) {
        auto style = prompt_style_from_string(json.at("prompt_style").get<std::string>());
        if (!style) {
            throw std::invalid_argument("prompt_style must be Simple or Complex");
        }
        config.prompt_style = *style;
    }
    if (json.contains("icl_enabled")) config.icl_enabled = json.at("icl_enabled").get<bool>();
    if (json.contains("input_mode")) {
        auto mode = input_mode_from_string(json.at("input_mode").get<std::string>());
        if (!mode) {
            throw std::invalid_argument(
                "input_mode must be WholeVideo, SegmentVideo or SegmentFrames");
        }
        config.input_mode = *mode;
    }
    if (json.contains("fps_target")) config.fps_target = json.at("fps_target").get<int>();
    if (json.contains("icl_count")) config.icl_count = json.at("icl_count").get<int>();
    if (json.contains("temperature")) {
        config.decoding.temperature = json.at("temperature").get<double>();
    }
    if (json.contains("max_output_tokens")) {
        config.decoding.max_output_tokens = json.at("max_output_tokens").get<int>();
    }
    if (json.contains("concurrency_limit")) {
        config.concurrency_limit = json.at("concurrency_limit").get<int>();
    }
    if (json.contains("backend_endpoint")) {
        config.backend_endpoint = json.at("backend_endpoint").get<std::string>();
    }
    if (json.contains("cache_dir")) config.cache_dir = json.at("cache_dir").get<std::string>();

    if (config.fps_target < 1) throw std::invalid_argument("fps_target must be positive");
    if (config.icl_count < 0) throw std::invalid_argument("icl_count must be nonnegative");
    if (config.concurrency_limit < 1) {
        throw std::invalid_argument("concurrency_limit must be positive");
    }
    return config;
}

PipelineConfig load_config_file(const std::filesystem::path& path) {
    return pipeline_config_from_json(nlohmann::json::parse(read_file(path)));
}

void save_config_file(const PipelineConfig& config, const std::filesystem::path& path) {
    write_file_atomic(path, pipeline_config_to_json(config).dump(2) + "\n");
}

std::vector<PipelineConfig> default_grid(const PipelineConfig& base) {
    std::vector<PipelineConfig> grid;
    for (PromptStyle style : {PromptStyle::Simple, PromptStyle::Complex}) {
        for (bool icl : {false, true}) {
            for (InputMode mode : {InputMode::WholeVideo, InputMode::SegmentFrames}) {
                PipelineConfig config = base;
                config.prompt_style = style;
                config.icl_enabled = icl;
                config.input_mode = mode;
                grid.push_back(config);
            }
        }
    }
    return grid;
}

std::vector<PipelineConfig> load_grid_file(const std::filesystem::path& path) {
    auto json = nlohmann::json::parse(read_file(path));
    if (!json.is_array() || json.empty()) {
        throw std::invalid_argument("grid file must be a nonempty JSON array of configs");
    }
    std::vector<PipelineConfig> grid;
    for (const auto& entry : json) {
        grid.push_back(pipeline_config_from_json(entry));
    }
    return grid;
}

}  // namespace etholabel
