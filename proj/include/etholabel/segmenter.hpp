#pragma once

#include <filesystem>
#include <string>

#include "etholabel/core.hpp"

namespace etholabel {

struct ProbeFailed : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExtractionFailed : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LayoutError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class ImageFormat : std::uint8_t { Jpeg, Png };

struct ExtractionPlan {
    VideoMeta source;
    int fps_target = 5;
    std::filesystem::path output_dir;
    int image_max_edge_px = 448;
    ImageFormat image_format = ImageFormat::Jpeg;
    int jpeg_quality = 85;  // ignored for PNG
    // Command with {input} {fps} {outpattern} placeholders; empty uses the
    // ffmpeg default built from the fields above.
    std::string extractor_template;
};

std::string default_probe_template();
std::string default_extractor_template(const ExtractionPlan& plan);

// Duration, fps and frame count from container metadata via the external
// probe tool. Throws ProbeFailed on unusable input.
VideoMeta probe_video(const std::filesystem::path& path, const std::string& probe_template = "");

// floor(duration) one-second segments, fps_target frames each, written as
//   <output_dir>/<session_id>/<second:06d>/<frame:02d>.jpg
// plus manifest.json alongside. Trailing partial second is dropped. On
// extractor failure the partial session layout is deleted.
SegmentManifest segment_video(const ExtractionPlan& plan, const std::string& session_id);

// Rebuilds a manifest purely from the directory tree (manifest.json is not
// consulted). Throws LayoutError on index gaps or empty segment directories.
SegmentManifest load_frames_dir(const std::filesystem::path& root, const std::string& session_id,
                                int fps_used);

// manifest.json persistence. Frame paths are relative on disk and resolved
// against the session directory in memory.
void save_manifest_json(const SegmentManifest& manifest,
                        const std::filesystem::path& session_dir);
SegmentManifest load_manifest_json(const std::filesystem::path& session_dir);

// All <root>/<session>/manifest.json manifests, ordered by session id.
std::vector<SegmentManifest> load_all_manifests(const std::filesystem::path& root);

}  // namespace etholabel
