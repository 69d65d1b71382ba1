#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace etholabel {

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

// Closed per-second vocabulary. Unknown never appears in gold data; it marks
// predictions that could not be parsed and always scores as an error.
enum class BehaviorLabel : std::uint8_t {
    Freezing = 0,
    Fleeing = 1,
    ExploringGrooming = 2,
    Unknown = 3,
};

// Gold classes in canonical presentation order.
inline constexpr std::array<BehaviorLabel, 3> kGoldClasses = {
    BehaviorLabel::Freezing, BehaviorLabel::Fleeing, BehaviorLabel::ExploringGrooming};

inline constexpr int kNumGoldClasses = 3;
inline constexpr int kNumPredClasses = 4;  // gold classes + Unknown

std::string_view to_string(BehaviorLabel label);

// Exact canonical spelling only ("Freezing", "Fleeing", "Exploring/Grooming",
// "Unknown"); lenient matching lives in the label parser.
std::optional<BehaviorLabel> label_from_string(std::string_view s);

// ---------------------------------------------------------------------------
// Video + segmentation types
// ---------------------------------------------------------------------------

struct VideoMeta {
    std::string source_path;
    double duration_s = 0.0;
    double native_fps = 0.0;
    long frame_count = 0;

    // One second of slack for container rounding.
    bool frame_count_plausible() const;
};

struct SegmentRef {
    std::string session_id;
    int second_index = 0;               // 0-based
    std::vector<std::string> frame_ids;  // capture order, resolved paths

    double time_begin() const { return static_cast<double>(second_index); }
    double time_end() const { return static_cast<double>(second_index) + 1.0; }

    bool operator==(const SegmentRef&) const = default;
};

struct SegmentManifest {
    std::string session_id;
    int fps_used = 0;
    int total_seconds = 0;
    std::vector<SegmentRef> segments;

    bool operator==(const SegmentManifest&) const = default;
};

struct ValidationResult {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

// Returns ok iff every SegmentManifest invariant holds. Violations are data,
// not failures.
ValidationResult validate_manifest(const SegmentManifest& manifest);

// ---------------------------------------------------------------------------
// In-context examples
// ---------------------------------------------------------------------------

struct IclExample {
    std::vector<std::string> frames;  // ordered frame paths
    BehaviorLabel label = BehaviorLabel::Unknown;
    std::string source_session;

    // Optional clip reference so video-input modes can present examples the
    // same way as the target.
    std::string clip_path;
    double clip_start_s = 0.0;
    double clip_end_s = 0.0;

    bool has_clip() const { return !clip_path.empty(); }
};

// ---------------------------------------------------------------------------
// Pipeline configuration
// ---------------------------------------------------------------------------

enum class PromptStyle : std::uint8_t { Simple, Complex };
enum class InputMode : std::uint8_t { WholeVideo, SegmentVideo, SegmentFrames };

std::string_view to_string(PromptStyle style);
std::string_view to_string(InputMode mode);
std::optional<PromptStyle> prompt_style_from_string(std::string_view s);
std::optional<InputMode> input_mode_from_string(std::string_view s);

struct Decoding {
    double temperature = 0.0;
    // 0 = auto: 64 for single-segment requests, 16*n for whole-video.
    int max_output_tokens = 0;

    bool operator==(const Decoding&) const = default;
};

struct PipelineConfig {
    PromptStyle prompt_style = PromptStyle::Simple;
    bool icl_enabled = false;
    InputMode input_mode = InputMode::SegmentFrames;
    int fps_target = 5;
    int icl_count = 3;
    Decoding decoding;
    int concurrency_limit = 4;
    std::string backend_endpoint;
    std::string cache_dir;

    bool operator==(const PipelineConfig&) const = default;
};

// Deterministic, field-order independent; changing any field changes the
// digest. Stable across processes.
std::string config_digest(const PipelineConfig& config);

// ---------------------------------------------------------------------------
// Annotations
// ---------------------------------------------------------------------------

enum class Provenance : std::uint8_t { Fresh, Cached };

std::string_view to_string(Provenance p);
std::optional<Provenance> provenance_from_string(std::string_view s);

struct AnnotationVector {
    std::string session_id;
    std::string config_id;
    std::vector<BehaviorLabel> labels;      // one per second
    std::vector<Provenance> provenance;     // aligned with labels
};

struct GoldAnnotations {
    std::string session_id;
    std::vector<BehaviorLabel> labels;  // never Unknown
};

// ---------------------------------------------------------------------------
// Gold CSV (header `session_id,second_index,label`, UTF-8, LF)
// ---------------------------------------------------------------------------

struct CsvError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Rows may arrive in any order; per session the indices must cover 0..n-1
// exactly. Unknown labels are rejected.
std::vector<GoldAnnotations> load_gold_csv(const std::filesystem::path& path);

void save_gold_csv(const std::filesystem::path& path, const std::vector<GoldAnnotations>& gold);

}  // namespace etholabel
