#include "etholabel/segmenter.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

#include "etholabel/util.hpp"

namespace etholabel {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string substitute(std::string tmpl, std::string_view key, const std::string& value) {
    size_t pos = 0;
    while ((pos = tmpl.find(key, pos)) != std::string::npos) {
        tmpl.replace(pos, key.size(), value);
        pos += value.size();
    }
    return tmpl;
}

std::optional<double> parse_double(const std::string& s) {
    try {
        size_t used = 0;
        double v = std::stod(s, &used);
        if (used == 0) return std::nullopt;
        return v;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

std::optional<double> parse_rational_fps(const std::string& s) {
    size_t slash = s.find('/');
    if (slash == std::string::npos) return parse_double(s);
    auto num = parse_double(s.substr(0, slash));
    auto den = parse_double(s.substr(slash + 1));
    if (!num || !den || *den == 0.0) return std::nullopt;
    return *num / *den;
}

}  // namespace

std::string default_probe_template() {
    return "ffprobe -v error -select_streams v:0 "
           "-show_entries stream=avg_frame_rate,nb_frames:format=duration "
           "-of default=noprint_wrappers=1 {input}";
}

std::string default_extractor_template(const ExtractionPlan& plan) {
    int edge = std::max(plan.image_max_edge_px, 1);
    std::ostringstream ss;
    ss << "ffmpeg -hide_banner -loglevel error -nostdin -y -i {input} "
       << "-vf \"fps={fps},scale=w='min(iw\\," << edge << ")':h='min(ih\\," << edge
       << ")':force_original_aspect_ratio=decrease\"";
    if (plan.image_format == ImageFormat::Jpeg) {
        int qscale = std::clamp(2 + (95 - plan.jpeg_quality) / 5, 2, 31);
        ss << " -q:v " << qscale;
    }
    ss << " {outpattern}";
    return ss.str();
}

static std::string frame_extension(const ExtractionPlan& plan) {
    return plan.image_format == ImageFormat::Png ? ".png" : ".jpg";
}

VideoMeta probe_video(const fs::path& path, const std::string& probe_template) {
    std::error_code ec;
    if (!fs::exists(path, ec)) {
        throw ProbeFailed("no such file: " + path.string());
    }
    std::string tmpl = probe_template.empty() ? default_probe_template() : probe_template;
    std::string cmd = substitute(tmpl, "{input}", shell_quote(path.string()));
    CommandResult result = run_shell_capture(cmd);
    if (result.exit_code != 0) {
        throw ProbeFailed("probe command failed (exit " + std::to_string(result.exit_code) +
                          ") for " + path.string());
    }

    std::optional<double> fps;
    std::optional<double> duration;
    std::optional<long> frames;
    std::istringstream in(result.output);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        size_t eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        if (key == "avg_frame_rate") {
            fps = parse_rational_fps(value);
        } else if (key == "duration") {
            duration = parse_double(value);
        } else if (key == "nb_frames") {
            if (auto v = parse_double(value)) frames = static_cast<long>(std::llround(*v));
        }
    }

    if (!fps || *fps <= 0.0) throw ProbeFailed("no usable frame rate for " + path.string());
    if (!duration || *duration < 0.0) throw ProbeFailed("no usable duration for " + path.string());

    VideoMeta meta;
    meta.source_path = path.string();
    meta.duration_s = *duration;
    meta.native_fps = *fps;
    meta.frame_count = frames ? *frames : static_cast<long>(std::llround(*duration * *fps));
    if (!meta.frame_count_plausible()) {
        throw ProbeFailed("container metadata inconsistent for " + path.string() + ": " +
                          std::to_string(meta.frame_count) + " frames vs " +
                          format_double(meta.duration_s) + "s at " +
                          format_double(meta.native_fps) + " fps");
    }
    return meta;
}

SegmentManifest segment_video(const ExtractionPlan& plan, const std::string& session_id) {
    if (plan.fps_target < 1) {
        throw std::invalid_argument("fps_target must be positive");
    }
    if (static_cast<double>(plan.fps_target) > plan.source.native_fps) {
        throw std::invalid_argument("fps_target " + std::to_string(plan.fps_target) +
                                    " exceeds native fps " + format_double(plan.source.native_fps));
    }
    if (session_id.empty()) throw std::invalid_argument("session_id must not be empty");

    const int total_seconds = static_cast<int>(std::floor(plan.source.duration_s + 1e-9));
    const long needed = static_cast<long>(total_seconds) * plan.fps_target;

    fs::path session_dir = plan.output_dir / session_id;
    fs::path temp_dir = plan.output_dir / (".extract-" + session_id + ".tmp");
    fs::remove_all(session_dir);
    fs::remove_all(temp_dir);
    fs::create_directories(temp_dir);

    auto cleanup = [&]() {
        std::error_code ec;
        fs::remove_all(temp_dir, ec);
        fs::remove_all(session_dir, ec);
    };

    try {
        if (needed > 0) {
            std::string tmpl = plan.extractor_template.empty() ? default_extractor_template(plan)
                                                               : plan.extractor_template;
            std::string cmd = substitute(tmpl, "{input}", shell_quote(plan.source.source_path));
            cmd = substitute(cmd, "{fps}", std::to_string(plan.fps_target));
            cmd = substitute(cmd, "{outpattern}",
                             shell_quote((temp_dir / ("%06d" + frame_extension(plan))).string()));
            int rc = run_shell(cmd);
            if (rc != 0) {
                throw ExtractionFailed("extractor exited with status " + std::to_string(rc));
            }

            std::vector<fs::path> produced;
            for (const auto& entry : fs::directory_iterator(temp_dir)) {
                if (entry.is_regular_file()) produced.push_back(entry.path());
            }
            std::sort(produced.begin(), produced.end());
            if (static_cast<long>(produced.size()) < needed) {
                throw ExtractionFailed("extractor produced " + std::to_string(produced.size()) +
                                       " frames, need " + std::to_string(needed));
            }

            for (long k = 0; k < needed; ++k) {
                int second = static_cast<int>(k / plan.fps_target);
                int frame = static_cast<int>(k % plan.fps_target);
                fs::path second_dir = session_dir / zero_pad(second, 6);
                fs::create_directories(second_dir);
                fs::rename(produced[static_cast<size_t>(k)],
                           second_dir / (zero_pad(frame, 2) + frame_extension(plan)));
            }
        }
        fs::remove_all(temp_dir);
        fs::create_directories(session_dir);
    } catch (...) {
        cleanup();
        throw;
    }

    SegmentManifest manifest;
    manifest.session_id = session_id;
    manifest.fps_used = plan.fps_target;
    manifest.total_seconds = total_seconds;
    for (int second = 0; second < total_seconds; ++second) {
        SegmentRef segment;
        segment.session_id = session_id;
        segment.second_index = second;
        for (int frame = 0; frame < plan.fps_target; ++frame) {
            segment.frame_ids.push_back(
                (session_dir / zero_pad(second, 6) / (zero_pad(frame, 2) + frame_extension(plan)))
                    .string());
        }
        manifest.segments.push_back(std::move(segment));
    }
    save_manifest_json(manifest, session_dir);
    return manifest;
}

SegmentManifest load_frames_dir(const fs::path& root, const std::string& session_id,
                                int fps_used) {
    fs::path session_dir = root / session_id;
    if (!fs::is_directory(session_dir)) {
        throw LayoutError("no session directory: " + session_dir.string());
    }

    std::vector<int> seconds;
    for (const auto& entry : fs::directory_iterator(session_dir)) {
        if (!entry.is_directory()) continue;
        std::string name = entry.path().filename().string();
        if (name.size() != 6 || !std::all_of(name.begin(), name.end(), [](char c) {
                return c >= '0' && c <= '9';
            })) {
            continue;
        }
        seconds.push_back(std::stoi(name));
    }
    std::sort(seconds.begin(), seconds.end());

    SegmentManifest manifest;
    manifest.session_id = session_id;
    manifest.fps_used = fps_used;
    manifest.total_seconds = static_cast<int>(seconds.size());

    for (int expected = 0; expected < manifest.total_seconds; ++expected) {
        if (seconds[static_cast<size_t>(expected)] != expected) {
            throw LayoutError("missing second " + std::to_string(expected) + " in " +
                              session_dir.string());
        }
        fs::path second_dir = session_dir / zero_pad(expected, 6);
        SegmentRef segment;
        segment.session_id = session_id;
        segment.second_index = expected;
        std::vector<std::string> frames;
        for (const auto& entry : fs::directory_iterator(second_dir)) {
            if (entry.is_regular_file()) frames.push_back(entry.path().string());
        }
        std::sort(frames.begin(), frames.end());
        if (frames.empty()) {
            throw LayoutError("segment directory for second " + std::to_string(expected) +
                              " is empty in " + session_dir.string());
        }
        segment.frame_ids = std::move(frames);
        manifest.segments.push_back(std::move(segment));
    }
    return manifest;
}

void save_manifest_json(const SegmentManifest& manifest, const fs::path& session_dir) {
    ordered_json json;
    json["session_id"] = manifest.session_id;
    json["fps_used"] = manifest.fps_used;
    json["total_seconds"] = manifest.total_seconds;
    json["segments"] = ordered_json::array();
    for (const SegmentRef& segment : manifest.segments) {
        ordered_json seg;
        seg["second_index"] = segment.second_index;
        seg["frames"] = ordered_json::array();
        for (const std::string& frame : segment.frame_ids) {
            seg["frames"].push_back(
                fs::path(frame).lexically_relative(session_dir).generic_string());
        }
        json["segments"].push_back(std::move(seg));
    }
    write_file_atomic(session_dir / "manifest.json", json.dump(2) + "\n");
}

SegmentManifest load_manifest_json(const fs::path& session_dir) {
    auto json = nlohmann::json::parse(read_file(session_dir / "manifest.json"));
    SegmentManifest manifest;
    manifest.session_id = json.at("session_id").get<std::string>();
    manifest.fps_used = json.at("fps_used").get<int>();
    manifest.total_seconds = json.at("total_seconds").get<int>();
    for (const auto& seg : json.at("segments")) {
        SegmentRef segment;
        segment.session_id = manifest.session_id;
        segment.second_index = seg.at("second_index").get<int>();
        for (const auto& frame : seg.at("frames")) {
            segment.frame_ids.push_back((session_dir / frame.get<std::string>()).string());
        }
        manifest.segments.push_back(std::move(segment));
    }
    return manifest;
}

std::vector<SegmentManifest> load_all_manifests(const fs::path& root) {
    std::vector<SegmentManifest> manifests;
    if (!fs::is_directory(root)) return manifests;
    std::vector<fs::path> session_dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory() && fs::exists(entry.path() / "manifest.json")) {
            session_dirs.push_back(entry.path());
        }
    }
    std::sort(session_dirs.begin(), session_dirs.end());
    for (const fs::path& dir : session_dirs) {
        manifests.push_back(load_manifest_json(dir));
    }
    return manifests;
}

}  // namespace etholabel
