#include "etholabel/core.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "etholabel/digest.hpp"
#include "etholabel/util.hpp"

namespace etholabel {

std::string_view to_string(BehaviorLabel label) {
    switch (label) {
        case BehaviorLabel::Freezing: return "Freezing";
        case BehaviorLabel::Fleeing: return "Fleeing";
        case BehaviorLabel::ExploringGrooming: return "Exploring/Grooming";
        case BehaviorLabel::Unknown: return "Unknown";
    }
    return "Unknown";
}

std::optional<BehaviorLabel> label_from_string(std::string_view s) {
    if (s == "Freezing") return BehaviorLabel::Freezing;
    if (s == "Fleeing") return BehaviorLabel::Fleeing;
    if (s == "Exploring/Grooming") return BehaviorLabel::ExploringGrooming;
    if (s == "Unknown") return BehaviorLabel::Unknown;
    return std::nullopt;
}

bool VideoMeta::frame_count_plausible() const {
    return std::abs(static_cast<double>(frame_count) - duration_s * native_fps) <= native_fps;
}

ValidationResult validate_manifest(const SegmentManifest& manifest) {
    ValidationResult result;
    if (manifest.total_seconds != static_cast<int>(manifest.segments.size())) {
        result.violations.push_back(
            "total_seconds=" + std::to_string(manifest.total_seconds) + " but manifest holds " +
            std::to_string(manifest.segments.size()) + " segments");
    }
    std::set<int> seen;
    for (const SegmentRef& seg : manifest.segments) {
        if (seg.second_index < 0 || seg.second_index >= manifest.total_seconds) {
            result.violations.push_back("segment index " + std::to_string(seg.second_index) +
                                        " outside [0, " + std::to_string(manifest.total_seconds) +
                                        ")");
        }
        if (!seen.insert(seg.second_index).second) {
            result.violations.push_back("duplicate second " + std::to_string(seg.second_index));
        }
        if (seg.frame_ids.empty()) {
            result.violations.push_back("segment " + std::to_string(seg.second_index) +
                                        " has no frames");
        }
        if (seg.session_id != manifest.session_id) {
            result.violations.push_back("segment " + std::to_string(seg.second_index) +
                                        " belongs to session '" + seg.session_id + "'");
        }
    }
    for (int i = 0; i < manifest.total_seconds; ++i) {
        if (!seen.count(i)) {
            result.violations.push_back("missing second " + std::to_string(i));
        }
    }
    return result;
}

std::string_view to_string(PromptStyle style) {
    return style == PromptStyle::Simple ? "Simple" : "Complex";
}

std::string_view to_string(InputMode mode) {
    switch (mode) {
        case InputMode::WholeVideo: return "WholeVideo";
        case InputMode::SegmentVideo: return "SegmentVideo";
        case InputMode::SegmentFrames: return "SegmentFrames";
    }
    return "SegmentFrames";
}

std::optional<PromptStyle> prompt_style_from_string(std::string_view s) {
    if (s == "Simple") return PromptStyle::Simple;
    if (s == "Complex") return PromptStyle::Complex;
    return std::nullopt;
}

std::optional<InputMode> input_mode_from_string(std::string_view s) {
    if (s == "WholeVideo") return InputMode::WholeVideo;
    if (s == "SegmentVideo") return InputMode::SegmentVideo;
    if (s == "SegmentFrames") return InputMode::SegmentFrames;
    return std::nullopt;
}

std::string config_digest(const PipelineConfig& config) {
    // Fixed key order; values serialized canonically so the digest is a pure
    // function of field values.
    std::ostringstream ss;
    ss << "backend_endpoint=" << config.backend_endpoint << '\n'
       << "cache_dir=" << config.cache_dir << '\n'
       << "concurrency_limit=" << config.concurrency_limit << '\n'
       << "decoding.max_output_tokens=" << config.decoding.max_output_tokens << '\n'
       << "decoding.temperature=" << format_double(config.decoding.temperature) << '\n'
       << "fps_target=" << config.fps_target << '\n'
       << "icl_count=" << config.icl_count << '\n'
       << "icl_enabled=" << (config.icl_enabled ? 1 : 0) << '\n'
       << "input_mode=" << to_string(config.input_mode) << '\n'
       << "prompt_style=" << to_string(config.prompt_style) << '\n';
    return sha256_hex_short(ss.str());
}

std::string_view to_string(Provenance p) { return p == Provenance::Fresh ? "fresh" : "cached"; }

std::optional<Provenance> provenance_from_string(std::string_view s) {
    if (s == "fresh") return Provenance::Fresh;
    if (s == "cached") return Provenance::Cached;
    return std::nullopt;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

}  // namespace

std::vector<GoldAnnotations> load_gold_csv(const std::filesystem::path& path) {
    std::string content = read_file(path);
    std::istringstream in(content);
    std::string line;
    if (!std::getline(in, line)) throw CsvError("empty gold file: " + path.string());
    if (strip_cr(line) != "session_id,second_index,label") {
        throw CsvError("bad gold header in " + path.string() + ": '" + line + "'");
    }
    std::map<std::string, std::map<int, BehaviorLabel>> by_session;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        line = strip_cr(line);
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != 3) {
            throw CsvError("gold line " + std::to_string(lineno) + ": expected 3 fields");
        }
        int second = 0;
        try {
            second = std::stoi(fields[1]);
        } catch (const std::exception&) {
            throw CsvError("gold line " + std::to_string(lineno) + ": bad second_index '" +
                           fields[1] + "'");
        }
        auto label = label_from_string(fields[2]);
        if (!label || *label == BehaviorLabel::Unknown) {
            throw CsvError("gold line " + std::to_string(lineno) + ": bad label '" + fields[2] +
                           "'");
        }
        if (second < 0) {
            throw CsvError("gold line " + std::to_string(lineno) + ": negative second_index");
        }
        auto [it, inserted] = by_session[fields[0]].emplace(second, *label);
        if (!inserted) {
            throw CsvError("gold line " + std::to_string(lineno) + ": duplicate second " +
                           std::to_string(second) + " for session " + fields[0]);
        }
    }
    std::vector<GoldAnnotations> out;
    for (auto& [session, seconds] : by_session) {
        GoldAnnotations gold;
        gold.session_id = session;
        int expected = 0;
        for (auto& [idx, label] : seconds) {
            if (idx != expected) {
                throw CsvError("gold session " + session + ": missing second " +
                               std::to_string(expected));
            }
            gold.labels.push_back(label);
            ++expected;
        }
        out.push_back(std::move(gold));
    }
    return out;
}

void save_gold_csv(const std::filesystem::path& path, const std::vector<GoldAnnotations>& gold) {
    std::string out = "session_id,second_index,label\n";
    for (const GoldAnnotations& g : gold) {
        for (size_t i = 0; i < g.labels.size(); ++i) {
            out += g.session_id;
            out += ',';
            out += std::to_string(i);
            out += ',';
            out += to_string(g.labels[i]);
            out += '\n';
        }
    }
    write_file_atomic(path, out);
}

}  // namespace etholabel
