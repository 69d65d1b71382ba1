#include "etholabel/promptkit.hpp"

#include <algorithm>
#include <filesystem>
#include <map>

#include "etholabel/util.hpp"

namespace etholabel {

namespace {

constexpr std::string_view kSimpleTemplate =
    "Task:\n"
    "\n"
    "Label the mouse's behavior seen per second for this {n}-second video segment such that we "
    "have a label for each second of the video. For example: {example_vector}.\n"
    "Annotation key: {labels}.\n"
    "Only output the vector!";

constexpr std::string_view kComplexTemplate =
    "Task:\n"
    "\n"
    "Label the mouse's behavior in this {n}-second clip.\n"
    "Return exactly {n} label(s) in a Python list {list_shape}.\n"
    "\n"
    "Allowed: {labels}.\n"
    "Freezing = absolutely no visible movement across the whole second (no head/ear/whisker/tail "
    "or body motion).\n"
    "Exploring/Grooming = any visible movement that isn't fast fleeing; includes slow stepping in "
    "place, head/whisker/ear/tail motion, sniffing, re-orienting, or brief rearing with little "
    "displacement.\n"
    "Fleeing = fast, sustained locomotion, large displacement, motion blur, or dashing.\n"
    "\n"
    "If unsure between fleeing and exploring, choose fleeing if movement is more rapid.\n"
    "Rules: if any movement is seen in any frames, do NOT output Freezing.\n"
    "Output only the list.";

constexpr std::string_view kSimpleIclLeadIn =
    " Given the following examples, label the last video to the best of your ability.";

constexpr std::string_view kAnswerCue = "-> [ ]";

std::string replace_all(std::string text, std::string_view from, const std::string& to) {
    size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
        text.replace(pos, from.size(), to);
        pos += to.size();
    }
    return text;
}

std::string shape(std::string_view prefix, std::string_view open_subscript, int n) {
    // "[behavior_1, behavior_2, ..., behavior_n]" style, degenerating cleanly
    // for small n.
    std::string a = std::string(prefix) + std::string(open_subscript) + "1";
    if (n == 1) return "[" + a + "]";
    std::string last = std::string(prefix) + std::string(open_subscript) + std::to_string(n);
    if (n == 2) return "[" + a + ", " + last + "]";
    std::string b = std::string(prefix) + std::string(open_subscript) + "2";
    if (n == 3) return "[" + a + ", " + b + ", " + last + "]";
    return "[" + a + ", " + b + ", ..., " + last + "]";
}

std::string joined_vocabulary(const std::vector<std::string>& vocabulary) {
    std::string out;
    for (size_t i = 0; i < vocabulary.size(); ++i) {
        if (i > 0) out += ", ";
        out += vocabulary[i];
    }
    return out;
}

PromptText render(PromptStyle style, std::string_view tmpl, int n,
                  const std::vector<std::string>& vocabulary) {
    if (n < 1) n = 1;
    std::string text(tmpl);
    text = replace_all(std::move(text), "{n}", std::to_string(n));
    text = replace_all(std::move(text), "{labels}", joined_vocabulary(vocabulary));
    text = replace_all(std::move(text), "{example_vector}", shape("behavior", "_", n));
    text = replace_all(std::move(text), "{list_shape}", shape("l", "", n));
    PromptText prompt;
    prompt.style = style;
    prompt.rendered_text = std::move(text);
    prompt.label_vocabulary = vocabulary;
    return prompt;
}

std::string sort_key(const IclExample& example) {
    std::string first_frame = example.frames.empty() ? std::string() : example.frames.front();
    return example.source_session + "\x1f" + first_frame;
}

std::string mime_for(const std::string& path) {
    std::string ext = to_lower(std::filesystem::path(path).extension().string());
    if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
    if (ext == ".png") return "image/png";
    return "application/octet-stream";
}

void append_frames_as_images(const std::vector<std::string>& frames,
                             std::vector<RequestPart>& parts) {
    for (const std::string& frame : frames) {
        parts.push_back(ImagePart{read_file_binary(frame), mime_for(frame)});
    }
}

}  // namespace

std::vector<std::string> default_vocabulary() {
    return {"Freezing", "Fleeing", "Exploring/Grooming"};
}

std::string_view default_simple_template() { return kSimpleTemplate; }
std::string_view default_complex_template() { return kComplexTemplate; }

PromptText build_simple_prompt(int n, const std::vector<std::string>& vocabulary,
                               const std::optional<std::string>& template_override) {
    return render(PromptStyle::Simple,
                  template_override ? std::string_view(*template_override) : kSimpleTemplate, n,
                  vocabulary);
}

PromptText build_complex_prompt(int n, const std::vector<std::string>& vocabulary,
                                const std::optional<std::string>& template_override) {
    return render(PromptStyle::Complex,
                  template_override ? std::string_view(*template_override) : kComplexTemplate, n,
                  vocabulary);
}

PromptText build_prompt(PromptStyle style, int n, const std::vector<std::string>& vocabulary,
                        const PromptTemplates& templates) {
    return style == PromptStyle::Simple ? build_simple_prompt(n, vocabulary, templates.simple)
                                        : build_complex_prompt(n, vocabulary, templates.complex);
}

std::vector<IclExample> select_icl_examples(const ExampleStore& store, int icl_count) {
    if (icl_count <= 0) return {};
    if (icl_count % kNumGoldClasses != 0) {
        throw std::invalid_argument("icl_count must be a multiple of " +
                                    std::to_string(kNumGoldClasses) + ", got " +
                                    std::to_string(icl_count));
    }
    int per_class = icl_count / kNumGoldClasses;

    // Presentation order per the prompt figures.
    constexpr std::array<BehaviorLabel, 3> kPresentationOrder = {
        BehaviorLabel::ExploringGrooming, BehaviorLabel::Freezing, BehaviorLabel::Fleeing};

    std::map<BehaviorLabel, std::vector<const IclExample*>> by_label;
    for (const IclExample& example : store.examples) {
        by_label[example.label].push_back(&example);
    }
    for (auto& [label, list] : by_label) {
        std::sort(list.begin(), list.end(), [](const IclExample* a, const IclExample* b) {
            return sort_key(*a) < sort_key(*b);
        });
    }
    for (BehaviorLabel label : kPresentationOrder) {
        if (static_cast<int>(by_label[label].size()) < per_class) {
            throw InsufficientExamples(label);
        }
    }

    std::vector<IclExample> selected;
    selected.reserve(static_cast<size_t>(icl_count));
    for (int round = 0; round < per_class; ++round) {
        for (BehaviorLabel label : kPresentationOrder) {
            selected.push_back(*by_label[label][static_cast<size_t>(round)]);
        }
    }
    return selected;
}

std::string_view answer_cue() { return kAnswerCue; }

ModelRequest assemble_request(const PromptText& prompt, const std::vector<IclExample>& icl,
                              const Target& target, InputMode input_mode,
                              const RequestOptions& options) {
    const auto* segment_target = std::get_if<SegmentTarget>(&target);
    const auto* whole_target = std::get_if<WholeVideoTarget>(&target);

    if (input_mode == InputMode::WholeVideo && whole_target == nullptr) {
        throw ModeMismatch("WholeVideo mode requires a whole-video target");
    }
    if (input_mode != InputMode::WholeVideo && segment_target == nullptr) {
        throw ModeMismatch(std::string(to_string(input_mode)) +
                           " mode requires a segment target");
    }
    if (input_mode == InputMode::SegmentVideo && segment_target->video_path.empty()) {
        throw ModeMismatch("SegmentVideo mode requires the source video path");
    }

    ModelRequest request;
    request.decoding = options.decoding;
    request.model_id = options.model_id;

    const bool frames_mode = input_mode == InputMode::SegmentFrames;

    // Task text, with the examples block header folded in when ICL is active.
    std::string task_text = prompt.rendered_text;
    if (!icl.empty()) {
        if (prompt.style == PromptStyle::Simple) task_text += kSimpleIclLeadIn;
        task_text += "\n\nExamples:";
    }
    request.parts.push_back(TextPart{std::move(task_text)});

    for (const IclExample& example : icl) {
        if (frames_mode) {
            append_frames_as_images(example.frames, request.parts);
        } else {
            if (!example.has_clip()) {
                throw ModeMismatch("video input mode but example from session '" +
                                   example.source_session + "' has no clip reference");
            }
            request.parts.push_back(
                VideoPart{example.clip_path, example.clip_start_s, example.clip_end_s});
        }
        request.parts.push_back(
            TextPart{"-> [" + std::string(to_string(example.label)) + "]"});
    }

    if (whole_target != nullptr) {
        if (whole_target->total_seconds < 1) {
            throw ModeMismatch("whole-video target must span at least one second");
        }
        request.parts.push_back(VideoPart{whole_target->video_path, std::nullopt, std::nullopt});
        request.expected_label_count = whole_target->total_seconds;
        request.target_session = whole_target->session_id;
        request.target_second = std::nullopt;
    } else {
        const SegmentRef& segment = segment_target->segment;
        if (frames_mode) {
            append_frames_as_images(segment.frame_ids, request.parts);
        } else {
            request.parts.push_back(
                VideoPart{segment_target->video_path, segment.time_begin(), segment.time_end()});
        }
        request.expected_label_count = 1;
        request.target_session = segment.session_id;
        request.target_second = segment.second_index;
    }

    request.parts.push_back(TextPart{std::string(kAnswerCue)});

    if (request.decoding.max_output_tokens == 0) {
        request.decoding.max_output_tokens =
            whole_target != nullptr ? 16 * request.expected_label_count : 64;
    }

    request.request_digest = compute_request_digest(request);
    return request;
}

}  // namespace etholabel
