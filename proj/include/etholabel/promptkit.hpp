#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "etholabel/core.hpp"
#include "etholabel/request.hpp"

namespace etholabel {

struct PromptText {
    PromptStyle style = PromptStyle::Simple;
    std::string rendered_text;
    std::vector<std::string> label_vocabulary;
};

// The prompt vocabulary in annotation-key order.
std::vector<std::string> default_vocabulary();

// Built-in template sources; placeholders: {n}, {labels}, {example_vector},
// {list_shape}. Overridable so wording can be edited without rebuilding.
std::string_view default_simple_template();
std::string_view default_complex_template();

struct PromptTemplates {
    std::optional<std::string> simple;
    std::optional<std::string> complex;
};

// Pure and total over n >= 1.
PromptText build_simple_prompt(int n, const std::vector<std::string>& vocabulary,
                               const std::optional<std::string>& template_override = std::nullopt);
PromptText build_complex_prompt(int n, const std::vector<std::string>& vocabulary,
                                const std::optional<std::string>& template_override = std::nullopt);

PromptText build_prompt(PromptStyle style, int n, const std::vector<std::string>& vocabulary,
                        const PromptTemplates& templates = {});

// ---------------------------------------------------------------------------
// In-context example selection
// ---------------------------------------------------------------------------

struct ExampleStore {
    std::vector<IclExample> examples;

    void add(IclExample example) { examples.push_back(std::move(example)); }
    bool empty() const { return examples.empty(); }
};

struct InsufficientExamples : std::runtime_error {
    BehaviorLabel label;
    explicit InsufficientExamples(BehaviorLabel l)
        : std::runtime_error("no in-context examples available for class " +
                             std::string(to_string(l))),
          label(l) {}
};

// icl_count must be 0 or a multiple of the class count. Selection is
// deterministic: per class, examples sorted by (source_session, first frame),
// presented in the fixed order Exploring/Grooming, Freezing, Fleeing repeated.
std::vector<IclExample> select_icl_examples(const ExampleStore& store, int icl_count);

// ---------------------------------------------------------------------------
// Request assembly
// ---------------------------------------------------------------------------

struct SegmentTarget {
    SegmentRef segment;
    std::string video_path;  // required for SegmentVideo mode
};

struct WholeVideoTarget {
    std::string session_id;
    std::string video_path;
    int total_seconds = 0;
};

using Target = std::variant<SegmentTarget, WholeVideoTarget>;

struct ModeMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RequestOptions {
    Decoding decoding;
    std::string model_id;
};

// Part order: task text, (example media + example label text) per example,
// target media, answer cue. expected_label_count is 1 for segment targets and
// total_seconds for a whole video.
ModelRequest assemble_request(const PromptText& prompt, const std::vector<IclExample>& icl,
                              const Target& target, InputMode input_mode,
                              const RequestOptions& options);

// The literal answer cue placed after the target media.
std::string_view answer_cue();

}  // namespace etholabel
