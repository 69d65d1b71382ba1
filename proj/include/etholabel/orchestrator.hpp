#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "etholabel/backend.hpp"
#include "etholabel/core.hpp"
#include "etholabel/evaluator.hpp"
#include "etholabel/promptkit.hpp"

namespace etholabel {

struct BackendUnavailable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct HeldOutViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One session to annotate: its manifest, the optional source video reference
// (required for video input modes), and gold labels when evaluating.
struct SessionInput {
    SegmentManifest manifest;
    std::string video_path;
    GoldAnnotations gold;  // may be empty for annotate-only runs

    bool has_gold() const { return !gold.labels.empty(); }
};

struct CheckpointRecord {
    int second_index = 0;
    BehaviorLabel label = BehaviorLabel::Unknown;
    std::string request_digest;
    Provenance provenance = Provenance::Fresh;
};

// Crash-recoverable per-session progress, rebuilt from the append-only
// checkpoint file. Later records win; a torn trailing line is ignored.
struct RunState {
    std::string session_id;
    std::string config_id;
    std::map<int, CheckpointRecord> completed;
    std::filesystem::path checkpoint_path;

    std::set<int> completed_seconds() const;
};

RunState load_run_state(const std::filesystem::path& checkpoint_path,
                        const std::string& session_id, const std::string& config_id,
                        int total_seconds);

struct RunOptions {
    std::filesystem::path workdir;
    PromptTemplates templates;
    std::string model_id = "default";
};

// Annotates one session under one configuration. Segment modes issue one
// request per not-yet-completed second through a bounded worker pool; whole
// video issues a single request. Output order is by second_index regardless
// of completion order. Checkpoints land after every completed second;
// BackendUnavailable leaves them in place for resume.
AnnotationVector run_session(const PipelineConfig& config, const SessionInput& session,
                             const ExampleStore& store, BackendClient& client,
                             const RunOptions& options);

// Labels CSV (`second_index,label,provenance`) persistence.
std::filesystem::path labels_csv_path(const std::filesystem::path& workdir,
                                      const std::string& config_id,
                                      const std::string& session_id);
AnnotationVector load_labels_csv(const std::filesystem::path& path, const std::string& session_id,
                                 const std::string& config_id);

// Builds the ICL example pool from held-out annotated sessions: one candidate
// per gold-labeled second, clip span [t, t+1) on the session video when
// available.
ExampleStore build_example_store(const std::vector<SessionInput>& held_out);

using ClientFactory = std::function<std::shared_ptr<BackendClient>(const PipelineConfig&)>;

struct AblationOutcome {
    struct Entry {
        PipelineConfig config;
        std::string config_id;
        std::vector<AnnotationVector> annotations;  // one per session
    };
    std::vector<Entry> entries;
};

// Runs every configuration over every session. Sessions must carry gold for
// evaluation; the store must not contain examples from any annotated session.
AblationOutcome run_ablation(const std::vector<PipelineConfig>& grid,
                             const std::vector<SessionInput>& sessions,
                             const ExampleStore& store, const ClientFactory& client_factory,
                             const RunOptions& options);

// Scores an ablation outcome against the sessions' gold: per configuration,
// confusion matrices pool across sessions before per-class F1.
AblationReport evaluate_ablation(const AblationOutcome& outcome,
                                 const std::vector<SessionInput>& sessions);

}  // namespace etholabel
