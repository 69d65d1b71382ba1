// etholabel: per-second behavior annotation of rodent videos through a
// vision-language endpoint, with an ablation harness over prompt style,
// in-context examples, and input mode.

#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "etholabel/backend.hpp"
#include "etholabel/config_io.hpp"
#include "etholabel/core.hpp"
#include "etholabel/evaluator.hpp"
#include "etholabel/orchestrator.hpp"
#include "etholabel/promptkit.hpp"
#include "etholabel/segmenter.hpp"
#include "etholabel/synthetic.hpp"
#include "etholabel/util.hpp"

namespace fs = std::filesystem;
using namespace etholabel;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitBackend = 2;

struct ConfigFlags {
    std::string config_file;
    std::string prompt_style;
    std::string icl;  // on|off
    int icl_count = -1;
    std::string input_mode;
    int fps = -1;
    double temperature = -1.0;
    int max_tokens = -1;
    int concurrency = -1;
    std::string endpoint;
    std::string cache_dir;

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_file, "JSON config file; flags override its values");
        cmd->add_option("--prompt", prompt_style, "Prompt style: Simple|Complex");
        cmd->add_option("--icl", icl, "In-context examples: on|off");
        cmd->add_option("--icl-count", icl_count, "Number of ICL examples (multiple of 3)");
        cmd->add_option("--input-mode", input_mode,
                        "Input mode: WholeVideo|SegmentVideo|SegmentFrames");
        cmd->add_option("--fps", fps, "Frames per second per segment");
        cmd->add_option("--temperature", temperature, "Decoding temperature");
        cmd->add_option("--max-tokens", max_tokens, "Max output tokens (0 = auto)");
        cmd->add_option("--concurrency", concurrency, "Max in-flight backend requests");
        cmd->add_option("--endpoint", endpoint, "Backend endpoint URL (or VLM_ENDPOINT)");
        cmd->add_option("--cache-dir", cache_dir, "Response cache directory");
    }

    PipelineConfig resolve() const {
        PipelineConfig config;
        if (!config_file.empty()) config = load_config_file(config_file);
        if (!prompt_style.empty()) {
            auto style = prompt_style_from_string(prompt_style);
            if (!style) throw std::invalid_argument("--prompt must be Simple or Complex");
            config.prompt_style = *style;
        }
        if (!icl.empty()) {
            if (icl != "on" && icl != "off") throw std::invalid_argument("--icl must be on|off");
            config.icl_enabled = icl == "on";
        }
        if (icl_count >= 0) config.icl_count = icl_count;
        if (!input_mode.empty()) {
            auto mode = input_mode_from_string(input_mode);
            if (!mode) {
                throw std::invalid_argument(
                    "--input-mode must be WholeVideo, SegmentVideo or SegmentFrames");
            }
            config.input_mode = *mode;
        }
        if (fps > 0) config.fps_target = fps;
        if (temperature >= 0.0) config.decoding.temperature = temperature;
        if (max_tokens >= 0) config.decoding.max_output_tokens = max_tokens;
        if (concurrency > 0) config.concurrency_limit = concurrency;
        if (!endpoint.empty()) config.backend_endpoint = endpoint;
        if (!cache_dir.empty()) config.cache_dir = cache_dir;
        return config;
    }
};

struct BackendFlags {
    std::string mock;
    std::string model;
    bool no_cache = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--mock", mock,
                        "Scripted backend: echo|noisy:<p>:<seed>|malform:<p>:<seed>");
        cmd->add_option("--model", model, "Model id for the endpoint (or VLM_MODEL_ID)");
        cmd->add_flag("--no-cache", no_cache, "Bypass the response cache");
    }
};

std::string find_video(const std::string& video_dir, const std::string& session_id) {
    if (video_dir.empty()) return "";
    for (const char* ext : {".mp4", ".avi", ".mov", ".mkv"}) {
        fs::path candidate = fs::path(video_dir) / (session_id + ext);
        if (fs::exists(candidate)) return candidate.string();
    }
    return "";
}

std::map<std::string, std::vector<BehaviorLabel>> gold_map(
    const std::vector<GoldAnnotations>& gold) {
    std::map<std::string, std::vector<BehaviorLabel>> out;
    for (const GoldAnnotations& g : gold) out[g.session_id] = g.labels;
    return out;
}

struct BackendSetup {
    ClientFactory factory;
    std::string model_id;
};

BackendSetup make_backend(const BackendFlags& flags, const PipelineConfig& base,
                          const std::vector<GoldAnnotations>& mock_gold,
                          const fs::path& default_cache_dir) {
    BackendSetup setup;
    bool no_cache = flags.no_cache;
    fs::path fallback_cache = default_cache_dir;

    if (!flags.mock.empty()) {
        MockScript script = MockScript::parse(flags.mock);
        auto transport = std::make_shared<MockTransport>(script, gold_map(mock_gold));
        setup.model_id = transport->backend_id();
        setup.factory = [transport, no_cache, fallback_cache](const PipelineConfig& config) {
            ClientOptions options;
            options.cache_dir =
                config.cache_dir.empty() ? fallback_cache.string() : config.cache_dir;
            options.no_cache = no_cache;
            options.concurrency_limit = config.concurrency_limit;
            return std::make_shared<BackendClient>(transport, options);
        };
        return setup;
    }

    HttpOptions http;
    http.endpoint = base.backend_endpoint;
    http.model_id = flags.model;
    http = http_options_from_env(http);
    if (http.endpoint.empty()) {
        throw std::invalid_argument(
            "no backend endpoint: pass --endpoint/--mock or set VLM_ENDPOINT");
    }
    if (http.model_id.empty()) http.model_id = "default";
    setup.model_id = http.model_id;
    setup.factory = [http, no_cache, fallback_cache](const PipelineConfig& config) {
        HttpOptions per_config = http;
        if (!config.backend_endpoint.empty()) per_config.endpoint = config.backend_endpoint;
        auto transport = std::make_shared<HttpTransport>(per_config);
        ClientOptions options;
        options.cache_dir = config.cache_dir.empty() ? fallback_cache.string() : config.cache_dir;
        options.no_cache = no_cache;
        options.concurrency_limit = config.concurrency_limit;
        return std::make_shared<BackendClient>(transport, options);
    };
    return setup;
}

PromptTemplates load_templates(const std::string& simple_file, const std::string& complex_file) {
    PromptTemplates templates;
    if (!simple_file.empty()) templates.simple = read_file(simple_file);
    if (!complex_file.empty()) templates.complex = read_file(complex_file);
    return templates;
}

std::vector<SessionInput> collect_sessions(const std::string& frames_dir,
                                           const std::string& session_filter,
                                           const std::string& video_dir,
                                           const std::vector<GoldAnnotations>& gold) {
    std::vector<SegmentManifest> manifests = load_all_manifests(frames_dir);
    if (manifests.empty()) {
        throw std::invalid_argument("no session manifests under '" + frames_dir + "'");
    }
    std::map<std::string, const GoldAnnotations*> by_session;
    for (const GoldAnnotations& g : gold) by_session[g.session_id] = &g;

    std::vector<SessionInput> sessions;
    for (SegmentManifest& manifest : manifests) {
        if (!session_filter.empty() && manifest.session_id != session_filter) continue;
        SessionInput session;
        session.video_path = find_video(video_dir, manifest.session_id);
        auto it = by_session.find(manifest.session_id);
        if (it != by_session.end()) session.gold = *it->second;
        session.manifest = std::move(manifest);
        sessions.push_back(std::move(session));
    }
    if (sessions.empty()) {
        throw std::invalid_argument("session '" + session_filter + "' not found under '" +
                                    frames_dir + "'");
    }
    return sessions;
}

ExampleStore collect_icl_store(const std::string& icl_frames_dir, const std::string& icl_gold_file,
                               const std::string& video_dir) {
    if (icl_frames_dir.empty()) return {};
    if (icl_gold_file.empty()) {
        throw std::invalid_argument("--icl-frames-dir requires --icl-gold");
    }
    std::vector<GoldAnnotations> gold = load_gold_csv(icl_gold_file);
    std::vector<SessionInput> held_out =
        collect_sessions(icl_frames_dir, "", video_dir, gold);
    return build_example_store(held_out);
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_segment(const std::string& video, int fps, const std::string& out,
                std::string session_id, int max_edge, int jpeg_quality,
                const std::string& extractor_template, const std::string& probe_template) {
    if (session_id.empty()) session_id = fs::path(video).stem().string();
    VideoMeta meta = probe_video(video, probe_template);
    ExtractionPlan plan;
    plan.source = meta;
    plan.fps_target = fps;
    plan.output_dir = out;
    plan.image_max_edge_px = max_edge;
    plan.jpeg_quality = jpeg_quality;
    plan.extractor_template = extractor_template;
    SegmentManifest manifest = segment_video(plan, session_id);
    log_event("info", "segment_done",
              "session=" + session_id + " seconds=" + std::to_string(manifest.total_seconds) +
                  " fps=" + std::to_string(manifest.fps_used) + " out=" + out);
    return kExitOk;
}

int cmd_mock_run(const std::string& out, int seconds, int fps, int n_sessions,
                 std::uint64_t seed, const std::string& mock, const std::string& grid_spec,
                 int concurrency, bool no_cache) {
    fs::path root(out);
    fs::create_directories(root);

    PipelineConfig base;
    base.fps_target = fps;
    base.concurrency_limit = concurrency;
    base.cache_dir = (root / "cache").string();

    std::vector<PipelineConfig> grid =
        grid_spec == "default" ? default_grid(base) : load_grid_file(grid_spec);

    std::vector<SessionInput> sessions;
    std::vector<GoldAnnotations> gold;
    for (int i = 0; i < n_sessions; ++i) {
        SyntheticSpec spec;
        spec.session_id = "synthetic-" + zero_pad(i + 1, 3);
        spec.seconds = seconds;
        spec.fps = fps;
        spec.seed = seed + static_cast<std::uint64_t>(i);
        sessions.push_back(make_synthetic_session(root / "frames", spec));
        gold.push_back(sessions.back().gold);
    }
    SyntheticSpec held_spec;
    held_spec.session_id = "heldout";
    held_spec.seconds = 12;
    held_spec.fps = fps;
    held_spec.seed = seed + 1000;
    SessionInput held_out = make_synthetic_session(root / "frames", held_spec);
    ExampleStore store = build_example_store({held_out});
    save_gold_csv(root / "gold.csv", gold);

    std::vector<GoldAnnotations> mock_gold = gold;
    BackendFlags backend_flags;
    backend_flags.mock = mock;
    backend_flags.no_cache = no_cache;
    BackendSetup backend = make_backend(backend_flags, base, mock_gold, root / "cache");

    RunOptions options;
    options.workdir = root / "runs";
    options.model_id = backend.model_id;

    AblationOutcome outcome = run_ablation(grid, sessions, store, backend.factory, options);
    AblationReport report = evaluate_ablation(outcome, sessions);
    render_report(report, root / "reports");
    log_event("info", "mock_run_done",
              "configs=" + std::to_string(report.entries.size()) + " out=" + out);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Per-second rodent behavior annotation via a VLM endpoint"};
    app.require_subcommand(1);

    // --- segment ---
    auto* segment = app.add_subcommand("segment", "Split a video into per-second frame sets");
    std::string seg_video, seg_out, seg_session, seg_extractor, seg_probe;
    int seg_fps = 5, seg_max_edge = 448, seg_quality = 85;
    segment->add_option("--video", seg_video, "Input video file")->required();
    segment->add_option("--fps", seg_fps, "Frames per second to extract");
    segment->add_option("--out", seg_out, "Frame layout root directory")->required();
    segment->add_option("--session-id", seg_session, "Session id (default: video stem)");
    segment->add_option("--max-edge", seg_max_edge, "Longest image edge in pixels");
    segment->add_option("--jpeg-quality", seg_quality, "JPEG quality (2-100)");
    segment->add_option("--extractor-template", seg_extractor,
                        "Extractor command with {input} {fps} {outpattern}");
    segment->add_option("--probe-template", seg_probe, "Probe command with {input}");

    // --- annotate ---
    auto* annotate = app.add_subcommand("annotate", "Annotate sessions under one configuration");
    std::string ann_frames, ann_session, ann_video_dir, ann_out, ann_gold;
    std::string ann_icl_frames, ann_icl_gold, ann_simple_tmpl, ann_complex_tmpl;
    ConfigFlags ann_config;
    BackendFlags ann_backend;
    annotate->add_option("--frames-dir", ann_frames, "Frame layout root")->required();
    annotate->add_option("--session", ann_session, "Annotate only this session");
    annotate->add_option("--video-dir", ann_video_dir,
                         "Directory of <session>.mp4 source videos (video input modes)");
    annotate->add_option("--out", ann_out, "Work directory for checkpoints and labels")
        ->required();
    annotate->add_option("--gold", ann_gold, "Gold CSV (required for --mock)");
    annotate->add_option("--icl-frames-dir", ann_icl_frames, "Held-out frame layout for ICL");
    annotate->add_option("--icl-gold", ann_icl_gold, "Gold CSV for the held-out sessions");
    annotate->add_option("--simple-template", ann_simple_tmpl, "Override simple prompt template");
    annotate->add_option("--complex-template", ann_complex_tmpl,
                         "Override complex prompt template");
    ann_config.attach(annotate);
    ann_backend.attach(annotate);

    // --- ablate ---
    auto* ablate = app.add_subcommand("ablate", "Run a configuration grid and report per-class F1");
    std::string abl_frames, abl_video_dir, abl_out, abl_workdir, abl_gold, abl_grid = "default";
    std::string abl_icl_frames, abl_icl_gold, abl_simple_tmpl, abl_complex_tmpl;
    ConfigFlags abl_config;
    BackendFlags abl_backend;
    ablate->add_option("--frames-dir", abl_frames, "Frame layout root")->required();
    ablate->add_option("--video-dir", abl_video_dir, "Directory of source videos");
    ablate->add_option("--gold", abl_gold, "Gold CSV")->required();
    ablate->add_option("--grid", abl_grid, "default or a JSON grid file");
    ablate->add_option("--out", abl_out, "Report output directory")->required();
    ablate->add_option("--workdir", abl_workdir, "Work directory (default <out>/runs)");
    ablate->add_option("--icl-frames-dir", abl_icl_frames, "Held-out frame layout for ICL");
    ablate->add_option("--icl-gold", abl_icl_gold, "Gold CSV for the held-out sessions");
    ablate->add_option("--simple-template", abl_simple_tmpl, "Override simple prompt template");
    ablate->add_option("--complex-template", abl_complex_tmpl,
                       "Override complex prompt template");
    abl_config.attach(ablate);
    abl_backend.attach(ablate);

    // --- evaluate ---
    auto* evaluate = app.add_subcommand(
        "evaluate", "Recompute metrics from emitted label CSVs against gold");
    std::string ev_runs, ev_gold, ev_out;
    evaluate->add_option("--runs", ev_runs, "Work directory holding <config_id>/ runs")
        ->required();
    evaluate->add_option("--gold", ev_gold, "Gold CSV")->required();
    evaluate->add_option("--out", ev_out, "Report output directory")->required();

    // --- report ---
    auto* report_cmd =
        app.add_subcommand("report", "Re-render report files from a stored report.json");
    std::string rep_from, rep_out;
    report_cmd->add_option("--from", rep_from, "Existing report.json")->required();
    report_cmd->add_option("--out", rep_out, "Report output directory")->required();

    // --- mock-run ---
    auto* mock_run = app.add_subcommand(
        "mock-run", "Self-contained synthetic ablation against a scripted backend");
    std::string mr_out, mr_mock = "echo", mr_grid = "default";
    int mr_seconds = 120, mr_fps = 5, mr_sessions = 1, mr_concurrency = 4;
    std::uint64_t mr_seed = 7;
    bool mr_no_cache = false;
    mock_run->add_option("--out", mr_out, "Output directory")->required();
    mock_run->add_option("--seconds", mr_seconds, "Synthetic session length in seconds");
    mock_run->add_option("--fps", mr_fps, "Frames per second");
    mock_run->add_option("--sessions", mr_sessions, "Number of synthetic sessions");
    mock_run->add_option("--seed", mr_seed, "Gold generator seed");
    mock_run->add_option("--mock", mr_mock, "echo|noisy:<p>:<seed>|malform:<p>:<seed>");
    mock_run->add_option("--grid", mr_grid, "default or a JSON grid file");
    mock_run->add_option("--concurrency", mr_concurrency, "Max in-flight requests");
    mock_run->add_flag("--no-cache", mr_no_cache, "Bypass the response cache");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (segment->parsed()) {
            return cmd_segment(seg_video, seg_fps, seg_out, seg_session, seg_max_edge,
                               seg_quality, seg_extractor, seg_probe);
        }

        if (annotate->parsed()) {
            PipelineConfig config = ann_config.resolve();
            std::vector<GoldAnnotations> gold =
                ann_gold.empty() ? std::vector<GoldAnnotations>{} : load_gold_csv(ann_gold);
            if (!ann_backend.mock.empty() && gold.empty()) {
                throw std::invalid_argument("--mock needs --gold to script responses");
            }
            std::vector<SessionInput> sessions =
                collect_sessions(ann_frames, ann_session, ann_video_dir, gold);
            ExampleStore store = collect_icl_store(ann_icl_frames, ann_icl_gold, ann_video_dir);
            BackendSetup backend =
                make_backend(ann_backend, config, gold, fs::path(ann_out) / "cache");
            RunOptions options;
            options.workdir = ann_out;
            options.model_id = backend.model_id;
            options.templates = load_templates(ann_simple_tmpl, ann_complex_tmpl);
            auto client = backend.factory(config);
            for (const SessionInput& session : sessions) {
                run_session(config, session, store, *client, options);
            }
            return kExitOk;
        }

        if (ablate->parsed()) {
            PipelineConfig base = abl_config.resolve();
            std::vector<GoldAnnotations> gold = load_gold_csv(abl_gold);
            std::vector<SessionInput> sessions =
                collect_sessions(abl_frames, "", abl_video_dir, gold);
            ExampleStore store = collect_icl_store(abl_icl_frames, abl_icl_gold, abl_video_dir);
            std::vector<PipelineConfig> grid =
                abl_grid == "default" ? default_grid(base) : load_grid_file(abl_grid);
            fs::path workdir = abl_workdir.empty() ? fs::path(abl_out) / "runs"
                                                   : fs::path(abl_workdir);
            BackendSetup backend =
                make_backend(abl_backend, base, gold, fs::path(abl_out) / "cache");
            RunOptions options;
            options.workdir = workdir;
            options.model_id = backend.model_id;
            options.templates = load_templates(abl_simple_tmpl, abl_complex_tmpl);
            AblationOutcome outcome =
                run_ablation(grid, sessions, store, backend.factory, options);
            AblationReport report = evaluate_ablation(outcome, sessions);
            render_report(report, abl_out);
            return kExitOk;
        }

        if (evaluate->parsed()) {
            std::vector<GoldAnnotations> gold = load_gold_csv(ev_gold);
            std::map<std::string, const GoldAnnotations*> by_session;
            for (const GoldAnnotations& g : gold) by_session[g.session_id] = &g;

            AblationReport report;
            std::vector<fs::path> config_dirs;
            for (const auto& entry : fs::directory_iterator(ev_runs)) {
                if (entry.is_directory() && fs::exists(entry.path() / "config.json")) {
                    config_dirs.push_back(entry.path());
                }
            }
            std::sort(config_dirs.begin(), config_dirs.end());
            if (config_dirs.empty()) {
                throw std::invalid_argument("no config runs under '" + ev_runs + "'");
            }
            for (const fs::path& dir : config_dirs) {
                ConfigResult result;
                result.config = load_config_file(dir / "config.json");
                result.config_id = dir.filename().string();
                bool any = false;
                for (const auto& entry : fs::directory_iterator(dir)) {
                    std::string name = entry.path().filename().string();
                    const std::string suffix = ".labels.csv";
                    if (name.size() <= suffix.size() ||
                        name.substr(name.size() - suffix.size()) != suffix) {
                        continue;
                    }
                    std::string session_id = name.substr(0, name.size() - suffix.size());
                    auto it = by_session.find(session_id);
                    if (it == by_session.end()) {
                        throw std::invalid_argument("no gold for session '" + session_id + "'");
                    }
                    AnnotationVector vec =
                        load_labels_csv(entry.path(), session_id, result.config_id);
                    result.cm += confusion_matrix(vec, *it->second);
                    any = true;
                }
                if (!any) continue;
                result.eval = per_class_f1(result.cm);
                result.eval.config_id = result.config_id;
                report.entries.push_back(std::move(result));
            }
            if (report.entries.empty()) {
                throw std::invalid_argument("no label CSVs found under '" + ev_runs + "'");
            }
            render_report(report, ev_out);
            return kExitOk;
        }

        if (report_cmd->parsed()) {
            render_report(load_report_json(rep_from), rep_out);
            return kExitOk;
        }

        if (mock_run->parsed()) {
            return cmd_mock_run(mr_out, mr_seconds, mr_fps, mr_sessions, mr_seed, mr_mock,
                                mr_grid, mr_concurrency, mr_no_cache);
        }
    } catch (const BackendUnavailable& e) {
        log_event("error", "backend_unavailable", std::string("msg=\"") + e.what() + "\"");
        return kExitBackend;
    } catch (const TransportError& e) {
        log_event("error", "transport_error", std::string("msg=\"") + e.what() + "\"");
        return kExitBackend;
    } catch (const std::exception& e) {
        log_event("error", "invalid_invocation", std::string("msg=\"") + e.what() + "\"");
        return kExitValidation;
    }
    return kExitValidation;
}
