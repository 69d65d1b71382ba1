#include "etholabel/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "etholabel/config_io.hpp"
#include "etholabel/labelparser.hpp"
#include "etholabel/util.hpp"

namespace etholabel {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::set<int> RunState::completed_seconds() const {
    std::set<int> out;
    for (const auto& [second, record] : completed) out.insert(second);
    return out;
}

RunState load_run_state(const fs::path& checkpoint_path, const std::string& session_id,
                        const std::string& config_id, int total_seconds) {
    RunState state;
    state.session_id = session_id;
    state.config_id = config_id;
    state.checkpoint_path = checkpoint_path;

    std::error_code ec;
    if (!fs::exists(checkpoint_path, ec)) return state;

    std::istringstream in(read_file(checkpoint_path));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            auto json = nlohmann::json::parse(line);
            CheckpointRecord record;
            record.second_index = json.at("second_index").get<int>();
            auto label = label_from_string(json.at("label").get<std::string>());
            if (!label) continue;
            record.label = *label;
            record.request_digest = json.value("request_digest", std::string());
            auto prov = provenance_from_string(json.value("provenance", "fresh"));
            record.provenance = prov.value_or(Provenance::Fresh);
            if (record.second_index < 0 || record.second_index >= total_seconds) continue;
            state.completed[record.second_index] = record;  // last record wins
        } catch (const std::exception&) {
            continue;  // torn trailing line from a crash mid-append
        }
    }
    return state;
}

namespace {

class CheckpointSink {
public:
    explicit CheckpointSink(const fs::path& path) {
        fs::create_directories(path.parent_path());
        out_.open(path, std::ios::app);
        if (!out_) throw std::runtime_error("cannot open checkpoint: " + path.string());
    }

    void append(const CheckpointRecord& record) {
        ordered_json json;
        json["second_index"] = record.second_index;
        json["label"] = std::string(to_string(record.label));
        json["request_digest"] = record.request_digest;
        json["provenance"] = std::string(to_string(record.provenance));
        std::lock_guard<std::mutex> lock(mu_);
        out_ << json.dump() << '\n';
        out_.flush();
    }

private:
    std::mutex mu_;
    std::ofstream out_;
};

std::string labels_csv_text(const AnnotationVector& vec) {
    std::string out = "second_index,label,provenance\n";
    for (size_t i = 0; i < vec.labels.size(); ++i) {
        out += std::to_string(i);
        out += ',';
        out += to_string(vec.labels[i]);
        out += ',';
        out += to_string(vec.provenance[i]);
        out += '\n';
    }
    return out;
}

void check_held_out(const std::vector<IclExample>& examples, const std::string& session_id) {
    for (const IclExample& example : examples) {
        if (example.source_session == session_id) {
            throw HeldOutViolation("ICL example from session '" + session_id +
                                   "' used while annotating that session");
        }
    }
}

int count_repairs(const ParseOutcome& outcome) {
    return static_cast<int>(outcome.repairs.size());
}

}  // namespace

fs::path labels_csv_path(const fs::path& workdir, const std::string& config_id,
                         const std::string& session_id) {
    return workdir / config_id / (session_id + ".labels.csv");
}

AnnotationVector run_session(const PipelineConfig& config, const SessionInput& session,
                             const ExampleStore& store, BackendClient& client,
                             const RunOptions& options) {
    const SegmentManifest& manifest = session.manifest;
    ValidationResult validation = validate_manifest(manifest);
    if (!validation.ok()) {
        throw std::invalid_argument("invalid manifest for session '" + manifest.session_id +
                                    "': " + validation.violations.front());
    }

    const std::string config_id = config_digest(config);
    const fs::path config_dir = options.workdir / config_id;
    fs::create_directories(config_dir);
    save_config_file(config, config_dir / "config.json");

    std::vector<IclExample> icl;
    if (config.icl_enabled) {
        icl = select_icl_examples(store, config.icl_count);
        check_held_out(icl, manifest.session_id);
    }

    const fs::path ckpt_path = config_dir / (manifest.session_id + ".ckpt");
    RunState state =
        load_run_state(ckpt_path, manifest.session_id, config_id, manifest.total_seconds);
    CheckpointSink sink(ckpt_path);

    const std::vector<std::string> vocabulary = default_vocabulary();
    const RequestOptions request_options{config.decoding, options.model_id};

    // Segment lookup by second regardless of manifest vector order.
    std::map<int, const SegmentRef*> by_second;
    for (const SegmentRef& segment : manifest.segments) {
        by_second[segment.second_index] = &segment;
    }

    std::atomic<long> repair_total{0};

    if (config.input_mode == InputMode::WholeVideo) {
        if (static_cast<int>(state.completed.size()) < manifest.total_seconds &&
            manifest.total_seconds > 0) {
            PromptText prompt = build_prompt(config.prompt_style, manifest.total_seconds,
                                             vocabulary, options.templates);
            WholeVideoTarget target{manifest.session_id, session.video_path,
                                    manifest.total_seconds};
            ModelRequest request =
                assemble_request(prompt, icl, target, config.input_mode, request_options);
            ModelResponse response;
            try {
                response = client.send(request);
            } catch (const TransportError& e) {
                throw BackendUnavailable(e.what());
            }
            ParseOutcome outcome =
                parse_label_vector(response.raw_text, manifest.total_seconds);
            repair_total += count_repairs(outcome);
            Provenance provenance =
                response.from_cache ? Provenance::Cached : Provenance::Fresh;
            for (int t = 0; t < manifest.total_seconds; ++t) {
                CheckpointRecord record{t, outcome.labels[static_cast<size_t>(t)],
                                        request.request_digest, provenance};
                sink.append(record);
                state.completed[t] = record;
            }
        }
    } else {
        std::vector<int> pending;
        for (int t = 0; t < manifest.total_seconds; ++t) {
            if (!state.completed.count(t)) pending.push_back(t);
        }

        if (!pending.empty()) {
            PromptText prompt =
                build_prompt(config.prompt_style, 1, vocabulary, options.templates);

            std::atomic<size_t> next{0};
            std::atomic<bool> failed{false};
            std::mutex state_mu;
            std::exception_ptr first_error;

            auto worker = [&]() {
                while (!failed.load()) {
                    size_t i = next.fetch_add(1);
                    if (i >= pending.size()) return;
                    int second = pending[i];
                    try {
                        SegmentTarget target{*by_second.at(second), session.video_path};
                        ModelRequest request = assemble_request(prompt, icl, target,
                                                                config.input_mode,
                                                                request_options);
                        ModelResponse response;
                        try {
                            response = client.send(request);
                        } catch (const TransportError& e) {
                            throw BackendUnavailable(e.what());
                        }
                        ParseOutcome outcome = parse_label_vector(response.raw_text, 1);
                        repair_total += count_repairs(outcome);
                        CheckpointRecord record{
                            second, outcome.labels.front(), request.request_digest,
                            response.from_cache ? Provenance::Cached : Provenance::Fresh};
                        sink.append(record);
                        std::lock_guard<std::mutex> lock(state_mu);
                        state.completed[second] = record;
                    } catch (...) {
                        std::lock_guard<std::mutex> lock(state_mu);
                        if (!first_error) first_error = std::current_exception();
                        failed.store(true);
                        return;
                    }
                }
            };

            size_t pool = std::min<size_t>(
                static_cast<size_t>(std::max(config.concurrency_limit, 1)), pending.size());
            std::vector<std::thread> threads;
            threads.reserve(pool);
            for (size_t i = 0; i < pool; ++i) threads.emplace_back(worker);
            for (std::thread& t : threads) t.join();
            if (first_error) std::rethrow_exception(first_error);
        }
    }

    AnnotationVector result;
    result.session_id = manifest.session_id;
    result.config_id = config_id;
    result.labels.reserve(static_cast<size_t>(manifest.total_seconds));
    result.provenance.reserve(static_cast<size_t>(manifest.total_seconds));
    for (int t = 0; t < manifest.total_seconds; ++t) {
        const CheckpointRecord& record = state.completed.at(t);
        result.labels.push_back(record.label);
        result.provenance.push_back(record.provenance);
    }

    write_file_atomic(labels_csv_path(options.workdir, config_id, manifest.session_id),
                      labels_csv_text(result));
    log_event("info", "session_done",
              "session=" + manifest.session_id + " config=" + config_id +
                  " seconds=" + std::to_string(manifest.total_seconds) +
                  " repairs=" + std::to_string(repair_total.load()));
    return result;
}

AnnotationVector load_labels_csv(const fs::path& path, const std::string& session_id,
                                 const std::string& config_id) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line) || line != "second_index,label,provenance") {
        throw CsvError("bad labels header in " + path.string());
    }
    AnnotationVector vec;
    vec.session_id = session_id;
    vec.config_id = config_id;
    int expected = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        size_t c1 = line.find(',');
        size_t c2 = line.rfind(',');
        if (c1 == std::string::npos || c2 == c1) {
            throw CsvError("bad labels row in " + path.string() + ": '" + line + "'");
        }
        int second = std::stoi(line.substr(0, c1));
        if (second != expected) {
            throw CsvError("labels CSV not contiguous at second " + std::to_string(expected));
        }
        auto label = label_from_string(line.substr(c1 + 1, c2 - c1 - 1));
        auto provenance = provenance_from_string(line.substr(c2 + 1));
        if (!label || !provenance) {
            throw CsvError("bad labels row in " + path.string() + ": '" + line + "'");
        }
        vec.labels.push_back(*label);
        vec.provenance.push_back(*provenance);
        ++expected;
    }
    return vec;
}

ExampleStore build_example_store(const std::vector<SessionInput>& held_out) {
    ExampleStore store;
    for (const SessionInput& session : held_out) {
        if (!session.has_gold()) continue;
        std::map<int, const SegmentRef*> by_second;
        for (const SegmentRef& segment : session.manifest.segments) {
            by_second[segment.second_index] = &segment;
        }
        for (const auto& [second, segment] : by_second) {
            if (second >= static_cast<int>(session.gold.labels.size())) continue;
            IclExample example;
            example.frames = segment->frame_ids;
            example.label = session.gold.labels[static_cast<size_t>(second)];
            example.source_session = session.manifest.session_id;
            if (!session.video_path.empty()) {
                example.clip_path = session.video_path;
                example.clip_start_s = static_cast<double>(second);
                example.clip_end_s = static_cast<double>(second) + 1.0;
            }
            store.add(std::move(example));
        }
    }
    return store;
}

AblationOutcome run_ablation(const std::vector<PipelineConfig>& grid,
                             const std::vector<SessionInput>& sessions,
                             const ExampleStore& store, const ClientFactory& client_factory,
                             const RunOptions& options) {
    if (grid.empty()) throw std::invalid_argument("ablation grid is empty");
    if (sessions.empty()) throw std::invalid_argument("no sessions to annotate");
    for (const SessionInput& session : sessions) {
        if (!session.has_gold()) {
            throw std::invalid_argument("session '" + session.manifest.session_id +
                                        "' has no gold annotations");
        }
        if (static_cast<int>(session.gold.labels.size()) != session.manifest.total_seconds) {
            throw std::invalid_argument(
                "gold length " + std::to_string(session.gold.labels.size()) + " != manifest " +
                std::to_string(session.manifest.total_seconds) + " for session '" +
                session.manifest.session_id + "'");
        }
        for (const IclExample& example : store.examples) {
            if (example.source_session == session.manifest.session_id) {
                throw HeldOutViolation("example store draws from annotated session '" +
                                       session.manifest.session_id + "'");
            }
        }
    }

    AblationOutcome outcome;
    for (const PipelineConfig& config : grid) {
        AblationOutcome::Entry entry;
        entry.config = config;
        entry.config_id = config_digest(config);
        std::shared_ptr<BackendClient> client = client_factory(config);
        log_event("info", "config_start",
                  "config=" + entry.config_id + " style=" +
                      std::string(to_string(config.prompt_style)) +
                      " icl=" + (config.icl_enabled ? "on" : "off") +
                      " mode=" + std::string(to_string(config.input_mode)));
        for (const SessionInput& session : sessions) {
            entry.annotations.push_back(
                run_session(config, session, store, *client, options));
        }
        outcome.entries.push_back(std::move(entry));
    }
    return outcome;
}

AblationReport evaluate_ablation(const AblationOutcome& outcome,
                                 const std::vector<SessionInput>& sessions) {
    std::map<std::string, const GoldAnnotations*> gold_by_session;
    for (const SessionInput& session : sessions) {
        gold_by_session[session.manifest.session_id] = &session.gold;
    }

    AblationReport report;
    for (const AblationOutcome::Entry& entry : outcome.entries) {
        ConfigResult result;
        result.config = entry.config;
        result.config_id = entry.config_id;
        for (const AnnotationVector& annotation : entry.annotations) {
            auto it = gold_by_session.find(annotation.session_id);
            if (it == gold_by_session.end() || it->second->labels.empty()) {
                throw std::invalid_argument("no gold for session '" + annotation.session_id +
                                            "'");
            }
            result.cm += confusion_matrix(annotation, *it->second);
        }
        result.eval = per_class_f1(result.cm);
        result.eval.config_id = entry.config_id;
        report.entries.push_back(std::move(result));
    }
    return report;
}

}  // namespace etholabel
