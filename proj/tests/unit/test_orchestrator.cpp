#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "etholabel/orchestrator.hpp"
#include "etholabel/synthetic.hpp"
#include "etholabel/util.hpp"

using namespace etholabel;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("etholabel-test-orch-" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

struct Rig {
    fs::path root;
    SessionInput session;
    SessionInput held_out;
    ExampleStore store;
    std::map<std::string, std::vector<BehaviorLabel>> mock_gold;

    RunOptions options(const std::string& workdir_name) const {
        RunOptions opts;
        opts.workdir = root / workdir_name;
        opts.model_id = "mock";
        return opts;
    }
};

Rig make_rig(const std::string& name, int seconds, int fps = 3, std::uint64_t seed = 11) {
    Rig rig;
    rig.root = temp_dir(name);
    SyntheticSpec spec{"sess-a", seconds, fps, seed};
    rig.session = make_synthetic_session(rig.root / "frames", spec);
    SyntheticSpec held{"held", 9, fps, seed + 99};
    rig.held_out = make_synthetic_session(rig.root / "frames", held);
    rig.store = build_example_store({rig.held_out});
    rig.mock_gold[rig.session.manifest.session_id] = rig.session.gold.labels;
    return rig;
}

std::shared_ptr<BackendClient> client_for(std::shared_ptr<Transport> transport,
                                          int concurrency = 4) {
    ClientOptions options;
    options.no_cache = true;  // mock responses are already deterministic
    options.concurrency_limit = concurrency;
    options.sleep_fn = [](std::chrono::milliseconds) {};
    return std::make_shared<BackendClient>(std::move(transport), options);
}

PipelineConfig base_config(InputMode mode, bool icl = false) {
    PipelineConfig config;
    config.input_mode = mode;
    config.icl_enabled = icl;
    config.fps_target = 3;
    config.concurrency_limit = 4;
    return config;
}

}  // namespace

TEST_CASE("echo backend reproduces gold exactly") {
    Rig rig = make_rig("echo", 24);
    auto mock = std::make_shared<MockTransport>(MockScript::parse("echo"), rig.mock_gold);
    auto client = client_for(mock);
    PipelineConfig config = base_config(InputMode::SegmentFrames);

    AnnotationVector result =
        run_session(config, rig.session, rig.store, *client, rig.options("w"));
    CHECK(result.labels == rig.session.gold.labels);
    CHECK(result.session_id == "sess-a");
    for (Provenance p : result.provenance) CHECK(p == Provenance::Fresh);

    // The labels CSV round-trips.
    fs::path csv = labels_csv_path(rig.options("w").workdir, result.config_id, "sess-a");
    REQUIRE(fs::exists(csv));
    AnnotationVector loaded = load_labels_csv(csv, "sess-a", result.config_id);
    CHECK(loaded.labels == result.labels);
    CHECK(loaded.provenance == result.provenance);
}

TEST_CASE("whole-video mode issues exactly one request") {
    Rig rig = make_rig("whole", 30);
    auto mock = std::make_shared<MockTransport>(MockScript::parse("echo"), rig.mock_gold);
    auto client = client_for(mock);
    PipelineConfig config = base_config(InputMode::WholeVideo);

    AnnotationVector result =
        run_session(config, rig.session, rig.store, *client, rig.options("w"));
    CHECK(mock->total_entries() == 1);
    CHECK(result.labels == rig.session.gold.labels);
}

TEST_CASE("segment mode issues one request per second, resumable") {
    Rig rig = make_rig("resume", 40);
    PipelineConfig config = base_config(InputMode::SegmentFrames);

    // Reference: uninterrupted run.
    auto ref_mock =
        std::make_shared<MockTransport>(MockScript::parse("noisy:0.3:5"), rig.mock_gold);
    auto ref_client = client_for(ref_mock);
    AnnotationVector reference =
        run_session(config, rig.session, rig.store, *ref_client, rig.options("ref"));
    CHECK(ref_mock->total_entries() == 40);

    // Interrupted run: backend dies after 20 successes.
    auto flaky_inner =
        std::make_shared<MockTransport>(MockScript::parse("noisy:0.3:5"), rig.mock_gold);
    auto flaky = std::make_shared<FailAfterTransport>(flaky_inner, 20);
    auto flaky_client = client_for(flaky);
    CHECK_THROWS_AS(
        run_session(config, rig.session, rig.store, *flaky_client, rig.options("cut")),
        BackendUnavailable);

    // Checkpoint preserved: the completed set is nonempty and < total.
    std::string config_id = config_digest(config);
    RunState state = load_run_state(rig.options("cut").workdir / config_id / "sess-a.ckpt",
                                    "sess-a", config_id, 40);
    CHECK(state.completed.size() > 0);
    CHECK(state.completed.size() < 40);
    size_t done_before = state.completed.size();

    // Resume with a healthy backend: only the remaining seconds are issued.
    auto resume_mock =
        std::make_shared<MockTransport>(MockScript::parse("noisy:0.3:5"), rig.mock_gold);
    auto resume_client = client_for(resume_mock);
    AnnotationVector resumed =
        run_session(config, rig.session, rig.store, *resume_client, rig.options("cut"));
    CHECK(resume_mock->total_entries() == static_cast<long>(40 - done_before));
    CHECK(resumed.labels == reference.labels);

    // Byte-identical labels CSV.
    fs::path ref_csv = labels_csv_path(rig.options("ref").workdir, config_id, "sess-a");
    fs::path cut_csv = labels_csv_path(rig.options("cut").workdir, config_id, "sess-a");
    CHECK(read_file(ref_csv) == read_file(cut_csv));
}

TEST_CASE("rerun with a complete checkpoint issues zero requests") {
    Rig rig = make_rig("warm", 16);
    PipelineConfig config = base_config(InputMode::SegmentFrames);
    auto mock = std::make_shared<MockTransport>(MockScript::parse("echo"), rig.mock_gold);
    auto client = client_for(mock);
    AnnotationVector first =
        run_session(config, rig.session, rig.store, *client, rig.options("w"));
    CHECK(mock->total_entries() == 16);

    fs::path csv =
        labels_csv_path(rig.options("w").workdir, config_digest(config), "sess-a");
    std::string bytes_before = read_file(csv);

    auto mock2 = std::make_shared<MockTransport>(MockScript::parse("echo"), rig.mock_gold);
    auto client2 = client_for(mock2);
    AnnotationVector second =
        run_session(config, rig.session, rig.store, *client2, rig.options("w"));
    CHECK(mock2->total_entries() == 0);
    CHECK(second.labels == first.labels);
    CHECK(read_file(csv) == bytes_before);
}

TEST_CASE("a warm response cache serves a fresh workdir with zero backend calls") {
    Rig rig = make_rig("cachewarm", 14);
    PipelineConfig config = base_config(InputMode::SegmentFrames);
    fs::path cache = rig.root / "cache";

    auto make_cached_client = [&](std::shared_ptr<Transport> transport) {
        ClientOptions options;
        options.cache_dir = cache.string();
        options.concurrency_limit = 4;
        options.sleep_fn = [](std::chrono::milliseconds) {};
        return std::make_shared<BackendClient>(std::move(transport), options);
    };

    auto cold_mock = std::make_shared<MockTransport>(MockScript::parse("echo"), rig.mock_gold);
    AnnotationVector cold = run_session(config, rig.session, rig.store,
                                        *make_cached_client(cold_mock), rig.options("cold"));
    CHECK(cold_mock->total_entries() == 14);
    for (Provenance p : cold.provenance) CHECK(p == Provenance::Fresh);

    // Fresh workdir, same cache: every response is served from disk.
    auto warm_mock = std::make_shared<MockTransport>(MockScript::parse("echo"), rig.mock_gold);
    AnnotationVector warm = run_session(config, rig.session, rig.store,
                                        *make_cached_client(warm_mock), rig.options("warm"));
    CHECK(warm_mock->total_entries() == 0);
    CHECK(warm.labels == cold.labels);
    for (Provenance p : warm.provenance) CHECK(p == Provenance::Cached);

    // The cached provenance round-trips through the labels CSV.
    fs::path csv =
        labels_csv_path(rig.options("warm").workdir, config_digest(config), "sess-a");
    AnnotationVector loaded = load_labels_csv(csv, "sess-a", config_digest(config));
    for (Provenance p : loaded.provenance) CHECK(p == Provenance::Cached);
}

TEST_CASE("assembly is independent of worker completion order") {
    Rig rig = make_rig("order", 32);
    PipelineConfig config = base_config(InputMode::SegmentFrames);

    auto run_with_concurrency = [&](int concurrency, const std::string& workdir) {
        auto mock =
            std::make_shared<MockTransport>(MockScript::parse("noisy:0.4:9"), rig.mock_gold);
        mock->set_jitter_ms(2);
        PipelineConfig c = config;
        c.concurrency_limit = concurrency;
        auto client = client_for(mock, concurrency);
        return run_session(c, rig.session, rig.store, *client, rig.options(workdir));
    };

    AnnotationVector serial = run_with_concurrency(1, "serial");
    AnnotationVector parallel = run_with_concurrency(8, "parallel");
    CHECK(serial.labels == parallel.labels);
}

TEST_CASE("ICL runs pull examples from the held-out store only") {
    Rig rig = make_rig("icl", 12);
    PipelineConfig config = base_config(InputMode::SegmentFrames, true);
    auto mock = std::make_shared<MockTransport>(MockScript::parse("echo"), rig.mock_gold);
    auto client = client_for(mock);

    AnnotationVector result =
        run_session(config, rig.session, rig.store, *client, rig.options("w"));
    CHECK(result.labels == rig.session.gold.labels);

    // A store contaminated with the target session is rejected.
    ExampleStore bad = rig.store;
    IclExample own;
    own.frames = rig.session.manifest.segments[0].frame_ids;
    own.label = BehaviorLabel::Freezing;
    own.source_session = "sess-a";
    bad.add(own);
    // Contamination only matters if selection picks it; force it by clearing
    // the legitimate Freezing examples.
    ExampleStore only_bad;
    only_bad.add(own);
    for (const IclExample& e : rig.store.examples) {
        if (e.label != BehaviorLabel::Freezing) only_bad.add(e);
    }
    CHECK_THROWS_AS(
        run_session(config, rig.session, only_bad, *client, rig.options("w2")),
        HeldOutViolation);
}

TEST_CASE("malformed replies become Unknown but keep the vector aligned") {
    Rig rig = make_rig("malform", 10);
    PipelineConfig config = base_config(InputMode::SegmentFrames);
    auto mock =
        std::make_shared<MockTransport>(MockScript::parse("malform:1.0:3"), rig.mock_gold);
    auto client = client_for(mock);
    AnnotationVector result =
        run_session(config, rig.session, rig.store, *client, rig.options("w"));
    REQUIRE(result.labels.size() == 10);
    for (BehaviorLabel label : result.labels) CHECK(label == BehaviorLabel::Unknown);
}

TEST_CASE("run_ablation over the default grid with echo scores F1=1 everywhere") {
    Rig rig = make_rig("grid", 18);
    PipelineConfig base = base_config(InputMode::SegmentFrames);
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

    auto mock = std::make_shared<MockTransport>(MockScript::parse("echo"), rig.mock_gold);
    ClientFactory factory = [&mock](const PipelineConfig& config) {
        return client_for(mock, config.concurrency_limit);
    };

    AblationOutcome outcome =
        run_ablation(grid, {rig.session}, rig.store, factory, rig.options("w"));
    REQUIRE(outcome.entries.size() == 8);

    AblationReport report = evaluate_ablation(outcome, {rig.session});
    REQUIRE(report.entries.size() == 8);
    for (const ConfigResult& entry : report.entries) {
        for (BehaviorLabel cls : kGoldClasses) {
            CHECK(entry.eval.for_label(cls).f1 == doctest::Approx(1.0));
        }
    }

    // Rerun in the same workdir: checkpoints satisfy everything, zero sends.
    long sends_before = mock->total_entries();
    AblationOutcome rerun =
        run_ablation(grid, {rig.session}, rig.store, factory, rig.options("w"));
    CHECK(mock->total_entries() == sends_before);
    REQUIRE(rerun.entries.size() == 8);
    for (size_t i = 0; i < 8; ++i) {
        CHECK(rerun.entries[i].annotations[0].labels == outcome.entries[i].annotations[0].labels);
    }
}

TEST_CASE("run_ablation rejects contaminated stores and missing gold") {
    Rig rig = make_rig("guards", 6);
    std::vector<PipelineConfig> grid = {base_config(InputMode::SegmentFrames)};
    auto mock = std::make_shared<MockTransport>(MockScript::parse("echo"), rig.mock_gold);
    ClientFactory factory = [&mock](const PipelineConfig&) { return client_for(mock); };

    SessionInput no_gold = rig.session;
    no_gold.gold.labels.clear();
    CHECK_THROWS_AS(run_ablation(grid, {no_gold}, rig.store, factory, rig.options("w")),
                    std::invalid_argument);

    ExampleStore contaminated = rig.store;
    IclExample own;
    own.frames = rig.session.manifest.segments[0].frame_ids;
    own.label = BehaviorLabel::Freezing;
    own.source_session = rig.session.manifest.session_id;
    contaminated.add(own);
    CHECK_THROWS_AS(
        run_ablation(grid, {rig.session}, contaminated, factory, rig.options("w")),
        HeldOutViolation);

    CHECK_THROWS_AS(run_ablation({}, {rig.session}, rig.store, factory, rig.options("w")),
                    std::invalid_argument);
}

TEST_CASE("checkpoint loader survives torn trailing lines") {
    fs::path dir = temp_dir("torn");
    fs::path ckpt = dir / "s.ckpt";
    std::string line1 =
        R"({"second_index":0,"label":"Freezing","request_digest":"d0","provenance":"fresh"})";
    std::string torn = R"({"second_index":1,"label":"Flee)";
    write_file_atomic(ckpt, line1 + "\n" + torn);
    RunState state = load_run_state(ckpt, "s", "c", 10);
    CHECK(state.completed.size() == 1);
    CHECK(state.completed.at(0).label == BehaviorLabel::Freezing);
    CHECK(state.completed.at(0).provenance == Provenance::Fresh);
}

TEST_CASE("build_example_store honors gold labels and clip spans") {
    Rig rig = make_rig("store", 8);
    ExampleStore store = build_example_store({rig.held_out});
    CHECK(store.examples.size() == rig.held_out.gold.labels.size());
    for (const IclExample& example : store.examples) {
        CHECK(example.source_session == "held");
        CHECK(!example.frames.empty());
        CHECK(example.has_clip());
        CHECK(example.clip_end_s == example.clip_start_s + 1.0);
    }
}
