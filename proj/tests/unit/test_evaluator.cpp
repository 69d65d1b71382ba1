#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "etholabel/evaluator.hpp"
#include "etholabel/util.hpp"

using namespace etholabel;
namespace fs = std::filesystem;

namespace {

// Independent oracle: per-class tallies straight off the label vectors, no
// ConfusionMatrix involved, same formula ordering as the spec states it.
struct OracleMetrics {
    double precision, recall, f1;
    long support;
};

OracleMetrics brute_force_class_metrics(const std::vector<BehaviorLabel>& pred,
                                        const std::vector<BehaviorLabel>& gold,
                                        BehaviorLabel cls) {
    long tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < gold.size(); ++i) {
        if (gold[i] == cls && pred[i] == cls) ++tp;
        if (gold[i] != cls && pred[i] == cls) ++fp;
        if (gold[i] == cls && pred[i] != cls) ++fn;
    }
    OracleMetrics m{};
    m.support = tp + fn;
    m.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    m.recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    return m;
}

std::vector<BehaviorLabel> random_vector(std::mt19937_64& rng, int n, bool allow_unknown) {
    std::uniform_int_distribution<int> pick(0, allow_unknown ? 3 : 2);
    std::vector<BehaviorLabel> v;
    for (int i = 0; i < n; ++i) v.push_back(static_cast<BehaviorLabel>(pick(rng)));
    return v;
}

AblationReport synthetic_report(int configs) {
    AblationReport report;
    std::mt19937_64 rng(31);
    auto grid_config = [](int k) {
        PipelineConfig config;
        config.prompt_style = (k & 1) ? PromptStyle::Complex : PromptStyle::Simple;
        config.icl_enabled = (k & 2) != 0;
        config.input_mode = (k & 4) ? InputMode::SegmentFrames : InputMode::WholeVideo;
        return config;
    };
    for (int k = 0; k < configs; ++k) {
        ConfigResult entry;
        entry.config = grid_config(k);
        entry.config_id = config_digest(entry.config);
        auto gold = random_vector(rng, 60, false);
        auto pred = random_vector(rng, 60, true);
        entry.cm = confusion_matrix(pred, gold);
        entry.eval = per_class_f1(entry.cm);
        entry.eval.config_id = entry.config_id;
        report.entries.push_back(std::move(entry));
    }
    return report;
}

fs::path temp_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("etholabel-test-eval-" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("confusion matrix of a perfect prediction is diagonal") {
    std::vector<BehaviorLabel> gold = {
        BehaviorLabel::Freezing,          BehaviorLabel::Freezing,
        BehaviorLabel::Fleeing,           BehaviorLabel::ExploringGrooming,
        BehaviorLabel::ExploringGrooming, BehaviorLabel::ExploringGrooming,
        BehaviorLabel::Freezing,          BehaviorLabel::Fleeing,
        BehaviorLabel::ExploringGrooming, BehaviorLabel::Freezing};
    ConfusionMatrix cm = confusion_matrix(gold, gold);
    CHECK(cm.total() == 10);
    CHECK(cm.diagonal() == 10);
    CHECK(micro_accuracy(cm) == doctest::Approx(1.0));
}

TEST_CASE("all-Unknown predictions land in the Unknown column") {
    std::vector<BehaviorLabel> gold(4, BehaviorLabel::Freezing);
    std::vector<BehaviorLabel> pred(4, BehaviorLabel::Unknown);
    ConfusionMatrix cm = confusion_matrix(pred, gold);
    CHECK(cm.count(BehaviorLabel::Freezing, BehaviorLabel::Unknown) == 4);
    CHECK(cm.total() == 4);
    CHECK(cm.diagonal() == 0);
}

TEST_CASE("confusion matrix equals a brute-force per-index tally") {
    std::mt19937_64 rng(17);
    auto gold = random_vector(rng, 50, false);
    auto pred = random_vector(rng, 50, true);
    ConfusionMatrix cm = confusion_matrix(pred, gold);

    for (BehaviorLabel g : kGoldClasses) {
        for (BehaviorLabel p : {BehaviorLabel::Freezing, BehaviorLabel::Fleeing,
                                BehaviorLabel::ExploringGrooming, BehaviorLabel::Unknown}) {
            long expected = 0;
            for (size_t i = 0; i < gold.size(); ++i) {
                if (gold[i] == g && pred[i] == p) ++expected;
            }
            CHECK(cm.count(g, p) == expected);
        }
    }
}

TEST_CASE("length mismatch is an error") {
    std::vector<BehaviorLabel> gold(3, BehaviorLabel::Freezing);
    std::vector<BehaviorLabel> pred(4, BehaviorLabel::Freezing);
    CHECK_THROWS_AS(confusion_matrix(pred, gold), LengthMismatch);
}

TEST_CASE("gold may not contain Unknown") {
    ConfusionMatrix cm;
    CHECK_THROWS_AS(cm.add(BehaviorLabel::Unknown, BehaviorLabel::Freezing),
                    std::invalid_argument);
}

TEST_CASE("per_class_f1 on a perfect matrix is 1.0 everywhere with support") {
    std::vector<BehaviorLabel> gold = {BehaviorLabel::Freezing, BehaviorLabel::Fleeing,
                                       BehaviorLabel::ExploringGrooming,
                                       BehaviorLabel::ExploringGrooming};
    EvalReport report = per_class_f1(confusion_matrix(gold, gold));
    for (BehaviorLabel cls : kGoldClasses) {
        CHECK(report.for_label(cls).f1 == doctest::Approx(1.0));
        CHECK(!report.for_label(cls).undefined_support);
    }
    CHECK(report.total_seconds == 4);
}

TEST_CASE("per_class_f1 hand-checked case: TP=3 FP=1 FN=2") {
    ConfusionMatrix cm;
    cm.add(BehaviorLabel::Freezing, BehaviorLabel::Freezing, 3);            // TP
    cm.add(BehaviorLabel::ExploringGrooming, BehaviorLabel::Freezing, 1);   // FP
    cm.add(BehaviorLabel::Freezing, BehaviorLabel::ExploringGrooming, 2);   // FN
    cm.add(BehaviorLabel::ExploringGrooming, BehaviorLabel::ExploringGrooming, 4);

    EvalReport report = per_class_f1(cm);
    const ClassMetrics& freezing = report.for_label(BehaviorLabel::Freezing);
    CHECK(freezing.precision == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(freezing.recall == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(freezing.f1 == doctest::Approx(2.0 * 0.45 / 1.35).epsilon(1e-12));
    CHECK(freezing.support == 5);
}

TEST_CASE("zero-support class scores 0 with the undefined_support flag") {
    ConfusionMatrix cm;
    cm.add(BehaviorLabel::ExploringGrooming, BehaviorLabel::ExploringGrooming, 9);
    EvalReport report = per_class_f1(cm);
    const ClassMetrics& fleeing = report.for_label(BehaviorLabel::Fleeing);
    CHECK(fleeing.f1 == 0.0);
    CHECK(fleeing.precision == 0.0);
    CHECK(fleeing.recall == 0.0);
    CHECK(fleeing.undefined_support);
    CHECK(!report.for_label(BehaviorLabel::ExploringGrooming).undefined_support);
}

TEST_CASE("per_class_f1 matches the brute-force oracle on 1000 random pairs") {
    std::mt19937_64 rng(20240131);
    for (int trial = 0; trial < 1000; ++trial) {
        int n = 1 + static_cast<int>(rng() % 64);
        auto gold = random_vector(rng, n, false);
        auto pred = random_vector(rng, n, true);
        EvalReport report = per_class_f1(confusion_matrix(pred, gold));
        for (BehaviorLabel cls : kGoldClasses) {
            OracleMetrics oracle = brute_force_class_metrics(pred, gold, cls);
            const ClassMetrics& impl = report.for_label(cls);
            CHECK(std::abs(impl.precision - oracle.precision) <= 1e-12);
            CHECK(std::abs(impl.recall - oracle.recall) <= 1e-12);
            CHECK(std::abs(impl.f1 - oracle.f1) <= 1e-12);
            CHECK(impl.support == oracle.support);
        }
    }
}

TEST_CASE("micro accuracy is 1 iff prediction equals gold") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        int n = 1 + static_cast<int>(rng() % 32);
        auto gold = random_vector(rng, n, false);
        auto pred = gold;
        CHECK(micro_accuracy(confusion_matrix(pred, gold)) == doctest::Approx(1.0));
        pred[rng() % n] = pred[rng() % n] == BehaviorLabel::Freezing
                              ? BehaviorLabel::Fleeing
                              : BehaviorLabel::Freezing;
        if (pred != gold) {
            CHECK(micro_accuracy(confusion_matrix(pred, gold)) < 1.0);
        }
    }
}

TEST_CASE("metrics are invariant under permutation of aligned pairs") {
    std::mt19937_64 rng(77);
    auto gold = random_vector(rng, 40, false);
    auto pred = random_vector(rng, 40, true);
    EvalReport base = per_class_f1(confusion_matrix(pred, gold));

    std::vector<size_t> order(gold.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<BehaviorLabel> gold_p, pred_p;
    for (size_t i : order) {
        gold_p.push_back(gold[i]);
        pred_p.push_back(pred[i]);
    }
    EvalReport shuffled = per_class_f1(confusion_matrix(pred_p, gold_p));
    for (BehaviorLabel cls : kGoldClasses) {
        CHECK(base.for_label(cls).f1 == shuffled.for_label(cls).f1);
        CHECK(base.for_label(cls).precision == shuffled.for_label(cls).precision);
        CHECK(base.for_label(cls).recall == shuffled.for_label(cls).recall);
    }
}

TEST_CASE("label_distribution reproduces the corpus percentages") {
    GoldAnnotations gold;
    gold.session_id = "all";
    gold.labels.insert(gold.labels.end(), 410, BehaviorLabel::Freezing);
    gold.labels.insert(gold.labels.end(), 21, BehaviorLabel::Fleeing);
    gold.labels.insert(gold.labels.end(), 2809, BehaviorLabel::ExploringGrooming);
    Distribution dist = label_distribution({gold});

    CHECK(dist.total == 3240);
    CHECK(dist.counts[0] == 410);
    CHECK(dist.counts[1] == 21);
    CHECK(dist.counts[2] == 2809);
    CHECK(dist.percentages[0] == 12.7);
    CHECK(dist.percentages[1] == 0.6);
    CHECK(dist.percentages[2] == 86.7);
    double sum = dist.percentages[0] + dist.percentages[1] + dist.percentages[2];
    CHECK(std::abs(sum - 100.0) <= 0.1);
}

TEST_CASE("label_distribution degenerate cases") {
    Distribution empty = label_distribution({});
    CHECK(empty.total == 0);
    for (double p : empty.percentages) CHECK(p == 0.0);

    GoldAnnotations gold;
    gold.session_id = "s";
    gold.labels.assign(5, BehaviorLabel::Freezing);
    Distribution single = label_distribution({gold});
    CHECK(single.percentages[0] == 100.0);
    CHECK(single.percentages[1] == 0.0);
}

TEST_CASE("render_report writes 24 F1 rows for 8 configs and re-renders identically") {
    AblationReport report = synthetic_report(8);
    fs::path out = temp_dir("render");
    render_report(report, out);

    std::string csv = read_file(out / "report.csv");
    long rows = std::count(csv.begin(), csv.end(), '\n');
    CHECK(rows == 1 + 8 * 3);  // header + 24
    CHECK(csv.rfind("config_id,prompt_style,icl,input_mode,class,precision,recall,f1,support\n",
                    0) == 0);

    for (const ConfigResult& entry : report.entries) {
        CHECK(fs::exists(out / ("cm_" + entry.config_id + ".csv")));
    }
    CHECK(fs::exists(out / "f1_comparison.svg"));
    std::string svg = read_file(out / "f1_comparison.svg");
    CHECK(svg.find("<svg") != std::string::npos);

    std::string json_once = read_file(out / "report.json");
    render_report(report, out);
    CHECK(read_file(out / "report.csv") == csv);
    CHECK(read_file(out / "report.json") == json_once);
    CHECK(read_file(out / "f1_comparison.svg") == svg);
}

TEST_CASE("report.json round-trips confusion matrices and metrics") {
    AblationReport report = synthetic_report(3);
    fs::path out = temp_dir("roundtrip");
    render_report(report, out);
    AblationReport loaded = load_report_json(out / "report.json");
    REQUIRE(loaded.entries.size() == report.entries.size());
    for (size_t i = 0; i < report.entries.size(); ++i) {
        CHECK(loaded.entries[i].config_id == report.entries[i].config_id);
        CHECK(loaded.entries[i].cm == report.entries[i].cm);
        for (BehaviorLabel cls : kGoldClasses) {
            CHECK(loaded.entries[i].eval.for_label(cls).f1 ==
                  report.entries[i].eval.for_label(cls).f1);
        }
        CHECK(loaded.entries[i].config == report.entries[i].config);
    }

    // A re-render from the loaded report is byte-identical.
    fs::path out2 = temp_dir("roundtrip2");
    render_report(loaded, out2);
    CHECK(read_file(out2 / "report.csv") == read_file(out / "report.csv"));
    CHECK(read_file(out2 / "report.json") == read_file(out / "report.json"));
}

TEST_CASE("a one-config report renders a chart with one bar per class group") {
    AblationReport report = synthetic_report(1);
    fs::path out = temp_dir("onecfg");
    render_report(report, out);
    std::string svg = read_file(out / "f1_comparison.svg");
    // one rect per class plus one legend swatch
    long rects = 0;
    size_t pos = 0;
    while ((pos = svg.find("<rect", pos)) != std::string::npos) {
        ++rects;
        pos += 5;
    }
    CHECK(rects == 3 + 1);
}
