#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "etholabel/core.hpp"

namespace etholabel {

struct LengthMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Counts over gold classes x predicted classes (gold never holds Unknown;
// predictions may).
class ConfusionMatrix {
public:
    void add(BehaviorLabel gold, BehaviorLabel predicted, long count = 1);
    long count(BehaviorLabel gold, BehaviorLabel predicted) const;
    long gold_total(BehaviorLabel gold) const;
    long predicted_total(BehaviorLabel predicted) const;
    long total() const;
    long diagonal() const;

    ConfusionMatrix& operator+=(const ConfusionMatrix& other);
    bool operator==(const ConfusionMatrix&) const = default;

private:
    static int gold_index(BehaviorLabel label);
    static int pred_index(BehaviorLabel label);
    std::array<std::array<long, 4>, 3> counts_{};
};

ConfusionMatrix confusion_matrix(const AnnotationVector& pred, const GoldAnnotations& gold);
ConfusionMatrix confusion_matrix(const std::vector<BehaviorLabel>& pred,
                                 const std::vector<BehaviorLabel>& gold);

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    long support = 0;
    bool undefined_support = false;  // no gold seconds for this class
};

struct EvalReport {
    std::string config_id;
    std::array<ClassMetrics, 3> per_class{};  // kGoldClasses order
    long total_seconds = 0;

    const ClassMetrics& for_label(BehaviorLabel label) const;
};

// Per-class precision/recall/F1 with the 0/0 -> 0 convention. The Unknown
// column adds false negatives to the gold class and false positives to none.
EvalReport per_class_f1(const ConfusionMatrix& cm);

double micro_accuracy(const ConfusionMatrix& cm);

struct Distribution {
    std::array<long, 3> counts{};       // kGoldClasses order
    std::array<double, 3> percentages{};  // rounded to one decimal
    long total = 0;
};

Distribution label_distribution(const std::vector<GoldAnnotations>& gold);

// ---------------------------------------------------------------------------
// Ablation report rendering
// ---------------------------------------------------------------------------

struct ConfigResult {
    PipelineConfig config;
    std::string config_id;
    ConfusionMatrix cm;
    EvalReport eval;
};

struct AblationReport {
    std::vector<ConfigResult> entries;
};

// Writes report.csv, report.json, cm_<config_id>.csv per entry, and
// f1_comparison.svg. Deterministic: identical input renders identical bytes.
void render_report(const AblationReport& report, const std::filesystem::path& out_dir);

AblationReport load_report_json(const std::filesystem::path& path);

}  // namespace etholabel
