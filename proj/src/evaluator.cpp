#include "etholabel/evaluator.hpp"

#include <algorithm>
#include <sstream>

#include "json.hpp"

#include "etholabel/config_io.hpp"
#include "etholabel/util.hpp"

namespace etholabel {

using ordered_json = nlohmann::ordered_json;

int ConfusionMatrix::gold_index(BehaviorLabel label) {
    int idx = static_cast<int>(label);
    if (idx < 0 || idx >= kNumGoldClasses) {
        throw std::invalid_argument("gold label may not be Unknown");
    }
    return idx;
}

int ConfusionMatrix::pred_index(BehaviorLabel label) { return static_cast<int>(label); }

void ConfusionMatrix::add(BehaviorLabel gold, BehaviorLabel predicted, long count) {
    counts_[static_cast<size_t>(gold_index(gold))][static_cast<size_t>(pred_index(predicted))] +=
        count;
}

long ConfusionMatrix::count(BehaviorLabel gold, BehaviorLabel predicted) const {
    return counts_[static_cast<size_t>(gold_index(gold))]
                  [static_cast<size_t>(pred_index(predicted))];
}

long ConfusionMatrix::gold_total(BehaviorLabel gold) const {
    long sum = 0;
    for (long c : counts_[static_cast<size_t>(gold_index(gold))]) sum += c;
    return sum;
}

long ConfusionMatrix::predicted_total(BehaviorLabel predicted) const {
    long sum = 0;
    for (const auto& row : counts_) sum += row[static_cast<size_t>(pred_index(predicted))];
    return sum;
}

long ConfusionMatrix::total() const {
    long sum = 0;
    for (const auto& row : counts_)
        for (long c : row) sum += c;
    return sum;
}

long ConfusionMatrix::diagonal() const {
    long sum = 0;
    for (int i = 0; i < kNumGoldClasses; ++i) {
        sum += counts_[static_cast<size_t>(i)][static_cast<size_t>(i)];
    }
    return sum;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
    for (size_t g = 0; g < counts_.size(); ++g) {
        for (size_t p = 0; p < counts_[g].size(); ++p) {
            counts_[g][p] += other.counts_[g][p];
        }
    }
    return *this;
}

ConfusionMatrix confusion_matrix(const std::vector<BehaviorLabel>& pred,
                                 const std::vector<BehaviorLabel>& gold) {
    if (pred.size() != gold.size()) {
        throw LengthMismatch("prediction length " + std::to_string(pred.size()) +
                             " != gold length " + std::to_string(gold.size()));
    }
    ConfusionMatrix cm;
    for (size_t i = 0; i < gold.size(); ++i) {
        cm.add(gold[i], pred[i]);
    }
    return cm;
}

ConfusionMatrix confusion_matrix(const AnnotationVector& pred, const GoldAnnotations& gold) {
    return confusion_matrix(pred.labels, gold.labels);
}

const ClassMetrics& EvalReport::for_label(BehaviorLabel label) const {
    return per_class[static_cast<size_t>(label)];
}

EvalReport per_class_f1(const ConfusionMatrix& cm) {
    EvalReport report;
    report.total_seconds = cm.total();
    for (size_t i = 0; i < kGoldClasses.size(); ++i) {
        BehaviorLabel cls = kGoldClasses[i];
        double tp = static_cast<double>(cm.count(cls, cls));
        double fp = static_cast<double>(cm.predicted_total(cls)) - tp;
        double fn = static_cast<double>(cm.gold_total(cls)) - tp;
        ClassMetrics& m = report.per_class[i];
        m.support = cm.gold_total(cls);
        m.undefined_support = m.support == 0;
        m.precision = (tp + fp) > 0.0 ? tp / (tp + fp) : 0.0;
        m.recall = (tp + fn) > 0.0 ? tp / (tp + fn) : 0.0;
        m.f1 = (m.precision + m.recall) > 0.0
                   ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
                   : 0.0;
    }
    return report;
}

double micro_accuracy(const ConfusionMatrix& cm) {
    long total = cm.total();
    return total > 0 ? static_cast<double>(cm.diagonal()) / static_cast<double>(total) : 0.0;
}

Distribution label_distribution(const std::vector<GoldAnnotations>& gold) {
    Distribution dist;
    for (const GoldAnnotations& g : gold) {
        for (BehaviorLabel label : g.labels) {
            dist.counts[static_cast<size_t>(label)] += 1;
            dist.total += 1;
        }
    }
    for (size_t i = 0; i < dist.counts.size(); ++i) {
        dist.percentages[i] =
            dist.total > 0
                ? round_to_one_decimal(100.0 * static_cast<double>(dist.counts[i]) /
                                       static_cast<double>(dist.total))
                : 0.0;
    }
    return dist;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

namespace {

std::string metrics_csv(const AblationReport& report) {
    std::string out = "config_id,prompt_style,icl,input_mode,class,precision,recall,f1,support\n";
    for (const ConfigResult& entry : report.entries) {
        for (size_t i = 0; i < kGoldClasses.size(); ++i) {
            const ClassMetrics& m = entry.eval.per_class[i];
            out += entry.config_id;
            out += ',';
            out += to_string(entry.config.prompt_style);
            out += ',';
            out += entry.config.icl_enabled ? "on" : "off";
            out += ',';
            out += to_string(entry.config.input_mode);
            out += ',';
            out += to_string(kGoldClasses[i]);
            out += ',';
            out += format_double(m.precision);
            out += ',';
            out += format_double(m.recall);
            out += ',';
            out += format_double(m.f1);
            out += ',';
            out += std::to_string(m.support);
            out += '\n';
        }
    }
    return out;
}

std::string cm_csv(const ConfusionMatrix& cm) {
    std::string out = "gold\\predicted";
    const std::array<BehaviorLabel, 4> pred_order = {BehaviorLabel::Freezing,
                                                     BehaviorLabel::Fleeing,
                                                     BehaviorLabel::ExploringGrooming,
                                                     BehaviorLabel::Unknown};
    for (BehaviorLabel p : pred_order) {
        out += ',';
        out += to_string(p);
    }
    out += '\n';
    for (BehaviorLabel g : kGoldClasses) {
        out += to_string(g);
        for (BehaviorLabel p : pred_order) {
            out += ',' + std::to_string(cm.count(g, p));
        }
        out += '\n';
    }
    return out;
}

ordered_json report_to_json(const AblationReport& report) {
    ordered_json json = ordered_json::array();
    for (const ConfigResult& entry : report.entries) {
        ordered_json e;
        e["config_id"] = entry.config_id;
        e["config"] = pipeline_config_to_json(entry.config);
        e["total_seconds"] = entry.eval.total_seconds;
        ordered_json per_class;
        for (size_t i = 0; i < kGoldClasses.size(); ++i) {
            const ClassMetrics& m = entry.eval.per_class[i];
            ordered_json cls;
            cls["precision"] = m.precision;
            cls["recall"] = m.recall;
            cls["f1"] = m.f1;
            cls["support"] = m.support;
            cls["undefined_support"] = m.undefined_support;
            per_class[std::string(to_string(kGoldClasses[i]))] = std::move(cls);
        }
        e["per_class"] = std::move(per_class);
        ordered_json cm;
        const std::array<BehaviorLabel, 4> pred_order = {BehaviorLabel::Freezing,
                                                         BehaviorLabel::Fleeing,
                                                         BehaviorLabel::ExploringGrooming,
                                                         BehaviorLabel::Unknown};
        for (BehaviorLabel g : kGoldClasses) {
            ordered_json row;
            for (BehaviorLabel p : pred_order) {
                row[std::string(to_string(p))] = entry.cm.count(g, p);
            }
            cm[std::string(to_string(g))] = std::move(row);
        }
        e["confusion_matrix"] = std::move(cm);
        json.push_back(std::move(e));
    }
    return json;
}

std::string format_fixed(double v, int decimals) {
    std::ostringstream ss;
    ss.setf(std::ios::fixed);
    ss.precision(decimals);
    ss << v;
    return ss.str();
}

// Grouped bars: one group per class, one bar per configuration.
std::string f1_svg(const AblationReport& report) {
    const int n_configs = static_cast<int>(report.entries.size());
    const int bar_w = 26;
    const int bar_gap = 6;
    const int group_gap = 48;
    const int plot_h = 260;
    const int margin_left = 64;
    const int margin_top = 48;
    const int group_w = n_configs * (bar_w + bar_gap);
    const int legend_h = 28 + 18 * n_configs;
    const int width = margin_left + kNumGoldClasses * (group_w + group_gap) + 24;
    const int height = margin_top + plot_h + 56 + legend_h;

    static const std::array<std::string, 8> palette = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2",
                                                       "#59a14f", "#edc948", "#b07aa1", "#9c755f"};

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg << "  <text x=\"" << margin_left << "\" y=\"24\" font-size=\"16\">Per-class F1 by "
        << "configuration</text>\n";

    // y axis with gridlines at 0, 0.25, 0.5, 0.75, 1.
    for (int i = 0; i <= 4; ++i) {
        double frac = i / 4.0;
        int y = margin_top + static_cast<int>((1.0 - frac) * plot_h);
        svg << "  <line x1=\"" << margin_left << "\" y1=\"" << y << "\" x2=\"" << width - 16
            << "\" y2=\"" << y << "\" stroke=\"#dddddd\"/>\n";
        svg << "  <text x=\"" << margin_left - 8 << "\" y=\"" << y + 4
            << "\" text-anchor=\"end\">" << format_fixed(frac, 2) << "</text>\n";
    }

    for (int c = 0; c < kNumGoldClasses; ++c) {
        int group_x = margin_left + c * (group_w + group_gap);
        for (int k = 0; k < n_configs; ++k) {
            const ConfigResult& entry = report.entries[static_cast<size_t>(k)];
            double f1 = entry.eval.per_class[static_cast<size_t>(c)].f1;
            int h = static_cast<int>(f1 * plot_h + 0.5);
            int x = group_x + k * (bar_w + bar_gap);
            int y = margin_top + plot_h - h;
            svg << "  <rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << bar_w
                << "\" height=\"" << h << "\" fill=\""
                << palette[static_cast<size_t>(k) % palette.size()] << "\"/>\n";
            svg << "  <text x=\"" << x + bar_w / 2 << "\" y=\"" << y - 4
                << "\" text-anchor=\"middle\" font-size=\"9\">" << format_fixed(f1, 2)
                << "</text>\n";
        }
        svg << "  <text x=\"" << group_x + group_w / 2 << "\" y=\""
            << margin_top + plot_h + 20 << "\" text-anchor=\"middle\">"
            << to_string(kGoldClasses[static_cast<size_t>(c)]) << "</text>\n";
    }

    // Legend.
    int legend_y = margin_top + plot_h + 48;
    svg << "  <text x=\"" << margin_left << "\" y=\"" << legend_y
        << "\" font-size=\"13\">Configurations</text>\n";
    for (int k = 0; k < n_configs; ++k) {
        const ConfigResult& entry = report.entries[static_cast<size_t>(k)];
        int y = legend_y + 12 + 18 * k;
        svg << "  <rect x=\"" << margin_left << "\" y=\"" << y << "\" width=\"12\" height=\"12\" "
            << "fill=\"" << palette[static_cast<size_t>(k) % palette.size()] << "\"/>\n";
        svg << "  <text x=\"" << margin_left + 18 << "\" y=\"" << y + 10 << "\">"
            << entry.config_id << " (" << to_string(entry.config.prompt_style) << ", ICL "
            << (entry.config.icl_enabled ? "on" : "off") << ", "
            << to_string(entry.config.input_mode) << ")</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace

void render_report(const AblationReport& report, const std::filesystem::path& out_dir) {
    if (report.entries.empty()) {
        throw std::invalid_argument("cannot render an empty ablation report");
    }
    std::filesystem::create_directories(out_dir);
    write_file_atomic(out_dir / "report.csv", metrics_csv(report));
    write_file_atomic(out_dir / "report.json", report_to_json(report).dump(2) + "\n");
    for (const ConfigResult& entry : report.entries) {
        write_file_atomic(out_dir / ("cm_" + entry.config_id + ".csv"), cm_csv(entry.cm));
    }
    write_file_atomic(out_dir / "f1_comparison.svg", f1_svg(report));
}

AblationReport load_report_json(const std::filesystem::path& path) {
    auto json = nlohmann::json::parse(read_file(path));
    AblationReport report;
    for (const auto& e : json) {
        ConfigResult entry;
        entry.config_id = e.at("config_id").get<std::string>();
        entry.config = pipeline_config_from_json(e.at("config"));
        for (const auto& [gold_name, row] : e.at("confusion_matrix").items()) {
            auto gold = label_from_string(gold_name);
            if (!gold) throw std::invalid_argument("bad gold label in report: " + gold_name);
            for (const auto& [pred_name, count] : row.items()) {
                auto pred = label_from_string(pred_name);
                if (!pred) throw std::invalid_argument("bad pred label in report: " + pred_name);
                entry.cm.add(*gold, *pred, count.get<long>());
            }
        }
        entry.eval = per_class_f1(entry.cm);
        entry.eval.config_id = entry.config_id;
        report.entries.push_back(std::move(entry));
    }
    return report;
}

}  // namespace etholabel
