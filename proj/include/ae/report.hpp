#pragma once

// Serializers for evaluation results: JSON metrics, CSV confusion matrices and
// small standalone SVG charts.

#include <optional>
#include <string>
#include <vector>

#include "ae/eval.hpp"
#include "json.hpp"

namespace ae::report {

nlohmann::json report_json(const eval::EvalReport& r);
// Header row and column carry the class names; rows are true labels.
std::string confusion_csv(const eval::ConfusionMatrix& m);
nlohmann::json mean_sd_json(const eval::MeanSd& v);
nlohmann::json crossval_json(const eval::CrossValResult& cv);

struct BarSeries {
    std::string name;
    std::vector<double> values;
    std::vector<double> errors;  // optional, same length as values
};

struct BarChart {
    std::string title;
    std::string y_label;
    std::vector<std::string> groups;
    std::vector<BarSeries> series;
    double y_max = 1.0;
};

std::string render_svg(const BarChart& chart);
std::string render_confusion_svg(const eval::ConfusionMatrix& m, const std::string& title);

// Weighted and macro F1 for each granularity (one group per granularity).
BarChart granularity_chart(const std::array<eval::EvalReport, 3>& reports, const std::string& title);
BarChart granularity_chart(const eval::CrossValResult& cv, const std::string& title);
// Per-class F1, one series per granularity.
BarChart per_class_chart(const std::array<eval::EvalReport, 3>& reports, const std::string& title);
BarChart per_class_chart(const eval::CrossValResult& cv, const std::string& title);

// Plain-text table in the same layout as the granularity chart.
std::string granularity_table(const std::array<eval::EvalReport, 3>& reports);
std::string granularity_table(const eval::CrossValResult& cv);

}  // namespace ae::report
