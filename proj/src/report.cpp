#include "ae/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace ae::report {

using nlohmann::json;

namespace {

std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

json class_map(const ClassVector& v) {
    json j = json::object();
    for (auto c : kAllClasses) j[std::string(class_name(c))] = v[class_index(c)];
    return j;
}

constexpr const char* kPalette[] = {"#e6862e", "#4d9a4a", "#4a78b5", "#b54a8f", "#7a7a7a"};

}  // namespace

json report_json(const eval::EvalReport& r) {
    json confusion = json::array();
    for (const auto& row : r.confusion) confusion.push_back(row);
    json support = json::object();
    for (auto c : kAllClasses) support[std::string(class_name(c))] = r.support[class_index(c)];
    return {{"granularity", eval::granularity_name(r.granularity)},
            {"aggregation", eval::aggregation_name(r.aggregation)},
            {"n_items", r.total},
            {"per_class_f1", class_map(r.per_class_f1)},
            {"weighted_f1", r.weighted_f1},
            {"macro_f1", r.macro_f1},
            {"accuracy", r.accuracy},
            {"support", support},
            {"confusion", confusion},
            {"confusion_layout", "rows=true, cols=predicted, order=ROBOT,LEFT,RIGHT"}};
}

std::string confusion_csv(const eval::ConfusionMatrix& m) {
    std::ostringstream out;
    out << "true\\predicted";
    for (auto c : kAllClasses) out << ',' << class_name(c);
    out << '\n';
    for (auto t : kAllClasses) {
        out << class_name(t);
        for (auto p : kAllClasses) out << ',' << m[class_index(t)][class_index(p)];
        out << '\n';
    }
    return out.str();
}

json mean_sd_json(const eval::MeanSd& v) { return {{"mean", v.mean}, {"sd", v.sd}}; }

json crossval_json(const eval::CrossValResult& cv) {
    json folds = json::array();
    for (const auto& f : cv.folds) {
        json reports = json::object();
        for (const auto& r : f.reports) reports[std::string(eval::granularity_name(r.granularity))] = report_json(r);
        folds.push_back({{"fold", f.split.fold},
                         {"test_ids", f.split.test_ids},
                         {"n_train", f.split.train_ids.size()},
                         {"best_epoch", f.best_epoch},
                         {"reports", reports}});
    }
    json summary = json::object();
    for (auto g : eval::kAllGranularities) {
        const auto& s = cv.summary[static_cast<std::size_t>(g)];
        json per_class = json::object();
        for (auto c : kAllClasses) per_class[std::string(class_name(c))] = mean_sd_json(s.per_class_f1[class_index(c)]);
        summary[std::string(eval::granularity_name(g))] = {{"weighted_f1", mean_sd_json(s.weighted_f1)},
                                                           {"macro_f1", mean_sd_json(s.macro_f1)},
                                                           {"accuracy", mean_sd_json(s.accuracy)},
                                                           {"per_class_f1", per_class}};
    }
    return {{"k", cv.k}, {"folds", folds}, {"summary", summary}};
}

std::string render_svg(const BarChart& chart) {
    const double width = 640, height = 400;
    const double left = 70, right = 150, top = 50, bottom = 60;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;
    const std::size_t n_groups = chart.groups.size();
    const std::size_t n_series = chart.series.size();

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape(chart.title)
      << "</text>\n";

    auto y_of = [&](double v) { return top + plot_h * (1.0 - std::clamp(v / chart.y_max, 0.0, 1.0)); };
    for (int tick = 0; tick <= 5; ++tick) {
        const double v = chart.y_max * tick / 5.0;
        const double y = y_of(v);
        s << "<line x1=\"" << left << "\" y1=\"" << fmt("%.2f", y) << "\" x2=\"" << left + plot_w << "\" y2=\""
          << fmt("%.2f", y) << "\" stroke=\"#dddddd\"/>\n";
        s << "<text x=\"" << left - 8 << "\" y=\"" << fmt("%.2f", y + 4) << "\" text-anchor=\"end\">"
          << fmt("%.1f", v) << "</text>\n";
    }
    s << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + plot_h
      << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w << "\" y2=\""
      << top + plot_h << "\" stroke=\"black\"/>\n";
    s << "<text transform=\"translate(18," << top + plot_h / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape(chart.y_label) << "</text>\n";

    if (n_groups > 0 && n_series > 0) {
        const double group_w = plot_w / static_cast<double>(n_groups);
        const double bar_w = group_w * 0.8 / static_cast<double>(n_series);
        for (std::size_t g = 0; g < n_groups; ++g) {
            const double gx = left + group_w * static_cast<double>(g) + group_w * 0.1;
            for (std::size_t k = 0; k < n_series; ++k) {
                const auto& series = chart.series[k];
                const double v = g < series.values.size() ? series.values[g] : 0.0;
                const double x = gx + bar_w * static_cast<double>(k);
                const double y = y_of(v);
                double label_y = y - 4;
                s << "<rect x=\"" << fmt("%.2f", x) << "\" y=\"" << fmt("%.2f", y) << "\" width=\""
                  << fmt("%.2f", bar_w * 0.92) << "\" height=\"" << fmt("%.2f", top + plot_h - y) << "\" fill=\""
                  << kPalette[k % std::size(kPalette)] << "\"/>\n";
                if (g < series.errors.size()) {
                    const double cx = x + bar_w * 0.46;
                    const double y_hi = y_of(v + series.errors[g]);
                    const double y_lo = y_of(v - series.errors[g]);
                    s << "<g class=\"error-bar\" stroke=\"black\">\n";
                    s << "<line x1=\"" << fmt("%.2f", cx) << "\" y1=\"" << fmt("%.2f", y_hi) << "\" x2=\""
                      << fmt("%.2f", cx) << "\" y2=\"" << fmt("%.2f", y_lo) << "\"/>\n";
                    for (double ye : {y_hi, y_lo}) {
                        s << "<line x1=\"" << fmt("%.2f", cx - 4) << "\" y1=\"" << fmt("%.2f", ye) << "\" x2=\""
                          << fmt("%.2f", cx + 4) << "\" y2=\"" << fmt("%.2f", ye) << "\"/>\n";
                    }
                    s << "</g>\n";
                    label_y = std::min(label_y, y_hi - 4);
                }
                s << "<text x=\"" << fmt("%.2f", x + bar_w * 0.46) << "\" y=\"" << fmt("%.2f", label_y)
                  << "\" text-anchor=\"middle\" font-size=\"10\">" << fmt("%.1f", 100.0 * v) << "</text>\n";
            }
            s << "<text x=\"" << fmt("%.2f", left + group_w * (static_cast<double>(g) + 0.5)) << "\" y=\""
              << top + plot_h + 20 << "\" text-anchor=\"middle\">" << escape(chart.groups[g]) << "</text>\n";
        }
    }
    for (std::size_t k = 0; k < n_series; ++k) {
        const double ly = top + 20.0 * static_cast<double>(k);
        s << "<rect x=\"" << left + plot_w + 15 << "\" y=\"" << ly << "\" width=\"12\" height=\"12\" fill=\""
          << kPalette[k % std::size(kPalette)] << "\"/>\n";
        s << "<text x=\"" << left + plot_w + 32 << "\" y=\"" << ly + 10 << "\">" << escape(chart.series[k].name)
          << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

std::string render_confusion_svg(const eval::ConfusionMatrix& m, const std::string& title) {
    const double cell = 80, left = 110, top = 70;
    std::int64_t max_count = 1;
    for (const auto& row : m) {
        for (auto v : row) max_count = std::max(max_count, v);
    }
    std::ostringstream s;
    const double width = left + 3 * cell + 30, height = top + 3 * cell + 50;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
      << "</text>\n";
    s << "<text x=\"" << left + 1.5 * cell << "\" y=\"" << top - 28 << "\" text-anchor=\"middle\">predicted</text>\n";
    s << "<text transform=\"translate(20," << top + 1.5 * cell << ") rotate(-90)\" text-anchor=\"middle\">true</text>\n";
    for (auto c : kAllClasses) {
        const int i = class_index(c);
        s << "<text x=\"" << left + cell * (i + 0.5) << "\" y=\"" << top - 8 << "\" text-anchor=\"middle\">"
          << class_name(c) << "</text>\n";
        s << "<text x=\"" << left - 8 << "\" y=\"" << top + cell * (i + 0.5) + 4 << "\" text-anchor=\"end\">"
          << class_name(c) << "</text>\n";
    }
    for (int t = 0; t < kNumClasses; ++t) {
        std::int64_t row_total = 0;
        for (auto v : m[t]) row_total += v;
        for (int p = 0; p < kNumClasses; ++p) {
            const double shade = static_cast<double>(m[t][p]) / static_cast<double>(max_count);
            const int level = static_cast<int>(255.0 - 180.0 * shade);
            char color[16];
            std::snprintf(color, sizeof color, "#%02x%02xff", level, level);
            s << "<rect x=\"" << left + cell * p << "\" y=\"" << top + cell * t << "\" width=\"" << cell
              << "\" height=\"" << cell << "\" fill=\"" << color << "\" stroke=\"#888888\"/>\n";
            const double frac = row_total > 0 ? static_cast<double>(m[t][p]) / static_cast<double>(row_total) : 0.0;
            s << "<text x=\"" << left + cell * (p + 0.5) << "\" y=\"" << top + cell * (t + 0.5) << "\" text-anchor=\"middle\">"
              << m[t][p] << "</text>\n";
            s << "<text x=\"" << left + cell * (p + 0.5) << "\" y=\"" << top + cell * (t + 0.5) + 16
              << "\" text-anchor=\"middle\" font-size=\"10\">" << fmt("%.1f%%", 100.0 * frac) << "</text>\n";
        }
    }
    s << "</svg>\n";
    return s.str();
}

BarChart granularity_chart(const std::array<eval::EvalReport, 3>& reports, const std::string& title) {
    BarChart c{title, "F1-score", {}, {{"weighted F1", {}, {}}, {"macro F1", {}, {}}}, 1.0};
    for (const auto& r : reports) {
        c.groups.emplace_back(eval::granularity_name(r.granularity));
        c.series[0].values.push_back(r.weighted_f1);
        c.series[1].values.push_back(r.macro_f1);
    }
    return c;
}

BarChart granularity_chart(const eval::CrossValResult& cv, const std::string& title) {
    BarChart c{title, "F1-score (mean, SD error bars)", {}, {{"weighted F1", {}, {}}, {"macro F1", {}, {}}}, 1.0};
    for (auto g : eval::kAllGranularities) {
        const auto& s = cv.summary[static_cast<std::size_t>(g)];
        c.groups.emplace_back(eval::granularity_name(g));
        c.series[0].values.push_back(s.weighted_f1.mean);
        c.series[0].errors.push_back(s.weighted_f1.sd);
        c.series[1].values.push_back(s.macro_f1.mean);
        c.series[1].errors.push_back(s.macro_f1.sd);
    }
    return c;
}

BarChart per_class_chart(const std::array<eval::EvalReport, 3>& reports, const std::string& title) {
    BarChart c{title, "F1-score", {}, {}, 1.0};
    for (auto cls : kAllClasses) c.groups.emplace_back(class_name(cls));
    for (const auto& r : reports) {
        BarSeries s{std::string(eval::granularity_name(r.granularity)), {}, {}};
        for (auto cls : kAllClasses) s.values.push_back(r.per_class_f1[class_index(cls)]);
        c.series.push_back(std::move(s));
    }
    return c;
}

BarChart per_class_chart(const eval::CrossValResult& cv, const std::string& title) {
    BarChart c{title, "F1-score (mean, SD error bars)", {}, {}, 1.0};
    for (auto cls : kAllClasses) c.groups.emplace_back(class_name(cls));
    for (auto g : eval::kAllGranularities) {
        const auto& summary = cv.summary[static_cast<std::size_t>(g)];
        BarSeries s{std::string(eval::granularity_name(g)), {}, {}};
        for (auto cls : kAllClasses) {
            s.values.push_back(summary.per_class_f1[class_index(cls)].mean);
            s.errors.push_back(summary.per_class_f1[class_index(cls)].sd);
        }
        c.series.push_back(std::move(s));
    }
    return c;
}

std::string granularity_table(const std::array<eval::EvalReport, 3>& reports) {
    std::ostringstream s;
    s << "granularity       n      weighted_F1  macro_F1  accuracy  F1[ROBOT] F1[LEFT] F1[RIGHT]\n";
    for (const auto& r : reports) {
        char line[200];
        std::snprintf(line, sizeof line, "%-15s %6lld   %8.2f%%  %7.2f%%  %7.2f%%  %7.2f%% %7.2f%% %7.2f%%\n",
                      std::string(eval::granularity_name(r.granularity)).c_str(), static_cast<long long>(r.total),
                      100 * r.weighted_f1, 100 * r.macro_f1, 100 * r.accuracy, 100 * r.per_class_f1[0],
                      100 * r.per_class_f1[1], 100 * r.per_class_f1[2]);
        s << line;
    }
    return s.str();
}

std::string granularity_table(const eval::CrossValResult& cv) {
    std::ostringstream s;
    s << "granularity      weighted_F1 (mean +- SD)   macro_F1 (mean +- SD)   accuracy (mean +- SD)\n";
    for (auto g : eval::kAllGranularities) {
        const auto& m = cv.summary[static_cast<std::size_t>(g)];
        char line[200];
        std::snprintf(line, sizeof line, "%-15s  %7.2f%% +- %5.2f%%        %7.2f%% +- %5.2f%%      %7.2f%% +- %5.2f%%\n",
                      std::string(eval::granularity_name(g)).c_str(), 100 * m.weighted_f1.mean,
                      100 * m.weighted_f1.sd, 100 * m.macro_f1.mean, 100 * m.macro_f1.sd, 100 * m.accuracy.mean,
                      100 * m.accuracy.sd);
        s << line;
    }
    return s.str();
}

}  // namespace ae::report
