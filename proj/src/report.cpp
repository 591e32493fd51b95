#include "driftnet/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "driftnet/errors.hpp"
#include "driftnet/numkernel.hpp"
#include "driftnet/runner.hpp"

namespace driftnet {

namespace {

using nlohmann::json;

constexpr int kWidth = 640;
constexpr int kHeight = 480;
constexpr int kMarginLeft = 70;
constexpr int kMarginRight = 30;
constexpr int kMarginTop = 40;
constexpr int kMarginBottom = 60;

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                          "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

struct Scale {
    double lo = 0.0, hi = 1.0;
    double px0 = 0.0, px1 = 1.0;
    double at(double v) const {
        const double t = (hi == lo) ? 0.5 : (v - lo) / (hi - lo);
        return px0 + t * (px1 - px0);
    }
};

class Svg {
public:
    Svg(const std::string& title, const std::string& x_label, const std::string& y_label) {
        body_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
              << "\" height=\"" << kHeight << "\" font-family=\"sans-serif\">\n";
        body_ << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        text(kWidth / 2.0, 22, title, 15, "middle");
        text(kWidth / 2.0, kHeight - 14, x_label, 12, "middle");
        body_ << "<text x=\"16\" y=\"" << kHeight / 2
              << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
              << kHeight / 2 << ")\">" << y_label << "</text>\n";
    }

    void axes(const Scale& x, const Scale& y) {
        line(x.px0, y.px0, x.px1, y.px0, "#000", 1);
        line(x.px0, y.px0, x.px0, y.px1, "#000", 1);
        for (int i = 0; i <= 5; ++i) {
            const double t = i / 5.0;
            const double xv = x.lo + t * (x.hi - x.lo);
            const double yv = y.lo + t * (y.hi - y.lo);
            const double xp = x.at(xv);
            const double yp = y.at(yv);
            line(xp, y.px0, xp, y.px0 + 5, "#000", 1);
            text(xp, y.px0 + 20, format_tick(xv), 10, "middle");
            line(x.px0 - 5, yp, x.px0, yp, "#000", 1);
            text(x.px0 - 8, yp + 3, format_tick(yv), 10, "end");
        }
    }

    void line(double x1, double y1, double x2, double y2, const std::string& color, double w) {
        body_ << "<line x1=\"" << x1 << "\" y1=\"" << y1 << "\" x2=\"" << x2 << "\" y2=\"" << y2
              << "\" stroke=\"" << color << "\" stroke-width=\"" << w << "\"/>\n";
    }

    void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& color) {
        body_ << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (const auto& [px, py] : pts) body_ << px << ',' << py << ' ';
        body_ << "\"/>\n";
    }

    void circle(double cx, double cy, double r, const std::string& color) {
        body_ << "<circle cx=\"" << cx << "\" cy=\"" << cy << "\" r=\"" << r << "\" fill=\""
              << color << "\"/>\n";
    }

    void rect(double x, double y, double w, double h, const std::string& fill,
              const std::string& stroke) {
        body_ << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << w << "\" height=\"" << h
              << "\" fill=\"" << fill << "\" stroke=\"" << stroke << "\"/>\n";
    }

    void text(double x, double y, const std::string& s, int size, const std::string& anchor) {
        body_ << "<text x=\"" << x << "\" y=\"" << y << "\" font-size=\"" << size
              << "\" text-anchor=\"" << anchor << "\">" << s << "</text>\n";
    }

    void legend(const std::vector<std::pair<std::string, std::string>>& entries) {
        double y = kMarginTop + 8;
        for (const auto& [label, color] : entries) {
            line(kWidth - kMarginRight - 120, y - 4, kWidth - kMarginRight - 100, y - 4, color, 3);
            text(kWidth - kMarginRight - 94, y, label, 11, "start");
            y += 16;
        }
    }

    void save(const std::filesystem::path& file) {
        body_ << "</svg>\n";
        std::ofstream out(file);
        if (!out) throw IoError("report: cannot open " + file.string());
        out << body_.str();
    }

private:
    static std::string format_tick(double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.4g", v);
        return buf;
    }
    std::ostringstream body_;
};

Scale x_scale(double lo, double hi) {
    if (lo == hi) {
        lo -= 0.5;
        hi += 0.5;
    }
    return {lo, hi, static_cast<double>(kMarginLeft),
            static_cast<double>(kWidth - kMarginRight)};
}

Scale y_scale(double lo, double hi) {
    if (lo == hi) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad, static_cast<double>(kHeight - kMarginBottom),
            static_cast<double>(kMarginTop)};
}

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
    std::size_t n = 0;
};

MeanSe mean_se(const std::vector<double>& values) {
    MeanSe out;
    out.n = values.size();
    if (values.empty()) return out;
    for (double v : values) out.mean += v;
    out.mean /= static_cast<double>(values.size());
    if (values.size() >= 2) {
        double var = 0.0;
        for (double v : values) var += (v - out.mean) * (v - out.mean);
        var /= static_cast<double>(values.size() - 1);
        out.se = std::sqrt(var / static_cast<double>(values.size()));
    }
    return out;
}

json mean_se_json(const MeanSe& ms) {
    json j = {{"mean", ms.mean}, {"n", ms.n}};
    if (ms.n >= 2)
        j["se"] = ms.se;
    else
        j["se"] = nullptr;
    return j;
}

struct BoxStats {
    double q1 = 0.0, median = 0.0, q3 = 0.0, lo = 0.0, hi = 0.0;
};

double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * (static_cast<double>(v.size()) - 1.0);
    const std::size_t i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    if (i + 1 < v.size()) return v[i] * (1.0 - frac) + v[i + 1] * frac;
    return v[i];
}

// Quartile box with 1.5 IQR whiskers clipped to the data range.
BoxStats box_stats(const std::vector<double>& values) {
    BoxStats b;
    b.q1 = quantile(values, 0.25);
    b.median = quantile(values, 0.5);
    b.q3 = quantile(values, 0.75);
    const double iqr = b.q3 - b.q1;
    double lo = b.q1 - 1.5 * iqr;
    double hi = b.q3 + 1.5 * iqr;
    b.lo = *std::min_element(values.begin(), values.end());
    b.hi = *std::max_element(values.begin(), values.end());
    b.lo = std::max(b.lo, lo);
    b.hi = std::min(b.hi, hi);
    return b;
}

std::vector<MetricRow> load_rows(const std::filesystem::path& dir) {
    const auto file = dir / "metrics.csv";
    if (!std::filesystem::exists(file))
        throw ReportError("report: no metrics.csv under " + dir.string());
    auto rows = read_metrics_csv(file);
    if (rows.empty()) throw ReportError("report: metrics.csv has no data rows");
    return rows;
}

// (strategy -> x -> repetition values) for one aggregate metric.
using SeriesMap = std::map<std::string, std::map<double, std::vector<double>>>;

SeriesMap collect_series(const std::vector<MetricRow>& rows, const std::string& metric,
                         bool x_is_sigma) {
    // Aggregate rows only, at the final boundary per (strategy, sigma, rep).
    std::map<std::string, int> max_seen;
    for (const auto& r : rows)
        max_seen[r.strategy] = std::max(max_seen[r.strategy], r.tasks_seen);
    SeriesMap series;
    for (const auto& r : rows) {
        if (r.metric != metric || r.task_id != -1) continue;
        if (x_is_sigma) {
            if (r.tasks_seen != max_seen[r.strategy]) continue;
            series[r.strategy][r.sigma].push_back(r.value);
        } else {
            series[r.strategy][static_cast<double>(r.tasks_seen)].push_back(r.value);
        }
    }
    if (series.empty()) throw ReportError("report: metrics.csv missing metric '" + metric + "'");
    return series;
}

void emit_line_report(const std::filesystem::path& dir, const std::string& kind,
                      const std::string& metric, const std::string& x_label, bool x_is_sigma) {
    const auto rows = load_rows(dir);
    const SeriesMap series = collect_series(rows, metric, x_is_sigma);

    double x_lo = 1e300, x_hi = -1e300, y_lo = 1e300, y_hi = -1e300;
    json summary;
    for (const auto& [strategy, points] : series)
        for (const auto& [x, values] : points) {
            const MeanSe ms = mean_se(values);
            x_lo = std::min(x_lo, x);
            x_hi = std::max(x_hi, x);
            y_lo = std::min(y_lo, ms.mean);
            y_hi = std::max(y_hi, ms.mean);
            json p = mean_se_json(ms);
            p[x_is_sigma ? "sigma" : "tasks_seen"] = x;
            summary[strategy].push_back(p);
        }

    Svg svg(kind, x_label, metric);
    const Scale xs = x_scale(x_lo, x_hi);
    const Scale ys = y_scale(std::min(y_lo, 0.0), y_hi);
    svg.axes(xs, ys);
    std::vector<std::pair<std::string, std::string>> legend;
    std::size_t color = 0;
    for (const auto& [strategy, points] : series) {
        const std::string c = kPalette[color++ % 8];
        std::vector<std::pair<double, double>> pts;
        for (const auto& [x, values] : points) {
            const MeanSe ms = mean_se(values);
            pts.push_back({xs.at(x), ys.at(ms.mean)});
            svg.circle(xs.at(x), ys.at(ms.mean), 3, c);
            if (ms.n >= 2)
                svg.line(xs.at(x), ys.at(ms.mean - ms.se), xs.at(x), ys.at(ms.mean + ms.se), c, 1);
        }
        svg.polyline(pts, c);
        legend.push_back({strategy, c});
    }
    svg.legend(legend);
    svg.save(dir / ("report_" + kind + ".svg"));
    std::ofstream(dir / ("report_" + kind + ".json")) << summary.dump(2) << '\n';
}

// In- vs out-of-distribution group uncertainties per task, from the
// final-boundary retrieval events of every stored run.
void emit_uncertainty_box(const std::filesystem::path& dir) {
    std::map<int, std::vector<double>> in_dist, out_dist;
    const auto runs = dir / "runs";
    if (!std::filesystem::exists(runs)) throw ReportError("report: no runs directory");
    std::vector<std::filesystem::path> event_files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(runs))
        if (entry.path().filename() == "events.jsonl") event_files.push_back(entry.path());
    std::sort(event_files.begin(), event_files.end());
    if (event_files.empty()) throw ReportError("report: no events.jsonl under runs/");

    for (const auto& file : event_files) {
        std::ifstream in(file);
        std::vector<json> records;
        std::string line;
        int max_seen = 0;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            records.push_back(json::parse(line));
            max_seen = std::max(max_seen, records.back()["tasks_seen"].get<int>());
        }
        for (const json& rec : records) {
            if (rec["tasks_seen"].get<int>() != max_seen) continue;
            const int test_task = rec["test_task"].get<int>();
            for (const json& group : rec["groups"]) {
                const auto member_tasks = group["member_tasks"].get<std::vector<int>>();
                if (member_tasks.empty()) continue;
                std::map<int, int> counts;
                for (int t : member_tasks) ++counts[t];
                int majority = member_tasks[0];
                int best = 0;
                for (const auto& [t, c] : counts)
                    if (c > best) {
                        best = c;
                        majority = t;
                    }
                const double u = group["uncertainty"].get<double>();
                if (majority == test_task)
                    in_dist[test_task].push_back(u);
                else
                    out_dist[test_task].push_back(u);
            }
        }
    }
    if (in_dist.empty() && out_dist.empty())
        throw ReportError("report: no group uncertainties in events");

    json summary;
    std::vector<std::pair<std::string, BoxStats>> boxes;
    for (const auto& [task, values] : in_dist) {
        boxes.push_back({"task" + std::to_string(task) + " in", box_stats(values)});
        summary["in_distribution"]["task" + std::to_string(task)] = {
            {"median", boxes.back().second.median}, {"n", values.size()}};
    }
    for (const auto& [task, values] : out_dist) {
        boxes.push_back({"task" + std::to_string(task) + " out", box_stats(values)});
        summary["out_distribution"]["task" + std::to_string(task)] = {
            {"median", boxes.back().second.median}, {"n", values.size()}};
    }

    double y_lo = 1e300, y_hi = -1e300;
    for (const auto& [label, b] : boxes) {
        y_lo = std::min(y_lo, b.lo);
        y_hi = std::max(y_hi, b.hi);
    }
    Svg svg("uncertainty-box", "group", "uncertainty");
    const Scale xs = x_scale(0, static_cast<double>(boxes.size()));
    const Scale ys = y_scale(std::min(0.0, y_lo), y_hi);
    svg.axes(xs, ys);
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        const BoxStats& b = boxes[i].second;
        const double cx = xs.at(static_cast<double>(i) + 0.5);
        const double half = 0.3 * (xs.at(1) - xs.at(0));
        const std::string color = kPalette[i % 8];
        svg.line(cx, ys.at(b.lo), cx, ys.at(b.q1), "#333", 1);
        svg.line(cx, ys.at(b.q3), cx, ys.at(b.hi), "#333", 1);
        svg.rect(cx - half, ys.at(b.q3), 2 * half, ys.at(b.q1) - ys.at(b.q3), color, "#333");
        svg.line(cx - half, ys.at(b.median), cx + half, ys.at(b.median), "#000", 2);
        svg.text(cx, kHeight - kMarginBottom + 34, boxes[i].first, 9, "middle");
    }
    svg.save(dir / "report_uncertainty-box.svg");
    std::ofstream(dir / "report_uncertainty-box.json") << summary.dump(2) << '\n';
}

// First two principal components of the final performance vectors of the
// first stored run, colored by group.
void emit_pc_scatter(const std::filesystem::path& dir) {
    const auto runs = dir / "runs";
    std::vector<std::filesystem::path> pv_files;
    if (std::filesystem::exists(runs))
        for (const auto& entry : std::filesystem::recursive_directory_iterator(runs))
            if (entry.path().filename() == "final_pv.csv") pv_files.push_back(entry.path());
    std::sort(pv_files.begin(), pv_files.end());
    if (pv_files.empty()) throw ReportError("report: no final_pv.csv under runs/");

    std::ifstream in(pv_files.front());
    std::string header;
    std::getline(in, header);
    std::vector<int> groups;
    std::vector<std::vector<double>> pv_rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::getline(ss, field, ',');
        groups.push_back(std::stoi(field));
        std::getline(ss, field, ',');  // hidden task, unused here
        std::vector<double> row;
        while (std::getline(ss, field, ',')) row.push_back(std::stod(field));
        pv_rows.push_back(std::move(row));
    }
    if (pv_rows.size() < 2) throw ReportError("report: too few performance vectors");

    Matrix pv(pv_rows.size(), pv_rows[0].size());
    for (std::size_t i = 0; i < pv_rows.size(); ++i)
        for (std::size_t j = 0; j < pv_rows[i].size(); ++j) pv(i, j) = pv_rows[i][j];
    const Spectrum spec = pca(pv);

    std::vector<double> mean(pv.cols(), 0.0);
    for (std::size_t i = 0; i < pv.rows(); ++i)
        for (std::size_t j = 0; j < pv.cols(); ++j) mean[j] += pv(i, j);
    for (double& v : mean) v /= static_cast<double>(pv.rows());

    std::vector<std::pair<double, double>> coords(pv.rows());
    double x_lo = 1e300, x_hi = -1e300, y_lo = 1e300, y_hi = -1e300;
    for (std::size_t i = 0; i < pv.rows(); ++i) {
        double cx = 0.0, cy = 0.0;
        for (std::size_t j = 0; j < pv.cols(); ++j) {
            const double centered = pv(i, j) - mean[j];
            cx += centered * spec.components(j, 0);
            if (pv.cols() > 1) cy += centered * spec.components(j, 1);
        }
        coords[i] = {cx, cy};
        x_lo = std::min(x_lo, cx);
        x_hi = std::max(x_hi, cx);
        y_lo = std::min(y_lo, cy);
        y_hi = std::max(y_hi, cy);
    }

    Svg svg("pc-scatter", "pc1", "pc2");
    const Scale xs = x_scale(x_lo, x_hi);
    const Scale ys = y_scale(y_lo, y_hi);
    svg.axes(xs, ys);
    std::set<int> labels(groups.begin(), groups.end());
    std::map<int, std::string> colors;
    std::size_t color = 0;
    for (int g : labels) colors[g] = g < 0 ? "#999999" : kPalette[color++ % 8];
    for (std::size_t i = 0; i < coords.size(); ++i)
        svg.circle(xs.at(coords[i].first), ys.at(coords[i].second), 4, colors[groups[i]]);
    std::vector<std::pair<std::string, std::string>> legend;
    for (int g : labels) legend.push_back({"group " + std::to_string(g), colors[g]});
    svg.legend(legend);
    svg.save(dir / "report_pc-scatter.svg");

    double total = 0.0;
    for (double s : spec.eigenvalues) total += s;
    json summary = {{"source", pv_files.front().string()},
                    {"points", coords.size()},
                    {"explained_pc1", total > 0 ? spec.eigenvalues[0] / total : 0.0},
                    {"explained_pc2",
                     total > 0 && spec.eigenvalues.size() > 1 ? spec.eigenvalues[1] / total : 0.0}};
    std::ofstream(dir / "report_pc-scatter.json") << summary.dump(2) << '\n';
}

}  // namespace

void emit_report(const std::filesystem::path& records_dir, const std::string& kind) {
    if (kind == "loss-vs-noise")
        emit_line_report(records_dir, kind, "avg_test_loss", "sigma", true);
    else if (kind == "accuracy-vs-tasks")
        emit_line_report(records_dir, kind, "avg_test_accuracy", "tasks seen", false);
    else if (kind == "drift-rate-vs-noise")
        emit_line_report(records_dir, kind, "drift_rate", "sigma", true);
    else if (kind == "uncertainty-box")
        emit_uncertainty_box(records_dir);
    else if (kind == "pc-scatter")
        emit_pc_scatter(records_dir);
    else
        throw ReportError("report: unknown kind '" + kind + "'");
}

}  // namespace driftnet
