#include "demosync/report.hpp"

#include "demosync/error.hpp"
#include "demosync/latency.hpp"
#include "demosync/textio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace demosync {

std::string csv_quote(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

std::string error_stats_csv(const ErrorStats& s) {
    std::string out =
        "pos_mean_x_mm,pos_mean_y_mm,pos_mean_z_mm,"
        "pos_max_x_mm,pos_max_y_mm,pos_max_z_mm,"
        "rot_mean_deg,rot_max_deg,width_rms_mm,latency_residual_ms,frames\n";
    out += fmt_g17(s.pos_mean_mm[0]) + "," + fmt_g17(s.pos_mean_mm[1]) + "," +
           fmt_g17(s.pos_mean_mm[2]) + "," + fmt_g17(s.pos_max_mm[0]) + "," +
           fmt_g17(s.pos_max_mm[1]) + "," + fmt_g17(s.pos_max_mm[2]) + "," +
           fmt_g17(s.rot_mean_deg) + "," + fmt_g17(s.rot_max_deg) + "," +
           fmt_g17(s.width_rms_mm) + "," + fmt_g17(s.latency_residual_ms) + "," +
           std::to_string(s.frames) + "\n";
    return out;
}

std::string usability_csv(const UsabilityStats& s) {
    std::string out =
        "session_id,usable,reason,frames_emitted,frames_dropped,active_tactile_fraction\n";
    size_t emitted = 0, dropped = 0;
    for (const SessionUsability& row : s.sessions) {
        out += csv_quote(row.session_id) + "," + (row.usable ? "1" : "0") + "," +
               csv_quote(row.reason) + "," + std::to_string(row.frames_emitted) + "," +
               std::to_string(row.frames_dropped) + "," +
               fmt_g17(row.active_tactile_fraction) + "\n";
        emitted += row.frames_emitted;
        dropped += row.frames_dropped;
    }
    // Trailing aggregate row: the usable fraction rides in the 'usable' column.
    out += "TOTAL," + fmt_g17(s.usable_fraction) + ",usable_fraction," +
           std::to_string(emitted) + "," + std::to_string(dropped) + ",\n";
    return out;
}

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};

std::string fmt_px(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string fmt_tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string xml_escape(const std::string& s) {
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

// Panel body at local coordinates; the caller wraps it in <svg> or a
// translated <g>.
std::string render_panel(const std::vector<PlotSeries>& series, const std::string& title,
                         const std::string& x_label, const std::string& y_label, int width,
                         int height) {
    const double x0 = 60.0, y0 = 30.0;
    const double w = width - 75.0, h = height - 70.0;

    double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
    bool first = true;
    for (const PlotSeries& s : series) {
        for (size_t i = 0; i < s.x.size(); ++i) {
            if (first) {
                xmin = xmax = s.x[i];
                ymin = ymax = s.y[i];
                first = false;
            }
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    }
    if (xmax - xmin <= 0.0) xmax = xmin + 1.0;
    const double ypad = (ymax - ymin > 0.0) ? 0.05 * (ymax - ymin) : 1.0;
    ymin -= ypad;
    ymax += ypad;

    auto px = [&](double x) { return x0 + (x - xmin) / (xmax - xmin) * w; };
    auto py = [&](double y) { return y0 + h - (y - ymin) / (ymax - ymin) * h; };

    std::string out;
    out += "<rect x=\"" + fmt_px(x0) + "\" y=\"" + fmt_px(y0) + "\" width=\"" + fmt_px(w) +
           "\" height=\"" + fmt_px(h) + "\" fill=\"white\" stroke=\"#cccccc\"/>\n";
    for (size_t i = 0; i < series.size(); ++i) {
        const PlotSeries& s = series[i];
        std::string points;
        for (size_t k = 0; k < s.x.size(); ++k) {
            if (k) points += " ";
            points += fmt_px(px(s.x[k])) + "," + fmt_px(py(s.y[k]));
        }
        out += "<polyline fill=\"none\" stroke=\"" +
               std::string(kPalette[i % (sizeof kPalette / sizeof kPalette[0])]) +
               "\" stroke-width=\"1.2\" points=\"" + points + "\"/>\n";
        out += "<text x=\"" + fmt_px(x0 + w - 4.0) + "\" y=\"" + fmt_px(y0 + 14.0 + 14.0 * i) +
               "\" text-anchor=\"end\" font-size=\"11\" fill=\"" +
               kPalette[i % (sizeof kPalette / sizeof kPalette[0])] + "\">" +
               xml_escape(s.label) + "</text>\n";
    }
    out += "<text x=\"" + fmt_px(x0 + w / 2.0) + "\" y=\"18\" text-anchor=\"middle\" "
           "font-size=\"13\">" + xml_escape(title) + "</text>\n";
    out += "<text x=\"" + fmt_px(x0 + w / 2.0) + "\" y=\"" + fmt_px(y0 + h + 32.0) +
           "\" text-anchor=\"middle\" font-size=\"11\">" + xml_escape(x_label) + "</text>\n";
    out += "<text x=\"14\" y=\"" + fmt_px(y0 + h / 2.0) +
           "\" text-anchor=\"middle\" font-size=\"11\" transform=\"rotate(-90 14 " +
           fmt_px(y0 + h / 2.0) + ")\">" + xml_escape(y_label) + "</text>\n";
    out += "<text x=\"" + fmt_px(x0) + "\" y=\"" + fmt_px(y0 + h + 14.0) +
           "\" font-size=\"10\">" + fmt_tick(xmin) + "</text>\n";
    out += "<text x=\"" + fmt_px(x0 + w) + "\" y=\"" + fmt_px(y0 + h + 14.0) +
           "\" text-anchor=\"end\" font-size=\"10\">" + fmt_tick(xmax) + "</text>\n";
    out += "<text x=\"" + fmt_px(x0 - 4.0) + "\" y=\"" + fmt_px(y0 + h) +
           "\" text-anchor=\"end\" font-size=\"10\">" + fmt_tick(ymin) + "</text>\n";
    out += "<text x=\"" + fmt_px(x0 - 4.0) + "\" y=\"" + fmt_px(y0 + 10.0) +
           "\" text-anchor=\"end\" font-size=\"10\">" + fmt_tick(ymax) + "</text>\n";
    return out;
}

}  // namespace

std::string render_line_svg(const std::vector<PlotSeries>& series, const std::string& title,
                            const std::string& x_label, const std::string& y_label, int width,
                            int height) {
    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                      std::to_string(width) + "\" height=\"" + std::to_string(height) + "\">\n";
    out += render_panel(series, title, x_label, y_label, width, height);
    out += "</svg>\n";
    return out;
}

void emit_alignment_plot(const Trajectory1D& f, const Trajectory1D& g, double delta,
                         const std::string& path) {
    if (f.times.empty() || g.times.empty())
        throw Error("IoError", "refusing to plot: empty trajectory");
    f.validate();
    g.validate();
    const Trajectory1D fn = zscore_normalize(f);
    const Trajectory1D gn = zscore_normalize(g);

    const int panel_w = 560, panel_h = 360;
    auto panel_series = [&](double shift) {
        std::vector<PlotSeries> series(2);
        series[0].label = "reference";
        series[0].x = fn.times;
        series[0].y = fn.values;
        series[1].label = "stream";
        series[1].x = gn.times;
        for (double& t : series[1].x) t += shift;
        series[1].y = gn.values;
        return series;
    };

    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                      std::to_string(2 * panel_w) + "\" height=\"" + std::to_string(panel_h) +
                      "\">\n";
    out += "<g>\n" +
           render_panel(panel_series(0.0), "raw overlay", "time (s)", "normalized amplitude",
                        panel_w, panel_h) +
           "</g>\n";
    out += "<g transform=\"translate(" + std::to_string(panel_w) + " 0)\">\n" +
           render_panel(panel_series(delta), "after shift by " + fmt_tick(delta) + " s",
                        "time (s)", "normalized amplitude", panel_w, panel_h) +
           "</g>\n";
    out += "</svg>\n";
    write_file_bytes(path, out);
}

std::vector<std::string> svg_polyline_points(const std::string& svg) {
    std::vector<std::string> out;
    const std::string needle = "points=\"";
    size_t pos = 0;
    while ((pos = svg.find(needle, pos)) != std::string::npos) {
        pos += needle.size();
        const size_t end = svg.find('"', pos);
        if (end == std::string::npos) break;
        out.push_back(svg.substr(pos, end - pos));
        pos = end + 1;
    }
    return out;
}

}  // namespace demosync
