#pragma once

#include "demosync/episode.hpp"
#include "demosync/geometry.hpp"

#include <array>
#include <string>
#include <vector>

namespace demosync {

// Accuracy of an episode against a known-truth trajectory. Distances in
// millimeters, angles in degrees, latency residual in milliseconds; every
// field is an unsigned magnitude.
struct ErrorStats {
    std::array<double, 3> pos_mean_mm{0.0, 0.0, 0.0};
    std::array<double, 3> pos_max_mm{0.0, 0.0, 0.0};
    double rot_mean_deg = 0.0;
    double rot_max_deg = 0.0;
    double width_rms_mm = 0.0;
    double latency_residual_ms = 0.0;
    size_t frames = 0;
};

// Single header row + single value row.
std::string error_stats_csv(const ErrorStats& s);

// One row per session plus a trailing TOTAL row with the usable fraction.
std::string usability_csv(const UsabilityStats& s);

// Quotes a CSV field if it contains a comma, quote or newline.
std::string csv_quote(const std::string& field);

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

// Self-contained line plot. Series share one coordinate frame; axes carry
// min/max tick labels. Coordinates are formatted to 0.01 px so identical
// inputs produce byte-identical markup.
std::string render_line_svg(const std::vector<PlotSeries>& series, const std::string& title,
                            const std::string& x_label, const std::string& y_label,
                            int width = 640, int height = 360);

// Two-panel overlay of two z-score-normalized trajectories: left as
// captured, right with g's timestamps shifted by delta. With delta == 0 the
// panels render through the identical path and come out byte-identical.
// Throws Error("IoError") before writing anything when either input is
// empty or invalid.
void emit_alignment_plot(const Trajectory1D& f, const Trajectory1D& g, double delta,
                         const std::string& path);

// Returns the polyline points attribute for each series, in render order --
// lets tests compare plotted geometry without parsing XML.
std::vector<std::string> svg_polyline_points(const std::string& svg);

}  // namespace demosync
