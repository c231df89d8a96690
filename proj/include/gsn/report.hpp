#pragma once

#include <string>
#include <utility>
#include <vector>

#include "gsn/metrics.hpp"

namespace gsn {

/// Ordered key=value lines; the structured text format every report,
/// summary, and manifest uses.
using KvLines = std::vector<std::pair<std::string, std::string>>;

std::string format_double(double v);

void write_kv(const std::string& path, const KvLines& lines);
KvLines read_kv(const std::string& path);

/// Detection report as key=value lines (without the ROC curve).
KvLines report_to_kv(const DetectionReport& r);

/// ROC curve as tab-separated fa/tp rows for external plotting.
void write_roc_points(const std::string& path, const std::vector<RocPoint>& roc);

/// Minimal static plot rendering, enough to eyeball a run.
struct PlotSpec {
    Index width = 480;
    Index height = 480;
    double x_min = 0, x_max = 1;
    double y_min = 0, y_max = 1;
    bool diagonal = false;  // light reference diagonal (ROC chance line)
};

void render_curve_png(const std::string& path, const std::vector<double>& xs,
                      const std::vector<double>& ys, const PlotSpec& spec);

/// ROC curve image with the chance diagonal.
void plot_roc(const std::string& path, const std::vector<RocPoint>& roc);

/// Index-vs-value series (loss or accuracy over steps), auto-ranged.
void plot_series(const std::string& path, const std::vector<double>& values);

}  // namespace gsn
