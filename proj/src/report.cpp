#include "gsn/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gsn/image_io.hpp"

namespace gsn {

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

void write_kv(const std::string& path, const KvLines& lines) {
    std::ofstream os(path, std::ios::trunc);
    GSN_CHECK(os.good(), "cannot open report for writing: " << path);
    for (const auto& [k, v] : lines) os << k << "=" << v << '\n';
    GSN_CHECK(os.good(), "write failure on report: " << path);
}

KvLines read_kv(const std::string& path) {
    std::ifstream is(path);
    GSN_CHECK(is.good(), "cannot open report: " << path);
    KvLines out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        GSN_CHECK(eq != std::string::npos, "malformed report line in " << path << ": " << line);
        out.emplace_back(line.substr(0, eq), line.substr(eq + 1));
    }
    return out;
}

KvLines report_to_kv(const DetectionReport& r) {
    return {
        {"pe", format_double(r.pe)},
        {"auc", format_double(r.auc)},
        {"threshold_at_pe", format_double(r.threshold_at_pe)},
        {"mae", format_double(r.mae)},
        {"bit_acc", format_double(r.bit_acc)},
        {"n_cover", std::to_string(r.n_cover)},
        {"n_stego", std::to_string(r.n_stego)},
    };
}

void write_roc_points(const std::string& path, const std::vector<RocPoint>& roc) {
    std::ofstream os(path, std::ios::trunc);
    GSN_CHECK(os.good(), "cannot open ROC data for writing: " << path);
    os << "# fa\ttp\n";
    os.precision(9);
    for (const RocPoint& p : roc) os << p.fa << '\t' << p.tp << '\n';
    GSN_CHECK(os.good(), "write failure on ROC data: " << path);
}

namespace {

struct Canvas {
    RgbBytes img;

    Canvas(Index w, Index h) {
        img.width = w;
        img.height = h;
        img.data.assign((std::size_t)(w * h * 3), 255);
    }

    void put(Index x, Index y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
        img.at(y, x, 0) = r;
        img.at(y, x, 1) = g;
        img.at(y, x, 2) = b;
    }

    void line(double x0, double y0, double x1, double y1, std::uint8_t r, std::uint8_t g,
              std::uint8_t b) {
        double steps = std::max(std::abs(x1 - x0), std::abs(y1 - y0)) + 1;
        for (double i = 0; i <= steps; ++i) {
            double f = i / steps;
            put((Index)std::lround(x0 + f * (x1 - x0)), (Index)std::lround(y0 + f * (y1 - y0)), r, g, b);
        }
    }
};

}  // namespace

void render_curve_png(const std::string& path, const std::vector<double>& xs,
                      const std::vector<double>& ys, const PlotSpec& spec) {
    GSN_CHECK(xs.size() == ys.size(), "curve has " << xs.size() << " x values for " << ys.size() << " y");
    GSN_CHECK(spec.x_max > spec.x_min && spec.y_max > spec.y_min, "plot ranges must be increasing");
    const Index margin = 24;
    Canvas canvas(spec.width, spec.height);
    Index pw = spec.width - 2 * margin, ph = spec.height - 2 * margin;
    auto px = [&](double x) { return (double)margin + (x - spec.x_min) / (spec.x_max - spec.x_min) * pw; };
    auto py = [&](double y) {
        return (double)(spec.height - margin) - (y - spec.y_min) / (spec.y_max - spec.y_min) * ph;
    };

    for (int i = 1; i < 4; ++i) {
        double fx = margin + pw * (i / 4.0), fy = margin + ph * (i / 4.0);
        canvas.line(fx, margin, fx, spec.height - margin, 225, 225, 225);
        canvas.line(margin, fy, spec.width - margin, fy, 225, 225, 225);
    }
    if (spec.diagonal)
        canvas.line(px(spec.x_min), py(spec.y_min), px(spec.x_max), py(spec.y_max), 190, 190, 190);
    canvas.line(margin, margin, margin, spec.height - margin, 40, 40, 40);
    canvas.line(margin, spec.height - margin, spec.width - margin, spec.height - margin, 40, 40, 40);

    auto clampd = [](double v, double lo, double hi) { return std::min(std::max(v, lo), hi); };
    for (std::size_t i = 1; i < xs.size(); ++i) {
        double ax = clampd(xs[i - 1], spec.x_min, spec.x_max), ay = clampd(ys[i - 1], spec.y_min, spec.y_max);
        double bx = clampd(xs[i], spec.x_min, spec.x_max), by = clampd(ys[i], spec.y_min, spec.y_max);
        canvas.line(px(ax), py(ay), px(bx), py(by), 50, 90, 200);
    }
    write_png_bytes(canvas.img, path);
}

void plot_roc(const std::string& path, const std::vector<RocPoint>& roc) {
    std::vector<double> xs, ys;
    xs.reserve(roc.size());
    ys.reserve(roc.size());
    for (const RocPoint& p : roc) {
        xs.push_back(p.fa);
        ys.push_back(p.tp);
    }
    PlotSpec spec;
    spec.diagonal = true;
    render_curve_png(path, xs, ys, spec);
}

void plot_series(const std::string& path, const std::vector<double>& values) {
    GSN_CHECK(!values.empty(), "cannot plot an empty series");
    std::vector<double> xs(values.size());
    for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = (double)i;
    double lo = *std::min_element(values.begin(), values.end());
    double hi = *std::max_element(values.begin(), values.end());
    if (hi - lo < 1e-12) {
        lo -= 0.5;
        hi += 0.5;
    }
    double pad = 0.05 * (hi - lo);
    PlotSpec spec;
    spec.x_min = 0;
    spec.x_max = std::max<double>(1.0, (double)values.size() - 1.0);
    spec.y_min = lo - pad;
    spec.y_max = hi + pad;
    render_curve_png(path, xs, values, spec);
}

}  // namespace gsn
