#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "invkern/errors.hpp"

namespace invkern::io {

// Write-then-rename so readers never observe partial files.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    auto dir = path.parent_path();
    if (!dir.empty()) std::filesystem::create_directories(dir);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw config_error("cannot open for writing: " + tmp.string());
        out << content;
        if (!out.good()) throw config_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct Series {
    std::string name;
    std::vector<double> xs, ys;
};

struct PlotOptions {
    std::string xlabel = "x", ylabel = "y", title;
    bool xlog = false, ylog = false;
    double hline = std::numeric_limits<double>::quiet_NaN();  // reference line
};

// Static SVG line plot: one polyline per series plus an optional horizontal
// reference line.  Points with nonpositive coordinates are dropped on log axes.
inline std::string svg_plot(const std::vector<Series>& series, const PlotOptions& opt) {
    const double W = 720, H = 480, L = 70, R = 24, T = 36, B = 52;
    auto tx = [&](double v) { return opt.xlog ? std::log10(v) : v; };
    auto ty = [&](double v) { return opt.ylog ? std::log10(v) : v; };
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    bool any = false;
    auto scan = [&](double x, double y) {
        if ((opt.xlog && x <= 0) || (opt.ylog && y <= 0)) return;
        xmin = std::min(xmin, tx(x)), xmax = std::max(xmax, tx(x));
        ymin = std::min(ymin, ty(y)), ymax = std::max(ymax, ty(y));
        any = true;
    };
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.xs.size(); ++i) scan(s.xs[i], s.ys[i]);
    if (!std::isnan(opt.hline) && (!opt.ylog || opt.hline > 0))
        ymin = std::min(ymin, ty(opt.hline)), ymax = std::max(ymax, ty(opt.hline));
    if (!any) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    if (xmax - xmin < 1e-12) xmax = xmin + 1;
    if (ymax - ymin < 1e-12) ymax = ymin + 1;
    auto px = [&](double v) { return L + (tx(v) - xmin) / (xmax - xmin) * (W - L - R); };
    auto py = [&](double v) { return H - B - (ty(v) - ymin) / (ymax - ymin) * (H - T - B); };

    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
    std::ostringstream out;
    out.precision(6);
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H
        << "' viewBox='0 0 " << W << " " << H << "'>\n"
        << "<rect width='100%' height='100%' fill='white'/>\n"
        << "<line x1='" << L << "' y1='" << H - B << "' x2='" << W - R << "' y2='" << H - B
        << "' stroke='black'/>\n"
        << "<line x1='" << L << "' y1='" << T << "' x2='" << L << "' y2='" << H - B
        << "' stroke='black'/>\n";
    for (int i = 0; i <= 4; ++i) {
        double fx = xmin + (xmax - xmin) * i / 4.0, fy = ymin + (ymax - ymin) * i / 4.0;
        double vx = opt.xlog ? std::pow(10, fx) : fx, vy = opt.ylog ? std::pow(10, fy) : fy;
        out << "<text x='" << L + (W - L - R) * i / 4.0 << "' y='" << H - B + 18
            << "' font-size='11' text-anchor='middle'>" << vx << "</text>\n"
            << "<text x='" << L - 6 << "' y='" << H - B - (H - T - B) * i / 4.0 + 4
            << "' font-size='11' text-anchor='end'>" << vy << "</text>\n";
    }
    out << "<text x='" << (L + W - R) / 2 << "' y='" << H - 14
        << "' font-size='13' text-anchor='middle'>" << opt.xlabel << "</text>\n"
        << "<text x='16' y='" << (T + H - B) / 2
        << "' font-size='13' text-anchor='middle' transform='rotate(-90 16 " << (T + H - B) / 2
        << ")'>" << opt.ylabel << "</text>\n"
        << "<text x='" << (L + W - R) / 2 << "' y='20' font-size='14' text-anchor='middle'>"
        << opt.title << "</text>\n";
    if (!std::isnan(opt.hline) && (!opt.ylog || opt.hline > 0))
        out << "<line x1='" << L << "' y1='" << py(opt.hline) << "' x2='" << W - R << "' y2='"
            << py(opt.hline) << "' stroke='gray' stroke-dasharray='6,4'/>\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
        out << "<polyline fill='none' stroke='" << colors[s % 8] << "' stroke-width='1.6' points='";
        for (std::size_t i = 0; i < series[s].xs.size(); ++i) {
            double x = series[s].xs[i], y = series[s].ys[i];
            if ((opt.xlog && x <= 0) || (opt.ylog && y <= 0)) continue;
            out << px(x) << "," << py(y) << " ";
        }
        out << "'/>\n<text x='" << W - R - 150 << "' y='" << T + 16 + 16 * s << "' font-size='12' fill='"
            << colors[s % 8] << "'>" << series[s].name << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace invkern::io
