#include "wakerom/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "wakerom/errors.hpp"

namespace wakerom {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                          "#8c564b", "#17becf", "#7f7f7f"};
constexpr int kPaletteSize = 8;

constexpr double kW = 720, kH = 480;
constexpr double kL = 70, kR = 160, kT = 40, kB = 50;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

} // namespace

void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<SvgSeries>& series, bool log_y) {
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double ymin = xmin, ymax = -xmin;
    for (const auto& s : series) {
        for (size_t i = 0; i < s.x.size(); ++i) {
            double y = s.y[i];
            if (!std::isfinite(y)) continue;
            if (log_y && y <= 0.0) continue;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            const double t = log_y ? std::log10(y) : y;
            ymin = std::min(ymin, t);
            ymax = std::max(ymax, t);
        }
    }
    if (!std::isfinite(xmin)) {
        xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;

    auto px = [&](double x) { return kL + (x - xmin) / (xmax - xmin) * (kW - kL - kR); };
    auto py = [&](double y) {
        const double t = log_y ? std::log10(y) : y;
        return kH - kB - (t - ymin) / (ymax - ymin) * (kH - kT - kB);
    };

    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path + " for writing");
    os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kW << "' height='" << kH
       << "' viewBox='0 0 " << kW << " " << kH << "'>\n";
    os << "<rect width='100%' height='100%' fill='white'/>\n";
    os << "<text x='" << kW / 2 << "' y='24' text-anchor='middle' font-size='16'>" << title
       << "</text>\n";
    os << "<line x1='" << kL << "' y1='" << kH - kB << "' x2='" << kW - kR << "' y2='"
       << kH - kB << "' stroke='black'/>\n";
    os << "<line x1='" << kL << "' y1='" << kT << "' x2='" << kL << "' y2='" << kH - kB
       << "' stroke='black'/>\n";
    os << "<text x='" << (kL + kW - kR) / 2 << "' y='" << kH - 12
       << "' text-anchor='middle' font-size='12'>" << x_label << "</text>\n";
    os << "<text x='16' y='" << (kT + kH - kB) / 2 << "' font-size='12' transform='rotate(-90 16 "
       << (kT + kH - kB) / 2 << ")' text-anchor='middle'>" << y_label << "</text>\n";

    // axis ticks
    for (int i = 0; i <= 4; ++i) {
        const double fx = xmin + (xmax - xmin) * i / 4.0;
        os << "<text x='" << px(fx) << "' y='" << kH - kB + 16
           << "' text-anchor='middle' font-size='10'>" << num(fx) << "</text>\n";
        const double ty = ymin + (ymax - ymin) * i / 4.0;
        const double fy = log_y ? std::pow(10.0, ty) : ty;
        os << "<text x='" << kL - 6 << "' y='" << py(fy) + 3
           << "' text-anchor='end' font-size='10'>"
           << (log_y ? ("1e" + num(ty)) : num(fy)) << "</text>\n";
    }

    for (size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = kPalette[si % kPaletteSize];
        os << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5' points='";
        for (size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.y[i]) || (log_y && s.y[i] <= 0.0)) continue;
            os << px(s.x[i]) << "," << py(s.y[i]) << " ";
        }
        os << "'/>\n";
        const double ly = kT + 18.0 * static_cast<double>(si);
        os << "<line x1='" << kW - kR + 10 << "' y1='" << ly << "' x2='" << kW - kR + 34
           << "' y2='" << ly << "' stroke='" << color << "' stroke-width='2'/>\n";
        os << "<text x='" << kW - kR + 40 << "' y='" << ly + 4 << "' font-size='12'>" << s.name
           << "</text>\n";
    }
    os << "</svg>\n";
}

void write_label_strip(const std::string& path, const std::string& title,
                       const std::vector<int>& labels, int k) {
    const double w = 720, h = 120, left = 20, top = 40;
    const double bar_w = (w - 2 * left) / std::max<size_t>(labels.size(), 1);
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path + " for writing");
    os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h
       << "' viewBox='0 0 " << w << " " << h << "'>\n";
    os << "<rect width='100%' height='100%' fill='white'/>\n";
    os << "<text x='" << w / 2 << "' y='24' text-anchor='middle' font-size='14'>" << title
       << "</text>\n";
    for (size_t i = 0; i < labels.size(); ++i) {
        const char* color = kPalette[(labels[i] % std::max(k, 1)) % kPaletteSize];
        os << "<rect x='" << left + bar_w * static_cast<double>(i) << "' y='" << top
           << "' width='" << bar_w + 0.5 << "' height='50' fill='" << color << "'/>\n";
    }
    os << "<text x='" << left << "' y='" << top + 70
       << "' font-size='10'>snapshot index &#8594; (one color per cluster)</text>\n";
    os << "</svg>\n";
}

} // namespace wakerom
