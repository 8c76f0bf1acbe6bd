// Copyright 2026 The shopstage Authors
// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "shopstage/csv.hpp"
#include "shopstage/error.hpp"
#include "shopstage/targeting.hpp"

namespace shopstage {
namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 440.0;
constexpr double kLeft = 80.0;
constexpr double kRight = 170.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 60.0;

const char* const kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};

std::string num(double v) { return csv::format_fixed(v, 2); }

struct Axis {
    double lo = 0.0;
    double hi = 1.0;
    bool log = false;

    double map(double v) const {
        const double a = log ? std::log10(lo) : lo;
        const double b = log ? std::log10(hi) : hi;
        const double x = log ? std::log10(v) : v;
        return b > a ? (x - a) / (b - a) : 0.5;
    }

    std::vector<double> ticks() const {
        std::vector<double> out;
        if (log) {
            for (double e = std::floor(std::log10(lo)); e <= std::ceil(std::log10(hi)); e += 1.0) {
                const double t = std::pow(10.0, e);
                if (t >= lo * (1 - 1e-12) && t <= hi * (1 + 1e-12)) out.push_back(t);
            }
            return out;
        }
        const double span = hi - lo;
        if (!(span > 0)) return {lo};
        const double raw = span / 5.0;
        const double mag = std::pow(10.0, std::floor(std::log10(raw)));
        double step = mag;
        for (double m : {1.0, 2.0, 5.0, 10.0}) {
            if (raw <= m * mag) {
                step = m * mag;
                break;
            }
        }
        for (double t = std::ceil(lo / step) * step; t <= hi + step * 1e-9; t += step) out.push_back(t);
        return out;
    }
};

std::string tick_label(double v) {
    if (v != 0.0 && (std::fabs(v) >= 1e5 || std::fabs(v) < 1e-2)) {
        std::ostringstream s;
        s.precision(1);
        s << std::scientific << v;
        return s.str();
    }
    std::string s = csv::format_fixed(v, 2);
    while (s.find('.') != std::string::npos && (s.back() == '0' || s.back() == '.')) {
        const bool dot = s.back() == '.';
        s.pop_back();
        if (dot) break;
    }
    return s;
}

std::string render(std::span<const ProfitCurve> curves, bool log_scale) {
    Axis x{INFINITY, -INFINITY, log_scale};
    Axis y{INFINITY, -INFINITY, log_scale};
    auto shown = [log_scale](double profit) { return log_scale ? std::max(profit, kLogProfitFloor) : profit; };
    for (const auto& c : curves) {
        for (const auto& p : c.points) {
            x.lo = std::min(x.lo, p.cost);
            x.hi = std::max(x.hi, p.cost);
            y.lo = std::min(y.lo, shown(p.mean_profit));
            y.hi = std::max(y.hi, shown(p.mean_profit));
        }
    }
    if (log_scale) x.lo = std::max(x.lo, 1e-12);
    if (x.hi <= x.lo) x.hi = log_scale ? x.lo * 10.0 : x.lo + 1.0;
    if (y.hi <= y.lo) y.hi = log_scale ? y.lo * 10.0 : y.lo + 1.0;

    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kHeight - kTop - kBottom;
    auto px = [&](double v) { return kLeft + x.map(v) * plot_w; };
    auto py = [&](double v) { return kTop + (1.0 - y.map(shown(v))) * plot_h; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << num(kLeft + plot_w / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
        << "Profit per targeting cost (" << (log_scale ? "log" : "linear") << " scale)</text>\n";
    svg << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(plot_w) << "\" height=\""
        << num(plot_h) << "\" fill=\"none\" stroke=\"black\"/>\n";

    for (double t : x.ticks()) {
        const double tx = px(t);
        svg << "<line x1=\"" << num(tx) << "\" y1=\"" << num(kTop + plot_h) << "\" x2=\"" << num(tx) << "\" y2=\""
            << num(kTop + plot_h + 5) << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << num(tx) << "\" y=\"" << num(kTop + plot_h + 18) << "\" text-anchor=\"middle\">"
            << tick_label(t) << "</text>\n";
    }
    for (double t : y.ticks()) {
        const double ty = kTop + (1.0 - y.map(t)) * plot_h;
        svg << "<line x1=\"" << num(kLeft - 5) << "\" y1=\"" << num(ty) << "\" x2=\"" << num(kLeft) << "\" y2=\""
            << num(ty) << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << num(kLeft - 8) << "\" y=\"" << num(ty + 4) << "\" text-anchor=\"end\">" << tick_label(t)
            << "</text>\n";
    }
    if (!log_scale && y.lo < 0.0 && y.hi > 0.0) {
        const double zy = py(0.0);
        svg << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(zy) << "\" x2=\"" << num(kLeft + plot_w) << "\" y2=\""
            << num(zy) << "\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n";
    }
    svg << "<text x=\"" << num(kLeft + plot_w / 2) << "\" y=\"" << num(kHeight - 15)
        << "\" text-anchor=\"middle\">cost per targeted user</text>\n";
    svg << "<text transform=\"translate(18 " << num(kTop + plot_h / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
        << "mean profit" << (log_scale ? " (floored at " + tick_label(kLogProfitFloor) + ")" : "") << "</text>\n";

    for (std::size_t i = 0; i < curves.size(); ++i) {
        const auto& c = curves[i];
        const char* color = kColors[i % std::size(kColors)];
        if (c.points.size() > 1) {
            svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t k = 0; k < c.points.size(); ++k) {
                svg << (k ? " " : "") << num(px(c.points[k].cost)) << ',' << num(py(c.points[k].mean_profit));
            }
            svg << "\"/>\n";
        }
        for (const auto& p : c.points) {
            svg << "<circle cx=\"" << num(px(p.cost)) << "\" cy=\"" << num(py(p.mean_profit)) << "\" r=\"1.6\" fill=\""
                << color << "\"/>\n";
        }
        const double ly = kTop + 14.0 + 18.0 * static_cast<double>(i);
        svg << "<rect x=\"" << num(kWidth - kRight + 15) << "\" y=\"" << num(ly - 8) << "\" width=\"14\" height=\"3\" fill=\""
            << color << "\"/>\n";
        svg << "<text x=\"" << num(kWidth - kRight + 35) << "\" y=\"" << num(ly) << "\">" << c.method << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

} // namespace

PlotBundle render_plots(std::span<const ProfitCurve> curves) {
    if (curves.empty()) throw Error(ErrorCode::InvalidConfig, "no curves to plot");
    for (const auto& c : curves) {
        if (c.points.empty()) throw Error(ErrorCode::InvalidConfig, "curve '" + c.method + "' has no points");
    }
    PlotBundle out;
    out.linear_svg = render(curves, false);
    out.log_svg = render(curves, true);
    std::ostringstream table;
    table << "method,cost,mean_profit\n";
    for (const auto& c : curves) {
        for (const auto& p : c.points) {
            const std::string fields[] = {c.method, csv::format_double(p.cost), csv::format_double(p.mean_profit)};
            table << csv::join_row(fields) << '\n';
        }
    }
    out.table_csv = table.str();
    return out;
}

std::vector<ProfitCurve> parse_curve_table(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    if (!csv::read_line(in, line) || line != "method,cost,mean_profit")
        throw Error(ErrorCode::MalformedHeader, "curve table header must be method,cost,mean_profit");
    std::vector<ProfitCurve> curves;
    std::size_t line_no = 1;
    while (csv::read_line(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = csv::split_line(line);
        if (f.size() != 3) throw BadValueError(line_no, "method", "expected 3 fields");
        const auto cost = csv::parse_double(f[1]);
        const auto value = csv::parse_double(f[2]);
        if (!cost) throw BadValueError(line_no, "cost", "not a number");
        if (!value) throw BadValueError(line_no, "mean_profit", "not a number");
        auto it = std::find_if(curves.begin(), curves.end(), [&](const ProfitCurve& c) { return c.method == f[0]; });
        if (it == curves.end()) {
            curves.push_back({f[0], {}});
            it = std::prev(curves.end());
        }
        it->points.push_back({*cost, *value});
    }
    return curves;
}

} // namespace shopstage
