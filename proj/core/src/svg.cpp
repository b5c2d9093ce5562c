#include "svg.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace mlci::svg {

std::string num(double v) {
    std::string s = fmt::format("{:.2f}", v);
    if (s == "-0.00") s = "0.00";
    return s;
}

std::string escape(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (const char c : text) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        case '\'': out += "&apos;"; break;
        default: out += c;
        }
    }
    return out;
}

std::vector<double> nice_ticks(double lo, double hi, int target) {
    std::vector<double> ticks;
    if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi)) return ticks;
    const double raw = (hi - lo) / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (const double m : {1.0, 2.0, 5.0, 10.0}) {
        step = m * mag;
        if (step >= raw) break;
    }
    const double first = std::ceil(lo / step - 1e-9);
    // Ranges far below the resolution of their magnitude get no ticks.
    if (!(first + 1.0 > first) || !std::isfinite(step) || step <= 0.0) return ticks;
    for (int i = 0; i <= 4 * target + 4; ++i) {
        const double v = (first + i) * step;
        if (v > hi + step * 1e-9) break;
        ticks.push_back(std::abs(v) < step * 1e-9 ? 0.0 : v);
    }
    return ticks;
}

std::string tick_label(double v) { return fmt::format("{:.4g}", v); }

void pad_range(double& lo, double& hi, double fraction) {
    if (!(hi - lo > 1e-9 * std::max(std::abs(lo), std::abs(hi)))) {
        const double span = lo != 0.0 ? std::abs(lo) * 0.5 : 1.0;
        lo -= span;
        hi += span;
        return;
    }
    const double pad = (hi - lo) * fraction;
    lo -= pad;
    hi += pad;
}

Document::Document(Frame frame) : frame_(frame) {}

void Document::raw(std::string_view element) {
    body_ += element;
    body_ += '\n';
}

void Document::line(double x0, double y0, double x1, double y1, std::string_view cls) {
    body_ += fmt::format(R"(<line class="{}" x1="{}" y1="{}" x2="{}" y2="{}"/>)", cls, num(x0), num(y0), num(x1),
                         num(y1));
    body_ += '\n';
}

void Document::rect(double x, double y, double w, double h, std::string_view cls) {
    body_ += fmt::format(R"(<rect class="{}" x="{}" y="{}" width="{}" height="{}"/>)", cls, num(x), num(y), num(w),
                         num(h));
    body_ += '\n';
}

void Document::circle(double cx, double cy, double r, std::string_view cls, std::string_view style) {
    body_ += fmt::format(R"(<circle class="{}" cx="{}" cy="{}" r="{}")", cls, num(cx), num(cy), num(r));
    if (!style.empty()) body_ += fmt::format(R"( style="{}")", style);
    body_ += "/>\n";
}

void Document::text(double x, double y, std::string_view content, std::string_view cls, std::string_view anchor) {
    body_ += fmt::format(R"(<text class="{}" x="{}" y="{}" text-anchor="{}">{}</text>)", cls, num(x), num(y), anchor,
                         escape(content));
    body_ += '\n';
}

void Document::polyline(const std::vector<std::pair<double, double>>& pts, std::string_view cls,
                        std::string_view style) {
    std::string points;
    for (const auto& [x, y] : pts) {
        if (!points.empty()) points += ' ';
        points += num(x) + ',' + num(y);
    }
    body_ += fmt::format(R"(<polyline class="{}" points="{}")", cls, points);
    if (!style.empty()) body_ += fmt::format(R"( style="{}")", style);
    body_ += "/>\n";
}

void Document::path(std::string_view d, std::string_view cls, std::string_view style) {
    body_ += fmt::format(R"(<path class="{}" d="{}")", cls, d);
    if (!style.empty()) body_ += fmt::format(R"( style="{}")", style);
    body_ += "/>\n";
}

void Document::open_group(std::string_view cls) { body_ += fmt::format("<g class=\"{}\">\n", cls); }

void Document::close_group() { body_ += "</g>\n"; }

void Document::axes(const Scale& x, const std::vector<double>& xticks, const Scale& y,
                    const std::vector<double>& yticks, std::string_view xlabel, std::string_view ylabel, bool ylog) {
    const Frame& f = frame_;
    open_group("axes");
    rect(f.plot_left(), f.plot_top(), f.plot_right() - f.plot_left(), f.plot_bottom() - f.plot_top(), "plot-area");
    for (const double t : xticks) {
        const double px = x(t);
        line(px, f.plot_bottom(), px, f.plot_bottom() + 5.0, "tick");
        text(px, f.plot_bottom() + 18.0, tick_label(t), "tick-label", "middle");
    }
    for (const double t : yticks) {
        const double py = y(t);
        line(f.plot_left() - 5.0, py, f.plot_left(), py, "tick");
        text(f.plot_left() - 8.0, py + 4.0, tick_label(ylog ? std::pow(10.0, t) : t), "tick-label", "end");
    }
    text((f.plot_left() + f.plot_right()) / 2.0, f.height - 12.0, xlabel, "axis-label", "middle");
    const double cy = (f.plot_top() + f.plot_bottom()) / 2.0;
    body_ += fmt::format(R"svg(<text class="axis-label" x="{}" y="{}" text-anchor="middle" transform="rotate(-90 {} {})">{}</text>)svg",
                         num(16.0), num(cy), num(16.0), num(cy), escape(ylabel));
    body_ += '\n';
    close_group();
}

void Document::title(std::string_view content) {
    text(frame_.width / 2.0, 22.0, content, "title", "middle");
}

std::string Document::finish() const {
    std::string out;
    out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n",
        num(frame_.width), num(frame_.height), num(frame_.width), num(frame_.height));
    out += "<style>\n"
           "text{font-family:sans-serif;font-size:12px;fill:#222}\n"
           ".title{font-size:14px}\n"
           ".plot-area{fill:none;stroke:#444;stroke-width:1}\n"
           ".tick{stroke:#444;stroke-width:1}\n"
           ".marker{fill:none;stroke:#1f4e9c;stroke-width:1.5}\n"
           ".fit{fill:none;stroke:#c0392b;stroke-width:1.5;stroke-dasharray:6,4}\n"
           ".segment,.branch{fill:none;stroke:#333;stroke-width:1.5}\n"
           ".trace{fill:none;stroke-width:1;stroke-opacity:0.8}\n"
           ".phase-0{fill:#dfe9f7}\n"
           ".phase-1{fill:#f7e3df}\n"
           ".phase-2{fill:#e3f2df}\n"
           ".replicate{stroke:#222;stroke-width:0.5}\n"
           ".whisker{stroke:#c0392b;stroke-width:1.5;fill:none}\n"
           "</style>\n";
    out += body_;
    out += "</svg>\n";
    return out;
}

} // namespace mlci::svg
