#include "mlci/report.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "svg.hpp"

namespace mlci {

namespace {

double round2(double v) { return std::round(v * 100.0) / 100.0; }

std::string axis_title(const std::string& name, const Dimension& d, std::string_view suffix = {}) {
    const std::string_view token = unit_token(d);
    std::string inner(token);
    if (!suffix.empty()) inner += inner.empty() ? std::string(suffix) : ", " + std::string(suffix);
    return inner.empty() ? name : name + " (" + inner + ")";
}

std::string hex_color(double r, double g, double b) {
    const auto c = [](double v) { return static_cast<int>(std::lround(std::clamp(v, 0.0, 255.0))); };
    return fmt::format("#{:02x}{:02x}{:02x}", c(r), c(g), c(b));
}

/// Diverging blue-grey-red ramp over u in [0, 1].
std::string ramp(double u) {
    u = std::clamp(u, 0.0, 1.0);
    constexpr double lo[3] = {59, 76, 192}, mid[3] = {221, 221, 221}, hi[3] = {180, 4, 38};
    const double* a = u < 0.5 ? lo : mid;
    const double* b = u < 0.5 ? mid : hi;
    const double s = u < 0.5 ? u * 2.0 : (u - 0.5) * 2.0;
    return hex_color(a[0] + (b[0] - a[0]) * s, a[1] + (b[1] - a[1]) * s, a[2] + (b[2] - a[2]) * s);
}

constexpr const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                   "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

} // namespace

std::string render_growth(const QuantitySeries& series, const GrowthFit& fit) {
    if (series.empty()) throw EmptyPlot("growth series '" + series.name() + "' is empty");
    if (fit.n_points + fit.n_dropped != series.size()) {
        throw InvalidInput("fit does not belong to series '" + series.name() + "'");
    }
    std::vector<std::pair<double, double>> pts; // (t_h, log10 y)
    for (std::size_t i = 0; i < series.size(); ++i) {
        const double v = series.values()[i].value();
        if (v > 0.0) pts.emplace_back(series.times()[i].in(unit::h), std::log10(v));
    }
    if (pts.empty()) throw EmptyPlot("growth series '" + series.name() + "' has no positive values");

    const double t0 = series.times().front().in(unit::h);
    const double t1 = series.times().back().in(unit::h);
    const double mu = fit.mu.in(unit::per_h);
    const auto fit_log10 = [&](double t) { return (fit.intercept_log + mu * t) / std::log(10.0); };

    double xlo = t0, xhi = t1;
    svg::pad_range(xlo, xhi);
    double ylo = std::numeric_limits<double>::infinity(), yhi = -ylo;
    for (const auto& p : pts) {
        ylo = std::min(ylo, p.second);
        yhi = std::max(yhi, p.second);
    }
    for (const double t : {t0, t1}) {
        ylo = std::min(ylo, fit_log10(t));
        yhi = std::max(yhi, fit_log10(t));
    }
    svg::pad_range(ylo, yhi);

    svg::Document doc{svg::Frame{}};
    const auto& f = doc.frame();
    const svg::Scale x{xlo, xhi, f.plot_left(), f.plot_right()};
    const svg::Scale y{ylo, yhi, f.plot_bottom(), f.plot_top()};
    std::vector<double> yticks;
    for (double d = std::ceil(ylo); d <= yhi; d += 1.0) yticks.push_back(d);
    if (yticks.size() < 2) yticks = svg::nice_ticks(ylo, yhi, 4);

    doc.title(series.name() + " growth");
    doc.axes(x, svg::nice_ticks(xlo, xhi), y, yticks, "time (h)",
             axis_title(series.name(), series.value_dimension(), "log scale"), true);
    doc.path(fmt::format("M {} {} L {} {}", svg::num(x(t0)), svg::num(y(fit_log10(t0))), svg::num(x(t1)),
                         svg::num(y(fit_log10(t1)))),
             "fit");
    doc.open_group("markers");
    for (const auto& [t, ly] : pts) doc.circle(x(t), y(ly), 3.0, "marker");
    doc.close_group();
    doc.text(f.plot_left() + 10.0, f.plot_top() + 18.0,
             fmt::format("µ = {:.4f} 1/h, R² = {:.4f}", mu, fit.r_squared), "annotation");
    if (fit.n_dropped > 0) {
        doc.text(f.plot_left() + 10.0, f.plot_top() + 34.0, fmt::format("n dropped: {}", fit.n_dropped),
                 "annotation");
    }
    return doc.finish();
}

std::string render_lineage(const TrackletGraph& graph, const std::vector<Quantity>& frame_times,
                           const std::map<TrackletLabel, double>* color_by, const std::string& color_label) {
    if (graph.size() == 0) throw EmptyPlot("lineage has no tracklets");

    // Leaf-order layout; also rejects nodes not reachable from a root.
    std::map<TrackletLabel, double> ypos;
    std::set<TrackletLabel> visiting;
    double next_leaf = 0.0;
    const std::function<double(TrackletLabel)> place = [&](TrackletLabel label) -> double {
        if (!visiting.insert(label).second) throw InvalidGraph("lineage contains a cycle");
        const auto kids = graph.children(label);
        double y = 0.0;
        if (kids.empty()) {
            y = next_leaf;
            next_leaf += 1.0;
        } else {
            for (const auto k : kids) y += place(k);
            y /= static_cast<double>(kids.size());
        }
        ypos[label] = y;
        return y;
    };
    for (const auto r : graph.roots()) place(r);
    if (ypos.size() != graph.size()) throw InvalidGraph("lineage contains a cycle");

    const auto time_of = [&](std::size_t frame) {
        if (frame >= frame_times.size()) throw InvalidInput("tracklet frame beyond frame_times");
        return frame_times[frame].in(unit::h);
    };
    struct Segment {
        TrackletLabel label;
        double x0, x1, y;
        std::vector<TrackletLabel> kids;
    };
    std::vector<Segment> segments;
    double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo;
    for (const Tracklet& tr : graph.tracklets()) {
        Segment s{tr.label, time_of(tr.birth_frame()), time_of(tr.end_frame()), ypos.at(tr.label),
                  graph.children(tr.label)};
        for (const auto k : s.kids) s.x1 = std::max(s.x1, time_of(graph.at(k).birth_frame()));
        xlo = std::min(xlo, s.x0);
        xhi = std::max(xhi, s.x1);
        segments.push_back(std::move(s));
    }
    svg::pad_range(xlo, xhi);

    double vmin = 0.0, vmax = 0.0;
    if (color_by && !color_by->empty()) {
        vmin = std::numeric_limits<double>::infinity();
        vmax = -vmin;
        for (const auto& [label, v] : *color_by) {
            vmin = std::min(vmin, v);
            vmax = std::max(vmax, v);
        }
    }
    const auto color_of = [&](TrackletLabel label) -> std::string {
        if (!color_by) return {};
        const auto it = color_by->find(label);
        if (it == color_by->end()) return "stroke:#999999";
        const double u = vmax > vmin ? (it->second - vmin) / (vmax - vmin) : 0.5;
        return "stroke:" + ramp(u);
    };

    svg::Frame frame;
    if (color_by) frame.right = 110.0;
    svg::Document doc{frame};
    const auto& f = doc.frame();
    const double leaves = next_leaf;
    const svg::Scale x{xlo, xhi, f.plot_left(), f.plot_right()};
    const svg::Scale y{-0.5, leaves - 0.5, f.plot_top(), f.plot_bottom()};

    doc.title("lineage");
    doc.axes(x, svg::nice_ticks(xlo, xhi), y, {}, "time (h)", "lineage (leaf order)");
    doc.open_group("tracklets");
    for (const Segment& s : segments) {
        doc.path(fmt::format("M {} {} H {}", svg::num(x(s.x0)), svg::num(y(s.y)), svg::num(x(s.x1))), "segment",
                 color_of(s.label));
    }
    doc.close_group();
    doc.open_group("divisions");
    for (const Segment& s : segments) {
        if (s.kids.empty()) continue;
        double lo = s.y, hi = s.y;
        for (const auto k : s.kids) {
            lo = std::min(lo, ypos.at(k));
            hi = std::max(hi, ypos.at(k));
        }
        doc.path(fmt::format("M {} {} V {}", svg::num(x(s.x1)), svg::num(y(lo)), svg::num(y(hi))), "branch");
    }
    doc.close_group();

    if (color_by) {
        doc.open_group("legend");
        const double lx = f.plot_right() + 16.0;
        doc.text(lx, f.plot_top() + 4.0, color_label.empty() ? "value" : color_label, "legend-title");
        constexpr int steps = 10;
        for (int i = 0; i < steps; ++i) {
            const double u = 1.0 - static_cast<double>(i) / (steps - 1);
            doc.raw(fmt::format(R"(<rect class="swatch" x="{}" y="{}" width="{}" height="{}" style="fill:{}"/>)",
                                svg::num(lx), svg::num(f.plot_top() + 12.0 + i * 14.0), svg::num(14.0),
                                svg::num(14.0), ramp(u)));
        }
        doc.text(lx + 20.0, f.plot_top() + 24.0, svg::tick_label(vmax), "tick-label");
        doc.text(lx + 20.0, f.plot_top() + 12.0 + steps * 14.0, svg::tick_label(vmin), "tick-label");
        doc.close_group();
    }
    return doc.finish();
}

std::string render_igr(const std::vector<IGRSeries>& series, const std::vector<PhaseInterval>& phases) {
    double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, ylo = xlo, yhi = -xlo;
    std::size_t points = 0;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.igr.size(); ++i) {
            const double t = s.times[i].in(unit::h);
            const double v = s.igr[i].in(unit::um2_per_h);
            xlo = std::min(xlo, t);
            xhi = std::max(xhi, t);
            ylo = std::min(ylo, v);
            yhi = std::max(yhi, v);
            ++points;
        }
    }
    if (points == 0) throw EmptyPlot("no IGR samples");
    for (const auto& p : phases) {
        if (!(p.end > p.start)) throw InvalidInput("phase interval must have end > start");
        xlo = std::min(xlo, p.start.in(unit::h));
        xhi = std::max(xhi, p.end.in(unit::h));
    }
    if (phases.empty()) svg::pad_range(xlo, xhi, 0.02);
    else if (!(xhi > xlo)) svg::pad_range(xlo, xhi);
    svg::pad_range(ylo, yhi);

    svg::Document doc{svg::Frame{}};
    const auto& f = doc.frame();
    const svg::Scale x{xlo, xhi, f.plot_left(), f.plot_right()};
    const svg::Scale y{ylo, yhi, f.plot_bottom(), f.plot_top()};

    doc.title("instantaneous growth rate");
    doc.open_group("phases");
    for (std::size_t i = 0; i < phases.size(); ++i) {
        const double x0 = round2(x(phases[i].start.in(unit::h)));
        const double x1 = round2(x(phases[i].end.in(unit::h)));
        doc.rect(x0, f.plot_top(), x1 - x0, f.plot_bottom() - f.plot_top(), fmt::format("phase-{}", i % 3));
        if (!phases[i].label.empty()) {
            doc.text((x0 + x1) / 2.0, f.plot_top() + 14.0, phases[i].label, "phase-label", "middle");
        }
    }
    doc.close_group();
    doc.axes(x, svg::nice_ticks(xlo, xhi), y, svg::nice_ticks(ylo, yhi), "time (h)",
             axis_title("IGR", dim::area_rate));
    doc.open_group("traces");
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        if (s.igr.empty()) continue;
        std::vector<std::pair<double, double>> pts;
        for (std::size_t i = 0; i < s.igr.size(); ++i) {
            pts.emplace_back(x(s.times[i].in(unit::h)), y(s.igr[i].in(unit::um2_per_h)));
        }
        doc.polyline(pts, "trace", fmt::format("stroke:{}", palette[k % std::size(palette)]));
    }
    doc.close_group();
    return doc.finish();
}

std::string render_rate_distribution(const std::vector<RateGroup>& groups) {
    double ylo = std::numeric_limits<double>::infinity(), yhi = -ylo;
    struct Stats {
        double mean = 0.0, sd = 0.0;
    };
    std::vector<Stats> stats;
    std::size_t points = 0;
    for (const auto& g : groups) {
        Stats s;
        const double n = static_cast<double>(g.rates.size());
        for (const auto& r : g.rates) s.mean += r.second;
        if (n > 0) s.mean /= n;
        for (const auto& r : g.rates) s.sd += (r.second - s.mean) * (r.second - s.mean);
        s.sd = n > 1 ? std::sqrt(s.sd / (n - 1.0)) : 0.0;
        for (const auto& r : g.rates) {
            ylo = std::min(ylo, r.second);
            yhi = std::max(yhi, r.second);
        }
        if (n > 0) {
            ylo = std::min(ylo, s.mean - s.sd);
            yhi = std::max(yhi, s.mean + s.sd);
        }
        points += g.rates.size();
        stats.push_back(s);
    }
    if (points == 0) throw EmptyPlot("no growth rates to plot");
    svg::pad_range(ylo, yhi, 0.1);

    svg::Document doc{svg::Frame{}};
    const auto& f = doc.frame();
    const svg::Scale y{ylo, yhi, f.plot_bottom(), f.plot_top()};
    const double band = (f.plot_right() - f.plot_left()) / static_cast<double>(groups.size());
    const svg::Scale x{0.0, 1.0, f.plot_left(), f.plot_left() + 1.0}; // unused by the category axis

    doc.title("growth rate per replicate");
    doc.axes(x, {}, y, svg::nice_ticks(ylo, yhi), "measure", axis_title("growth rate", dim::rate));
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const auto& g = groups[gi];
        const double cx = f.plot_left() + (static_cast<double>(gi) + 0.5) * band;
        doc.text(cx, f.plot_bottom() + 18.0, g.name, "tick-label", "middle");
        if (g.rates.empty()) continue;
        doc.open_group("replicates");
        const double m = static_cast<double>(g.rates.size());
        for (std::size_t k = 0; k < g.rates.size(); ++k) {
            const double off = ((static_cast<double>(k) + 0.5) / m - 0.5) * band * 0.4;
            doc.circle(cx + off, y(g.rates[k].second), 3.5, "replicate",
                       fmt::format("fill:{}", palette[k % std::size(palette)]));
        }
        doc.close_group();
        const auto& s = stats[gi];
        const double w = band * 0.1;
        doc.open_group("whisker");
        doc.line(cx + band * 0.3, y(s.mean - s.sd), cx + band * 0.3, y(s.mean + s.sd), "whisker-bar");
        doc.line(cx + band * 0.3 - w / 2, y(s.mean - s.sd), cx + band * 0.3 + w / 2, y(s.mean - s.sd), "whisker-cap");
        doc.line(cx + band * 0.3 - w / 2, y(s.mean + s.sd), cx + band * 0.3 + w / 2, y(s.mean + s.sd), "whisker-cap");
        doc.line(cx + band * 0.3 - w, y(s.mean), cx + band * 0.3 + w, y(s.mean), "whisker-mean");
        doc.close_group();
    }
    return doc.finish();
}

} // namespace mlci
