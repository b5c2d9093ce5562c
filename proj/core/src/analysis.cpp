#include "mlci/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mlci {

std::string_view to_string(Measure m) noexcept {
    switch (m) {
    case Measure::CC: return "CC";
    case Measure::TCA: return "TCA";
    case Measure::TSCA: return "TSCA";
    }
    return "TSCA";
}

PopulationSeries population_series(const DetectionTable& table, const std::set<TrackletLabel>* labels) {
    const std::size_t n = table.frame_times.size();
    if (n == 0) throw InsufficientData("detection table has no frames");
    std::vector<double> count(n, 0.0), area(n, 0.0);
    for (const auto& row : table.rows) {
        if (labels != nullptr && !labels->contains(row.label)) continue;
        if (row.frame >= n) throw InconsistentInput("detection frame beyond the table's time axis");
        count[row.frame] += 1.0;
        area[row.frame] += row.area.in(unit::um2);
    }
    std::vector<Quantity> cc, tsca;
    for (std::size_t t = 0; t < n; ++t) {
        cc.emplace_back(count[t], dim::none);
        tsca.emplace_back(area[t], unit::um2);
    }
    return {QuantitySeries("CC", table.frame_times, std::move(cc), dim::none),
            QuantitySeries("TSCA", table.frame_times, std::move(tsca), dim::area)};
}

std::vector<Point> convex_hull(std::vector<Point> points) {
    std::sort(points.begin(), points.end(),
              [](const Point& a, const Point& b) { return a.x != b.x ? a.x < b.x : a.y < b.y; });
    points.erase(std::unique(points.begin(), points.end()), points.end());
    if (points.size() < 3) return points;
    const auto cross = [](const Point& o, const Point& a, const Point& b) {
        return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    };
    std::vector<Point> hull(2 * points.size());
    std::size_t k = 0;
    for (const Point& p : points) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
        hull[k++] = p;
    }
    for (std::size_t i = points.size() - 1, lower = k + 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], points[i]) <= 0) --k;
        hull[k++] = points[i];
    }
    hull.resize(k - 1);
    return hull;
}

QuantitySeries tca_series(const Overlay& overlay, const Quantity& pixel_size, const std::vector<Quantity>& frame_times) {
    if (frame_times.size() != overlay.frames.size()) throw InconsistentInput("frame_times must match overlay frames");
    std::vector<Quantity> values;
    for (const auto& frame : overlay.frames) {
        std::vector<Point> vertices;
        for (const auto& det : frame) vertices.insert(vertices.end(), det.contour.begin(), det.contour.end());
        const auto hull = convex_hull(std::move(vertices));
        const double area_px = hull.size() >= 3 ? polygon_area(hull) : 0.0;
        values.push_back(px_to_physical(area_px, 2, pixel_size));
    }
    return QuantitySeries("TCA", frame_times, std::move(values), dim::area);
}

GrowthFit fit_loglinear(const QuantitySeries& series, Measure measure) {
    GrowthFit fit;
    fit.measure = measure;
    std::vector<double> x, y;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const double v = series.values()[i].value();
        if (!(v > 0.0)) {
            ++fit.n_dropped;
            continue;
        }
        x.push_back(series.times()[i].in(unit::h));
        y.push_back(std::log(v));
    }
    if (x.size() < 2) {
        throw InsufficientData("series '" + series.name() + "' has fewer than 2 positive values");
    }
    const auto n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    const double slope = sxy / sxx;
    const double intercept = my - slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (intercept + slope * x[i]);
        ss_res += r * r;
    }
    fit.mu = Quantity(slope, unit::per_h);
    fit.intercept_log = intercept;
    fit.r_squared = syy == 0.0 ? 1.0 : std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
    fit.n_points = x.size();
    return fit;
}

// ---------------------------------------------------------------------------
// k-means

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return s;
}

// Leading eigenvector of the sample covariance by power iteration, started
// from the point farthest from the mean. Sign fixed so the first non-zero
// component is positive.
std::vector<double> principal_axis(const std::vector<std::vector<double>>& pts, const std::vector<double>& mean) {
    const std::size_t d = mean.size();
    std::size_t far = 0;
    double far_d = -1.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double s = sq_dist(pts[i], mean);
        if (s > far_d) {
            far_d = s;
            far = i;
        }
    }
    std::vector<double> v(d);
    for (std::size_t k = 0; k < d; ++k) v[k] = pts[far][k] - mean[k];
    for (int iter = 0; iter < 500; ++iter) {
        std::vector<double> next(d, 0.0);
        for (const auto& p : pts) {
            double proj = 0.0;
            for (std::size_t k = 0; k < d; ++k) proj += (p[k] - mean[k]) * v[k];
            for (std::size_t k = 0; k < d; ++k) next[k] += proj * (p[k] - mean[k]);
        }
        double norm = 0.0;
        for (const double c : next) norm += c * c;
        norm = std::sqrt(norm);
        if (norm == 0.0) break;
        double change = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            next[k] /= norm;
            change += std::abs(next[k] - v[k]);
        }
        v = std::move(next);
        if (change < 1e-15) break;
    }
    for (const double c : v) {
        if (c != 0.0) {
            if (c < 0.0) {
                for (double& x : v) x = -x;
            }
            break;
        }
    }
    return v;
}

} // namespace

double kmeans_objective(const std::vector<std::vector<double>>& points, const KMeansResult& result) {
    double s = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        s += sq_dist(points[i], result.centers[static_cast<std::size_t>(result.labels[i])]);
    }
    return s;
}

KMeansResult kmeans2(const std::vector<std::vector<double>>& points) {
    if (points.size() < 2) throw DegenerateInput("k-means needs at least 2 points");
    const std::size_t d = points.front().size();
    if (d == 0) throw DegenerateInput("k-means needs at least one coordinate");
    for (const auto& p : points) {
        if (p.size() != d) throw InvalidInput("k-means points differ in dimension");
    }
    if (std::all_of(points.begin(), points.end(), [&](const auto& p) { return p == points.front(); })) {
        throw DegenerateInput("all k-means points are identical");
    }

    std::vector<double> mean(d, 0.0);
    for (const auto& p : points) {
        for (std::size_t k = 0; k < d; ++k) mean[k] += p[k];
    }
    for (double& m : mean) m /= static_cast<double>(points.size());
    const auto axis = principal_axis(points, mean);
    std::size_t lo = 0, hi = 0;
    double lo_p = INFINITY, hi_p = -INFINITY;
    for (std::size_t i = 0; i < points.size(); ++i) {
        double proj = 0.0;
        for (std::size_t k = 0; k < d; ++k) proj += (points[i][k] - mean[k]) * axis[k];
        if (proj < lo_p) {
            lo_p = proj;
            lo = i;
        }
        if (proj > hi_p) {
            hi_p = proj;
            hi = i;
        }
    }

    KMeansResult result;
    result.centers = {points[lo], points[hi]};
    result.labels.assign(points.size(), -1);
    for (std::size_t iter = 0; iter < 100; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < points.size(); ++i) {
            const int label = sq_dist(points[i], result.centers[0]) <= sq_dist(points[i], result.centers[1]) ? 0 : 1;
            if (label != result.labels[i]) {
                result.labels[i] = label;
                changed = true;
            }
        }
        result.objective_trace.push_back(kmeans_objective(points, result));
        if (!changed) break;
        ++result.iterations;
        for (int c = 0; c < 2; ++c) {
            std::vector<double> sum(d, 0.0);
            std::size_t n = 0;
            for (std::size_t i = 0; i < points.size(); ++i) {
                if (result.labels[i] != c) continue;
                ++n;
                for (std::size_t k = 0; k < d; ++k) sum[k] += points[i][k];
            }
            if (n == 0) continue; // keep the previous center
            for (double& s : sum) s /= static_cast<double>(n);
            result.centers[static_cast<std::size_t>(c)] = std::move(sum);
        }
        result.objective_trace.push_back(kmeans_objective(points, result));
    }
    return result;
}

std::set<TrackletLabel> StrainAssignment::labels_of(int strain_index) const {
    std::set<TrackletLabel> out;
    for (const auto& [label, s] : strain) {
        if (s == strain_index) out.insert(label);
    }
    return out;
}

StrainAssignment classify_strains(const TrackletTable& table, const std::array<std::string, 2>& channels,
                                  const Quantity& nonfluor_threshold) {
    if (nonfluor_threshold.dimension() != dim::intensity) {
        throw DimensionMismatch("non-fluorescence threshold must be an intensity (au)");
    }
    std::array<std::size_t, 2> idx{};
    for (std::size_t k = 0; k < 2; ++k) {
        auto it = std::find(table.fluor_channels.begin(), table.fluor_channels.end(), channels[k]);
        if (it == table.fluor_channels.end()) throw IndexError("missing_channel: " + channels[k]);
        idx[k] = static_cast<std::size_t>(it - table.fluor_channels.begin());
    }

    StrainAssignment out;
    std::vector<TrackletLabel> kept;
    std::vector<std::vector<double>> points;
    for (const auto& row : table.rows) {
        const Quantity& f0 = row.median_fluor.at(idx[0]);
        const Quantity& f1 = row.median_fluor.at(idx[1]);
        if (f0 < nonfluor_threshold && f1 < nonfluor_threshold) {
            out.discarded.push_back(row.label);
            continue;
        }
        kept.push_back(row.label);
        points.push_back({f0.in(unit::au), f1.in(unit::au)});
    }
    const KMeansResult km = kmeans2(points);
    const int first = km.centers[0][0] >= km.centers[1][0] ? 0 : 1;
    out.centers = {km.centers[static_cast<std::size_t>(first)], km.centers[static_cast<std::size_t>(1 - first)]};
    for (std::size_t i = 0; i < kept.size(); ++i) out.strain[kept[i]] = km.labels[i] == first ? 0 : 1;
    return out;
}

GrowthFit per_strain_growth(const DetectionTable& table, const StrainAssignment& assignment, int strain) {
    const auto labels = assignment.labels_of(strain);
    if (labels.empty()) throw InsufficientData("strain " + std::to_string(strain) + " has no tracklets");
    const auto series = population_series(table, &labels);
    std::size_t present = 0;
    for (const auto& v : series.tsca.values()) present += v.value() > 0.0 ? 1 : 0;
    if (present < 2) throw InsufficientData("strain " + std::to_string(strain) + " is present in fewer than 2 frames");
    return fit_loglinear(series.tsca, Measure::TSCA);
}

// ---------------------------------------------------------------------------
// Single-cell growth

std::vector<double> gaussian_smooth(std::span<const double> values, double sigma) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InvalidInput("sigma must be finite and >= 0");
    std::vector<double> out(values.begin(), values.end());
    if (sigma == 0.0 || values.empty()) return out;
    const auto radius = static_cast<std::ptrdiff_t>(4.0 * sigma + 0.5);
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double total = 0.0;
    for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
        const double w = std::exp(-0.5 / (sigma * sigma) * static_cast<double>(k * k));
        kernel[static_cast<std::size_t>(k + radius)] = w;
        total += w;
    }
    for (double& w : kernel) w /= total;

    const auto n = static_cast<std::ptrdiff_t>(values.size());
    const auto reflect = [n](std::ptrdiff_t i) {
        std::ptrdiff_t m = i % (2 * n);
        if (m < 0) m += 2 * n;
        return m >= n ? 2 * n - 1 - m : m;
    };
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
            acc += kernel[static_cast<std::size_t>(k + radius)] * values[static_cast<std::size_t>(reflect(i + k))];
        }
        out[static_cast<std::size_t>(i)] = acc;
    }
    return out;
}

IGRSeries igr(const QuantitySeries& areas, double sigma_frames, TrackletLabel label) {
    if (areas.size() < 2) throw InsufficientData("IGR needs at least two area samples");
    if (areas.value_dimension() != dim::area) throw DimensionMismatch("IGR input must be areas (um2)");
    std::vector<double> raw;
    raw.reserve(areas.size() - 1);
    for (std::size_t t = 0; t + 1 < areas.size(); ++t) {
        const Quantity dt = areas.times()[t + 1] - areas.times()[t];
        const Quantity da = areas.values()[t + 1] - areas.values()[t];
        raw.push_back((da / dt).in(unit::um2_per_h));
    }
    IGRSeries out;
    out.label = label;
    out.sigma_frames = sigma_frames;
    out.times.assign(areas.times().begin(), areas.times().end() - 1);
    for (const double v : gaussian_smooth(raw, sigma_frames)) out.igr.emplace_back(v, unit::um2_per_h);
    return out;
}

IGRSeries igr(std::span<const Quantity> areas, const Quantity& frame_interval, double sigma_frames, TrackletLabel label) {
    if (frame_interval.dimension() != dim::time) throw DimensionMismatch("frame interval must be a time");
    if (!(frame_interval.value() > 0.0)) throw InvalidInput("frame interval must be positive");
    std::vector<Quantity> times;
    for (std::size_t t = 0; t < areas.size(); ++t) times.push_back(static_cast<double>(t) * frame_interval);
    return igr(QuantitySeries("area", std::move(times), std::vector<Quantity>(areas.begin(), areas.end()), dim::area),
               sigma_frames, label);
}

std::set<TrackletLabel> full_cycle_filter(const TrackletGraph& graph) {
    std::set<TrackletLabel> out;
    for (const auto& t : graph.tracklets()) {
        if (t.parent && graph.contains(*t.parent) && t.fate == Fate::divided) out.insert(t.label);
    }
    return out;
}

TrackletGraph min_length_filter(const TrackletGraph& graph, std::size_t min_frames) {
    if (min_frames < 1) throw InvalidInput("min_frames must be >= 1");
    std::set<TrackletLabel> kept;
    for (const auto& t : graph.tracklets()) {
        if (t.length() >= min_frames) kept.insert(t.label);
    }
    std::map<TrackletLabel, int> kept_children;
    for (const auto& t : graph.tracklets()) {
        if (kept.contains(t.label) && t.parent && kept.contains(*t.parent)) ++kept_children[*t.parent];
    }
    std::vector<Tracklet> out;
    for (const auto& t : graph.tracklets()) {
        if (!kept.contains(t.label)) continue;
        Tracklet copy = t;
        if (copy.parent && !kept.contains(*copy.parent)) copy.parent.reset();
        if (copy.fate == Fate::divided && kept_children[copy.label] < 2) copy.fate = Fate::lost;
        out.push_back(std::move(copy));
    }
    return TrackletGraph(std::move(out));
}

} // namespace mlci
