#include "mlci/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mlci/parallel.hpp"

namespace mlci {

std::size_t Overlay::detection_count() const noexcept {
    std::size_t n = 0;
    for (const auto& f : frames) n += f.size();
    return n;
}

const CellDetection& Overlay::find(DetectionId id) const {
    for (const auto& f : frames) {
        for (const auto& d : f) {
            if (d.id == id) return d;
        }
    }
    throw IndexError("no detection with id " + std::to_string(id));
}

double polygon_area(std::span<const Point> contour) {
    if (contour.size() < 3) throw InvalidInput("polygon needs at least 3 vertices");
    double twice = 0.0;
    for (std::size_t i = 0; i < contour.size(); ++i) {
        const Point& a = contour[i];
        const Point& b = contour[(i + 1) % contour.size()];
        twice += a.x * b.y - b.x * a.y;
    }
    return std::abs(twice) / 2.0;
}

namespace {

struct Step {
    int dx;
    int dy;
    friend bool operator==(const Step&, const Step&) = default;
};

constexpr Step turn_left(Step d) { return {d.dy, -d.dx}; }
constexpr Step turn_right(Step d) { return {-d.dy, d.dx}; }

/// Membership test over the bounding box of a pixel set.
class Mask {
public:
    explicit Mask(std::span<const Pixel> pixels) {
        row0_ = col0_ = INT32_MAX;
        std::int32_t row1 = INT32_MIN, col1 = INT32_MIN;
        for (const Pixel& p : pixels) {
            row0_ = std::min(row0_, p.row);
            col0_ = std::min(col0_, p.col);
            row1 = std::max(row1, p.row);
            col1 = std::max(col1, p.col);
        }
        rows_ = row1 - row0_ + 1;
        cols_ = col1 - col0_ + 1;
        bits_.assign(static_cast<std::size_t>(rows_) * static_cast<std::size_t>(cols_), 0);
        for (const Pixel& p : pixels) bits_[index(p.row - row0_, p.col - col0_)] = 1;
    }

    bool contains(std::int32_t row, std::int32_t col) const {
        const std::int32_t r = row - row0_, c = col - col0_;
        if (r < 0 || c < 0 || r >= rows_ || c >= cols_) return false;
        return bits_[index(r, c)] != 0;
    }

private:
    std::size_t index(std::int32_t r, std::int32_t c) const {
        return static_cast<std::size_t>(r) * static_cast<std::size_t>(cols_) + static_cast<std::size_t>(c);
    }

    std::int32_t row0_, col0_, rows_ = 0, cols_ = 0;
    std::vector<std::uint8_t> bits_;
};

// Pixel on one side of the unit edge leaving corner (x, y) along d. `side`
// is +1 for the right-hand pixel, -1 for the left-hand one.
bool side_pixel(const Mask& mask, int x, int y, Step d, int side) {
    const Step n = turn_right(d);
    const int nx = side * n.dx, ny = side * n.dy;
    const int px = std::min({x, x + d.dx, x + nx, x + d.dx + nx});
    const int py = std::min({y, y + d.dy, y + ny, y + d.dy + ny});
    return mask.contains(py, px);
}

} // namespace

std::vector<Point> trace_outer_boundary(std::span<const Pixel> pixels) {
    if (pixels.empty()) return {};
    const Mask mask(pixels);
    const Pixel first = *std::min_element(pixels.begin(), pixels.end(), [](const Pixel& a, const Pixel& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });

    // Walk corners with the foreground on the right. At each corner prefer a
    // left turn (diagonal neighbours belong to the same 8-connected blob),
    // then straight, then right.
    const Step east{1, 0};
    int x = first.col, y = first.row;
    Step d = east;
    std::vector<Point> corners{{static_cast<double>(x), static_cast<double>(y)}};
    const std::size_t guard = 4 * pixels.size() + 8;
    for (std::size_t steps = 0; steps < guard * 2; ++steps) {
        x += d.dx;
        y += d.dy;
        if (side_pixel(mask, x, y, d, -1)) {
            d = turn_left(d);
        } else if (!side_pixel(mask, x, y, d, +1)) {
            d = turn_right(d);
        }
        if (x == first.col && y == first.row && d == east) break;
        corners.push_back({static_cast<double>(x), static_cast<double>(y)});
    }

    std::vector<Point> out;
    const std::size_t n = corners.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point& prev = corners[(i + n - 1) % n];
        const Point& cur = corners[i];
        const Point& next = corners[(i + 1) % n];
        const double cross = (cur.x - prev.x) * (next.y - cur.y) - (cur.y - prev.y) * (next.x - cur.x);
        const double dot = (cur.x - prev.x) * (next.x - cur.x) + (cur.y - prev.y) * (next.y - cur.y);
        if (cross == 0.0 && dot > 0.0) continue;
        out.push_back(cur);
    }
    return out;
}

namespace {

CellDetection make_detection(std::vector<Pixel> pixels) {
    std::sort(pixels.begin(), pixels.end(), [](const Pixel& a, const Pixel& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    CellDetection det;
    double sx = 0.0, sy = 0.0;
    for (const Pixel& p : pixels) {
        sx += p.col;
        sy += p.row;
    }
    const auto n = static_cast<double>(pixels.size());
    det.area_px = n;
    det.centroid_px = {sx / n, sy / n};
    det.contour = trace_outer_boundary(pixels);
    det.pixels = std::move(pixels);
    return det;
}

} // namespace

std::vector<CellDetection> label_components(std::span<const std::int32_t> labels, std::size_t height,
                                            std::size_t width, std::size_t* split_labels) {
    if (labels.size() != height * width) throw InvalidInput("label plane does not match H x W");
    std::vector<std::uint8_t> seen(labels.size(), 0);
    std::vector<CellDetection> out;
    std::map<std::int32_t, int> blobs_per_label;
    std::vector<std::size_t> queue;

    for (std::size_t start = 0; start < labels.size(); ++start) {
        const std::int32_t label = labels[start];
        if (label == 0 || seen[start]) continue;
        ++blobs_per_label[label];
        std::vector<Pixel> blob;
        queue.assign(1, start);
        seen[start] = 1;
        for (std::size_t head = 0; head < queue.size(); ++head) {
            const std::size_t idx = queue[head];
            const auto row = static_cast<std::int64_t>(idx / width);
            const auto col = static_cast<std::int64_t>(idx % width);
            blob.push_back({static_cast<std::int32_t>(row), static_cast<std::int32_t>(col)});
            for (int dr = -1; dr <= 1; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    const std::int64_t r = row + dr, c = col + dc;
                    if ((dr == 0 && dc == 0) || r < 0 || c < 0 || r >= static_cast<std::int64_t>(height) ||
                        c >= static_cast<std::int64_t>(width)) {
                        continue;
                    }
                    const auto nidx = static_cast<std::size_t>(r) * width + static_cast<std::size_t>(c);
                    if (!seen[nidx] && labels[nidx] == label) {
                        seen[nidx] = 1;
                        queue.push_back(nidx);
                    }
                }
            }
        }
        out.push_back(make_detection(std::move(blob)));
    }
    if (split_labels != nullptr) {
        *split_labels = static_cast<std::size_t>(
            std::count_if(blobs_per_label.begin(), blobs_per_label.end(), [](const auto& kv) { return kv.second > 1; }));
    }
    return out;
}

namespace {

void assign_ids(Overlay& overlay) {
    DetectionId next = 1;
    for (std::size_t t = 0; t < overlay.frames.size(); ++t) {
        for (auto& det : overlay.frames[t]) {
            det.id = next++;
            det.frame = t;
        }
    }
}

} // namespace

Overlay segment_threshold(const ImageStack& stack, std::size_t channel, double threshold, Polarity polarity,
                          std::size_t threads) {
    if (channel >= stack.channels()) throw IndexError("channel " + std::to_string(channel) + " out of range");
    Overlay overlay{stack.height(), stack.width(), std::vector<std::vector<CellDetection>>(stack.frames())};
    parallel_for(stack.frames(), threads, [&](std::size_t t) {
        const ChannelView plane = stack.channel(t, channel);
        std::vector<std::int32_t> binary(stack.height() * stack.width());
        for (std::size_t i = 0; i < binary.size(); ++i) {
            const double v = plane[i];
            binary[i] = (polarity == Polarity::bright ? v >= threshold : v <= threshold) ? 1 : 0;
        }
        overlay.frames[t] = label_components(binary, stack.height(), stack.width());
    });
    assign_ids(overlay);
    return overlay;
}

IngestResult ingest_label_masks(const LabelStack& labels, std::size_t threads) {
    const StackShape& s = labels.shape;
    if (labels.labels.size() != s.frames * s.plane()) throw InvalidInput("label stack size mismatch");
    IngestResult result;
    result.overlay = Overlay{s.height, s.width, std::vector<std::vector<CellDetection>>(s.frames)};
    std::vector<std::size_t> splits(s.frames, 0);
    parallel_for(s.frames, threads, [&](std::size_t t) {
        result.overlay.frames[t] = label_components(labels.frame(t), s.height, s.width, &splits[t]);
    });
    for (const std::size_t n : splits) result.split_labels += n;
    assign_ids(result.overlay);
    return result;
}

Overlay size_filter(const Overlay& overlay, const Quantity& min_area, const Quantity& max_area,
                    const Quantity& pixel_size) {
    if (min_area.dimension() != dim::area || max_area.dimension() != dim::area) {
        throw DimensionMismatch("size filter bounds must be areas (um2)");
    }
    if (min_area > max_area) throw InvalidInput("size filter: min_area exceeds max_area");
    Overlay out{overlay.height, overlay.width, {}};
    out.frames.reserve(overlay.frames.size());
    for (const auto& frame : overlay.frames) {
        auto& kept = out.frames.emplace_back();
        for (const auto& det : frame) {
            const Quantity area = px_to_physical(det.area_px, 2, pixel_size);
            if (area >= min_area && area <= max_area) kept.push_back(det);
        }
    }
    return out;
}

} // namespace mlci
