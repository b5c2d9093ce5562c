#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mlci/imagestack.hpp"
#include "mlci/units.hpp"

namespace mlci {

struct Pixel {
    std::int32_t row = 0;
    std::int32_t col = 0;
    friend bool operator==(const Pixel&, const Pixel&) = default;
};

struct Point {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Point&, const Point&) = default;
};

using DetectionId = std::int64_t;

/// One pixel-precise cell instance. Pixels are sorted row-major; the contour
/// runs clockwise (screen coordinates) along pixel corners, so a pixel at
/// (row r, col c) spans [c, c+1] x [r, r+1].
struct CellDetection {
    DetectionId id = 0;
    std::size_t frame = 0;
    std::vector<Pixel> pixels;
    std::vector<Point> contour;
    double area_px = 0.0;
    Point centroid_px;
};

struct Overlay {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::vector<CellDetection>> frames;

    std::size_t detection_count() const noexcept;
    /// Detection by id; IndexError when absent.
    const CellDetection& find(DetectionId id) const;
};

enum class Polarity { bright, dark };

/// Thresholds one channel per frame and groups passing pixels into
/// 8-connected detections. Ids run from 1 in (frame, first-pixel) order and
/// do not depend on `threads`.
Overlay segment_threshold(const ImageStack& stack, std::size_t channel, double threshold,
                          Polarity polarity, std::size_t threads = 1);

struct IngestResult {
    Overlay overlay;
    /// Labels whose pixels formed more than one 8-connected blob in a frame.
    std::size_t split_labels = 0;
};

/// One detection per connected blob of each nonzero label per frame.
IngestResult ingest_label_masks(const LabelStack& labels, std::size_t threads = 1);

/// Keeps detections whose physical area lies in [min_area, max_area].
Overlay size_filter(const Overlay& overlay, const Quantity& min_area, const Quantity& max_area,
                    const Quantity& pixel_size);

/// Absolute shoelace area in px^2; InvalidInput below three vertices.
double polygon_area(std::span<const Point> contour);

/// Instances of a single H x W label plane. Pixels with equal nonzero
/// labels and 8-connectivity form one instance; ids are left at 0.
std::vector<CellDetection> label_components(std::span<const std::int32_t> labels, std::size_t height,
                                            std::size_t width, std::size_t* split_labels = nullptr);

/// Outer boundary of a pixel set (8-connected foreground) as a corner polygon
/// with collinear vertices removed.
std::vector<Point> trace_outer_boundary(std::span<const Pixel> pixels);

// Overlay interchange: JSON lines (one detection each) plus an ASCII
// run-length mask file, one line per detection:
//   "<frame> <id>: start,len;start,len;..."   (row-major pixel indices)
void write_overlay_jsonl(const std::filesystem::path& path, const Overlay& overlay);
void write_masks_rle(const std::filesystem::path& path, const Overlay& overlay);
Overlay read_overlay(const std::filesystem::path& jsonl_path, const std::filesystem::path& rle_path,
                     std::size_t height, std::size_t width, std::size_t frames);

} // namespace mlci
