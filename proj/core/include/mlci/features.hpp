#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mlci/imagestack.hpp"
#include "mlci/segmentation.hpp"
#include "mlci/tracking.hpp"
#include "mlci/units.hpp"

namespace mlci {

struct DetectionRow {
    DetectionId id = 0;
    std::size_t frame = 0;
    Quantity time{0.0, dim::time};
    TrackletLabel label = 0; // 0: not part of any tracklet
    Quantity area{0.0, dim::area};
    Quantity cx{0.0, dim::length};
    Quantity cy{0.0, dim::length};
    std::vector<Quantity> fluor; // mean intensity per fluorescence channel
};

struct DetectionTable {
    std::vector<std::string> fluor_channels;
    std::vector<Quantity> frame_times; // one per movie frame, including empty ones
    std::vector<DetectionRow> rows;    // sorted by id

    /// Row by detection id; InconsistentInput when absent.
    const DetectionRow& row(DetectionId id) const;
    std::vector<const DetectionRow*> rows_with_label(TrackletLabel label) const;
};

struct TrackletRow {
    TrackletLabel label = 0;
    std::optional<TrackletLabel> parent;
    Quantity birth_time{0.0, dim::time};
    Quantity end_time{0.0, dim::time};
    Quantity lifetime{0.0, dim::time};
    Quantity birth_area{0.0, dim::area};
    Quantity end_area{0.0, dim::area};
    Fate fate = Fate::lost;
    std::size_t n_detections = 0;
    std::vector<Quantity> median_fluor;
};

struct TrackletTable {
    std::vector<std::string> fluor_channels;
    std::vector<TrackletRow> rows; // sorted by label

    const TrackletRow& row(TrackletLabel label) const;
};

/// Per-detection features in physical units. `fluor_channels` are stack
/// channel indices; the mean is taken over each detection's pixel set.
DetectionTable extract_detection_features(const Overlay& overlay, const ImageStack& stack,
                                          const TrackletGraph* tracklets,
                                          const std::vector<std::size_t>& fluor_channels,
                                          std::size_t threads = 1);

TrackletTable extract_tracklet_features(const TrackletGraph& tracklets, const DetectionTable& detections);

/// Median of a non-empty sample (mean of the middle pair for even sizes).
double median(std::vector<double> values);

// CSV exports. Headers:
//   detections.csv: id,frame,time_h,label,area_um2,cx_um,cy_um,fluor_<ch>_au,...
//   tracklets.csv:  label,parent,birth_h,end_h,lifetime_h,birth_area_um2,
//                   end_area_um2,fate,n_detections,medfluor_<ch>_au,...
std::vector<std::string> detection_csv_header(const std::vector<std::string>& fluor_channels);
std::vector<std::string> tracklet_csv_header(const std::vector<std::string>& fluor_channels);
void write_detections_csv(const std::filesystem::path& path, const DetectionTable& table);
void write_tracklets_csv(const std::filesystem::path& path, const TrackletTable& table);
DetectionTable read_detections_csv(const std::filesystem::path& path);
TrackletTable read_tracklets_csv(const std::filesystem::path& path);

/// Shortest round-trip decimal representation used in every export.
std::string format_number(double v);

} // namespace mlci
