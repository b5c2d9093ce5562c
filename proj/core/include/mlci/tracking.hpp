#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mlci/imagestack.hpp"
#include "mlci/segmentation.hpp"
#include "mlci/units.hpp"

namespace mlci {

/// Detection-level links between consecutive frames. In-degree is at most 1
/// (no merges) and out-degree at most 2 (division).
class TrackingGraph {
public:
    void add_node(DetectionId id);
    void add_edge(DetectionId from, DetectionId to);

    const std::vector<DetectionId>& successors(DetectionId id) const;
    std::optional<DetectionId> predecessor(DetectionId id) const;
    std::size_t out_degree(DetectionId id) const { return successors(id).size(); }
    std::size_t in_degree(DetectionId id) const { return predecessor(id) ? 1 : 0; }

    /// All edges sorted by (from, to).
    std::vector<std::pair<DetectionId, DetectionId>> edges() const;
    const std::map<DetectionId, std::vector<DetectionId>>& nodes() const noexcept { return succ_; }
    std::size_t node_count() const noexcept { return succ_.size(); }

    /// InvalidGraph when an edge skips frames, a node is unknown to the
    /// overlay, or degree limits are exceeded.
    void validate(const Overlay& overlay) const;

private:
    std::map<DetectionId, std::vector<DetectionId>> succ_;
    std::map<DetectionId, DetectionId> pred_;
};

enum class Fate { divided, lost, movie_end };
std::string_view to_string(Fate fate) noexcept;
Fate parse_fate(std::string_view text);

using TrackletLabel = std::int32_t;

/// One cell cycle: consecutive frames, one detection per frame.
struct Tracklet {
    TrackletLabel label = 0;
    std::optional<TrackletLabel> parent;
    std::vector<DetectionId> detections;
    std::vector<std::size_t> frames;
    Fate fate = Fate::lost;

    std::size_t birth_frame() const { return frames.front(); }
    std::size_t end_frame() const { return frames.back(); }
    std::size_t length() const noexcept { return detections.size(); }
};

/// Lineage forest of tracklets; edges run from mother to daughter.
class TrackletGraph {
public:
    TrackletGraph() = default;
    /// Sorts by label and validates.
    explicit TrackletGraph(std::vector<Tracklet> tracklets);

    const std::vector<Tracklet>& tracklets() const noexcept { return tracklets_; }
    std::size_t size() const noexcept { return tracklets_.size(); }
    bool contains(TrackletLabel label) const;
    const Tracklet& at(TrackletLabel label) const;
    std::vector<TrackletLabel> children(TrackletLabel label) const;
    std::vector<TrackletLabel> roots() const;
    /// Detection id -> tracklet label for every tracked detection.
    std::map<DetectionId, TrackletLabel> label_map() const;

    /// InvalidGraph unless labels are unique and positive, parents exist,
    /// the parent relation is acyclic, frames are consecutive, and a
    /// tracklet is `divided` exactly when it has two daughters.
    void validate() const;

private:
    std::vector<Tracklet> tracklets_;
};

struct TrackParams {
    Quantity max_link_distance{2.0, unit::um};
    double area_weight = 0.5;
    double division_area_tolerance = 0.3;
    bool enable_divisions = true;
    std::size_t threads = 1;

    void validate() const;
};

/// Cost of leaving a detection unlinked; a link at exactly the gate radius
/// with no area change costs the same.
inline constexpr double no_assign_cost = 1.0;

/// Frame-to-frame linking: optimal one-to-one links per frame pair, then
/// greedy attachment of unmatched detections as second daughters.
TrackingGraph track(const Overlay& overlay, const StackMetadata& meta, const TrackParams& params);

/// Contracts linear chains into tracklets. Labels start at 1 in
/// (birth frame, smallest detection id) order.
TrackletGraph build_tracklets(const TrackingGraph& graph, const Overlay& overlay);

/// {"tracklets":[{"label","parent","frames","detections","fate"}]}
std::string tracklets_to_json(const TrackletGraph& graph);
TrackletGraph tracklets_from_json(const std::string& text);
void write_tracklets_json(const std::filesystem::path& path, const TrackletGraph& graph);
TrackletGraph read_tracklets_json(const std::filesystem::path& path);

} // namespace mlci
