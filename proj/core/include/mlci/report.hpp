#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mlci/analysis.hpp"
#include "mlci/tracking.hpp"
#include "mlci/units.hpp"

namespace mlci {

// All renderers return a complete SVG 1.1 document with a viewBox and fixed
// two-decimal coordinates. Output depends only on the arguments.

/// Log-scaled growth curve: one marker per positive sample, the fit as a
/// dashed line, and an annotation with mu, R2 and the dropped-point count.
std::string render_growth(const QuantitySeries& series, const GrowthFit& fit);

/// Lineage forest: x is time, y follows leaf order, divisions branch at the
/// daughters' birth time. With `color_by`, segments are colored by value and a
/// legend is drawn. `frame_times` maps frame indices to hours.
std::string render_lineage(const TrackletGraph& graph, const std::vector<Quantity>& frame_times,
                           const std::map<TrackletLabel, double>* color_by = nullptr,
                           const std::string& color_label = "");

struct PhaseInterval {
    Quantity start{0.0, dim::time};
    Quantity end{0.0, dim::time};
    std::string label;
};

/// One polyline per IGR series over shaded phase intervals.
std::string render_igr(const std::vector<IGRSeries>& series, const std::vector<PhaseInterval>& phases);

struct RateGroup {
    std::string name;                                  // e.g. "TSCA"
    std::vector<std::pair<std::string, double>> rates; // (origin_id, mu in 1/h)
};

/// Per-replicate markers with a mean +- sample std whisker per group.
std::string render_rate_distribution(const std::vector<RateGroup>& groups);

} // namespace mlci
