#pragma once

#include <array>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mlci/features.hpp"
#include "mlci/segmentation.hpp"
#include "mlci/tracking.hpp"
#include "mlci/units.hpp"

namespace mlci {

enum class Measure { CC, TCA, TSCA };
std::string_view to_string(Measure m) noexcept;

struct GrowthFit {
    Measure measure = Measure::TSCA;
    Quantity mu{0.0, dim::rate};
    double intercept_log = 0.0;
    double r_squared = 0.0;
    std::size_t n_points = 0;
    std::size_t n_dropped = 0; // non-positive values excluded before the log
};

struct PopulationSeries {
    QuantitySeries cc;   // dimensionless cell count per frame
    QuantitySeries tsca; // total single-cell area per frame
};

/// Per-frame cell count and summed area over `table.frame_times`. When
/// `labels` is given only rows whose tracklet label is in it are counted.
PopulationSeries population_series(const DetectionTable& table, const std::set<TrackletLabel>* labels = nullptr);

/// Convex hull (counter-clockwise in y-up terms, no collinear points).
std::vector<Point> convex_hull(std::vector<Point> points);

/// Total colony area: convex hull over every contour vertex of a frame.
QuantitySeries tca_series(const Overlay& overlay, const Quantity& pixel_size, const std::vector<Quantity>& frame_times);

/// Ordinary least squares of ln(value) against time in hours.
GrowthFit fit_loglinear(const QuantitySeries& series, Measure measure);

struct KMeansResult {
    std::vector<int> labels;
    std::array<std::vector<double>, 2> centers;
    std::size_t iterations = 0;
    std::vector<double> objective_trace; // within-cluster sum of squares per iteration
};

/// Two-cluster Lloyd iterations. Initial centers are the points with the
/// smallest and largest first principal coordinate (first index on ties).
/// Stops at an assignment fixpoint or after 100 iterations.
KMeansResult kmeans2(const std::vector<std::vector<double>>& points);

double kmeans_objective(const std::vector<std::vector<double>>& points, const KMeansResult& result);

struct StrainAssignment {
    std::map<TrackletLabel, int> strain;
    std::array<std::vector<double>, 2> centers;
    std::vector<TrackletLabel> discarded;

    std::set<TrackletLabel> labels_of(int strain_index) const;
};

/// Drops tracklets whose medians are all below `nonfluor_threshold`, then
/// splits the rest with kmeans2 on the two median-fluorescence channels.
/// Strain 0 is the cluster whose channel-0 center is higher.
StrainAssignment classify_strains(const TrackletTable& table, const std::array<std::string, 2>& channels,
                                  const Quantity& nonfluor_threshold);

/// TSCA growth fit restricted to one strain's tracklets.
GrowthFit per_strain_growth(const DetectionTable& table, const StrainAssignment& assignment, int strain);

struct IGRSeries {
    TrackletLabel label = 0;
    double sigma_frames = 4.0;
    std::vector<Quantity> times; // left end of each difference interval
    std::vector<Quantity> igr;   // um2/h
};

/// Gaussian smoothing with the conventions of scipy.ndimage.gaussian_filter1d:
/// radius = int(4 sigma + 0.5), normalized kernel, half-sample symmetric
/// ("reflect") boundaries. sigma == 0 returns the input.
std::vector<double> gaussian_smooth(std::span<const double> values, double sigma);

/// Instantaneous growth rate (a[t+1] - a[t]) / (t[t+1] - t[t]) of an area
/// series, then Gaussian-smoothed with `sigma_frames`.
IGRSeries igr(const QuantitySeries& areas, double sigma_frames, TrackletLabel label = 0);
IGRSeries igr(std::span<const Quantity> areas, const Quantity& frame_interval, double sigma_frames,
              TrackletLabel label = 0);

/// Tracklets observed from birth to division.
std::set<TrackletLabel> full_cycle_filter(const TrackletGraph& graph);

/// Drops tracklets shorter than `min_frames`. Daughters of a dropped
/// tracklet become roots; a divided mother left with fewer than two
/// daughters is marked lost.
TrackletGraph min_length_filter(const TrackletGraph& graph, std::size_t min_frames);

} // namespace mlci
