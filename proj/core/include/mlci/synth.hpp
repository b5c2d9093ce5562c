#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mlci/features.hpp"
#include "mlci/imagestack.hpp"
#include "mlci/tracking.hpp"
#include "mlci/units.hpp"

namespace mlci {

/// xoshiro256** seeded through splitmix64 (constants from Vigna's reference
/// implementations). Gaussian draws use the Box-Muller transform.
class Xoshiro256 {
public:
    explicit Xoshiro256(std::uint64_t seed);
    std::uint64_t next();
    double uniform(); // [0, 1) with 53 random bits
    double normal();

private:
    std::uint64_t s_[4];
};

struct StrainSpec {
    Quantity mu_star{0.5, unit::per_h};
    std::vector<double> fluor_means; // au, one per fluorescence channel
    double fluor_std = 0.0;          // au, per-pixel noise
};

struct RateSwitch {
    Quantity t_switch{0.0, dim::time};
    double multiplier = 1.0;
};

struct SimScenario {
    std::uint64_t seed = 1;
    std::string origin_id = "sim";
    std::vector<StrainSpec> strains{StrainSpec{}};
    std::vector<std::string> fluor_channels;
    std::size_t n_initial_cells = 1;
    Quantity a0{1.0, unit::um2};
    double a0_noise = 0.0; // lognormal sigma of initial areas
    Quantity a_div{2.0, unit::um2};
    double a_div_noise = 0.0; // lognormal sigma of per-cell division thresholds
    Quantity frame_interval{15.0, unit::min};
    std::size_t n_frames = 10;
    Quantity pixel_size{0.1, unit::um};
    std::size_t height = 64;
    std::size_t width = 256;
    std::vector<RateSwitch> rate_schedule;
    Quantity cell_width{0.8, unit::um};
    std::size_t cell_gap_px = 2;
    std::size_t lane_gap_px = 6;

    void validate() const;
    /// Growth-rate multiplier in effect at time t.
    double multiplier_at(const Quantity& t) const;
};

/// Scenario JSON (keys documented in the README).
SimScenario parse_scenario(const std::string& json_text);
SimScenario read_scenario(const std::filesystem::path& path);
std::string scenario_to_json(const SimScenario& scenario);

struct TruthCell {
    DetectionId detection_id = 0;
    TrackletLabel label = 0;
    int strain = 0;
    double area_um2 = 0.0; // analytic area
    double area_px = 0.0;  // rendered pixel count
    Point centroid_px;
};

struct GroundTruth {
    std::vector<std::vector<TruthCell>> frames;
    TrackletGraph lineage;
    std::map<TrackletLabel, int> strain_of;
    std::vector<Quantity> frame_times;
    std::vector<std::string> fluor_channels;
    std::vector<std::vector<double>> strain_fluor_means;
    Quantity pixel_size{0.1, unit::um};

    /// Analytic cell count and summed area per frame.
    QuantitySeries true_cc() const;
    QuantitySeries true_tsca() const;
};

struct SimOutput {
    ImageStack stack; // channel 0 "phase", then the fluorescence channels
    LabelStack labels; // pixel value = truth tracklet label
    GroundTruth truth;
};

/// Exponential area growth with area-triggered division; cells are rendered
/// as axis-aligned blocks packed in disjoint horizontal lanes.
/// ScenarioOverflow when a lane no longer fits the image.
SimOutput simulate(const SimScenario& scenario);

struct TruthTables {
    DetectionTable detections;
    TrackletTable tracklets;
};
TruthTables truth_tables(const GroundTruth& truth);

/// stack.raw, labels.raw, sidecar.json, truth.json, truth_detections.csv,
/// truth_tracklets.csv
void write_simulation(const std::filesystem::path& dir, const SimOutput& output);

} // namespace mlci
