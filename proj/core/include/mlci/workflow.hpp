#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mlci/analysis.hpp"
#include "mlci/features.hpp"
#include "mlci/report.hpp"
#include "mlci/segmentation.hpp"
#include "mlci/tracking.hpp"

namespace mlci {

struct ThresholdSource {
    std::string channel = "phase";
    double threshold = 0.5;
    Polarity polarity = Polarity::bright;
};

struct LabelSource {
    std::filesystem::path path;
};

struct AnalysisToggles {
    bool growth_measures = true;
    bool co_culture = false;
    bool single_cell_igr = false;
};

struct WorkflowParams {
    std::optional<ThresholdSource> threshold;   // exactly one of threshold / labels
    std::optional<LabelSource> labels;
    std::optional<std::pair<Quantity, Quantity>> size_bounds; // um2
    TrackParams tracking;
    AnalysisToggles analyses;
    /// Channels measured as fluorescence; empty means every channel except
    /// the segmentation channel.
    std::vector<std::string> fluor_channels;
    /// Channels used for the strain split; empty means the first two
    /// fluorescence channels.
    std::vector<std::string> strain_channels;
    Quantity nonfluor_threshold{0.1, unit::au};
    double igr_sigma_frames = 4.0;
    std::vector<PhaseInterval> igr_phases;
    std::size_t min_frames = 3;
    bool full_cycle = true;
    std::size_t threads = 1;

    /// InvalidInput (or InvalidMetadata) with the offending key.
    void validate() const;
};

/// Parses the "workflow" object. Relative paths resolve against `base_dir`.
WorkflowParams parse_workflow(const std::string& json_text, const std::filesystem::path& base_dir = {});
/// Canonical JSON (sorted keys, all defaults explicit, no execution settings).
std::string workflow_to_json(const WorkflowParams& params);

struct ReplicateSpec {
    std::string origin_id;
    std::filesystem::path stack;
    std::filesystem::path sidecar;
    std::optional<Quantity> pixel_size; // overrides the sidecar value

    void validate() const;
};

ReplicateSpec parse_replicate(const std::string& json_text, const std::filesystem::path& base_dir = {});
std::string replicate_to_json(const ReplicateSpec& spec);

struct ReplicateReport {
    std::string origin_id;
    std::string status = "ok"; // "ok" or "failed:<stage>[:<reason>]"
    std::string error;
    std::vector<std::string> warnings;
    std::string config_sha256;
    std::map<std::string, GrowthFit> fits; // "CC", "TCA", "TSCA", "strain0_TSCA", "strain1_TSCA"
    std::map<std::string, QuantitySeries> series;
    std::vector<IGRSeries> igr;
    DetectionTable detections;
    TrackletTable tracklets;
    TrackletGraph lineage;
    std::optional<StrainAssignment> strains;

    bool ok() const { return status == "ok"; }
};

/// Runs load, segment, filter, track, features, analysis and report for one
/// replicate, writing every product to `out_dir`. Stage failures are captured
/// in the returned report (and report.json); this function does not throw for
/// them.
ReplicateReport run_workflow(const ReplicateSpec& replicate, const WorkflowParams& params,
                             const std::filesystem::path& out_dir);

/// fits.json: {"<measure>": {"mu_per_h", "r2", "n", "n_dropped", "intercept_log"}}
std::map<std::string, GrowthFit> read_fits_json(const std::filesystem::path& path);
std::string fits_to_json(const std::map<std::string, GrowthFit>& fits);

/// Re-renders plots/*.svg of a finished replicate directory from its CSV and
/// JSON products. InvalidInput when a required file is missing.
void rerender_plots(const std::filesystem::path& replicate_dir);

std::string sha256_hex(const std::string& data);
std::string tool_version();

/// Applies "a.b.c=value" overrides to a JSON document. Values that parse as
/// JSON are used as such; anything else becomes a string. Numeric path
/// components index arrays.
std::string apply_overrides(const std::string& json_text, const std::vector<std::string>& overrides);

} // namespace mlci
