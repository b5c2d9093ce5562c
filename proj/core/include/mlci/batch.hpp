#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mlci/workflow.hpp"

namespace mlci {

struct BatchConfig {
    std::vector<ReplicateSpec> replicates; // origin ids unique
    WorkflowParams workflow;
    std::filesystem::path out_dir;
    std::size_t jobs = 1;

    void validate() const;
};

/// {"replicates": [...], "workflow": {...}, "jobs": n}; relative paths
/// resolve against `base_dir`.
BatchConfig parse_batch(const std::string& json_text, const std::filesystem::path& base_dir = {});

struct MeasureAggregate {
    std::vector<std::pair<std::string, double>> values; // (origin_id, mu 1/h), sorted by origin_id
    double mean = 0.0;
    double std = 0.0; // sample standard deviation; 0 when n == 1
    std::size_t n = 0;
    bool single_replicate = false;
};

struct AggregateReport {
    std::vector<std::pair<std::string, std::string>> replicates; // (origin_id, status), sorted
    std::map<std::string, MeasureAggregate> measures;
};

/// Mean and sample std from per-replicate fits, in origin_id order.
AggregateReport aggregate(const std::vector<std::pair<std::string, std::map<std::string, GrowthFit>>>& fits,
                          const std::vector<std::pair<std::string, std::string>>& statuses);

/// Runs every replicate under a pool of `jobs` workers, then writes
/// out/aggregate/. BatchFailed when no replicate succeeds.
AggregateReport run_batch(const BatchConfig& config);

} // namespace mlci
