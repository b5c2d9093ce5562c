#include "mlci/batch.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "mlci/parallel.hpp"

namespace mlci {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

void BatchConfig::validate() const {
    if (replicates.empty()) throw InvalidInput("batch needs at least one replicate");
    std::set<std::string> seen;
    for (const auto& r : replicates) {
        r.validate();
        if (!seen.insert(r.origin_id).second) throw InvalidInput("duplicate origin_id '" + r.origin_id + "'");
    }
    workflow.validate();
    if (jobs < 1) throw InvalidInput("jobs must be >= 1");
}

BatchConfig parse_batch(const std::string& json_text, const std::filesystem::path& base_dir) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("batch config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw InvalidInput("batch config must be an object");
    for (const auto& [key, value] : doc.items()) {
        if (key != "replicates" && key != "workflow" && key != "jobs" && key != "out") {
            throw InvalidInput("unknown key '" + key + "'");
        }
    }
    BatchConfig cfg;
    if (!doc.contains("replicates") || !doc.at("replicates").is_array()) {
        throw InvalidInput("replicates must be a list");
    }
    for (const auto& r : doc.at("replicates")) cfg.replicates.push_back(parse_replicate(r.dump(), base_dir));
    cfg.workflow = parse_workflow(doc.value("workflow", json::object()).dump(), base_dir);
    if (doc.contains("out")) {
        const std::filesystem::path out(doc.at("out").get<std::string>());
        cfg.out_dir = out.is_absolute() || base_dir.empty() ? out : base_dir / out;
    }
    if (doc.contains("jobs")) {
        if (!doc.at("jobs").is_number_integer() || doc.at("jobs").get<long long>() < 1) {
            throw InvalidInput("jobs must be a positive integer");
        }
        cfg.jobs = doc.at("jobs").get<std::size_t>();
    }
    cfg.validate();
    return cfg;
}

AggregateReport aggregate(const std::vector<std::pair<std::string, std::map<std::string, GrowthFit>>>& fits,
                          const std::vector<std::pair<std::string, std::string>>& statuses) {
    AggregateReport agg;
    agg.replicates = statuses;
    std::sort(agg.replicates.begin(), agg.replicates.end());
    auto sorted = fits;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [origin, per_measure] : sorted) {
        for (const auto& [measure, fit] : per_measure) {
            agg.measures[measure].values.emplace_back(origin, fit.mu.in(unit::per_h));
        }
    }
    for (auto& [measure, m] : agg.measures) {
        m.n = m.values.size();
        double sum = 0.0;
        for (const auto& v : m.values) sum += v.second;
        m.mean = sum / static_cast<double>(m.n);
        double ss = 0.0;
        for (const auto& v : m.values) ss += (v.second - m.mean) * (v.second - m.mean);
        m.std = m.n > 1 ? std::sqrt(ss / static_cast<double>(m.n - 1)) : 0.0;
        m.single_replicate = m.n == 1;
    }
    return agg;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInput("cannot write '" + path.string() + "'");
    out << text;
}

} // namespace

AggregateReport run_batch(const BatchConfig& cfg) {
    cfg.validate();
    std::filesystem::create_directories(cfg.out_dir);

    std::vector<std::string> status(cfg.replicates.size());
    parallel_for(cfg.replicates.size(), cfg.jobs, [&](std::size_t i) {
        const auto& r = cfg.replicates[i];
        status[i] = run_workflow(r, cfg.workflow, cfg.out_dir / r.origin_id).status;
    });

    // Aggregates are rebuilt from the written fits.json files only.
    std::vector<std::pair<std::string, std::map<std::string, GrowthFit>>> fits;
    std::vector<std::pair<std::string, std::string>> statuses;
    for (std::size_t i = 0; i < cfg.replicates.size(); ++i) {
        const auto& id = cfg.replicates[i].origin_id;
        statuses.emplace_back(id, status[i]);
        if (status[i] == "ok") fits.emplace_back(id, read_fits_json(cfg.out_dir / id / "fits.json"));
    }
    if (fits.empty()) throw BatchFailed("no replicate succeeded");
    const AggregateReport agg = aggregate(fits, statuses);

    const auto agg_dir = cfg.out_dir / "aggregate";
    std::filesystem::create_directories(agg_dir / "plots");

    ordered_json doc;
    auto reps = ordered_json::array();
    for (const auto& [id, st] : agg.replicates) reps.push_back({{"origin_id", id}, {"status", st}});
    doc["replicates"] = std::move(reps);
    doc["n_succeeded"] = fits.size();
    doc["n_failed"] = cfg.replicates.size() - fits.size();
    ordered_json measures = ordered_json::object();
    for (const auto& [name, m] : agg.measures) {
        ordered_json entry;
        auto values = ordered_json::array();
        for (const auto& [id, mu] : m.values) values.push_back({{"origin_id", id}, {"mu_per_h", mu}});
        entry["values"] = std::move(values);
        entry["mean_per_h"] = m.mean;
        entry["std_per_h"] = m.std;
        entry["n"] = m.n;
        entry["single_replicate"] = m.single_replicate;
        measures[name] = std::move(entry);
    }
    doc["measures"] = std::move(measures);
    write_file(agg_dir / "aggregate.json", doc.dump(2) + "\n");

    std::string csv = "origin_id,measure,mu_per_h,r2,n\n";
    auto sorted = fits;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [id, per_measure] : sorted) {
        for (const auto& [name, fit] : per_measure) {
            csv += fmt::format("{},{},{},{},{}\n", id, name, format_number(fit.mu.in(unit::per_h)),
                               format_number(fit.r_squared), fit.n_points);
        }
    }
    write_file(agg_dir / "growth_rates.csv", csv);

    std::vector<RateGroup> groups;
    for (const auto& [name, m] : agg.measures) groups.push_back({name, m.values});
    write_file(agg_dir / "plots" / "rate_distribution.svg", render_rate_distribution(groups));
    return agg;
}

} // namespace mlci
