#include "mlci/workflow.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "mlci/imagestack.hpp"

#ifndef MLCI_VERSION
#define MLCI_VERSION "0.0.0"
#endif

namespace mlci {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInput("cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInput("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw InvalidInput("write failed for '" + path.string() + "'");
}

json parse_json(const std::string& text, const char* what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw InvalidInput(std::string(what) + " is not valid JSON: " + e.what());
    }
}

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& where) {
    if (!obj.is_object()) throw InvalidInput(where + " must be an object");
    for (const auto& [key, value] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw InvalidInput("unknown key '" + (where.empty() ? key : where + "." + key) + "'");
        }
    }
}

template <typename T>
T get(const json& obj, const char* key, const std::string& where, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw InvalidInput("key '" + (where.empty() ? std::string(key) : where + "." + key) + "' has the wrong type");
    }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

std::string snake_kind(ErrorKind kind) {
    const std::string_view camel = to_string(kind);
    std::string out;
    for (const char c : camel) {
        if (std::isupper(static_cast<unsigned char>(c))) {
            if (!out.empty()) out += '_';
            out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        } else {
            out += c;
        }
    }
    return out;
}

Measure measure_of(const std::string& key) {
    if (key == "CC") return Measure::CC;
    if (key == "TCA") return Measure::TCA;
    return Measure::TSCA;
}

} // namespace

// ---------------------------------------------------------------------------
// Configuration

void WorkflowParams::validate() const {
    if (threshold.has_value() == labels.has_value()) {
        throw InvalidInput("segmentation.source must be exactly one of 'threshold' or 'labels'");
    }
    if (threshold && !(threshold->threshold >= 0.0 && threshold->threshold <= 1.0)) {
        throw InvalidInput("segmentation.threshold must lie in [0, 1]");
    }
    if (size_bounds) {
        const auto& [lo, hi] = *size_bounds;
        if (lo.dimension() != dim::area || hi.dimension() != dim::area) {
            throw DimensionMismatch("size_filter bounds must be areas");
        }
        if (!(lo.value() >= 0.0) || !(hi >= lo)) {
            throw InvalidInput("size_filter needs 0 <= min_area_um2 <= max_area_um2");
        }
    }
    tracking.validate();
    if (!analyses.growth_measures && !analyses.co_culture && !analyses.single_cell_igr) {
        throw InvalidInput("analyses: at least one analysis must be enabled");
    }
    if (!strain_channels.empty() && strain_channels.size() != 2) {
        throw InvalidInput("channels.strains must name exactly two channels");
    }
    if (nonfluor_threshold.dimension() != dim::intensity || !(nonfluor_threshold.value() >= 0.0)) {
        throw InvalidInput("co_culture.nonfluor_threshold_au must be >= 0");
    }
    if (!(igr_sigma_frames >= 0.0) || !std::isfinite(igr_sigma_frames)) {
        throw InvalidInput("igr.sigma_frames must be >= 0");
    }
    for (const auto& p : igr_phases) {
        if (!(p.end > p.start)) throw InvalidInput("igr.phases entries need end_h > start_h");
    }
    if (min_frames < 1) throw InvalidInput("filters.min_frames must be >= 1");
    if (threads < 1) throw InvalidInput("threads must be >= 1");
}

WorkflowParams parse_workflow(const std::string& json_text, const std::filesystem::path& base_dir) {
    const json doc = parse_json(json_text, "workflow");
    check_keys(doc, {"segmentation", "size_filter", "tracking", "analyses", "channels", "co_culture", "igr", "filters",
                     "threads"},
               "workflow");
    WorkflowParams p;

    const json seg = doc.value("segmentation", json::object());
    check_keys(seg, {"source", "channel", "threshold", "polarity", "labels_path"}, "segmentation");
    const auto source = get<std::string>(seg, "source", "segmentation", "threshold");
    if (source == "threshold") {
        ThresholdSource t;
        t.channel = get<std::string>(seg, "channel", "segmentation", t.channel);
        t.threshold = get<double>(seg, "threshold", "segmentation", t.threshold);
        const auto pol = get<std::string>(seg, "polarity", "segmentation", "bright");
        if (pol == "bright") t.polarity = Polarity::bright;
        else if (pol == "dark") t.polarity = Polarity::dark;
        else throw InvalidInput("segmentation.polarity must be 'bright' or 'dark'");
        p.threshold = t;
    } else if (source == "labels") {
        if (!seg.contains("labels_path")) throw InvalidInput("segmentation.labels_path is required for source 'labels'");
        p.labels = LabelSource{resolve(base_dir, get<std::string>(seg, "labels_path", "segmentation", ""))};
    } else {
        throw InvalidInput("segmentation.source must be 'threshold' or 'labels'");
    }

    if (doc.contains("size_filter")) {
        const json& sf = doc.at("size_filter");
        check_keys(sf, {"min_area_um2", "max_area_um2"}, "size_filter");
        p.size_bounds = std::pair{Quantity(get<double>(sf, "min_area_um2", "size_filter", 0.0), unit::um2),
                                  Quantity(get<double>(sf, "max_area_um2", "size_filter", 1e300), unit::um2)};
    }

    const json tr = doc.value("tracking", json::object());
    check_keys(tr, {"max_link_distance_um", "area_weight", "division_area_tolerance", "enable_divisions"}, "tracking");
    p.tracking.max_link_distance =
        Quantity(get<double>(tr, "max_link_distance_um", "tracking", p.tracking.max_link_distance.in(unit::um)),
                 unit::um);
    p.tracking.area_weight = get<double>(tr, "area_weight", "tracking", p.tracking.area_weight);
    p.tracking.division_area_tolerance =
        get<double>(tr, "division_area_tolerance", "tracking", p.tracking.division_area_tolerance);
    p.tracking.enable_divisions = get<bool>(tr, "enable_divisions", "tracking", p.tracking.enable_divisions);

    const json an = doc.value("analyses", json::object());
    check_keys(an, {"growth_measures", "co_culture", "single_cell_igr"}, "analyses");
    p.analyses.growth_measures = get<bool>(an, "growth_measures", "analyses", p.analyses.growth_measures);
    p.analyses.co_culture = get<bool>(an, "co_culture", "analyses", p.analyses.co_culture);
    p.analyses.single_cell_igr = get<bool>(an, "single_cell_igr", "analyses", p.analyses.single_cell_igr);

    const json ch = doc.value("channels", json::object());
    check_keys(ch, {"fluorescence", "strains"}, "channels");
    p.fluor_channels = get<std::vector<std::string>>(ch, "fluorescence", "channels", {});
    p.strain_channels = get<std::vector<std::string>>(ch, "strains", "channels", {});

    const json cc = doc.value("co_culture", json::object());
    check_keys(cc, {"nonfluor_threshold_au"}, "co_culture");
    p.nonfluor_threshold =
        Quantity(get<double>(cc, "nonfluor_threshold_au", "co_culture", p.nonfluor_threshold.value()), unit::au);

    const json ig = doc.value("igr", json::object());
    check_keys(ig, {"sigma_frames", "phases"}, "igr");
    p.igr_sigma_frames = get<double>(ig, "sigma_frames", "igr", p.igr_sigma_frames);
    if (ig.contains("phases")) {
        for (const auto& ph : ig.at("phases")) {
            check_keys(ph, {"start_h", "end_h", "label"}, "igr.phases");
            p.igr_phases.push_back({Quantity(get<double>(ph, "start_h", "igr.phases", 0.0), unit::h),
                                    Quantity(get<double>(ph, "end_h", "igr.phases", 0.0), unit::h),
                                    get<std::string>(ph, "label", "igr.phases", "")});
        }
    }

    const json fl = doc.value("filters", json::object());
    check_keys(fl, {"min_frames", "full_cycle"}, "filters");
    const auto min_frames = get<long long>(fl, "min_frames", "filters", 3);
    if (min_frames < 1) throw InvalidInput("filters.min_frames must be >= 1");
    p.min_frames = static_cast<std::size_t>(min_frames);
    p.full_cycle = get<bool>(fl, "full_cycle", "filters", p.full_cycle);

    const auto threads = get<long long>(doc, "threads", "", 1);
    if (threads < 1) throw InvalidInput("threads must be >= 1");
    p.threads = static_cast<std::size_t>(threads);

    p.validate();
    return p;
}

std::string workflow_to_json(const WorkflowParams& p) {
    json doc;
    if (p.threshold) {
        doc["segmentation"] = {{"source", "threshold"},
                               {"channel", p.threshold->channel},
                               {"threshold", p.threshold->threshold},
                               {"polarity", p.threshold->polarity == Polarity::bright ? "bright" : "dark"}};
    } else if (p.labels) {
        doc["segmentation"] = {{"source", "labels"}, {"labels_path", p.labels->path.generic_string()}};
    }
    if (p.size_bounds) {
        doc["size_filter"] = {{"min_area_um2", p.size_bounds->first.in(unit::um2)},
                              {"max_area_um2", p.size_bounds->second.in(unit::um2)}};
    }
    doc["tracking"] = {{"max_link_distance_um", p.tracking.max_link_distance.in(unit::um)},
                       {"area_weight", p.tracking.area_weight},
                       {"division_area_tolerance", p.tracking.division_area_tolerance},
                       {"enable_divisions", p.tracking.enable_divisions}};
    doc["analyses"] = {{"growth_measures", p.analyses.growth_measures},
                       {"co_culture", p.analyses.co_culture},
                       {"single_cell_igr", p.analyses.single_cell_igr}};
    doc["channels"] = {{"fluorescence", p.fluor_channels}, {"strains", p.strain_channels}};
    doc["co_culture"] = {{"nonfluor_threshold_au", p.nonfluor_threshold.in(unit::au)}};
    json phases = json::array();
    for (const auto& ph : p.igr_phases) {
        phases.push_back({{"start_h", ph.start.in(unit::h)}, {"end_h", ph.end.in(unit::h)}, {"label", ph.label}});
    }
    doc["igr"] = {{"sigma_frames", p.igr_sigma_frames}, {"phases", phases}};
    doc["filters"] = {{"min_frames", p.min_frames}, {"full_cycle", p.full_cycle}};
    return doc.dump();
}

void ReplicateSpec::validate() const {
    if (origin_id.empty()) throw InvalidInput("replicate origin_id must not be empty");
    if (origin_id == "." || origin_id == ".." || origin_id == "aggregate" ||
        origin_id.find_first_of("/\\") != std::string::npos) {
        throw InvalidInput("replicate origin_id '" + origin_id + "' is not usable as a directory name");
    }
    if (stack.empty()) throw InvalidInput("replicate '" + origin_id + "': stack path is required");
    if (pixel_size && (!(pixel_size->value() > 0.0) || !std::isfinite(pixel_size->value()))) {
        throw InvalidMetadata("pixel_size_um must be positive (replicate '" + origin_id + "')");
    }
}

ReplicateSpec parse_replicate(const std::string& json_text, const std::filesystem::path& base_dir) {
    const json doc = parse_json(json_text, "replicate");
    check_keys(doc, {"origin_id", "stack", "sidecar", "pixel_size_um"}, "replicate");
    ReplicateSpec r;
    r.origin_id = get<std::string>(doc, "origin_id", "replicate", "");
    r.stack = resolve(base_dir, get<std::string>(doc, "stack", "replicate", ""));
    if (doc.contains("sidecar")) {
        r.sidecar = resolve(base_dir, get<std::string>(doc, "sidecar", "replicate", ""));
    } else if (!r.stack.empty()) {
        r.sidecar = r.stack.parent_path() / "sidecar.json";
    }
    if (doc.contains("pixel_size_um")) {
        r.pixel_size = Quantity(get<double>(doc, "pixel_size_um", "replicate", 0.0), unit::um);
    }
    r.validate();
    return r;
}

std::string replicate_to_json(const ReplicateSpec& r) {
    json doc{{"origin_id", r.origin_id}, {"stack", r.stack.generic_string()}, {"sidecar", r.sidecar.generic_string()}};
    if (r.pixel_size) doc["pixel_size_um"] = r.pixel_size->in(unit::um);
    return doc.dump();
}

std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw InvalidInput("SHA-256 digest failed");
    }
    std::string hex;
    for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

std::string tool_version() { return MLCI_VERSION; }

std::string apply_overrides(const std::string& json_text, const std::vector<std::string>& overrides) {
    json doc = parse_json(json_text, "config");
    for (const auto& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos || eq == 0) throw InvalidInput("override '" + ov + "' is not key=value");
        const std::string key = ov.substr(0, eq);
        const std::string raw = ov.substr(eq + 1);
        json value = json::parse(raw, nullptr, false);
        if (value.is_discarded()) value = raw;

        json* node = &doc;
        std::stringstream ks(key);
        std::string part;
        std::vector<std::string> parts;
        while (std::getline(ks, part, '.')) parts.push_back(part);
        for (std::size_t i = 0; i < parts.size(); ++i) {
            const std::string& k = parts[i];
            if (k.empty()) throw InvalidInput("override key '" + key + "' has an empty component");
            json* child = nullptr;
            if (node->is_array()) {
                std::size_t idx = 0;
                const auto [ptr, ec] = std::from_chars(k.data(), k.data() + k.size(), idx);
                if (ec != std::errc{} || ptr != k.data() + k.size() || idx >= node->size()) {
                    throw InvalidInput("override key '" + key + "': bad array index '" + k + "'");
                }
                child = &(*node)[idx];
            } else {
                if (node->is_null()) *node = json::object();
                if (!node->is_object()) throw InvalidInput("override key '" + key + "' descends into a scalar");
                child = &(*node)[k];
            }
            node = child;
        }
        *node = std::move(value);
    }
    return doc.dump();
}

// ---------------------------------------------------------------------------
// Fits and plots

std::string fits_to_json(const std::map<std::string, GrowthFit>& fits) {
    ordered_json doc = ordered_json::object();
    for (const auto& [key, fit] : fits) {
        ordered_json f;
        f["mu_per_h"] = fit.mu.in(unit::per_h);
        f["r2"] = fit.r_squared;
        f["n"] = fit.n_points;
        f["n_dropped"] = fit.n_dropped;
        f["intercept_log"] = fit.intercept_log;
        doc[key] = std::move(f);
    }
    return doc.dump(2) + "\n";
}

std::map<std::string, GrowthFit> read_fits_json(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw InvalidInput("missing " + path.string());
    const json doc = parse_json(read_text(path), "fits.json");
    std::map<std::string, GrowthFit> fits;
    for (const auto& [key, f] : doc.items()) {
        GrowthFit fit;
        fit.measure = measure_of(key);
        fit.mu = Quantity(get<double>(f, "mu_per_h", key, 0.0), unit::per_h);
        fit.r_squared = get<double>(f, "r2", key, 0.0);
        fit.n_points = get<std::size_t>(f, "n", key, 0);
        fit.n_dropped = get<std::size_t>(f, "n_dropped", key, 0);
        fit.intercept_log = get<double>(f, "intercept_log", key, 0.0);
        fits[key] = fit;
    }
    return fits;
}

namespace {

struct PlotInputs {
    std::map<std::string, GrowthFit> fits;
    std::map<std::string, QuantitySeries> series;
    TrackletGraph lineage;
    std::vector<Quantity> frame_times;
    std::map<TrackletLabel, double> strain_color;
    std::vector<IGRSeries> igr;
    std::vector<PhaseInterval> phases;
};

/// Writes plots/*.svg; empty inputs are reported as warnings.
void render_plots(const std::filesystem::path& dir, const PlotInputs& in, std::vector<std::string>& warnings) {
    const auto plots = dir / "plots";
    std::filesystem::create_directories(plots);
    for (const auto& [key, fit] : in.fits) {
        const auto it = in.series.find(key);
        if (it == in.series.end()) continue;
        try {
            write_text(plots / ("growth_" + key + ".svg"), render_growth(it->second, fit));
        } catch (const EmptyPlot& e) {
            warnings.push_back(std::string("plot growth_") + key + ": " + e.what());
        }
    }
    if (in.lineage.size() > 0) {
        write_text(plots / "lineage.svg",
                   render_lineage(in.lineage, in.frame_times, in.strain_color.empty() ? nullptr : &in.strain_color,
                                  "strain"));
    } else {
        warnings.push_back("plot lineage: no tracklets");
    }
    if (!in.igr.empty()) {
        try {
            write_text(plots / "igr.svg", render_igr(in.igr, in.phases));
        } catch (const EmptyPlot& e) {
            warnings.push_back(std::string("plot igr: ") + e.what());
        }
    }
}

ordered_json series_json(const QuantitySeries& s) {
    std::vector<double> values;
    for (const auto& v : s.values()) values.push_back(v.value());
    return ordered_json{{"unit", std::string(unit_token(s.value_dimension()))}, {"values", values}};
}

std::vector<IGRSeries> read_igr_csv(const std::filesystem::path& path, double sigma) {
    std::vector<IGRSeries> out;
    std::ifstream in(path);
    if (!in) return out;
    std::string line;
    std::getline(in, line); // header
    std::map<TrackletLabel, IGRSeries> by_label;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (cells.size() != 3) throw InconsistentInput("igr.csv: expected 3 columns in '" + line + "'");
        const auto parse = [&](const std::string& s) {
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc{} || ptr != s.data() + s.size()) throw InconsistentInput("igr.csv: bad number '" + s + "'");
            return v;
        };
        const auto label = static_cast<TrackletLabel>(parse(cells[0]));
        auto& s = by_label[label];
        s.label = label;
        s.sigma_frames = sigma;
        s.times.emplace_back(parse(cells[1]), unit::h);
        s.igr.emplace_back(parse(cells[2]), unit::um2_per_h);
    }
    for (auto& [label, s] : by_label) out.push_back(std::move(s));
    return out;
}

} // namespace

void rerender_plots(const std::filesystem::path& dir) {
    const auto report_path = dir / "report.json";
    if (!std::filesystem::exists(report_path)) throw InvalidInput("missing " + report_path.string());
    PlotInputs in;
    in.fits = read_fits_json(dir / "fits.json");
    const json rep = parse_json(read_text(report_path), "report.json");
    for (const double t : rep.value("frame_times_h", std::vector<double>{})) in.frame_times.emplace_back(t, unit::h);
    if (rep.contains("series")) {
        for (const auto& [key, s] : rep.at("series").items()) {
            const Dimension d = key == "CC" ? dim::none : dim::area;
            std::vector<Quantity> values;
            for (const double v : s.at("values").get<std::vector<double>>()) values.emplace_back(v, d);
            in.series.emplace(key, QuantitySeries(key, in.frame_times, std::move(values), d));
        }
    }
    if (rep.contains("lineage")) {
        in.lineage = tracklets_from_json(json{{"tracklets", rep.at("lineage")}}.dump());
    }
    if (rep.contains("strains")) {
        for (const auto& [label, s] : rep.at("strains").items()) {
            in.strain_color[static_cast<TrackletLabel>(std::stol(label))] = s.get<double>();
        }
    }
    const double sigma = rep.value("igr_sigma_frames", 4.0);
    if (rep.contains("igr_phases")) {
        for (const auto& ph : rep.at("igr_phases")) {
            in.phases.push_back({Quantity(ph.at("start_h").get<double>(), unit::h),
                                 Quantity(ph.at("end_h").get<double>(), unit::h), ph.at("label").get<std::string>()});
        }
    }
    in.igr = read_igr_csv(dir / "igr.csv", sigma);
    std::vector<std::string> warnings;
    render_plots(dir, in, warnings);
}

// ---------------------------------------------------------------------------
// Workflow

namespace {

class StageFailed : public std::exception {};

struct Runner {
    ReplicateReport& report;

    template <typename F>
    void stage(const char* name, F&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            std::string reason;
            if (std::string_view(name) == "analysis") {
                const std::string_view what = e.what();
                reason = what.starts_with("missing_channel") ? "missing_channel" : snake_kind(e.kind());
            }
            fail(name, reason, e.what());
        } catch (const std::exception& e) {
            fail(name, {}, e.what());
        }
    }

    void fail(const std::string& stage, const std::string& reason, const std::string& what) {
        report.status = "failed:" + stage + (reason.empty() ? "" : ":" + reason);
        report.error = what;
        throw StageFailed{};
    }
};

void write_igr_csv(const std::filesystem::path& path, const std::vector<IGRSeries>& series) {
    std::string out = "label,time_h,igr_" + column_suffix(unit_token(dim::area_rate)) + "\n";
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.igr.size(); ++i) {
            out += fmt::format("{},{},{}\n", s.label, format_number(s.times[i].in(unit::h)),
                               format_number(s.igr[i].in(unit::um2_per_h)));
        }
    }
    write_text(path, out);
}

} // namespace

ReplicateReport run_workflow(const ReplicateSpec& replicate, const WorkflowParams& params,
                             const std::filesystem::path& out_dir) {
    ReplicateReport rep;
    rep.origin_id = replicate.origin_id;
    {
        json canonical;
        canonical["replicate"] = json::parse(replicate_to_json(replicate));
        canonical["workflow"] = json::parse(workflow_to_json(params));
        rep.config_sha256 = sha256_hex(canonical.dump());
    }

    std::optional<ImageStack> stack;
    Overlay overlay;
    std::vector<Quantity> frame_times;
    Runner run{rep};
    try {
        run.stage("setup", [&] {
            replicate.validate();
            params.validate();
            std::filesystem::create_directories(out_dir);
        });
        run.stage("load", [&] {
            StackMetadata meta = read_sidecar(replicate.sidecar);
            if (replicate.pixel_size) meta.pixel_size = *replicate.pixel_size;
            if (!meta.origin_id.empty() && meta.origin_id != replicate.origin_id) {
                rep.warnings.push_back("sidecar origin_id '" + meta.origin_id + "' differs from replicate '" +
                                       replicate.origin_id + "'");
            }
            stack.emplace(load_stack(replicate.stack, std::move(meta)));
            frame_times = stack->frame_times();
        });
        const StackMetadata& meta = stack->metadata();

        std::optional<std::size_t> seg_channel;
        run.stage("segment", [&] {
            if (params.threshold) {
                seg_channel = meta.channel_index(params.threshold->channel);
                overlay = segment_threshold(*stack, *seg_channel, params.threshold->threshold,
                                            params.threshold->polarity, params.threads);
            } else {
                const LabelStack labels = load_labels(params.labels->path);
                if (labels.shape.frames != stack->frames() || labels.shape.height != stack->height() ||
                    labels.shape.width != stack->width()) {
                    throw InconsistentInput("label stack shape differs from the image stack");
                }
                IngestResult ingested = ingest_label_masks(labels, params.threads);
                if (ingested.split_labels > 0) {
                    rep.warnings.push_back(fmt::format("{} label(s) split into several connected components",
                                                       ingested.split_labels));
                }
                overlay = std::move(ingested.overlay);
            }
        });
        run.stage("filter", [&] {
            if (params.size_bounds) {
                overlay = size_filter(overlay, params.size_bounds->first, params.size_bounds->second,
                                      meta.pixel_size);
            }
            write_overlay_jsonl(out_dir / "overlay.jsonl", overlay);
            write_masks_rle(out_dir / "masks.rle", overlay);
        });
        run.stage("track", [&] {
            TrackParams tp = params.tracking;
            tp.threads = params.threads;
            const TrackingGraph graph = track(overlay, meta, tp);
            rep.lineage = build_tracklets(graph, overlay);
            if (params.min_frames > 1) {
                const std::size_t before = rep.lineage.size();
                rep.lineage = min_length_filter(rep.lineage, params.min_frames);
                if (rep.lineage.size() != before) {
                    rep.warnings.push_back(fmt::format("{} tracklet(s) shorter than {} frames removed",
                                                       before - rep.lineage.size(), params.min_frames));
                }
            }
        });
        run.stage("features", [&] {
            std::vector<std::size_t> fluor;
            if (params.fluor_channels.empty()) {
                for (std::size_t c = 0; c < stack->channels(); ++c) {
                    const bool is_seg = seg_channel ? c == *seg_channel : meta.channel_names[c] == "phase";
                    if (!is_seg) fluor.push_back(c);
                }
            } else {
                for (const auto& name : params.fluor_channels) {
                    const auto it = std::find(meta.channel_names.begin(), meta.channel_names.end(), name);
                    if (it == meta.channel_names.end()) {
                        rep.warnings.push_back("fluorescence channel '" + name + "' not in stack");
                    } else {
                        fluor.push_back(static_cast<std::size_t>(it - meta.channel_names.begin()));
                    }
                }
            }
            rep.detections = extract_detection_features(overlay, *stack, &rep.lineage, fluor, params.threads);
            rep.tracklets = extract_tracklet_features(rep.lineage, rep.detections);
            write_detections_csv(out_dir / "detections.csv", rep.detections);
            write_tracklets_csv(out_dir / "tracklets.csv", rep.tracklets);
        });
        run.stage("analysis", [&] {
            if (params.analyses.growth_measures) {
                const PopulationSeries ps = population_series(rep.detections);
                rep.series.emplace("CC", ps.cc);
                rep.series.emplace("TSCA", ps.tsca);
                rep.series.emplace("TCA", tca_series(overlay, meta.pixel_size, frame_times));
                for (const auto& [key, m] :
                     {std::pair{"CC", Measure::CC}, std::pair{"TCA", Measure::TCA}, std::pair{"TSCA", Measure::TSCA}}) {
                    rep.fits[key] = fit_loglinear(rep.series.at(key), m);
                }
            }
            if (params.analyses.co_culture) {
                std::vector<std::string> chans = params.strain_channels;
                if (chans.empty()) {
                    if (rep.detections.fluor_channels.size() < 2) {
                        throw IndexError("missing_channel: co-culture needs two fluorescence channels");
                    }
                    chans = {rep.detections.fluor_channels[0], rep.detections.fluor_channels[1]};
                }
                rep.strains = classify_strains(rep.tracklets, {chans[0], chans[1]}, params.nonfluor_threshold);
                for (int s = 0; s < 2; ++s) {
                    const std::string key = fmt::format("strain{}_TSCA", s);
                    const auto labels = rep.strains->labels_of(s);
                    QuantitySeries tsca = population_series(rep.detections, &labels).tsca;
                    rep.series.emplace(key, QuantitySeries(key, tsca.times(), tsca.values(), dim::area));
                    rep.fits[key] = per_strain_growth(rep.detections, *rep.strains, s);
                }
            }
            if (params.analyses.single_cell_igr) {
                std::set<TrackletLabel> selected;
                if (params.full_cycle) {
                    selected = full_cycle_filter(rep.lineage);
                } else {
                    for (const auto& t : rep.lineage.tracklets()) selected.insert(t.label);
                }
                std::size_t skipped = 0;
                for (const TrackletLabel label : selected) {
                    std::vector<Quantity> times, areas;
                    for (const DetectionRow* row : rep.detections.rows_with_label(label)) {
                        times.push_back(row->time);
                        areas.push_back(row->area);
                    }
                    if (areas.size() < 2) {
                        ++skipped;
                        continue;
                    }
                    rep.igr.push_back(igr(QuantitySeries(fmt::format("cell {}", label), std::move(times),
                                                         std::move(areas), dim::area),
                                          params.igr_sigma_frames, label));
                }
                if (skipped > 0) rep.warnings.push_back(fmt::format("{} tracklet(s) too short for IGR", skipped));
            }
            write_text(out_dir / "fits.json", fits_to_json(rep.fits));
            write_igr_csv(out_dir / "igr.csv", rep.igr);
        });
        run.stage("report", [&] {
            PlotInputs in{rep.fits, rep.series, rep.lineage, frame_times, {}, rep.igr, params.igr_phases};
            if (rep.strains) {
                for (const auto& [label, s] : rep.strains->strain) in.strain_color[label] = s;
            }
            render_plots(out_dir, in, rep.warnings);
        });
    } catch (const StageFailed&) {
        // status already recorded
    }

    // report.json is written in every case.
    ordered_json doc;
    doc["origin_id"] = rep.origin_id;
    doc["status"] = rep.status;
    if (!rep.ok()) doc["error"] = rep.error;
    doc["warnings"] = rep.warnings;
    doc["provenance"] = {{"config_sha256", rep.config_sha256}, {"tool_version", tool_version()}};
    if (stack) {
        doc["shape"] = {{"frames", stack->frames()}, {"height", stack->height()}, {"width", stack->width()}};
    }
    std::vector<double> times_h;
    for (const auto& t : frame_times) times_h.push_back(t.in(unit::h));
    doc["frame_times_h"] = times_h;
    doc["fluorescence"] = "raw per-mask mean, no background subtraction";
    doc["counts"] = {{"detections", overlay.detection_count()}, {"tracklets", rep.lineage.size()}};
    ordered_json series = ordered_json::object();
    for (const auto& [key, s] : rep.series) series[key] = series_json(s);
    doc["series"] = std::move(series);
    if (rep.strains) {
        ordered_json strains = ordered_json::object();
        for (const auto& [label, s] : rep.strains->strain) strains[std::to_string(label)] = s;
        doc["strains"] = std::move(strains);
        doc["strain_centers_au"] = {rep.strains->centers[0], rep.strains->centers[1]};
        doc["discarded"] = rep.strains->discarded;
    }
    doc["igr_sigma_frames"] = params.igr_sigma_frames;
    ordered_json phases = ordered_json::array();
    for (const auto& ph : params.igr_phases) {
        phases.push_back({{"start_h", ph.start.in(unit::h)}, {"end_h", ph.end.in(unit::h)}, {"label", ph.label}});
    }
    doc["igr_phases"] = std::move(phases);
    doc["lineage"] = ordered_json::parse(tracklets_to_json(rep.lineage))["tracklets"];
    try {
        std::filesystem::create_directories(out_dir);
        write_text(out_dir / "report.json", doc.dump(2) + "\n");
    } catch (const std::exception& e) {
        if (rep.ok()) {
            rep.status = "failed:report";
            rep.error = e.what();
        }
    }
    return rep;
}

} // namespace mlci
