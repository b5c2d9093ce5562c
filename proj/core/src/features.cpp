#include "mlci/features.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "mlci/parallel.hpp"

namespace mlci {

std::string format_number(double v) { return fmt::format("{}", v); }

const DetectionRow& DetectionTable::row(DetectionId id) const {
    auto it = std::lower_bound(rows.begin(), rows.end(), id, [](const DetectionRow& r, DetectionId v) { return r.id < v; });
    if (it == rows.end() || it->id != id) throw InconsistentInput("no detection row " + std::to_string(id));
    return *it;
}

std::vector<const DetectionRow*> DetectionTable::rows_with_label(TrackletLabel label) const {
    std::vector<const DetectionRow*> out;
    for (const auto& r : rows) {
        if (r.label == label) out.push_back(&r);
    }
    return out;
}

const TrackletRow& TrackletTable::row(TrackletLabel label) const {
    auto it = std::lower_bound(rows.begin(), rows.end(), label,
                               [](const TrackletRow& r, TrackletLabel v) { return r.label < v; });
    if (it == rows.end() || it->label != label) throw InconsistentInput("no tracklet row " + std::to_string(label));
    return *it;
}

double median(std::vector<double> values) {
    if (values.empty()) throw InsufficientData("median of an empty sample");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

DetectionTable extract_detection_features(const Overlay& overlay, const ImageStack& stack,
                                          const TrackletGraph* tracklets,
                                          const std::vector<std::size_t>& fluor_channels, std::size_t threads) {
    if (overlay.frames.size() != stack.frames() || overlay.height != stack.height() ||
        overlay.width != stack.width()) {
        throw InconsistentInput("overlay and stack shapes disagree");
    }
    DetectionTable table;
    for (const std::size_t c : fluor_channels) {
        if (c >= stack.channels()) throw IndexError("fluorescence channel " + std::to_string(c) + " out of range");
        table.fluor_channels.push_back(stack.metadata().channel_names[c]);
    }
    table.frame_times = stack.frame_times();
    const auto labels = tracklets != nullptr ? tracklets->label_map() : std::map<DetectionId, TrackletLabel>{};
    const Quantity& px = stack.metadata().pixel_size;

    std::vector<std::vector<DetectionRow>> per_frame(overlay.frames.size());
    parallel_for(overlay.frames.size(), threads, [&](std::size_t t) {
        for (const CellDetection& det : overlay.frames[t]) {
            DetectionRow row;
            row.id = det.id;
            row.frame = t;
            row.time = stack.time_of(t);
            auto it = labels.find(det.id);
            row.label = it == labels.end() ? 0 : it->second;
            row.area = px_to_physical(det.area_px, 2, px);
            row.cx = px_to_physical(det.centroid_px.x, 1, px);
            row.cy = px_to_physical(det.centroid_px.y, 1, px);
            for (const std::size_t c : fluor_channels) {
                const ChannelView plane = stack.channel(t, c);
                double sum = 0.0;
                for (const Pixel& p : det.pixels) {
                    sum += plane(static_cast<std::size_t>(p.row), static_cast<std::size_t>(p.col));
                }
                row.fluor.emplace_back(sum / static_cast<double>(det.pixels.size()), unit::au);
            }
            per_frame[t].push_back(std::move(row));
        }
    });
    for (auto& frame : per_frame) {
        for (auto& row : frame) table.rows.push_back(std::move(row));
    }
    std::sort(table.rows.begin(), table.rows.end(), [](const DetectionRow& a, const DetectionRow& b) { return a.id < b.id; });
    return table;
}

TrackletTable extract_tracklet_features(const TrackletGraph& tracklets, const DetectionTable& detections) {
    TrackletTable table;
    table.fluor_channels = detections.fluor_channels;
    const std::size_t n_fluor = detections.fluor_channels.size();
    for (const Tracklet& t : tracklets.tracklets()) {
        std::vector<const DetectionRow*> rows;
        for (const DetectionId id : t.detections) rows.push_back(&detections.row(id));
        TrackletRow out;
        out.label = t.label;
        out.parent = t.parent;
        out.birth_time = rows.front()->time;
        out.end_time = rows.back()->time;
        out.lifetime = out.end_time - out.birth_time;
        out.birth_area = rows.front()->area;
        out.end_area = rows.back()->area;
        out.fate = t.fate;
        out.n_detections = t.length();
        for (std::size_t c = 0; c < n_fluor; ++c) {
            std::vector<double> values;
            values.reserve(rows.size());
            for (const DetectionRow* r : rows) values.push_back(r->fluor.at(c).in(unit::au));
            out.median_fluor.emplace_back(median(std::move(values)), unit::au);
        }
        table.rows.push_back(std::move(out));
    }
    return table;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string column(const std::string& base, const Dimension& d) {
    return base + "_" + column_suffix(unit_token(d));
}

std::string join(const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i > 0) out += ',';
        out += cells[i];
    }
    return out;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& s) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw InvalidInput("bad number '" + s + "'");
    return v;
}

long long parse_int(const std::string& s) {
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) throw InvalidInput("bad integer '" + s + "'");
    return v;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw InvalidInput("cannot write '" + path.string() + "'");
    return out;
}

std::pair<std::vector<std::string>, std::vector<std::vector<std::string>>> read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw InvalidInput("'" + path.string() + "' is empty");
    auto header = split(line);
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = split(line);
        if (cells.size() != header.size()) throw InvalidInput("ragged row in '" + path.string() + "'");
        rows.push_back(std::move(cells));
    }
    return {std::move(header), std::move(rows)};
}

std::vector<std::string> channels_from_header(const std::vector<std::string>& header, std::size_t first,
                                              const std::string& prefix) {
    std::vector<std::string> out;
    const std::string suffix = "_" + column_suffix(unit_token(dim::intensity));
    for (std::size_t i = first; i < header.size(); ++i) {
        const auto& h = header[i];
        if (h.rfind(prefix, 0) != 0 || h.size() < prefix.size() + suffix.size() ||
            h.compare(h.size() - suffix.size(), suffix.size(), suffix) != 0) {
            throw InvalidInput("unexpected column '" + h + "'");
        }
        out.push_back(h.substr(prefix.size(), h.size() - prefix.size() - suffix.size()));
    }
    return out;
}

} // namespace

std::vector<std::string> detection_csv_header(const std::vector<std::string>& fluor_channels) {
    std::vector<std::string> h{"id", "frame", column("time", dim::time), "label", column("area", dim::area),
                               column("cx", dim::length), column("cy", dim::length)};
    for (const auto& c : fluor_channels) h.push_back(column("fluor_" + c, dim::intensity));
    return h;
}

std::vector<std::string> tracklet_csv_header(const std::vector<std::string>& fluor_channels) {
    std::vector<std::string> h{"label",
                               "parent",
                               column("birth", dim::time),
                               column("end", dim::time),
                               column("lifetime", dim::time),
                               column("birth_area", dim::area),
                               column("end_area", dim::area),
                               "fate",
                               "n_detections"};
    for (const auto& c : fluor_channels) h.push_back(column("medfluor_" + c, dim::intensity));
    return h;
}

void write_detections_csv(const std::filesystem::path& path, const DetectionTable& table) {
    auto out = open_out(path);
    out << join(detection_csv_header(table.fluor_channels)) << '\n';
    for (const auto& r : table.rows) {
        std::vector<std::string> cells{std::to_string(r.id),
                                       std::to_string(r.frame),
                                       format_number(r.time.in(unit::h)),
                                       std::to_string(r.label),
                                       format_number(r.area.in(unit::um2)),
                                       format_number(r.cx.in(unit::um)),
                                       format_number(r.cy.in(unit::um))};
        for (const auto& f : r.fluor) cells.push_back(format_number(f.in(unit::au)));
        out << join(cells) << '\n';
    }
}

void write_tracklets_csv(const std::filesystem::path& path, const TrackletTable& table) {
    auto out = open_out(path);
    out << join(tracklet_csv_header(table.fluor_channels)) << '\n';
    for (const auto& r : table.rows) {
        std::vector<std::string> cells{std::to_string(r.label),
                                       r.parent ? std::to_string(*r.parent) : std::string(),
                                       format_number(r.birth_time.in(unit::h)),
                                       format_number(r.end_time.in(unit::h)),
                                       format_number(r.lifetime.in(unit::h)),
                                       format_number(r.birth_area.in(unit::um2)),
                                       format_number(r.end_area.in(unit::um2)),
                                       std::string(to_string(r.fate)),
                                       std::to_string(r.n_detections)};
        for (const auto& f : r.median_fluor) cells.push_back(format_number(f.in(unit::au)));
        out << join(cells) << '\n';
    }
}

DetectionTable read_detections_csv(const std::filesystem::path& path) {
    const auto [header, rows] = read_csv(path);
    const std::size_t fixed = 7;
    if (header.size() < fixed) throw InvalidInput("detections.csv: too few columns");
    DetectionTable table;
    table.fluor_channels = channels_from_header(header, fixed, "fluor_");
    if (header != detection_csv_header(table.fluor_channels)) throw InvalidInput("detections.csv: unexpected header");
    std::map<std::size_t, double> times;
    for (const auto& cells : rows) {
        DetectionRow r;
        r.id = parse_int(cells[0]);
        r.frame = static_cast<std::size_t>(parse_int(cells[1]));
        r.time = Quantity(parse_double(cells[2]), unit::h);
        r.label = static_cast<TrackletLabel>(parse_int(cells[3]));
        r.area = Quantity(parse_double(cells[4]), unit::um2);
        r.cx = Quantity(parse_double(cells[5]), unit::um);
        r.cy = Quantity(parse_double(cells[6]), unit::um);
        for (std::size_t i = fixed; i < cells.size(); ++i) r.fluor.emplace_back(parse_double(cells[i]), unit::au);
        times[r.frame] = r.time.in(unit::h);
        table.rows.push_back(std::move(r));
    }
    for (const auto& [frame, t] : times) table.frame_times.emplace_back(t, unit::h);
    std::sort(table.rows.begin(), table.rows.end(), [](const DetectionRow& a, const DetectionRow& b) { return a.id < b.id; });
    return table;
}

TrackletTable read_tracklets_csv(const std::filesystem::path& path) {
    const auto [header, rows] = read_csv(path);
    const std::size_t fixed = 9;
    if (header.size() < fixed) throw InvalidInput("tracklets.csv: too few columns");
    TrackletTable table;
    table.fluor_channels = channels_from_header(header, fixed, "medfluor_");
    if (header != tracklet_csv_header(table.fluor_channels)) throw InvalidInput("tracklets.csv: unexpected header");
    for (const auto& cells : rows) {
        TrackletRow r;
        r.label = static_cast<TrackletLabel>(parse_int(cells[0]));
        if (!cells[1].empty()) r.parent = static_cast<TrackletLabel>(parse_int(cells[1]));
        r.birth_time = Quantity(parse_double(cells[2]), unit::h);
        r.end_time = Quantity(parse_double(cells[3]), unit::h);
        r.lifetime = Quantity(parse_double(cells[4]), unit::h);
        r.birth_area = Quantity(parse_double(cells[5]), unit::um2);
        r.end_area = Quantity(parse_double(cells[6]), unit::um2);
        r.fate = parse_fate(cells[7]);
        r.n_detections = static_cast<std::size_t>(parse_int(cells[8]));
        for (std::size_t i = fixed; i < cells.size(); ++i) r.median_fluor.emplace_back(parse_double(cells[i]), unit::au);
        table.rows.push_back(std::move(r));
    }
    std::sort(table.rows.begin(), table.rows.end(), [](const TrackletRow& a, const TrackletRow& b) { return a.label < b.label; });
    return table;
}

} // namespace mlci
