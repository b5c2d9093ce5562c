#include "mlci/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <tuple>

#include <json.hpp>

namespace mlci {

// ---------------------------------------------------------------------------
// RNG

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

} // namespace

Xoshiro256::Xoshiro256(std::uint64_t seed) {
    for (auto& s : s_) s = splitmix64(seed);
}

std::uint64_t Xoshiro256::next() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Xoshiro256::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Xoshiro256::normal() {
    const double u1 = 1.0 - uniform(); // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// ---------------------------------------------------------------------------
// Scenario

void SimScenario::validate() const {
    const auto positive = [](const Quantity& q, const Dimension& d, const char* key) {
        if (q.dimension() != d) throw DimensionMismatch(std::string(key) + " has the wrong dimension");
        if (!(q.value() > 0.0) || !std::isfinite(q.value())) throw InvalidInput(std::string(key) + " must be positive");
    };
    if (strains.empty()) throw InvalidInput("strains must not be empty");
    for (const auto& s : strains) {
        positive(s.mu_star, dim::rate, "mu_star_per_h");
        if (s.fluor_means.size() != fluor_channels.size()) {
            throw InvalidInput("fluor_means_au must list one value per fluorescence channel");
        }
        if (!(s.fluor_std >= 0.0)) throw InvalidInput("fluor_std_au must be >= 0");
    }
    if (n_initial_cells == 0) throw InvalidInput("n_initial_cells must be positive");
    positive(a0, dim::area, "a0_um2");
    positive(a_div, dim::area, "a_div_um2");
    positive(frame_interval, dim::time, "frame_interval_min");
    positive(pixel_size, dim::length, "pixel_size_um");
    positive(cell_width, dim::length, "cell_width_um");
    if (!(a0_noise >= 0.0) || !(a_div_noise >= 0.0)) throw InvalidInput("noise levels must be >= 0");
    if (n_frames == 0 || height == 0 || width == 0) throw InvalidInput("n_frames, height and width must be positive");
    if (cell_gap_px < 2 || lane_gap_px < 2) throw InvalidInput("cells and lanes need at least 2 px separation");
    for (std::size_t i = 0; i < rate_schedule.size(); ++i) {
        if (rate_schedule[i].t_switch.dimension() != dim::time) throw DimensionMismatch("t_switch must be a time");
        if (!(rate_schedule[i].multiplier > 0.0)) throw InvalidInput("rate multipliers must be positive");
        if (i > 0 && !(rate_schedule[i].t_switch > rate_schedule[i - 1].t_switch)) {
            throw InvalidInput("rate_schedule times must be strictly increasing");
        }
    }
}

double SimScenario::multiplier_at(const Quantity& t) const {
    double m = 1.0;
    for (const auto& s : rate_schedule) {
        if (t >= s.t_switch) m = s.multiplier;
    }
    return m;
}

namespace {

template <typename T>
T get_or(const nlohmann::json& doc, const char* key, T fallback) {
    return doc.contains(key) ? doc.at(key).get<T>() : fallback;
}

} // namespace

SimScenario parse_scenario(const std::string& json_text) {
    SimScenario sc;
    try {
        const auto doc = nlohmann::json::parse(json_text);
        sc.seed = get_or<std::uint64_t>(doc, "seed", sc.seed);
        sc.origin_id = get_or<std::string>(doc, "origin_id", sc.origin_id);
        sc.fluor_channels = get_or<std::vector<std::string>>(doc, "fluor_channels", {});
        if (doc.contains("strains")) {
            sc.strains.clear();
            for (const auto& s : doc.at("strains")) {
                StrainSpec spec;
                spec.mu_star = Quantity(s.at("mu_star_per_h").get<double>(), unit::per_h);
                spec.fluor_means = get_or<std::vector<double>>(s, "fluor_means_au", {});
                spec.fluor_std = get_or<double>(s, "fluor_std_au", 0.0);
                sc.strains.push_back(std::move(spec));
            }
        }
        sc.n_initial_cells = get_or<std::size_t>(doc, "n_initial_cells", sc.n_initial_cells);
        sc.a0 = Quantity(get_or<double>(doc, "a0_um2", sc.a0.in(unit::um2)), unit::um2);
        sc.a0_noise = get_or<double>(doc, "a0_noise", sc.a0_noise);
        sc.a_div = Quantity(get_or<double>(doc, "a_div_um2", sc.a_div.in(unit::um2)), unit::um2);
        sc.a_div_noise = get_or<double>(doc, "a_div_noise", sc.a_div_noise);
        sc.frame_interval =
            Quantity(get_or<double>(doc, "frame_interval_min", sc.frame_interval.in(unit::min)), unit::min);
        sc.n_frames = get_or<std::size_t>(doc, "n_frames", sc.n_frames);
        sc.pixel_size = Quantity(get_or<double>(doc, "pixel_size_um", sc.pixel_size.in(unit::um)), unit::um);
        sc.height = get_or<std::size_t>(doc, "height", sc.height);
        sc.width = get_or<std::size_t>(doc, "width", sc.width);
        if (doc.contains("rate_schedule")) {
            for (const auto& s : doc.at("rate_schedule")) {
                sc.rate_schedule.push_back(
                    {Quantity(s.at("t_h").get<double>(), unit::h), s.at("multiplier").get<double>()});
            }
        }
        sc.cell_width = Quantity(get_or<double>(doc, "cell_width_um", sc.cell_width.in(unit::um)), unit::um);
        sc.cell_gap_px = get_or<std::size_t>(doc, "cell_gap_px", sc.cell_gap_px);
        sc.lane_gap_px = get_or<std::size_t>(doc, "lane_gap_px", sc.lane_gap_px);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("scenario JSON: ") + e.what());
    }
    sc.validate();
    return sc;
}

SimScenario read_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open scenario '" + path.string() + "'");
    return parse_scenario(std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>()));
}

std::string scenario_to_json(const SimScenario& sc) {
    nlohmann::ordered_json doc;
    doc["seed"] = sc.seed;
    doc["origin_id"] = sc.origin_id;
    auto strains = nlohmann::ordered_json::array();
    for (const auto& s : sc.strains) {
        nlohmann::ordered_json item;
        item["mu_star_per_h"] = s.mu_star.in(unit::per_h);
        item["fluor_means_au"] = s.fluor_means;
        item["fluor_std_au"] = s.fluor_std;
        strains.push_back(std::move(item));
    }
    doc["strains"] = std::move(strains);
    doc["fluor_channels"] = sc.fluor_channels;
    doc["n_initial_cells"] = sc.n_initial_cells;
    doc["a0_um2"] = sc.a0.in(unit::um2);
    doc["a0_noise"] = sc.a0_noise;
    doc["a_div_um2"] = sc.a_div.in(unit::um2);
    doc["a_div_noise"] = sc.a_div_noise;
    doc["frame_interval_min"] = sc.frame_interval.in(unit::min);
    doc["n_frames"] = sc.n_frames;
    doc["pixel_size_um"] = sc.pixel_size.in(unit::um);
    doc["height"] = sc.height;
    doc["width"] = sc.width;
    auto schedule = nlohmann::ordered_json::array();
    for (const auto& s : sc.rate_schedule) schedule.push_back({{"t_h", s.t_switch.in(unit::h)}, {"multiplier", s.multiplier}});
    doc["rate_schedule"] = std::move(schedule);
    doc["cell_width_um"] = sc.cell_width.in(unit::um);
    doc["cell_gap_px"] = sc.cell_gap_px;
    doc["lane_gap_px"] = sc.lane_gap_px;
    return doc.dump(2);
}

// ---------------------------------------------------------------------------
// Simulation

namespace {

struct LiveCell {
    std::size_t uid;
    int strain;
    double area_um2;
    double threshold_um2;
};

constexpr double kSlotFactor = 1.5;

struct Placed {
    std::size_t uid;
    std::size_t top;    // first row
    std::size_t left;   // first column
    std::size_t width;  // rows spanned by full columns (cell width in px)
    std::size_t full;   // number of full columns
    std::size_t rem;    // rows in the trailing partial column
    double area_um2;
};

struct CellHistory {
    int strain = 0;
    std::size_t birth_frame = 0;
    std::size_t last_frame = 0;
    std::optional<std::size_t> mother;
    bool divided = false;
    std::vector<DetectionId> detections;
};

double draw_lognormal(Xoshiro256& rng, double sigma) { return sigma > 0.0 ? std::exp(sigma * rng.normal()) : 1.0; }

} // namespace

SimOutput simulate(const SimScenario& sc) {
    sc.validate();
    const double px_um = sc.pixel_size.in(unit::um);
    const double px_area = px_um * px_um;
    const auto cell_w = static_cast<std::size_t>(std::max(1.0, std::round(sc.cell_width.in(unit::um) / px_um)));
    const std::size_t lane_pitch = cell_w + sc.lane_gap_px;
    const std::size_t n_lanes = sc.height > sc.lane_gap_px ? (sc.height - sc.lane_gap_px) / lane_pitch : 0;
    if (n_lanes == 0) throw ScenarioOverflow("image height holds no lane");
    const double dt_h = sc.frame_interval.in(unit::h);

    // Separate streams so that fluorescence settings never alter the lineage.
    Xoshiro256 growth_rng(sc.seed);
    Xoshiro256 pixel_rng(sc.seed ^ 0x5851f42d4c957f2dULL);

    std::vector<CellHistory> history;
    std::vector<std::vector<LiveCell>> lanes(std::min(n_lanes, sc.n_initial_cells));
    for (std::size_t i = 0; i < sc.n_initial_cells; ++i) {
        const int strain = static_cast<int>(i % sc.strains.size());
        LiveCell cell{history.size(), strain, sc.a0.in(unit::um2) * draw_lognormal(growth_rng, sc.a0_noise),
                      sc.a_div.in(unit::um2) * draw_lognormal(growth_rng, sc.a_div_noise)};
        history.push_back({strain, 0, 0, std::nullopt, false, {}});
        lanes[i % lanes.size()].push_back(cell);
    }

    std::vector<std::vector<Placed>> placed(sc.n_frames);
    for (std::size_t t = 0; t < sc.n_frames; ++t) {
        if (t > 0) {
            const double m = sc.multiplier_at(Quantity(static_cast<double>(t - 1) * dt_h, unit::h));
            for (auto& lane : lanes) {
                std::vector<LiveCell> next;
                for (LiveCell cell : lane) {
                    const double mu = sc.strains[static_cast<std::size_t>(cell.strain)].mu_star.in(unit::per_h);
                    cell.area_um2 *= std::exp(mu * m * dt_h);
                    if (cell.area_um2 < cell.threshold_um2) {
                        next.push_back(cell);
                        continue;
                    }
                    history[cell.uid].divided = true;
                    for (int k = 0; k < 2; ++k) {
                        LiveCell d{history.size(), cell.strain, cell.area_um2 / 2.0,
                                   sc.a_div.in(unit::um2) * draw_lognormal(growth_rng, sc.a_div_noise)};
                        history.push_back({cell.strain, t, t, cell.uid, false, {}});
                        next.push_back(d);
                    }
                }
                lane = std::move(next);
            }
        }
        for (std::size_t l = 0; l < lanes.size(); ++l) {
            // Each cell owns a slot proportional to its length, so the lane
            // extent is conserved through divisions and grows smoothly.
            std::vector<Placed> row;
            std::vector<double> slot;
            double extent = 0.0;
            for (const LiveCell& cell : lanes[l]) {
                const auto area_px = static_cast<std::size_t>(std::llround(cell.area_um2 / px_area));
                if (area_px == 0) throw ScenarioOverflow("cell area below one pixel");
                row.push_back({cell.uid, sc.lane_gap_px + l * lane_pitch, 0, cell_w, area_px / cell_w,
                               area_px % cell_w, cell.area_um2});
                slot.push_back(kSlotFactor * static_cast<double>(area_px) / static_cast<double>(cell_w));
                extent += slot.back();
            }
            double cursor = (static_cast<double>(sc.width) - extent) / 2.0;
            std::ptrdiff_t min_left = 1;
            for (std::size_t i = 0; i < row.size(); ++i) {
                Placed& p = row[i];
                const std::size_t cols = p.full + (p.rem > 0 ? 1 : 0);
                const double centre = cursor + slot[i] / 2.0;
                cursor += slot[i];
                const auto left = std::max<std::ptrdiff_t>(
                    std::llround(centre - static_cast<double>(cols) / 2.0), min_left);
                min_left = left + static_cast<std::ptrdiff_t>(cols + sc.cell_gap_px);
                if (left + static_cast<std::ptrdiff_t>(cols) + 1 > static_cast<std::ptrdiff_t>(sc.width)) {
                    throw ScenarioOverflow("lane " + std::to_string(l) + " needs " +
                                           std::to_string(static_cast<std::size_t>(std::ceil(extent)) + 2) +
                                           " px at frame " + std::to_string(t));
                }
                p.left = static_cast<std::size_t>(left);
                history[p.uid].last_frame = t;
                placed[t].push_back(p);
            }
            if (!row.empty() && (static_cast<double>(sc.width) - extent) / 2.0 < 1.0) {
                throw ScenarioOverflow("lane " + std::to_string(l) + " needs " +
                                       std::to_string(static_cast<std::size_t>(std::ceil(extent)) + 2) +
                                       " px at frame " + std::to_string(t));
            }
        }
        std::sort(placed[t].begin(), placed[t].end(),
                  [](const Placed& a, const Placed& b) { return std::tie(a.top, a.left) < std::tie(b.top, b.left); });
    }

    // Detection ids follow segmentation order: (frame, first row-major pixel).
    DetectionId next_id = 1;
    for (std::size_t t = 0; t < sc.n_frames; ++t) {
        for (const Placed& p : placed[t]) history[p.uid].detections.push_back(next_id++);
    }
    std::vector<std::size_t> order(history.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::tie(history[a].birth_frame, history[a].detections.front()) <
               std::tie(history[b].birth_frame, history[b].detections.front());
    });
    std::vector<TrackletLabel> label_of(history.size());
    for (std::size_t i = 0; i < order.size(); ++i) label_of[order[i]] = static_cast<TrackletLabel>(i + 1);

    GroundTruth truth;
    truth.pixel_size = sc.pixel_size;
    truth.fluor_channels = sc.fluor_channels;
    for (const auto& s : sc.strains) truth.strain_fluor_means.push_back(s.fluor_means);
    std::vector<Tracklet> tracklets;
    for (const std::size_t uid : order) {
        const CellHistory& h = history[uid];
        Tracklet tr;
        tr.label = label_of[uid];
        if (h.mother) tr.parent = label_of[*h.mother];
        tr.detections = h.detections;
        for (std::size_t f = h.birth_frame; f <= h.last_frame; ++f) tr.frames.push_back(f);
        tr.fate = h.divided ? Fate::divided : Fate::movie_end;
        truth.strain_of[tr.label] = h.strain;
        tracklets.push_back(std::move(tr));
    }
    truth.lineage = TrackletGraph(std::move(tracklets));

    const std::size_t n_fluor = sc.fluor_channels.size();
    const std::size_t n_channels = 1 + n_fluor;
    const StackShape shape{sc.n_frames, sc.height, sc.width, n_channels};
    std::vector<float> pixels(shape.count(), 0.0F);
    LabelStack labels{{sc.n_frames, sc.height, sc.width, 1}, std::vector<std::int32_t>(shape.frames * shape.plane(), 0)};
    constexpr float phase_background = 0.05F;
    constexpr float phase_cell = 0.8F;
    for (std::size_t i = 0; i < shape.frames * shape.plane(); ++i) pixels[i * n_channels] = phase_background;

    truth.frames.resize(sc.n_frames);
    for (std::size_t t = 0; t < sc.n_frames; ++t) {
        truth.frame_times.push_back(Quantity(static_cast<double>(t) * dt_h, unit::h));
        std::size_t k = 0;
        for (const Placed& p : placed[t]) {
            const CellHistory& h = history[p.uid];
            const DetectionId id = h.detections[t - h.birth_frame];
            const TrackletLabel label = label_of[p.uid];
            const StrainSpec& strain = sc.strains[static_cast<std::size_t>(h.strain)];
            double sx = 0.0, sy = 0.0, n = 0.0;
            const auto paint = [&](std::size_t row, std::size_t col) {
                const std::size_t flat = (t * sc.height + row) * sc.width + col;
                labels.labels[flat] = label;
                pixels[flat * n_channels] = phase_cell;
                for (std::size_t c = 0; c < n_fluor; ++c) {
                    const double v = strain.fluor_means[c] + strain.fluor_std * pixel_rng.normal();
                    pixels[flat * n_channels + 1 + c] = static_cast<float>(std::clamp(v, 0.0, 1.0));
                }
                sx += static_cast<double>(col);
                sy += static_cast<double>(row);
                n += 1.0;
            };
            for (std::size_t row = p.top; row < p.top + p.width; ++row) {
                for (std::size_t col = p.left; col < p.left + p.full; ++col) paint(row, col);
                if (row < p.top + p.rem) paint(row, p.left + p.full);
            }
            truth.frames[t].push_back({id, label, h.strain, p.area_um2, n, {sx / n, sy / n}});
            ++k;
        }
        std::sort(truth.frames[t].begin(), truth.frames[t].end(),
                  [](const TruthCell& a, const TruthCell& b) { return a.detection_id < b.detection_id; });
    }

    StackMetadata meta;
    meta.pixel_size = sc.pixel_size;
    meta.frame_interval = sc.frame_interval;
    meta.channel_names.push_back("phase");
    for (const auto& c : sc.fluor_channels) meta.channel_names.push_back(c);
    meta.origin_id = sc.origin_id;
    return SimOutput{ImageStack(shape, std::move(pixels), std::move(meta)), std::move(labels), std::move(truth)};
}

QuantitySeries GroundTruth::true_cc() const {
    std::vector<Quantity> v;
    for (const auto& f : frames) v.emplace_back(static_cast<double>(f.size()), dim::none);
    return QuantitySeries("CC", frame_times, std::move(v), dim::none);
}

QuantitySeries GroundTruth::true_tsca() const {
    std::vector<Quantity> v;
    for (const auto& f : frames) {
        double s = 0.0;
        for (const auto& c : f) s += c.area_um2;
        v.emplace_back(s, unit::um2);
    }
    return QuantitySeries("TSCA", frame_times, std::move(v), dim::area);
}

TruthTables truth_tables(const GroundTruth& truth) {
    TruthTables out;
    out.detections.fluor_channels = truth.fluor_channels;
    out.detections.frame_times = truth.frame_times;
    const double px_um = truth.pixel_size.in(unit::um);
    for (std::size_t t = 0; t < truth.frames.size(); ++t) {
        for (const TruthCell& c : truth.frames[t]) {
            DetectionRow row;
            row.id = c.detection_id;
            row.frame = t;
            row.time = truth.frame_times[t];
            row.label = c.label;
            row.area = Quantity(c.area_um2, unit::um2);
            row.cx = Quantity(c.centroid_px.x * px_um, unit::um);
            row.cy = Quantity(c.centroid_px.y * px_um, unit::um);
            for (const double m : truth.strain_fluor_means.at(static_cast<std::size_t>(c.strain))) {
                row.fluor.emplace_back(m, unit::au);
            }
            out.detections.rows.push_back(std::move(row));
        }
    }
    std::sort(out.detections.rows.begin(), out.detections.rows.end(),
              [](const DetectionRow& a, const DetectionRow& b) { return a.id < b.id; });
    out.tracklets = extract_tracklet_features(truth.lineage, out.detections);
    return out;
}

void write_simulation(const std::filesystem::path& dir, const SimOutput& output) {
    std::filesystem::create_directories(dir);
    write_raw(dir / "stack.raw", output.stack.shape(), output.stack.pixels());
    std::vector<float> label_values(output.labels.labels.begin(), output.labels.labels.end());
    write_raw(dir / "labels.raw", output.labels.shape, label_values);
    write_sidecar(dir / "sidecar.json", output.stack.metadata());

    nlohmann::ordered_json doc;
    doc["lineage"] = nlohmann::ordered_json::parse(tracklets_to_json(output.truth.lineage))["tracklets"];
    auto frames = nlohmann::ordered_json::array();
    for (const auto& f : output.truth.frames) {
        auto cells = nlohmann::ordered_json::array();
        for (const auto& c : f) {
            nlohmann::ordered_json cell;
            cell["id"] = c.detection_id;
            cell["label"] = c.label;
            cell["strain"] = c.strain;
            cell["area_um2"] = c.area_um2;
            cell["area_px"] = c.area_px;
            cell["centroid"] = {c.centroid_px.x, c.centroid_px.y};
            cells.push_back(std::move(cell));
        }
        frames.push_back(std::move(cells));
    }
    doc["frames"] = std::move(frames);
    std::ofstream out(dir / "truth.json", std::ios::trunc);
    out << doc.dump() << '\n';

    const TruthTables tables = truth_tables(output.truth);
    write_detections_csv(dir / "truth_detections.csv", tables.detections);
    write_tracklets_csv(dir / "truth_tracklets.csv", tables.tracklets);
}

} // namespace mlci
