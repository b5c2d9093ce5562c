#include "mlci/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <set>
#include <tuple>

#include <json.hpp>

#include "mlci/lap.hpp"
#include "mlci/parallel.hpp"

namespace mlci {

// ---------------------------------------------------------------------------
// TrackingGraph

void TrackingGraph::add_node(DetectionId id) { succ_.try_emplace(id); }

void TrackingGraph::add_edge(DetectionId from, DetectionId to) {
    add_node(from);
    add_node(to);
    if (pred_.contains(to)) throw InvalidGraph("detection " + std::to_string(to) + " would get two predecessors");
    auto& out = succ_[from];
    if (out.size() >= 2) throw InvalidGraph("detection " + std::to_string(from) + " would get three successors");
    out.insert(std::upper_bound(out.begin(), out.end(), to), to);
    pred_[to] = from;
}

const std::vector<DetectionId>& TrackingGraph::successors(DetectionId id) const {
    auto it = succ_.find(id);
    if (it == succ_.end()) throw InvalidGraph("unknown detection " + std::to_string(id));
    return it->second;
}

std::optional<DetectionId> TrackingGraph::predecessor(DetectionId id) const {
    auto it = pred_.find(id);
    if (it == pred_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::pair<DetectionId, DetectionId>> TrackingGraph::edges() const {
    std::vector<std::pair<DetectionId, DetectionId>> out;
    for (const auto& [from, tos] : succ_) {
        for (const DetectionId to : tos) out.emplace_back(from, to);
    }
    return out;
}

void TrackingGraph::validate(const Overlay& overlay) const {
    std::map<DetectionId, std::size_t> frame_of;
    for (const auto& frame : overlay.frames) {
        for (const auto& det : frame) frame_of[det.id] = det.frame;
    }
    for (const auto& [from, tos] : succ_) {
        auto it = frame_of.find(from);
        if (it == frame_of.end()) throw InvalidGraph("node " + std::to_string(from) + " not in overlay");
        if (tos.size() > 2) throw InvalidGraph("node " + std::to_string(from) + " has out-degree > 2");
        for (const DetectionId to : tos) {
            auto jt = frame_of.find(to);
            if (jt == frame_of.end()) throw InvalidGraph("node " + std::to_string(to) + " not in overlay");
            if (jt->second != it->second + 1) {
                throw InvalidGraph("edge " + std::to_string(from) + "->" + std::to_string(to) +
                                   " does not join consecutive frames");
            }
        }
    }
    std::map<DetectionId, int> indeg;
    for (const auto& [from, tos] : succ_) {
        for (const DetectionId to : tos) {
            if (++indeg[to] > 1) throw InvalidGraph("node " + std::to_string(to) + " has in-degree > 1");
        }
    }
}

// ---------------------------------------------------------------------------
// Tracklets

std::string_view to_string(Fate fate) noexcept {
    switch (fate) {
    case Fate::divided: return "divided";
    case Fate::lost: return "lost";
    case Fate::movie_end: return "movie_end";
    }
    return "lost";
}

Fate parse_fate(std::string_view text) {
    if (text == "divided") return Fate::divided;
    if (text == "lost") return Fate::lost;
    if (text == "movie_end") return Fate::movie_end;
    throw InvalidInput("unknown fate '" + std::string(text) + "'");
}

TrackletGraph::TrackletGraph(std::vector<Tracklet> tracklets) : tracklets_(std::move(tracklets)) {
    std::sort(tracklets_.begin(), tracklets_.end(),
              [](const Tracklet& a, const Tracklet& b) { return a.label < b.label; });
    validate();
}

bool TrackletGraph::contains(TrackletLabel label) const {
    auto it = std::lower_bound(tracklets_.begin(), tracklets_.end(), label,
                               [](const Tracklet& t, TrackletLabel l) { return t.label < l; });
    return it != tracklets_.end() && it->label == label;
}

const Tracklet& TrackletGraph::at(TrackletLabel label) const {
    auto it = std::lower_bound(tracklets_.begin(), tracklets_.end(), label,
                               [](const Tracklet& t, TrackletLabel l) { return t.label < l; });
    if (it == tracklets_.end() || it->label != label) throw IndexError("no tracklet " + std::to_string(label));
    return *it;
}

std::vector<TrackletLabel> TrackletGraph::children(TrackletLabel label) const {
    std::vector<TrackletLabel> out;
    for (const auto& t : tracklets_) {
        if (t.parent == label) out.push_back(t.label);
    }
    return out;
}

std::vector<TrackletLabel> TrackletGraph::roots() const {
    std::vector<TrackletLabel> out;
    for (const auto& t : tracklets_) {
        if (!t.parent) out.push_back(t.label);
    }
    return out;
}

std::map<DetectionId, TrackletLabel> TrackletGraph::label_map() const {
    std::map<DetectionId, TrackletLabel> out;
    for (const auto& t : tracklets_) {
        for (const DetectionId d : t.detections) out[d] = t.label;
    }
    return out;
}

void TrackletGraph::validate() const {
    std::map<TrackletLabel, std::size_t> n_children;
    std::set<DetectionId> seen_detections;
    for (std::size_t i = 0; i < tracklets_.size(); ++i) {
        const Tracklet& t = tracklets_[i];
        const std::string who = "tracklet " + std::to_string(t.label);
        if (t.label <= 0) throw InvalidGraph(who + ": labels must be positive");
        if (i > 0 && tracklets_[i - 1].label == t.label) throw InvalidGraph(who + ": duplicate label");
        if (t.detections.empty() || t.detections.size() != t.frames.size()) {
            throw InvalidGraph(who + ": needs one frame per detection");
        }
        for (std::size_t k = 1; k < t.frames.size(); ++k) {
            if (t.frames[k] != t.frames[k - 1] + 1) throw InvalidGraph(who + ": frames not consecutive");
        }
        for (const DetectionId d : t.detections) {
            if (!seen_detections.insert(d).second) {
                throw InvalidGraph(who + ": detection " + std::to_string(d) + " in two tracklets");
            }
        }
        n_children.try_emplace(t.label, 0);
        if (t.parent) {
            if (*t.parent == t.label) throw InvalidGraph(who + ": is its own parent");
            ++n_children[*t.parent];
        }
    }
    for (const auto& t : tracklets_) {
        if (t.parent && !contains(*t.parent)) {
            throw InvalidGraph("tracklet " + std::to_string(t.label) + ": parent " + std::to_string(*t.parent) +
                               " missing");
        }
        const bool divided = t.fate == Fate::divided;
        if (divided != (n_children[t.label] == 2) || n_children[t.label] > 2) {
            throw InvalidGraph("tracklet " + std::to_string(t.label) + ": fate '" + std::string(to_string(t.fate)) +
                               "' with " + std::to_string(n_children[t.label]) + " daughters");
        }
    }
    // Every parent chain must reach a root within |tracklets| hops.
    for (const auto& t : tracklets_) {
        std::optional<TrackletLabel> p = t.parent;
        std::size_t hops = 0;
        while (p) {
            if (++hops > tracklets_.size()) throw InvalidGraph("lineage contains a cycle");
            p = at(*p).parent;
        }
    }
}

TrackletGraph build_tracklets(const TrackingGraph& graph, const Overlay& overlay) {
    graph.validate(overlay);
    const std::size_t last_frame = overlay.frames.empty() ? 0 : overlay.frames.size() - 1;
    std::map<DetectionId, std::size_t> frame_of;
    for (const auto& frame : overlay.frames) {
        for (const auto& det : frame) frame_of[det.id] = det.frame;
    }

    struct Chain {
        std::vector<DetectionId> detections;
        std::vector<std::size_t> frames;
        Fate fate;
        std::optional<DetectionId> mother_end;
    };
    std::vector<Chain> chains;
    for (const auto& [id, frame] : frame_of) {
        const auto pred = graph.nodes().contains(id) ? graph.predecessor(id) : std::nullopt;
        const bool starts = !pred || graph.out_degree(*pred) == 2;
        if (!starts) continue;
        Chain chain;
        chain.mother_end = pred;
        DetectionId cur = id;
        for (;;) {
            chain.detections.push_back(cur);
            chain.frames.push_back(frame_of.at(cur));
            const auto& next = graph.nodes().contains(cur) ? graph.successors(cur) : std::vector<DetectionId>{};
            if (next.size() == 1) {
                cur = next.front();
                continue;
            }
            if (next.size() == 2) {
                chain.fate = Fate::divided;
            } else {
                chain.fate = frame_of.at(cur) == last_frame ? Fate::movie_end : Fate::lost;
            }
            break;
        }
        chains.push_back(std::move(chain));
    }

    std::sort(chains.begin(), chains.end(), [](const Chain& a, const Chain& b) {
        const auto min_a = *std::min_element(a.detections.begin(), a.detections.end());
        const auto min_b = *std::min_element(b.detections.begin(), b.detections.end());
        return std::tie(a.frames.front(), min_a) < std::tie(b.frames.front(), min_b);
    });

    std::map<DetectionId, TrackletLabel> end_label;
    std::vector<Tracklet> tracklets;
    tracklets.reserve(chains.size());
    for (std::size_t i = 0; i < chains.size(); ++i) {
        Tracklet t;
        t.label = static_cast<TrackletLabel>(i + 1);
        t.detections = chains[i].detections;
        t.frames = chains[i].frames;
        t.fate = chains[i].fate;
        end_label[t.detections.back()] = t.label;
        tracklets.push_back(std::move(t));
    }
    for (std::size_t i = 0; i < chains.size(); ++i) {
        // Mothers are born strictly earlier, so their labels already exist.
        if (chains[i].mother_end) tracklets[i].parent = end_label.at(*chains[i].mother_end);
    }
    return TrackletGraph(std::move(tracklets));
}

// ---------------------------------------------------------------------------
// Linking

void TrackParams::validate() const {
    if (max_link_distance.dimension() != dim::length) {
        throw DimensionMismatch("max_link_distance must be a length (um)");
    }
    if (!(max_link_distance.value() > 0.0) || !std::isfinite(max_link_distance.value())) {
        throw InvalidInput("max_link_distance_um must be positive");
    }
    if (!(area_weight >= 0.0) || !std::isfinite(area_weight)) throw InvalidInput("area_weight must be >= 0");
    if (!(division_area_tolerance >= 0.0) || !std::isfinite(division_area_tolerance)) {
        throw InvalidInput("division_area_tolerance must be >= 0");
    }
}

namespace {

struct PairLinks {
    std::vector<int> source_to_target; // frame t index -> frame t+1 index or -1
};

class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }

private:
    std::vector<std::size_t> parent_;
};

double distance_um(const CellDetection& a, const CellDetection& b, double px_um) {
    const double dx = (a.centroid_px.x - b.centroid_px.x) * px_um;
    const double dy = (a.centroid_px.y - b.centroid_px.y) * px_um;
    return std::sqrt(dx * dx + dy * dy);
}

// Links between two frames. The LAP is solved per connected component of the
// gate graph: gated-out pairs cost more than leaving both ends unassigned,
// so they never appear in an optimum and components are independent.
PairLinks link_pair(const std::vector<CellDetection>& src, const std::vector<CellDetection>& dst, double px_um,
                    const TrackParams& params) {
    const double gate = params.max_link_distance.in(unit::um);
    const std::size_t ns = src.size(), nd = dst.size();
    PairLinks out{std::vector<int>(ns, -1)};
    if (ns == 0 || nd == 0) return out;

    DisjointSets sets(ns + nd);
    for (std::size_t i = 0; i < ns; ++i) {
        for (std::size_t j = 0; j < nd; ++j) {
            if (distance_um(src[i], dst[j], px_um) <= gate) sets.unite(i, ns + j);
        }
    }
    std::map<std::size_t, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> groups;
    for (std::size_t i = 0; i < ns; ++i) groups[sets.find(i)].first.push_back(i);
    for (std::size_t j = 0; j < nd; ++j) groups[sets.find(ns + j)].second.push_back(j);

    const double forbidden = 2.0 * no_assign_cost + 1.0;
    for (const auto& [root, members] : groups) {
        const auto& [rows, cols] = members;
        if (rows.empty() || cols.empty()) continue;
        CostMatrix cost(rows.size(), cols.size(), forbidden);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const CellDetection& a = src[rows[r]];
            for (std::size_t c = 0; c < cols.size(); ++c) {
                const CellDetection& b = dst[cols[c]];
                const double d = distance_um(a, b, px_um);
                if (d > gate) continue;
                cost(r, c) = d / gate + params.area_weight * std::abs(b.area_px - a.area_px) / a.area_px;
            }
        }
        const Assignment assignment = lap_solve(cost, no_assign_cost);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const int c = assignment.row_to_col[r];
            if (c < 0 || cost(r, static_cast<std::size_t>(c)) >= forbidden) continue;
            out.source_to_target[rows[r]] = static_cast<int>(cols[static_cast<std::size_t>(c)]);
        }
    }
    return out;
}

} // namespace

TrackingGraph track(const Overlay& overlay, const StackMetadata& meta, const TrackParams& params) {
    params.validate();
    const double px_um = meta.pixel_size.in(unit::um);
    if (!(px_um > 0.0)) throw InvalidMetadata("pixel_size_um must be positive");
    const double gate = params.max_link_distance.in(unit::um);

    TrackingGraph graph;
    for (const auto& frame : overlay.frames) {
        for (const auto& det : frame) graph.add_node(det.id);
    }
    const std::size_t n_pairs = overlay.frames.size() > 1 ? overlay.frames.size() - 1 : 0;
    std::vector<PairLinks> links(n_pairs);
    parallel_for(n_pairs, params.threads, [&](std::size_t t) {
        links[t] = link_pair(overlay.frames[t], overlay.frames[t + 1], px_um, params);
    });

    for (std::size_t t = 0; t < n_pairs; ++t) {
        const auto& src = overlay.frames[t];
        const auto& dst = overlay.frames[t + 1];
        const auto& s2t = links[t].source_to_target;
        std::vector<char> target_linked(dst.size(), 0);
        for (std::size_t i = 0; i < src.size(); ++i) {
            if (s2t[i] < 0) continue;
            graph.add_edge(src[i].id, dst[static_cast<std::size_t>(s2t[i])].id);
            target_linked[static_cast<std::size_t>(s2t[i])] = 1;
        }
        if (!params.enable_divisions) continue;

        struct Candidate {
            double distance;
            std::size_t source;
            std::size_t target;
        };
        std::vector<Candidate> candidates;
        for (std::size_t j = 0; j < dst.size(); ++j) {
            if (target_linked[j]) continue;
            for (std::size_t i = 0; i < src.size(); ++i) {
                if (s2t[i] < 0) continue;
                const double d = distance_um(src[i], dst[j], px_um);
                if (d <= gate) candidates.push_back({d, i, j});
            }
        }
        std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
            return std::tie(a.distance, a.source, a.target) < std::tie(b.distance, b.source, b.target);
        });
        std::vector<char> source_split(src.size(), 0);
        const double tol = params.division_area_tolerance;
        for (const Candidate& c : candidates) {
            if (target_linked[c.target] || source_split[c.source]) continue;
            const double mother = src[c.source].area_px;
            const double daughters = dst[static_cast<std::size_t>(s2t[c.source])].area_px + dst[c.target].area_px;
            if (daughters < (1.0 - tol) * mother || daughters > (1.0 + tol) * mother) continue;
            graph.add_edge(src[c.source].id, dst[c.target].id);
            target_linked[c.target] = 1;
            source_split[c.source] = 1;
        }
    }
    graph.validate(overlay);
    return graph;
}

// ---------------------------------------------------------------------------
// JSON

std::string tracklets_to_json(const TrackletGraph& graph) {
    nlohmann::ordered_json doc;
    auto list = nlohmann::ordered_json::array();
    for (const auto& t : graph.tracklets()) {
        nlohmann::ordered_json item;
        item["label"] = t.label;
        item["parent"] = t.parent ? nlohmann::ordered_json(*t.parent) : nlohmann::ordered_json(nullptr);
        item["frames"] = t.frames;
        item["detections"] = t.detections;
        item["fate"] = std::string(to_string(t.fate));
        list.push_back(std::move(item));
    }
    doc["tracklets"] = std::move(list);
    return doc.dump();
}

TrackletGraph tracklets_from_json(const std::string& text) {
    std::vector<Tracklet> out;
    try {
        const auto doc = nlohmann::json::parse(text);
        for (const auto& item : doc.at("tracklets")) {
            Tracklet t;
            t.label = item.at("label").get<TrackletLabel>();
            if (!item.at("parent").is_null()) t.parent = item.at("parent").get<TrackletLabel>();
            t.frames = item.at("frames").get<std::vector<std::size_t>>();
            t.detections = item.at("detections").get<std::vector<DetectionId>>();
            t.fate = parse_fate(item.at("fate").get<std::string>());
            out.push_back(std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("tracklet JSON: ") + e.what());
    }
    return TrackletGraph(std::move(out));
}

void write_tracklets_json(const std::filesystem::path& path, const TrackletGraph& graph) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw InvalidInput("cannot write '" + path.string() + "'");
    out << tracklets_to_json(graph) << '\n';
}

TrackletGraph read_tracklets_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInput("cannot open '" + path.string() + "'");
    return tracklets_from_json(std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>()));
}

} // namespace mlci
