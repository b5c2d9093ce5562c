#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <json.hpp>

#include "mlci/segmentation.hpp"

namespace mlci {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw InvalidInput("cannot write '" + path.string() + "'");
    return out;
}

} // namespace

void write_overlay_jsonl(const std::filesystem::path& path, const Overlay& overlay) {
    auto out = open_out(path);
    for (const auto& frame : overlay.frames) {
        for (const auto& det : frame) {
            nlohmann::ordered_json line;
            line["id"] = det.id;
            line["frame"] = det.frame;
            auto contour = nlohmann::ordered_json::array();
            for (const Point& p : det.contour) {
                contour.push_back({static_cast<std::int64_t>(p.x), static_cast<std::int64_t>(p.y)});
            }
            line["contour"] = std::move(contour);
            line["area_px"] = det.area_px;
            line["centroid"] = {det.centroid_px.x, det.centroid_px.y};
            out << line.dump() << '\n';
        }
    }
}

void write_masks_rle(const std::filesystem::path& path, const Overlay& overlay) {
    auto out = open_out(path);
    for (const auto& frame : overlay.frames) {
        for (const auto& det : frame) {
            out << det.frame << ' ' << det.id << ':';
            std::size_t i = 0;
            bool first = true;
            while (i < det.pixels.size()) {
                const std::size_t start = std::size_t(det.pixels[i].row) * overlay.width + std::size_t(det.pixels[i].col);
                std::size_t len = 1;
                while (i + len < det.pixels.size() &&
                       std::size_t(det.pixels[i + len].row) * overlay.width + std::size_t(det.pixels[i + len].col) ==
                           start + len) {
                    ++len;
                }
                out << (first ? " " : ";") << start << ',' << len;
                first = false;
                i += len;
            }
            out << '\n';
        }
    }
}

Overlay read_overlay(const std::filesystem::path& jsonl_path, const std::filesystem::path& rle_path,
                     std::size_t height, std::size_t width, std::size_t frames) {
    std::ifstream rle(rle_path);
    if (!rle) throw InvalidInput("cannot open '" + rle_path.string() + "'");
    std::map<DetectionId, std::vector<Pixel>> masks;
    std::string line;
    while (std::getline(rle, line)) {
        if (line.empty()) continue;
        const auto colon = line.find(':');
        if (colon == std::string::npos) throw InvalidInput("mask line without ':'");
        std::istringstream head(line.substr(0, colon));
        std::size_t frame = 0;
        DetectionId id = 0;
        if (!(head >> frame >> id)) throw InvalidInput("mask line header must be '<frame> <id>'");
        auto& px = masks[id];
        std::istringstream runs(line.substr(colon + 1));
        std::string run;
        while (std::getline(runs, run, ';')) {
            std::size_t start = 0, len = 0;
            char comma = 0;
            std::istringstream rs(run);
            if (!(rs >> start >> comma >> len) || comma != ',') throw InvalidInput("bad run '" + run + "'");
            for (std::size_t k = start; k < start + len; ++k) {
                if (k >= height * width) throw InvalidInput("run exceeds frame size");
                px.push_back({static_cast<std::int32_t>(k / width), static_cast<std::int32_t>(k % width)});
            }
        }
    }

    std::ifstream js(jsonl_path);
    if (!js) throw InvalidInput("cannot open '" + jsonl_path.string() + "'");
    Overlay overlay{height, width, std::vector<std::vector<CellDetection>>(frames)};
    while (std::getline(js, line)) {
        if (line.empty()) continue;
        const auto doc = nlohmann::json::parse(line);
        CellDetection det;
        det.id = doc.at("id").get<DetectionId>();
        det.frame = doc.at("frame").get<std::size_t>();
        if (det.frame >= frames) throw InvalidInput("detection frame out of range");
        for (const auto& p : doc.at("contour")) det.contour.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        det.area_px = doc.at("area_px").get<double>();
        det.centroid_px = {doc.at("centroid").at(0).get<double>(), doc.at("centroid").at(1).get<double>()};
        auto it = masks.find(det.id);
        if (it == masks.end()) throw InconsistentInput("no mask for detection " + std::to_string(det.id));
        det.pixels = std::move(it->second);
        if (static_cast<double>(det.pixels.size()) != det.area_px) {
            throw InconsistentInput("mask size disagrees with area_px for detection " + std::to_string(det.id));
        }
        overlay.frames[det.frame].push_back(std::move(det));
    }
    return overlay;
}

} // namespace mlci
