#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mlci/report.hpp"

namespace mlci::test {

/// Fixed inputs behind tests/golden/*.svg.
struct GoldenDocument {
    std::string file;
    std::string svg;
};

inline Tracklet golden_tracklet(TrackletLabel l, std::optional<TrackletLabel> parent, std::size_t f0, std::size_t f1,
                                Fate fate) {
    Tracklet t{l, parent, {}, {}, fate};
    for (std::size_t f = f0; f <= f1; ++f) {
        t.detections.push_back(static_cast<DetectionId>(l * 100 + f));
        t.frames.push_back(f);
    }
    return t;
}

inline std::vector<GoldenDocument> golden_documents() {
    std::vector<GoldenDocument> out;

    std::vector<Quantity> t, v;
    for (std::size_t i = 0; i < 12; ++i) {
        t.emplace_back(0.25 * i, unit::h);
        v.emplace_back(1.5 * std::exp(0.6 * 0.25 * i), unit::um2);
    }
    const QuantitySeries growth("TSCA", t, v);
    out.push_back({"growth.svg", render_growth(growth, fit_loglinear(growth, Measure::TSCA))});

    const TrackletGraph lineage({golden_tracklet(1, std::nullopt, 0, 3, Fate::divided),
                                 golden_tracklet(2, 1, 4, 7, Fate::divided), golden_tracklet(3, 1, 4, 7, Fate::divided),
                                 golden_tracklet(4, 2, 8, 11, Fate::movie_end),
                                 golden_tracklet(5, 2, 8, 11, Fate::movie_end),
                                 golden_tracklet(6, 3, 8, 11, Fate::movie_end),
                                 golden_tracklet(7, 3, 8, 11, Fate::movie_end)});
    std::vector<Quantity> frames;
    for (std::size_t i = 0; i < 12; ++i) frames.emplace_back(0.25 * i, unit::h);
    out.push_back({"lineage.svg", render_lineage(lineage, frames)});

    IGRSeries a, b;
    a.label = 1;
    b.label = 2;
    for (std::size_t i = 0; i < 16; ++i) {
        a.times.emplace_back(0.125 * i, unit::h);
        b.times.emplace_back(0.125 * i, unit::h);
        a.igr.emplace_back(0.5 + 0.2 * std::sin(0.4 * i), unit::um2_per_h);
        b.igr.emplace_back(0.4 + 0.1 * std::cos(0.3 * i), unit::um2_per_h);
    }
    out.push_back({"igr.svg", render_igr({a, b}, {{Quantity(0.0, unit::h), Quantity(1.0, unit::h), "pre"},
                                                  {Quantity(1.0, unit::h), Quantity(2.0, unit::h), "post"}})});

    out.push_back({"rate_distribution.svg",
                   render_rate_distribution({{"CC", {{"r1", 0.58}, {"r2", 0.61}, {"r3", 0.60}}},
                                             {"TSCA", {{"r1", 0.59}, {"r2", 0.60}, {"r3", 0.605}}},
                                             {"TCA", {{"r1", 0.62}, {"r2", 0.66}, {"r3", 0.63}}}})});
    return out;
}

} // namespace mlci::test
