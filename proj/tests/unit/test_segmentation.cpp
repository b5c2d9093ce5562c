#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <stack>

#include "../support/test_support.hpp"
#include "mlci/segmentation.hpp"

using namespace mlci;

namespace {

StackMetadata meta1() {
    StackMetadata m;
    m.pixel_size = Quantity(0.5, unit::um);
    m.frame_interval = Quantity(1.0, unit::min);
    m.channel_names = {"phase"};
    return m;
}

ImageStack from_masks(const std::vector<std::vector<int>>& frames, std::size_t h, std::size_t w) {
    std::vector<float> v;
    for (const auto& f : frames) {
        for (const int x : f) v.push_back(x ? 1.0F : 0.0F);
    }
    return ImageStack({frames.size(), h, w, 1}, v, meta1());
}

/// Independent 8-connected flood fill: set of pixel sets, each as flat indices.
std::set<std::vector<int>> flood_components(const std::vector<int>& mask, int h, int w) {
    std::vector<int> seen(mask.size(), 0);
    std::set<std::vector<int>> out;
    for (int i = 0; i < h * w; ++i) {
        if (!mask[i] || seen[i]) continue;
        std::vector<int> comp;
        std::stack<int> todo;
        todo.push(i);
        seen[i] = 1;
        while (!todo.empty()) {
            const int p = todo.top();
            todo.pop();
            comp.push_back(p);
            const int r = p / w, c = p % w;
            for (int dr = -1; dr <= 1; ++dr) {
                for (int dc = -1; dc <= 1; ++dc) {
                    const int rr = r + dr, cc = c + dc;
                    if (rr < 0 || cc < 0 || rr >= h || cc >= w) continue;
                    const int q = rr * w + cc;
                    if (mask[q] && !seen[q]) {
                        seen[q] = 1;
                        todo.push(q);
                    }
                }
            }
        }
        std::sort(comp.begin(), comp.end());
        out.insert(comp);
    }
    return out;
}

std::set<std::vector<int>> overlay_components(const Overlay& o, std::size_t frame, int w) {
    std::set<std::vector<int>> out;
    for (const auto& d : o.frames[frame]) {
        std::vector<int> comp;
        for (const auto& p : d.pixels) comp.push_back(p.row * w + p.col);
        std::sort(comp.begin(), comp.end());
        out.insert(comp);
    }
    return out;
}

} // namespace

TEST_CASE("threshold segmentation matches a flood-fill oracle on random masks") {
    std::mt19937 rng(7);
    for (int trial = 0; trial < 60; ++trial) {
        const int h = 5 + trial % 17, w = 4 + (trial * 7) % 19;
        std::bernoulli_distribution on(0.2 + 0.01 * (trial % 40));
        std::vector<int> mask(static_cast<std::size_t>(h * w));
        for (auto& m : mask) m = on(rng) ? 1 : 0;
        const ImageStack s = from_masks({mask}, static_cast<std::size_t>(h), static_cast<std::size_t>(w));
        const Overlay o = segment_threshold(s, 0, 0.5, Polarity::bright);
        CHECK(overlay_components(o, 0, w) == flood_components(mask, h, w));
        std::vector<int> inverse(mask.size());
        for (std::size_t i = 0; i < mask.size(); ++i) inverse[i] = 1 - mask[i];
        const Overlay dark = segment_threshold(s, 0, 0.5, Polarity::dark);
        CHECK(overlay_components(dark, 0, w) == flood_components(inverse, h, w));
    }
}

TEST_CASE("diagonal neighbours join one detection") {
    const ImageStack s = from_masks({{1, 0, 0, 1}}, 2, 2);
    const Overlay o = segment_threshold(s, 0, 0.5, Polarity::bright);
    REQUIRE(o.frames[0].size() == 1);
    CHECK(o.frames[0][0].area_px == 2.0);
}

TEST_CASE("ids run in (frame, first pixel) order and ignore threads") {
    std::mt19937 rng(3);
    std::bernoulli_distribution on(0.35);
    std::vector<std::vector<int>> frames(6, std::vector<int>(30 * 30));
    for (auto& f : frames) {
        for (auto& x : f) x = on(rng) ? 1 : 0;
    }
    const ImageStack s = from_masks(frames, 30, 30);
    const Overlay a = segment_threshold(s, 0, 0.5, Polarity::bright, 1);
    const Overlay b = segment_threshold(s, 0, 0.5, Polarity::bright, 4);
    DetectionId expect = 1;
    for (std::size_t t = 0; t < a.frames.size(); ++t) {
        REQUIRE(a.frames[t].size() == b.frames[t].size());
        int prev_first = -1;
        for (std::size_t i = 0; i < a.frames[t].size(); ++i) {
            const auto& d = a.frames[t][i];
            CHECK(d.id == expect++);
            CHECK(d.frame == t);
            const int first = d.pixels.front().row * 30 + d.pixels.front().col;
            CHECK(first > prev_first);
            prev_first = first;
            CHECK(d.pixels == b.frames[t][i].pixels);
            CHECK(d.contour == b.frames[t][i].contour);
        }
    }
}

TEST_CASE("contours run clockwise along pixel corners") {
    const std::vector<Pixel> one{{2, 3}};
    const auto c = trace_outer_boundary(one);
    REQUIRE(c.size() == 4);
    CHECK(c[0] == Point{3, 2});
    CHECK(c[1] == Point{4, 2});
    CHECK(c[2] == Point{4, 3});
    CHECK(c[3] == Point{3, 3});
    CHECK(polygon_area(c) == 1.0);

    // L shape: six corners, area 3
    const std::vector<Pixel> ell{{0, 0}, {1, 0}, {1, 1}};
    const auto l = trace_outer_boundary(ell);
    CHECK(l.size() == 6);
    CHECK(polygon_area(l) == 3.0);

    // signed shoelace in screen coordinates is positive for clockwise order
    double s = 0.0;
    for (std::size_t i = 0; i < l.size(); ++i) {
        const auto& p = l[i];
        const auto& q = l[(i + 1) % l.size()];
        s += p.x * q.y - q.x * p.y;
    }
    CHECK(s > 0.0);
}

TEST_CASE("rectangle contour has four corners and exact area") {
    std::vector<Pixel> rect;
    for (int r = 4; r < 8; ++r) {
        for (int c = 10; c < 17; ++c) rect.push_back({r, c});
    }
    const auto c = trace_outer_boundary(rect);
    CHECK(c.size() == 4);
    CHECK(polygon_area(c) == 28.0);
}

TEST_CASE("property: outer contour area bounds the pixel count") {
    std::mt19937 rng(11);
    std::bernoulli_distribution on(0.55);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<int> mask(12 * 12);
        for (auto& m : mask) m = on(rng) ? 1 : 0;
        const ImageStack s = from_masks({mask}, 12, 12);
        const Overlay o = segment_threshold(s, 0, 0.5, Polarity::bright);
        for (const auto& d : o.frames[0]) {
            if (d.pixels.size() < 2) continue;
            CHECK(polygon_area(d.contour) >= d.area_px - 1e-9);
            for (const auto& p : d.contour) {
                CHECK(p.x == std::floor(p.x));
                CHECK(p.y == std::floor(p.y));
            }
        }
    }
}

TEST_CASE("polygon_area needs three vertices") {
    const std::vector<Point> two{{0, 0}, {1, 1}};
    CHECK_THROWS_AS(polygon_area(two), InvalidInput);
}

TEST_CASE("label ingestion splits disconnected labels") {
    LabelStack ls{{1, 3, 5, 1}, {1, 1, 0, 2, 2,
                                 0, 0, 0, 0, 0,
                                 1, 0, 0, 2, 2}};
    const IngestResult r = ingest_label_masks(ls);
    // label 1: {(0,0),(0,1)} and {(2,0)}; label 2: two separate pairs
    CHECK(r.overlay.frames[0].size() == 4);
    CHECK(r.split_labels == 2);
    CHECK(r.overlay.frames[0][0].area_px == 2.0);
}

TEST_CASE("size filter works in physical area") {
    const ImageStack s = from_masks({{1, 0, 1, 1, 0, 0, 0, 0, 0, 0, 1, 1,
                                      0, 0, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0}},
                                    2, 12);
    const Overlay o = segment_threshold(s, 0, 0.5, Polarity::bright);
    REQUIRE(o.frames[0].size() == 3); // 1 px, 4 px, 2 px
    const Quantity px(0.5, unit::um);
    const Overlay kept = size_filter(o, Quantity(0.5, unit::um2), Quantity(1.0, unit::um2), px);
    REQUIRE(kept.frames[0].size() == 2);
    CHECK(kept.frames[0][0].area_px == 4.0);
    CHECK(kept.frames[0][1].area_px == 2.0);
    CHECK_THROWS_AS(size_filter(o, Quantity(0.5, unit::um), Quantity(1.0, unit::um2), px), DimensionMismatch);
}

TEST_CASE("overlay interchange round trip") {
    mlci::test::TempDir dir("overlay");
    std::mt19937 rng(5);
    std::bernoulli_distribution on(0.3);
    std::vector<std::vector<int>> frames(3, std::vector<int>(16 * 20));
    for (auto& f : frames) {
        for (auto& x : f) x = on(rng) ? 1 : 0;
    }
    const Overlay o = segment_threshold(from_masks(frames, 16, 20), 0, 0.5, Polarity::bright);
    write_overlay_jsonl(dir / "o.jsonl", o);
    write_masks_rle(dir / "m.rle", o);
    const Overlay back = read_overlay(dir / "o.jsonl", dir / "m.rle", 16, 20, 3);
    REQUIRE(back.frames.size() == 3);
    for (std::size_t t = 0; t < 3; ++t) {
        REQUIRE(back.frames[t].size() == o.frames[t].size());
        for (std::size_t i = 0; i < o.frames[t].size(); ++i) {
            CHECK(back.frames[t][i].id == o.frames[t][i].id);
            CHECK(back.frames[t][i].pixels == o.frames[t][i].pixels);
            CHECK(back.frames[t][i].contour == o.frames[t][i].contour);
            CHECK(back.frames[t][i].centroid_px == o.frames[t][i].centroid_px);
        }
    }
    // corrupt one area field
    std::string text = mlci::test::slurp(dir / "o.jsonl");
    const auto pos = text.find("\"area_px\":");
    text.insert(pos + 10, "9");
    mlci::test::spit(dir / "bad.jsonl", text);
    CHECK_THROWS_AS(read_overlay(dir / "bad.jsonl", dir / "m.rle", 16, 20, 3), InconsistentInput);
}
