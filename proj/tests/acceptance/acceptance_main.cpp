// Acceptance suite: one PASS/FAIL line per criterion. Tolerances are fixed
// here and reported next to the measured values.
//
//   mlci_acceptance            run every criterion
//   mlci_acceptance 4 7        run selected criteria

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "../support/golden_fixtures.hpp"
#include "../support/lap_oracle.hpp"
#include "../support/test_support.hpp"
#include "mlci/batch.hpp"
#include "mlci/workflow.hpp"

using namespace mlci;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string name;
    std::function<Outcome()> run;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ReplicateSpec write_replicate(const fs::path& dir, const SimOutput& sim, const std::string& origin_id) {
    fs::create_directories(dir);
    write_simulation(dir, sim);
    ReplicateSpec r;
    r.origin_id = origin_id;
    r.stack = dir / "stack.raw";
    r.sidecar = dir / "sidecar.json";
    return r;
}

WorkflowParams default_params() {
    WorkflowParams p;
    p.threshold = ThresholdSource{};
    return p;
}

std::map<std::string, std::string> file_tree(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = test::slurp(e.path());
    }
    return out;
}

double rel_err(double got, double want) { return std::abs(got - want) / std::abs(want); }

// 1 -------------------------------------------------------------------------

Outcome growth_recovery() {
    SimScenario sc;
    sc.seed = 2024;
    sc.origin_id = "growth";
    sc.strains = {{Quantity(0.6, unit::per_h), {}, 0.0}};
    sc.n_initial_cells = 4;
    sc.a0 = Quantity(1.0, unit::um2);
    sc.a0_noise = 0.15; // asynchronous start, exact division threshold
    sc.a_div = Quantity(2.0, unit::um2);
    sc.a_div_noise = 0.0;
    sc.frame_interval = Quantity(15.0, unit::min);
    sc.n_frames = 40;
    sc.pixel_size = Quantity(0.2, unit::um);
    sc.cell_width = Quantity(0.8, unit::um);
    sc.height = 48;
    sc.width = 6000;

    test::TempDir dir("acc_growth");
    const ReplicateSpec r = write_replicate(dir / "data", simulate(sc), sc.origin_id);
    const auto t0 = std::chrono::steady_clock::now();
    const ReplicateReport rep = run_workflow(r, default_params(), dir / "out");
    const double secs = seconds_since(t0);
    if (!rep.ok()) return {false, "workflow status " + rep.status + ": " + rep.error};

    const auto fits = read_fits_json(dir / "out" / "fits.json");
    const double mu_tsca = fits.at("TSCA").mu.in(unit::per_h);
    const double mu_cc = fits.at("CC").mu.in(unit::per_h);
    const double r2 = fits.at("TSCA").r_squared;
    const bool pass = rel_err(mu_tsca, 0.6) <= 0.02 && rel_err(mu_cc, 0.6) <= 0.10 && r2 >= 0.999 && secs < 30.0;
    return {pass, fmt::format("mu_TSCA={:.5f} (tol 2%), mu_CC={:.5f} (tol 10%), R2_TSCA={:.6f} (>=0.999), "
                              "analyze {:.2f}s (<30s)",
                              mu_tsca, mu_cc, r2, secs)};
}

// 2 -------------------------------------------------------------------------

std::map<std::string, QuantitySeries> analyze_series(const SimScenario& sc, const fs::path& dir) {
    const ReplicateSpec r = write_replicate(dir / "data", simulate(sc), sc.origin_id);
    const ReplicateReport rep = run_workflow(r, default_params(), dir / "out");
    if (!rep.ok()) throw std::runtime_error("workflow " + rep.status + ": " + rep.error);
    return rep.series;
}

std::size_t distinct_values(const QuantitySeries& s) {
    std::set<double> v;
    for (const auto& q : s.values()) v.insert(q.value());
    return v.size();
}

Outcome staircase() {
    SimScenario sync = test::small_colony(77, 60);
    sync.a0_noise = 0.0;
    sync.a_div_noise = 0.0;
    sync.frame_interval = Quantity(5.0, unit::min);
    sync.width = 600;
    SimScenario noisy = sync;
    noisy.a0_noise = 0.2;
    noisy.a_div_noise = 0.1;

    test::TempDir dir("acc_stair");
    const auto s = analyze_series(sync, dir / "sync");
    const auto n = analyze_series(noisy, dir / "noisy");
    const QuantitySeries& cc = s.at("CC");
    const double final_cc = cc.values().back().value();
    const auto bound = static_cast<std::size_t>(std::ceil(std::log2(final_cc))) + 1;
    bool increasing = true;
    const auto& tsca = s.at("TSCA").values();
    for (std::size_t i = 1; i < tsca.size(); ++i) increasing = increasing && tsca[i] > tsca[i - 1];
    const std::size_t d_sync = distinct_values(cc), d_noisy = distinct_values(n.at("CC"));
    const bool pass = d_sync <= bound && increasing && d_noisy > d_sync;
    return {pass, fmt::format("sync: {} distinct CC values (bound {}, final CC {}), TSCA strictly increasing: {}; "
                              "noisy: {} distinct",
                              d_sync, bound, final_cc, increasing ? "yes" : "no", d_noisy)};
}

// 3 -------------------------------------------------------------------------

Outcome ordering_invariant() {
    std::mt19937_64 rng(303);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    test::TempDir dir("acc_order");
    std::size_t frames = 0, violations = 0, scenarios = 0;
    double worst = -1.0; // max (TSCA - TCA) / TCA
    while (scenarios < 100) {
        SimScenario sc;
        sc.seed = rng();
        sc.origin_id = fmt::format("order{}", scenarios);
        sc.strains = {{Quantity(0.3 + 0.7 * u(rng), unit::per_h), {}, 0.0}};
        sc.n_initial_cells = 1 + static_cast<std::size_t>(u(rng) * 6.0);
        sc.a0 = Quantity(0.8 + 0.6 * u(rng), unit::um2);
        sc.a0_noise = 0.3 * u(rng);
        sc.a_div = Quantity(2.0 * sc.a0.in(unit::um2), unit::um2);
        sc.a_div_noise = 0.15 * u(rng);
        sc.frame_interval = Quantity(3.0 + 12.0 * u(rng), unit::min);
        sc.n_frames = 8 + static_cast<std::size_t>(u(rng) * 12.0);
        sc.pixel_size = Quantity(0.1 + 0.15 * u(rng), unit::um);
        sc.cell_width = Quantity(0.6 + 0.4 * u(rng), unit::um);
        sc.height = 120;
        sc.width = 900;
        std::optional<SimOutput> sim;
        try {
            sim.emplace(simulate(sc));
        } catch (const ScenarioOverflow&) {
            continue; // draw another scenario
        }
        const ReplicateSpec r = write_replicate(dir / sc.origin_id, *sim, sc.origin_id);
        WorkflowParams p = default_params();
        p.min_frames = 1;
        const ReplicateReport rep = run_workflow(r, p, dir / (sc.origin_id + "_out"));
        if (!rep.ok()) return {false, sc.origin_id + ": " + rep.status + ": " + rep.error};
        const auto& tsca = rep.series.at("TSCA").values();
        const auto& tca = rep.series.at("TCA").values();
        for (std::size_t i = 0; i < tsca.size(); ++i) {
            ++frames;
            if (tsca[i] > tca[i]) ++violations;
            worst = std::max(worst, (tsca[i] - tca[i]).value() / tca[i].value());
        }
        ++scenarios;
        fs::remove_all(dir / sc.origin_id);
        fs::remove_all(dir / (sc.origin_id + "_out"));
    }
    return {violations == 0, fmt::format("{} scenarios, {} frames, {} frames with TSCA > TCA, max (TSCA-TCA)/TCA = "
                                         "{:.3g}",
                                         scenarios, frames, violations, worst)};
}

// 4 -------------------------------------------------------------------------

using Edge = std::pair<DetectionId, DetectionId>;

void truth_edges(const TrackletGraph& g, std::set<Edge>& links, std::set<Edge>& divisions) {
    for (const Tracklet& t : g.tracklets()) {
        for (std::size_t i = 1; i < t.detections.size(); ++i) links.insert({t.detections[i - 1], t.detections[i]});
        if (t.parent) divisions.insert({g.at(*t.parent).detections.back(), t.detections.front()});
    }
}

/// Label-free canonical form of a lineage forest: each node is encoded by its
/// length and the sorted encodings of its children.
std::string canonical_forest(const TrackletGraph& g) {
    const std::function<std::string(TrackletLabel)> enc = [&](TrackletLabel l) {
        std::vector<std::string> kids;
        for (const auto k : g.children(l)) kids.push_back(enc(k));
        std::sort(kids.begin(), kids.end());
        std::string s = "(" + std::to_string(g.at(l).length()) + ":" + std::to_string(g.at(l).birth_frame());
        for (const auto& k : kids) s += k;
        return s + ")";
    };
    std::vector<std::string> roots;
    for (const auto r : g.roots()) roots.push_back(enc(r));
    std::sort(roots.begin(), roots.end());
    std::string out;
    for (const auto& r : roots) out += r;
    return out;
}

Outcome tracking_exactness() {
    struct Case {
        std::uint64_t seed;
        std::size_t cells;
        std::size_t frames;
        double interval_min;
    };
    const Case cases[] = {{41, 1, 110, 3.0}, {42, 4, 110, 3.0}, {43, 8, 110, 3.0}, {44, 16, 110, 3.0}};
    std::size_t links_total = 0, links_ok = 0, div_total = 0, div_ok = 0, extra = 0, iso_ok = 0, max_cells = 0;
    std::vector<std::string> notes;
    for (const Case& c : cases) {
        SimScenario sc = test::small_colony(c.seed, c.frames);
        sc.n_initial_cells = c.cells;
        sc.frame_interval = Quantity(c.interval_min, unit::min);
        sc.height = 6 + 10 * std::max<std::size_t>(c.cells, 1) + 4;
        sc.width = 420;
        while (simulate(sc).truth.frames.back().size() > 128) sc.n_frames -= 2;
        const SimOutput sim = simulate(sc);
        const std::size_t final_cells = sim.truth.frames.back().size();
        max_cells = std::max(max_cells, final_cells);

        const Overlay ov = segment_threshold(sim.stack, 0, 0.5, Polarity::bright);
        const TrackingGraph tg = track(ov, sim.stack.metadata(), TrackParams{});
        const TrackletGraph lineage = build_tracklets(tg, ov);

        std::set<Edge> want_links, want_div, got_links, got_div;
        truth_edges(sim.truth.lineage, want_links, want_div);
        for (const auto& [from, to] : tg.edges()) {
            (tg.out_degree(from) == 2 ? got_div : got_links).insert({from, to});
        }
        for (const auto& e : want_links) links_ok += got_links.count(e);
        for (const auto& e : want_div) div_ok += got_div.count(e);
        links_total += want_links.size();
        div_total += want_div.size();
        for (const auto& e : got_links) extra += want_links.count(e) ? 0 : 1;
        for (const auto& e : got_div) extra += want_div.count(e) ? 0 : 1;
        const bool iso = canonical_forest(lineage) == canonical_forest(sim.truth.lineage) &&
                         lineage.size() == sim.truth.lineage.size();
        iso_ok += iso ? 1 : 0;
        notes.push_back(fmt::format("{} cells/{} tracklets{}", final_cells, lineage.size(), iso ? "" : " NOT isomorphic"));
    }
    const bool pass = links_ok == links_total && div_ok == div_total && extra == 0 && iso_ok == std::size(cases);
    std::string joined;
    for (const auto& n : notes) joined += (joined.empty() ? "" : ", ") + n;
    return {pass, fmt::format("links {}/{} ({:.2f}%), divisions {}/{} ({:.2f}%), spurious edges {}, isomorphic "
                              "lineages {}/{}, largest colony {} cells [{}]",
                              links_ok, links_total, 100.0 * links_ok / links_total, div_ok, div_total,
                              100.0 * div_ok / div_total, extra, iso_ok, std::size(cases), max_cells, joined)};
}

// 5 -------------------------------------------------------------------------

Outcome lap_optimality() {
    std::mt19937 rng(5150);
    std::size_t exact = 0, rectangular = 0, prefer_none = 0;
    const std::size_t trials = 200;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        const std::size_t r = 1 + rng() % 7, c = 1 + rng() % 7;
        rectangular += r != c ? 1 : 0;
        CostMatrix m(r, c);
        // Integer costs keep every sum exact; a third of the cases price all
        // pairs above two no-assign costs so that leaving everything
        // unassigned is optimal.
        const bool expensive = trial % 3 == 0;
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) m(i, j) = static_cast<double>(expensive ? 11 + rng() % 20 : rng() % 16);
        }
        const double no_assign = 5.0;
        const double want = test::brute_force_lap(m, no_assign);
        const Assignment got = lap_solve(m, no_assign);
        exact += got.total_cost == want ? 1 : 0;
        if (expensive && got.matched() == 0) ++prefer_none;
    }
    return {exact == trials, fmt::format("{}/{} exact optima ({} rectangular, {} no-assign-preferred solved unmatched)",
                                         exact, trials, rectangular, prefer_none)};
}

// 6 -------------------------------------------------------------------------

SimScenario coculture(std::uint64_t seed, double mu0, double mu1, std::size_t frames) {
    SimScenario sc;
    sc.seed = seed;
    sc.origin_id = fmt::format("co{}", seed);
    sc.fluor_channels = {"gfp", "rfp"};
    // centers (0.8, 0.1) and (0.1, 0.8) with per-pixel std 0.05: 14 std apart
    sc.strains = {{Quantity(mu0, unit::per_h), {0.8, 0.1}, 0.05}, {Quantity(mu1, unit::per_h), {0.1, 0.8}, 0.05}};
    sc.n_initial_cells = 8;
    sc.a0 = Quantity(1.0, unit::um2);
    sc.a0_noise = 0.2;
    sc.a_div = Quantity(2.0, unit::um2);
    sc.a_div_noise = 0.05;
    sc.frame_interval = Quantity(3.0, unit::min);
    sc.n_frames = frames;
    sc.pixel_size = Quantity(0.2, unit::um);
    sc.cell_width = Quantity(0.8, unit::um);
    sc.height = 90;
    sc.width = 320;
    return sc;
}

struct CoResult {
    double mu0 = 0.0, mu1 = 0.0;
    std::size_t classified = 0, correct = 0;
};

CoResult run_coculture(const SimScenario& sc, const fs::path& dir) {
    const SimOutput sim = simulate(sc);
    std::map<DetectionId, int> truth_strain;
    for (const auto& frame : sim.truth.frames) {
        for (const auto& cell : frame) truth_strain[cell.detection_id] = cell.strain;
    }
    const ReplicateSpec r = write_replicate(dir / "data", sim, sc.origin_id);
    WorkflowParams p = default_params();
    p.analyses.co_culture = true;
    const ReplicateReport rep = run_workflow(r, p, dir / "out");
    if (!rep.ok()) throw std::runtime_error(sc.origin_id + ": " + rep.status + ": " + rep.error);
    CoResult out;
    out.mu0 = rep.fits.at("strain0_TSCA").mu.in(unit::per_h);
    out.mu1 = rep.fits.at("strain1_TSCA").mu.in(unit::per_h);
    for (const auto& [label, strain] : rep.strains->strain) {
        ++out.classified;
        bool all = true;
        for (const auto d : rep.lineage.at(label).detections) all = all && truth_strain.at(d) == strain;
        out.correct += all ? 1 : 0;
    }
    return out;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (const double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0.0;
    for (const double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

Outcome coculture_split() {
    test::TempDir dir("acc_co");
    const CoResult a = run_coculture(coculture(606, 0.46, 0.49, 120), dir / "distinct");
    const double e0 = rel_err(a.mu0, 0.46), e1 = rel_err(a.mu1, 0.49);
    std::vector<double> m0, m1;
    std::size_t classified = a.classified, correct = a.correct;
    for (std::uint64_t k = 0; k < 8; ++k) {
        const CoResult b = run_coculture(coculture(700 + k, 0.48, 0.48, 100), dir / fmt::format("equal{}", k));
        m0.push_back(b.mu0);
        m1.push_back(b.mu1);
        classified += b.classified;
        correct += b.correct;
    }
    const double diff = std::abs(mean_of(m0) - mean_of(m1));
    const double pooled = std::sqrt((sample_std(m0) * sample_std(m0) + sample_std(m1) * sample_std(m1)) / 2.0);
    const bool pass = correct == classified && e0 <= 0.03 && e1 <= 0.03 && diff < pooled;
    return {pass, fmt::format("classification {}/{} tracklets; mu0={:.4f} (err {:.2f}%), mu1={:.4f} (err {:.2f}%), "
                              "tol 3%; equal rates x8: |mean0-mean1|={:.4g} < pooled std {:.4g}",
                              correct, classified, a.mu0, 100 * e0, a.mu1, 100 * e1, diff, pooled)};
}

// 7 -------------------------------------------------------------------------

Outcome igr_switch() {
    test::TempDir dir("acc_igr");
    const double t_switch = 1.5;
    std::size_t cells = 0, within = 0;
    double worst = 0.0;
    for (std::uint64_t k = 0; k < 5; ++k) {
        SimScenario sc = test::small_colony(900 + k, 80);
        sc.origin_id = fmt::format("switch{}", k);
        sc.n_initial_cells = 6;
        sc.height = 70;
        sc.width = 300;
        sc.rate_schedule = {{Quantity(t_switch, unit::h), 0.5}};
        const ReplicateSpec r = write_replicate(dir / sc.origin_id, simulate(sc), sc.origin_id);
        WorkflowParams p = default_params();
        p.analyses.single_cell_igr = true;
        p.igr_sigma_frames = 4.0;
        const ReplicateReport rep = run_workflow(r, p, dir / (sc.origin_id + "_out"));
        if (!rep.ok()) return {false, sc.origin_id + ": " + rep.status + ": " + rep.error};
        const double dt = sc.frame_interval.in(unit::h);
        for (const IGRSeries& s : rep.igr) {
            if (s.times.size() < 2) continue;
            // sample i covers [t_i, t_i + dt]; the cell spans the switch when
            // rates before and after it both enter the series
            if (!(s.times.front().in(unit::h) < t_switch && s.times.back().in(unit::h) >= t_switch)) continue;
            ++cells;
            std::size_t steepest = 0;
            double drop = 0.0;
            for (std::size_t i = 0; i + 1 < s.igr.size(); ++i) {
                const double d = (s.igr[i + 1] - s.igr[i]).value();
                if (d < drop) {
                    drop = d;
                    steepest = i;
                }
            }
            if (drop >= 0.0) continue; // no decrease at all
            // the steepest decrease between samples i and i+1 falls on frame
            // index(t_i) + 1; compared in whole frames
            const long steep_frame = std::lround(s.times[steepest].in(unit::h) / dt) + 1;
            const double offset = static_cast<double>(std::labs(steep_frame - std::lround(t_switch / dt)));
            worst = std::max(worst, offset);
            within += offset <= 3.0 ? 1 : 0;
        }
    }
    const bool pass = cells >= 30 && within == cells;
    return {pass, fmt::format("{} full-cycle cells span the switch over 5 replicates; {} with the steepest IGR "
                              "decrease within 3 frames (worst offset {:.0f} frames)",
                              cells, within, worst)};
}

// 8 -------------------------------------------------------------------------

Outcome igr_fidelity() {
    std::mt19937 rng(88);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::size_t exact_fail = 0, conv_fail = 0, samples = 0;
    double worst_rel = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 5 + rng() % 60;
        const double dt_min = 1.0 + 14.0 * u(rng);
        std::vector<Quantity> areas;
        double a = 0.5 + u(rng);
        for (std::size_t i = 0; i < n; ++i) {
            areas.emplace_back(a, unit::um2);
            a *= std::exp(0.05 * u(rng)) * (u(rng) < 0.05 ? 0.5 : 1.0);
        }
        const Quantity dt(dt_min, unit::min);
        const IGRSeries raw = igr(areas, dt, 0.0);
        const IGRSeries smooth = igr(areas, dt, 4.0);
        // oracle: (a[t+1] - a[t]) / (t[t+1] - t[t]) in um2/h
        std::vector<double> want;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double t0 = static_cast<double>(i) * dt.value(), t1 = static_cast<double>(i + 1) * dt.value();
            want.push_back((areas[i + 1].value() - areas[i].value()) / (t1 - t0));
        }
        // direct convolution with reflected indices, radius int(4 sigma + 0.5)
        const int radius = static_cast<int>(4.0 * 4.0 + 0.5);
        std::vector<double> w;
        double norm = 0.0;
        for (int k = -radius; k <= radius; ++k) {
            w.push_back(std::exp(-0.5 * k * k / 16.0));
            norm += w.back();
        }
        const int m = static_cast<int>(want.size());
        for (int i = 0; i < m; ++i) {
            ++samples;
            if (raw.igr[static_cast<std::size_t>(i)].in(unit::um2_per_h) != want[static_cast<std::size_t>(i)]) {
                ++exact_fail;
            }
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) {
                int j = i + k;
                // half-sample symmetric reflection, repeated for short inputs
                while (j < 0 || j >= m) j = j < 0 ? -j - 1 : 2 * m - j - 1;
                acc += w[static_cast<std::size_t>(k + radius)] / norm * want[static_cast<std::size_t>(j)];
            }
            const double got = smooth.igr[static_cast<std::size_t>(i)].in(unit::um2_per_h);
            const double rel = std::abs(got - acc) / std::max(std::abs(acc), 1e-300);
            worst_rel = std::max(worst_rel, rel);
            conv_fail += rel <= 1e-9 ? 0 : 1;
        }
    }
    return {exact_fail == 0 && conv_fail == 0,
            fmt::format("{} samples: sigma 0 exact mismatches {}, sigma 4 max relative deviation {:.2e} (tol 1e-9)",
                        samples, exact_fail, worst_rel)};
}

// 9 -------------------------------------------------------------------------

Outcome unit_safety() {
    const Unit units[] = {unit::one, unit::um, unit::um2, unit::h, unit::min, unit::per_h, unit::um2_per_h, unit::au};
    std::mt19937 rng(909);
    std::uniform_real_distribution<double> u(-100.0, 100.0);
    std::size_t mixed = 0, raised = 0, same_ok = 0, same = 0;
    for (int trial = 0; trial < 2000; ++trial) {
        const Unit& ua = units[rng() % std::size(units)];
        const Unit& ub = units[rng() % std::size(units)];
        const Quantity a(u(rng), ua), b(u(rng), ub);
        const auto ops = {std::function<void()>([&] { (void)(a + b); }), std::function<void()>([&] { (void)(a - b); }),
                          std::function<void()>([&] { (void)(a < b); }), std::function<void()>([&] { (void)(a == b); }),
                          std::function<void()>([&] { (void)(a >= b); })};
        for (const auto& op : ops) {
            bool threw = false;
            try {
                op();
            } catch (const DimensionMismatch&) {
                threw = true;
            }
            if (ua.dimension != ub.dimension) {
                ++mixed;
                raised += threw ? 1 : 0;
            } else {
                ++same;
                same_ok += threw ? 0 : 1;
            }
        }
    }

    std::size_t conv = 0, conv_ok = 0;
    for (int trial = 0; trial < 2000; ++trial) {
        const double px = static_cast<double>(rng() % 100000);
        const double ps = 0.05 + 0.001 * static_cast<double>(rng() % 400);
        const Quantity len = px_to_physical(px, 1, Quantity(ps, unit::um));
        const Quantity area = px_to_physical(px, 2, Quantity(ps, unit::um));
        conv += 2;
        conv_ok += (len.dimension() == dim::length && len.in(unit::um) == px * ps) ? 1 : 0;
        conv_ok += (area.dimension() == dim::area && area.in(unit::um2) == px * (ps * ps)) ? 1 : 0;
    }

    // exported columns carry their unit tokens
    test::TempDir dir("acc_units");
    SimScenario sc = test::small_colony(9, 10);
    sc.fluor_channels = {"gfp"};
    sc.strains[0].fluor_means = {0.5};
    const ReplicateSpec r = write_replicate(dir / "data", simulate(sc), "units");
    WorkflowParams p = default_params();
    p.analyses.single_cell_igr = true;
    const ReplicateReport rep = run_workflow(r, p, dir / "out");
    const auto header = [&](const char* f) {
        const std::string text = test::slurp(dir / "out" / f);
        return text.substr(0, text.find('\n'));
    };
    const std::string want_det = "id,frame,time_h,label,area_um2,cx_um,cy_um,fluor_gfp_au";
    const std::string want_trk =
        "label,parent,birth_h,end_h,lifetime_h,birth_area_um2,end_area_um2,fate,n_detections,medfluor_gfp_au";
    const std::string want_igr = "label,time_h,igr_um2_per_h";
    const bool headers = rep.ok() && header("detections.csv") == want_det && header("tracklets.csv") == want_trk &&
                         header("igr.csv") == want_igr;
    const json report = json::parse(test::slurp(dir / "out" / "report.json"));
    const bool series_units = report["series"]["TSCA"]["unit"] == "um2" && report["series"]["TCA"]["unit"] == "um2" &&
                              report["series"]["CC"]["unit"] == "";

    const bool pass = raised == mixed && same_ok == same && conv_ok == conv && headers && series_units;
    return {pass, fmt::format("cross-dimension ops raising DimensionMismatch {}/{}, same-dimension ops accepted {}/{}, "
                              "exact px conversions {}/{}, CSV unit headers {}, series unit tokens {}",
                              raised, mixed, same_ok, same, conv_ok, conv, headers ? "ok" : "WRONG",
                              series_units ? "ok" : "WRONG")};
}

// 10 ------------------------------------------------------------------------

Outcome batch_aggregation() {
    test::TempDir dir("acc_batch");
    std::mt19937_64 rng(1010);
    std::uniform_real_distribution<double> mu_dist(0.52, 0.57);
    BatchConfig cfg;
    cfg.workflow = default_params();
    cfg.out_dir = dir / "out";
    cfg.jobs = 2;
    std::map<std::string, double> programmed;
    for (int k = 0; k < 5; ++k) {
        SimScenario sc = test::small_colony(1100 + k, 100);
        sc.origin_id = fmt::format("rep{}", k);
        sc.strains[0].mu_star = Quantity(mu_dist(rng), unit::per_h);
        sc.n_initial_cells = 8;
        sc.height = 90;
        sc.width = 300;
        programmed[sc.origin_id] = sc.strains[0].mu_star.in(unit::per_h);
        cfg.replicates.push_back(write_replicate(dir / "data" / sc.origin_id, simulate(sc), sc.origin_id));
    }
    run_batch(cfg);

    const json agg = json::parse(test::slurp(cfg.out_dir / "aggregate" / "aggregate.json"));
    double worst = 0.0;
    std::size_t within = 0;
    std::vector<double> from_files;
    for (const auto& [id, mu_star] : programmed) {
        const double mu = read_fits_json(cfg.out_dir / id / "fits.json").at("TSCA").mu.in(unit::per_h);
        from_files.push_back(mu);
        worst = std::max(worst, rel_err(mu, mu_star));
        within += rel_err(mu, mu_star) <= 0.05 ? 1 : 0;
    }
    const double mean_dev = std::abs(agg["measures"]["TSCA"]["mean_per_h"].get<double>() - mean_of(from_files));
    const double std_dev = std::abs(agg["measures"]["TSCA"]["std_per_h"].get<double>() - sample_std(from_files));
    const bool listed = agg["measures"]["TSCA"]["values"].size() == 5;
    const bool pass = within == 5 && mean_dev <= 1e-12 && std_dev <= 1e-12 && listed;
    return {pass, fmt::format("{}/5 replicate fits within 5% of programmed mu (worst {:.2f}%); aggregate mean/std "
                              "recomputed from fits.json differ by {:.1e}/{:.1e} (tol 1e-12)",
                              within, 100 * worst, mean_dev, std_dev)};
}

// 11 ------------------------------------------------------------------------

Outcome determinism() {
    test::TempDir dir("acc_det");
    BatchConfig cfg;
    cfg.workflow = default_params();
    cfg.workflow.analyses.single_cell_igr = true;
    cfg.workflow.analyses.co_culture = true;
    for (int k = 0; k < 3; ++k) {
        SimScenario sc = coculture(1200 + k, 0.5, 0.55, 50);
        cfg.replicates.push_back(write_replicate(dir / "data" / sc.origin_id, simulate(sc), sc.origin_id));
    }
    // the simulator itself is reproducible
    const SimScenario again = coculture(1200, 0.5, 0.55, 50);
    write_replicate(dir / "data_again", simulate(again), again.origin_id);
    const bool sim_same = file_tree(dir / "data" / again.origin_id) == file_tree(dir / "data_again");

    const auto run = [&](const std::string& name, std::size_t jobs, std::size_t threads) {
        BatchConfig c = cfg;
        c.out_dir = dir / name;
        c.jobs = jobs;
        c.workflow.threads = threads;
        run_batch(c);
        return file_tree(c.out_dir);
    };
    const auto a = run("run1", 1, 1);
    const auto b = run("run2", 1, 1);
    const auto c = run("jobs4", 4, 4);
    std::size_t svg = 0, csv = 0, js = 0;
    for (const auto& [name, bytes] : a) {
        svg += name.ends_with(".svg");
        csv += name.ends_with(".csv");
        js += name.ends_with(".json") || name.ends_with(".jsonl");
    }
    const bool pass = sim_same && a == b && a == c;
    return {pass, fmt::format("{} files ({} SVG, {} CSV, {} JSON): rerun identical {}, jobs 1 vs 4 identical {}, "
                              "simulator rerun identical {}",
                              a.size(), svg, csv, js, a == b ? "yes" : "no", a == c ? "yes" : "no",
                              sim_same ? "yes" : "no")};
}

// 12 ------------------------------------------------------------------------

Outcome golden_svgs() {
    std::size_t same = 0, total = 0;
    std::string bad;
    for (const auto& doc : test::golden_documents()) {
        ++total;
        const fs::path path = fs::path(MLCI_GOLDEN_DIR) / doc.file;
        if (fs::exists(path) && test::slurp(path) == doc.svg) ++same;
        else bad += " " + doc.file;
    }
    return {same == total && total >= 3,
            fmt::format("{}/{} documents byte-identical to tests/golden{}", same, total, bad.empty() ? "" : ":" + bad)};
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria{
        {1, "growth-rate recovery", growth_recovery},
        {2, "staircase property", staircase},
        {3, "TSCA <= TCA ordering", ordering_invariant},
        {4, "tracking exactness", tracking_exactness},
        {5, "LAP optimality", lap_optimality},
        {6, "co-culture split", coculture_split},
        {7, "IGR switch response", igr_switch},
        {8, "IGR formula fidelity", igr_fidelity},
        {9, "unit safety", unit_safety},
        {10, "batch aggregation", batch_aggregation},
        {11, "determinism", determinism},
        {12, "golden SVGs", golden_svgs},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    int failed = 0;
    for (const auto& c : criteria) {
        if (!selected.empty() && !selected.contains(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::cout << fmt::format("{} [{:2}] {}: {} ({:.1f}s)", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail,
                                 seconds_since(t0))
                  << std::endl;
    }
    std::cout << (failed == 0 ? "all criteria passed" : fmt::format("{} criteria failed", failed)) << std::endl;
    return failed == 0 ? 0 : 1;
}
