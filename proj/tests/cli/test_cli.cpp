#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <json.hpp>
#include <sys/wait.h>

#include "../support/test_support.hpp"

using namespace mlci;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string output; // stdout and stderr
};

Run mlci_cli(const std::string& args) {
    const std::string cmd = std::string(MLCI_EXE) + " " + args + " 2>&1";
    Run r;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

std::map<std::string, std::string> tree(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = test::slurp(e.path());
    }
    return out;
}

SimScenario scenario(std::uint64_t seed, double mu) {
    SimScenario sc = test::small_colony(seed, 40);
    sc.origin_id = "rep" + std::to_string(seed);
    sc.strains[0].mu_star = Quantity(mu, unit::per_h);
    sc.frame_interval = Quantity(6.0, unit::min);
    sc.width = 400;
    return sc;
}

/// Simulates through the CLI into dir/<origin_id>.
fs::path simulate_cli(const fs::path& dir, const SimScenario& sc) {
    const fs::path cfg = dir / (sc.origin_id + ".scenario.json");
    test::spit(cfg, scenario_to_json(sc));
    const fs::path data = dir / sc.origin_id;
    const Run r = mlci_cli("simulate --config " + q(cfg) + " --out " + q(data) + " --log error");
    REQUIRE_MESSAGE(r.code == 0, r.output);
    return data;
}

fs::path analyze_config(const fs::path& dir, const std::string& id, const fs::path& data, const json& extra = json::object()) {
    json doc{{"replicate", {{"origin_id", id}, {"stack", (data / "stack.raw").string()}}},
             {"workflow", {{"filters", {{"min_frames", 1}}}}}};
    doc.update(extra, true);
    const fs::path cfg = dir / (id + ".analyze.json");
    test::spit(cfg, doc.dump(2));
    return cfg;
}

} // namespace

TEST_CASE("every subcommand has --help") {
    for (const char* sub : {"", "analyze", "batch", "simulate", "report"}) {
        const Run r = mlci_cli(std::string(sub) + " --help");
        CHECK_MESSAGE(r.code == 0, sub);
        CHECK((r.output.find("--out") != std::string::npos || std::string(sub).empty()));
    }
    CHECK(mlci_cli("").code == 2);
    CHECK(mlci_cli("frobnicate").code == 2);
    CHECK(mlci_cli("analyze").code == 2);
}

TEST_CASE("simulate then analyze recovers the programmed rate") {
    test::TempDir dir("cli_rt");
    const fs::path data = simulate_cli(dir.path(), scenario(3, 0.6));
    for (const char* f : {"stack.raw", "labels.raw", "sidecar.json", "truth.json"}) CHECK(fs::exists(data / f));
    const fs::path cfg = analyze_config(dir.path(), "rep3", data);
    const Run r = mlci_cli("analyze --config " + q(cfg) + " --out " + q(dir / "out") + " --log error");
    REQUIRE_MESSAGE(r.code == 0, r.output);
    const json report = json::parse(test::slurp(dir / "out" / "rep3" / "report.json"));
    CHECK(report["status"] == "ok");
    const json fits = json::parse(test::slurp(dir / "out" / "rep3" / "fits.json"));
    CHECK(fits["TSCA"]["mu_per_h"].get<double>() == doctest::Approx(0.6).epsilon(0.05));

    // --set overrides reach the workflow; the provenance hash follows the config
    const Run r2 = mlci_cli("analyze --config " + q(cfg) + " --out " + q(dir / "out2") +
                            " --set workflow.tracking.area_weight=0.25 --log error");
    REQUIRE_MESSAGE(r2.code == 0, r2.output);
    const json report2 = json::parse(test::slurp(dir / "out2" / "rep3" / "report.json"));
    CHECK(report2["provenance"]["config_sha256"] != report["provenance"]["config_sha256"]);

    // identical config twice: byte-identical products
    const Run r3 = mlci_cli("analyze --config " + q(cfg) + " --out " + q(dir / "out3") + " --jobs 3 --log error");
    REQUIRE(r3.code == 0);
    CHECK(tree(dir / "out" / "rep3") == tree(dir / "out3" / "rep3"));

    // report re-renders from files; a deleted fits.json is a runtime failure
    const auto plots = tree(dir / "out" / "rep3" / "plots");
    fs::remove_all(dir / "out" / "rep3" / "plots");
    CHECK(mlci_cli("report " + q(dir / "out" / "rep3") + " --log error").code == 0);
    CHECK(tree(dir / "out" / "rep3" / "plots") == plots);
    fs::remove(dir / "out" / "rep3" / "fits.json");
    const Run bad = mlci_cli("report " + q(dir / "out" / "rep3"));
    CHECK(bad.code == 1);
    CHECK(bad.output.find("fits.json") != std::string::npos);
}

TEST_CASE("invalid config exits 2 and names the key") {
    test::TempDir dir("cli_bad");
    const fs::path data = simulate_cli(dir.path(), scenario(4, 0.5));
    const fs::path cfg = analyze_config(dir.path(), "rep4", data, {{"replicate", {{"pixel_size_um", -0.2}}}});
    const Run r = mlci_cli("analyze --config " + q(cfg) + " --out " + q(dir / "out"));
    CHECK(r.code == 2);
    CHECK(r.output.find("pixel_size_um") != std::string::npos);

    const fs::path ok = analyze_config(dir.path(), "rep4b", data);
    const Run s = mlci_cli("analyze --config " + q(ok) + " --out " + q(dir / "out") + " --set workflow.bogus=1");
    CHECK(s.code == 2);
    CHECK(s.output.find("bogus") != std::string::npos);
    CHECK(mlci_cli("analyze --config " + q(ok) + " --out " + q(dir / "out") + " --log loud").code == 2);
}

TEST_CASE("missing stack exits 1 naming the load stage") {
    test::TempDir dir("cli_missing");
    const fs::path cfg = analyze_config(dir.path(), "ghost", dir / "nowhere");
    const Run r = mlci_cli("analyze --config " + q(cfg) + " --out " + q(dir / "out"));
    CHECK(r.code == 1);
    CHECK(r.output.find("load") != std::string::npos);
    CHECK(json::parse(test::slurp(dir / "out" / "ghost" / "report.json"))["status"] == "failed:load");
}

TEST_CASE("batch over five simulated replicates") {
    test::TempDir dir("cli_batch");
    json reps = json::array();
    const double mus[] = {0.52, 0.535, 0.55, 0.56, 0.57};
    for (int i = 0; i < 5; ++i) {
        const SimScenario sc = scenario(static_cast<std::uint64_t>(10 + i), mus[i]);
        simulate_cli(dir.path(), sc);
        reps.push_back({{"origin_id", sc.origin_id}, {"stack", sc.origin_id + "/stack.raw"}});
    }
    // one unreadable replicate does not fail the batch
    reps.push_back({{"origin_id", "broken"}, {"stack", "broken/stack.raw"}});
    const fs::path cfg = dir / "batch.json";
    test::spit(cfg, json{{"replicates", reps}, {"workflow", {{"filters", {{"min_frames", 1}}}}}, {"out", "res"}}.dump());

    const Run r = mlci_cli("batch --config " + q(cfg) + " --jobs 1 --log error");
    REQUIRE_MESSAGE(r.code == 0, r.output);
    const json agg = json::parse(test::slurp(dir / "res" / "aggregate" / "aggregate.json"));
    CHECK(agg["replicates"].size() == 6);
    CHECK(agg["n_succeeded"] == 5);
    CHECK(agg["measures"]["TSCA"]["values"].size() == 5);

    const Run r4 = mlci_cli("batch --config " + q(cfg) + " --out " + q(dir / "res4") + " --jobs 4 --log error");
    REQUIRE(r4.code == 0);
    CHECK(tree(dir / "res") == tree(dir / "res4"));

    // every replicate broken: runtime failure
    test::spit(cfg, json{{"replicates", json::array({reps.back()})}, {"out", "none"}}.dump());
    CHECK(mlci_cli("batch --config " + q(cfg) + " --log error").code == 1);
}
