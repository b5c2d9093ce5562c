#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "mlci/batch.hpp"
#include "mlci/synth.hpp"
#include "mlci/workflow.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_runtime = 1;
constexpr int exit_config = 2;

/// Thrown for configuration problems (exit 2).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Options {
    std::string config;
    std::string out;
    std::vector<std::string> overrides;
    std::size_t jobs = 0;
    std::string log = "info";
    std::string replicate_dir;
};

std::string load_config(const Options& opt) {
    std::ifstream in(opt.config, std::ios::binary);
    if (!in) throw ConfigError("cannot open config '" + opt.config + "'");
    const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    try {
        return mlci::apply_overrides(text, opt.overrides);
    } catch (const mlci::Error& e) {
        throw ConfigError(e.what());
    }
}

fs::path config_dir(const Options& opt) { return fs::absolute(fs::path(opt.config)).parent_path(); }

/// Output directory from --out, else the config's "out" key.
fs::path out_dir(const Options& opt, const nlohmann::json& doc) {
    if (!opt.out.empty()) return opt.out;
    if (doc.contains("out") && doc.at("out").is_string()) {
        const fs::path p(doc.at("out").get<std::string>());
        return p.is_absolute() ? p : config_dir(opt) / p;
    }
    throw ConfigError("no output directory: pass --out or set \"out\" in the config");
}

template <typename F>
auto as_config(F&& fn) {
    try {
        return fn();
    } catch (const mlci::Error& e) {
        throw ConfigError(e.what());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(e.what());
    }
}

int cmd_analyze(const Options& opt) {
    const std::string text = load_config(opt);
    const auto doc = as_config([&] { return nlohmann::json::parse(text); });
    for (const auto& [key, value] : doc.items()) {
        if (key != "replicate" && key != "workflow" && key != "out") throw ConfigError("unknown key '" + key + "'");
    }
    if (!doc.contains("replicate")) throw ConfigError("config needs a \"replicate\" object");
    const fs::path base = config_dir(opt);
    const auto replicate = as_config([&] { return mlci::parse_replicate(doc.at("replicate").dump(), base); });
    auto params =
        as_config([&] { return mlci::parse_workflow(doc.value("workflow", nlohmann::json::object()).dump(), base); });
    if (opt.jobs > 0) params.threads = opt.jobs;
    const fs::path out = out_dir(opt, doc) / replicate.origin_id;

    spdlog::info("analyzing '{}' into {}", replicate.origin_id, out.string());
    const auto report = mlci::run_workflow(replicate, params, out);
    for (const auto& w : report.warnings) spdlog::warn("{}: {}", report.origin_id, w);
    if (!report.ok()) {
        const std::string stage = report.status.substr(report.status.find(':') + 1);
        spdlog::error("{}: stage {} failed: {}", report.origin_id, stage, report.error);
        return exit_runtime;
    }
    spdlog::info("{}: ok", report.origin_id);
    return exit_ok;
}

int cmd_batch(const Options& opt) {
    const std::string text = load_config(opt);
    auto cfg = as_config([&] { return mlci::parse_batch(text, config_dir(opt)); });
    if (!opt.out.empty()) cfg.out_dir = opt.out;
    if (cfg.out_dir.empty()) throw ConfigError("no output directory: pass --out or set \"out\" in the config");
    if (opt.jobs > 0) cfg.jobs = opt.jobs;

    spdlog::info("batch of {} replicate(s), {} job(s)", cfg.replicates.size(), cfg.jobs);
    const auto agg = mlci::run_batch(cfg);
    for (const auto& [id, status] : agg.replicates) {
        if (status == "ok") spdlog::info("{}: ok", id);
        else spdlog::warn("{}: {}", id, status);
    }
    for (const auto& [measure, m] : agg.measures) {
        spdlog::info("{}: mean {:.4f} 1/h, std {:.4f}, n {}", measure, m.mean, m.std, m.n);
    }
    return exit_ok;
}

int cmd_simulate(const Options& opt) {
    const std::string text = load_config(opt);
    const auto scenario = as_config([&] { return mlci::parse_scenario(text); });
    if (opt.out.empty()) throw ConfigError("simulate needs --out");
    spdlog::info("simulating '{}' (seed {}) into {}", scenario.origin_id, scenario.seed, opt.out);
    const auto output = mlci::simulate(scenario);
    mlci::write_simulation(opt.out, output);
    spdlog::info("{} frames, {} tracklets", output.stack.frames(), output.truth.lineage.size());
    return exit_ok;
}

int cmd_report(const Options& opt) {
    const fs::path dir = opt.replicate_dir.empty() ? fs::path(opt.out) : fs::path(opt.replicate_dir);
    if (dir.empty()) throw ConfigError("report needs a replicate directory");
    mlci::rerender_plots(dir);
    spdlog::info("re-rendered plots in {}", (dir / "plots").string());
    return exit_ok;
}

void add_common(CLI::App* sub, Options& opt, bool needs_config) {
    auto* c = sub->add_option("--config", opt.config, "JSON config file");
    if (needs_config) c->required()->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out, "Output directory");
    sub->add_option("--set", opt.overrides, "Override a config value, key.path=value (repeatable)")
        ->take_all()
        ->allow_extra_args(false);
    sub->add_option("--jobs", opt.jobs, "Parallel workers")->check(CLI::PositiveNumber);
    sub->add_option("--log", opt.log, "Log level")
        ->check(CLI::IsMember({"error", "warn", "info", "debug"}));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Single-cell time-lapse analytics"};
    app.set_version_flag("--version", mlci::tool_version());
    app.require_subcommand(1);

    Options opt;
    auto* analyze = app.add_subcommand("analyze", "Analyze one replicate");
    add_common(analyze, opt, true);
    auto* batch = app.add_subcommand("batch", "Analyze many replicates and aggregate");
    add_common(batch, opt, true);
    auto* simulate = app.add_subcommand("simulate", "Write a synthetic colony and its ground truth");
    add_common(simulate, opt, true);
    auto* report = app.add_subcommand("report", "Re-render plots of an analyzed replicate");
    add_common(report, opt, false);
    report->add_option("dir", opt.replicate_dir, "Replicate output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config;
    }

    auto logger = spdlog::stderr_color_mt("mlci");
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::from_str(opt.log));

    try {
        if (*analyze) return cmd_analyze(opt);
        if (*batch) return cmd_batch(opt);
        if (*simulate) return cmd_simulate(opt);
        if (*report) return cmd_report(opt);
    } catch (const ConfigError& e) {
        spdlog::error("invalid config: {}", e.what());
        return exit_config;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return exit_runtime;
    }
    return exit_runtime;
}
