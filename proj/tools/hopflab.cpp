#include "hopflab/suite.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <iostream>

namespace {

using namespace hopflab;

std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

int emit(const ScenarioConfig& cfg, const std::filesystem::path& dir, const std::vector<std::string>& argv) {
    const auto start = std::chrono::steady_clock::now();
    if (cfg.task == "report") {
        if (!std::filesystem::is_directory(dir)) throw ConfigError("no output directory '" + dir.string() + "' to replot");
        const auto n = replot_directory(dir);
        std::cout << "replotted " << n << " tables in " << dir.string() << "\n";
        return 0;
    }
    const auto out = run_task(cfg, dir);
    OutputWriter w(dir);
    for (const auto& t : out.tables) w.table(t);
    w.reports(out.records, out.summary_extra);

    Json meta;
    meta["schema"] = kReportSchema;
    meta["started_utc"] = utc_now();
    meta["command"] = argv;
    meta["config"] = cfg.raw;
    meta["records"] = out.records.size();
    meta["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!out.rows.empty()) {
        Json rows = Json::array();
        for (const auto& r : out.rows)
            rows.push_back({{"criterion", r.id}, {"pass", r.pass}, {"seconds", r.seconds}, {"limit", r.time_limit}});
        meta["rows"] = rows;
    }
    w.metadata(meta);

    std::cout << summary_table(out.records);
    if (!out.summary_extra.empty()) std::cout << out.summary_extra;
    std::cout << "output: " << dir.string() << "\n";
    return exit_status(out.records);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hopflab: maximum principle and Hopf lemma verification lab"};
    app.require_subcommand(1);
    const std::vector<std::string> args(argv, argv + argc);

    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_override;

    auto* run = app.add_subcommand("run", "Run the task described by a JSON config");
    run->add_option("config", config_path, "config file")->required()->check(CLI::ExistingFile);
    run->add_option("-s,--set", overrides, "override, e.g. grid.h=0.025");
    run->add_option("-o,--out", out_override, "output directory (default: $HOPFLAB_OUT/<output.dir>)");

    std::string suite_name = "smoke";
    auto* suite = app.add_subcommand("suite", "Run a named verification suite");
    suite->add_option("name", suite_name, "paper-core | smoke")->required();
    suite->add_option("-o,--out", out_override, "output directory (default: $HOPFLAB_OUT/suite-<name>)");

    auto* presets = app.add_subcommand("list-presets", "List operator presets, domains and tasks");

    auto* validate = app.add_subcommand("validate", "Check a config without running it");
    validate->add_option("config", config_path, "config file")->required()->check(CLI::ExistingFile);
    validate->add_option("-s,--set", overrides, "override, e.g. grid.h=0.025");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*presets) {
            std::cout << "operators:";
            for (const auto& n : operator_preset_names()) std::cout << " " << n;
            std::cout << "\nimplicit domains:";
            for (const auto& n : implicit_domain_names()) std::cout << " " << n;
            std::cout << "\ntasks:";
            for (const auto& n : task_names()) std::cout << " " << n;
            std::cout << "\nsuites:";
            for (const auto& n : suite_names()) std::cout << " " << n;
            std::cout << "\n";
            return 0;
        }
        if (*validate) {
            const auto cfg = parse_scenario(load_config(config_path, overrides));
            std::cout << "ok: task " << cfg.task << ", dimension " << cfg.op.dim() << "\n";
            return 0;
        }
        ScenarioConfig cfg;
        if (*suite) {
            suite_rows(suite_name);
            cfg = parse_scenario(Json{{"task", "suite"}, {"suite", {{"name", suite_name}}}});
            cfg.out_dir = "suite-" + suite_name;
        } else {
            cfg = parse_scenario(load_config(config_path, overrides));
        }
        const std::filesystem::path dir = out_override.empty() ? output_root() / cfg.out_dir : std::filesystem::path(out_override);
        return emit(cfg, dir, args);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
