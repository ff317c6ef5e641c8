// frd: command-line driver for federated reinforcement distillation experiments.
//
//   frd run --setting 2 --mode frd_policy --agents 1,2,4 --seeds 0-9 --out results
//   frd presets
//   frd stats results/results.csv

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "frd/harness.hpp"
#include "frd/text.hpp"

namespace {

struct RunOptions {
    std::vector<std::string> settings{"1"};
    std::optional<std::string> mode;
    std::string agents = "1";
    std::string seeds = "0";
    std::optional<double> threshold;
    std::optional<int> episode_cap;
    std::optional<int> subsections;
    std::string out = "out";
    unsigned jobs = 1;
    bool quiet = false;
};

int cmd_run(const RunOptions& opt) {
    frd::SweepPlan plan;
    for (const auto& s : opt.settings) {
        frd::ExperimentSetting setting = frd::resolve_setting(s);
        if (opt.mode) setting.mode = frd::mode_from_string(*opt.mode);
        if (opt.threshold) setting.threshold = *opt.threshold;
        if (opt.episode_cap) setting.episode_cap = *opt.episode_cap;
        if (opt.subsections) setting.subsections = *opt.subsections;
        plan.settings.push_back(setting);
    }
    plan.agent_counts = frd::parse_int_list(opt.agents);
    plan.seeds = frd::parse_seed_list(opt.seeds);
    plan.out_dir = opt.out;
    plan.jobs = opt.jobs;

    const auto results = frd::sweep(plan, [&](const frd::RunResult& r) {
        if (!opt.quiet) std::cerr << frd::csv_row(r) << '\n';
    });

    std::vector<frd::CsvRow> rows = frd::parse_csv(frd::csv_header() + "\n" + [&] {
        std::string body;
        for (const auto& r : results) body += frd::csv_row(r) + "\n";
        return body;
    }());
    std::cout << frd::format_stats_table(frd::stats_by_cell(rows));
    return 0;
}

int cmd_presets() {
    std::cout << "setting,S,proxy_states,E,I,n,hidden_layers\n";
    for (const auto& s : frd::presets()) {
        const auto grid = s.grid();
        std::cout << s.id << ',' << s.subsections << ',' << grid.cluster_count() << ',' << s.period << ','
                  << s.initial << ',' << s.hidden_width << ',' << s.hidden_layers << '\n';
    }
    return 0;
}

int cmd_stats(const std::vector<std::string>& files) {
    std::vector<frd::CsvRow> rows;
    for (const auto& f : files) {
        auto part = frd::read_csv(f);
        rows.insert(rows.end(), part.begin(), part.end());
    }
    if (rows.empty()) {
        std::cerr << "frd stats: no result rows found\n";
        return 1;
    }
    std::cout << frd::format_stats_table(frd::stats_by_cell(rows));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated reinforcement distillation on CartPole"};
    app.require_subcommand(1);

    RunOptions run;
    auto* run_cmd = app.add_subcommand("run", "Run one or more settings over agent counts and seeds");
    run_cmd->add_option("--setting", run.settings, "Preset number 1..7 or a key = value config file")
        ->delimiter(',');
    run_cmd->add_option("--mode", run.mode, "frd_policy | frd_value | frd_both | policy_distillation | fedavg | solo");
    run_cmd->add_option("--agents", run.agents, "Agent counts, e.g. 1,2,4 or 1-8");
    run_cmd->add_option("--seeds", run.seeds, "Seeds, e.g. 0-9 or 1,5,7");
    run_cmd->add_option("--threshold", run.threshold, "Mission threshold (mean steps over the window)");
    run_cmd->add_option("--episode-cap", run.episode_cap, "Per-agent episode cap");
    run_cmd->add_option("--S", run.subsections, "Override subsections per state dimension");
    run_cmd->add_option("--out", run.out, "Results directory");
    run_cmd->add_option("--jobs", run.jobs, "Concurrent runs")->default_val(1);
    run_cmd->add_flag("--quiet", run.quiet, "Do not echo per-run rows");

    app.add_subcommand("presets", "List the built-in settings");

    std::vector<std::string> stats_files;
    auto* stats_cmd = app.add_subcommand("stats", "Recompute sweep statistics from result CSV files");
    stats_cmd->add_option("csv", stats_files, "Result CSV files")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run_cmd) return cmd_run(run);
        if (app.got_subcommand("presets")) return cmd_presets();
        if (*stats_cmd) return cmd_stats(stats_files);
    } catch (const std::exception& e) {
        std::cerr << "frd: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
