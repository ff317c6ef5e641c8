#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "frd/agent.hpp"
#include "frd/distillation.hpp"
#include "frd/federation.hpp"

namespace frd {

enum class Mode { frd_policy, frd_value, frd_both, policy_distillation, fedavg, solo };

std::string_view to_string(Mode mode);
/// Throws std::invalid_argument for unknown names.
Mode mode_from_string(std::string_view name);

struct ExperimentSetting {
    std::string id = "custom";
    int subsections = 100;    // S
    int period = 25;          // E
    int initial = 50;         // I
    int hidden_width = 24;    // n
    int hidden_layers = 2;
    Mode mode = Mode::frd_policy;
    double threshold = 450.0;
    int window = 10;
    int episode_cap = 3000;
    int agents = 1;
    std::uint64_t seed = 0;
    int round_cap = 0;

    double gamma = 0.99;
    double policy_lr = 1e-3;
    double value_lr = 1e-2;
    double entropy_coeff = 0.0;
    int distill_epochs = 50;
    double distill_lr = 1e-3;
    AggregationMode aggregation = AggregationMode::unweighted;
    bool lifetime_memory = false;
    bool fedavg_value_net = false;

    void validate() const;
    AgentConfig agent_config() const;
    RoundSchedule schedule() const;
    DistillConfig distill_config() const;
    ClusterGrid grid() const { return ClusterGrid::cartpole(subsections); }
};

/// Table-1 rows 1..7 (FRD policy mode). Throws std::out_of_range otherwise.
ExperimentSetting preset(int number);
std::vector<ExperimentSetting> presets();

/// Flat `key = value` text; '#' starts a comment. Unknown keys are errors.
ExperimentSetting parse_config(std::string_view text, ExperimentSetting base = {});
ExperimentSetting load_config(const std::filesystem::path& path);
/// Preset number ("1".."7") or a config file path.
ExperimentSetting resolve_setting(const std::string& name);
std::string to_config(const ExperimentSetting& setting);

/// True iff `recent` holds exactly `window` durations whose mean is >= threshold.
bool mission_complete(std::span<const int> recent, double threshold, int window = 10);

struct RunResult {
    std::string setting;
    Mode mode = Mode::solo;
    int agents = 1;
    std::uint64_t seed = 0;
    int episodes = 0;
    bool complete = false;
    /// Index of the agent that completed first, -1 when incomplete.
    int completing_agent = -1;
    std::int64_t total_payload_records = 0;
    std::int64_t total_payload_bytes = 0;
    std::vector<PayloadEntry> payload;
    std::vector<RoundReport> rounds;

    /// Largest per-round record total across agents.
    std::int64_t max_round_records() const;
};

/// Runs the full protocol for setting.mode and stops at the first agent whose
/// trailing-window mean duration reaches the threshold.
RunResult run_group(const ExperimentSetting& setting);

struct SweepStats {
    double mean = 0.0;
    double median = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;
    double min = 0.0;
    double max = 0.0;
    std::size_t count = 0;
};

/// Linear interpolation between order statistics at position q * (n - 1).
double quantile(std::vector<double> values, double q);
SweepStats compute_stats(const std::vector<double>& values);

std::string csv_header();
std::string csv_row(const RunResult& result);

struct CsvRow {
    std::string setting;
    std::string mode;
    int agents = 0;
    std::uint64_t seed = 0;
    int episodes = 0;
    bool complete = false;
    std::int64_t total_payload_records = 0;
    std::int64_t total_payload_bytes = 0;
};

/// Parses result CSV text (header + rows; repeated headers from concatenated files are skipped).
std::vector<CsvRow> parse_csv(std::string_view text);
std::vector<CsvRow> read_csv(const std::filesystem::path& path);

struct StatsCell {
    std::string setting;
    std::string mode;
    int agents = 0;
    SweepStats stats;
    std::size_t completed = 0;
};

/// SweepStats of `episodes` per (setting, mode, agents), in first-seen order.
std::vector<StatsCell> stats_by_cell(const std::vector<CsvRow>& rows);
std::string format_stats_table(const std::vector<StatsCell>& cells);

struct SweepPlan {
    std::vector<ExperimentSetting> settings;
    std::vector<int> agent_counts;
    std::vector<std::uint64_t> seeds;
    std::filesystem::path out_dir;
    unsigned jobs = 1;
};

/// Runs every (setting, agents, seed) combination, writes
/// out/<setting>/<mode>/U<agents>/seed<k>.csv (plus payload and loss logs)
/// and out/results.csv, and returns the results in plan order.
std::vector<RunResult> sweep(const SweepPlan& plan, const std::function<void(const RunResult&)>& on_result = {});

/// "1,2,5" or "0-9" (inclusive) or a mix.
std::vector<std::uint64_t> parse_seed_list(std::string_view text);
std::vector<int> parse_int_list(std::string_view text);

}  // namespace frd
