#include "frd/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "frd/baselines.hpp"
#include "frd/text.hpp"

namespace frd {

namespace {

constexpr std::array<std::pair<Mode, std::string_view>, 6> kModeNames{{
    {Mode::frd_policy, "frd_policy"},
    {Mode::frd_value, "frd_value"},
    {Mode::frd_both, "frd_both"},
    {Mode::policy_distillation, "policy_distillation"},
    {Mode::fedavg, "fedavg"},
    {Mode::solo, "solo"},
}};

bool parse_bool(std::string_view v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("expected a boolean, got '" + std::string(v) + "'");
}

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
    if constexpr (std::is_floating_point_v<T>) {
        if (auto d = parse_double(v)) return *d;
    } else {
        if (auto i = parse_int<T>(v)) return *i;
    }
    throw std::invalid_argument("config key '" + std::string(key) + "': bad number '" + std::string(v) + "'");
}

}  // namespace

std::string_view to_string(Mode mode) {
    for (const auto& [m, name] : kModeNames)
        if (m == mode) return name;
    return "unknown";
}

Mode mode_from_string(std::string_view name) {
    for (const auto& [m, n] : kModeNames)
        if (n == name) return m;
    throw std::invalid_argument("unknown mode '" + std::string(name) +
                                "' (expected frd_policy, frd_value, frd_both, policy_distillation, fedavg or solo)");
}

void ExperimentSetting::validate() const {
    if (subsections < 1) throw std::invalid_argument("S must be >= 1");
    if (window < 1) throw std::invalid_argument("window must be >= 1");
    if (episode_cap < 1) throw std::invalid_argument("episode_cap must be >= 1");
    if (agents < 1) throw std::invalid_argument("agents must be >= 1");
    if (!std::isfinite(threshold)) throw std::invalid_argument("threshold must be finite");
    if (id.empty() || id.find_first_of(",/\n") != std::string::npos) {
        throw std::invalid_argument("setting id must be non-empty without ',', '/' or newlines");
    }
    agent_config().validate();
    schedule().validate();
    distill_config().validate();
}

AgentConfig ExperimentSetting::agent_config() const {
    return {gamma, policy_lr, value_lr, hidden_width, hidden_layers, entropy_coeff};
}

RoundSchedule ExperimentSetting::schedule() const { return {initial, period, round_cap}; }

DistillConfig ExperimentSetting::distill_config() const { return {distill_epochs, distill_lr, true}; }

ExperimentSetting preset(int number) {
    struct Row {
        int s, e, i, n, layers;
    };
    static constexpr std::array<Row, 7> kTable{{
        {100, 25, 50, 24, 2},
        {100, 25, 50, 100, 2},
        {100, 25, 100, 100, 2},
        {50, 25, 50, 100, 2},
        {100, 10, 0, 24, 1},
        {100, 50, 0, 24, 1},
        {100, 25, 125, 24, 1},
    }};
    if (number < 1 || number > 7) throw std::out_of_range("preset settings are numbered 1..7");
    const Row& r = kTable[static_cast<std::size_t>(number - 1)];
    ExperimentSetting s;
    s.id = std::to_string(number);
    s.subsections = r.s;
    s.period = r.e;
    s.initial = r.i;
    s.hidden_width = r.n;
    s.hidden_layers = r.layers;
    return s;
}

std::vector<ExperimentSetting> presets() {
    std::vector<ExperimentSetting> out;
    for (int i = 1; i <= 7; ++i) out.push_back(preset(i));
    return out;
}

ExperimentSetting parse_config(std::string_view text, ExperimentSetting s) {
    std::size_t line_no = 0;
    for (auto raw : split(text, '\n')) {
        ++line_no;
        auto line = raw.substr(0, raw.find('#'));
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        try {
            if (key == "id" || key == "setting") s.id = std::string(value);
            else if (key == "preset") {
                std::string keep_id = s.id;
                s = preset(parse_number<int>(key, value));
                s.id = std::move(keep_id);
            }
            else if (key == "S" || key == "subsections") s.subsections = parse_number<int>(key, value);
            else if (key == "E" || key == "period") s.period = parse_number<int>(key, value);
            else if (key == "I" || key == "initial") s.initial = parse_number<int>(key, value);
            else if (key == "n" || key == "hidden_width") s.hidden_width = parse_number<int>(key, value);
            else if (key == "hidden_layers") s.hidden_layers = parse_number<int>(key, value);
            else if (key == "mode") s.mode = mode_from_string(value);
            else if (key == "threshold") s.threshold = parse_number<double>(key, value);
            else if (key == "window") s.window = parse_number<int>(key, value);
            else if (key == "episode_cap") s.episode_cap = parse_number<int>(key, value);
            else if (key == "agents" || key == "U") s.agents = parse_number<int>(key, value);
            else if (key == "seed") s.seed = parse_number<std::uint64_t>(key, value);
            else if (key == "round_cap") s.round_cap = parse_number<int>(key, value);
            else if (key == "gamma") s.gamma = parse_number<double>(key, value);
            else if (key == "policy_lr") s.policy_lr = parse_number<double>(key, value);
            else if (key == "value_lr") s.value_lr = parse_number<double>(key, value);
            else if (key == "entropy_coeff") s.entropy_coeff = parse_number<double>(key, value);
            else if (key == "distill_epochs") s.distill_epochs = parse_number<int>(key, value);
            else if (key == "distill_lr") s.distill_lr = parse_number<double>(key, value);
            else if (key == "aggregation") {
                if (value == "unweighted") s.aggregation = AggregationMode::unweighted;
                else if (value == "visit_weighted") s.aggregation = AggregationMode::visit_weighted;
                else throw std::invalid_argument("aggregation must be unweighted or visit_weighted");
            }
            else if (key == "lifetime_memory") s.lifetime_memory = parse_bool(value);
            else if (key == "fedavg_value_net") s.fedavg_value_net = parse_bool(value);
            else throw std::invalid_argument("unknown key '" + std::string(key) + "'");
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("config line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return s;
}

ExperimentSetting load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    ExperimentSetting base;
    base.id = path.stem().string();
    try {
        return parse_config(ss.str(), base);
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
}

ExperimentSetting resolve_setting(const std::string& name) {
    if (auto n = parse_int<int>(name)) return preset(*n);
    return load_config(name);
}

std::string to_config(const ExperimentSetting& s) {
    std::ostringstream out;
    out << "id = " << s.id << '\n'
        << "S = " << s.subsections << '\n'
        << "E = " << s.period << '\n'
        << "I = " << s.initial << '\n'
        << "n = " << s.hidden_width << '\n'
        << "hidden_layers = " << s.hidden_layers << '\n'
        << "mode = " << to_string(s.mode) << '\n'
        << "threshold = " << format_double(s.threshold) << '\n'
        << "window = " << s.window << '\n'
        << "episode_cap = " << s.episode_cap << '\n'
        << "agents = " << s.agents << '\n'
        << "seed = " << s.seed << '\n'
        << "round_cap = " << s.round_cap << '\n'
        << "gamma = " << format_double(s.gamma) << '\n'
        << "policy_lr = " << format_double(s.policy_lr) << '\n'
        << "value_lr = " << format_double(s.value_lr) << '\n'
        << "entropy_coeff = " << format_double(s.entropy_coeff) << '\n'
        << "distill_epochs = " << s.distill_epochs << '\n'
        << "distill_lr = " << format_double(s.distill_lr) << '\n'
        << "aggregation = " << (s.aggregation == AggregationMode::unweighted ? "unweighted" : "visit_weighted") << '\n'
        << "lifetime_memory = " << (s.lifetime_memory ? "true" : "false") << '\n'
        << "fedavg_value_net = " << (s.fedavg_value_net ? "true" : "false") << '\n';
    return out.str();
}

bool mission_complete(std::span<const int> recent, double threshold, int window) {
    if (window < 1 || recent.size() != static_cast<std::size_t>(window)) return false;
    const double mean = std::accumulate(recent.begin(), recent.end(), 0.0) / static_cast<double>(window);
    return mean >= threshold;
}

std::int64_t RunResult::max_round_records() const {
    std::map<int, std::int64_t> per_round;
    for (const auto& p : payload) per_round[p.round] += p.records;
    std::int64_t best = 0;
    for (const auto& [r, n] : per_round) best = std::max(best, n);
    return best;
}

RunResult run_group(const ExperimentSetting& setting) {
    setting.validate();
    const ClusterGrid grid = setting.grid();
    const AgentConfig agent_cfg = setting.agent_config();
    const RoundSchedule schedule = setting.schedule();
    const DistillConfig distill = setting.distill_config();

    std::vector<Worker> workers;
    workers.reserve(static_cast<std::size_t>(setting.agents));
    for (int i = 0; i < setting.agents; ++i) workers.emplace_back(Agent(i, agent_cfg, setting.seed), grid);

    const auto window = static_cast<std::size_t>(setting.window);
    const StopRule stop = [&](const Worker& w) {
        if (w.durations.size() < window) return false;
        return mission_complete(std::span<const int>(w.durations).last(window), setting.threshold, setting.window);
    };

    RunResult result;
    result.setting = setting.id;
    result.mode = setting.mode;
    result.agents = setting.agents;
    result.seed = setting.seed;

    auto finish = [&](std::optional<int> completed) {
        if (completed) {
            result.complete = true;
            result.episodes = *completed;
            for (std::size_t i = 0; i < workers.size(); ++i) {
                if (workers[i].completed_at == completed) {
                    result.completing_agent = static_cast<int>(i);
                    break;
                }
            }
        } else {
            result.complete = false;
            result.episodes = setting.episode_cap;
        }
        for (const auto& r : result.rounds) {
            for (const auto& p : r.payload) {
                result.payload.push_back(p);
                result.total_payload_records += p.records;
                result.total_payload_bytes += p.bytes;
            }
        }
        return result;
    };

    auto episodes_done = [&] { return workers.front().episodes(); };
    auto remaining = [&] { return setting.episode_cap - episodes_done(); };

    const bool exchanging = setting.mode != Mode::solo;
    const int warmup = exchanging ? std::min(setting.initial, setting.episode_cap) : 0;
    if (warmup > 0) {
        run_local_episodes(workers, warmup, RecordingPlan{}, stop);
        if (auto done = earliest_completion(workers)) return finish(done);
    }

    Server server(setting.aggregation);
    FrdOptions frd_options;
    frd_options.lifetime_memory = setting.lifetime_memory;
    if (setting.mode == Mode::frd_value) frd_options.variant = FrdVariant::value;
    if (setting.mode == Mode::frd_both) frd_options.variant = FrdVariant::both;

    int round = 0;
    while (remaining() > 0) {
        const bool rounds_left = setting.round_cap == 0 || round < setting.round_cap;
        if (!exchanging || !rounds_left || remaining() < setting.period) {
            // no further exchange fits: local learning only, in period-sized chunks
            run_local_episodes(workers, std::min(remaining(), setting.period), RecordingPlan{}, stop);
            if (auto done = earliest_completion(workers)) return finish(done);
            continue;
        }
        ++round;
        RoundReport report;
        switch (setting.mode) {
            case Mode::frd_policy:
            case Mode::frd_value:
            case Mode::frd_both:
                report = run_round(workers, server, schedule, round, frd_options, distill, stop);
                break;
            case Mode::policy_distillation:
                report = run_policy_distillation_round(workers, schedule, round, distill, stop);
                break;
            case Mode::fedavg:
                report = run_fedavg_round(workers, schedule, round, FedAvgOptions{setting.fedavg_value_net}, stop);
                break;
            case Mode::solo:
                break;
        }
        const auto done = report.completed_at;
        result.rounds.push_back(std::move(report));
        if (done) return finish(done);
    }
    return finish(std::nullopt);
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("quantile of an empty list");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

SweepStats compute_stats(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("compute_stats: no values");
    SweepStats s;
    s.count = values.size();
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    s.median = quantile(values, 0.5);
    s.q25 = quantile(values, 0.25);
    s.q75 = quantile(values, 0.75);
    s.min = *std::min_element(values.begin(), values.end());
    s.max = *std::max_element(values.begin(), values.end());
    return s;
}

std::string csv_header() {
    return "setting,mode,agents,seed,episodes,complete,total_payload_records,total_payload_bytes";
}

std::string csv_row(const RunResult& r) {
    std::ostringstream out;
    out << r.setting << ',' << to_string(r.mode) << ',' << r.agents << ',' << r.seed << ',' << r.episodes << ','
        << (r.complete ? 1 : 0) << ',' << r.total_payload_records << ',' << r.total_payload_bytes;
    return out.str();
}

std::vector<CsvRow> parse_csv(std::string_view text) {
    std::vector<CsvRow> rows;
    std::size_t line_no = 0;
    for (auto raw : split(text, '\n')) {
        ++line_no;
        const auto line = trim(raw);
        if (line.empty() || line == csv_header()) continue;
        const auto f = split(line, ',');
        if (f.size() != 8) {
            throw std::invalid_argument("CSV line " + std::to_string(line_no) + ": expected 8 columns, got " +
                                        std::to_string(f.size()));
        }
        CsvRow row;
        row.setting = std::string(f[0]);
        row.mode = std::string(f[1]);
        auto agents = parse_int<int>(f[2]);
        auto seed = parse_int<std::uint64_t>(f[3]);
        auto episodes = parse_int<int>(f[4]);
        auto complete = parse_int<int>(f[5]);
        auto records = parse_int<std::int64_t>(f[6]);
        auto bytes = parse_int<std::int64_t>(f[7]);
        if (!agents || !seed || !episodes || !complete || !records || !bytes) {
            throw std::invalid_argument("CSV line " + std::to_string(line_no) + ": malformed numeric column");
        }
        row.agents = *agents;
        row.seed = *seed;
        row.episodes = *episodes;
        row.complete = *complete != 0;
        row.total_payload_records = *records;
        row.total_payload_bytes = *bytes;
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<CsvRow> read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_csv(ss.str());
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
}

std::vector<StatsCell> stats_by_cell(const std::vector<CsvRow>& rows) {
    std::vector<StatsCell> cells;
    std::vector<std::vector<double>> values;
    for (const auto& row : rows) {
        auto it = std::find_if(cells.begin(), cells.end(), [&](const StatsCell& c) {
            return c.setting == row.setting && c.mode == row.mode && c.agents == row.agents;
        });
        std::size_t idx;
        if (it == cells.end()) {
            cells.push_back({row.setting, row.mode, row.agents, {}, 0});
            values.emplace_back();
            idx = cells.size() - 1;
        } else {
            idx = static_cast<std::size_t>(it - cells.begin());
        }
        values[idx].push_back(row.episodes);
        if (row.complete) ++cells[idx].completed;
    }
    for (std::size_t i = 0; i < cells.size(); ++i) cells[i].stats = compute_stats(values[i]);
    return cells;
}

std::string format_stats_table(const std::vector<StatsCell>& cells) {
    std::ostringstream out;
    out << "setting,mode,agents,runs,completed,mean,median,q25,q75,min,max\n";
    for (const auto& c : cells) {
        out << c.setting << ',' << c.mode << ',' << c.agents << ',' << c.stats.count << ',' << c.completed << ','
            << format_double(c.stats.mean) << ',' << format_double(c.stats.median) << ','
            << format_double(c.stats.q25) << ',' << format_double(c.stats.q75) << ','
            << format_double(c.stats.min) << ',' << format_double(c.stats.max) << '\n';
    }
    return out.str();
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << content;
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_run(const std::filesystem::path& out_dir, const RunResult& r) {
    const auto dir = out_dir / r.setting / std::string(to_string(r.mode)) / ("U" + std::to_string(r.agents));
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
    const std::string stem = "seed" + std::to_string(r.seed);

    write_file(dir / (stem + ".csv"), csv_header() + "\n" + csv_row(r) + "\n");

    std::ostringstream payload;
    payload << "round,agent,kind,records,bytes\n";
    for (const auto& p : r.payload)
        payload << p.round << ',' << p.agent_id << ',' << p.kind << ',' << p.records << ',' << p.bytes << '\n';
    write_file(dir / (stem + "_payload.csv"), payload.str());

    std::ostringstream losses;
    losses << "round,agent,kind,epochs,initial_loss,final_loss\n";
    for (const auto& round : r.rounds) {
        for (std::size_t a = 0; a < round.policy_loss_traces.size(); ++a) {
            const auto& t = round.policy_loss_traces[a];
            if (t.empty()) continue;
            losses << round.round << ',' << a << ",policy," << t.size() - 1 << ',' << format_double(t.front()) << ','
                   << format_double(t.back()) << '\n';
        }
        for (std::size_t a = 0; a < round.value_loss_traces.size(); ++a) {
            const auto& t = round.value_loss_traces[a];
            if (t.empty()) continue;
            losses << round.round << ',' << a << ",value," << t.size() - 1 << ',' << format_double(t.front()) << ','
                   << format_double(t.back()) << '\n';
        }
    }
    write_file(dir / (stem + "_losses.csv"), losses.str());
}

}  // namespace

std::vector<RunResult> sweep(const SweepPlan& plan, const std::function<void(const RunResult&)>& on_result) {
    if (plan.seeds.empty()) throw std::invalid_argument("sweep: seed list is empty");
    if (plan.agent_counts.empty()) throw std::invalid_argument("sweep: agent count list is empty");

    std::vector<ExperimentSetting> runs;
    for (const auto& base : plan.settings)
        for (int agents : plan.agent_counts)
            for (auto seed : plan.seeds) {
                ExperimentSetting s = base;
                s.agents = agents;
                s.seed = seed;
                s.validate();
                runs.push_back(std::move(s));
            }

    std::vector<RunResult> results(runs.size());
    std::atomic<std::size_t> next{0};
    std::mutex writer;
    std::exception_ptr failure;
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= runs.size()) return;
            try {
                results[i] = run_group(runs[i]);
                std::lock_guard lock(writer);
                if (!plan.out_dir.empty()) write_run(plan.out_dir, results[i]);
                if (on_result) on_result(results[i]);
            } catch (...) {
                std::lock_guard lock(writer);
                if (!failure) failure = std::current_exception();
                next = runs.size();
                return;
            }
        }
    };
    const unsigned jobs = std::max(1U, std::min<unsigned>(plan.jobs, static_cast<unsigned>(runs.size())));
    std::vector<std::thread> pool;
    for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);

    if (!plan.out_dir.empty()) {
        std::string all = csv_header() + "\n";
        for (const auto& r : results) all += csv_row(r) + "\n";
        write_file(plan.out_dir / "results.csv", all);
    }
    return results;
}

std::vector<std::uint64_t> parse_seed_list(std::string_view text) {
    std::vector<std::uint64_t> out;
    for (auto part : split(text, ',')) {
        part = trim(part);
        if (part.empty()) continue;
        const auto dash = part.find('-');
        if (dash != std::string_view::npos && dash > 0) {
            auto lo = parse_int<std::uint64_t>(part.substr(0, dash));
            auto hi = parse_int<std::uint64_t>(part.substr(dash + 1));
            if (!lo || !hi || *hi < *lo) throw std::invalid_argument("bad seed range '" + std::string(part) + "'");
            for (auto s = *lo; s <= *hi; ++s) out.push_back(s);
        } else {
            auto v = parse_int<std::uint64_t>(part);
            if (!v) throw std::invalid_argument("bad seed '" + std::string(part) + "'");
            out.push_back(*v);
        }
    }
    if (out.empty()) throw std::invalid_argument("empty seed list");
    return out;
}

std::vector<int> parse_int_list(std::string_view text) {
    std::vector<int> out;
    for (auto v : parse_seed_list(text)) out.push_back(static_cast<int>(v));
    return out;
}

}  // namespace frd
