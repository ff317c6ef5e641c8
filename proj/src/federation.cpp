#include "frd/federation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <thread>

#include "frd/distillation.hpp"
#include "frd/text.hpp"

namespace frd {

std::string_view to_string(MemoryKind kind) { return kind == MemoryKind::policy ? "policy" : "value"; }

MemoryKind memory_kind_from_string(std::string_view s) {
    if (s == "policy") return MemoryKind::policy;
    if (s == "value") return MemoryKind::value;
    throw std::invalid_argument("unknown memory kind '" + std::string(s) + "'");
}

ExchangeMessage ExchangeMessage::from_policy(int agent_id, int round, const std::vector<ProxyRecord>& records) {
    ExchangeMessage msg{agent_id, round, MemoryKind::policy, {}};
    msg.records.reserve(records.size());
    for (const auto& r : records) msg.records.push_back({r.cluster, {r.mean[0], r.mean[1]}, r.visits});
    return msg;
}

ExchangeMessage ExchangeMessage::from_value(int agent_id, int round, const std::vector<ValueRecord>& records) {
    ExchangeMessage msg{agent_id, round, MemoryKind::value, {}};
    msg.records.reserve(records.size());
    for (const auto& r : records) msg.records.push_back({r.cluster, {r.mean, 0.0}, r.visits});
    return msg;
}

ParseError::ParseError(std::size_t line, std::size_t column, const std::string& what)
    : std::runtime_error("line " + std::to_string(line) + ", offset " + std::to_string(column) + ": " + what),
      line_(line),
      column_(column) {}

std::string serialize(const ExchangeMessage& msg) {
    std::string out = "FRD,v1," + std::to_string(msg.agent_id) + "," + std::to_string(msg.round) + "," +
                      std::string(to_string(msg.kind)) + "," + std::to_string(msg.records.size()) + "\n";
    for (const auto& r : msg.records) {
        out += std::to_string(r.cluster);
        out += ',';
        out += format_double(r.mean[0]);
        out += ',';
        if (msg.kind == MemoryKind::policy) {
            out += format_double(r.mean[1]);
            out += ',';
        }
        out += std::to_string(r.visits);
        out += '\n';
    }
    return out;
}

namespace {

struct Field {
    std::string_view text;
    std::size_t column;
};

std::vector<Field> split_fields(std::string_view line) {
    std::vector<Field> out;
    std::size_t col = 0;
    for (auto piece : split(line, ',')) {
        out.push_back({piece, col});
        col += piece.size() + 1;
    }
    return out;
}

template <typename Int>
Int int_field(const Field& f, std::size_t line, const char* name) {
    auto v = parse_int<Int>(f.text);
    if (!v) throw ParseError(line, f.column, std::string("expected integer ") + name + ", got '" + std::string(f.text) + "'");
    return *v;
}

double double_field(const Field& f, std::size_t line, const char* name) {
    auto v = parse_double(f.text);
    if (!v || !std::isfinite(*v)) {
        throw ParseError(line, f.column, std::string("expected finite number ") + name + ", got '" + std::string(f.text) + "'");
    }
    return *v;
}

}  // namespace

ExchangeMessage deserialize(std::string_view text) {
    std::vector<std::string_view> lines = split(text, '\n');
    if (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.empty()) throw ParseError(1, 0, "empty message");

    const auto header = split_fields(lines[0]);
    if (header.size() != 6) throw ParseError(1, 0, "header must have 6 comma-separated fields");
    if (header[0].text != "FRD") throw ParseError(1, header[0].column, "expected magic 'FRD'");
    if (header[1].text != "v1") throw ParseError(1, header[1].column, "unsupported version '" + std::string(header[1].text) + "'");

    ExchangeMessage msg;
    msg.agent_id = int_field<int>(header[2], 1, "agent_id");
    msg.round = int_field<int>(header[3], 1, "round");
    try {
        msg.kind = memory_kind_from_string(header[4].text);
    } catch (const std::invalid_argument&) {
        throw ParseError(1, header[4].column, "kind must be 'policy' or 'value'");
    }
    const auto count = int_field<std::size_t>(header[5], 1, "num_records");
    if (lines.size() - 1 != count) {
        throw ParseError(lines.size(), 0,
                         "header announces " + std::to_string(count) + " records, found " + std::to_string(lines.size() - 1));
    }

    const std::size_t arity = msg.kind == MemoryKind::policy ? 4 : 3;
    msg.records.reserve(count);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::size_t line_no = i + 1;
        const auto fields = split_fields(lines[i]);
        if (fields.size() != arity) {
            throw ParseError(line_no, 0, "expected " + std::to_string(arity) + " fields, got " + std::to_string(fields.size()));
        }
        ExchangeRecord r;
        r.cluster = int_field<ClusterId>(fields[0], line_no, "cluster_id");
        r.mean[0] = double_field(fields[1], line_no, "mean");
        if (msg.kind == MemoryKind::policy) {
            r.mean[1] = double_field(fields[2], line_no, "mean");
            if (r.mean[0] < 0.0 || r.mean[1] < 0.0 || std::abs(r.mean[0] + r.mean[1] - 1.0) > 1e-6) {
                throw ParseError(line_no, fields[1].column, "policy record is not a probability distribution");
            }
        }
        r.visits = int_field<std::int64_t>(fields.back(), line_no, "visit_count");
        if (r.visits < 1) throw ParseError(line_no, fields.back().column, "visit_count must be >= 1");
        if (!msg.records.empty() && r.cluster <= msg.records.back().cluster) {
            throw ParseError(line_no, 0, "records must be sorted by unique cluster id");
        }
        msg.records.push_back(r);
    }
    return msg;
}

GlobalProxyMemory aggregate(const std::vector<ExchangeMessage>& messages, AggregationMode mode) {
    if (messages.empty()) throw std::invalid_argument("aggregate: no messages");

    std::vector<const ExchangeMessage*> ordered;
    for (const auto& m : messages) ordered.push_back(&m);
    std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->agent_id < b->agent_id; });
    for (std::size_t i = 0; i < ordered.size(); ++i) {
        if (ordered[i]->kind != ordered[0]->kind) throw std::invalid_argument("aggregate: mixed memory kinds");
        if (ordered[i]->round != ordered[0]->round) throw std::invalid_argument("aggregate: mixed rounds");
        if (i > 0 && ordered[i]->agent_id == ordered[i - 1]->agent_id) {
            throw std::invalid_argument("aggregate: duplicate agent id " + std::to_string(ordered[i]->agent_id));
        }
    }

    struct Accumulator {
        std::array<double, 2> sum{0.0, 0.0};
        int agents = 0;
        std::int64_t visits = 0;
    };
    std::map<ClusterId, Accumulator> acc;
    for (const auto* m : ordered) {
        for (const auto& r : m->records) {
            auto& a = acc[r.cluster];
            const double w = mode == AggregationMode::visit_weighted ? static_cast<double>(r.visits) : 1.0;
            a.sum[0] += w * r.mean[0];
            a.sum[1] += w * r.mean[1];
            ++a.agents;
            a.visits += r.visits;
        }
    }

    GlobalProxyMemory global{ordered[0]->kind, ordered[0]->round, {}};
    global.entries.reserve(acc.size());
    for (const auto& [id, a] : acc) {
        const double denom =
            mode == AggregationMode::visit_weighted ? static_cast<double>(a.visits) : static_cast<double>(a.agents);
        global.entries.push_back({id, {a.sum[0] / denom, a.sum[1] / denom}, a.agents, a.visits});
    }
    return global;
}

void RoundSchedule::validate() const {
    if (initial_episodes < 0) throw std::invalid_argument("RoundSchedule: initial learning time must be >= 0");
    if (period < 1) throw std::invalid_argument("RoundSchedule: exchange period must be >= 1");
    if (round_cap < 0) throw std::invalid_argument("RoundSchedule: round cap must be >= 0");
}

bool should_exchange(const RoundSchedule& schedule, int completed_episodes) {
    const int since = completed_episodes - schedule.initial_episodes;
    return since > 0 && since % schedule.period == 0;
}

void for_each_worker(std::vector<Worker>& workers, const std::function<void(Worker&)>& fn) {
    if (workers.size() == 1) {
        fn(workers.front());
        return;
    }
    std::vector<std::exception_ptr> errors(workers.size());
    std::vector<std::thread> threads;
    threads.reserve(workers.size());
    for (std::size_t i = 0; i < workers.size(); ++i) {
        threads.emplace_back([&, i] {
            try {
                fn(workers[i]);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (!errors[i]) continue;
        try {
            std::rethrow_exception(errors[i]);
        } catch (const std::exception& e) {
            throw std::runtime_error("agent " + std::to_string(workers[i].agent.id()) + " failed: " + e.what());
        }
    }
}

void run_local_episodes(std::vector<Worker>& workers, int count, const RecordingPlan& plan, const StopRule& stop) {
    for_each_worker(workers, [&](Worker& w) {
        std::vector<VisitRecorder*> recorders;
        if (plan.policy) recorders.push_back(&w.policy_memory);
        if (plan.value) recorders.push_back(&w.value_memory);
        if (plan.raw) recorders.push_back(&w.raw_memory);
        for (int k = 0; k < count && !w.completed_at; ++k) {
            w.durations.push_back(w.agent.run_episode(w.env, recorders));
            if (stop && stop(w)) w.completed_at = w.episodes();
        }
    });
}

std::optional<int> earliest_completion(const std::vector<Worker>& workers) {
    std::optional<int> best;
    for (const auto& w : workers)
        if (w.completed_at && (!best || *w.completed_at < *best)) best = w.completed_at;
    return best;
}

GlobalProxyMemory Server::collect(const std::vector<std::string>& wire_messages, int round) {
    std::vector<ExchangeMessage> messages;
    messages.reserve(wire_messages.size());
    for (const auto& wire : wire_messages) {
        messages.push_back(deserialize(wire));
        const auto& m = messages.back();
        if (m.round != round) {
            throw std::invalid_argument("Server::collect: message for round " + std::to_string(m.round) +
                                        " arrived in round " + std::to_string(round));
        }
        log_.push_back({round, m.agent_id, std::string(to_string(m.kind)), static_cast<std::int64_t>(m.records.size()),
                        static_cast<std::int64_t>(wire.size())});
    }
    return aggregate(messages, mode_);
}

RoundReport run_round(std::vector<Worker>& workers, Server& server, const RoundSchedule& schedule, int round,
                      const FrdOptions& options, const DistillConfig& distill, const StopRule& stop) {
    schedule.validate();
    distill.validate();
    const bool use_policy = options.variant != FrdVariant::value;
    const bool use_value = options.variant != FrdVariant::policy;

    RoundReport report;
    report.round = round;
    run_local_episodes(workers, schedule.period, RecordingPlan{use_policy, use_value, false}, stop);
    report.completed_at = earliest_completion(workers);
    if (report.completed_at) return report;

    // barrier passed: every agent finalizes and uploads
    std::vector<std::string> policy_wire;
    std::vector<std::string> value_wire;
    for (auto& w : workers) {
        if (use_policy) {
            auto records = options.lifetime_memory ? w.policy_memory.snapshot() : w.policy_memory.finalize_local();
            policy_wire.push_back(serialize(ExchangeMessage::from_policy(w.agent.id(), round, records)));
        }
        if (use_value) {
            auto records = options.lifetime_memory ? w.value_memory.snapshot() : w.value_memory.finalize_value();
            value_wire.push_back(serialize(ExchangeMessage::from_value(w.agent.id(), round, records)));
        }
    }
    const auto log_start = server.payload_log().size();
    std::optional<GlobalProxyMemory> global_policy;
    std::optional<GlobalProxyMemory> global_value;
    if (use_policy) global_policy = server.collect(policy_wire, round);
    if (use_value) global_value = server.collect(value_wire, round);
    report.payload.assign(server.payload_log().begin() + static_cast<std::ptrdiff_t>(log_start),
                          server.payload_log().end());
    report.global_policy_entries = global_policy ? global_policy->size() : 0;
    report.global_value_entries = global_value ? global_value->size() : 0;

    const ClusterGrid& grid = workers.front().policy_memory.grid();
    report.policy_loss_traces.resize(workers.size());
    report.value_loss_traces.resize(workers.size());
    for_each_worker(workers, [&](Worker& w) {
        const auto i = static_cast<std::size_t>(&w - workers.data());
        if (global_policy && !global_policy->empty()) {
            report.policy_loss_traces[i] = distill_policy(w.agent.policy_net(), *global_policy, grid, distill);
        }
        if (global_value && !global_value->empty()) {
            report.value_loss_traces[i] = distill_value(w.agent.value_net(), *global_value, grid, distill);
        }
    });
    report.exchanged = true;
    return report;
}

}  // namespace frd
