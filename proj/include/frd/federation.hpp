#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "frd/agent.hpp"
#include "frd/cartpole.hpp"
#include "frd/proxy_memory.hpp"

namespace frd {

struct DistillConfig;

enum class MemoryKind { policy, value };

std::string_view to_string(MemoryKind kind);
MemoryKind memory_kind_from_string(std::string_view s);

/// One cluster's averaged knowledge. For value messages only mean[0] is used
/// and mean[1] is always 0.
struct ExchangeRecord {
    ClusterId cluster = 0;
    std::array<double, 2> mean{0.0, 0.0};
    std::int64_t visits = 0;
    bool operator==(const ExchangeRecord&) const = default;
};

/// A finalized local proxy memory in transit to the server. Carries no raw
/// states and no per-step data: only cluster ids, averages and counts.
struct ExchangeMessage {
    int agent_id = 0;
    int round = 0;
    MemoryKind kind = MemoryKind::policy;
    std::vector<ExchangeRecord> records;  // sorted by cluster, unique

    bool operator==(const ExchangeMessage&) const = default;

    static ExchangeMessage from_policy(int agent_id, int round, const std::vector<ProxyRecord>& records);
    static ExchangeMessage from_value(int agent_id, int round, const std::vector<ValueRecord>& records);
};

/// Structured deserialization failure; line is 1-based, column is a 0-based byte offset in that line.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, std::size_t column, const std::string& what);
    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

/// Line-oriented text format:
///
///     FRD,v1,<agent_id>,<round>,<kind>,<num_records>
///     <cluster_id>,<p0>,<p1>,<visits>        (policy)
///     <cluster_id>,<value>,<visits>          (value)
///
/// Floats use the shortest decimal that round-trips the 64-bit value.
std::string serialize(const ExchangeMessage& msg);
/// Throws ParseError on malformed input.
ExchangeMessage deserialize(std::string_view text);

struct GlobalEntry {
    ClusterId cluster = 0;
    /// Policy memories: averaged distribution. Value memories: mean[0] only.
    std::array<double, 2> mean{0.0, 0.0};
    int contributing_agents = 0;
    std::int64_t total_visits = 0;
    bool operator==(const GlobalEntry&) const = default;
};

/// Server-side aggregate; one entry per cluster visited by at least one agent.
struct GlobalProxyMemory {
    MemoryKind kind = MemoryKind::policy;
    int round = 0;
    std::vector<GlobalEntry> entries;  // sorted by cluster

    std::size_t size() const { return entries.size(); }
    bool empty() const { return entries.empty(); }
    bool operator==(const GlobalProxyMemory&) const = default;
};

enum class AggregationMode { unweighted, visit_weighted };

/// Per-cluster mean over contributing agents. Unweighted: arithmetic mean of
/// the agents' means; visit-weighted: weighted by each agent's visit count.
/// Contributions are summed in agent-id order, so the result does not depend
/// on the order of `messages`. Throws std::invalid_argument on an empty list,
/// duplicate agent ids, or mixed rounds/kinds.
GlobalProxyMemory aggregate(const std::vector<ExchangeMessage>& messages,
                            AggregationMode mode = AggregationMode::unweighted);

struct RoundSchedule {
    int initial_episodes = 0;  // I
    int period = 1;            // E
    int round_cap = 0;         // 0 = unlimited

    void validate() const;
};

/// True iff completed >= I and (completed - I) is a positive multiple of E.
bool should_exchange(const RoundSchedule& schedule, int completed_episodes);

/// Per-agent payload of one exchange.
struct PayloadEntry {
    int round = 0;
    int agent_id = 0;
    std::string kind;
    std::int64_t records = 0;
    std::int64_t bytes = 0;
};

/// One agent plus everything it owns locally.
struct Worker {
    Worker(Agent agent_, const ClusterGrid& grid)
        : agent(std::move(agent_)), policy_memory(grid), value_memory(grid) {}

    Agent agent;
    CartPole env;
    LocalProxyMemory policy_memory;
    LocalValueMemory value_memory;
    ExperienceMemory raw_memory;
    std::vector<int> durations;
    /// Episode number (1-based) at which the stop rule first fired.
    std::optional<int> completed_at;

    int episodes() const { return static_cast<int>(durations.size()); }
};

/// Which memories are filled while episodes are played.
struct RecordingPlan {
    bool policy = false;
    bool value = false;
    bool raw = false;
};

using StopRule = std::function<bool(const Worker&)>;

/// Plays `count` episodes on every worker concurrently (one thread per worker)
/// and waits for all of them. A worker stops early once `stop` returns true
/// after one of its episodes; that episode is stored in completed_at.
/// An exception in any worker is rethrown after the barrier.
void run_local_episodes(std::vector<Worker>& workers, int count, const RecordingPlan& plan, const StopRule& stop);

/// Runs `fn(worker)` for every worker concurrently and joins.
void for_each_worker(std::vector<Worker>& workers, const std::function<void(Worker&)>& fn);

std::optional<int> earliest_completion(const std::vector<Worker>& workers);

enum class FrdVariant { policy, value, both };

struct FrdOptions {
    FrdVariant variant = FrdVariant::policy;
    /// Keep accumulating local averages across rounds instead of resetting after each exchange.
    bool lifetime_memory = false;
};

struct RoundReport {
    int round = 0;
    std::vector<PayloadEntry> payload;
    /// Global memory sizes (policy, value) after aggregation; 0 when not exchanged.
    std::size_t global_policy_entries = 0;
    std::size_t global_value_entries = 0;
    /// Per-agent distillation loss traces in worker order.
    std::vector<std::vector<double>> policy_loss_traces;
    std::vector<std::vector<double>> value_loss_traces;
    /// Set when the stop rule fired during the round; no exchange happens then.
    std::optional<int> completed_at;
    bool exchanged = false;
};

/// Collects messages, aggregates and hands the global memory back.
class Server {
public:
    explicit Server(AggregationMode mode = AggregationMode::unweighted) : mode_(mode) {}

    /// Deserializes every payload, logs its size and aggregates.
    GlobalProxyMemory collect(const std::vector<std::string>& wire_messages, int round);

    const std::vector<PayloadEntry>& payload_log() const { return log_; }
    AggregationMode mode() const { return mode_; }

private:
    AggregationMode mode_;
    std::vector<PayloadEntry> log_;
};

/// One FRD exchange round: E local episodes with recording, barrier,
/// finalize + serialize local memories, aggregate on `server`, then every
/// agent distills from the global memory (policy first, then value for `both`).
RoundReport run_round(std::vector<Worker>& workers, Server& server, const RoundSchedule& schedule, int round,
                      const FrdOptions& options, const DistillConfig& distill, const StopRule& stop = {});

}  // namespace frd
