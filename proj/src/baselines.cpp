#include "frd/baselines.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "frd/text.hpp"

namespace frd {

ParameterSnapshot ParameterSnapshot::of(const Mlp& net) { return {net.fingerprint(), net.parameters()}; }

void ParameterSnapshot::apply_to(Mlp& net) const {
    if (fingerprint != net.fingerprint()) {
        throw std::invalid_argument("snapshot fingerprint " + fingerprint + " does not match network " +
                                    net.fingerprint());
    }
    net.set_parameters(values);
}

ParameterSnapshot fedavg(const std::vector<ParameterSnapshot>& snapshots) {
    if (snapshots.empty()) throw std::invalid_argument("fedavg: no snapshots");
    const auto& first = snapshots.front();
    for (const auto& s : snapshots) {
        if (s.fingerprint != first.fingerprint || s.values.size() != first.values.size()) {
            throw std::invalid_argument("fedavg: fingerprint mismatch (" + s.fingerprint + " vs " + first.fingerprint + ")");
        }
    }
    ParameterSnapshot mean{first.fingerprint, std::vector<double>(first.values.size(), 0.0)};
    for (const auto& s : snapshots)
        for (std::size_t i = 0; i < s.values.size(); ++i) mean.values[i] += s.values[i];
    const auto n = static_cast<double>(snapshots.size());
    for (double& v : mean.values) v /= n;
    return mean;
}

std::string serialize_snapshot(const ParameterSnapshot& snapshot) {
    std::string out = "FRD-SNAPSHOT,v1," + snapshot.fingerprint + "," + std::to_string(snapshot.values.size()) + "\n";
    out.reserve(out.size() + 8 * snapshot.values.size());
    for (double v : snapshot.values) {
        auto bits = std::bit_cast<std::uint64_t>(v);
        for (int b = 0; b < 8; ++b) {
            out.push_back(static_cast<char>(bits & 0xffU));
            bits >>= 8;
        }
    }
    return out;
}

ParameterSnapshot deserialize_snapshot(std::string_view bytes) {
    const auto newline = bytes.find('\n');
    if (newline == std::string_view::npos) throw ParseError(1, 0, "snapshot header line is not terminated");
    const auto header = split(bytes.substr(0, newline), ',');
    if (header.size() != 4 || header[0] != "FRD-SNAPSHOT") throw ParseError(1, 0, "expected 'FRD-SNAPSHOT,v1,<fingerprint>,<count>'");
    if (header[1] != "v1") throw ParseError(1, 13, "unsupported snapshot version");
    const auto count = parse_int<std::size_t>(header[3]);
    if (!count) throw ParseError(1, 0, "bad parameter count");
    const auto body = bytes.substr(newline + 1);
    if (body.size() != 8 * *count) {
        throw ParseError(2, 0, "expected " + std::to_string(8 * *count) + " payload bytes, got " + std::to_string(body.size()));
    }
    ParameterSnapshot s{std::string(header[2]), std::vector<double>(*count)};
    for (std::size_t i = 0; i < *count; ++i) {
        std::uint64_t bits = 0;
        for (int b = 7; b >= 0; --b) bits = (bits << 8) | static_cast<unsigned char>(body[8 * i + static_cast<std::size_t>(b)]);
        s.values[i] = std::bit_cast<double>(bits);
    }
    return s;
}

void write_snapshot(const std::filesystem::path& path, const ParameterSnapshot& snapshot) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    const auto bytes = serialize_snapshot(snapshot);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

ParameterSnapshot read_snapshot(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_snapshot(bytes);
}

std::string serialize_experience(int agent_id, int round, const ExperienceMemory& memory) {
    std::string out = "FRD-RAW,v1," + std::to_string(agent_id) + "," + std::to_string(round) + "," +
                      std::to_string(memory.size()) + "\n";
    for (const auto& e : memory.entries()) {
        for (double v : e.state.as_array()) {
            out += format_double(v);
            out += ',';
        }
        out += format_double(e.policy[0]);
        out += ',';
        out += format_double(e.policy[1]);
        out += '\n';
    }
    return out;
}

ExperienceMemory deserialize_experience(std::string_view text, int* agent_id, int* round) {
    auto lines = split(text, '\n');
    if (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.empty()) throw ParseError(1, 0, "empty message");
    const auto header = split(lines[0], ',');
    if (header.size() != 5 || header[0] != "FRD-RAW" || header[1] != "v1") {
        throw ParseError(1, 0, "expected 'FRD-RAW,v1,<agent_id>,<round>,<num_records>'");
    }
    const auto id = parse_int<int>(header[2]);
    const auto rnd = parse_int<int>(header[3]);
    const auto count = parse_int<std::size_t>(header[4]);
    if (!id || !rnd || !count) throw ParseError(1, 0, "bad integer in header");
    if (lines.size() - 1 != *count) throw ParseError(lines.size(), 0, "record count does not match header");
    if (agent_id) *agent_id = *id;
    if (round) *round = *rnd;

    ExperienceMemory memory;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto fields = split(lines[i], ',');
        if (fields.size() != 6) throw ParseError(i + 1, 0, "expected 6 fields");
        std::array<double, 6> v{};
        for (std::size_t f = 0; f < 6; ++f) {
            auto parsed = parse_double(fields[f]);
            if (!parsed) throw ParseError(i + 1, 0, "bad number '" + std::string(fields[f]) + "'");
            v[f] = *parsed;
        }
        memory.record(EnvState{v[0], v[1], v[2], v[3]}, PolicyVector{v[4], v[5]}, 0.0);
    }
    return memory;
}

RoundReport run_fedavg_round(std::vector<Worker>& workers, const RoundSchedule& schedule, int round,
                             const FedAvgOptions& options, const StopRule& stop) {
    schedule.validate();
    RoundReport report;
    report.round = round;
    run_local_episodes(workers, schedule.period, RecordingPlan{}, stop);
    report.completed_at = earliest_completion(workers);
    if (report.completed_at) return report;

    auto exchange = [&](auto net_of, const char* kind) {
        std::vector<ParameterSnapshot> uploads;
        for (auto& w : workers) {
            const std::string wire = serialize_snapshot(ParameterSnapshot::of(net_of(w)));
            uploads.push_back(deserialize_snapshot(wire));
            report.payload.push_back({round, w.agent.id(), kind, static_cast<std::int64_t>(uploads.back().values.size()),
                                      static_cast<std::int64_t>(wire.size())});
        }
        const ParameterSnapshot mean = deserialize_snapshot(serialize_snapshot(fedavg(uploads)));
        for (auto& w : workers) mean.apply_to(net_of(w));
    };
    exchange([](Worker& w) -> Mlp& { return w.agent.policy_net(); }, "policy_params");
    if (options.include_value_net) exchange([](Worker& w) -> Mlp& { return w.agent.value_net(); }, "value_params");
    report.exchanged = true;
    return report;
}

RoundReport run_policy_distillation_round(std::vector<Worker>& workers, const RoundSchedule& schedule, int round,
                                          const DistillConfig& distill, const StopRule& stop) {
    schedule.validate();
    distill.validate();
    RoundReport report;
    report.round = round;
    for (auto& w : workers) w.raw_memory.clear();
    run_local_episodes(workers, schedule.period, RecordingPlan{false, false, true}, stop);
    report.completed_at = earliest_completion(workers);
    if (report.completed_at) return report;

    ExperienceMemory global;
    for (auto& w : workers) {
        const std::string wire = serialize_experience(w.agent.id(), round, w.raw_memory);
        const ExperienceMemory upload = deserialize_experience(wire);
        report.payload.push_back(
            {round, w.agent.id(), "raw", static_cast<std::int64_t>(upload.size()), static_cast<std::int64_t>(wire.size())});
        global.append(upload);
        w.raw_memory.clear();
    }
    report.global_policy_entries = global.size();

    report.policy_loss_traces.resize(workers.size());
    for_each_worker(workers, [&](Worker& w) {
        const auto i = static_cast<std::size_t>(&w - workers.data());
        report.policy_loss_traces[i] = raw_policy_distill(w.agent.policy_net(), global, distill);
    });
    report.exchanged = true;
    return report;
}

}  // namespace frd
