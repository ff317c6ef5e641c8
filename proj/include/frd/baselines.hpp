#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "frd/distillation.hpp"
#include "frd/federation.hpp"
#include "frd/mlp.hpp"

namespace frd {

/// Flat parameter list in Mlp::parameters() order plus the architecture it belongs to.
struct ParameterSnapshot {
    std::string fingerprint;
    std::vector<double> values;

    static ParameterSnapshot of(const Mlp& net);
    /// Throws std::invalid_argument when the fingerprint does not match `net`.
    void apply_to(Mlp& net) const;

    bool operator==(const ParameterSnapshot&) const = default;
};

/// Elementwise mean with uniform weights. Throws std::invalid_argument on an
/// empty list or mismatched fingerprints.
ParameterSnapshot fedavg(const std::vector<ParameterSnapshot>& snapshots);

/// One text header line `FRD-SNAPSHOT,v1,<fingerprint>,<count>` followed by
/// count little-endian IEEE-754 doubles, so size = header + 8 * count.
std::string serialize_snapshot(const ParameterSnapshot& snapshot);
/// Throws ParseError on malformed input.
ParameterSnapshot deserialize_snapshot(std::string_view bytes);

void write_snapshot(const std::filesystem::path& path, const ParameterSnapshot& snapshot);
ParameterSnapshot read_snapshot(const std::filesystem::path& path);

/// Raw experience upload: header `FRD-RAW,v1,<agent_id>,<round>,<num_records>`
/// then one `x,x_dot,theta,theta_dot,p0,p1` line per recorded step.
std::string serialize_experience(int agent_id, int round, const ExperienceMemory& memory);
ExperienceMemory deserialize_experience(std::string_view text, int* agent_id = nullptr, int* round = nullptr);

struct FedAvgOptions {
    /// Average the value networks too (off: only policy networks are federated).
    bool include_value_net = false;
};

/// E local episodes, barrier, then every policy net (optionally value net) is
/// replaced by the uniform average of all agents' parameters.
RoundReport run_fedavg_round(std::vector<Worker>& workers, const RoundSchedule& schedule, int round,
                             const FedAvgOptions& options = {}, const StopRule& stop = {});

/// E local episodes recording raw experience, barrier, server concatenates the
/// uploads into the global experience memory and every agent distills from it.
RoundReport run_policy_distillation_round(std::vector<Worker>& workers, const RoundSchedule& schedule, int round,
                                          const DistillConfig& distill, const StopRule& stop = {});

}  // namespace frd
