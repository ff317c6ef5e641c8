#pragma once

#include <Eigen/Dense>

#include <vector>

#include "frd/federation.hpp"
#include "frd/mlp.hpp"
#include "frd/proxy_memory.hpp"

namespace frd {

struct DistillConfig {
    int epochs = 50;
    double lr = 1e-3;
    bool full_batch = true;

    void validate() const;
};

/// Inputs (4 x N) and target distributions (2 x N) for cross-entropy fitting.
struct PolicyTargets {
    Eigen::MatrixXd states;
    Eigen::MatrixXd probs;

    Eigen::Index size() const { return states.cols(); }
};

/// Inputs (4 x N) and scalar targets (N) for squared-error fitting.
struct ValueTargets {
    Eigen::MatrixXd states;
    Eigen::VectorXd values;

    Eigen::Index size() const { return states.cols(); }
};

/// Targets at the proxy states (cell midpoints) of a policy-kind global memory.
PolicyTargets policy_targets(const GlobalProxyMemory& memory, const ClusterGrid& grid);
/// Targets at the actual recorded states.
PolicyTargets policy_targets(const ExperienceMemory& memory);
ValueTargets value_targets(const GlobalProxyMemory& memory, const ClusterGrid& grid);

/// -sum_k sum_a target_k(a) log pi(a | s_k), summed (not averaged) over entries.
double cross_entropy_loss(const Mlp& policy_net, const PolicyTargets& targets);
/// Gradient of cross_entropy_loss; writes the loss to `loss` when non-null.
Gradients cross_entropy_gradient(const Mlp& policy_net, const PolicyTargets& targets, double* loss = nullptr);

/// sum_k H(target_k): the value cross_entropy_loss attains iff the net matches every target.
double entropy_lower_bound(const PolicyTargets& targets);

/// Mean over entries of (V(s_k) - target_k)^2.
double squared_error_loss(const Mlp& value_net, const ValueTargets& targets);
Gradients squared_error_gradient(const Mlp& value_net, const ValueTargets& targets, double* loss = nullptr);

/// Cross-entropy of the local policy evaluated at the proxy states. Throws on
/// an empty or value-kind memory.
double policy_distill_loss(const Mlp& policy_net, const GlobalProxyMemory& memory, const ClusterGrid& grid);

/// Full-batch Adam fitting (fresh optimizer state, cfg.lr) for cfg.epochs steps.
/// The trace holds the loss before the first step followed by the loss after
/// every step, so it has cfg.epochs + 1 entries. Throws std::runtime_error on a
/// non-finite loss.
std::vector<double> fit_policy(Mlp& policy_net, const PolicyTargets& targets, const DistillConfig& cfg);
std::vector<double> fit_value(Mlp& value_net, const ValueTargets& targets, const DistillConfig& cfg);

std::vector<double> distill_policy(Mlp& policy_net, const GlobalProxyMemory& memory, const ClusterGrid& grid,
                                   const DistillConfig& cfg);
/// Policy distillation against the concatenated raw experience memory.
std::vector<double> raw_policy_distill(Mlp& policy_net, const ExperienceMemory& memory, const DistillConfig& cfg);
std::vector<double> distill_value(Mlp& value_net, const GlobalProxyMemory& memory, const ClusterGrid& grid,
                                  const DistillConfig& cfg);

}  // namespace frd
