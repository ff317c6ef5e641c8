#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "frd/cartpole.hpp"
#include "frd/mlp.hpp"

namespace frd {

struct AgentConfig {
    double gamma = 0.99;
    double policy_lr = 1e-3;
    double value_lr = 1e-2;
    int hidden_width = 24;
    int hidden_layers = 2;
    double entropy_coeff = 0.0;

    /// Throws std::invalid_argument when a field is out of range.
    void validate() const;
};

struct TrajectoryStep {
    EnvState state;
    Action action = Action::left;
    double reward = 0.0;
    EnvState next_state;
    bool terminal = false;
    bool truncated = false;
    /// The distribution `action` was sampled from.
    PolicyVector policy_at_state{0.5, 0.5};
};

/// Receives one callback per environment step while an episode is played.
class VisitRecorder {
public:
    virtual ~VisitRecorder() = default;
    virtual void record(const EnvState& state, const PolicyVector& policy, double value) = 0;
    /// When false the agent may skip the value-network evaluation and pass 0.
    virtual bool wants_value() const { return false; }
};

struct UpdateSummary {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double mean_advantage = 0.0;
};

/// Both losses' gradients for one episode, evaluated at the current parameters.
struct EpisodeGradients {
    Gradients policy;
    Gradients value;
    /// Per-step TD(0) advantages, also the value-loss residuals.
    std::vector<double> advantages;
    UpdateSummary summary;
};

/// Derives an independent 64-bit seed for (master, agent, stream) via splitmix64 mixing.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t agent_id, std::uint64_t stream);

/// Advantage actor-critic learner with separate policy and value networks.
///
/// Random streams are split per purpose: weight init, action sampling and
/// environment resets each get their own generator derived from the seed.
class Agent {
public:
    Agent(int id, const AgentConfig& config, std::uint64_t master_seed);

    /// Samples an action from the current policy; returns it with its distribution.
    std::pair<Action, PolicyVector> act(const EnvState& state);

    PolicyVector policy(const EnvState& state) const;
    double value(const EnvState& state) const;

    /// r + gamma * V(s') - V(s); V(s') is taken as 0 on failure termination
    /// but kept when the step was a time-limit truncation.
    double advantage(const TrajectoryStep& step) const;

    /// One value step (TD(0) squared error) then one policy step (advantage-weighted
    /// log-likelihood plus optional entropy bonus). Throws on an empty episode.
    UpdateSummary update_from_episode(std::span<const TrajectoryStep> steps);

    /// Gradients of the value loss mean_t (y_t - V(s_t))^2 (y_t held fixed) and of
    /// the policy loss mean_t [-log pi(a_t|s_t) A_t - entropy_coeff H(pi(.|s_t))]
    /// (A_t held fixed). Throws on an empty episode.
    EpisodeGradients episode_gradients(std::span<const TrajectoryStep> steps) const;

    /// Resets `env`, plays to the end, feeds every visited state to `recorders`,
    /// updates once and returns the episode length.
    int run_episode(CartPole& env, std::span<VisitRecorder* const> recorders = {});

    int id() const { return id_; }
    const AgentConfig& config() const { return config_; }

    Mlp& policy_net() { return policy_net_; }
    const Mlp& policy_net() const { return policy_net_; }
    Mlp& value_net() { return value_net_; }
    const Mlp& value_net() const { return value_net_; }
    Adam& policy_optimizer() { return policy_opt_; }
    Adam& value_optimizer() { return value_opt_; }

    Rng& sampling_rng() { return sampling_rng_; }
    Rng& env_rng() { return env_rng_; }

    /// Text checkpoint: config, both parameter lists and the generator states.
    void save_checkpoint(std::ostream& out) const;
    static Agent load_checkpoint(std::istream& in);

private:
    int id_;
    AgentConfig config_;
    Rng init_rng_;
    Rng sampling_rng_;
    Rng env_rng_;
    Mlp policy_net_;
    Mlp value_net_;
    Adam policy_opt_;
    Adam value_opt_;
};

}  // namespace frd
