#pragma once

#include <array>
#include <cstdint>
#include <random>

namespace frd {

using Rng = std::mt19937_64;

/// CartPole observation: cart position/velocity, pole angle/angular velocity.
struct EnvState {
    double x = 0.0;
    double x_dot = 0.0;
    double theta = 0.0;
    double theta_dot = 0.0;

    std::array<double, 4> as_array() const { return {x, x_dot, theta, theta_dot}; }
    static EnvState from_array(const std::array<double, 4>& v) { return {v[0], v[1], v[2], v[3]}; }

    EnvState operator-() const { return {-x, -x_dot, -theta, -theta_dot}; }
    bool operator==(const EnvState&) const = default;
};

enum class Action : int { left = 0, right = 1 };

inline Action mirror(Action a) { return a == Action::left ? Action::right : Action::left; }

struct StepOutcome {
    EnvState next_state;
    double reward = 1.0;
    bool done = false;
    /// Pole fell or cart left the track.
    bool terminated = false;
    /// Hit the step limit without failing.
    bool truncated = false;
    int step_index = 0;
};

/// CartPole-v1 with the classic Euler integrator. One instance per agent.
class CartPole {
public:
    static constexpr double kGravity = 9.8;
    static constexpr double kCartMass = 1.0;
    static constexpr double kPoleMass = 0.1;
    static constexpr double kTotalMass = kCartMass + kPoleMass;
    static constexpr double kHalfLength = 0.5;
    static constexpr double kPoleMassLength = kPoleMass * kHalfLength;
    static constexpr double kForceMag = 10.0;
    static constexpr double kTau = 0.02;
    static constexpr double kXThreshold = 2.4;
    // 12 degrees
    static constexpr double kThetaThreshold = 12.0 * 2.0 * 3.14159265358979323846 / 360.0;
    static constexpr int kMaxSteps = 500;

    CartPole() = default;
    /// Starts from an explicit state with the step counter at zero.
    explicit CartPole(const EnvState& start) : state_(start) {}

    EnvState reset(Rng& rng);
    /// Throws std::logic_error when the episode has already ended.
    StepOutcome step(Action action);

    const EnvState& state() const { return state_; }
    int steps() const { return steps_; }
    bool done() const { return done_; }

    /// One Euler step of the equations of motion, no bookkeeping.
    static EnvState dynamics(const EnvState& s, Action action);
    static bool out_of_bounds(const EnvState& s);

private:
    EnvState state_{};
    int steps_ = 0;
    bool done_ = false;
};

}  // namespace frd
