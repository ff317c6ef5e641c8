#include "frd/cartpole.hpp"

#include <cmath>
#include <stdexcept>

namespace frd {

EnvState CartPole::reset(Rng& rng) {
    std::uniform_real_distribution<double> init(-0.05, 0.05);
    state_.x = init(rng);
    state_.x_dot = init(rng);
    state_.theta = init(rng);
    state_.theta_dot = init(rng);
    steps_ = 0;
    done_ = false;
    return state_;
}

EnvState CartPole::dynamics(const EnvState& s, Action action) {
    const double force = action == Action::right ? kForceMag : -kForceMag;
    const double cos_theta = std::cos(s.theta);
    const double sin_theta = std::sin(s.theta);

    const double temp = (force + kPoleMassLength * s.theta_dot * s.theta_dot * sin_theta) / kTotalMass;
    const double theta_acc = (kGravity * sin_theta - cos_theta * temp) /
                             (kHalfLength * (4.0 / 3.0 - kPoleMass * cos_theta * cos_theta / kTotalMass));
    const double x_acc = temp - kPoleMassLength * theta_acc * cos_theta / kTotalMass;

    // position uses the pre-step velocity
    return {s.x + kTau * s.x_dot, s.x_dot + kTau * x_acc, s.theta + kTau * s.theta_dot,
            s.theta_dot + kTau * theta_acc};
}

bool CartPole::out_of_bounds(const EnvState& s) {
    return s.x < -kXThreshold || s.x > kXThreshold || s.theta < -kThetaThreshold || s.theta > kThetaThreshold;
}

StepOutcome CartPole::step(Action action) {
    if (done_) {
        throw std::logic_error("CartPole::step called on a finished episode; call reset() first");
    }
    state_ = dynamics(state_, action);
    ++steps_;

    StepOutcome out;
    out.next_state = state_;
    out.reward = 1.0;
    out.step_index = steps_;
    out.terminated = out_of_bounds(state_);
    out.truncated = !out.terminated && steps_ >= kMaxSteps;
    out.done = out.terminated || out.truncated;
    done_ = out.done;
    return out;
}

}  // namespace frd
