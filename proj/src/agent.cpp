#include "frd/agent.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "frd/text.hpp"

namespace frd {

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kSamplingStream = 2;
constexpr std::uint64_t kEnvStream = 3;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::string expect_key(std::istream& in, const std::string& key) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("checkpoint truncated before '" + key + "'");
    const auto space = line.find(' ');
    if (space == std::string::npos || line.substr(0, space) != key) {
        throw std::runtime_error("checkpoint: expected '" + key + "', got '" + line + "'");
    }
    return line.substr(space + 1);
}

double expect_double(std::istream& in, const std::string& key) {
    auto v = parse_double(expect_key(in, key));
    if (!v) throw std::runtime_error("checkpoint: bad number for '" + key + "'");
    return *v;
}

std::vector<double> parse_list(const std::string& text) {
    std::vector<double> out;
    for (auto tok : split(text, ' ')) {
        if (tok.empty()) continue;
        auto v = parse_double(tok);
        if (!v) throw std::runtime_error("checkpoint: bad parameter value '" + std::string(tok) + "'");
        out.push_back(*v);
    }
    return out;
}

}  // namespace

void AgentConfig::validate() const {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must be in (0, 1]");
    if (!(policy_lr > 0.0) || !(value_lr > 0.0)) throw std::invalid_argument("learning rates must be > 0");
    if (hidden_width < 1 || hidden_layers < 1) throw std::invalid_argument("hidden width and layer count must be >= 1");
    if (!(entropy_coeff >= 0.0)) throw std::invalid_argument("entropy_coeff must be >= 0");
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t agent_id, std::uint64_t stream) {
    return splitmix64(splitmix64(splitmix64(master) ^ agent_id) ^ (stream * 0x632be59bd9b4e019ULL));
}

Agent::Agent(int id, const AgentConfig& config, std::uint64_t master_seed)
    : id_(id),
      config_((config.validate(), config)),
      init_rng_(derive_seed(master_seed, static_cast<std::uint64_t>(id), kInitStream)),
      sampling_rng_(derive_seed(master_seed, static_cast<std::uint64_t>(id), kSamplingStream)),
      env_rng_(derive_seed(master_seed, static_cast<std::uint64_t>(id), kEnvStream)),
      policy_net_(Mlp::he_uniform(Mlp::widths_for(config.hidden_width, config.hidden_layers, 2), init_rng_)),
      value_net_(Mlp::he_uniform(Mlp::widths_for(config.hidden_width, config.hidden_layers, 1), init_rng_)),
      policy_opt_(policy_net_, config.policy_lr),
      value_opt_(value_net_, config.value_lr) {}

std::pair<Action, PolicyVector> Agent::act(const EnvState& state) {
    const PolicyVector p = policy(state);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Action a = u(sampling_rng_) < p[0] ? Action::left : Action::right;
    return {a, p};
}

PolicyVector Agent::policy(const EnvState& state) const { return softmax2(policy_net_.forward(to_input(state))); }

double Agent::value(const EnvState& state) const { return value_net_.forward(to_input(state))(0); }

double Agent::advantage(const TrajectoryStep& step) const {
    const double next_value = step.terminal ? 0.0 : value(step.next_state);
    return step.reward + config_.gamma * next_value - value(step.state);
}

EpisodeGradients Agent::episode_gradients(std::span<const TrajectoryStep> steps) const {
    if (steps.empty()) throw std::invalid_argument("update_from_episode: empty episode");
    const auto n = static_cast<Eigen::Index>(steps.size());
    const double inv_n = 1.0 / static_cast<double>(n);

    Eigen::MatrixXd states(4, n);
    Eigen::MatrixXd next_states(4, n);
    for (Eigen::Index t = 0; t < n; ++t) {
        states.col(t) = to_input(steps[t].state);
        next_states.col(t) = to_input(steps[t].next_state);
    }

    const Eigen::RowVectorXd values = value_net_.forward_batch(states).row(0);
    const Eigen::RowVectorXd next_values = value_net_.forward_batch(next_states).row(0);
    Eigen::RowVectorXd td_error(n);
    for (Eigen::Index t = 0; t < n; ++t) {
        const auto& s = steps[t];
        const double bootstrap = s.terminal ? 0.0 : next_values(t);
        td_error(t) = s.reward + config_.gamma * bootstrap - values(t);
    }

    EpisodeGradients out;
    out.advantages.assign(td_error.data(), td_error.data() + n);
    out.summary.value_loss = td_error.squaredNorm() * inv_n;
    out.summary.mean_advantage = td_error.mean();

    // d/dV mean (y - V)^2 = -2 (y - V) / n
    out.value = value_net_.backward(states, Eigen::MatrixXd((-2.0 * inv_n) * td_error));

    const Eigen::MatrixXd probs = softmax_columns(policy_net_.forward_batch(states));
    Eigen::MatrixXd upstream(2, n);
    double policy_loss = 0.0;
    for (Eigen::Index t = 0; t < n; ++t) {
        const int a = static_cast<int>(steps[t].action);
        const double adv = td_error(t);
        // d(-log pi_a)/dz = pi - onehot(a)
        Eigen::Vector2d grad = adv * probs.col(t);
        grad(a) -= adv;
        policy_loss -= std::log(probs(a, t)) * adv;
        if (config_.entropy_coeff > 0.0) {
            // d(-H)/dz_j = pi_j (log pi_j + H)
            const Eigen::Vector2d logp = probs.col(t).array().log();
            const double entropy = -(probs.col(t).array() * logp.array()).sum();
            grad += config_.entropy_coeff * (probs.col(t).array() * (logp.array() + entropy)).matrix();
            policy_loss -= config_.entropy_coeff * entropy;
        }
        upstream.col(t) = grad * inv_n;
    }
    out.summary.policy_loss = policy_loss * inv_n;
    out.policy = policy_net_.backward(states, upstream);
    return out;
}

UpdateSummary Agent::update_from_episode(std::span<const TrajectoryStep> steps) {
    // both gradients use the pre-update value net
    EpisodeGradients g = episode_gradients(steps);
    value_opt_.step(value_net_, g.value);
    policy_opt_.step(policy_net_, g.policy);
    return g.summary;
}

int Agent::run_episode(CartPole& env, std::span<VisitRecorder* const> recorders) {
    bool need_value = false;
    for (auto* r : recorders) need_value = need_value || r->wants_value();

    std::vector<TrajectoryStep> trajectory;
    trajectory.reserve(CartPole::kMaxSteps);
    EnvState state = env.reset(env_rng_);
    while (true) {
        const auto [action, probs] = act(state);
        if (!recorders.empty()) {
            const double v = need_value ? value(state) : 0.0;
            for (auto* r : recorders) r->record(state, probs, v);
        }
        const StepOutcome out = env.step(action);
        trajectory.push_back({state, action, out.reward, out.next_state, out.terminated, out.truncated, probs});
        state = out.next_state;
        if (out.done) break;
    }
    update_from_episode(trajectory);
    return static_cast<int>(trajectory.size());
}

void Agent::save_checkpoint(std::ostream& out) const {
    out << "FRD-CHECKPOINT v1\n";
    out << "id " << id_ << '\n';
    out << "gamma " << format_double(config_.gamma) << '\n';
    out << "policy_lr " << format_double(config_.policy_lr) << '\n';
    out << "value_lr " << format_double(config_.value_lr) << '\n';
    out << "hidden_width " << config_.hidden_width << '\n';
    out << "hidden_layers " << config_.hidden_layers << '\n';
    out << "entropy_coeff " << format_double(config_.entropy_coeff) << '\n';
    for (const auto* name : {"policy", "value"}) {
        const Mlp& net = std::string(name) == "policy" ? policy_net_ : value_net_;
        out << name << ' ' << net.fingerprint();
        for (double v : net.parameters()) out << ' ' << format_double(v);
        out << '\n';
    }
    out << "init_rng " << init_rng_ << '\n';
    out << "sampling_rng " << sampling_rng_ << '\n';
    out << "env_rng " << env_rng_ << '\n';
}

Agent Agent::load_checkpoint(std::istream& in) {
    std::string header;
    if (!std::getline(in, header) || header != "FRD-CHECKPOINT v1") {
        throw std::runtime_error("checkpoint: missing 'FRD-CHECKPOINT v1' header");
    }
    const auto id = parse_int<int>(expect_key(in, "id"));
    if (!id) throw std::runtime_error("checkpoint: bad id");
    AgentConfig cfg;
    cfg.gamma = expect_double(in, "gamma");
    cfg.policy_lr = expect_double(in, "policy_lr");
    cfg.value_lr = expect_double(in, "value_lr");
    cfg.hidden_width = static_cast<int>(expect_double(in, "hidden_width"));
    cfg.hidden_layers = static_cast<int>(expect_double(in, "hidden_layers"));
    cfg.entropy_coeff = expect_double(in, "entropy_coeff");

    Agent agent(*id, cfg, 0);
    for (auto* net : {&agent.policy_net_, &agent.value_net_}) {
        const std::string key = net == &agent.policy_net_ ? "policy" : "value";
        const std::string rest = expect_key(in, key);
        const auto space = rest.find(' ');
        const std::string fingerprint = rest.substr(0, space);
        if (fingerprint != net->fingerprint()) {
            throw std::runtime_error("checkpoint: " + key + " fingerprint " + fingerprint + " does not match " +
                                     net->fingerprint());
        }
        net->set_parameters(parse_list(space == std::string::npos ? std::string() : rest.substr(space + 1)));
    }
    for (auto [key, rng] : {std::pair{"init_rng", &agent.init_rng_}, std::pair{"sampling_rng", &agent.sampling_rng_},
                            std::pair{"env_rng", &agent.env_rng_}}) {
        std::istringstream ss(expect_key(in, key));
        ss >> *rng;
        if (!ss) throw std::runtime_error(std::string("checkpoint: bad generator state for ") + key);
    }
    return agent;
}

}  // namespace frd
