#include "frd/distillation.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace frd {

namespace {

void require_kind(const GlobalProxyMemory& memory, MemoryKind kind) {
    if (memory.empty()) throw std::invalid_argument("distillation: global memory is empty");
    if (memory.kind != kind) {
        throw std::invalid_argument("distillation: expected a " + std::string(to_string(kind)) + " memory, got " +
                                    std::string(to_string(memory.kind)));
    }
}

void check_finite(double loss, int epoch) {
    if (!std::isfinite(loss)) {
        throw std::runtime_error("distillation: non-finite loss at epoch " + std::to_string(epoch));
    }
}

template <typename Targets, typename GradFn>
std::vector<double> fit(Mlp& net, const Targets& targets, const DistillConfig& cfg, GradFn grad_fn) {
    cfg.validate();
    if (targets.size() == 0) throw std::invalid_argument("distillation: no targets");
    Adam opt(net, cfg.lr);
    std::vector<double> trace;
    trace.reserve(static_cast<std::size_t>(cfg.epochs) + 1);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double loss = 0.0;
        Gradients g = grad_fn(net, targets, &loss);
        check_finite(loss, epoch);
        trace.push_back(loss);
        opt.step(net, g);
    }
    double final_loss = 0.0;
    grad_fn(net, targets, &final_loss);
    check_finite(final_loss, cfg.epochs);
    trace.push_back(final_loss);
    return trace;
}

}  // namespace

void DistillConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("DistillConfig: epochs must be >= 1");
    if (!(lr > 0.0)) throw std::invalid_argument("DistillConfig: lr must be > 0");
    if (!full_batch) throw std::invalid_argument("DistillConfig: only full-batch distillation is supported");
}

PolicyTargets policy_targets(const GlobalProxyMemory& memory, const ClusterGrid& grid) {
    require_kind(memory, MemoryKind::policy);
    const auto n = static_cast<Eigen::Index>(memory.size());
    PolicyTargets t{Eigen::MatrixXd(4, n), Eigen::MatrixXd(2, n)};
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto& e = memory.entries[static_cast<std::size_t>(k)];
        t.states.col(k) = to_input(grid.proxy_state(e.cluster));
        t.probs(0, k) = e.mean[0];
        t.probs(1, k) = e.mean[1];
    }
    return t;
}

PolicyTargets policy_targets(const ExperienceMemory& memory) {
    if (memory.empty()) throw std::invalid_argument("distillation: experience memory is empty");
    const auto n = static_cast<Eigen::Index>(memory.size());
    PolicyTargets t{Eigen::MatrixXd(4, n), Eigen::MatrixXd(2, n)};
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto& e = memory.entries()[static_cast<std::size_t>(k)];
        t.states.col(k) = to_input(e.state);
        t.probs(0, k) = e.policy[0];
        t.probs(1, k) = e.policy[1];
    }
    return t;
}

ValueTargets value_targets(const GlobalProxyMemory& memory, const ClusterGrid& grid) {
    require_kind(memory, MemoryKind::value);
    const auto n = static_cast<Eigen::Index>(memory.size());
    ValueTargets t{Eigen::MatrixXd(4, n), Eigen::VectorXd(n)};
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto& e = memory.entries[static_cast<std::size_t>(k)];
        t.states.col(k) = to_input(grid.proxy_state(e.cluster));
        t.values(k) = e.mean[0];
    }
    return t;
}

Gradients cross_entropy_gradient(const Mlp& policy_net, const PolicyTargets& targets, double* loss) {
    double total = 0.0;
    Gradients g = policy_net.backward_from_outputs(targets.states, [&](const Eigen::MatrixXd& logits) {
        Eigen::MatrixXd upstream(logits.rows(), logits.cols());
        for (Eigen::Index k = 0; k < logits.cols(); ++k) {
            const double peak = logits.col(k).maxCoeff();
            const Eigen::VectorXd shifted = logits.col(k).array() - peak;
            const double log_norm = std::log(shifted.array().exp().sum());
            const Eigen::VectorXd log_probs = shifted.array() - log_norm;
            total -= targets.probs.col(k).dot(log_probs);
            // d/dz of -sum_a t_a log softmax(z)_a
            upstream.col(k) = log_probs.array().exp() * targets.probs.col(k).sum() - targets.probs.col(k).array();
        }
        return upstream;
    });
    if (loss) *loss = total;
    return g;
}

double cross_entropy_loss(const Mlp& policy_net, const PolicyTargets& targets) {
    const Eigen::MatrixXd logits = policy_net.forward_batch(targets.states);
    double total = 0.0;
    for (Eigen::Index k = 0; k < logits.cols(); ++k) {
        const double peak = logits.col(k).maxCoeff();
        const Eigen::VectorXd shifted = logits.col(k).array() - peak;
        const double log_norm = std::log(shifted.array().exp().sum());
        total -= targets.probs.col(k).dot((shifted.array() - log_norm).matrix());
    }
    return total;
}

double entropy_lower_bound(const PolicyTargets& targets) {
    double total = 0.0;
    for (Eigen::Index k = 0; k < targets.probs.cols(); ++k)
        for (Eigen::Index a = 0; a < targets.probs.rows(); ++a) {
            const double p = targets.probs(a, k);
            if (p > 0.0) total -= p * std::log(p);
        }
    return total;
}

Gradients squared_error_gradient(const Mlp& value_net, const ValueTargets& targets, double* loss) {
    const double inv_n = 1.0 / static_cast<double>(targets.size());
    return value_net.backward_from_outputs(targets.states, [&](const Eigen::MatrixXd& predictions) {
        const Eigen::RowVectorXd residual = predictions.row(0) - targets.values.transpose();
        if (loss) *loss = residual.squaredNorm() * inv_n;
        return Eigen::MatrixXd((2.0 * inv_n) * residual);
    });
}

double squared_error_loss(const Mlp& value_net, const ValueTargets& targets) {
    const Eigen::RowVectorXd predictions = value_net.forward_batch(targets.states).row(0);
    return (predictions - targets.values.transpose()).squaredNorm() / static_cast<double>(targets.size());
}

double policy_distill_loss(const Mlp& policy_net, const GlobalProxyMemory& memory, const ClusterGrid& grid) {
    return cross_entropy_loss(policy_net, policy_targets(memory, grid));
}

std::vector<double> fit_policy(Mlp& policy_net, const PolicyTargets& targets, const DistillConfig& cfg) {
    return fit(policy_net, targets, cfg, [](const Mlp& net, const PolicyTargets& t, double* loss) {
        return cross_entropy_gradient(net, t, loss);
    });
}

std::vector<double> fit_value(Mlp& value_net, const ValueTargets& targets, const DistillConfig& cfg) {
    return fit(value_net, targets, cfg, [](const Mlp& net, const ValueTargets& t, double* loss) {
        return squared_error_gradient(net, t, loss);
    });
}

std::vector<double> distill_policy(Mlp& policy_net, const GlobalProxyMemory& memory, const ClusterGrid& grid,
                                   const DistillConfig& cfg) {
    return fit_policy(policy_net, policy_targets(memory, grid), cfg);
}

std::vector<double> raw_policy_distill(Mlp& policy_net, const ExperienceMemory& memory, const DistillConfig& cfg) {
    return fit_policy(policy_net, policy_targets(memory), cfg);
}

std::vector<double> distill_value(Mlp& value_net, const GlobalProxyMemory& memory, const ClusterGrid& grid,
                                  const DistillConfig& cfg) {
    return fit_value(value_net, value_targets(memory, grid), cfg);
}

}  // namespace frd
