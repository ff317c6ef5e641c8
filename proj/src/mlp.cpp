#include "frd/mlp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace frd {

namespace {

void check_shape(const Mlp& net, const Gradients& g) {
    if (g.weights.size() != net.layer_count() || g.biases.size() != net.layer_count()) {
        throw std::domain_error("gradient layer count does not match network");
    }
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        if (g.weights[l].rows() != net.weight(l).rows() || g.weights[l].cols() != net.weight(l).cols() ||
            g.biases[l].size() != net.bias(l).size()) {
            throw std::domain_error("gradient shape does not match network at layer " + std::to_string(l));
        }
    }
}

}  // namespace

void Gradients::set_zero() {
    for (auto& w : weights) w.setZero();
    for (auto& b : biases) b.setZero();
}

bool Gradients::all_finite() const {
    for (const auto& w : weights)
        if (!w.allFinite()) return false;
    for (const auto& b : biases)
        if (!b.allFinite()) return false;
    return true;
}

double Gradients::squared_norm() const {
    double total = 0.0;
    for (const auto& w : weights) total += w.squaredNorm();
    for (const auto& b : biases) total += b.squaredNorm();
    return total;
}

std::vector<double> Gradients::flatten() const {
    std::vector<double> out;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        for (Eigen::Index r = 0; r < weights[l].rows(); ++r)
            for (Eigen::Index c = 0; c < weights[l].cols(); ++c) out.push_back(weights[l](r, c));
        for (Eigen::Index i = 0; i < biases[l].size(); ++i) out.push_back(biases[l](i));
    }
    return out;
}

Gradients& Gradients::operator+=(const Gradients& other) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        weights[l] += other.weights[l];
        biases[l] += other.biases[l];
    }
    return *this;
}

Gradients& Gradients::operator*=(double s) {
    for (auto& w : weights) w *= s;
    for (auto& b : biases) b *= s;
    return *this;
}

Mlp::Mlp(std::vector<int> layer_widths, Activation hidden_activation)
    : widths_(std::move(layer_widths)), activation_(hidden_activation) {
    if (widths_.size() < 2) throw std::invalid_argument("Mlp needs at least an input and an output width");
    for (int w : widths_)
        if (w < 1) throw std::invalid_argument("Mlp layer widths must be >= 1");
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
        weights_.push_back(Eigen::MatrixXd::Zero(widths_[l + 1], widths_[l]));
        biases_.push_back(Eigen::VectorXd::Zero(widths_[l + 1]));
    }
}

Mlp Mlp::he_uniform(std::vector<int> layer_widths, Rng& rng, Activation hidden_activation) {
    Mlp net(std::move(layer_widths), hidden_activation);
    for (auto& w : net.weights_) {
        const double limit = std::sqrt(6.0 / static_cast<double>(w.cols()));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
    }
    return net;
}

std::vector<int> Mlp::widths_for(int hidden_width, int hidden_layers, int outputs) {
    std::vector<int> widths{4};
    for (int i = 0; i < hidden_layers; ++i) widths.push_back(hidden_width);
    widths.push_back(outputs);
    return widths;
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& input) const {
    if (input.size() != widths_.front()) {
        throw std::invalid_argument("Mlp::forward: input has " + std::to_string(input.size()) + " entries, expected " +
                                    std::to_string(widths_.front()));
    }
    Eigen::VectorXd a = input;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        Eigen::VectorXd z = weights_[l] * a + biases_[l];
        if (l + 1 < weights_.size() && activation_ == Activation::relu) z = z.cwiseMax(0.0);
        a = std::move(z);
    }
    return a;
}

Eigen::MatrixXd Mlp::forward_batch(const Eigen::MatrixXd& inputs) const {
    if (inputs.rows() != widths_.front()) {
        throw std::invalid_argument("Mlp::forward_batch: input rows do not match input width");
    }
    Eigen::MatrixXd a = inputs;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        Eigen::MatrixXd z = weights_[l] * a;
        z.colwise() += biases_[l];
        if (l + 1 < weights_.size() && activation_ == Activation::relu) z = z.cwiseMax(0.0);
        a = std::move(z);
    }
    return a;
}

Gradients Mlp::backward(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& upstream) const {
    if (upstream.rows() != widths_.back() || inputs.cols() != upstream.cols()) {
        throw std::invalid_argument("Mlp::backward: input/upstream shapes do not match the network");
    }
    return backward_from_outputs(inputs, [&](const Eigen::MatrixXd&) { return upstream; });
}

Gradients Mlp::backward_from_outputs(const Eigen::MatrixXd& inputs,
                                     const std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>& upstream_of) const {
    if (inputs.rows() != widths_.front()) {
        throw std::invalid_argument("Mlp::backward: input rows do not match input width");
    }
    const std::size_t layers = weights_.size();

    // activations[l] is the input to layer l
    std::vector<Eigen::MatrixXd> activations;
    activations.reserve(layers);
    activations.push_back(inputs);
    Eigen::MatrixXd output;
    for (std::size_t l = 0; l < layers; ++l) {
        Eigen::MatrixXd z = weights_[l] * activations.back();
        z.colwise() += biases_[l];
        if (l + 1 == layers) {
            output = std::move(z);
            break;
        }
        if (activation_ == Activation::relu) z = z.cwiseMax(0.0);
        activations.push_back(std::move(z));
    }

    Eigen::MatrixXd delta = upstream_of(output);
    if (delta.rows() != widths_.back() || delta.cols() != inputs.cols()) {
        throw std::invalid_argument("Mlp::backward: upstream shape does not match the outputs");
    }
    Gradients g = zero_gradients();
    for (std::size_t l = layers; l-- > 0;) {
        g.weights[l].noalias() = delta * activations[l].transpose();
        g.biases[l] = delta.rowwise().sum();
        if (l == 0) break;
        Eigen::MatrixXd prev = weights_[l].transpose() * delta;
        if (activation_ == Activation::relu) {
            prev = (activations[l].array() > 0.0).select(prev, 0.0);
        }
        delta = std::move(prev);
    }
    return g;
}

Gradients Mlp::backward(const Eigen::VectorXd& input, const Eigen::VectorXd& upstream) const {
    return backward(Eigen::MatrixXd(input), Eigen::MatrixXd(upstream));
}

Gradients Mlp::zero_gradients() const {
    Gradients g;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        g.weights.push_back(Eigen::MatrixXd::Zero(weights_[l].rows(), weights_[l].cols()));
        g.biases.push_back(Eigen::VectorXd::Zero(biases_[l].size()));
    }
    return g;
}

std::vector<double> Mlp::parameters() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        for (Eigen::Index r = 0; r < weights_[l].rows(); ++r)
            for (Eigen::Index c = 0; c < weights_[l].cols(); ++c) out.push_back(weights_[l](r, c));
        for (Eigen::Index i = 0; i < biases_[l].size(); ++i) out.push_back(biases_[l](i));
    }
    return out;
}

void Mlp::set_parameters(std::span<const double> flat) {
    if (flat.size() != parameter_count()) {
        throw std::invalid_argument("Mlp::set_parameters: expected " + std::to_string(parameter_count()) +
                                    " values, got " + std::to_string(flat.size()));
    }
    std::size_t k = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        for (Eigen::Index r = 0; r < weights_[l].rows(); ++r)
            for (Eigen::Index c = 0; c < weights_[l].cols(); ++c) weights_[l](r, c) = flat[k++];
        for (Eigen::Index i = 0; i < biases_[l].size(); ++i) biases_[l](i) = flat[k++];
    }
}

std::size_t Mlp::parameter_count(const std::vector<int>& layer_widths) {
    std::size_t count = 0;
    for (std::size_t l = 0; l + 1 < layer_widths.size(); ++l) {
        count += static_cast<std::size_t>(layer_widths[l] + 1) * static_cast<std::size_t>(layer_widths[l + 1]);
    }
    return count;
}

std::string Mlp::fingerprint() const {
    std::string out;
    for (std::size_t i = 0; i < widths_.size(); ++i) {
        if (i) out += '-';
        out += std::to_string(widths_[i]);
    }
    out += activation_ == Activation::relu ? "/relu" : "/identity";
    return out;
}

bool Mlp::all_finite() const {
    for (const auto& w : weights_)
        if (!w.allFinite()) return false;
    for (const auto& b : biases_)
        if (!b.allFinite()) return false;
    return true;
}

void Mlp::add_scaled(const Gradients& g, double scale) {
    check_shape(*this, g);
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        weights_[l] += scale * g.weights[l];
        biases_[l] += scale * g.biases[l];
    }
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
    const double peak = logits.maxCoeff();
    Eigen::VectorXd e = (logits.array() - peak).exp();
    return e / e.sum();
}

PolicyVector softmax2(const Eigen::VectorXd& logits) {
    if (logits.size() != 2) throw std::invalid_argument("softmax2 expects two logits");
    const Eigen::VectorXd p = softmax(logits);
    return {p(0), p(1)};
}

Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd out(logits.rows(), logits.cols());
    for (Eigen::Index c = 0; c < logits.cols(); ++c) out.col(c) = softmax(logits.col(c));
    return out;
}

Eigen::VectorXd to_input(const EnvState& s) {
    Eigen::VectorXd v(4);
    v << s.x, s.x_dot, s.theta, s.theta_dot;
    return v;
}

Adam::Adam(const Mlp& net, double learning_rate)
    : lr_(learning_rate), m_(net.zero_gradients()), v_(net.zero_gradients()) {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("Adam learning rate must be > 0");
}

void Adam::step(Mlp& net, const Gradients& grads) {
    check_shape(net, grads);
    if (!grads.all_finite()) throw std::domain_error("Adam::step: non-finite gradient");

    ++t_;
    const double correction1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double correction2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    const double step_size = lr_ / correction1;
    const double sqrt_c2 = std::sqrt(correction2);

    auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
        m = kBeta1 * m + (1.0 - kBeta1) * g;
        v = kBeta2 * v.array() + (1.0 - kBeta2) * g.array().square();
        param.array() -= step_size * m.array() / (v.array().sqrt() / sqrt_c2 + kEpsilon);
    };
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        update(net.weights_[l], m_.weights[l], v_.weights[l], grads.weights[l]);
        update(net.biases_[l], m_.biases[l], v_.biases[l], grads.biases[l]);
    }
    if (!net.all_finite()) throw std::domain_error("Adam::step produced non-finite parameters");
}

}  // namespace frd
