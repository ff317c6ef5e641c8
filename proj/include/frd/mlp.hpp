#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "frd/cartpole.hpp"

namespace frd {

/// Probability distribution over {left, right}.
using PolicyVector = std::array<double, 2>;

enum class Activation { relu, identity };

/// Parameter-shaped container used for gradients and optimizer moments.
struct Gradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    void set_zero();
    bool all_finite() const;
    double squared_norm() const;
    std::vector<double> flatten() const;
    Gradients& operator+=(const Gradients& other);
    Gradients& operator*=(double s);
};

/// Dense feed-forward network. Hidden layers use `hidden_activation`,
/// the output layer is always linear (logits or a scalar value).
class Mlp {
public:
    /// All weights and biases zero.
    explicit Mlp(std::vector<int> layer_widths, Activation hidden_activation = Activation::relu);

    /// He-uniform weights (limit sqrt(6 / fan_in)), zero biases.
    static Mlp he_uniform(std::vector<int> layer_widths, Rng& rng,
                          Activation hidden_activation = Activation::relu);

    /// Widths for a 4-input net with `hidden_layers` layers of `hidden_width` units.
    static std::vector<int> widths_for(int hidden_width, int hidden_layers, int outputs);

    Eigen::VectorXd forward(const Eigen::VectorXd& input) const;
    /// Column-per-sample batch evaluation.
    Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs) const;

    /// Gradient of sum_j <upstream.col(j), f(inputs.col(j))> with respect to the
    /// parameters, i.e. the upstream columns are dLoss/dOutput per sample.
    Gradients backward(const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& upstream) const;
    Gradients backward(const Eigen::VectorXd& input, const Eigen::VectorXd& upstream) const;
    /// One forward pass over `inputs`; `upstream_of` maps the outputs to dLoss/dOutput.
    Gradients backward_from_outputs(const Eigen::MatrixXd& inputs,
                                    const std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>& upstream_of) const;

    Gradients zero_gradients() const;

    int input_width() const { return widths_.front(); }
    int output_width() const { return widths_.back(); }
    std::size_t layer_count() const { return weights_.size(); }
    const std::vector<int>& layer_widths() const { return widths_; }
    Activation hidden_activation() const { return activation_; }

    Eigen::MatrixXd& weight(std::size_t layer) { return weights_.at(layer); }
    const Eigen::MatrixXd& weight(std::size_t layer) const { return weights_.at(layer); }
    Eigen::VectorXd& bias(std::size_t layer) { return biases_.at(layer); }
    const Eigen::VectorXd& bias(std::size_t layer) const { return biases_.at(layer); }

    /// Flat export in layer order: W0 (row-major), b0, W1, b1, ...
    std::vector<double> parameters() const;
    void set_parameters(std::span<const double> flat);
    std::size_t parameter_count() const { return parameter_count(widths_); }
    static std::size_t parameter_count(const std::vector<int>& layer_widths);

    /// e.g. "4-24-24-2/relu"; two nets can exchange parameters iff fingerprints match.
    std::string fingerprint() const;

    bool all_finite() const;

    /// Applies `g` (same shape) as params += scale * g. Used by the optimizer and tests.
    void add_scaled(const Gradients& g, double scale);

    friend class Adam;

private:
    std::vector<int> widths_;
    Activation activation_;
    std::vector<Eigen::MatrixXd> weights_;  // out x in
    std::vector<Eigen::VectorXd> biases_;
};

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);
PolicyVector softmax2(const Eigen::VectorXd& logits);
/// Column-wise softmax.
Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits);

Eigen::VectorXd to_input(const EnvState& s);

/// Adam optimizer state (beta1 0.9, beta2 0.999, eps 1e-8).
class Adam {
public:
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEpsilon = 1e-8;

    Adam(const Mlp& net, double learning_rate);

    /// Throws std::domain_error on non-finite gradients or shape mismatch.
    void step(Mlp& net, const Gradients& grads);

    long long steps() const { return t_; }
    double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }

private:
    double lr_;
    long long t_ = 0;
    Gradients m_;
    Gradients v_;
};

}  // namespace frd
