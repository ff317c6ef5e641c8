#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>

#include "frd/mlp.hpp"
#include "gradient_check.hpp"

using namespace frd;

namespace {

// Straight nested-loop evaluation, independent of Eigen expressions in Mlp.
std::vector<double> reference_forward(const Mlp& net, std::vector<double> a) {
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        const auto& w = net.weight(l);
        const auto& b = net.bias(l);
        std::vector<double> z(static_cast<std::size_t>(w.rows()), 0.0);
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            double acc = b(r);
            for (Eigen::Index c = 0; c < w.cols(); ++c) acc += w(r, c) * a[static_cast<std::size_t>(c)];
            const bool hidden = l + 1 < net.layer_count();
            z[static_cast<std::size_t>(r)] = hidden && net.hidden_activation() == Activation::relu ? std::max(acc, 0.0) : acc;
        }
        a = std::move(z);
    }
    return a;
}

}  // namespace

TEST_CASE("zero network outputs zero") {
    Mlp net({4, 8, 8, 2});
    Eigen::VectorXd x(4);
    x << 1, -2, 3, -4;
    CHECK(net.forward(x).isZero(0.0));
}

TEST_CASE("identity layer passes input through") {
    Mlp net({4, 4}, Activation::identity);
    net.weight(0) = Eigen::MatrixXd::Identity(4, 4);
    Eigen::VectorXd x(4);
    x << 0.5, -1.5, 2.0, 7.25;
    CHECK(net.forward(x) == x);
}

TEST_CASE("forward matches reference arithmetic") {
    Rng rng(1);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        Mlp net = Mlp::he_uniform({4, 16, 9, 3}, rng);
        for (std::size_t l = 0; l < net.layer_count(); ++l)
            for (Eigen::Index i = 0; i < net.bias(l).size(); ++i) net.bias(l)(i) = 0.1 * nd(rng);
        std::vector<double> x{nd(rng), nd(rng), nd(rng), nd(rng)};
        const auto expect = reference_forward(net, x);
        const Eigen::VectorXd got = net.forward(Eigen::Map<Eigen::VectorXd>(x.data(), 4));
        for (int i = 0; i < 3; ++i) CHECK(std::abs(got(i) - expect[static_cast<std::size_t>(i)]) <= 1e-12);

        Eigen::MatrixXd batch(4, 2);
        batch.col(0) = Eigen::Map<Eigen::VectorXd>(x.data(), 4);
        batch.col(1) = -batch.col(0);
        CHECK((net.forward_batch(batch).col(0) - got).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("forward rejects wrong input size") {
    Mlp net({4, 3, 2});
    CHECK_THROWS_AS(net.forward(Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST_CASE("softmax") {
    Eigen::VectorXd z(2);
    z << 0, 0;
    auto p = softmax2(z);
    CHECK(p[0] == 0.5);
    CHECK(p[1] == 0.5);

    z << 1, 0;
    p = softmax2(z);
    // e / (e + 1)
    CHECK(p[0] == doctest::Approx(0.7310585786300049).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(0.2689414213699951).epsilon(1e-15));

    Eigen::VectorXd shifted = z.array() + 123.456;
    const auto q = softmax2(shifted);
    CHECK(std::abs(q[0] - p[0]) < 1e-15);

    z << 1000, -1000;
    p = softmax2(z);
    CHECK(std::isfinite(p[0]));
    CHECK(p[1] >= 0.0);
    CHECK(p[0] + p[1] == doctest::Approx(1.0));

    Rng rng(3);
    std::normal_distribution<double> nd(0.0, 5.0);
    for (int i = 0; i < 1000; ++i) {
        z << nd(rng), nd(rng);
        p = softmax2(z);
        CHECK(p[0] > 0.0);
        CHECK(p[1] > 0.0);
        CHECK(std::abs(p[0] + p[1] - 1.0) <= 1e-12);
    }
}

TEST_CASE("zero upstream gives zero gradients") {
    Rng rng(2);
    Mlp net = Mlp::he_uniform({4, 10, 10, 2}, rng);
    const auto g = net.backward(Eigen::MatrixXd(Eigen::MatrixXd::Random(4, 5)), Eigen::MatrixXd(Eigen::MatrixXd::Zero(2, 5)));
    CHECK(g.squared_norm() == 0.0);
}

TEST_CASE("backward matches central finite differences on random nets") {
    Rng rng(17);
    std::normal_distribution<double> nd(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const int width = trial % 2 == 0 ? 24 : 100;
        const int layers = 1 + (trial / 2) % 2;
        const int outputs = 1 + trial % 3;
        Mlp net = Mlp::he_uniform(Mlp::widths_for(width, layers, outputs), rng);
        Eigen::MatrixXd x(4, 3);
        Eigen::MatrixXd u(outputs, 3);
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
        for (Eigen::Index i = 0; i < u.size(); ++i) u.data()[i] = nd(rng);

        auto loss = [&](const Mlp& m) { return (u.array() * m.forward_batch(x).array()).sum(); };
        const auto analytic = net.backward(x, u).flatten();
        const auto numeric = testing::finite_difference(net, loss);
        worst = std::max(worst, testing::max_relative_error(analytic, numeric));
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("linear net with squared error has the least-squares gradient") {
    Rng rng(4);
    std::normal_distribution<double> nd(0.0, 1.0);
    Mlp net({4, 3}, Activation::identity);
    for (Eigen::Index i = 0; i < net.weight(0).size(); ++i) net.weight(0).data()[i] = nd(rng);
    for (Eigen::Index i = 0; i < 3; ++i) net.bias(0)(i) = nd(rng);

    Eigen::MatrixXd x(4, 6), y(3, 6);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
    for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = nd(rng);

    // L = 1/2 sum ||W x + b - y||^2  =>  dW = R x^T, db = R 1, with R = W x + b - y
    Eigen::MatrixXd residual = net.weight(0) * x;
    residual.colwise() += net.bias(0);
    residual -= y;
    const Eigen::MatrixXd expect_w = residual * x.transpose();
    const Eigen::VectorXd expect_b = residual.rowwise().sum();

    const auto g = net.backward(x, residual);
    CHECK((g.weights[0] - expect_w).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((g.biases[0] - expect_b).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("parameter export and import") {
    Rng rng(9);
    Mlp a = Mlp::he_uniform({4, 24, 24, 2}, rng);
    CHECK(a.parameter_count() == (4 + 1) * 24 + (24 + 1) * 24 + (24 + 1) * 2);
    CHECK(a.parameters().size() == a.parameter_count());
    CHECK(a.fingerprint() == "4-24-24-2/relu");

    Mlp b({4, 24, 24, 2});
    b.set_parameters(a.parameters());
    CHECK(b.parameters() == a.parameters());
    CHECK(b.weight(1) == a.weight(1));
    CHECK_THROWS_AS(b.set_parameters(std::vector<double>(3, 0.0)), std::invalid_argument);
}

TEST_CASE("Adam: zero gradient leaves parameters unchanged") {
    Rng rng(1);
    Mlp net = Mlp::he_uniform({4, 5, 2}, rng);
    const auto before = net.parameters();
    Adam opt(net, 1e-3);
    opt.step(net, net.zero_gradients());
    CHECK(net.parameters() == before);
    CHECK(opt.steps() == 1);
}

TEST_CASE("Adam: first step on a scalar moves by lr * g / (|g| + eps)") {
    Mlp net({1, 1}, Activation::identity);
    net.weight(0)(0, 0) = 0.3;
    Adam opt(net, 1e-3);
    auto g = net.zero_gradients();
    const double grad = 2.5;
    g.weights[0](0, 0) = grad;
    opt.step(net, g);
    // m_hat = g, v_hat = g^2 after bias correction
    const double expected = 0.3 - 1e-3 * grad / (std::abs(grad) + 1e-8);
    CHECK(net.weight(0)(0, 0) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(net.bias(0)(0) == 0.0);

    // second step with the same gradient: m_hat and v_hat still equal g and g^2
    opt.step(net, g);
    CHECK(net.weight(0)(0, 0) == doctest::Approx(expected - 1e-3 * grad / (std::abs(grad) + 1e-8)).epsilon(1e-12));
}

TEST_CASE("Adam rejects non-finite gradients") {
    Mlp net({4, 2});
    Adam opt(net, 1e-3);
    auto g = net.zero_gradients();
    g.biases[0](1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(opt.step(net, g), std::domain_error);
}

TEST_CASE("identical nets, gradients and optimizer states evolve identically") {
    Rng r1(8), r2(8);
    Mlp a = Mlp::he_uniform({4, 6, 2}, r1);
    Mlp b = Mlp::he_uniform({4, 6, 2}, r2);
    Adam oa(a, 1e-2), ob(b, 1e-2);
    const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(4, 3);
    const Eigen::MatrixXd u = Eigen::MatrixXd::Constant(2, 3, 0.5);
    for (int i = 0; i < 5; ++i) {
        oa.step(a, a.backward(x, u));
        ob.step(b, b.backward(x, u));
    }
    CHECK(a.parameters() == b.parameters());
}
