#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "ntk/network.hpp"

using namespace ntk;
using namespace ntk::testing;

namespace {

// 2-3-2 net with fixed small weights; sigmoid hidden, identity output.
Network tiny_net(OutputHead head = OutputHead::Regression)
{
    Network net;
    net.head = head;
    net.layers.push_back(DenseLayer(2, 3, Activation::sigmoid()));
    net.layers.push_back(DenseLayer(3, 2, Activation::identity()));
    double w = 0.05;
    for (DenseLayer& l : net.layers) {
        for (double& x : l.weights) x = (w += 0.07);
        for (double& b : l.biases) b = (w -= 0.03);
    }
    return net;
}

// 2-3-1 net, the smallest shape whose output is a regression scalar.
Network tiny_reg_net()
{
    Network net;
    net.layers.push_back(DenseLayer(2, 3, Activation::sigmoid()));
    net.layers.push_back(DenseLayer(3, 1, Activation::identity()));
    double w = -0.3;
    for (DenseLayer& l : net.layers) {
        for (double& x : l.weights) x = (w += 0.11);
        for (double& b : l.biases) b = (w -= 0.05);
    }
    return net;
}

}  // namespace

TEST_CASE("activation kinds apply their definitions")
{
    CHECK(Activation::identity().apply(3.25) == 3.25);
    CHECK(Activation::sigmoid().apply(0.0) == 0.5);
    CHECK(Activation::sigmoid().apply(40.0) == doctest::Approx(1.0));

    const Activation step = Activation::binary_step(2.0);
    CHECK(step.apply(2.0) == 1.0);  // fires at the threshold itself
    CHECK(step.apply(std::nextafter(2.0, 0.0)) == 0.0);
    CHECK(step.apply(5.0) == 1.0);

    const Activation pulse = Activation::pulse(1.0, 0.25);
    CHECK(pulse.apply(1.0) == 1.0);
    CHECK(pulse.apply(0.75) == 1.0);   // window edges included
    CHECK(pulse.apply(1.25) == 1.0);
    CHECK(pulse.apply(std::nextafter(0.75, 0.0)) == 0.0);
    CHECK(pulse.apply(std::nextafter(1.25, 2.0)) == 0.0);

    const Activation exact = Activation::pulse(1.5, 0.0);
    CHECK(exact.apply(1.5) == 1.0);  // epsilon 0 is exact equality
    CHECK(exact.apply(std::nextafter(1.5, 2.0)) == 0.0);
}

TEST_CASE("step and pulse report zero derivative, smooth kinds their slope")
{
    CHECK(Activation::identity().derivative(7.0) == 1.0);
    CHECK(Activation::sigmoid().derivative(0.5) == 0.25);
    CHECK(Activation::binary_step(0.0).derivative(1.0) == 0.0);
    CHECK(Activation::pulse(0.0, 0.0).derivative(1.0) == 0.0);
}

TEST_CASE("dot sums in ascending index order")
{
    const Vec a = {1e16, 1.0, -1e16};
    const Vec b = {1.0, 1.0, 1.0};
    // Ascending order absorbs the 1.0 into 1e16 before cancelling.
    double manual = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) manual += a[i] * b[i];
    CHECK(bit_equal(dot(a, b), manual));
    CHECK(dot(a, b) == 0.0);
}

TEST_CASE("forward computes z = Wx + b per row")
{
    Network net;
    net.layers.push_back(DenseLayer(2, 2, Activation::identity()));
    net.layers[0].weights = {1.0, 2.0, 3.0, 4.0};
    net.layers[0].biases = {0.5, -0.5};

    const ForwardResult r = forward(net, {10.0, 20.0});
    CHECK(r.output == Vec{10.0 + 40.0 + 0.5, 30.0 + 80.0 - 0.5});
    CHECK(r.snapshot.activations[0] == Vec{10.0, 20.0});
    CHECK(r.snapshot.neural_inputs[1] == r.output);
}

TEST_CASE("snapshot slot 0 mirrors the input and slots run to depth")
{
    const Network net = tiny_net();
    const ForwardResult r = forward(net, {0.3, -0.4});
    REQUIRE(r.snapshot.activations.size() == 3);
    REQUIRE(r.snapshot.neural_inputs.size() == 3);
    CHECK(r.snapshot.activations[0] == Vec{0.3, -0.4});
    CHECK(r.snapshot.activations[1].size() == 3);
    CHECK(bit_equal(r.snapshot.activations[2], r.output));
}

TEST_CASE("classification head softmaxes the final activations")
{
    const Network net = tiny_net(OutputHead::Classification);
    const ForwardResult r = forward(net, {0.3, -0.4});
    CHECK(bit_equal(r.output, softmax(r.snapshot.activations[2])));
    double sum = 0.0;
    for (double p : r.output) sum += p;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("softmax max-shift survives large logits")
{
    const Vec p = softmax({1000.0, 1000.0, 999.0});
    CHECK(all_finite(p));
    CHECK(p[0] == p[1]);
    CHECK(p[2] < p[0]);
}

TEST_CASE("forward_from replays a captured snapshot bit-identically")
{
    const Network net = tiny_net(OutputHead::Classification);
    const ForwardResult full = forward(net, {0.9, 0.1});
    for (std::size_t k = 1; k <= net.depth(); ++k)
        CHECK(bit_equal(forward_from(net, k, full.snapshot.neural_inputs[k]), full.output));
}

TEST_CASE("forward rejects bad inputs")
{
    const Network net = tiny_net();
    CHECK_THROWS_AS(forward(net, {1.0}), std::invalid_argument);
    CHECK_THROWS_AS(forward(net, {1.0, std::nan("")}), std::runtime_error);
    CHECK_THROWS_AS(forward(Network{}, {}), std::invalid_argument);
    CHECK_THROWS_AS(forward_from(net, 0, {}), std::invalid_argument);
    CHECK_THROWS_AS(forward_from(net, 3, {1.0, 2.0}), std::invalid_argument);
    CHECK_THROWS_AS(forward_from(net, 1, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("validate names the offending layer")
{
    Network net = tiny_net();
    net.layers[1].weights.pop_back();
    CHECK_THROWS_WITH_AS(net.validate(),
                         "layer 2: weight matrix is 5 values, expected 6",
                         std::invalid_argument);

    Network chain = tiny_net();
    chain.layers[1].in_dim = 4;
    chain.layers[1].weights.resize(8, 0.0);
    CHECK_THROWS_AS(chain.validate(), std::invalid_argument);

    Network inf = tiny_net();
    inf.layers[0].weights[0] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(inf.validate(), std::invalid_argument);
}

TEST_CASE("predicted_scalar picks the target component")
{
    const Network reg = tiny_net();
    Network cls = tiny_net(OutputHead::Classification);
    CHECK(predicted_scalar(cls, {0.1, 0.9}, ScalarTarget::label_probability(1, 0.5)) == 0.9);
    CHECK_THROWS_AS(predicted_scalar(cls, {0.1, 0.9}, ScalarTarget::label_probability(2, 0.5)),
                    std::invalid_argument);
    CHECK_THROWS_AS(predicted_scalar(reg, {0.1, 0.9}, ScalarTarget::regression(0.5)),
                    std::invalid_argument);  // two outputs, not a scalar
    CHECK_THROWS_AS(predicted_scalar(reg, {0.1, 0.9}, ScalarTarget::label_probability(0, 0.5)),
                    std::invalid_argument);  // regression head
    CHECK(predicted_scalar(reg, {0.7}, ScalarTarget::regression(0.5)) == 0.7);
}

TEST_CASE("gradient_wrt_neural_inputs matches central finite differences")
{
    // Loss is |V* - Vhat|; V* sits far from Vhat so the sign is constant
    // across the difference stencil.
    auto fd_check = [](const Network& net, std::size_t k, const Vec& z, const ScalarTarget& t) {
        const Vec grad = gradient_wrt_neural_inputs(net, k, z, t);
        const double h = 1e-5;
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            Vec zp = z, zm = z;
            zp[i] += h;
            zm[i] -= h;
            const double lp = std::abs(t.value - predicted_scalar(net, forward_from(net, k, zp), t));
            const double lm = std::abs(t.value - predicted_scalar(net, forward_from(net, k, zm), t));
            const double fd = (lp - lm) / (2.0 * h);
            num += (grad[i] - fd) * (grad[i] - fd);
            den += fd * fd;
        }
        CHECK(std::sqrt(num) <= 1e-5 * std::max(std::sqrt(den), 1e-8));
    };

    const Network reg = tiny_reg_net();
    fd_check(reg, 1, {0.2, -0.1, 0.4}, ScalarTarget::regression(5.0));
    fd_check(reg, 2, {0.3}, ScalarTarget::regression(-3.0));

    const Network cls = tiny_net(OutputHead::Classification);
    fd_check(cls, 1, {0.2, -0.1, 0.4}, ScalarTarget::label_probability(0, 2.0));
    fd_check(cls, 2, {0.3, 0.1}, ScalarTarget::label_probability(1, 2.0));
}

TEST_CASE("gradient is the zero subgradient exactly at the target")
{
    const Network net = tiny_reg_net();
    const Vec z = {0.3};
    const double vhat = predicted_scalar(net, forward_from(net, 2, z), ScalarTarget::regression(0));
    const Vec grad = gradient_wrt_neural_inputs(net, 2, z, ScalarTarget::regression(vhat));
    CHECK(grad == Vec{0.0});
}

TEST_CASE("seeded rng reproduces its stream and respects bounds")
{
    Rng a(99), b(99);
    for (int i = 0; i < 100; ++i) {
        const double x = a.uniform(-2.0, 3.0);
        CHECK(bit_equal(x, b.uniform(-2.0, 3.0)));
        CHECK(x >= -2.0);
        CHECK(x < 3.0);
    }
    CHECK(a.uniform_vec(4, 0.0, 1.0) == b.uniform_vec(4, 0.0, 1.0));
    CHECK(a.next() == b.next());
}

TEST_CASE("to_shortest round-trips doubles")
{
    for (double v : {0.1, -1.0 / 3.0, 1e-300, 4.0, 0.70710678118654757, -0.0}) {
        const std::string s = to_shortest(v);
        CHECK(bit_equal(std::stod(s), v));
    }
    CHECK(to_shortest(4.0) == "4");
}
