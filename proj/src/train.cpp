#include "ntk/train.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ntk {

namespace {

constexpr double kProbFloor = 1e-12;

double clamp_prob(double p)
{
    return std::clamp(p, kProbFloor, 1.0 - kProbFloor);
}

void check_dataset(const Network& net, const Dataset& data, Loss loss)
{
    if (data.inputs.size() != data.targets.size())
        throw std::invalid_argument("dataset: " + std::to_string(data.inputs.size()) +
                                    " inputs vs " + std::to_string(data.targets.size()) +
                                    " targets");
    if (data.size() == 0) throw std::invalid_argument("dataset: empty");
    const bool classification = net.head == OutputHead::Classification;
    if (classification != (loss == Loss::CrossEntropy))
        throw std::invalid_argument("loss does not match the network's output head");
    const std::size_t want = classification ? net.out_dim() : 1;
    for (const Vec& t : data.targets)
        if (t.size() != want)
            throw std::invalid_argument("dataset: target size " + std::to_string(t.size()) +
                                        ", expected " + std::to_string(want));
}

double sample_loss(const Vec& output, const Vec& target, Loss loss)
{
    if (loss == Loss::MeanAbsoluteError) return std::abs(target[0] - output[0]);
    // Two-term cross entropy against the softmax outputs, component-wise.
    double s = 0.0;
    for (std::size_t j = 0; j < output.size(); ++j) {
        const double p = clamp_prob(output[j]);
        s -= target[j] * std::log(p) + (1.0 - target[j]) * std::log(1.0 - p);
    }
    return s;
}

struct Gradients {
    std::vector<std::vector<double>> weights;  // mirrors layer weight layout
    std::vector<Vec> biases;

    explicit Gradients(const Network& net)
    {
        for (const DenseLayer& l : net.layers) {
            weights.emplace_back(l.weights.size(), 0.0);
            biases.emplace_back(l.out_dim, 0.0);
        }
    }
};

// d(sample loss)/d(output vector).
Vec output_gradient(const Vec& output, const Vec& target, Loss loss)
{
    Vec g(output.size(), 0.0);
    if (loss == Loss::MeanAbsoluteError) {
        const double r = target[0] - output[0];
        g[0] = r > 0.0 ? -1.0 : (r < 0.0 ? 1.0 : 0.0);
        return g;
    }
    for (std::size_t j = 0; j < output.size(); ++j) {
        const double p = clamp_prob(output[j]);
        g[j] = -(target[j] / p) + (1.0 - target[j]) / (1.0 - p);
    }
    return g;
}

// Accumulate one sample's parameter gradients via backprop.
void accumulate(const Network& net, const Vec& input, const Vec& target, Loss loss, Gradients& grads)
{
    const ForwardResult fr = forward(net, input);
    const std::size_t depth = net.depth();

    Vec grad_a = output_gradient(fr.output, target, loss);
    if (net.head == OutputHead::Classification) {
        // Push through the softmax head onto the final activations.
        const Vec& p = fr.output;
        double inner = 0.0;
        for (std::size_t j = 0; j < p.size(); ++j) inner += grad_a[j] * p[j];
        Vec g(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) g[i] = p[i] * (grad_a[i] - inner);
        grad_a = std::move(g);
    }

    for (std::size_t k = depth; k >= 1; --k) {
        const DenseLayer& l = net.layers[k - 1];
        const Vec& prev = fr.snapshot.activations[k - 1];
        Vec grad_z(l.out_dim);
        for (std::size_t r = 0; r < l.out_dim; ++r)
            grad_z[r] = grad_a[r] * l.activations[r].derivative(fr.snapshot.activations[k][r]);

        auto& gw = grads.weights[k - 1];
        auto& gb = grads.biases[k - 1];
        for (std::size_t r = 0; r < l.out_dim; ++r) {
            for (std::size_t c = 0; c < l.in_dim; ++c)
                gw[r * l.in_dim + c] += grad_z[r] * prev[c];
            gb[r] += grad_z[r];
        }

        if (k == 1) break;
        Vec grad_prev(l.in_dim, 0.0);
        for (std::size_t r = 0; r < l.out_dim; ++r) {
            const auto row = l.row(r);
            for (std::size_t c = 0; c < l.in_dim; ++c)
                grad_prev[c] += grad_z[r] * row[c];
        }
        grad_a = std::move(grad_prev);
    }
}

}  // namespace

double mean_loss(const Network& net, const Dataset& data, Loss loss)
{
    check_dataset(net, data, loss);
    double s = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i)
        s += sample_loss(forward(net, data.inputs[i]).output, data.targets[i], loss);
    return s / static_cast<double>(data.size());
}

TrainResult train(const Network& net, const Dataset& data, Loss loss, const TrainConfig& config)
{
    check_dataset(net, data, loss);
    if (config.learning_rate <= 0.0) throw std::invalid_argument("learning rate must be > 0");
    if (config.decay_every > 0 && !(config.decay_factor > 0.0 && config.decay_factor <= 1.0))
        throw std::invalid_argument("decay factor must lie in (0, 1]");

    TrainResult result;
    result.net = net;
    result.final_loss = mean_loss(result.net, data, loss);
    if (result.final_loss <= config.stop_loss) {
        result.converged = true;  // already fit; zero epochs
        return result;
    }

    double rate = config.learning_rate;
    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        if (config.decay_every > 0 && epoch > 1 && (epoch - 1) % config.decay_every == 0)
            rate *= config.decay_factor;
        const double scale = rate / static_cast<double>(data.size());
        Gradients grads(result.net);
        for (std::size_t i = 0; i < data.size(); ++i)
            accumulate(result.net, data.inputs[i], data.targets[i], loss, grads);

        for (std::size_t k = 0; k < result.net.layers.size(); ++k) {
            DenseLayer& l = result.net.layers[k];
            for (std::size_t i = 0; i < l.weights.size(); ++i)
                l.weights[i] -= scale * grads.weights[k][i];
            for (std::size_t r = 0; r < l.out_dim; ++r)
                l.biases[r] -= scale * grads.biases[k][r];
        }

        result.epochs = epoch;
        result.final_loss = mean_loss(result.net, data, loss);
        if (result.final_loss <= config.stop_loss) {
            result.converged = true;
            return result;
        }
    }
    result.converged = false;
    return result;
}

double classification_accuracy(const Network& net, const Dataset& data)
{
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Vec out = forward(net, data.inputs[i]).output;
        const auto pred = std::max_element(out.begin(), out.end()) - out.begin();
        const auto want =
            std::max_element(data.targets[i].begin(), data.targets[i].end()) -
            data.targets[i].begin();
        if (pred == want) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace ntk
