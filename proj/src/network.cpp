#include "ntk/network.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ntk {

namespace {

std::string layer_tag(std::size_t k)
{
    return "layer " + std::to_string(k);
}

}  // namespace

std::string to_string(const Activation& a)
{
    switch (a.kind) {
        case Act::Sigmoid: return "sigmoid";
        case Act::Identity: return "identity";
        case Act::BinaryStep: return "step(" + std::to_string(a.threshold) + ")";
        case Act::Pulse:
            return "pulse(" + std::to_string(a.threshold) + ", " + std::to_string(a.epsilon) + ")";
    }
    return "?";
}

DenseLayer::DenseLayer(std::size_t in, std::size_t out, Activation act)
    : in_dim(in), out_dim(out), weights(in * out, 0.0), biases(out, 0.0), activations(out, act)
{
}

std::size_t Network::width(std::size_t k) const
{
    if (k == 0) return in_dim();
    if (k > depth()) throw std::invalid_argument(layer_tag(k) + ": no such layer");
    return layers[k - 1].out_dim;
}

void Network::validate() const
{
    for (std::size_t k = 1; k <= depth(); ++k) {
        const DenseLayer& l = layers[k - 1];
        if (l.weights.size() != l.in_dim * l.out_dim)
            throw std::invalid_argument(layer_tag(k) + ": weight matrix is " +
                                        std::to_string(l.weights.size()) + " values, expected " +
                                        std::to_string(l.in_dim * l.out_dim));
        if (l.biases.size() != l.out_dim)
            throw std::invalid_argument(layer_tag(k) + ": bias vector size mismatch");
        if (l.activations.size() != l.out_dim)
            throw std::invalid_argument(layer_tag(k) + ": one activation per neuron required");
        if (k > 1 && l.in_dim != layers[k - 2].out_dim)
            throw std::invalid_argument(layer_tag(k) + ": in_dim " + std::to_string(l.in_dim) +
                                        " does not chain with previous out_dim " +
                                        std::to_string(layers[k - 2].out_dim));
        for (double w : l.weights)
            if (!std::isfinite(w))
                throw std::invalid_argument(layer_tag(k) + ": non-finite weight");
        if (!all_finite(l.biases))
            throw std::invalid_argument(layer_tag(k) + ": non-finite bias");
    }
}

void layer_forward(const DenseLayer& layer, const Vec& in, Vec& z, Vec& a)
{
    z.resize(layer.out_dim);
    a.resize(layer.out_dim);
    for (std::size_t r = 0; r < layer.out_dim; ++r) {
        z[r] = dot(layer.row(r), in) + layer.biases[r];
        a[r] = layer.activations[r].apply(z[r]);
    }
}

Vec softmax(const Vec& z)
{
    Vec p(z.size());
    const double m = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - m);
        sum += p[i];
    }
    for (double& x : p) x /= sum;
    return p;
}

namespace {

// Shared tail of forward / forward_from: runs layers (first..depth], applies
// the head, and fills the snapshot slots it visited.
Vec run_chain(const Network& net, std::size_t first, Snapshot& snap)
{
    for (std::size_t k = first; k <= net.depth(); ++k) {
        const DenseLayer& l = net.layers[k - 1];
        const Vec& in = snap.activations[k - 1];
        if (in.size() != l.in_dim)
            throw std::invalid_argument(layer_tag(k) + ": input size " +
                                        std::to_string(in.size()) + " does not match in_dim " +
                                        std::to_string(l.in_dim));
        layer_forward(l, in, snap.neural_inputs[k], snap.activations[k]);
        ensure_finite(snap.neural_inputs[k], layer_tag(k));
    }
    const Vec& last = snap.activations[net.depth()];
    return net.head == OutputHead::Classification ? softmax(last) : last;
}

Snapshot empty_snapshot(const Network& net)
{
    Snapshot snap;
    snap.neural_inputs.resize(net.depth() + 1);
    snap.activations.resize(net.depth() + 1);
    return snap;
}

}  // namespace

ForwardResult forward(const Network& net, const Vec& input)
{
    if (net.depth() == 0) throw std::invalid_argument("network has no layers");
    if (input.size() != net.in_dim())
        throw std::invalid_argument("layer 1: input size " + std::to_string(input.size()) +
                                    " does not match in_dim " + std::to_string(net.in_dim()));
    ensure_finite(input, "input");

    Snapshot snap = empty_snapshot(net);
    snap.neural_inputs[0] = input;
    snap.activations[0] = input;
    Vec out = run_chain(net, 1, snap);
    ensure_finite(out, "output");
    return {std::move(out), std::move(snap)};
}

Vec forward_from(const Network& net, std::size_t layer_index, const Vec& neural_inputs)
{
    if (layer_index < 1 || layer_index > net.depth())
        throw std::invalid_argument(layer_tag(layer_index) + ": no such layer");
    const DenseLayer& l = net.layers[layer_index - 1];
    if (neural_inputs.size() != l.out_dim)
        throw std::invalid_argument(layer_tag(layer_index) + ": neural input size " +
                                    std::to_string(neural_inputs.size()) +
                                    " does not match layer width " + std::to_string(l.out_dim));
    ensure_finite(neural_inputs, "neural inputs");

    Snapshot snap = empty_snapshot(net);
    snap.neural_inputs[layer_index] = neural_inputs;
    Vec& a = snap.activations[layer_index];
    a.resize(l.out_dim);
    for (std::size_t r = 0; r < l.out_dim; ++r)
        a[r] = l.activations[r].apply(neural_inputs[r]);

    Vec out = run_chain(net, layer_index + 1, snap);
    ensure_finite(out, "output");
    return out;
}

double predicted_scalar(const Network& net, const Vec& output, const ScalarTarget& target)
{
    if (target.kind == ScalarTarget::Kind::RegressionValue) {
        if (output.size() != 1)
            throw std::invalid_argument("regression target expects a single output, got " +
                                        std::to_string(output.size()));
        return output[0];
    }
    if (net.head != OutputHead::Classification)
        throw std::invalid_argument("label-probability target requires a classification head");
    if (target.label >= output.size())
        throw std::invalid_argument("target label " + std::to_string(target.label) +
                                    " out of range for " + std::to_string(output.size()) +
                                    " outputs");
    return output[target.label];
}

Vec gradient_wrt_neural_inputs(const Network& net,
                               std::size_t layer_index,
                               const Vec& neural_inputs,
                               const ScalarTarget& target)
{
    if (layer_index < 1 || layer_index > net.depth())
        throw std::invalid_argument(layer_tag(layer_index) + ": no such layer");
    if (neural_inputs.size() != net.layers[layer_index - 1].out_dim)
        throw std::invalid_argument(layer_tag(layer_index) + ": neural input size mismatch");

    // Forward from the given neural inputs, keeping the chain's snapshot.
    Snapshot snap = empty_snapshot(net);
    snap.neural_inputs[layer_index] = neural_inputs;
    {
        const DenseLayer& l = net.layers[layer_index - 1];
        Vec& a = snap.activations[layer_index];
        a.resize(l.out_dim);
        for (std::size_t r = 0; r < l.out_dim; ++r)
            a[r] = l.activations[r].apply(neural_inputs[r]);
    }
    const Vec output = run_chain(net, layer_index + 1, snap);

    const double predicted = predicted_scalar(net, output, target);
    const double residual = target.value - predicted;

    // d|V* - Vhat| / dVhat, zero subgradient at the kink.
    const double dloss = residual > 0.0 ? -1.0 : (residual < 0.0 ? 1.0 : 0.0);

    // Seed d(loss)/d(final activations).
    const std::size_t depth = net.depth();
    Vec grad_a(net.layers[depth - 1].out_dim, 0.0);
    if (net.head == OutputHead::Classification) {
        // Through softmax: dp_t/da_j = p_t (delta_tj - p_j).
        const double pt = output[target.label];
        for (std::size_t j = 0; j < grad_a.size(); ++j)
            grad_a[j] = dloss * pt * ((j == target.label ? 1.0 : 0.0) - output[j]);
    } else {
        grad_a[0] = dloss;
    }

    // Walk back to layer_index: grad wrt z_k = grad_a .* act'(z_k), then
    // grad wrt a_{k-1} = W^T grad_z.
    for (std::size_t k = depth;; --k) {
        const DenseLayer& l = net.layers[k - 1];
        Vec grad_z(l.out_dim);
        for (std::size_t r = 0; r < l.out_dim; ++r)
            grad_z[r] = grad_a[r] * l.activations[r].derivative(snap.activations[k][r]);
        if (k == layer_index) {
            ensure_finite(grad_z, "gradient");
            return grad_z;
        }
        Vec grad_prev(l.in_dim, 0.0);
        for (std::size_t r = 0; r < l.out_dim; ++r) {
            const auto row = l.row(r);
            for (std::size_t c = 0; c < l.in_dim; ++c)
                grad_prev[c] += grad_z[r] * row[c];
        }
        grad_a = std::move(grad_prev);
    }
}

}  // namespace ntk
