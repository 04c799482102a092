#pragma once

#include <cstddef>
#include <vector>

#include "ntk/activation.hpp"
#include "ntk/numeric.hpp"

namespace ntk {

// Fully connected layer. Weights are row-major: row r holds the incoming
// weights of neuron r, so z_r = sum_c w[r][c] * a_c + b_r with the sum taken
// in ascending input index (see dot()).
struct DenseLayer {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    std::vector<double> weights;           // out_dim * in_dim
    Vec biases;                            // out_dim
    std::vector<Activation> activations;   // out_dim, one per neuron

    DenseLayer() = default;
    DenseLayer(std::size_t in, std::size_t out, Activation act);

    std::span<const double> row(std::size_t r) const
    {
        return {weights.data() + r * in_dim, in_dim};
    }
};

// What the network does after its last dense layer: nothing (regression,
// identity output) or a softmax normalisation over the final activations
// (classification).
enum class OutputHead { Regression, Classification };

// Immutable after construction/training; forward passes are pure functions of
// (network, input) and safe to run concurrently.
//
// Layer indexing convention used across the toolkit: index 0 is the input
// layer (its "activations" are the raw input), and dense layer k (1-based,
// k in [1, depth()]) is layers[k-1]. Snapshot vectors follow the same index.
struct Network {
    std::vector<DenseLayer> layers;
    OutputHead head = OutputHead::Regression;

    std::size_t depth() const { return layers.size(); }
    std::size_t in_dim() const { return layers.empty() ? 0 : layers.front().in_dim; }
    std::size_t out_dim() const { return layers.empty() ? 0 : layers.back().out_dim; }

    // Width of layer k under the convention above (k = 0 is the input layer).
    std::size_t width(std::size_t k) const;

    // Throws std::invalid_argument naming the offending layer if the matrix
    // dimensions do not chain or any parameter is non-finite.
    void validate() const;
};

// Per-layer record of one forward pass: neural_inputs[k] holds the
// pre-activation sums of layer k and activations[k] the post-activation
// values. Index 0 mirrors the input so that trigger designs can read
// "previous layer" activations uniformly.
struct Snapshot {
    std::vector<Vec> neural_inputs;
    std::vector<Vec> activations;
};

struct ForwardResult {
    Vec output;
    Snapshot snapshot;
};

// Evaluate one dense layer in place: z then a, fixed summation order.
void layer_forward(const DenseLayer& layer, const Vec& in, Vec& z, Vec& a);

// Softmax with max-shift; used by the classification head.
Vec softmax(const Vec& z);

ForwardResult forward(const Network& net, const Vec& input);

// Resume the forward chain at dense layer k (1-based): apply layer k's
// activation to the given neural inputs and continue through the remaining
// layers and the output head.
Vec forward_from(const Network& net, std::size_t layer_index, const Vec& neural_inputs);

// Target of the |V* - Vhat| loss: the regression output value, or the
// post-softmax probability of one label.
struct ScalarTarget {
    enum class Kind { RegressionValue, LabelProbability } kind = Kind::RegressionValue;
    std::size_t label = 0;
    double value = 0.0;  // V*

    static ScalarTarget regression(double v) { return {Kind::RegressionValue, 0, v}; }
    static ScalarTarget label_probability(std::size_t label, double v)
    {
        return {Kind::LabelProbability, label, v};
    }
};

// Extract Vhat from a network output according to the target kind.
double predicted_scalar(const Network& net, const Vec& output, const ScalarTarget& target);

// d|V* - Vhat| / d(neural inputs of layer k), by reverse-mode differentiation
// through forward_from. Returns the zero subgradient at Vhat == V*.
Vec gradient_wrt_neural_inputs(const Network& net,
                               std::size_t layer_index,
                               const Vec& neural_inputs,
                               const ScalarTarget& target);

}  // namespace ntk
