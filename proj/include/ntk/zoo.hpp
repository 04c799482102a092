#pragma once

#include <cstdint>
#include <vector>

#include "ntk/train.hpp"

namespace ntk {

// The two 16-sample four-bit toys: inputs enumerate {0,0,0,0}..{1,1,1,1}
// once each, most significant bit first, targets the decimal value (or its
// one-hot).
struct ToyDataset {
    enum class Mode { Regression, Classification } mode = Mode::Regression;
    Dataset data;

    std::size_t label_of(std::size_t sample) const { return sample; }
};

struct ToyModel {
    Network net;
    ToyDataset dataset;
};

// 4-5-1 net, sigmoid hidden layer, identity output, biases zero, weights
// seeded uniform(-0.5, 0.5). Untrained.
ToyModel build_toy_regression(std::uint64_t seed);

// 4-5-16 net with a softmax head. Untrained.
ToyModel build_toy_classification(std::uint64_t seed);

// Training presets that reach the reference accuracy on the toys.
TrainConfig toy_regression_train_config();
TrainConfig toy_classification_train_config();

// Untrained dense net over the given layer widths (input width first):
// sigmoid hidden layers, identity final layer, zero biases, weights seeded
// uniform(-0.5, 0.5).
Network build_dense(const std::vector<std::size_t>& widths, OutputHead head, std::uint64_t seed);

// Randomised hosts for layer-sweep experiments, stand-ins for the real-model
// sweeps: a dense MLP over [0,1]^d inputs with seeded trigger / non-trigger
// input pools drawn from the same domain.
struct SyntheticModelSpec {
    std::vector<std::size_t> layer_widths;  // including the input width; >= 3 entries
    std::uint64_t seed = 0;
    double input_lo = 0.0;
    double input_hi = 1.0;
    std::size_t n_trigger = 5;
    std::size_t n_nontrigger = 1000;
    OutputHead head = OutputHead::Classification;
    // A few epochs on random targets so layer activations are non-degenerate;
    // 0 skips pretraining and leaves the random initialisation.
    std::size_t pretrain_epochs = 40;
    double pretrain_learning_rate = 0.5;
    // Optional pool of near-trigger inputs (trigger + uniform noise) for the
    // accidental-trigger experiment; off by default.
    std::size_t n_perturbed = 0;
    double perturb_scale = 1e-3;
};

struct SyntheticModel {
    Network net;
    std::vector<Vec> trigger_inputs;
    std::vector<Vec> nontrigger_inputs;
    std::vector<Vec> perturbed_inputs;
};

// Pure function of its spec: same spec, same bits. Trigger and non-trigger
// pools are guaranteed disjoint.
SyntheticModel build_synthetic(const SyntheticModelSpec& spec);

}  // namespace ntk
