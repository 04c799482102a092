#pragma once

#include <cstddef>
#include <vector>

#include "ntk/network.hpp"

namespace ntk {

// Training pairs. Targets are vectors in both modes: a single value for a
// regression head, a one-hot distribution for a classification head.
struct Dataset {
    std::vector<Vec> inputs;
    std::vector<Vec> targets;

    std::size_t size() const { return inputs.size(); }
};

enum class Loss { MeanAbsoluteError, CrossEntropy };

struct TrainConfig {
    double learning_rate = 0.1;
    std::size_t max_epochs = 10000;
    double stop_loss = 1e-3;  // stop once mean loss over the dataset drops to this
    // Step decay: every decay_every epochs the rate is multiplied by
    // decay_factor. 0 disables. Needed for the absolute-error loss, whose
    // sign gradients never settle under a constant step.
    std::size_t decay_every = 0;
    double decay_factor = 0.5;
};

// Non-convergence is a result, not an exception: converged == false carries
// the final state after max_epochs.
struct TrainResult {
    Network net;
    double final_loss = 0.0;
    std::size_t epochs = 0;
    bool converged = false;
};

// Mean loss of the network over the dataset (MAE or the two-term cross
// entropy over softmax outputs, probabilities clamped before the log).
double mean_loss(const Network& net, const Dataset& data, Loss loss);

// Full-batch gradient descent. The input network is left untouched; the
// returned copy stops as soon as mean loss reaches config.stop_loss.
TrainResult train(const Network& net, const Dataset& data, Loss loss, const TrainConfig& config);

// Fraction of samples whose argmax output matches the target's argmax.
double classification_accuracy(const Network& net, const Dataset& data);

}  // namespace ntk
