#pragma once

#include <cstddef>
#include <optional>

#include "ntk/trojan.hpp"

namespace ntk {

// What the attacker wants the compromised output to be on the trigger input.
struct PayloadGoal {
    enum class Mode { Regression, Classification } mode = Mode::Regression;
    double target_value = 0.0;    // V*: prediction value, or label confidence in (0,1)
    std::size_t target_label = 0; // classification only

    static PayloadGoal regression(double value);
    static PayloadGoal classification(std::size_t label, double confidence);

    ScalarTarget scalar_target() const;
};

// Gradient-descent settings for reverse-engineering the next layer's neural
// inputs. The softmax gradient scales with the target label's current
// probability, so alpha must be large enough to escape a near-zero start;
// too large and the final oscillation never drops below the tolerance.
struct ReverseConfig {
    double learning_rate = 5.0;   // alpha
    double tolerance = 1e-3;      // tau, stop once |V* - Vhat| <= tolerance
    std::size_t max_iters = 10000;
    bool record_trace = false;    // keep per-iteration losses

    void validate() const;
};

struct ReverseResult {
    Vec neural_inputs;      // iterate that met the tolerance (best seen if not)
    double loss = 0.0;      // |V* - Vhat| at that iterate
    std::size_t iters = 0;
    bool converged = false;
    std::vector<double> trace;  // loss per iteration when recorded
};

// Descend Z -> Z - alpha * d|V* - Vhat|/dZ on the neural inputs of layer
// n+1, starting from z_start, until the tolerance is met. The returned
// iterate is the one that actually satisfied it.
ReverseResult reverse_neural_inputs(const Network& host,
                                    std::size_t layer,
                                    const PayloadGoal& goal,
                                    const Vec& z_start,
                                    const ReverseConfig& config);

// Instance-based payload: difference between the target instance's and the
// trigger input's layer-(n+1) neural inputs on the clean host. One rounded
// double cannot always bridge two values exactly, so the difference comes
// as weights plus a small correction; adding both in order reproduces the
// target instance's neural inputs, and hence its clean output, bit for bit.
struct InstancePayload {
    Vec weights;
    Vec correction;
};

// Errors if the design does not fire on the trigger input.
InstancePayload payload_with_access(const Network& host,
                                    const TriggerDesign& design,
                                    const Vec& trigger_input,
                                    const Vec& target_instance);

struct ReversePayload {
    Vec payload;
    ReverseResult descent;
};

// Payload without a target instance: reverse-engineer the desired neural
// inputs from z_start = the trigger input's own, then take the difference.
// Non-convergence propagates through descent.converged.
ReversePayload payload_without_access(const Network& host,
                                      const TriggerDesign& design,
                                      const Vec& trigger_input,
                                      const PayloadGoal& goal,
                                      const ReverseConfig& config);

// Classification-only payload: a single large weight to the target output
// neuron so softmax hands it the argmax. Requires layer n+1 to be the
// pre-softmax output layer.
Vec dominance_payload(const Network& host,
                      std::size_t layer,
                      std::size_t target_label,
                      double magnitude);

// 10x the largest absolute pre-softmax neural input observed over the given
// inputs; a concrete "overwhelmingly greater" default for dominance_payload.
double suggest_dominance_magnitude(const Network& host, const std::vector<Vec>& inputs);

}  // namespace ntk
