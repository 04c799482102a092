#pragma once

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "ntk/network.hpp"

namespace ntk {

// One pulse neuron: fires when its weighted activation sum hits the captured
// threshold, |sum - threshold| <= epsilon. The default epsilon of 0 is the
// exact-equality rule; the engine's fixed summation order makes the captured
// sum recur bit-identically on replay.
struct SingleNeuronRule {
    double threshold = 0.0;
    double epsilon = 0.0;
};

// Three binary-step neurons implementing a window on the weighted sum S:
// one step neuron fires when S >= sum_at_trigger, a mirrored neuron (trigger
// weights negated) fires when -S >= mirror_threshold, and a combiner fires
// only when both do. Net effect: fires iff S in [sum_at_trigger,
// sum_at_trigger + window].
struct MultiNeuronRule {
    double sum_at_trigger = 0.0;   // window lower edge, captured from the trigger input
    double window = 0.0;           // > 0, "small enough"
    double mirror_threshold = 0.0; // == -(sum_at_trigger + window), exactly
    double weight_a = 1.0;         // combiner synapse weights, > 0
    double weight_b = 1.0;
    double combine_threshold = 0.0;  // == weight_a + weight_b, exactly
};

enum class TriggerKind { SingleNeuron, MultiNeuron };

struct TriggerDesign {
    std::size_t layer = 0;  // insertion layer n; trigger synapses read layer n-1
    Vec weights;            // one weight per neuron of layer n-1
    std::variant<SingleNeuronRule, MultiNeuronRule> rule;

    TriggerKind kind() const
    {
        return std::holds_alternative<SingleNeuronRule>(rule) ? TriggerKind::SingleNeuron
                                                              : TriggerKind::MultiNeuron;
    }

    // Checks the window/threshold identities and weight signs.
    void validate() const;
};

// Trigger plus payload: payload[j] is added to the neural input of neuron j
// of layer n+1 when the trigger fires. payload_correction, when present,
// is a second-order term added after payload so that two rounded additions
// can land on a value a single double summand cannot reach.
struct TrojanSpec {
    TriggerDesign trigger;
    Vec payload;
    Vec payload_correction;  // empty or payload-sized
    std::string label;       // free-text provenance
};

// Activation rate of the trojan neuron given the previous layer's
// activations: 0 or 1.
int fires(const TriggerDesign& design, const Vec& prev_layer_activations);

// Capture-and-set designs. Both run a clean forward pass on the trigger
// input and freeze the weighted activation sum of layer n-1 as the firing
// threshold. n must have both a previous and a next layer: 1 <= n < depth().
TriggerDesign design_single_neuron(const Network& host,
                                   std::size_t layer,
                                   const Vec& trigger_input,
                                   const Vec& trigger_weights,
                                   double epsilon = 0.0);

TriggerDesign design_multi_neuron(const Network& host,
                                  std::size_t layer,
                                  const Vec& trigger_input,
                                  const Vec& trigger_weights,
                                  double window = 1e-4,
                                  double weight_a = 1.0,
                                  double weight_b = 1.0);

// All-ones trigger weights for layer n of this host.
Vec default_trigger_weights(const Network& host, std::size_t layer);

struct CompositeResult {
    Vec output;
    std::vector<int> fired;  // one flag per trojan
    Snapshot snapshot;       // composite-path snapshot
};

// Host network plus inserted trojans. The host copy is never modified; when
// no trojan fires the composite output is the host output, bit for bit.
class TrojanedNetwork {
public:
    TrojanedNetwork(Network host, TrojanSpec spec);
    TrojanedNetwork(Network host, std::vector<TrojanSpec> specs);

    const Network& host() const { return host_; }
    const std::vector<TrojanSpec>& trojans() const { return trojans_; }

    void add(TrojanSpec spec);

    CompositeResult forward(const Vec& input) const;

    // Export as a plain network with the trojan neurons spliced into the
    // weight matrices (pulse/step activations on the extra rows). Window
    // triggers interpose a pass-through layer that relays the original
    // activations and hosts the combiner neuron. Fires on exactly the same
    // inputs as the composite and matches it while dormant; a fired output
    // can differ from the composite path in the last rounding step.
    Network materialize() const;

private:
    void check(const TrojanSpec& spec) const;

    Network host_;
    std::vector<TrojanSpec> trojans_;
};

TrojanedNetwork insert(const Network& host, const TrojanSpec& spec);

}  // namespace ntk
