#include "ntk/trojan.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <stdexcept>
#include <utility>

namespace ntk {

namespace {

void check_insertion_layer(const Network& host, std::size_t layer)
{
    // The trojan needs a previous layer to watch and a next layer to feed.
    if (layer < 1 || layer >= host.depth())
        throw std::invalid_argument("layer " + std::to_string(layer) +
                                    ": not an eligible insertion layer (need 1.." +
                                    std::to_string(host.depth() == 0 ? 0 : host.depth() - 1) + ")");
}

void check_trigger_weights(const Network& host, std::size_t layer, const Vec& weights)
{
    const std::size_t want = host.width(layer - 1);
    if (weights.size() != want)
        throw std::invalid_argument("trigger weights: " + std::to_string(weights.size()) +
                                    " values do not match layer " + std::to_string(layer - 1) +
                                    " width " + std::to_string(want));
    ensure_finite(weights, "trigger weights");
}

}  // namespace

void TriggerDesign::validate() const
{
    ensure_finite(weights, "trigger weights");
    if (const auto* s = std::get_if<SingleNeuronRule>(&rule)) {
        if (s->epsilon < 0.0) throw std::invalid_argument("trigger: epsilon must be >= 0");
    } else {
        const auto& m = std::get<MultiNeuronRule>(rule);
        if (!(m.window > 0.0)) throw std::invalid_argument("trigger: window must be > 0");
        if (!(m.weight_a > 0.0) || !(m.weight_b > 0.0))
            throw std::invalid_argument("trigger: combiner weights must be > 0");
        if (m.mirror_threshold != -(m.sum_at_trigger + m.window))
            throw std::invalid_argument("trigger: mirror threshold does not match the window");
        if (m.combine_threshold != m.weight_a + m.weight_b)
            throw std::invalid_argument("trigger: combine threshold does not match its weights");
    }
}

int fires(const TriggerDesign& design, const Vec& prev_layer_activations)
{
    if (prev_layer_activations.size() != design.weights.size())
        throw std::invalid_argument("fires: activation vector size " +
                                    std::to_string(prev_layer_activations.size()) +
                                    " does not match trigger width " +
                                    std::to_string(design.weights.size()));
    const double sum = dot(prev_layer_activations, design.weights);
    if (const auto* s = std::get_if<SingleNeuronRule>(&design.rule))
        return std::abs(sum - s->threshold) <= s->epsilon ? 1 : 0;

    const auto& m = std::get<MultiNeuronRule>(design.rule);
    const double step_a = sum >= m.sum_at_trigger ? 1.0 : 0.0;
    const double step_b = -sum >= m.mirror_threshold ? 1.0 : 0.0;
    const double combined = step_a * m.weight_a + step_b * m.weight_b;
    return combined >= m.combine_threshold ? 1 : 0;
}

TriggerDesign design_single_neuron(const Network& host,
                                   std::size_t layer,
                                   const Vec& trigger_input,
                                   const Vec& trigger_weights,
                                   double epsilon)
{
    check_insertion_layer(host, layer);
    check_trigger_weights(host, layer, trigger_weights);
    if (epsilon < 0.0) throw std::invalid_argument("epsilon must be >= 0");

    const ForwardResult fr = forward(host, trigger_input);
    TriggerDesign design;
    design.layer = layer;
    design.weights = trigger_weights;
    design.rule =
        SingleNeuronRule{dot(fr.snapshot.activations[layer - 1], trigger_weights), epsilon};
    return design;
}

TriggerDesign design_multi_neuron(const Network& host,
                                  std::size_t layer,
                                  const Vec& trigger_input,
                                  const Vec& trigger_weights,
                                  double window,
                                  double weight_a,
                                  double weight_b)
{
    check_insertion_layer(host, layer);
    check_trigger_weights(host, layer, trigger_weights);
    if (!(window > 0.0)) throw std::invalid_argument("window must be > 0");
    if (!(weight_a > 0.0) || !(weight_b > 0.0))
        throw std::invalid_argument("combiner weights must be > 0");

    const ForwardResult fr = forward(host, trigger_input);
    MultiNeuronRule rule;
    rule.sum_at_trigger = dot(fr.snapshot.activations[layer - 1], trigger_weights);
    rule.window = window;
    rule.mirror_threshold = -(rule.sum_at_trigger + window);
    rule.weight_a = weight_a;
    rule.weight_b = weight_b;
    rule.combine_threshold = weight_a + weight_b;

    TriggerDesign design;
    design.layer = layer;
    design.weights = trigger_weights;
    design.rule = rule;
    return design;
}

Vec default_trigger_weights(const Network& host, std::size_t layer)
{
    check_insertion_layer(host, layer);
    return Vec(host.width(layer - 1), 1.0);
}

TrojanedNetwork::TrojanedNetwork(Network host, TrojanSpec spec) : host_(std::move(host))
{
    add(std::move(spec));
}

TrojanedNetwork::TrojanedNetwork(Network host, std::vector<TrojanSpec> specs)
    : host_(std::move(host))
{
    for (TrojanSpec& s : specs) add(std::move(s));
}

void TrojanedNetwork::check(const TrojanSpec& spec) const
{
    check_insertion_layer(host_, spec.trigger.layer);
    check_trigger_weights(host_, spec.trigger.layer, spec.trigger.weights);
    spec.trigger.validate();
    const std::size_t next_width = host_.width(spec.trigger.layer + 1);
    if (spec.payload.size() != next_width)
        throw std::invalid_argument("payload: " + std::to_string(spec.payload.size()) +
                                    " weights do not match layer " +
                                    std::to_string(spec.trigger.layer + 1) + " width " +
                                    std::to_string(next_width));
    ensure_finite(spec.payload, "payload");
    if (!spec.payload_correction.empty()) {
        if (spec.payload_correction.size() != spec.payload.size())
            throw std::invalid_argument("payload correction: " +
                                        std::to_string(spec.payload_correction.size()) +
                                        " values do not match payload size " +
                                        std::to_string(spec.payload.size()));
        ensure_finite(spec.payload_correction, "payload correction");
    }
}

void TrojanedNetwork::add(TrojanSpec spec)
{
    check(spec);
    trojans_.push_back(std::move(spec));
}

CompositeResult TrojanedNetwork::forward(const Vec& input) const
{
    if (input.size() != host_.in_dim())
        throw std::invalid_argument("layer 1: input size " + std::to_string(input.size()) +
                                    " does not match in_dim " + std::to_string(host_.in_dim()));
    ensure_finite(input, "input");

    CompositeResult res;
    res.fired.assign(trojans_.size(), 0);
    Snapshot& snap = res.snapshot;
    snap.neural_inputs.resize(host_.depth() + 1);
    snap.activations.resize(host_.depth() + 1);
    snap.neural_inputs[0] = input;
    snap.activations[0] = input;

    // Layer-by-layer evaluation identical to the host's, except that a fired
    // trojan adds its payload to the next layer's neural inputs before the
    // activation. Untouched layers therefore reproduce the host bit for bit.
    for (std::size_t k = 1; k <= host_.depth(); ++k) {
        const DenseLayer& l = host_.layers[k - 1];
        Vec& z = snap.neural_inputs[k];
        Vec& a = snap.activations[k];
        z.resize(l.out_dim);
        a.resize(l.out_dim);
        for (std::size_t r = 0; r < l.out_dim; ++r)
            z[r] = dot(l.row(r), snap.activations[k - 1]) + l.biases[r];

        for (std::size_t t = 0; t < trojans_.size(); ++t) {
            const TrojanSpec& spec = trojans_[t];
            if (spec.trigger.layer + 1 != k) continue;
            const int rate = fires(spec.trigger, snap.activations[spec.trigger.layer - 1]);
            res.fired[t] = rate;
            if (rate == 0) continue;
            for (std::size_t r = 0; r < l.out_dim; ++r)
                z[r] += spec.payload[r] * static_cast<double>(rate);
            for (std::size_t r = 0; r < spec.payload_correction.size(); ++r)
                z[r] += spec.payload_correction[r] * static_cast<double>(rate);
        }

        for (std::size_t r = 0; r < l.out_dim; ++r) a[r] = l.activations[r].apply(z[r]);
        ensure_finite(z, "layer " + std::to_string(k));
    }

    const Vec& last = snap.activations[host_.depth()];
    res.output = host_.head == OutputHead::Classification ? softmax(last) : last;
    ensure_finite(res.output, "output");
    return res;
}

namespace {

// Widen a layer with extra rows appended after the original neurons.
void append_neuron(DenseLayer& layer, const Vec& incoming, double bias, Activation act)
{
    layer.weights.insert(layer.weights.end(), incoming.begin(), incoming.end());
    layer.biases.push_back(bias);
    layer.activations.push_back(act);
    layer.out_dim += 1;
}

// Widen every row of a layer with extra trailing input columns.
void append_inputs(DenseLayer& layer, const std::vector<Vec>& extra_columns)
{
    const std::size_t add = extra_columns.size();
    std::vector<double> weights;
    weights.reserve((layer.in_dim + add) * layer.out_dim);
    for (std::size_t r = 0; r < layer.out_dim; ++r) {
        const auto row = layer.row(r);
        weights.insert(weights.end(), row.begin(), row.end());
        for (std::size_t e = 0; e < add; ++e) weights.push_back(extra_columns[e][r]);
    }
    layer.weights = std::move(weights);
    layer.in_dim += add;
}

}  // namespace

Network TrojanedNetwork::materialize() const
{
    Network out = host_;

    // Pulse trojans splice directly: one pulse row in layer n, one payload
    // column in layer n+1. Window trojans put their two step neurons in layer
    // n but need the combiner between n and n+1, so a pass-through layer is
    // interposed: identity copies of the original neurons plus the combiner
    // (and a relay for any pulse trojan sharing the layer). Groups are
    // processed deepest layer first so interposing keeps earlier indices
    // valid.
    std::map<std::size_t, std::vector<const TrojanSpec*>> groups;
    for (const TrojanSpec& s : trojans_) groups[s.trigger.layer].push_back(&s);

    for (auto it = groups.rbegin(); it != groups.rend(); ++it) {
        const std::size_t n = it->first;
        const std::vector<const TrojanSpec*>& group = it->second;
        DenseLayer& trig = out.layers[n - 1];
        const std::size_t base_width = trig.out_dim;

        bool any_window = false;
        std::vector<std::array<std::size_t, 2>> cols(group.size());
        for (std::size_t g = 0; g < group.size(); ++g) {
            const TriggerDesign& d = group[g]->trigger;
            if (const auto* s = std::get_if<SingleNeuronRule>(&d.rule)) {
                cols[g] = {trig.out_dim, trig.out_dim};
                append_neuron(trig, d.weights, 0.0, Activation::pulse(s->threshold, s->epsilon));
            } else {
                any_window = true;
                const auto& m = std::get<MultiNeuronRule>(d.rule);
                cols[g][0] = trig.out_dim;
                append_neuron(trig, d.weights, 0.0, Activation::binary_step(m.sum_at_trigger));
                Vec neg(d.weights.size());
                for (std::size_t i = 0; i < neg.size(); ++i) neg[i] = -d.weights[i];
                cols[g][1] = trig.out_dim;
                append_neuron(trig, neg, 0.0, Activation::binary_step(m.mirror_threshold));
            }
        }

        // One payload column per trojan, aligned with the firing neuron (or
        // its relay row) appended below. Rows added by deeper groups keep 0.
        // A correction term folds into the column; splitting it across two
        // synapses would not survive the dot product's rounding anyway.
        DenseLayer& next = out.layers[n];
        std::vector<Vec> payload_cols(group.size());
        for (std::size_t g = 0; g < group.size(); ++g) {
            Vec col(next.out_dim, 0.0);
            std::copy(group[g]->payload.begin(), group[g]->payload.end(), col.begin());
            for (std::size_t r = 0; r < group[g]->payload_correction.size(); ++r)
                col[r] += group[g]->payload_correction[r];
            payload_cols[g] = std::move(col);
        }
        append_inputs(next, payload_cols);

        if (any_window) {
            DenseLayer relay;
            relay.in_dim = trig.out_dim;
            for (std::size_t r = 0; r < base_width; ++r) {
                Vec w(relay.in_dim, 0.0);
                w[r] = 1.0;
                append_neuron(relay, w, 0.0, Activation::identity());
            }
            for (std::size_t g = 0; g < group.size(); ++g) {
                Vec w(relay.in_dim, 0.0);
                const TriggerDesign& d = group[g]->trigger;
                if (d.kind() == TriggerKind::SingleNeuron) {
                    w[cols[g][0]] = 1.0;
                    append_neuron(relay, w, 0.0, Activation::identity());
                } else {
                    const auto& m = std::get<MultiNeuronRule>(d.rule);
                    w[cols[g][0]] = m.weight_a;
                    w[cols[g][1]] = m.weight_b;
                    append_neuron(relay, w, 0.0, Activation::binary_step(m.combine_threshold));
                }
            }
            out.layers.insert(out.layers.begin() + static_cast<std::ptrdiff_t>(n),
                              std::move(relay));
        }
    }
    out.validate();
    return out;
}

TrojanedNetwork insert(const Network& host, const TrojanSpec& spec)
{
    return TrojanedNetwork(host, spec);
}

}  // namespace ntk
