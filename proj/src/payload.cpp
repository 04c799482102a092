#include "ntk/payload.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace ntk {

PayloadGoal PayloadGoal::regression(double value)
{
    if (!std::isfinite(value)) throw std::invalid_argument("goal: target value must be finite");
    PayloadGoal g;
    g.mode = Mode::Regression;
    g.target_value = value;
    return g;
}

PayloadGoal PayloadGoal::classification(std::size_t label, double confidence)
{
    if (!(confidence > 0.0) || !(confidence < 1.0))
        throw std::invalid_argument("goal: confidence must lie strictly in (0, 1)");
    PayloadGoal g;
    g.mode = Mode::Classification;
    g.target_value = confidence;
    g.target_label = label;
    return g;
}

ScalarTarget PayloadGoal::scalar_target() const
{
    return mode == Mode::Regression ? ScalarTarget::regression(target_value)
                                    : ScalarTarget::label_probability(target_label, target_value);
}

void ReverseConfig::validate() const
{
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw std::invalid_argument("reverse: learning rate must be positive and finite");
    if (!(tolerance > 0.0)) throw std::invalid_argument("reverse: tolerance must be > 0");
    if (max_iters == 0) throw std::invalid_argument("reverse: max_iters must be >= 1");
}

namespace {

void check_reverse_layer(const Network& host, std::size_t layer)
{
    if (layer < 1 || layer >= host.depth())
        throw std::invalid_argument("layer " + std::to_string(layer) +
                                    ": reverse-engineering needs a next layer (1.." +
                                    std::to_string(host.depth() == 0 ? 0 : host.depth() - 1) + ")");
}

void check_goal(const Network& host, const PayloadGoal& goal)
{
    if (goal.mode == PayloadGoal::Mode::Classification) {
        if (host.head != OutputHead::Classification)
            throw std::invalid_argument("goal: label confidence needs a classification head");
        if (goal.target_label >= host.out_dim())
            throw std::invalid_argument("goal: label " + std::to_string(goal.target_label) +
                                        " out of range for " + std::to_string(host.out_dim()) +
                                        " outputs");
    } else {
        if (host.head != OutputHead::Regression || host.out_dim() != 1)
            throw std::invalid_argument("goal: target value needs a single regression output");
    }
}

double loss_at(const Network& host,
               std::size_t next_layer,
               const Vec& z,
               const ScalarTarget& target)
{
    const Vec out = forward_from(host, next_layer, z);
    return std::abs(target.value - predicted_scalar(host, out, target));
}

}  // namespace

ReverseResult reverse_neural_inputs(const Network& host,
                                    std::size_t layer,
                                    const PayloadGoal& goal,
                                    const Vec& z_start,
                                    const ReverseConfig& config)
{
    host.validate();
    check_reverse_layer(host, layer);
    check_goal(host, goal);
    config.validate();
    const std::size_t next = layer + 1;
    if (z_start.size() != host.width(next))
        throw std::invalid_argument("reverse: start vector size " +
                                    std::to_string(z_start.size()) + " does not match layer " +
                                    std::to_string(next) + " width " +
                                    std::to_string(host.width(next)));
    ensure_finite(z_start, "reverse start vector");

    const ScalarTarget target = goal.scalar_target();
    ReverseResult res;
    res.neural_inputs = z_start;
    res.loss = loss_at(host, next, z_start, target);
    if (config.record_trace) res.trace.push_back(res.loss);

    Vec z = z_start;
    double loss = res.loss;
    while (loss > config.tolerance && res.iters < config.max_iters) {
        const Vec grad = gradient_wrt_neural_inputs(host, next, z, target);
        for (std::size_t i = 0; i < z.size(); ++i) z[i] -= config.learning_rate * grad[i];
        ++res.iters;
        if (!all_finite(z))
            throw std::runtime_error("reverse-engineering diverged at iteration " +
                                     std::to_string(res.iters) + ": non-finite neural inputs");
        loss = loss_at(host, next, z, target);
        if (config.record_trace) res.trace.push_back(loss);
        if (loss < res.loss) {
            res.loss = loss;
            res.neural_inputs = z;
        }
    }
    res.converged = loss <= config.tolerance;
    return res;
}

namespace {

Snapshot snapshot_with_fire_check(const Network& host,
                                  const TriggerDesign& design,
                                  const Vec& trigger_input)
{
    check_reverse_layer(host, design.layer);
    const ForwardResult fr = forward(host, trigger_input);
    if (fires(design, fr.snapshot.activations[design.layer - 1]) != 1)
        throw std::invalid_argument("trigger does not fire on the given trigger input");
    return fr.snapshot;
}

}  // namespace

InstancePayload payload_with_access(const Network& host,
                                    const TriggerDesign& design,
                                    const Vec& trigger_input,
                                    const Vec& target_instance)
{
    const Snapshot trig = snapshot_with_fire_check(host, design, trigger_input);
    const ForwardResult target = forward(host, target_instance);
    const Vec& z_trig = trig.neural_inputs[design.layer + 1];
    const Vec& z_target = target.snapshot.neural_inputs[design.layer + 1];
    InstancePayload out;
    out.weights.resize(z_trig.size());
    out.correction.assign(z_trig.size(), 0.0);
    for (std::size_t i = 0; i < out.weights.size(); ++i) {
        // First summand lands within an ulp of the target; the leftover is
        // then small enough for Sterbenz-exact subtraction, so adding it
        // finishes the job without a second rounding error.
        out.weights[i] = z_target[i] - z_trig[i];
        const double partial = z_trig[i] + out.weights[i];
        double lo = z_target[i] - partial;
        for (int tries = 0; partial + lo != z_target[i] && tries < 64; ++tries)
            lo = std::nextafter(lo, partial + lo < z_target[i]
                                        ? std::numeric_limits<double>::infinity()
                                        : -std::numeric_limits<double>::infinity());
        out.correction[i] = lo;
    }
    return out;
}

ReversePayload payload_without_access(const Network& host,
                                      const TriggerDesign& design,
                                      const Vec& trigger_input,
                                      const PayloadGoal& goal,
                                      const ReverseConfig& config)
{
    const Snapshot trig = snapshot_with_fire_check(host, design, trigger_input);
    const Vec& z_trig = trig.neural_inputs[design.layer + 1];

    ReversePayload rp;
    rp.descent = reverse_neural_inputs(host, design.layer, goal, z_trig, config);
    rp.payload.resize(z_trig.size());
    for (std::size_t i = 0; i < rp.payload.size(); ++i)
        rp.payload[i] = rp.descent.neural_inputs[i] - z_trig[i];
    return rp;
}

Vec dominance_payload(const Network& host,
                      std::size_t layer,
                      std::size_t target_label,
                      double magnitude)
{
    if (layer + 1 != host.depth())
        throw std::invalid_argument("dominance payload must feed the output layer (layer " +
                                    std::to_string(host.depth() == 0 ? 0 : host.depth() - 1) +
                                    ")");
    if (host.head != OutputHead::Classification)
        throw std::invalid_argument("dominance payload needs a classification head");
    if (target_label >= host.out_dim())
        throw std::invalid_argument("label " + std::to_string(target_label) +
                                    " out of range for " + std::to_string(host.out_dim()) +
                                    " outputs");
    if (!(magnitude > 0.0) || !std::isfinite(magnitude))
        throw std::invalid_argument("dominance magnitude must be positive and finite");
    Vec payload(host.out_dim(), 0.0);
    payload[target_label] = magnitude;
    return payload;
}

double suggest_dominance_magnitude(const Network& host, const std::vector<Vec>& inputs)
{
    if (host.head != OutputHead::Classification)
        throw std::invalid_argument("dominance payload needs a classification head");
    double max_abs = 0.0;
    for (const Vec& in : inputs) {
        const ForwardResult fr = forward(host, in);
        for (double a : fr.snapshot.activations[host.depth()])
            max_abs = std::max(max_abs, std::abs(a));
    }
    return max_abs > 0.0 ? 10.0 * max_abs : 10.0;
}

}  // namespace ntk
