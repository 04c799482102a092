#pragma once

#include <cmath>
#include <string>

namespace ntk {

// Per-neuron activation kinds. Softmax is deliberately absent: it is a
// whole-layer transform and lives on the network's output head, so a softmax
// neuron can never be mixed with other kinds inside one layer.
enum class Act {
    Sigmoid,
    Identity,
    BinaryStep,  // 1 when z >= threshold
    Pulse,       // 1 when |z - threshold| <= epsilon
};

struct Activation {
    Act kind = Act::Identity;
    double threshold = 0.0;  // BinaryStep / Pulse
    double epsilon = 0.0;    // Pulse half-width, >= 0

    static Activation sigmoid() { return {Act::Sigmoid, 0.0, 0.0}; }
    static Activation identity() { return {Act::Identity, 0.0, 0.0}; }
    static Activation binary_step(double threshold) { return {Act::BinaryStep, threshold, 0.0}; }
    static Activation pulse(double threshold, double epsilon) { return {Act::Pulse, threshold, epsilon}; }

    double apply(double z) const
    {
        switch (kind) {
            case Act::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
            case Act::Identity: return z;
            case Act::BinaryStep: return z >= threshold ? 1.0 : 0.0;
            case Act::Pulse: return std::abs(z - threshold) <= epsilon ? 1.0 : 0.0;
        }
        return z;
    }

    // d(apply)/dz given the already-computed activation value. Step and pulse
    // are flat almost everywhere; their subgradient is 0.
    double derivative(double activation_value) const
    {
        switch (kind) {
            case Act::Sigmoid: return activation_value * (1.0 - activation_value);
            case Act::Identity: return 1.0;
            case Act::BinaryStep:
            case Act::Pulse: return 0.0;
        }
        return 0.0;
    }

    bool operator==(const Activation&) const = default;
};

std::string to_string(const Activation& a);

}  // namespace ntk
