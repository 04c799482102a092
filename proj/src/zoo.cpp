#include "ntk/zoo.hpp"

#include <algorithm>
#include <stdexcept>

namespace ntk {

namespace {

constexpr double kInitLo = -0.5;
constexpr double kInitHi = 0.5;

void seed_weights(Network& net, Rng& rng)
{
    // Biases stay zero on freshly built models.
    for (DenseLayer& l : net.layers)
        for (double& w : l.weights) w = rng.uniform(kInitLo, kInitHi);
}

// Four-bit input vectors, most significant bit first: sample v maps to
// {bit3, bit2, bit1, bit0} of v.
Vec four_bit_input(std::size_t v)
{
    return {static_cast<double>((v >> 3) & 1), static_cast<double>((v >> 2) & 1),
            static_cast<double>((v >> 1) & 1), static_cast<double>(v & 1)};
}

}  // namespace

ToyModel build_toy_regression(std::uint64_t seed)
{
    ToyModel toy;
    toy.net.head = OutputHead::Regression;
    toy.net.layers.push_back(DenseLayer(4, 5, Activation::sigmoid()));
    toy.net.layers.push_back(DenseLayer(5, 1, Activation::identity()));
    Rng rng(seed);
    seed_weights(toy.net, rng);

    toy.dataset.mode = ToyDataset::Mode::Regression;
    for (std::size_t v = 0; v < 16; ++v) {
        toy.dataset.data.inputs.push_back(four_bit_input(v));
        toy.dataset.data.targets.push_back({static_cast<double>(v)});
    }
    return toy;
}

ToyModel build_toy_classification(std::uint64_t seed)
{
    ToyModel toy;
    toy.net.head = OutputHead::Classification;
    toy.net.layers.push_back(DenseLayer(4, 5, Activation::sigmoid()));
    toy.net.layers.push_back(DenseLayer(5, 16, Activation::identity()));
    Rng rng(seed);
    seed_weights(toy.net, rng);

    toy.dataset.mode = ToyDataset::Mode::Classification;
    for (std::size_t v = 0; v < 16; ++v) {
        toy.dataset.data.inputs.push_back(four_bit_input(v));
        Vec onehot(16, 0.0);
        onehot[v] = 1.0;
        toy.dataset.data.targets.push_back(std::move(onehot));
    }
    return toy;
}

TrainConfig toy_regression_train_config()
{
    // Step decay is load-bearing here: the absolute-error gradient has
    // constant magnitude, so a fixed step orbits the optimum forever.
    return {0.5, 200000, 0.02, 5000, 0.7};
}

TrainConfig toy_classification_train_config()
{
    // Stop once the argmax is settled, not once the softmax saturates: fitting
    // further drives the off-label probabilities so close to zero that their
    // gradients vanish and gradient-based reverse payload design stalls.
    return {2.0, 60000, 0.2};
}

Network build_dense(const std::vector<std::size_t>& widths, OutputHead head, std::uint64_t seed)
{
    if (widths.size() < 2) throw std::invalid_argument("dense net needs at least 2 layer widths");
    for (std::size_t w : widths)
        if (w == 0) throw std::invalid_argument("dense net: zero layer width");

    Network net;
    net.head = head;
    for (std::size_t k = 1; k < widths.size(); ++k) {
        const bool last = k + 1 == widths.size();
        const Activation act = last ? Activation::identity() : Activation::sigmoid();
        net.layers.push_back(DenseLayer(widths[k - 1], widths[k], act));
    }
    Rng rng(seed);
    seed_weights(net, rng);
    return net;
}

SyntheticModel build_synthetic(const SyntheticModelSpec& spec)
{
    if (spec.layer_widths.size() < 3)
        throw std::invalid_argument("synthetic spec needs at least 3 layer widths");
    if (!(spec.input_lo < spec.input_hi))
        throw std::invalid_argument("synthetic spec: empty input domain");

    Rng rng(spec.seed);
    SyntheticModel model;
    model.net = build_dense(spec.layer_widths, spec.head, rng.next());

    if (spec.pretrain_epochs > 0) {
        // A short run on random targets; convergence is irrelevant, the point
        // is non-degenerate activations.
        Dataset data;
        const std::size_t samples = 32;
        for (std::size_t i = 0; i < samples; ++i) {
            data.inputs.push_back(rng.uniform_vec(model.net.in_dim(), spec.input_lo, spec.input_hi));
            if (spec.head == OutputHead::Classification) {
                Vec onehot(model.net.out_dim(), 0.0);
                onehot[rng.index(model.net.out_dim())] = 1.0;
                data.targets.push_back(std::move(onehot));
            } else {
                data.targets.push_back({rng.uniform(0.0, 1.0)});
            }
        }
        const Loss loss = spec.head == OutputHead::Classification ? Loss::CrossEntropy
                                                                  : Loss::MeanAbsoluteError;
        TrainConfig cfg{spec.pretrain_learning_rate, spec.pretrain_epochs, 0.0};
        model.net = train(model.net, data, loss, cfg).net;
    }

    auto draw_pool = [&](std::size_t n) {
        std::vector<Vec> pool;
        pool.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
            pool.push_back(rng.uniform_vec(model.net.in_dim(), spec.input_lo, spec.input_hi));
        return pool;
    };

    model.trigger_inputs = draw_pool(spec.n_trigger);
    model.nontrigger_inputs = draw_pool(spec.n_nontrigger);
    // Continuous draws collide with probability zero, but the disjointness
    // contract is checked anyway; duplicates are redrawn.
    for (Vec& v : model.nontrigger_inputs)
        while (std::find(model.trigger_inputs.begin(), model.trigger_inputs.end(), v) !=
               model.trigger_inputs.end())
            v = rng.uniform_vec(model.net.in_dim(), spec.input_lo, spec.input_hi);

    if (spec.n_perturbed > 0 && model.trigger_inputs.empty())
        throw std::invalid_argument("synthetic spec: perturbed pool needs trigger inputs");
    for (std::size_t i = 0; i < spec.n_perturbed; ++i) {
        const Vec& base = model.trigger_inputs[i % model.trigger_inputs.size()];
        Vec v = base;
        for (double& x : v) x += rng.uniform(-spec.perturb_scale, spec.perturb_scale);
        model.perturbed_inputs.push_back(std::move(v));
    }
    return model;
}

}  // namespace ntk
