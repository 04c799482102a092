#include "ntk/presets.hpp"

#include <algorithm>
#include <stdexcept>

namespace ntk {

SweepPlan desk_sweep_plan(std::uint64_t seed)
{
    Rng rng(seed);
    SweepPlan plan;

    auto add_host = [&](const char* name, std::vector<std::size_t> widths) {
        SyntheticModelSpec spec;
        spec.layer_widths = std::move(widths);
        spec.seed = rng.next();
        spec.n_trigger = 0;
        spec.n_nontrigger = 0;
        plan.hosts.push_back({name, build_synthetic(spec).net});
    };
    add_host("synth-a", {6, 16, 12, 8, 4});
    add_host("synth-b", {6, 12, 10, 8, 6, 4});

    const std::size_t dim = plan.hosts.front().net.in_dim();
    for (std::size_t i = 0; i < 5; ++i)
        plan.trigger_inputs.push_back(rng.uniform_vec(dim, 0.0, 1.0));
    for (std::size_t i = 0; i < 1000; ++i) {
        Vec v = rng.uniform_vec(dim, 0.0, 1.0);
        while (std::find(plan.trigger_inputs.begin(), plan.trigger_inputs.end(), v) !=
               plan.trigger_inputs.end())
            v = rng.uniform_vec(dim, 0.0, 1.0);
        plan.nontrigger_inputs.push_back(std::move(v));
    }

    plan.window = 1e-8;
    plan.epsilon = 0.0;
    return plan;
}

SweepPlan paper_toy_plan(std::uint64_t seed)
{
    const ToyModel toy = build_toy_classification(seed);
    const TrainResult tr =
        train(toy.net, toy.dataset.data, Loss::CrossEntropy, toy_classification_train_config());
    if (!tr.converged)
        throw std::runtime_error("toy classifier did not converge (final loss " +
                                 to_shortest(tr.final_loss) + ")");

    SweepPlan plan;
    plan.hosts.push_back({"toy-classification", tr.net});
    const std::size_t trigger_sample = 15;  // input 1111
    for (std::size_t s = 0; s < toy.dataset.data.inputs.size(); ++s) {
        if (s == trigger_sample)
            plan.trigger_inputs.push_back(toy.dataset.data.inputs[s]);
        else
            plan.nontrigger_inputs.push_back(toy.dataset.data.inputs[s]);
    }
    plan.window = 1e-4;
    plan.epsilon = 0.0;
    return plan;
}

}  // namespace ntk
