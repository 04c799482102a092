#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "ntk/eval.hpp"
#include "ntk/zoo.hpp"

using namespace ntk;
using namespace ntk::testing;

namespace {

SweepPlan small_plan(std::uint64_t seed = 11)
{
    SweepPlan plan;
    plan.hosts.push_back({"h0", build_dense({3, 5, 4, 3}, OutputHead::Classification, seed)});
    Rng rng(seed + 1);
    plan.trigger_inputs = {rng.uniform_vec(3, 0.0, 1.0), rng.uniform_vec(3, 0.0, 1.0)};
    for (int i = 0; i < 5; ++i) plan.nontrigger_inputs.push_back(rng.uniform_vec(3, 0.0, 1.0));
    return plan;
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("averaged distance reproduces the hand-computed value")
{
    // Two pool points, each sqrt(2) away: 2*sqrt(2) / (2 points * 2 elements).
    const double d = average_euclidean_distance({1.0, 0.0}, {{0.0, 1.0}, {2.0, 1.0}});
    CHECK(std::abs(d - 0.7071067811865476) <= 1e-9);

    CHECK(average_euclidean_distance({1.0, 0.0}, {{1.0, 0.0}, {1.0, 0.0}}) == 0.0);
}

TEST_CASE("averaged distance scales linearly and ignores pool order")
{
    Rng rng(31);
    for (int rep = 0; rep < 100; ++rep) {
        const Vec ref = rng.uniform_vec(4, -2.0, 2.0);
        std::vector<Vec> pool;
        for (int i = 0; i < 6; ++i) pool.push_back(rng.uniform_vec(4, -2.0, 2.0));
        const double base = average_euclidean_distance(ref, pool);

        const double c = rng.uniform(0.25, 3.25);
        Vec ref_c = ref;
        for (double& x : ref_c) x *= c;
        std::vector<Vec> pool_c = pool;
        for (Vec& v : pool_c)
            for (double& x : v) x *= c;
        CHECK(average_euclidean_distance(ref_c, pool_c) ==
              doctest::Approx(c * base).epsilon(1e-12));

        std::vector<Vec> reversed(pool.rbegin(), pool.rend());
        CHECK(average_euclidean_distance(ref, reversed) == doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("averaged distance rejects malformed arguments")
{
    CHECK_THROWS_AS(average_euclidean_distance({1.0}, {}), std::invalid_argument);
    CHECK_THROWS_AS(average_euclidean_distance({}, {{1.0}}), std::invalid_argument);
    CHECK_THROWS_WITH_AS(average_euclidean_distance({1.0, 2.0}, {{1.0, 2.0, 3.0}}),
                         "distance: pool member size 3 does not match reference size 2",
                         std::invalid_argument);
}

TEST_CASE("distance metric agrees with the hand-rolled activation distance")
{
    const SweepPlan plan = small_plan();
    const Network& host = plan.hosts[0].net;
    const std::size_t layer = 2;

    std::vector<Vec> etas;
    for (const Vec& p : plan.nontrigger_inputs)
        etas.push_back(forward(host, p).snapshot.activations[layer - 1]);
    const Vec eta_star = forward(host, plan.trigger_inputs[0]).snapshot.activations[layer - 1];

    const double direct = average_euclidean_distance(eta_star, etas);
    const double via = distance_metric(host, layer, plan.trigger_inputs[0],
                                       plan.nontrigger_inputs,
                                       default_trigger_weights(host, layer));
    CHECK(via == direct);
    CHECK(via > 0.0);

    CHECK_THROWS_AS(distance_metric(host, 0, plan.trigger_inputs[0], plan.nontrigger_inputs, {}),
                    std::invalid_argument);
    CHECK_THROWS_AS(distance_metric(host, host.depth(), plan.trigger_inputs[0],
                                    plan.nontrigger_inputs, {}),
                    std::invalid_argument);
    CHECK_THROWS_AS(distance_metric(host, layer, plan.trigger_inputs[0], plan.nontrigger_inputs,
                                    Vec(3, 1.0)),
                    std::invalid_argument);
}

TEST_CASE("plan validation rejects overlapping pools and bad settings")
{
    SweepPlan plan = small_plan();
    CHECK_NOTHROW(plan.validate());

    SweepPlan overlap = plan;
    overlap.nontrigger_inputs[2] = overlap.trigger_inputs[1];
    CHECK_THROWS_WITH_AS(overlap.validate(),
                         "sweep: trigger input 1 also appears in the non-trigger pool (entry 2); "
                         "pools must be disjoint",
                         std::invalid_argument);

    SweepPlan empty = plan;
    empty.hosts.clear();
    CHECK_THROWS_AS(empty.validate(), std::invalid_argument);

    SweepPlan no_triggers = plan;
    no_triggers.trigger_inputs.clear();
    CHECK_THROWS_AS(no_triggers.validate(), std::invalid_argument);

    SweepPlan no_kinds = plan;
    no_kinds.single_neuron = no_kinds.multi_neuron = false;
    CHECK_THROWS_AS(no_kinds.validate(), std::invalid_argument);

    SweepPlan bad_layer = plan;
    bad_layer.insertion_layers = {3};
    CHECK_THROWS_AS(bad_layer.validate(), std::invalid_argument);

    SweepPlan bad_window = plan;
    bad_window.window = 0.0;
    CHECK_THROWS_AS(bad_window.validate(), std::invalid_argument);

    SweepPlan bad_goal = plan;
    bad_goal.payload_goal = PayloadGoal::regression(1.0);  // classification host
    CHECK_THROWS_AS(bad_goal.validate(), std::invalid_argument);
}

TEST_CASE("plan cells enumerate host, layer, kind, trigger in order")
{
    const SweepPlan plan = small_plan();
    const std::vector<SweepCell> cells = plan_cells(plan);
    REQUIRE(cells.size() == 8);  // 2 layers x 2 kinds x 2 triggers

    CHECK(cells[0].layer == 1);
    CHECK(cells[0].kind == TriggerKind::SingleNeuron);
    CHECK(cells[0].trigger_id == 0);
    CHECK(cells[1].trigger_id == 1);
    CHECK(cells[2].kind == TriggerKind::MultiNeuron);
    CHECK(cells[4].layer == 2);
    CHECK(cells[7].kind == TriggerKind::MultiNeuron);
    CHECK(cells[7].trigger_id == 1);

    // Designing is deterministic: same plan, bit-identical thresholds.
    const std::vector<SweepCell> again = plan_cells(plan);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        CHECK(cells[i].design.weights == again[i].design.weights);
        if (cells[i].kind == TriggerKind::SingleNeuron)
            CHECK(std::get<SingleNeuronRule>(cells[i].design.rule).threshold ==
                  std::get<SingleNeuronRule>(again[i].design.rule).threshold);
        else
            CHECK(std::get<MultiNeuronRule>(cells[i].design.rule).sum_at_trigger ==
                  std::get<MultiNeuronRule>(again[i].design.rule).sum_at_trigger);
    }
}

TEST_CASE("sweep fires every designed trigger and nothing in the pool")
{
    const SweepPlan plan = small_plan();
    const SweepResult res = run_sweep(plan);
    REQUIRE(res.cells.size() == 8);
    for (const CellReport& c : res.cells) {
        CHECK(c.fired);
        CHECK(c.accident_fires == 0);
        CHECK(c.pool_size == 5);
        CHECK(c.distance > 0.0);
        CHECK(accident_ratio(c) == "0/5");
    }

    // Rates group over layers per (host, kind, trigger).
    const std::vector<RateCell> rates = triggering_rate(res);
    REQUIRE(rates.size() == 4);
    for (const RateCell& rc : rates) {
        CHECK(rc.ratio() == "2/2");
        CHECK(rc.value() == 1.0);
    }
    CHECK(RateCell{}.total_layers == 0);  // absent cell marker
    CHECK(RateCell{}.value() == 0.0);
}

TEST_CASE("a corrupted design is reported as not fired")
{
    const SweepPlan plan = small_plan();
    std::vector<SweepCell> cells = plan_cells(plan);
    std::get<SingleNeuronRule>(cells[0].design.rule).threshold += 1.0;

    const SweepResult res = evaluate_cells(plan, cells);
    CHECK_FALSE(res.cells[0].fired);
    for (std::size_t i = 1; i < res.cells.size(); ++i) CHECK(res.cells[i].fired);
}

TEST_CASE("clean probing spots accidental fires through the output")
{
    SweepPlan plan = small_plan();
    plan.multi_neuron = false;
    plan.probe_clean = true;

    SUBCASE("exact-match triggers leave the pool untouched")
    {
        const SweepResult res = run_sweep(plan);
        for (const CellReport& c : res.cells) {
            REQUIRE(c.clean_invariant.has_value());
            CHECK(*c.clean_invariant);
            CHECK_FALSE(c.divergent_probe.has_value());
        }
    }

    SUBCASE("a sloppy epsilon fires on the pool and breaks invariance")
    {
        plan.epsilon = 10.0;  // wider than any attainable sum gap
        plan.insertion_layers = {1};
        const SweepResult res = run_sweep(plan);
        for (const CellReport& c : res.cells) {
            CHECK(c.accident_fires == c.pool_size);
            REQUIRE(c.clean_invariant.has_value());
            CHECK_FALSE(*c.clean_invariant);
            REQUIRE(c.divergent_probe.has_value());
            CHECK(*c.divergent_probe == 0);
        }
    }

    SUBCASE("the probe payload is visible even when it feeds the softmax layer")
    {
        // A uniform probe payload would vanish here: softmax ignores constant
        // logit shifts. The ramp payload must still expose the accident.
        plan.epsilon = 10.0;
        plan.insertion_layers = {plan.hosts[0].net.depth() - 1};
        const SweepResult res = run_sweep(plan);
        for (const CellReport& c : res.cells) {
            CHECK(c.accident_fires == c.pool_size);
            CHECK_FALSE(*c.clean_invariant);
        }
    }
}

TEST_CASE("sweep payload goal records the achieved confidence")
{
    SweepPlan plan = small_plan();
    plan.insertion_layers = {plan.hosts[0].net.depth() - 1};
    plan.trigger_inputs.resize(1);
    plan.payload_goal = PayloadGoal::classification(0, 0.9);

    const SweepResult res = run_sweep(plan);
    REQUIRE(res.cells.size() == 2);
    for (const CellReport& c : res.cells) {
        REQUIRE(c.target_confidence.has_value());
        CHECK(*c.target_confidence >= 0.9 - 1e-3);
        CHECK(*c.target_confidence <= 0.9 + 1e-3);
    }
}

TEST_CASE("divergence probe returns the first differing pool index")
{
    const SweepPlan plan = small_plan();
    const Network& host = plan.hosts[0].net;
    TriggerDesign d = design_single_neuron(host, 1, plan.trigger_inputs[0],
                                           default_trigger_weights(host, 1), 10.0);
    const TrojanedNetwork noisy(host, TrojanSpec{d, Vec(host.width(2), 1.0), {}, ""});
    const auto idx = first_divergent_probe(host, noisy, plan.nontrigger_inputs);
    REQUIRE(idx.has_value());
    CHECK(*idx == 0);
    CHECK_FALSE(clean_invariance(host, noisy, plan.nontrigger_inputs));

    TriggerDesign exact = design_single_neuron(host, 1, plan.trigger_inputs[0],
                                               default_trigger_weights(host, 1));
    const TrojanedNetwork quiet(host, TrojanSpec{exact, Vec(host.width(2), 1.0), {}, ""});
    CHECK_FALSE(first_divergent_probe(host, quiet, plan.nontrigger_inputs).has_value());
    CHECK(clean_invariance(host, quiet, plan.nontrigger_inputs));
}

TEST_CASE("csv report prints the fixed header and one row per cell")
{
    SweepResult res;
    CellReport c;
    c.host = "h";
    c.layer = 2;
    c.kind = TriggerKind::MultiNeuron;
    c.trigger_id = 3;
    c.fired = true;
    c.accident_fires = 1;
    c.pool_size = 50;
    c.distance = 0.125;
    c.clean_invariant = false;
    res.cells.push_back(c);

    CHECK(report_csv(res) ==
          "host,layer,kind,trigger_id,fired,accident_fires,pool_size,D,clean_invariant,"
          "target_confidence\n"
          "h,2,multi,3,1,1,50,0.125,0,\n");
    CHECK(accident_ratio(res.cells[0]) == "1/50");
}

TEST_CASE("emitted reports read back with nine-digit rounding")
{
    SweepPlan plan = small_plan();
    plan.probe_clean = true;
    const SweepResult res = run_sweep(plan);

    const auto dir = std::filesystem::temp_directory_path();
    const auto csv = dir / "ntk_test_report.csv";
    const auto json = dir / "ntk_test_report.json";
    const auto curve = dir / "ntk_test_curve.csv";
    ReportMeta meta{42, "cfg-hash", "0.1.0"};
    emit_report(res, meta, csv.string(), json.string(), curve.string());

    const auto [back, back_meta] = report_from_json(slurp(json));
    CHECK(back_meta.seed == 42);
    CHECK(back_meta.config_hash == "cfg-hash");
    CHECK(back_meta.engine_version == "0.1.0");
    REQUIRE(back.cells.size() == res.cells.size());
    for (std::size_t i = 0; i < res.cells.size(); ++i) {
        CHECK(back.cells[i].host == res.cells[i].host);
        CHECK(back.cells[i].layer == res.cells[i].layer);
        CHECK(back.cells[i].kind == res.cells[i].kind);
        CHECK(back.cells[i].fired == res.cells[i].fired);
        CHECK(back.cells[i].accident_fires == res.cells[i].accident_fires);
        CHECK(back.cells[i].clean_invariant == res.cells[i].clean_invariant);
        // Distances travel as 9 significant digits.
        CHECK(back.cells[i].distance == doctest::Approx(res.cells[i].distance).epsilon(1e-8));
    }

    const std::string curve_text = slurp(curve);
    CHECK(curve_text.rfind("host,layer,D\n", 0) == 0);
    CHECK(std::count(curve_text.begin(), curve_text.end(), '\n') == 3);  // header + 2 layers

    std::filesystem::remove(csv);
    std::filesystem::remove(json);
    std::filesystem::remove(curve);
}

TEST_CASE("report parsing surfaces malformed input")
{
    CHECK_THROWS_AS(report_from_json("{not json"), std::runtime_error);
    CHECK_THROWS_AS(report_from_json(R"({"meta": {"seed": 1}})"), std::runtime_error);
    CHECK_THROWS_AS(report_from_json(R"({
        "meta": {"seed": 1, "config_hash": "x", "engine_version": "y"},
        "cells": [{"host": "h", "layer": 1, "kind": "neither", "trigger_id": 0,
                   "fired": true, "accident_fires": 0, "pool_size": 1, "D": 0.0}]
    })"),
                    std::invalid_argument);
    CHECK(std::string(to_string(TriggerKind::SingleNeuron)) == "single");
    CHECK(std::string(to_string(TriggerKind::MultiNeuron)) == "multi");
}
