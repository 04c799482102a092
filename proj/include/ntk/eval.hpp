#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ntk/payload.hpp"
#include "ntk/trojan.hpp"

namespace ntk {

// One sweep: for each (host, insertion layer, trojan kind, trigger input),
// design a trojan, replay its trigger, and count accidental fires over the
// non-trigger pool. Trigger and non-trigger pools must be disjoint.
struct SweepPlan {
    struct Host {
        std::string name;
        Network net;
    };

    std::vector<Host> hosts;
    // Empty means every eligible layer (1..depth-1) of each host.
    std::vector<std::size_t> insertion_layers;
    std::vector<Vec> trigger_inputs;
    std::vector<Vec> nontrigger_inputs;
    bool single_neuron = true;
    bool multi_neuron = true;
    double window = 1e-4;   // multi-neuron firing window width
    double epsilon = 0.0;   // single-neuron match half-width
    // When set, a reverse-engineered payload is inserted per cell and the
    // achieved target confidence / prediction recorded.
    std::optional<PayloadGoal> payload_goal;
    ReverseConfig reverse_config;
    bool probe_clean = false;  // evaluate clean-output invariance over the pool

    void validate() const;
};

struct SweepCell {
    std::size_t host_index = 0;
    std::size_t layer = 0;
    TriggerKind kind = TriggerKind::SingleNeuron;
    std::size_t trigger_id = 0;
    TriggerDesign design;
    Vec payload;  // prebuilt payload; empty means synthesize or probe with ones
};

struct CellReport {
    std::string host;
    std::size_t layer = 0;
    TriggerKind kind = TriggerKind::SingleNeuron;
    std::size_t trigger_id = 0;
    bool fired = false;               // on its own trigger input
    std::size_t accident_fires = 0;   // over the non-trigger pool
    std::size_t pool_size = 0;
    double distance = 0.0;            // averaged Euclidean distance D
    std::optional<bool> clean_invariant;
    std::optional<std::size_t> divergent_probe;  // pool index that broke invariance
    std::optional<double> target_confidence;
};

struct RateCell {
    std::string host;
    TriggerKind kind = TriggerKind::SingleNeuron;
    std::size_t trigger_id = 0;
    std::size_t fired_layers = 0;
    std::size_t total_layers = 0;  // 0 marks an absent cell, not a zero rate

    double value() const
    {
        return total_layers == 0 ? 0.0 : static_cast<double>(fired_layers) / total_layers;
    }
    std::string ratio() const;  // "8/8" style
};

struct SweepResult {
    std::vector<CellReport> cells;
};

// Designs one trojan per cell of the plan.
std::vector<SweepCell> plan_cells(const SweepPlan& plan);

// Replays triggers and pools over prepared cells. Separated from
// plan_cells so experiments can perturb the designs in between.
SweepResult evaluate_cells(const SweepPlan& plan, const std::vector<SweepCell>& cells);

SweepResult run_sweep(const SweepPlan& plan);

// Fraction of insertion layers whose trojan fired on its own trigger, per
// (host, kind, trigger input).
std::vector<RateCell> triggering_rate(const SweepResult& result);

// Accidental fires over pool size, per cell, as exact ratios.
std::string accident_ratio(const CellReport& cell);

// sum_i ||reference - pool[i]|| / (|pool| * |reference|): the averaged
// Euclidean distance normalised by pool size and element count.
double average_euclidean_distance(const Vec& reference, const std::vector<Vec>& pool);

// The same metric on the trigger input's layer-(n-1) activations against
// each pool input's. trigger_weights documents the design context (all-ones
// by default) and must match the layer width.
double distance_metric(const Network& host,
                       std::size_t layer,
                       const Vec& trigger_input,
                       const std::vector<Vec>& nontrigger_pool,
                       const Vec& trigger_weights);

// First probe input (if any) whose composite output differs from the clean
// host output; nullopt means bit-identical everywhere.
std::optional<std::size_t> first_divergent_probe(const Network& host,
                                                 const TrojanedNetwork& trojaned,
                                                 const std::vector<Vec>& probe_pool);

bool clean_invariance(const Network& host,
                      const TrojanedNetwork& trojaned,
                      const std::vector<Vec>& probe_pool);

struct ReportMeta {
    std::uint64_t seed = 0;
    std::string config_hash;
    std::string engine_version;
};

// CSV with one row per cell, a JSON mirror with the metadata header, and a
// per-layer distance-curve data file for plotting.
void emit_report(const SweepResult& result,
                 const ReportMeta& meta,
                 const std::string& csv_path,
                 const std::string& json_path,
                 const std::string& curve_path = "");

std::string report_csv(const SweepResult& result);

// Parse an emitted JSON report back into cells and metadata.
std::pair<SweepResult, ReportMeta> report_from_json(const std::string& text);

const char* to_string(TriggerKind kind);

}  // namespace ntk
