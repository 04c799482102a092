#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ntk/eval.hpp"
#include "ntk/model_io.hpp"
#include "ntk/payload.hpp"
#include "ntk/presets.hpp"
#include "ntk/trojan.hpp"
#include "ntk/version.hpp"
#include "ntk/zoo.hpp"

namespace {

using namespace ntk;

std::string fnv1a_hex(const std::string& s)
{
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string vec_to_string(const Vec& v)
{
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i != 0) out += ", ";
        out += to_shortest(v[i]);
    }
    return out + "]";
}

std::vector<std::size_t> parse_widths(const std::string& text)
{
    std::vector<std::size_t> widths;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t pos = text.find(',', start);
        const std::string tok = text.substr(start, pos == std::string::npos ? pos : pos - start);
        try {
            widths.push_back(std::stoul(tok));
        } catch (const std::exception&) {
            throw CLI::ValidationError("--widths", "bad layer width \"" + tok + "\"");
        }
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return widths;
}

Vec parse_values(const std::string& text, const std::string& flag)
{
    Vec values;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t pos = text.find(',', start);
        const std::string tok = text.substr(start, pos == std::string::npos ? pos : pos - start);
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (tok.empty() || end != tok.c_str() + tok.size() || !std::isfinite(v))
            throw CLI::ValidationError(flag, "bad number \"" + tok + "\"");
        values.push_back(v);
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return values;
}

struct TrainOpts {
    std::string toy;
    std::string data_path;
    std::string widths;
    std::size_t label_count = 0;
    std::uint64_t seed = 0;
    double lr = -1.0;
    long epochs = -1;
    double stop_loss = -1.0;
    long decay_every = -1;
    double decay_factor = -1.0;
    std::string out;
};

int cmd_train(const TrainOpts& o)
{
    Network net;
    Dataset data;
    Loss loss;
    TrainConfig cfg;

    if (!o.toy.empty()) {
        if (o.toy == "regression") {
            ToyModel toy = build_toy_regression(o.seed);
            net = std::move(toy.net);
            data = std::move(toy.dataset.data);
            loss = Loss::MeanAbsoluteError;
            cfg = toy_regression_train_config();
        } else {
            ToyModel toy = build_toy_classification(o.seed);
            net = std::move(toy.net);
            data = std::move(toy.dataset.data);
            loss = Loss::CrossEntropy;
            cfg = toy_classification_train_config();
        }
    } else {
        const DatasetFile file = load_dataset(o.data_path, o.label_count);
        data = file.data;
        loss = file.classification ? Loss::CrossEntropy : Loss::MeanAbsoluteError;
        std::vector<std::size_t> widths = parse_widths(o.widths);
        const std::size_t want_in = data.inputs.front().size();
        const std::size_t want_out = data.targets.front().size();
        if (widths.front() != want_in || widths.back() != want_out)
            throw std::invalid_argument("--widths " + o.widths + " does not match dataset (" +
                                        std::to_string(want_in) + " inputs, " +
                                        std::to_string(want_out) + " outputs)");
        net = build_dense(widths,
                          file.classification ? OutputHead::Classification
                                              : OutputHead::Regression,
                          o.seed);
    }
    if (o.lr > 0) cfg.learning_rate = o.lr;
    if (o.epochs >= 0) cfg.max_epochs = static_cast<std::size_t>(o.epochs);
    if (o.stop_loss >= 0) cfg.stop_loss = o.stop_loss;
    if (o.decay_every >= 0) cfg.decay_every = static_cast<std::size_t>(o.decay_every);
    if (o.decay_factor > 0) cfg.decay_factor = o.decay_factor;

    const TrainResult result = train(net, data, loss, cfg);
    std::cout << "final loss: " << to_shortest(result.final_loss) << " after "
              << result.epochs << " epochs\n";
    if (net.head == OutputHead::Classification) {
        const double acc = classification_accuracy(result.net, data);
        std::cout << "accuracy: " << to_shortest(acc) << "\n";
    }
    if (!result.converged) {
        std::cerr << "error: training did not reach stop loss "
                  << to_shortest(cfg.stop_loss) << "\n";
        return 1;
    }
    save_model({result.net, {}}, o.out);
    std::cout << "model written to " << o.out << "\n";
    return 0;
}

struct InsertOpts {
    std::string model;
    std::size_t layer = 0;
    std::string kind = "single";
    std::string trigger_file;
    std::size_t trigger_index = 0;
    double sigma = 1e-4;
    double epsilon = 0.0;
    std::string payload;
    double vstar = 0.99;
    std::size_t target_label = 0;
    double alpha = 5.0;
    double tau = 1e-3;
    std::size_t max_iters = 10000;
    std::string trace_path;
    double magnitude = 0.0;  // 0 = derive from the trigger pool
    std::string out;
};

int cmd_insert(const InsertOpts& o)
{
    ModelFile file = load_model(o.model);
    const Network& host = file.net;

    const std::vector<Vec> triggers = load_vectors(o.trigger_file);
    if (o.trigger_index >= triggers.size())
        throw std::invalid_argument("--trigger-index " + std::to_string(o.trigger_index) +
                                    " out of range; " + o.trigger_file + " has " +
                                    std::to_string(triggers.size()) + " rows");
    const Vec& trigger = triggers[o.trigger_index];

    const Vec weights = default_trigger_weights(host, o.layer);
    TriggerDesign design;
    if (o.kind == "single") {
        design = design_single_neuron(host, o.layer, trigger, weights, o.epsilon);
        const auto& r = std::get<SingleNeuronRule>(design.rule);
        std::cout << "theta_T = " << to_shortest(r.threshold)
                  << ", epsilon = " << to_shortest(r.epsilon) << "\n";
    } else {
        design = design_multi_neuron(host, o.layer, trigger, weights, o.sigma);
        const auto& r = std::get<MultiNeuronRule>(design.rule);
        std::cout << "theta_Tri1 = " << to_shortest(r.sum_at_trigger)
                  << ", theta_Tri2 = " << to_shortest(r.mirror_threshold)
                  << ", theta_T = " << to_shortest(r.combine_threshold)
                  << ", sigma = " << to_shortest(r.window) << "\n";
    }

    Vec payload;
    Vec correction;
    std::string label;
    const std::string& spec = o.payload;
    if (spec == "reverse") {
        PayloadGoal goal = host.head == OutputHead::Classification
                               ? PayloadGoal::classification(o.target_label, o.vstar)
                               : PayloadGoal::regression(o.vstar);
        ReverseConfig cfg;
        cfg.learning_rate = o.alpha;
        cfg.tolerance = o.tau;
        cfg.max_iters = o.max_iters;
        cfg.record_trace = !o.trace_path.empty();
        const ReversePayload rp = payload_without_access(host, design, trigger, goal, cfg);
        if (!o.trace_path.empty()) {
            std::string csv = "iteration,loss\n";
            for (std::size_t i = 0; i < rp.descent.trace.size(); ++i)
                csv += std::to_string(i) + "," + to_shortest(rp.descent.trace[i]) + "\n";
            write_file(o.trace_path, csv);
        }
        std::cout << (rp.descent.converged ? "converged" : "did not converge") << " after "
                  << rp.descent.iters << " iterations, loss "
                  << to_shortest(rp.descent.loss) << "\n";
        if (!rp.descent.converged) {
            std::cerr << "error: reverse-engineering did not reach tolerance "
                      << to_shortest(o.tau) << "\n";
            return 1;
        }
        payload = rp.payload;
        label = "reverse";
    } else if (spec.rfind("instance:", 0) == 0) {
        const std::vector<Vec> instances = load_vectors(spec.substr(9));
        InstancePayload ip = payload_with_access(host, design, trigger, instances.front());
        payload = std::move(ip.weights);
        correction = std::move(ip.correction);
        label = "instance";
    } else if (spec.rfind("dominance:", 0) == 0) {
        const std::size_t target = std::stoul(spec.substr(10));
        const double magnitude =
            o.magnitude > 0 ? o.magnitude : suggest_dominance_magnitude(host, triggers);
        payload = dominance_payload(host, o.layer, target, magnitude);
        std::cout << "magnitude = " << to_shortest(magnitude) << "\n";
        label = "dominance";
    } else if (spec.rfind("explicit:", 0) == 0) {
        payload = parse_values(spec.substr(9), "--payload");
        label = "explicit";
    } else {
        throw CLI::ValidationError(
            "--payload", "expected instance:PATH, reverse, dominance:LABEL or explicit:CSV");
    }
    std::cout << "xi = " << vec_to_string(payload) << "\n";

    file.trojans.push_back({design, payload, correction, label});
    const TrojanedNetwork trojaned(host, file.trojans);
    const CompositeResult on_trigger = trojaned.forward(trigger);
    if (host.head == OutputHead::Classification) {
        std::size_t argmax = 0;
        for (std::size_t i = 1; i < on_trigger.output.size(); ++i)
            if (on_trigger.output[i] > on_trigger.output[argmax]) argmax = i;
        std::cout << "trigger output: label " << argmax << " (confidence "
                  << to_shortest(on_trigger.output[argmax]) << ")\n";
    } else {
        std::cout << "trigger output: " << to_shortest(on_trigger.output.at(0)) << "\n";
    }

    save_model(file, o.out);
    std::cout << "trojaned model written to " << o.out << "\n";
    return 0;
}

struct EvalOpts {
    std::string preset;
    std::string model;
    std::string trigger_file;
    std::string pool_file;
    std::optional<std::uint64_t> seed;
    std::optional<double> sigma;
    std::optional<double> epsilon;
    bool probe_clean = false;
    bool reverse_payload = false;
    double vstar = 0.99;
    std::size_t target_label = 0;
    double alpha = 5.0;
    double tau = 1e-3;
    std::size_t max_iters = 10000;
    std::string report_dir;
    std::string config_hash;
};

void print_summary(const SweepResult& result)
{
    std::size_t fired = 0, accidents = 0, invariant_cells = 0, invariant_ok = 0;
    for (const CellReport& c : result.cells) {
        fired += c.fired ? 1 : 0;
        accidents += c.accident_fires;
        if (c.clean_invariant) {
            ++invariant_cells;
            invariant_ok += *c.clean_invariant ? 1 : 0;
        }
    }
    std::cout << "cells: " << result.cells.size() << ", fired on own trigger: " << fired
              << ", accidental fires: " << accidents << "\n";
    for (const RateCell& rc : triggering_rate(result))
        std::cout << "  " << rc.host << " " << to_string(rc.kind) << " trigger " << rc.trigger_id
                  << ": " << rc.ratio() << " layers fired\n";
    if (invariant_cells > 0)
        std::cout << "clean invariance: " << invariant_ok << "/" << invariant_cells
                  << " cells bit-identical over the pool\n";
}

int cmd_eval(const EvalOpts& o)
{
    SweepPlan plan;
    std::vector<SweepCell> cells;
    bool prebuilt = false;

    if (!o.preset.empty()) {
        if (!o.seed) {
            std::cerr << "error: --preset needs --seed\n";
            return 2;
        }
        plan = o.preset == "desk-sweep" ? desk_sweep_plan(*o.seed) : paper_toy_plan(*o.seed);
    } else {
        if (o.model.empty() || o.trigger_file.empty() || o.pool_file.empty()) {
            std::cerr << "error: need either --preset or --model with --trigger-file and "
                         "--pool-file\n";
            return 2;
        }
        const ModelFile file = load_model(o.model);
        if (file.trojans.empty())
            throw std::invalid_argument(o.model + " has no trojans to evaluate");
        plan.hosts.push_back({std::filesystem::path(o.model).stem().string(), file.net});
        plan.trigger_inputs = load_vectors(o.trigger_file);
        plan.nontrigger_inputs = load_vectors(o.pool_file);
        for (std::size_t i = 0; i < file.trojans.size(); ++i) {
            SweepCell cell;
            cell.host_index = 0;
            cell.layer = file.trojans[i].trigger.layer;
            cell.kind = file.trojans[i].trigger.kind();
            cell.trigger_id = std::min(i, plan.trigger_inputs.size() - 1);
            cell.design = file.trojans[i].trigger;
            cell.payload = file.trojans[i].payload;
            cells.push_back(std::move(cell));
        }
        prebuilt = true;
    }

    if (o.sigma) plan.window = *o.sigma;
    if (o.epsilon) plan.epsilon = *o.epsilon;
    plan.probe_clean = o.probe_clean;
    if (o.reverse_payload) {
        plan.payload_goal = plan.hosts.front().net.head == OutputHead::Classification
                                ? PayloadGoal::classification(o.target_label, o.vstar)
                                : PayloadGoal::regression(o.vstar);
        plan.reverse_config.learning_rate = o.alpha;
        plan.reverse_config.tolerance = o.tau;
        plan.reverse_config.max_iters = o.max_iters;
    }

    const SweepResult result = prebuilt ? evaluate_cells(plan, cells) : run_sweep(plan);

    std::filesystem::create_directories(o.report_dir);
    const std::filesystem::path dir(o.report_dir);
    ReportMeta meta;
    meta.seed = o.seed.value_or(0);
    meta.config_hash = o.config_hash;
    meta.engine_version = kEngineVersion;
    emit_report(result, meta, (dir / "report.csv").string(), (dir / "report.json").string(),
                (dir / "dcurve.csv").string());
    print_summary(result);
    std::cout << "reports written to " << dir.string() << "\n";
    return 0;
}

struct ReportOpts {
    std::string in;
    std::string report_dir;
};

int cmd_report(const ReportOpts& o)
{
    const auto [result, meta] = report_from_json(read_file(o.in));
    std::cout << "seed " << meta.seed << ", config " << meta.config_hash << ", engine "
              << meta.engine_version << "\n";
    print_summary(result);
    if (!o.report_dir.empty()) {
        std::filesystem::create_directories(o.report_dir);
        const std::filesystem::path dir(o.report_dir);
        emit_report(result, meta, (dir / "report.csv").string(),
                    (dir / "report.json").string(), (dir / "dcurve.csv").string());
        std::cout << "reports written to " << dir.string() << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Neuron-level trojan toolkit for dense feedforward networks"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Key=value config file; flags override");

    TrainOpts train_opts;
    CLI::App* train_cmd = app.add_subcommand("train", "Train a toy or dataset model");
    auto* toy_opt = train_cmd->add_option("--toy", train_opts.toy, "Builtin toy")
                        ->check(CLI::IsMember({"regression", "classification"}));
    auto* data_opt = train_cmd->add_option("--data", train_opts.data_path, "Dataset CSV")
                         ->check(CLI::ExistingFile)
                         ->excludes(toy_opt);
    toy_opt->excludes(data_opt);
    train_cmd->add_option("--widths", train_opts.widths, "Layer widths, e.g. 4,8,1")
        ->needs(data_opt);
    train_cmd->add_option("--label-count", train_opts.label_count,
                          "One-hot width for label datasets");
    train_cmd->add_option("--seed", train_opts.seed, "Weight init seed")->required();
    train_cmd->add_option("--lr", train_opts.lr, "Learning rate");
    train_cmd->add_option("--epochs", train_opts.epochs, "Epoch cap");
    train_cmd->add_option("--stop-loss", train_opts.stop_loss, "Early-stop mean loss");
    train_cmd->add_option("--decay-every", train_opts.decay_every, "Epochs between rate decays");
    train_cmd->add_option("--decay-factor", train_opts.decay_factor, "Rate decay multiplier");
    train_cmd->add_option("-o,--out", train_opts.out, "Output model path")->required();

    InsertOpts insert_opts;
    CLI::App* insert_cmd = app.add_subcommand("insert", "Design and insert a trojan");
    insert_cmd->add_option("--model", insert_opts.model, "Host model file")
        ->check(CLI::ExistingFile)
        ->required();
    insert_cmd->add_option("--layer", insert_opts.layer, "Insertion layer n")->required();
    insert_cmd->add_option("--kind", insert_opts.kind, "Trigger kind")
        ->check(CLI::IsMember({"single", "multi"}));
    insert_cmd->add_option("--trigger-file", insert_opts.trigger_file, "Trigger input CSV")
        ->check(CLI::ExistingFile)
        ->required();
    insert_cmd->add_option("--trigger-index", insert_opts.trigger_index, "Row to use");
    insert_cmd->add_option("--sigma", insert_opts.sigma, "Window width (multi)");
    insert_cmd->add_option("--epsilon", insert_opts.epsilon, "Match half-width (single)");
    insert_cmd
        ->add_option("--payload", insert_opts.payload,
                     "instance:PATH | reverse | dominance:LABEL | explicit:CSV")
        ->required();
    insert_cmd->add_option("--vstar", insert_opts.vstar, "Reverse target V*");
    insert_cmd->add_option("--target-label", insert_opts.target_label, "Reverse target label");
    insert_cmd->add_option("--alpha", insert_opts.alpha, "Reverse learning rate");
    insert_cmd->add_option("--tau", insert_opts.tau, "Reverse tolerance");
    insert_cmd->add_option("--max-iters", insert_opts.max_iters, "Reverse iteration cap");
    insert_cmd->add_option("--trace", insert_opts.trace_path, "Write descent trace CSV");
    insert_cmd->add_option("--magnitude", insert_opts.magnitude, "Dominance weight override");
    insert_cmd->add_option("-o,--out", insert_opts.out, "Output model path")->required();

    EvalOpts eval_opts;
    CLI::App* eval_cmd = app.add_subcommand("attack-eval", "Run a trigger/stealth sweep");
    eval_cmd->add_option("--preset", eval_opts.preset, "Built-in setup")
        ->check(CLI::IsMember({"desk-sweep", "paper-toy"}));
    eval_cmd->add_option("--model", eval_opts.model, "Trojaned model file")
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--trigger-file", eval_opts.trigger_file, "Trigger inputs CSV")
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--pool-file", eval_opts.pool_file, "Non-trigger pool CSV")
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--seed", eval_opts.seed, "Preset generation seed");
    eval_cmd->add_option("--sigma", eval_opts.sigma, "Window width override");
    eval_cmd->add_option("--epsilon", eval_opts.epsilon, "Match half-width override");
    eval_cmd->add_flag("--probe-clean", eval_opts.probe_clean,
                       "Check composite/host bit-identity over the pool");
    eval_cmd->add_flag("--reverse-payload", eval_opts.reverse_payload,
                       "Synthesize a reverse payload per cell and record confidence");
    eval_cmd->add_option("--vstar", eval_opts.vstar, "Reverse target V*");
    eval_cmd->add_option("--target-label", eval_opts.target_label, "Reverse target label");
    eval_cmd->add_option("--alpha", eval_opts.alpha, "Reverse learning rate");
    eval_cmd->add_option("--tau", eval_opts.tau, "Reverse tolerance");
    eval_cmd->add_option("--max-iters", eval_opts.max_iters, "Reverse iteration cap");
    eval_cmd->add_option("--report-dir", eval_opts.report_dir, "Output directory")->required();

    ReportOpts report_opts;
    CLI::App* report_cmd = app.add_subcommand("report", "Summarize or re-emit a JSON report");
    report_cmd->add_option("--in", report_opts.in, "report.json path")
        ->check(CLI::ExistingFile)
        ->required();
    report_cmd->add_option("--report-dir", report_opts.report_dir, "Re-emit directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    std::string canonical;
    for (int i = 1; i < argc; ++i) canonical += std::string(argv[i]) + "\n";
    eval_opts.config_hash = fnv1a_hex(canonical);

    try {
        if (train_cmd->parsed()) {
            if (train_opts.toy.empty() == train_opts.data_path.empty()) {
                std::cerr << "error: train needs exactly one of --toy or --data\n";
                return 2;
            }
            if (!train_opts.data_path.empty() && train_opts.widths.empty()) {
                std::cerr << "error: --data needs --widths\n";
                return 2;
            }
            return cmd_train(train_opts);
        }
        if (insert_cmd->parsed()) return cmd_insert(insert_opts);
        if (eval_cmd->parsed()) return cmd_eval(eval_opts);
        if (report_cmd->parsed()) return cmd_report(report_opts);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
