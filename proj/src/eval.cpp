#include "ntk/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <stdexcept>
#include <tuple>

#include "json.hpp"

namespace ntk {

namespace {

// Report numbers carry 9 significant digits; parsing the formatted string
// back gives the double whose shortest form the JSON writer will print.
std::string fmt9(double x)
{
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", x);
    return buf;
}

double round9(double x) { return std::strtod(fmt9(x).c_str(), nullptr); }

void check_pool_member(const SweepPlan& plan, const Vec& v, const char* what)
{
    ensure_finite(v, what);
    for (const SweepPlan::Host& h : plan.hosts)
        if (v.size() != h.net.in_dim())
            throw std::invalid_argument(std::string(what) + ": size " + std::to_string(v.size()) +
                                        " does not match host '" + h.name + "' input width " +
                                        std::to_string(h.net.in_dim()));
}

std::vector<std::size_t> eligible_layers(const SweepPlan& plan, const Network& net)
{
    if (!plan.insertion_layers.empty()) return plan.insertion_layers;
    std::vector<std::size_t> layers;
    for (std::size_t k = 1; k < net.depth(); ++k) layers.push_back(k);
    return layers;
}

}  // namespace

void SweepPlan::validate() const
{
    if (hosts.empty()) throw std::invalid_argument("sweep: no hosts");
    for (const Host& h : hosts) {
        if (h.name.empty()) throw std::invalid_argument("sweep: every host needs a name");
        h.net.validate();
        if (h.net.depth() < 2)
            throw std::invalid_argument("sweep: host '" + h.name +
                                        "' has no eligible insertion layer");
    }
    if (trigger_inputs.empty()) throw std::invalid_argument("sweep: no trigger inputs");
    if (nontrigger_inputs.empty()) throw std::invalid_argument("sweep: no non-trigger inputs");
    for (const Vec& t : trigger_inputs) check_pool_member(*this, t, "trigger input");
    for (const Vec& p : nontrigger_inputs) check_pool_member(*this, p, "non-trigger input");
    for (std::size_t i = 0; i < trigger_inputs.size(); ++i)
        for (std::size_t j = 0; j < nontrigger_inputs.size(); ++j)
            if (trigger_inputs[i] == nontrigger_inputs[j])
                throw std::invalid_argument("sweep: trigger input " + std::to_string(i) +
                                            " also appears in the non-trigger pool (entry " +
                                            std::to_string(j) + "); pools must be disjoint");
    if (!single_neuron && !multi_neuron)
        throw std::invalid_argument("sweep: at least one trojan kind must be enabled");
    if (multi_neuron && !(window > 0.0)) throw std::invalid_argument("sweep: window must be > 0");
    if (single_neuron && epsilon < 0.0) throw std::invalid_argument("sweep: epsilon must be >= 0");
    for (std::size_t layer : insertion_layers)
        for (const Host& h : hosts)
            if (layer < 1 || layer >= h.net.depth())
                throw std::invalid_argument("sweep: layer " + std::to_string(layer) +
                                            " is not eligible for host '" + h.name + "'");
    if (payload_goal) {
        reverse_config.validate();
        for (const Host& h : hosts) {
            if (payload_goal->mode == PayloadGoal::Mode::Classification) {
                if (h.net.head != OutputHead::Classification)
                    throw std::invalid_argument("sweep: label goal needs classification host '" +
                                                h.name + "'");
                if (payload_goal->target_label >= h.net.out_dim())
                    throw std::invalid_argument("sweep: goal label out of range for host '" +
                                                h.name + "'");
            } else if (h.net.head != OutputHead::Regression || h.net.out_dim() != 1) {
                throw std::invalid_argument("sweep: value goal needs regression host '" + h.name +
                                            "'");
            }
        }
    }
}

std::vector<SweepCell> plan_cells(const SweepPlan& plan)
{
    plan.validate();
    std::vector<SweepCell> cells;
    for (std::size_t h = 0; h < plan.hosts.size(); ++h) {
        const Network& net = plan.hosts[h].net;
        for (std::size_t layer : eligible_layers(plan, net)) {
            const Vec weights = default_trigger_weights(net, layer);
            for (int kind = 0; kind < 2; ++kind) {
                if (kind == 0 && !plan.single_neuron) continue;
                if (kind == 1 && !plan.multi_neuron) continue;
                for (std::size_t t = 0; t < plan.trigger_inputs.size(); ++t) {
                    SweepCell cell;
                    cell.host_index = h;
                    cell.layer = layer;
                    cell.trigger_id = t;
                    if (kind == 0) {
                        cell.kind = TriggerKind::SingleNeuron;
                        cell.design = design_single_neuron(net, layer, plan.trigger_inputs[t],
                                                           weights, plan.epsilon);
                    } else {
                        cell.kind = TriggerKind::MultiNeuron;
                        cell.design = design_multi_neuron(net, layer, plan.trigger_inputs[t],
                                                          weights, plan.window);
                    }
                    cells.push_back(std::move(cell));
                }
            }
        }
    }
    return cells;
}

SweepResult evaluate_cells(const SweepPlan& plan, const std::vector<SweepCell>& cells)
{
    plan.validate();

    struct HostCache {
        std::vector<Snapshot> trigger_snaps;
        std::vector<Snapshot> pool_snaps;
    };
    std::vector<std::optional<HostCache>> caches(plan.hosts.size());
    auto cache_for = [&](std::size_t h) -> const HostCache& {
        if (!caches[h]) {
            HostCache c;
            c.trigger_snaps.reserve(plan.trigger_inputs.size());
            for (const Vec& t : plan.trigger_inputs)
                c.trigger_snaps.push_back(forward(plan.hosts[h].net, t).snapshot);
            c.pool_snaps.reserve(plan.nontrigger_inputs.size());
            for (const Vec& p : plan.nontrigger_inputs)
                c.pool_snaps.push_back(forward(plan.hosts[h].net, p).snapshot);
            caches[h] = std::move(c);
        }
        return *caches[h];
    };

    SweepResult res;
    res.cells.reserve(cells.size());
    for (const SweepCell& cell : cells) {
        if (cell.host_index >= plan.hosts.size())
            throw std::invalid_argument("sweep cell references host " +
                                        std::to_string(cell.host_index) + " of " +
                                        std::to_string(plan.hosts.size()));
        if (cell.trigger_id >= plan.trigger_inputs.size())
            throw std::invalid_argument("sweep cell references trigger " +
                                        std::to_string(cell.trigger_id) + " of " +
                                        std::to_string(plan.trigger_inputs.size()));
        const Network& net = plan.hosts[cell.host_index].net;
        const HostCache& cache = cache_for(cell.host_index);
        const Vec& eta_star = cache.trigger_snaps[cell.trigger_id].activations[cell.layer - 1];

        CellReport r;
        r.host = plan.hosts[cell.host_index].name;
        r.layer = cell.layer;
        r.kind = cell.kind;
        r.trigger_id = cell.trigger_id;
        r.fired = fires(cell.design, eta_star) == 1;
        r.pool_size = plan.nontrigger_inputs.size();

        double sum = 0.0;
        for (const Snapshot& snap : cache.pool_snaps) {
            const Vec& eta = snap.activations[cell.layer - 1];
            r.accident_fires += static_cast<std::size_t>(fires(cell.design, eta));
            sum += euclidean_distance(eta_star, eta);
        }
        r.distance = sum / (static_cast<double>(r.pool_size) *
                            static_cast<double>(eta_star.size()));

        Vec payload = cell.payload;
        if (plan.payload_goal && r.fired) {
            if (payload.empty())
                payload = payload_without_access(net, cell.design,
                                                 plan.trigger_inputs[cell.trigger_id],
                                                 *plan.payload_goal, plan.reverse_config)
                              .payload;
            const TrojanedNetwork tn(net, TrojanSpec{cell.design, payload, {}, ""});
            const CompositeResult cr = tn.forward(plan.trigger_inputs[cell.trigger_id]);
            r.target_confidence =
                predicted_scalar(net, cr.output, plan.payload_goal->scalar_target());
        }
        if (plan.probe_clean) {
            // Without a designed payload, probe with a non-uniform ramp: a zero
            // payload would hide any fire, and a uniform one is invisible when
            // it feeds the output layer (softmax ignores a constant shift).
            if (payload.empty()) {
                payload.resize(net.width(cell.layer + 1));
                for (std::size_t j = 0; j < payload.size(); ++j)
                    payload[j] = 1.0 + static_cast<double>(j);
            }
            const TrojanedNetwork tn(net, TrojanSpec{cell.design, payload, {}, ""});
            r.divergent_probe = first_divergent_probe(net, tn, plan.nontrigger_inputs);
            r.clean_invariant = !r.divergent_probe.has_value();
            if (r.clean_invariant.value()) r.divergent_probe.reset();
        }
        res.cells.push_back(std::move(r));
    }
    return res;
}

SweepResult run_sweep(const SweepPlan& plan) { return evaluate_cells(plan, plan_cells(plan)); }

std::string RateCell::ratio() const
{
    return std::to_string(fired_layers) + "/" + std::to_string(total_layers);
}

std::vector<RateCell> triggering_rate(const SweepResult& result)
{
    std::map<std::tuple<std::string, int, std::size_t>, RateCell> acc;
    for (const CellReport& c : result.cells) {
        RateCell& rc = acc[{c.host, static_cast<int>(c.kind), c.trigger_id}];
        if (rc.total_layers == 0) {
            rc.host = c.host;
            rc.kind = c.kind;
            rc.trigger_id = c.trigger_id;
        }
        rc.total_layers += 1;
        rc.fired_layers += c.fired ? 1 : 0;
    }
    std::vector<RateCell> rates;
    rates.reserve(acc.size());
    for (auto& [key, rc] : acc) rates.push_back(std::move(rc));
    return rates;
}

std::string accident_ratio(const CellReport& cell)
{
    return std::to_string(cell.accident_fires) + "/" + std::to_string(cell.pool_size);
}

double average_euclidean_distance(const Vec& reference, const std::vector<Vec>& pool)
{
    if (pool.empty()) throw std::invalid_argument("distance: empty pool");
    if (reference.empty()) throw std::invalid_argument("distance: empty reference");
    double sum = 0.0;
    for (const Vec& v : pool) {
        if (v.size() != reference.size())
            throw std::invalid_argument("distance: pool member size " + std::to_string(v.size()) +
                                        " does not match reference size " +
                                        std::to_string(reference.size()));
        sum += euclidean_distance(reference, v);
    }
    return sum / (static_cast<double>(pool.size()) * static_cast<double>(reference.size()));
}

double distance_metric(const Network& host,
                       std::size_t layer,
                       const Vec& trigger_input,
                       const std::vector<Vec>& nontrigger_pool,
                       const Vec& trigger_weights)
{
    if (layer < 1 || layer >= host.depth())
        throw std::invalid_argument("layer " + std::to_string(layer) +
                                    ": not an eligible insertion layer");
    if (trigger_weights.size() != host.width(layer - 1))
        throw std::invalid_argument("trigger weights: " + std::to_string(trigger_weights.size()) +
                                    " values do not match layer " + std::to_string(layer - 1) +
                                    " width " + std::to_string(host.width(layer - 1)));
    ensure_finite(trigger_weights, "trigger weights");

    const ForwardResult fr = forward(host, trigger_input);
    std::vector<Vec> etas;
    etas.reserve(nontrigger_pool.size());
    for (const Vec& p : nontrigger_pool)
        etas.push_back(forward(host, p).snapshot.activations[layer - 1]);
    return average_euclidean_distance(fr.snapshot.activations[layer - 1], etas);
}

std::optional<std::size_t> first_divergent_probe(const Network& host,
                                                 const TrojanedNetwork& trojaned,
                                                 const std::vector<Vec>& probe_pool)
{
    for (std::size_t i = 0; i < probe_pool.size(); ++i) {
        const Vec clean = forward(host, probe_pool[i]).output;
        const Vec composite = trojaned.forward(probe_pool[i]).output;
        if (clean != composite) return i;
    }
    return std::nullopt;
}

bool clean_invariance(const Network& host,
                      const TrojanedNetwork& trojaned,
                      const std::vector<Vec>& probe_pool)
{
    return !first_divergent_probe(host, trojaned, probe_pool).has_value();
}

const char* to_string(TriggerKind kind)
{
    return kind == TriggerKind::SingleNeuron ? "single" : "multi";
}

std::string report_csv(const SweepResult& result)
{
    std::string out =
        "host,layer,kind,trigger_id,fired,accident_fires,pool_size,D,clean_invariant,"
        "target_confidence\n";
    for (const CellReport& c : result.cells) {
        out += c.host;
        out += ',' + std::to_string(c.layer);
        out += ',';
        out += to_string(c.kind);
        out += ',' + std::to_string(c.trigger_id);
        out += ',';
        out += c.fired ? '1' : '0';
        out += ',' + std::to_string(c.accident_fires);
        out += ',' + std::to_string(c.pool_size);
        out += ',' + fmt9(c.distance);
        out += ',';
        if (c.clean_invariant) out += *c.clean_invariant ? '1' : '0';
        out += ',';
        if (c.target_confidence) out += fmt9(*c.target_confidence);
        out += '\n';
    }
    return out;
}

namespace {

void write_text(const std::string& path, const std::string& text)
{
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << text;
    if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace

void emit_report(const SweepResult& result,
                 const ReportMeta& meta,
                 const std::string& csv_path,
                 const std::string& json_path,
                 const std::string& curve_path)
{
    write_text(csv_path, report_csv(result));

    nlohmann::ordered_json j;
    j["meta"] = {{"seed", meta.seed},
                 {"config_hash", meta.config_hash},
                 {"engine_version", meta.engine_version}};
    j["cells"] = nlohmann::ordered_json::array();
    for (const CellReport& c : result.cells) {
        nlohmann::ordered_json jc;
        jc["host"] = c.host;
        jc["layer"] = c.layer;
        jc["kind"] = to_string(c.kind);
        jc["trigger_id"] = c.trigger_id;
        jc["fired"] = c.fired;
        jc["accident_fires"] = c.accident_fires;
        jc["pool_size"] = c.pool_size;
        jc["accident_ratio"] = accident_ratio(c);
        jc["accident_rate"] =
            round9(c.pool_size == 0 ? 0.0
                                    : static_cast<double>(c.accident_fires) /
                                          static_cast<double>(c.pool_size));
        jc["D"] = round9(c.distance);
        if (c.clean_invariant) jc["clean_invariant"] = *c.clean_invariant;
        if (c.divergent_probe) jc["divergent_probe"] = *c.divergent_probe;
        if (c.target_confidence) jc["target_confidence"] = round9(*c.target_confidence);
        j["cells"].push_back(std::move(jc));
    }
    j["triggering_rates"] = nlohmann::ordered_json::array();
    for (const RateCell& rc : triggering_rate(result)) {
        j["triggering_rates"].push_back({{"host", rc.host},
                                         {"kind", to_string(rc.kind)},
                                         {"trigger_id", rc.trigger_id},
                                         {"ratio", rc.ratio()},
                                         {"rate", round9(rc.value())}});
    }
    write_text(json_path, j.dump(2) + "\n");

    if (!curve_path.empty()) {
        // Mean D per (host, layer), deduplicated over kinds: D depends only on
        // the trigger input, so single/multi rows at one position are equal.
        std::map<std::pair<std::string, std::size_t>, std::map<std::size_t, double>> curve;
        for (const CellReport& c : result.cells) curve[{c.host, c.layer}][c.trigger_id] = c.distance;
        std::string text = "host,layer,D\n";
        for (const auto& [key, by_trigger] : curve) {
            double sum = 0.0;
            for (const auto& [t, d] : by_trigger) sum += d;
            text += key.first + ',' + std::to_string(key.second) + ',' +
                    fmt9(sum / static_cast<double>(by_trigger.size())) + '\n';
        }
        write_text(curve_path, text);
    }
}

std::pair<SweepResult, ReportMeta> report_from_json(const std::string& text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("report file: parse error at byte " + std::to_string(e.byte) +
                                 ": " + e.what());
    }
    try {
        ReportMeta meta;
        meta.seed = j.at("meta").at("seed").get<std::uint64_t>();
        meta.config_hash = j.at("meta").at("config_hash").get<std::string>();
        meta.engine_version = j.at("meta").at("engine_version").get<std::string>();

        SweepResult res;
        for (const auto& jc : j.at("cells")) {
            CellReport c;
            c.host = jc.at("host").get<std::string>();
            c.layer = jc.at("layer").get<std::size_t>();
            const std::string kind = jc.at("kind").get<std::string>();
            if (kind != "single" && kind != "multi")
                throw std::invalid_argument("report file: unknown kind \"" + kind + "\"");
            c.kind = kind == "single" ? TriggerKind::SingleNeuron : TriggerKind::MultiNeuron;
            c.trigger_id = jc.at("trigger_id").get<std::size_t>();
            c.fired = jc.at("fired").get<bool>();
            c.accident_fires = jc.at("accident_fires").get<std::size_t>();
            c.pool_size = jc.at("pool_size").get<std::size_t>();
            c.distance = jc.at("D").get<double>();
            if (jc.contains("clean_invariant")) c.clean_invariant = jc["clean_invariant"].get<bool>();
            if (jc.contains("divergent_probe"))
                c.divergent_probe = jc["divergent_probe"].get<std::size_t>();
            if (jc.contains("target_confidence"))
                c.target_confidence = jc["target_confidence"].get<double>();
            res.cells.push_back(std::move(c));
        }
        return {std::move(res), std::move(meta)};
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("report file: ") + e.what());
    }
}

}  // namespace ntk
