#include "ntk/model_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace ntk {

using nlohmann::ordered_json;

namespace {

constexpr int kModelVersion = 1;

ordered_json activation_to_json(const Activation& a)
{
    switch (a.kind) {
        case Act::Sigmoid: return "sigmoid";
        case Act::Identity: return "identity";
        case Act::BinaryStep: return {{"kind", "binary_step"}, {"threshold", a.threshold}};
        case Act::Pulse:
            return {{"kind", "pulse"}, {"threshold", a.threshold}, {"epsilon", a.epsilon}};
    }
    throw std::logic_error("unknown activation kind");
}

Activation activation_from_json(const nlohmann::json& j)
{
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s == "sigmoid") return Activation::sigmoid();
        if (s == "identity") return Activation::identity();
        throw std::invalid_argument("model file: unknown activation \"" + s + "\"");
    }
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "binary_step") return Activation::binary_step(j.at("threshold").get<double>());
    if (kind == "pulse")
        return Activation::pulse(j.at("threshold").get<double>(), j.at("epsilon").get<double>());
    throw std::invalid_argument("model file: unknown activation kind \"" + kind + "\"");
}

ordered_json layer_activations_to_json(const DenseLayer& layer)
{
    bool uniform = true;
    for (const Activation& a : layer.activations)
        if (!(a == layer.activations.front())) uniform = false;
    if (uniform && !layer.activations.empty() &&
        (layer.activations.front().kind == Act::Sigmoid ||
         layer.activations.front().kind == Act::Identity))
        return activation_to_json(layer.activations.front());
    ordered_json arr = ordered_json::array();
    for (const Activation& a : layer.activations) arr.push_back(activation_to_json(a));
    return arr;
}

ordered_json trojan_to_json(const TrojanSpec& spec)
{
    ordered_json j;
    j["insertion_layer"] = spec.trigger.layer;
    if (const auto* s = std::get_if<SingleNeuronRule>(&spec.trigger.rule)) {
        j["kind"] = "single";
        j["trigger_weights"] = spec.trigger.weights;
        j["thresholds"] = {{"theta_T", s->threshold}};
        j["epsilon"] = s->epsilon;
    } else {
        const auto& m = std::get<MultiNeuronRule>(spec.trigger.rule);
        j["kind"] = "multi";
        j["trigger_weights"] = spec.trigger.weights;
        j["thresholds"] = {{"theta_Tri1", m.sum_at_trigger},
                           {"theta_Tri2", m.mirror_threshold},
                           {"theta_T", m.combine_threshold}};
        j["sigma"] = m.window;
        j["omega_Tri1"] = m.weight_a;
        j["omega_Tri2"] = m.weight_b;
    }
    j["payload_weights"] = spec.payload;
    if (!spec.payload_correction.empty()) j["payload_correction"] = spec.payload_correction;
    if (!spec.label.empty()) j["label"] = spec.label;
    return j;
}

TrojanSpec trojan_from_json(const nlohmann::json& j)
{
    TrojanSpec spec;
    spec.trigger.layer = j.at("insertion_layer").get<std::size_t>();
    spec.trigger.weights = j.at("trigger_weights").get<Vec>();
    const std::string kind = j.at("kind").get<std::string>();
    const auto& th = j.at("thresholds");
    if (kind == "single") {
        SingleNeuronRule r;
        r.threshold = th.at("theta_T").get<double>();
        r.epsilon = j.value("epsilon", 0.0);
        spec.trigger.rule = r;
    } else if (kind == "multi") {
        MultiNeuronRule r;
        r.sum_at_trigger = th.at("theta_Tri1").get<double>();
        r.mirror_threshold = th.at("theta_Tri2").get<double>();
        r.combine_threshold = th.at("theta_T").get<double>();
        r.window = j.at("sigma").get<double>();
        r.weight_a = j.value("omega_Tri1", 1.0);
        r.weight_b = j.value("omega_Tri2", 1.0);
        spec.trigger.rule = r;
    } else {
        throw std::invalid_argument("model file: unknown trojan kind \"" + kind + "\"");
    }
    spec.payload = j.at("payload_weights").get<Vec>();
    if (j.contains("payload_correction"))
        spec.payload_correction = j.at("payload_correction").get<Vec>();
    spec.label = j.value("label", std::string{});
    spec.trigger.validate();
    return spec;
}

}  // namespace

std::string to_json(const ModelFile& model)
{
    ordered_json j;
    j["version"] = kModelVersion;
    j["output_head"] =
        model.net.head == OutputHead::Classification ? "classification" : "regression";
    j["layers"] = ordered_json::array();
    for (const DenseLayer& layer : model.net.layers) {
        ordered_json jl;
        jl["in_dim"] = layer.in_dim;
        jl["out_dim"] = layer.out_dim;
        jl["activation"] = layer_activations_to_json(layer);
        jl["weights"] = layer.weights;
        jl["biases"] = layer.biases;
        j["layers"].push_back(std::move(jl));
    }
    if (!model.trojans.empty()) {
        j["trojans"] = ordered_json::array();
        for (const TrojanSpec& spec : model.trojans) j["trojans"].push_back(trojan_to_json(spec));
    }
    return j.dump(2) + "\n";
}

ModelFile model_from_json(const std::string& text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("model file: parse error at byte " + std::to_string(e.byte) +
                                 ": " + e.what());
    }

    try {
        const int version = j.at("version").get<int>();
        if (version != kModelVersion)
            throw std::invalid_argument("model file: unsupported version " +
                                        std::to_string(version));

        ModelFile model;
        const std::string head = j.at("output_head").get<std::string>();
        if (head == "classification")
            model.net.head = OutputHead::Classification;
        else if (head == "regression")
            model.net.head = OutputHead::Regression;
        else
            throw std::invalid_argument("model file: unknown output_head \"" + head + "\"");

        for (const auto& jl : j.at("layers")) {
            DenseLayer layer;
            layer.in_dim = jl.at("in_dim").get<std::size_t>();
            layer.out_dim = jl.at("out_dim").get<std::size_t>();
            layer.weights = jl.at("weights").get<std::vector<double>>();
            layer.biases = jl.at("biases").get<Vec>();
            const auto& ja = jl.at("activation");
            if (ja.is_array()) {
                for (const auto& a : ja) layer.activations.push_back(activation_from_json(a));
            } else {
                layer.activations.assign(layer.out_dim, activation_from_json(ja));
            }
            if (layer.activations.size() != layer.out_dim)
                throw std::invalid_argument(
                    "model file: layer activation list length " +
                    std::to_string(layer.activations.size()) + " does not match out_dim " +
                    std::to_string(layer.out_dim));
            model.net.layers.push_back(std::move(layer));
        }
        model.net.validate();

        if (j.contains("trojans"))
            for (const auto& jt : j.at("trojans")) model.trojans.push_back(trojan_from_json(jt));
        if (!model.trojans.empty())
            TrojanedNetwork(model.net, model.trojans);  // full consistency check
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("model file: ") + e.what());
    }
}

void save_model(const ModelFile& model, const std::string& path)
{
    write_file(path, to_json(model));
}

ModelFile load_model(const std::string& path) { return model_from_json(read_file(path)); }

namespace {

std::vector<std::string> split(const std::string& line, char sep)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

std::string trim(const std::string& s)
{
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_number(const std::string& cell, std::size_t line_no, std::size_t col)
{
    const std::string t = trim(cell);
    const char* begin = t.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end != begin + t.size() || t.empty() || !std::isfinite(v))
        throw std::invalid_argument("csv line " + std::to_string(line_no) + ", column " +
                                    std::to_string(col + 1) + ": bad number \"" + cell + "\"");
    return v;
}

std::vector<std::string> nonempty_lines(const std::string& text)
{
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!trim(line).empty()) lines.push_back(line);
    }
    return lines;
}

}  // namespace

std::string dataset_to_csv(const DatasetFile& file)
{
    if (file.data.inputs.empty()) throw std::invalid_argument("dataset: no samples");
    const std::size_t d = file.data.inputs.front().size();
    std::string out;
    for (std::size_t i = 0; i < d; ++i) out += "x" + std::to_string(i) + ",";
    out += file.classification ? "label\n" : "target\n";
    for (std::size_t s = 0; s < file.data.inputs.size(); ++s) {
        for (double x : file.data.inputs[s]) out += to_shortest(x) + ",";
        const Vec& t = file.data.targets[s];
        if (file.classification) {
            std::size_t label = 0;
            for (std::size_t i = 0; i < t.size(); ++i)
                if (t[i] > t[label]) label = i;
            out += std::to_string(label);
        } else {
            out += to_shortest(t.at(0));
        }
        out += '\n';
    }
    return out;
}

DatasetFile dataset_from_csv(const std::string& text, std::size_t label_count)
{
    const std::vector<std::string> lines = nonempty_lines(text);
    if (lines.empty()) throw std::invalid_argument("csv: empty file");
    const std::vector<std::string> header = split(lines[0], ',');
    if (header.size() < 2) throw std::invalid_argument("csv: header needs x columns and a target");
    const std::string last = trim(header.back());

    DatasetFile file;
    if (last == "label")
        file.classification = true;
    else if (last == "target")
        file.classification = false;
    else
        throw std::invalid_argument("csv: last header column must be \"target\" or \"label\", got \"" +
                                    last + "\"");
    const std::size_t d = header.size() - 1;

    std::vector<double> raw_targets;
    for (std::size_t ln = 1; ln < lines.size(); ++ln) {
        const std::vector<std::string> cells = split(lines[ln], ',');
        if (cells.size() != header.size())
            throw std::invalid_argument("csv line " + std::to_string(ln + 1) + ": expected " +
                                        std::to_string(header.size()) + " columns, got " +
                                        std::to_string(cells.size()));
        Vec x(d);
        for (std::size_t i = 0; i < d; ++i) x[i] = parse_number(cells[i], ln + 1, i);
        file.data.inputs.push_back(std::move(x));
        raw_targets.push_back(parse_number(cells[d], ln + 1, d));
    }
    if (file.data.inputs.empty()) throw std::invalid_argument("csv: no data rows");

    if (!file.classification) {
        for (double t : raw_targets) file.data.targets.push_back({t});
        return file;
    }

    std::size_t max_label = 0;
    for (std::size_t s = 0; s < raw_targets.size(); ++s) {
        const double t = raw_targets[s];
        if (t < 0 || t != std::floor(t))
            throw std::invalid_argument("csv line " + std::to_string(s + 2) +
                                        ": label must be a non-negative integer");
        max_label = std::max(max_label, static_cast<std::size_t>(t));
    }
    const std::size_t width = label_count != 0 ? label_count : max_label + 1;
    if (max_label >= width)
        throw std::invalid_argument("csv: label " + std::to_string(max_label) +
                                    " out of range for " + std::to_string(width) + " classes");
    for (double t : raw_targets) {
        Vec one_hot(width, 0.0);
        one_hot[static_cast<std::size_t>(t)] = 1.0;
        file.data.targets.push_back(std::move(one_hot));
    }
    return file;
}

void save_dataset(const DatasetFile& file, const std::string& path)
{
    write_file(path, dataset_to_csv(file));
}

DatasetFile load_dataset(const std::string& path, std::size_t label_count)
{
    return dataset_from_csv(read_file(path), label_count);
}

std::vector<Vec> vectors_from_csv(const std::string& text)
{
    std::vector<Vec> out;
    for (std::size_t ln = 0; const std::string& line : nonempty_lines(text)) {
        const std::vector<std::string> cells = split(line, ',');
        Vec v(cells.size());
        for (std::size_t i = 0; i < cells.size(); ++i) v[i] = parse_number(cells[i], ln + 1, i);
        if (!out.empty() && v.size() != out.front().size())
            throw std::invalid_argument("csv line " + std::to_string(ln + 1) + ": expected " +
                                        std::to_string(out.front().size()) + " values, got " +
                                        std::to_string(v.size()));
        out.push_back(std::move(v));
        ++ln;
    }
    if (out.empty()) throw std::invalid_argument("csv: no vectors");
    return out;
}

std::vector<Vec> load_vectors(const std::string& path)
{
    return vectors_from_csv(read_file(path));
}

void save_vectors(const std::vector<Vec>& vecs, const std::string& path)
{
    std::string out;
    for (const Vec& v : vecs) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i != 0) out += ',';
            out += to_shortest(v[i]);
        }
        out += '\n';
    }
    write_file(path, out);
}

std::string read_file(const std::string& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    if (!f && !f.eof()) throw std::runtime_error("read failed: " + path);
    return ss.str();
}

void write_file(const std::string& path, const std::string& text)
{
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << text;
    f.flush();
    if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace ntk
