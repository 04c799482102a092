#pragma once

#include <string>
#include <vector>

#include "ntk/train.hpp"
#include "ntk/trojan.hpp"

namespace ntk {

// Model files are JSON: {version, output_head, layers[{in_dim, out_dim,
// activation, weights, biases}], trojans[...]}. Weights are row-major;
// numbers round-trip bit-identically (shortest form that parses back).
struct ModelFile {
    Network net;
    std::vector<TrojanSpec> trojans;  // empty for clean models
};

std::string to_json(const ModelFile& model);
ModelFile model_from_json(const std::string& text);

void save_model(const ModelFile& model, const std::string& path);
ModelFile load_model(const std::string& path);

// Datasets are CSV with a header: x0..xd,target (regression) or x0..xd,label
// (classification; label is expanded to a one-hot over label_count, which
// defaults to max label + 1).
struct DatasetFile {
    Dataset data;
    bool classification = false;
};

std::string dataset_to_csv(const DatasetFile& file);
DatasetFile dataset_from_csv(const std::string& text, std::size_t label_count = 0);

void save_dataset(const DatasetFile& file, const std::string& path);
DatasetFile load_dataset(const std::string& path, std::size_t label_count = 0);

// One vector per CSV line; used for trigger inputs and pools.
std::vector<Vec> vectors_from_csv(const std::string& text);
std::vector<Vec> load_vectors(const std::string& path);
void save_vectors(const std::vector<Vec>& vecs, const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& text);

}  // namespace ntk
