#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "udkit/nn/params.hpp"

namespace udkit::nn {

// Model container: magic + format version + JSON header (component type,
// hyperparameters, vocabularies, array manifest with names and shapes)
// followed by the raw little-endian float64 arrays in manifest order.
struct ModelHeader {
  std::string type;
  nlohmann::json hparams;
  std::map<std::string, std::vector<std::string>> vocabs;
};

void save_model(const std::string& path, const ModelHeader& header,
                const ParamCollection& pc);

// Header alone, so the caller can rebuild the architecture first.
ModelHeader read_model_header(const std::string& path);

// Fills an already-constructed collection; the manifest must match the
// collection's names and shapes exactly, in order.
void load_model_values(const std::string& path, ParamCollection& pc);

}  // namespace udkit::nn
