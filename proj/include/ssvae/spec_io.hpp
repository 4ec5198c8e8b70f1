#pragma once

#include <cstdint>
#include <string>

#include "ssvae/model.hpp"

namespace ssvae {

/// A model spec file resolved into a live instance plus its seed field.
struct LoadedSpec {
  ModelInstance instance;
  std::uint64_t seed;
};

/// Parse and validate a JSON model spec. See docs in the repository README
/// for the schema. Validation failures raise ValidationError with the JSON
/// path (and row label where applicable) of the offending entry.
LoadedSpec load_model_spec(const std::string& path);
LoadedSpec parse_model_spec(const std::string& json_text);

/// Serialize an instance back to the spec format, always in explicit form
/// (realized data table, encoder logits or deterministic maps, explicit
/// prior parameters). load(save(load(f))) is value-identical to load(f).
std::string model_spec_to_json(const ModelInstance& inst, std::uint64_t seed);
void save_model_spec(const ModelInstance& inst, std::uint64_t seed,
                     const std::string& path);

}  // namespace ssvae
