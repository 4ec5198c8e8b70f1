#include "ssvae/spec_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "ssvae/rng.hpp"

namespace ssvae {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ValidationError("model spec: " + where + ": " + what);
}

const json& require_field(const json& obj, const std::string& key,
                          const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) fail(where, "missing field '" + key + "'");
  return *it;
}

std::vector<std::string> parse_labels(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) fail(where, "expected a non-empty array");
  std::vector<std::string> labels;
  labels.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_string()) fail(where, "labels must be strings");
    labels.push_back(v.get<std::string>());
  }
  return labels;
}

Matrix parse_matrix(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) {
    fail(where, "expected an array of rows");
  }
  const std::size_t rows = j.size();
  const std::size_t cols = j.front().size();
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto& row = j[i];
    if (!row.is_array() || row.size() != cols) {
      fail(where, "row " + std::to_string(i) + " has inconsistent width");
    }
    for (std::size_t k = 0; k < cols; ++k) {
      if (!row[k].is_number()) fail(where, "entries must be numbers");
      m.at(i, k) = row[k].get<double>();
    }
  }
  return m;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows; ++i) {
    json row = json::array();
    for (std::size_t k = 0; k < m.cols; ++k) row.push_back(m.at(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

JointDistribution parse_data(const json& j, const std::string& where) {
  if (j.contains("shared_factor")) {
    const json& sf = j["shared_factor"];
    const std::size_t s =
        require_field(sf, "s_count", where + ".shared_factor").get<std::size_t>();
    const std::size_t n = require_field(sf, "noise_count",
                                        where + ".shared_factor")
                              .get<std::size_t>();
    const double level = require_field(sf, "noise_level",
                                       where + ".shared_factor")
                             .get<double>();
    return shared_factor_data_joint(s, n, level);
  }
  FiniteSpace row_space(
      parse_labels(require_field(j, "row_labels", where), where + ".row_labels"));
  FiniteSpace col_space(
      parse_labels(require_field(j, "col_labels", where), where + ".col_labels"));
  Matrix probs = parse_matrix(require_field(j, "probs", where), where + ".probs");
  try {
    return JointDistribution(std::move(row_space), std::move(col_space),
                             std::move(probs));
  } catch (const ValidationError& e) {
    fail(where + ".probs", e.what());
  }
}

Encoder parse_encoder(const json& j, const FiniteSpace& given,
                      const FiniteSpace& target, SplitMix64& rng,
                      const std::string& where) {
  const std::string type =
      require_field(j, "type", where).get<std::string>();
  if (type == "softmax") {
    Matrix logits =
        parse_matrix(require_field(j, "logits", where), where + ".logits");
    if (logits.rows != given.size() || logits.cols != target.size()) {
      fail(where + ".logits", "shape does not match the spaces");
    }
    return Encoder::softmax(given, target, std::move(logits));
  }
  if (type == "deterministic") {
    const json& map = require_field(j, "map", where);
    if (!map.is_array() || map.size() != given.size()) {
      fail(where + ".map", "expected one target index per given-label");
    }
    std::vector<std::size_t> target_index;
    target_index.reserve(map.size());
    for (const auto& v : map) {
      if (!v.is_number_unsigned()) fail(where + ".map", "indices must be unsigned");
      target_index.push_back(v.get<std::size_t>());
    }
    try {
      return Encoder::deterministic(given, target, std::move(target_index));
    } catch (const ValidationError& e) {
      fail(where + ".map", e.what());
    }
  }
  if (type == "rows") {
    // Explicit row-stochastic probabilities; realized exactly via log-space
    // logits (softmax(log p) = p whenever a row sums to one).
    Matrix probs =
        parse_matrix(require_field(j, "probs", where), where + ".probs");
    if (probs.rows != given.size() || probs.cols != target.size()) {
      fail(where + ".probs", "shape does not match the spaces");
    }
    Matrix logits(probs.rows, probs.cols);
    for (std::size_t i = 0; i < probs.rows; ++i) {
      double total = 0.0;
      for (std::size_t k = 0; k < probs.cols; ++k) {
        const double p = probs.at(i, k);
        if (!(p > 0.0)) {
          fail(where + ".probs",
               "row " + std::to_string(i) + " ('" + given.label(i) +
                   "') has a non-positive entry; use type 'deterministic' "
                   "for exact zeros");
        }
        total += p;
      }
      if (std::abs(total - 1.0) > kNormalizationTol) {
        fail(where + ".probs",
             "row " + std::to_string(i) + " ('" + given.label(i) +
                 "') sums to " + std::to_string(total) +
                 ", expected 1 within 1e-12");
      }
      for (std::size_t k = 0; k < probs.cols; ++k) {
        logits.at(i, k) = std::log(probs.at(i, k));
      }
    }
    return Encoder::softmax(given, target, std::move(logits));
  }
  if (type == "seeded") {
    const double scale =
        j.contains("scale") ? j["scale"].get<double>() : 0.1;
    Matrix logits(given.size(), target.size());
    for (double& v : logits.data) v = scale * rng.next_symmetric();
    return Encoder::softmax(given, target, std::move(logits));
  }
  fail(where, "unknown encoder type '" + type + "'");
}

CouplingFunction parse_coupling(const json& j, const std::string& where) {
  const std::string type = require_field(j, "type", where).get<std::string>();
  if (type == "bilinear") {
    Matrix e = parse_matrix(require_field(j, "z_embeddings", where),
                            where + ".z_embeddings");
    Matrix ep = parse_matrix(require_field(j, "zp_embeddings", where),
                             where + ".zp_embeddings");
    Matrix w =
        parse_matrix(require_field(j, "weight", where), where + ".weight");
    try {
      return CouplingFunction::bilinear(std::move(e), std::move(ep),
                                        std::move(w));
    } catch (const ValidationError& e2) {
      fail(where, e2.what());
    }
  }
  if (type == "table") {
    Matrix values =
        parse_matrix(require_field(j, "values", where), where + ".values");
    try {
      return CouplingFunction::table(std::move(values));
    } catch (const ValidationError& e) {
      fail(where + ".values", e.what());
    }
  }
  fail(where, "unknown coupling type '" + type + "'");
}

PriorSpec parse_prior(const json& j, const std::string& where) {
  const std::string type = require_field(j, "type", where).get<std::string>();
  if (type == "mi") return PriorSpec::mutual_information();
  if (type == "explicit") {
    return PriorSpec::explicit_table(
        parse_matrix(require_field(j, "logits", where), where + ".logits"));
  }
  if (type == "infonce") {
    return PriorSpec::infonce(parse_coupling(
        require_field(j, "coupling", where), where + ".coupling"));
  }
  fail(where, "unknown prior type '" + type + "'");
}

}  // namespace

LoadedSpec parse_model_spec(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("model spec: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("model spec: expected an object");

  const std::uint64_t seed =
      j.contains("seed") ? j["seed"].get<std::uint64_t>() : 0;
  SplitMix64 rng(seed);

  JointDistribution data = parse_data(require_field(j, "data", "data"), "data");
  FiniteSpace z_space(parse_labels(
      require_field(j, "latent_z_labels", "latent_z_labels"), "latent_z_labels"));
  FiniteSpace zp_space(parse_labels(
      require_field(j, "latent_zp_labels", "latent_zp_labels"),
      "latent_zp_labels"));

  Encoder enc_c = parse_encoder(require_field(j, "encoder_c", "encoder_c"),
                                data.row_space(), z_space, rng, "encoder_c");
  Encoder enc_x = parse_encoder(require_field(j, "encoder_x", "encoder_x"),
                                data.col_space(), zp_space, rng, "encoder_x");
  PriorSpec prior = parse_prior(require_field(j, "prior", "prior"), "prior");

  try {
    return LoadedSpec{ModelInstance(std::move(data), std::move(enc_c),
                                    std::move(enc_x), std::move(prior)),
                      seed};
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("model spec: ") + e.what());
  }
}

LoadedSpec load_model_spec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ValidationError("model spec: cannot open '" + path + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model_spec(buf.str());
}

std::string model_spec_to_json(const ModelInstance& inst, std::uint64_t seed) {
  json j;
  j["seed"] = seed;
  j["data"] = {
      {"row_labels", inst.data_joint().row_space().labels()},
      {"col_labels", inst.data_joint().col_space().labels()},
      {"probs", matrix_to_json(inst.data_joint().table())},
  };
  j["latent_z_labels"] = inst.latent_space(Side::C).labels();
  j["latent_zp_labels"] = inst.latent_space(Side::X).labels();

  auto encoder_to_json = [](const Encoder& enc) {
    if (enc.is_deterministic()) {
      return json{{"type", "deterministic"}, {"map", enc.target_map()}};
    }
    return json{{"type", "softmax"}, {"logits", matrix_to_json(enc.logits())}};
  };
  j["encoder_c"] = encoder_to_json(inst.encoder_c());
  j["encoder_x"] = encoder_to_json(inst.encoder_x());

  switch (inst.prior().kind()) {
    case PriorSpec::Kind::MutualInformation:
      j["prior"] = {{"type", "mi"}};
      break;
    case PriorSpec::Kind::ExplicitTable:
      j["prior"] = {{"type", "explicit"},
                    {"logits", matrix_to_json(inst.prior().grid_logits())}};
      break;
    case PriorSpec::Kind::InfoNce: {
      const CouplingFunction& f = inst.prior().coupling();
      json coupling;
      if (f.kind() == CouplingFunction::Kind::Bilinear) {
        coupling = {{"type", "bilinear"},
                    {"z_embeddings", matrix_to_json(f.z_embeddings())},
                    {"zp_embeddings", matrix_to_json(f.zp_embeddings())},
                    {"weight", matrix_to_json(f.weight())}};
      } else {
        coupling = {{"type", "table"}, {"values", matrix_to_json(f.values())}};
      }
      j["prior"] = {{"type", "infonce"}, {"coupling", std::move(coupling)}};
      break;
    }
  }
  return j.dump(2) + "\n";
}

void save_model_spec(const ModelInstance& inst, std::uint64_t seed,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error("cannot open '" + path + "' for writing");
  }
  out << model_spec_to_json(inst, seed);
}

}  // namespace ssvae
