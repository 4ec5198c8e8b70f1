#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ssvae/matrix.hpp"
#include "ssvae/prob.hpp"

namespace ssvae {

/// Which view of the model a derived quantity refers to: the c-side
/// (data rows, latent z) or the x-side (data columns, latent z').
enum class Side { C, X };

/// A tabular stochastic encoder from a data space to a latent space.
///
/// Two exact parameterizations:
///  - softmax: one unconstrained logit row per data label; the realized
///    conditional is the row-wise softmax.
///  - deterministic: a one-hot map that bypasses softmax entirely, so rows
///    are exact 0/1 (not merely saturated).
class Encoder {
 public:
  static Encoder softmax(FiniteSpace given, FiniteSpace target, Matrix logits);
  static Encoder deterministic(FiniteSpace given, FiniteSpace target,
                               std::vector<std::size_t> target_index);

  const FiniteSpace& given_space() const { return given_; }
  const FiniteSpace& target_space() const { return target_; }
  bool is_deterministic() const { return !target_map_.empty(); }

  /// Softmax mode only.
  const Matrix& logits() const;
  /// Deterministic mode only: target index per given-label.
  const std::vector<std::size_t>& target_map() const;

  /// Row-stochastic table realized by this encoder.
  Matrix probabilities() const;
  ConditionalTable conditional() const;

  friend bool operator==(const Encoder&, const Encoder&) = default;

 private:
  Encoder(FiniteSpace given, FiniteSpace target, Matrix logits,
          std::vector<std::size_t> target_map);

  FiniteSpace given_;
  FiniteSpace target_;
  Matrix logits_;                        // empty in deterministic mode
  std::vector<std::size_t> target_map_;  // empty in softmax mode
};

/// A strictly positive score on latent pairs. Either a bilinear form
/// exp(e_k^T W e'_l) over learned embeddings, or a general positive table.
class CouplingFunction {
 public:
  enum class Kind { Bilinear, Table };

  static CouplingFunction bilinear(Matrix z_embeddings, Matrix zp_embeddings,
                                   Matrix weight);
  static CouplingFunction table(Matrix positive_values);
  static CouplingFunction constant(std::size_t z_count, std::size_t zp_count,
                                   double value);

  Kind kind() const { return kind_; }
  std::size_t z_count() const;
  std::size_t zp_count() const;

  double log_value(std::size_t k, std::size_t l) const;
  double value(std::size_t k, std::size_t l) const;

  // Bilinear accessors.
  const Matrix& z_embeddings() const;
  const Matrix& zp_embeddings() const;
  const Matrix& weight() const;
  // Table accessor.
  const Matrix& values() const;

  friend bool operator==(const CouplingFunction&,
                         const CouplingFunction&) = default;

 private:
  CouplingFunction(Kind kind, Matrix a, Matrix b, Matrix w);

  Kind kind_;
  Matrix z_embeddings_;   // bilinear only
  Matrix zp_embeddings_;  // bilinear only
  Matrix weight_;         // bilinear only
  Matrix values_;         // table only
};

/// Choice of prior over latent pairs. ExplicitTable carries its own grid
/// logits; the other two are implicit and resolve against a model instance
/// at evaluation time.
class PriorSpec {
 public:
  enum class Kind { ExplicitTable, MutualInformation, InfoNce };

  static PriorSpec explicit_table(Matrix grid_logits);
  static PriorSpec mutual_information();
  static PriorSpec infonce(CouplingFunction coupling);

  Kind kind() const { return kind_; }
  const Matrix& grid_logits() const;
  const CouplingFunction& coupling() const;

  friend bool operator==(const PriorSpec&, const PriorSpec&) = default;

 private:
  PriorSpec(Kind kind, std::optional<Matrix> logits,
            std::optional<CouplingFunction> coupling);

  Kind kind_;
  std::optional<Matrix> grid_logits_;
  std::optional<CouplingFunction> coupling_;
};

/// A complete model: true data distribution over (c, x') pairs, one encoder
/// per view, and a prior choice. Immutable once constructed.
class ModelInstance {
 public:
  ModelInstance(JointDistribution data_joint, Encoder encoder_c,
                Encoder encoder_x, PriorSpec prior);

  const JointDistribution& data_joint() const { return data_joint_; }
  const Encoder& encoder_c() const { return encoder_c_; }
  const Encoder& encoder_x() const { return encoder_x_; }
  const PriorSpec& prior() const { return prior_; }

  const Encoder& encoder(Side side) const {
    return side == Side::C ? encoder_c_ : encoder_x_;
  }
  const FiniteSpace& latent_space(Side side) const {
    return encoder(side).target_space();
  }

  ModelInstance with_prior(PriorSpec prior) const;
  ModelInstance with_encoders(Encoder encoder_c, Encoder encoder_x) const;

 private:
  JointDistribution data_joint_;
  Encoder encoder_c_;
  Encoder encoder_x_;
  PriorSpec prior_;
};

/// Latent marginal induced by pushing the side's data marginal through its
/// encoder: Q(z)_k = sum_c Q(z=k|c) Ptrue(c).
FiniteDistribution induced_latent_marginal(const ModelInstance& inst,
                                           Side side);

/// Latent joint induced by pushing the data joint through both encoders:
/// Q(z,z')_{kl} = sum_{c,x'} Q(k|c) Q(l|x') Ptrue(c,x').
JointDistribution induced_latent_joint(const ModelInstance& inst);

/// Likelihood defined by Bayes inversion of the encoder against the true
/// data marginal: P(c|z) = Q(z|c) Ptrue(c) / Q(z). Rows for latents with
/// zero induced probability raise UnreachedLatentError when requested.
ConditionalTable implicit_decoder(const ModelInstance& inst, Side side);

/// Materialize the instance's prior as a joint table over the latent grid.
///  - ExplicitTable: softmax over the grid logits.
///  - MutualInformation: the induced latent joint itself.
///  - InfoNce: rows P(z=k, z'=l) = Q(z)_k Q(z')_l f(k,l) / Z_k with
///    Z_k = sum_l Q(z')_l f(k,l), so the z-marginal equals Q(z) exactly.
JointDistribution resolve_prior(const ModelInstance& inst);

/// Label sizes for generated instances: data spaces (c, x) and latent
/// spaces (z, z').
struct Dims {
  std::size_t data_c;
  std::size_t data_x;
  std::size_t latent_z;
  std::size_t latent_zp;
};

/// Deterministic pseudorandom instance. Draw sequence from SplitMix64(seed),
/// in order:
///   1. data weights, row-major: w = 0.1 + next_double(), then normalized;
///   2. encoder_c logits, row-major: next_symmetric();
///   3. encoder_x logits, row-major: next_symmetric();
///   4. explicit prior grid logits, row-major: next_symmetric().
/// All dimensions must be >= 2.
ModelInstance random_instance(const Dims& dims, std::uint64_t seed);

/// Deterministic pseudorandom bilinear coupling. Draw sequence from
/// SplitMix64(seed): z embeddings row-major, z' embeddings row-major, then
/// the weight matrix row-major; embeddings use next_symmetric(), weights
/// 0.5 * next_symmetric().
CouplingFunction random_bilinear_coupling(std::size_t z_count,
                                          std::size_t zp_count,
                                          std::size_t embed_dim,
                                          std::uint64_t seed);

/// Data joint for the shared-factor family. Labels on both sides are pairs
/// "s<i>n<j>" (index = i * noise_count + j). A hidden factor s is uniform
/// over s_count values; each view independently emits an s-component from
/// (1 - noise_level) * delta(s) + noise_level * uniform, plus an independent
/// uniform noise component. At noise_level 0 both views carry s exactly; at
/// noise_level 1 the views are independent.
JointDistribution shared_factor_data_joint(std::size_t s_count,
                                           std::size_t noise_count,
                                           double noise_level);

/// Joint between a view's label and the hidden factor s itself:
/// P(c=(a,n), s) = (1/s_count) T(a|s) / noise_count. Used to score how much
/// of the hidden factor a latent captures.
JointDistribution shared_factor_view_factor_joint(std::size_t s_count,
                                                  std::size_t noise_count,
                                                  double noise_level);

/// Project the shared-factor data joint onto the (s_c, s_x) components.
JointDistribution project_to_shared_factor(const JointDistribution& data,
                                           std::size_t s_count,
                                           std::size_t noise_count);

/// Shared-factor model instance with latent size s_count per side, softmax
/// encoders, and the implicit mutual-information prior. Encoder logits are
/// drawn from SplitMix64(seed) as 0.1 * next_symmetric(), encoder_c rows
/// first, then encoder_x rows.
ModelInstance make_shared_factor_model(std::size_t s_count,
                                       std::size_t noise_count,
                                       double noise_level, std::uint64_t seed);

}  // namespace ssvae
