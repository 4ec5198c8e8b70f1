#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ssvae/errors.hpp"
#include "ssvae/matrix.hpp"

namespace ssvae {

/// Normalization tolerance applied at construction. Inputs that miss it are
/// rejected, not renormalized.
inline constexpr double kNormalizationTol = 1e-12;

/// An ordered set of distinct symbolic labels. Fixed after construction.
class FiniteSpace {
 public:
  explicit FiniteSpace(std::vector<std::string> labels);

  std::size_t size() const { return labels_.size(); }
  const std::string& label(std::size_t i) const { return labels_[i]; }
  const std::vector<std::string>& labels() const { return labels_; }
  std::optional<std::size_t> index_of(std::string_view label) const;

  friend bool operator==(const FiniteSpace&, const FiniteSpace&) = default;

 private:
  std::vector<std::string> labels_;
};

/// Convenience space with labels "<prefix>0", "<prefix>1", ...
FiniteSpace labeled_range(std::string_view prefix, std::size_t count);

/// A normalized probability table over a finite space. Entries are
/// nonnegative and sum to one within kNormalizationTol.
class FiniteDistribution {
 public:
  FiniteDistribution(FiniteSpace space, std::vector<double> probs);

  const FiniteSpace& space() const { return space_; }
  std::size_t size() const { return probs_.size(); }
  double prob(std::size_t i) const { return probs_[i]; }
  const std::vector<double>& probs() const { return probs_; }

  static FiniteDistribution uniform(FiniteSpace space);
  static FiniteDistribution point_mass(FiniteSpace space, std::size_t index);

  friend bool operator==(const FiniteDistribution&,
                         const FiniteDistribution&) = default;

 private:
  FiniteSpace space_;
  std::vector<double> probs_;
};

/// A normalized joint probability table over a pair of finite spaces.
class JointDistribution {
 public:
  JointDistribution(FiniteSpace row_space, FiniteSpace col_space,
                    Matrix probs);

  const FiniteSpace& row_space() const { return row_space_; }
  const FiniteSpace& col_space() const { return col_space_; }
  std::size_t rows() const { return probs_.rows; }
  std::size_t cols() const { return probs_.cols; }
  double prob(std::size_t i, std::size_t j) const { return probs_.at(i, j); }
  const Matrix& table() const { return probs_; }

  JointDistribution transposed() const;

  friend bool operator==(const JointDistribution&,
                         const JointDistribution&) = default;

 private:
  FiniteSpace row_space_;
  FiniteSpace col_space_;
  Matrix probs_;
};

/// A row-stochastic table: one distribution over the target space per
/// given-label. Rows whose given-label had zero marginal probability under
/// conditioning are undefined; requesting one raises ZeroMarginalError (or
/// UnreachedLatentError for implicit decoders, where the given-label is a
/// latent the encoder never reaches).
class ConditionalTable {
 public:
  enum class UndefinedRowError { ZeroMarginal, UnreachedLatent };

  ConditionalTable(FiniteSpace given_space, FiniteSpace target_space,
                   std::vector<FiniteDistribution> rows);
  ConditionalTable(FiniteSpace given_space, FiniteSpace target_space,
                   std::vector<std::optional<FiniteDistribution>> rows,
                   UndefinedRowError error_kind = UndefinedRowError::ZeroMarginal);

  const FiniteSpace& given_space() const { return given_space_; }
  const FiniteSpace& target_space() const { return target_space_; }
  bool row_defined(std::size_t i) const { return rows_[i].has_value(); }
  const FiniteDistribution& row(std::size_t i) const;
  double prob(std::size_t given, std::size_t target) const {
    return row(given).prob(target);
  }

 private:
  FiniteSpace given_space_;
  FiniteSpace target_space_;
  std::vector<std::optional<FiniteDistribution>> rows_;
  UndefinedRowError error_kind_ = UndefinedRowError::ZeroMarginal;
};

enum class Axis { Row, Col };

/// Sum a joint table down to the marginal over the requested axis.
FiniteDistribution marginalize(const JointDistribution& joint, Axis axis);

/// Normalize each slice of the joint into a conditional given the requested
/// axis. Slices with zero marginal mass become undefined rows.
ConditionalTable condition(const JointDistribution& joint, Axis given);

/// Rebuild the joint from a given-axis marginal and the matching conditional
/// (given = rows). Undefined conditional rows must carry zero marginal mass.
JointDistribution recompose(const FiniteDistribution& row_marginal,
                            const ConditionalTable& cond);

/// Shannon entropy in nats, with the 0 log 0 = 0 convention.
double entropy(const FiniteDistribution& p);

/// KL divergence in nats. Raises AbsoluteContinuityError where p_i > 0 and
/// q_i = 0; cells with p_i = 0 contribute nothing.
double kl_divergence(const FiniteDistribution& p, const FiniteDistribution& q);

/// KL divergence between two joints over the same pair of spaces, computed
/// over the flattened grid.
double kl_divergence(const JointDistribution& p, const JointDistribution& q);

/// Mutual information of a joint in nats, by direct summation of
/// sum_ij p_ij log(p_ij / (p_i p_j)).
double mutual_information(const JointDistribution& joint);

/// Outer product of the two marginals of a joint.
JointDistribution product_of_marginals(const JointDistribution& joint);

}  // namespace ssvae
