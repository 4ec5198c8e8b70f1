#include "ssvae/prob.hpp"

#include <cmath>
#include <unordered_set>
#include <utility>

namespace ssvae {

namespace {

void check_probability_entries(const std::vector<double>& probs,
                               const std::string& what) {
  double total = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p)) {
      throw ValidationError(what + ": non-finite entry");
    }
    if (p < 0.0) {
      throw ValidationError(what + ": negative entry " + std::to_string(p));
    }
    total += p;
  }
  if (std::abs(total - 1.0) > kNormalizationTol) {
    throw ValidationError(what + ": entries sum to " + std::to_string(total) +
                          ", expected 1 within 1e-12");
  }
}

}  // namespace

FiniteSpace::FiniteSpace(std::vector<std::string> labels)
    : labels_(std::move(labels)) {
  if (labels_.empty()) {
    throw ValidationError("finite space needs at least one label");
  }
  std::unordered_set<std::string_view> seen;
  for (const auto& l : labels_) {
    if (!seen.insert(l).second) {
      throw ValidationError("duplicate label '" + l + "' in finite space");
    }
  }
}

std::optional<std::size_t> FiniteSpace::index_of(std::string_view label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == label) return i;
  }
  return std::nullopt;
}

FiniteSpace labeled_range(std::string_view prefix, std::size_t count) {
  std::vector<std::string> labels;
  labels.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    labels.push_back(std::string(prefix) + std::to_string(i));
  }
  return FiniteSpace(std::move(labels));
}

FiniteDistribution::FiniteDistribution(FiniteSpace space,
                                       std::vector<double> probs)
    : space_(std::move(space)), probs_(std::move(probs)) {
  if (probs_.size() != space_.size()) {
    throw ValidationError("distribution size does not match its space");
  }
  check_probability_entries(probs_, "distribution");
}

FiniteDistribution FiniteDistribution::uniform(FiniteSpace space) {
  std::vector<double> probs(space.size(), 1.0 / space.size());
  return FiniteDistribution(std::move(space), std::move(probs));
}

FiniteDistribution FiniteDistribution::point_mass(FiniteSpace space,
                                                  std::size_t index) {
  std::vector<double> probs(space.size(), 0.0);
  probs.at(index) = 1.0;
  return FiniteDistribution(std::move(space), std::move(probs));
}

JointDistribution::JointDistribution(FiniteSpace row_space,
                                     FiniteSpace col_space, Matrix probs)
    : row_space_(std::move(row_space)),
      col_space_(std::move(col_space)),
      probs_(std::move(probs)) {
  if (probs_.rows != row_space_.size() || probs_.cols != col_space_.size()) {
    throw ValidationError("joint table shape does not match its spaces");
  }
  check_probability_entries(probs_.data, "joint table");
}

JointDistribution JointDistribution::transposed() const {
  Matrix t(cols(), rows());
  for (std::size_t i = 0; i < rows(); ++i) {
    for (std::size_t j = 0; j < cols(); ++j) {
      t.at(j, i) = prob(i, j);
    }
  }
  return JointDistribution(col_space_, row_space_, std::move(t));
}

ConditionalTable::ConditionalTable(FiniteSpace given_space,
                                   FiniteSpace target_space,
                                   std::vector<FiniteDistribution> rows)
    : given_space_(std::move(given_space)),
      target_space_(std::move(target_space)) {
  if (rows.size() != given_space_.size()) {
    throw ValidationError("conditional table row count mismatch");
  }
  rows_.reserve(rows.size());
  for (auto& r : rows) {
    if (r.space() != target_space_) {
      throw ValidationError("conditional row space mismatch");
    }
    rows_.emplace_back(std::move(r));
  }
}

ConditionalTable::ConditionalTable(
    FiniteSpace given_space, FiniteSpace target_space,
    std::vector<std::optional<FiniteDistribution>> rows,
    UndefinedRowError error_kind)
    : given_space_(std::move(given_space)),
      target_space_(std::move(target_space)),
      rows_(std::move(rows)),
      error_kind_(error_kind) {
  if (rows_.size() != given_space_.size()) {
    throw ValidationError("conditional table row count mismatch");
  }
  for (const auto& r : rows_) {
    if (r && r->space() != target_space_) {
      throw ValidationError("conditional row space mismatch");
    }
  }
}

const FiniteDistribution& ConditionalTable::row(std::size_t i) const {
  if (!rows_[i]) {
    if (error_kind_ == UndefinedRowError::UnreachedLatent) {
      throw UnreachedLatentError(given_space_.label(i));
    }
    throw ZeroMarginalError(given_space_.label(i));
  }
  return *rows_[i];
}

FiniteDistribution marginalize(const JointDistribution& joint, Axis axis) {
  if (axis == Axis::Row) {
    std::vector<double> probs(joint.rows(), 0.0);
    for (std::size_t i = 0; i < joint.rows(); ++i) {
      for (std::size_t j = 0; j < joint.cols(); ++j) {
        probs[i] += joint.prob(i, j);
      }
    }
    return FiniteDistribution(joint.row_space(), std::move(probs));
  }
  std::vector<double> probs(joint.cols(), 0.0);
  for (std::size_t j = 0; j < joint.cols(); ++j) {
    for (std::size_t i = 0; i < joint.rows(); ++i) {
      probs[j] += joint.prob(i, j);
    }
  }
  return FiniteDistribution(joint.col_space(), std::move(probs));
}

ConditionalTable condition(const JointDistribution& joint, Axis given) {
  const JointDistribution oriented =
      (given == Axis::Row) ? joint : joint.transposed();
  std::vector<std::optional<FiniteDistribution>> rows;
  rows.reserve(oriented.rows());
  for (std::size_t i = 0; i < oriented.rows(); ++i) {
    double mass = 0.0;
    for (std::size_t j = 0; j < oriented.cols(); ++j) {
      mass += oriented.prob(i, j);
    }
    if (mass == 0.0) {
      rows.emplace_back(std::nullopt);
      continue;
    }
    std::vector<double> r(oriented.cols());
    for (std::size_t j = 0; j < oriented.cols(); ++j) {
      r[j] = oriented.prob(i, j) / mass;
    }
    rows.emplace_back(FiniteDistribution(oriented.col_space(), std::move(r)));
  }
  return ConditionalTable(oriented.row_space(), oriented.col_space(),
                          std::move(rows));
}

JointDistribution recompose(const FiniteDistribution& row_marginal,
                            const ConditionalTable& cond) {
  if (row_marginal.space() != cond.given_space()) {
    throw ValidationError("recompose: marginal space mismatch");
  }
  Matrix probs(row_marginal.size(), cond.target_space().size());
  for (std::size_t i = 0; i < row_marginal.size(); ++i) {
    const double mass = row_marginal.prob(i);
    if (mass == 0.0) continue;  // undefined rows carry no mass
    for (std::size_t j = 0; j < cond.target_space().size(); ++j) {
      probs.at(i, j) = mass * cond.prob(i, j);
    }
  }
  return JointDistribution(row_marginal.space(), cond.target_space(),
                           std::move(probs));
}

double entropy(const FiniteDistribution& p) {
  double h = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = p.prob(i);
    if (pi > 0.0) h -= pi * std::log(pi);
  }
  return h;
}

double kl_divergence(const FiniteDistribution& p,
                     const FiniteDistribution& q) {
  if (p.space() != q.space()) {
    throw ValidationError("kl_divergence: distributions live on different spaces");
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = p.prob(i);
    if (pi == 0.0) continue;
    const double qi = q.prob(i);
    if (qi == 0.0) {
      throw AbsoluteContinuityError(p.space().label(i));
    }
    kl += pi * std::log(pi / qi);
  }
  return kl;
}

double kl_divergence(const JointDistribution& p, const JointDistribution& q) {
  if (p.row_space() != q.row_space() || p.col_space() != q.col_space()) {
    throw ValidationError("kl_divergence: joints live on different spaces");
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    for (std::size_t j = 0; j < p.cols(); ++j) {
      const double pij = p.prob(i, j);
      if (pij == 0.0) continue;
      const double qij = q.prob(i, j);
      if (qij == 0.0) {
        throw AbsoluteContinuityError(p.row_space().label(i) + "|" +
                                      p.col_space().label(j));
      }
      kl += pij * std::log(pij / qij);
    }
  }
  return kl;
}

double mutual_information(const JointDistribution& joint) {
  const FiniteDistribution pr = marginalize(joint, Axis::Row);
  const FiniteDistribution pc = marginalize(joint, Axis::Col);
  double mi = 0.0;
  for (std::size_t i = 0; i < joint.rows(); ++i) {
    for (std::size_t j = 0; j < joint.cols(); ++j) {
      const double pij = joint.prob(i, j);
      if (pij == 0.0) continue;
      mi += pij * std::log(pij / (pr.prob(i) * pc.prob(j)));
    }
  }
  return mi;
}

JointDistribution product_of_marginals(const JointDistribution& joint) {
  const FiniteDistribution pr = marginalize(joint, Axis::Row);
  const FiniteDistribution pc = marginalize(joint, Axis::Col);
  Matrix probs(joint.rows(), joint.cols());
  for (std::size_t i = 0; i < joint.rows(); ++i) {
    for (std::size_t j = 0; j < joint.cols(); ++j) {
      probs.at(i, j) = pr.prob(i) * pc.prob(j);
    }
  }
  return JointDistribution(joint.row_space(), joint.col_space(),
                           std::move(probs));
}

}  // namespace ssvae
