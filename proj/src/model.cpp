#include "ssvae/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "ssvae/rng.hpp"

namespace ssvae {

namespace {

void check_finite(const Matrix& m, const char* what) {
  for (double v : m.data) {
    if (!std::isfinite(v)) {
      throw ValidationError(std::string(what) + ": non-finite entry");
    }
  }
}

// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows, logits.cols);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    double max = logits.at(i, 0);
    for (std::size_t j = 1; j < logits.cols; ++j) {
      max = std::max(max, logits.at(i, j));
    }
    double total = 0.0;
    for (std::size_t j = 0; j < logits.cols; ++j) {
      const double e = std::exp(logits.at(i, j) - max);
      out.at(i, j) = e;
      total += e;
    }
    for (std::size_t j = 0; j < logits.cols; ++j) {
      out.at(i, j) /= total;
    }
  }
  return out;
}

// Softmax over the whole grid, for explicit prior tables.
Matrix softmax_grid(const Matrix& logits) {
  Matrix out(logits.rows, logits.cols);
  double max = logits.data[0];
  for (double v : logits.data) max = std::max(max, v);
  double total = 0.0;
  for (std::size_t i = 0; i < logits.data.size(); ++i) {
    out.data[i] = std::exp(logits.data[i] - max);
    total += out.data[i];
  }
  for (double& v : out.data) v /= total;
  return out;
}

double logsumexp(const std::vector<double>& terms) {
  double max = -std::numeric_limits<double>::infinity();
  for (double t : terms) max = std::max(max, t);
  if (!std::isfinite(max)) return max;
  double total = 0.0;
  for (double t : terms) total += std::exp(t - max);
  return max + std::log(total);
}

}  // namespace

Encoder::Encoder(FiniteSpace given, FiniteSpace target, Matrix logits,
                 std::vector<std::size_t> target_map)
    : given_(std::move(given)),
      target_(std::move(target)),
      logits_(std::move(logits)),
      target_map_(std::move(target_map)) {}

Encoder Encoder::softmax(FiniteSpace given, FiniteSpace target,
                         Matrix logits) {
  if (logits.rows != given.size() || logits.cols != target.size()) {
    throw ValidationError("encoder logits shape does not match its spaces");
  }
  check_finite(logits, "encoder logits");
  return Encoder(std::move(given), std::move(target), std::move(logits), {});
}

Encoder Encoder::deterministic(FiniteSpace given, FiniteSpace target,
                               std::vector<std::size_t> target_index) {
  if (target_index.size() != given.size()) {
    throw ValidationError("deterministic encoder map size mismatch");
  }
  for (std::size_t t : target_index) {
    if (t >= target.size()) {
      throw ValidationError("deterministic encoder map index out of range");
    }
  }
  return Encoder(std::move(given), std::move(target), Matrix(),
                 std::move(target_index));
}

const Matrix& Encoder::logits() const {
  if (is_deterministic()) {
    throw ValidationError("deterministic encoder has no logits");
  }
  return logits_;
}

const std::vector<std::size_t>& Encoder::target_map() const {
  if (!is_deterministic()) {
    throw ValidationError("softmax encoder has no deterministic map");
  }
  return target_map_;
}

Matrix Encoder::probabilities() const {
  if (is_deterministic()) {
    Matrix rows(given_.size(), target_.size(), 0.0);
    for (std::size_t i = 0; i < given_.size(); ++i) {
      rows.at(i, target_map_[i]) = 1.0;
    }
    return rows;
  }
  return softmax_rows(logits_);
}

ConditionalTable Encoder::conditional() const {
  const Matrix p = probabilities();
  std::vector<FiniteDistribution> rows;
  rows.reserve(given_.size());
  for (std::size_t i = 0; i < given_.size(); ++i) {
    std::vector<double> r(p.cols);
    for (std::size_t j = 0; j < p.cols; ++j) r[j] = p.at(i, j);
    rows.emplace_back(target_, std::move(r));
  }
  return ConditionalTable(given_, target_, std::move(rows));
}

CouplingFunction::CouplingFunction(Kind kind, Matrix a, Matrix b, Matrix w)
    : kind_(kind),
      z_embeddings_(std::move(a)),
      zp_embeddings_(std::move(b)),
      weight_(std::move(w)) {}

CouplingFunction CouplingFunction::bilinear(Matrix z_embeddings,
                                            Matrix zp_embeddings,
                                            Matrix weight) {
  if (weight.rows != z_embeddings.cols || weight.cols != zp_embeddings.cols) {
    throw ValidationError("bilinear coupling weight shape mismatch");
  }
  check_finite(z_embeddings, "coupling embeddings");
  check_finite(zp_embeddings, "coupling embeddings");
  check_finite(weight, "coupling weight");
  return CouplingFunction(Kind::Bilinear, std::move(z_embeddings),
                          std::move(zp_embeddings), std::move(weight));
}

CouplingFunction CouplingFunction::table(Matrix positive_values) {
  for (double v : positive_values.data) {
    if (!std::isfinite(v) || v <= 0.0) {
      throw ValidationError("coupling table entries must be strictly positive");
    }
  }
  CouplingFunction f(Kind::Table, Matrix(), Matrix(), Matrix());
  f.values_ = std::move(positive_values);
  return f;
}

CouplingFunction CouplingFunction::constant(std::size_t z_count,
                                            std::size_t zp_count,
                                            double value) {
  return table(Matrix(z_count, zp_count, value));
}

std::size_t CouplingFunction::z_count() const {
  return kind_ == Kind::Bilinear ? z_embeddings_.rows : values_.rows;
}

std::size_t CouplingFunction::zp_count() const {
  return kind_ == Kind::Bilinear ? zp_embeddings_.rows : values_.cols;
}

double CouplingFunction::log_value(std::size_t k, std::size_t l) const {
  if (kind_ == Kind::Bilinear) {
    // e_k^T W e'_l, evaluated without ever exponentiating.
    double acc = 0.0;
    for (std::size_t a = 0; a < weight_.rows; ++a) {
      double we = 0.0;
      for (std::size_t b = 0; b < weight_.cols; ++b) {
        we += weight_.at(a, b) * zp_embeddings_.at(l, b);
      }
      acc += z_embeddings_.at(k, a) * we;
    }
    return acc;
  }
  return std::log(values_.at(k, l));
}

double CouplingFunction::value(std::size_t k, std::size_t l) const {
  if (kind_ == Kind::Table) return values_.at(k, l);
  return std::exp(log_value(k, l));
}

const Matrix& CouplingFunction::z_embeddings() const {
  if (kind_ != Kind::Bilinear) {
    throw ValidationError("table coupling has no embeddings");
  }
  return z_embeddings_;
}

const Matrix& CouplingFunction::zp_embeddings() const {
  if (kind_ != Kind::Bilinear) {
    throw ValidationError("table coupling has no embeddings");
  }
  return zp_embeddings_;
}

const Matrix& CouplingFunction::weight() const {
  if (kind_ != Kind::Bilinear) {
    throw ValidationError("table coupling has no weight matrix");
  }
  return weight_;
}

const Matrix& CouplingFunction::values() const {
  if (kind_ != Kind::Table) {
    throw ValidationError("bilinear coupling has no value table");
  }
  return values_;
}

PriorSpec::PriorSpec(Kind kind, std::optional<Matrix> logits,
                     std::optional<CouplingFunction> coupling)
    : kind_(kind),
      grid_logits_(std::move(logits)),
      coupling_(std::move(coupling)) {}

PriorSpec PriorSpec::explicit_table(Matrix grid_logits) {
  check_finite(grid_logits, "prior grid logits");
  return PriorSpec(Kind::ExplicitTable, std::move(grid_logits), std::nullopt);
}

PriorSpec PriorSpec::mutual_information() {
  return PriorSpec(Kind::MutualInformation, std::nullopt, std::nullopt);
}

PriorSpec PriorSpec::infonce(CouplingFunction coupling) {
  return PriorSpec(Kind::InfoNce, std::nullopt, std::move(coupling));
}

const Matrix& PriorSpec::grid_logits() const {
  if (kind_ != Kind::ExplicitTable) {
    throw ValidationError("prior carries no explicit grid logits");
  }
  return *grid_logits_;
}

const CouplingFunction& PriorSpec::coupling() const {
  if (kind_ != Kind::InfoNce) {
    throw ValidationError("prior carries no coupling function");
  }
  return *coupling_;
}

ModelInstance::ModelInstance(JointDistribution data_joint, Encoder encoder_c,
                             Encoder encoder_x, PriorSpec prior)
    : data_joint_(std::move(data_joint)),
      encoder_c_(std::move(encoder_c)),
      encoder_x_(std::move(encoder_x)),
      prior_(std::move(prior)) {
  if (encoder_c_.given_space() != data_joint_.row_space()) {
    throw ValidationError("encoder_c given-space must match the data rows");
  }
  if (encoder_x_.given_space() != data_joint_.col_space()) {
    throw ValidationError("encoder_x given-space must match the data columns");
  }
  const std::size_t z = encoder_c_.target_space().size();
  const std::size_t zp = encoder_x_.target_space().size();
  if (prior_.kind() == PriorSpec::Kind::ExplicitTable) {
    if (prior_.grid_logits().rows != z || prior_.grid_logits().cols != zp) {
      throw ValidationError("prior grid shape must match the latent spaces");
    }
  } else if (prior_.kind() == PriorSpec::Kind::InfoNce) {
    if (prior_.coupling().z_count() != z || prior_.coupling().zp_count() != zp) {
      throw ValidationError("coupling shape must match the latent spaces");
    }
  }
}

ModelInstance ModelInstance::with_prior(PriorSpec prior) const {
  return ModelInstance(data_joint_, encoder_c_, encoder_x_, std::move(prior));
}

ModelInstance ModelInstance::with_encoders(Encoder encoder_c,
                                           Encoder encoder_x) const {
  return ModelInstance(data_joint_, std::move(encoder_c),
                       std::move(encoder_x), prior_);
}

FiniteDistribution induced_latent_marginal(const ModelInstance& inst,
                                           Side side) {
  const Encoder& enc = inst.encoder(side);
  const FiniteDistribution data =
      marginalize(inst.data_joint(), side == Side::C ? Axis::Row : Axis::Col);
  const Matrix rows = enc.probabilities();
  std::vector<double> q(enc.target_space().size(), 0.0);
  for (std::size_t c = 0; c < rows.rows; ++c) {
    const double w = data.prob(c);
    if (w == 0.0) continue;
    for (std::size_t k = 0; k < rows.cols; ++k) {
      q[k] += rows.at(c, k) * w;
    }
  }
  return FiniteDistribution(enc.target_space(), std::move(q));
}

JointDistribution induced_latent_joint(const ModelInstance& inst) {
  const Matrix a = inst.encoder_c().probabilities();
  const Matrix b = inst.encoder_x().probabilities();
  const JointDistribution& data = inst.data_joint();
  Matrix q(a.cols, b.cols, 0.0);
  for (std::size_t c = 0; c < data.rows(); ++c) {
    for (std::size_t x = 0; x < data.cols(); ++x) {
      const double w = data.prob(c, x);
      if (w == 0.0) continue;
      for (std::size_t k = 0; k < a.cols; ++k) {
        const double ak = a.at(c, k) * w;
        if (ak == 0.0) continue;
        for (std::size_t l = 0; l < b.cols; ++l) {
          q.at(k, l) += ak * b.at(x, l);
        }
      }
    }
  }
  return JointDistribution(inst.latent_space(Side::C),
                           inst.latent_space(Side::X), std::move(q));
}

ConditionalTable implicit_decoder(const ModelInstance& inst, Side side) {
  const Encoder& enc = inst.encoder(side);
  const FiniteDistribution data =
      marginalize(inst.data_joint(), side == Side::C ? Axis::Row : Axis::Col);
  const FiniteDistribution q = induced_latent_marginal(inst, side);
  const Matrix rows = enc.probabilities();
  std::vector<std::optional<FiniteDistribution>> decoder_rows;
  decoder_rows.reserve(q.size());
  for (std::size_t k = 0; k < q.size(); ++k) {
    if (q.prob(k) == 0.0) {
      decoder_rows.emplace_back(std::nullopt);
      continue;
    }
    std::vector<double> r(data.size());
    for (std::size_t c = 0; c < data.size(); ++c) {
      r[c] = rows.at(c, k) * data.prob(c) / q.prob(k);
    }
    decoder_rows.emplace_back(
        FiniteDistribution(enc.given_space(), std::move(r)));
  }
  return ConditionalTable(enc.target_space(), enc.given_space(),
                          std::move(decoder_rows),
                          ConditionalTable::UndefinedRowError::UnreachedLatent);
}

JointDistribution resolve_prior(const ModelInstance& inst) {
  const PriorSpec& prior = inst.prior();
  switch (prior.kind()) {
    case PriorSpec::Kind::ExplicitTable: {
      return JointDistribution(inst.latent_space(Side::C),
                               inst.latent_space(Side::X),
                               softmax_grid(prior.grid_logits()));
    }
    case PriorSpec::Kind::MutualInformation:
      return induced_latent_joint(inst);
    case PriorSpec::Kind::InfoNce: {
      const CouplingFunction& f = prior.coupling();
      const FiniteDistribution qz = induced_latent_marginal(inst, Side::C);
      const FiniteDistribution qzp = induced_latent_marginal(inst, Side::X);
      Matrix p(qz.size(), qzp.size(), 0.0);
      for (std::size_t k = 0; k < qz.size(); ++k) {
        if (qz.prob(k) == 0.0) continue;
        // log Z_k = log sum_l Q(z')_l f(k,l), accumulated in log space.
        std::vector<double> terms;
        terms.reserve(qzp.size());
        for (std::size_t l = 0; l < qzp.size(); ++l) {
          if (qzp.prob(l) == 0.0) continue;
          terms.push_back(std::log(qzp.prob(l)) + f.log_value(k, l));
        }
        const double log_zk = logsumexp(terms);
        for (std::size_t l = 0; l < qzp.size(); ++l) {
          if (qzp.prob(l) == 0.0) continue;
          p.at(k, l) = qz.prob(k) *
                       std::exp(std::log(qzp.prob(l)) + f.log_value(k, l) -
                                log_zk);
        }
      }
      return JointDistribution(inst.latent_space(Side::C),
                               inst.latent_space(Side::X), std::move(p));
    }
  }
  throw ValidationError("unknown prior kind");
}

ModelInstance random_instance(const Dims& dims, std::uint64_t seed) {
  if (dims.data_c < 2 || dims.data_x < 2 || dims.latent_z < 2 ||
      dims.latent_zp < 2) {
    throw ValidationError("random_instance requires all dimensions >= 2");
  }
  SplitMix64 rng(seed);

  Matrix weights(dims.data_c, dims.data_x);
  double total = 0.0;
  for (double& w : weights.data) {
    w = 0.1 + rng.next_double();
    total += w;
  }
  for (double& w : weights.data) w /= total;
  JointDistribution data(labeled_range("c", dims.data_c),
                         labeled_range("x", dims.data_x), std::move(weights));

  Matrix logits_c(dims.data_c, dims.latent_z);
  for (double& v : logits_c.data) v = rng.next_symmetric();
  Matrix logits_x(dims.data_x, dims.latent_zp);
  for (double& v : logits_x.data) v = rng.next_symmetric();

  Matrix prior_logits(dims.latent_z, dims.latent_zp);
  for (double& v : prior_logits.data) v = rng.next_symmetric();

  Encoder enc_c = Encoder::softmax(data.row_space(),
                                   labeled_range("z", dims.latent_z),
                                   std::move(logits_c));
  Encoder enc_x = Encoder::softmax(data.col_space(),
                                   labeled_range("zp", dims.latent_zp),
                                   std::move(logits_x));
  return ModelInstance(std::move(data), std::move(enc_c), std::move(enc_x),
                       PriorSpec::explicit_table(std::move(prior_logits)));
}

CouplingFunction random_bilinear_coupling(std::size_t z_count,
                                          std::size_t zp_count,
                                          std::size_t embed_dim,
                                          std::uint64_t seed) {
  SplitMix64 rng(seed);
  Matrix e(z_count, embed_dim);
  for (double& v : e.data) v = rng.next_symmetric();
  Matrix ep(zp_count, embed_dim);
  for (double& v : ep.data) v = rng.next_symmetric();
  Matrix w(embed_dim, embed_dim);
  for (double& v : w.data) v = 0.5 * rng.next_symmetric();
  return CouplingFunction::bilinear(std::move(e), std::move(ep), std::move(w));
}

namespace {

FiniteSpace shared_factor_space(std::size_t s_count, std::size_t noise_count) {
  std::vector<std::string> labels;
  labels.reserve(s_count * noise_count);
  for (std::size_t s = 0; s < s_count; ++s) {
    for (std::size_t n = 0; n < noise_count; ++n) {
      labels.push_back("s" + std::to_string(s) + "n" + std::to_string(n));
    }
  }
  return FiniteSpace(std::move(labels));
}

// Emission table T(a|s) = (1 - noise_level) delta(a, s) + noise_level / s_count.
double emission(std::size_t a, std::size_t s, std::size_t s_count,
                double noise_level) {
  double t = noise_level / static_cast<double>(s_count);
  if (a == s) t += 1.0 - noise_level;
  return t;
}

void check_shared_factor_args(std::size_t s_count, std::size_t noise_count,
                              double noise_level) {
  if (s_count < 2) {
    throw ValidationError("shared-factor family requires s_count >= 2");
  }
  if (noise_count < 1) {
    throw ValidationError("shared-factor family requires noise_count >= 1");
  }
  if (!(noise_level >= 0.0 && noise_level <= 1.0)) {
    throw ValidationError("noise_level must lie in [0, 1]");
  }
}

}  // namespace

JointDistribution shared_factor_data_joint(std::size_t s_count,
                                           std::size_t noise_count,
                                           double noise_level) {
  check_shared_factor_args(s_count, noise_count, noise_level);
  const FiniteSpace space = shared_factor_space(s_count, noise_count);
  const double noise_prob = 1.0 / static_cast<double>(noise_count);
  const double s_prob = 1.0 / static_cast<double>(s_count);
  Matrix probs(space.size(), space.size(), 0.0);
  for (std::size_t a = 0; a < s_count; ++a) {
    for (std::size_t b = 0; b < s_count; ++b) {
      // P(s_c = a, s_x = b) = sum_s P(s) T(a|s) T(b|s)
      double pab = 0.0;
      for (std::size_t s = 0; s < s_count; ++s) {
        pab += s_prob * emission(a, s, s_count, noise_level) *
               emission(b, s, s_count, noise_level);
      }
      const double cell = pab * noise_prob * noise_prob;
      for (std::size_t n1 = 0; n1 < noise_count; ++n1) {
        for (std::size_t n2 = 0; n2 < noise_count; ++n2) {
          probs.at(a * noise_count + n1, b * noise_count + n2) = cell;
        }
      }
    }
  }
  return JointDistribution(space, space, std::move(probs));
}

JointDistribution shared_factor_view_factor_joint(std::size_t s_count,
                                                  std::size_t noise_count,
                                                  double noise_level) {
  check_shared_factor_args(s_count, noise_count, noise_level);
  const FiniteSpace view_space = shared_factor_space(s_count, noise_count);
  const FiniteSpace factor_space = labeled_range("s", s_count);
  const double noise_prob = 1.0 / static_cast<double>(noise_count);
  const double s_prob = 1.0 / static_cast<double>(s_count);
  Matrix probs(view_space.size(), s_count, 0.0);
  for (std::size_t a = 0; a < s_count; ++a) {
    for (std::size_t s = 0; s < s_count; ++s) {
      const double cell =
          s_prob * emission(a, s, s_count, noise_level) * noise_prob;
      for (std::size_t n = 0; n < noise_count; ++n) {
        probs.at(a * noise_count + n, s) = cell;
      }
    }
  }
  return JointDistribution(view_space, factor_space, std::move(probs));
}

JointDistribution project_to_shared_factor(const JointDistribution& data,
                                           std::size_t s_count,
                                           std::size_t noise_count) {
  if (data.rows() != s_count * noise_count ||
      data.cols() != s_count * noise_count) {
    throw ValidationError("data joint shape does not match (s, n) pairs");
  }
  const FiniteSpace s_space = labeled_range("s", s_count);
  Matrix probs(s_count, s_count, 0.0);
  for (std::size_t i = 0; i < data.rows(); ++i) {
    for (std::size_t j = 0; j < data.cols(); ++j) {
      probs.at(i / noise_count, j / noise_count) += data.prob(i, j);
    }
  }
  return JointDistribution(s_space, s_space, std::move(probs));
}

ModelInstance make_shared_factor_model(std::size_t s_count,
                                       std::size_t noise_count,
                                       double noise_level,
                                       std::uint64_t seed) {
  JointDistribution data =
      shared_factor_data_joint(s_count, noise_count, noise_level);
  SplitMix64 rng(seed);
  Matrix logits_c(data.rows(), s_count);
  for (double& v : logits_c.data) v = 0.1 * rng.next_symmetric();
  Matrix logits_x(data.cols(), s_count);
  for (double& v : logits_x.data) v = 0.1 * rng.next_symmetric();
  Encoder enc_c = Encoder::softmax(data.row_space(),
                                   labeled_range("z", s_count),
                                   std::move(logits_c));
  Encoder enc_x = Encoder::softmax(data.col_space(),
                                   labeled_range("zp", s_count),
                                   std::move(logits_x));
  return ModelInstance(std::move(data), std::move(enc_c), std::move(enc_x),
                       PriorSpec::mutual_information());
}

}  // namespace ssvae
