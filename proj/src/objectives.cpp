#include "ssvae/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ssvae/report.hpp"
#include "ssvae/rng.hpp"

namespace ssvae {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double logsumexp(const std::vector<double>& terms) {
  double max = kNegInf;
  for (double t : terms) max = std::max(max, t);
  if (!std::isfinite(max)) return max;
  double total = 0.0;
  for (double t : terms) total += std::exp(t - max);
  return max + std::log(total);
}

// Everything the two-view objectives consume, derived once per instance.
struct DerivedTables {
  FiniteDistribution data_c;
  FiniteDistribution data_x;
  Matrix enc_c;
  Matrix enc_x;
  FiniteDistribution qz;
  FiniteDistribution qzp;
  JointDistribution qzz;
  JointDistribution prior;
};

DerivedTables derive(const ModelInstance& inst) {
  return DerivedTables{
      marginalize(inst.data_joint(), Axis::Row),
      marginalize(inst.data_joint(), Axis::Col),
      inst.encoder_c().probabilities(),
      inst.encoder_x().probabilities(),
      induced_latent_marginal(inst, Side::C),
      induced_latent_marginal(inst, Side::X),
      induced_latent_joint(inst),
      resolve_prior(inst),
  };
}

std::string cell_label(const ModelInstance& inst, std::size_t k,
                       std::size_t l) {
  return inst.latent_space(Side::C).label(k) + "|" +
         inst.latent_space(Side::X).label(l);
}

// log( P(k,l) / (Q(z)_k Q(z')_l) ) with the domain errors the posterior
// weight makes observable.
double log_prior_ratio(const ModelInstance& inst, const DerivedTables& t,
                       std::size_t k, std::size_t l) {
  if (t.qz.prob(k) == 0.0) {
    throw UnreachedLatentError(t.qz.space().label(k));
  }
  if (t.qzp.prob(l) == 0.0) {
    throw UnreachedLatentError(t.qzp.space().label(l));
  }
  const double p = t.prior.prob(k, l);
  if (p == 0.0) {
    throw AbsoluteContinuityError(cell_label(inst, k, l));
  }
  return std::log(p) - std::log(t.qz.prob(k)) - std::log(t.qzp.prob(l));
}

double const_term_at(const DerivedTables& t, std::size_t c, std::size_t x) {
  return std::log(t.data_c.prob(c)) + std::log(t.data_x.prob(x));
}

StructuredElbo structured_elbo_impl(const ModelInstance& inst,
                                    const DerivedTables& t, std::size_t c,
                                    std::size_t x) {
  double acc = 0.0;
  for (std::size_t k = 0; k < t.qz.size(); ++k) {
    const double ak = t.enc_c.at(c, k);
    if (ak == 0.0) continue;
    for (std::size_t l = 0; l < t.qzp.size(); ++l) {
      const double w = ak * t.enc_x.at(x, l);
      if (w == 0.0) continue;
      acc += w * log_prior_ratio(inst, t, k, l);
    }
  }
  const double c_term = const_term_at(t, c, x);
  return StructuredElbo{acc + c_term, c_term};
}

double model_evidence_impl(const ModelInstance& inst, const DerivedTables& t,
                           std::size_t c, std::size_t x) {
  std::vector<double> terms;
  terms.reserve(t.qz.size() * t.qzp.size());
  for (std::size_t k = 0; k < t.qz.size(); ++k) {
    const double ak = t.enc_c.at(c, k);
    if (ak == 0.0) continue;
    for (std::size_t l = 0; l < t.qzp.size(); ++l) {
      const double w = ak * t.enc_x.at(x, l);
      if (w == 0.0) continue;
      terms.push_back(std::log(w) + log_prior_ratio(inst, t, k, l));
    }
  }
  return logsumexp(terms) + const_term_at(t, c, x);
}

// Inverse-CDF draw over a probability vector; the final positive cell
// absorbs any rounding shortfall.
std::size_t draw_index(const std::vector<double>& probs, double u) {
  double cum = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last_positive = i;
    cum += probs[i];
    if (u < cum) return i;
  }
  return last_positive;
}

}  // namespace

double unstructured_elbo(const FiniteDistribution& ptrue, const Encoder& enc,
                         const FiniteDistribution& prior_z, std::size_t x) {
  if (enc.given_space() != ptrue.space()) {
    throw ValidationError("encoder given-space must match the data space");
  }
  if (prior_z.space() != enc.target_space()) {
    throw ValidationError("prior space must match the encoder target space");
  }
  const Matrix rows = enc.probabilities();
  // Induced marginal Q(k) = sum_x Q(k|x) Ptrue(x).
  std::vector<double> qz(prior_z.size(), 0.0);
  for (std::size_t xi = 0; xi < ptrue.size(); ++xi) {
    for (std::size_t k = 0; k < qz.size(); ++k) {
      qz[k] += rows.at(xi, k) * ptrue.prob(xi);
    }
  }
  double acc = std::log(ptrue.prob(x));
  for (std::size_t k = 0; k < qz.size(); ++k) {
    const double w = rows.at(x, k);
    if (w == 0.0) continue;
    if (prior_z.prob(k) == 0.0 || qz[k] == 0.0) {
      throw AbsoluteContinuityError(prior_z.space().label(k));
    }
    acc += w * (std::log(prior_z.prob(k)) - std::log(qz[k]));
  }
  return acc;
}

UnstructuredElboParts expected_unstructured_elbo(
    const FiniteDistribution& ptrue, const Encoder& enc,
    const FiniteDistribution& prior_z) {
  if (enc.given_space() != ptrue.space()) {
    throw ValidationError("encoder given-space must match the data space");
  }
  if (prior_z.space() != enc.target_space()) {
    throw ValidationError("prior space must match the encoder target space");
  }
  const Matrix rows = enc.probabilities();
  std::vector<double> qz(prior_z.size(), 0.0);
  double const_part = 0.0;
  for (std::size_t x = 0; x < ptrue.size(); ++x) {
    const double w = ptrue.prob(x);
    if (w == 0.0) continue;
    const_part += w * std::log(w);
    for (std::size_t k = 0; k < qz.size(); ++k) {
      qz[k] += rows.at(x, k) * w;
    }
  }
  const double kl_part =
      kl_divergence(FiniteDistribution(prior_z.space(), qz), prior_z);
  return UnstructuredElboParts{const_part - kl_part, kl_part, const_part};
}

StructuredElbo structured_elbo(const ModelInstance& inst, std::size_t c,
                               std::size_t x) {
  return structured_elbo_impl(inst, derive(inst), c, x);
}

double model_evidence(const ModelInstance& inst, std::size_t c,
                      std::size_t x) {
  return model_evidence_impl(inst, derive(inst), c, x);
}

double expected_structured_elbo(const ModelInstance& inst) {
  const DerivedTables t = derive(inst);
  const JointDistribution& data = inst.data_joint();
  double acc = 0.0;
  for (std::size_t c = 0; c < data.rows(); ++c) {
    for (std::size_t x = 0; x < data.cols(); ++x) {
      const double w = data.prob(c, x);
      if (w == 0.0) continue;
      acc += w * structured_elbo_impl(inst, t, c, x).elbo;
    }
  }
  return acc;
}

double expected_const(const ModelInstance& inst) {
  const FiniteDistribution dc = marginalize(inst.data_joint(), Axis::Row);
  const FiniteDistribution dx = marginalize(inst.data_joint(), Axis::Col);
  const JointDistribution& data = inst.data_joint();
  double acc = 0.0;
  for (std::size_t c = 0; c < data.rows(); ++c) {
    for (std::size_t x = 0; x < data.cols(); ++x) {
      const double w = data.prob(c, x);
      if (w == 0.0) continue;
      acc += w * (std::log(dc.prob(c)) + std::log(dx.prob(x)));
    }
  }
  return acc;
}

ElboDecompositionParts elbo_decomposition(const ModelInstance& inst) {
  const DerivedTables t = derive(inst);
  const double mi = mutual_information(t.qzz);
  const double kl = kl_divergence(t.qzz, t.prior);
  return ElboDecompositionParts{mi, kl, expected_const(inst),
                                expected_structured_elbo(inst)};
}

double infonce_log_ratio(const ModelInstance& inst, std::size_t k,
                         std::size_t l) {
  const CouplingFunction& f = inst.prior().coupling();
  const FiniteDistribution qzp = induced_latent_marginal(inst, Side::X);
  std::vector<double> terms;
  terms.reserve(qzp.size());
  for (std::size_t lp = 0; lp < qzp.size(); ++lp) {
    if (qzp.prob(lp) == 0.0) continue;
    terms.push_back(std::log(qzp.prob(lp)) + f.log_value(k, lp));
  }
  return f.log_value(k, l) - logsumexp(terms);
}

double infonce_exact(const ModelInstance& inst) {
  const CouplingFunction& f = inst.prior().coupling();
  const FiniteDistribution qz = induced_latent_marginal(inst, Side::C);
  const FiniteDistribution qzp = induced_latent_marginal(inst, Side::X);
  const JointDistribution qzz = induced_latent_joint(inst);
  double positive_term = 0.0;
  for (std::size_t k = 0; k < qz.size(); ++k) {
    for (std::size_t l = 0; l < qzp.size(); ++l) {
      const double w = qzz.prob(k, l);
      if (w == 0.0) continue;
      positive_term += w * f.log_value(k, l);
    }
  }
  double normalizer_term = 0.0;
  for (std::size_t k = 0; k < qz.size(); ++k) {
    if (qz.prob(k) == 0.0) continue;
    std::vector<double> terms;
    terms.reserve(qzp.size());
    for (std::size_t l = 0; l < qzp.size(); ++l) {
      if (qzp.prob(l) == 0.0) continue;
      terms.push_back(std::log(qzp.prob(l)) + f.log_value(k, l));
    }
    normalizer_term += qz.prob(k) * logsumexp(terms);
  }
  return positive_term - normalizer_term;
}

FiniteNEstimate infonce_finite_n(const ModelInstance& inst,
                                 std::size_t n_negatives,
                                 std::size_t n_monte_carlo,
                                 std::uint64_t seed) {
  if (n_negatives < 1 || n_monte_carlo < 1) {
    throw ValidationError("finite-N estimator needs n_negatives >= 1 and "
                          "n_monte_carlo >= 1");
  }
  const CouplingFunction& f = inst.prior().coupling();
  const FiniteDistribution qzp = induced_latent_marginal(inst, Side::X);
  const JointDistribution qzz = induced_latent_joint(inst);

  const std::size_t zp_count = qzp.size();
  std::vector<double> joint_flat(qzz.rows() * zp_count);
  for (std::size_t k = 0; k < qzz.rows(); ++k) {
    for (std::size_t l = 0; l < zp_count; ++l) {
      joint_flat[k * zp_count + l] = qzz.prob(k, l);
    }
  }

  SplitMix64 rng(seed);
  const double log_n = std::log(static_cast<double>(n_negatives));
  std::vector<double> samples;
  samples.reserve(n_monte_carlo);
  std::vector<double> log_scores(n_negatives + 1);
  for (std::size_t rep = 0; rep < n_monte_carlo; ++rep) {
    const std::size_t cell = draw_index(joint_flat, rng.next_double());
    const std::size_t k = cell / zp_count;
    const std::size_t l = cell % zp_count;
    log_scores[0] = f.log_value(k, l);
    for (std::size_t j = 0; j < n_negatives; ++j) {
      const std::size_t neg = draw_index(qzp.probs(), rng.next_double());
      log_scores[j + 1] = f.log_value(k, neg);
    }
    samples.push_back(log_scores[0] - logsumexp(log_scores) + log_n);
  }
  const double n = static_cast<double>(n_monte_carlo);
  double sum = 0.0;
  for (double v : samples) sum += v;
  const double mean = sum / n;
  double std_error = 0.0;
  if (n_monte_carlo > 1) {
    double sq = 0.0;
    for (double v : samples) sq += (v - mean) * (v - mean);
    std_error = std::sqrt(sq / (n - 1.0) / n);
  }
  return FiniteNEstimate{mean, std_error};
}

ObjectiveReport compute_objective_report(const ModelInstance& inst) {
  const DerivedTables t = derive(inst);
  const JointDistribution& data = inst.data_joint();
  ObjectiveReport report;
  report.expected_const_term = expected_const(inst);
  report.mi_term = mutual_information(t.qzz);
  report.kl_to_prior = kl_divergence(t.qzz, t.prior);
  double expected = 0.0;
  for (std::size_t c = 0; c < data.rows(); ++c) {
    for (std::size_t x = 0; x < data.cols(); ++x) {
      const StructuredElbo e = structured_elbo_impl(inst, t, c, x);
      const double ev = model_evidence_impl(inst, t, c, x);
      report.pair_labels.push_back(data.row_space().label(c) + "|" +
                                   data.col_space().label(x));
      report.pointwise_elbo.push_back(e.elbo);
      report.pointwise_const.push_back(e.const_term);
      report.pointwise_evidence.push_back(ev);
      report.pointwise_gap.push_back(ev - e.elbo);
      if (data.prob(c, x) > 0.0) {
        expected += data.prob(c, x) * e.elbo;
      }
    }
  }
  report.expected_elbo = expected;
  return report;
}

std::vector<std::pair<std::string, std::string>> serialize_report(
    const ObjectiveReport& report) {
  std::vector<std::pair<std::string, std::string>> out;
  out.reserve(4 * report.pair_labels.size() + 4);
  out.emplace_back("expected_elbo", format_real(report.expected_elbo));
  out.emplace_back("expected_const", format_real(report.expected_const_term));
  out.emplace_back("mi_term", format_real(report.mi_term));
  out.emplace_back("kl_to_prior", format_real(report.kl_to_prior));
  for (std::size_t i = 0; i < report.pair_labels.size(); ++i) {
    const std::string& label = report.pair_labels[i];
    out.emplace_back("elbo[" + label + "]",
                     format_real(report.pointwise_elbo[i]));
    out.emplace_back("const[" + label + "]",
                     format_real(report.pointwise_const[i]));
    out.emplace_back("evidence[" + label + "]",
                     format_real(report.pointwise_evidence[i]));
    out.emplace_back("gap[" + label + "]",
                     format_real(report.pointwise_gap[i]));
  }
  return out;
}

}  // namespace ssvae
