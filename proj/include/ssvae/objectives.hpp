#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ssvae/model.hpp"
#include "ssvae/prob.hpp"

namespace ssvae {

/// Single-view ELBO at one data point:
///   L(x) = log Ptrue(x) + sum_k Q(k|x) log(P(k) / Q(k))
/// with Q(k) the marginal induced by pushing Ptrue through the encoder.
/// Raises AbsoluteContinuityError if P(k) = 0 (or Q(k) = 0) on a latent the
/// posterior reaches.
double unstructured_elbo(const FiniteDistribution& ptrue, const Encoder& enc,
                         const FiniteDistribution& prior_z, std::size_t x);

struct UnstructuredElboParts {
  double value;       // const_part - kl_part
  double kl_part;     // KL(Q(z) || P(z))
  double const_part;  // sum_x Ptrue(x) log Ptrue(x)
};

/// Expectation of the single-view ELBO over the data distribution, split
/// into its data-entropy constant and the latent-marginal KL.
UnstructuredElboParts expected_unstructured_elbo(
    const FiniteDistribution& ptrue, const Encoder& enc,
    const FiniteDistribution& prior_z);

struct StructuredElbo {
  double elbo;
  double const_term;  // log Ptrue(c) + log Ptrue(x')
};

/// Two-view ELBO at one (c, x') pair:
///   L(c,x') = sum_{k,l} Q(k|c) Q(l|x') log( P(k,l) / (Q(z)_k Q(z')_l) )
///           + log Ptrue(c) + log Ptrue(x')
/// with P the resolved prior. Exact summation over the latent grid.
StructuredElbo structured_elbo(const ModelInstance& inst, std::size_t c,
                               std::size_t x);

/// Exact model evidence at one (c, x') pair (the same expression as the
/// ELBO but with the log outside the expectation):
///   log P(c,x') = log sum_{k,l} Q(k|c) Q(l|x') P(k,l) / (Q(z)_k Q(z')_l)
///               + log Ptrue(c) + log Ptrue(x')
double model_evidence(const ModelInstance& inst, std::size_t c, std::size_t x);

/// Expected two-view ELBO over the data distribution (pairs with zero data
/// probability contribute nothing).
double expected_structured_elbo(const ModelInstance& inst);

/// The data-only constant in expectation:
/// sum_{c,x'} Ptrue(c,x') [log Ptrue(c) + log Ptrue(x')].
double expected_const(const ModelInstance& inst);

struct ElboDecompositionParts {
  double mi_term;      // mutual information of the induced latent joint
  double kl_to_prior;  // KL(Q(z,z') || resolved prior)
  double const_term;   // expected_const
  double total;        // expected_structured_elbo, computed independently
};

/// Expected ELBO split as mutual information minus prior KL plus constant.
/// `total` is computed by direct expectation of the pointwise ELBO so that
/// mi_term - kl_to_prior + const_term = total is a checkable identity, not
/// a definition.
ElboDecompositionParts elbo_decomposition(const ModelInstance& inst);

/// log of the resolved InfoNCE prior to marginal-product ratio at one cell,
/// computed directly from the coupling:
///   log f(k,l) - log sum_l' Q(z')_l' f(k,l').
/// Requires the instance to carry an InfoNCE prior.
double infonce_log_ratio(const ModelInstance& inst, std::size_t k,
                         std::size_t l);

/// Exact infinite-sample contrastive objective:
///   sum_{k,l} Q(z,z')_{kl} log f(k,l) - sum_k Q(z)_k log Z_k,
/// with Z_k = sum_l Q(z')_l f(k,l). Requires an InfoNCE prior.
double infonce_exact(const ModelInstance& inst);

struct FiniteNEstimate {
  double estimate;
  double std_error;  // sample standard deviation / sqrt(n_monte_carlo)
};

/// Monte-Carlo contrastive bound with n_negatives negatives:
///   E[ log( f(z,z') / (f(z,z') + sum_j f(z,z'_j)) ) ] + log(n_negatives)
/// with the positive pair (z,z') drawn from Q(z,z') and negatives z'_j drawn
/// i.i.d. from Q(z'). All draws are inverse-CDF over the finite tables using
/// SplitMix64(seed); each replicate consumes one uniform for the positive
/// pair (row-major over the latent grid) and one per negative, in order.
FiniteNEstimate infonce_finite_n(const ModelInstance& inst,
                                 std::size_t n_negatives,
                                 std::size_t n_monte_carlo,
                                 std::uint64_t seed);

/// Everything the objectives produce for one model instance, pointwise and
/// in expectation. Pair vectors are row-major over the data grid.
struct ObjectiveReport {
  std::vector<std::string> pair_labels;
  std::vector<double> pointwise_elbo;
  std::vector<double> pointwise_const;
  std::vector<double> pointwise_evidence;
  std::vector<double> pointwise_gap;  // evidence - elbo
  double expected_elbo = 0.0;
  double expected_const_term = 0.0;
  double mi_term = 0.0;
  double kl_to_prior = 0.0;
};

ObjectiveReport compute_objective_report(const ModelInstance& inst);

/// Flat key-value form of a report for the CLI report writer.
std::vector<std::pair<std::string, std::string>> serialize_report(
    const ObjectiveReport& report);

}  // namespace ssvae
