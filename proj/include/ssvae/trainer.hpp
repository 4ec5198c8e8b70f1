#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "ssvae/model.hpp"

namespace ssvae {

/// Trainable scalar objectives. The elbo-* selectors require the instance's
/// prior to be of the matching kind; infonce-exact requires an InfoNCE
/// prior; unstructured uses the c-side view and the z-marginal of the prior.
enum class ObjectiveSelector {
  ElboTable,     // expected two-view ELBO, explicit-table prior
  ElboMi,        // expected two-view ELBO, implicit MI prior
  ElboInfoNce,   // expected two-view ELBO, InfoNCE prior
  InfoNceExact,  // exact contrastive objective (no data constant)
  Unstructured,  // expected single-view ELBO on the c side
};

/// Flattening of every trainable parameter of an instance into one vector,
/// with a fixed block order:
///   1. encoder_c logits, row-major (softmax encoders only);
///   2. encoder_x logits, row-major (softmax encoders only);
///   3. prior parameters: explicit-table grid logits row-major, or for a
///      bilinear InfoNCE coupling the z embeddings, z' embeddings, then the
///      weight matrix, each row-major.
/// Deterministic encoders and table couplings contribute no parameters.
/// flatten followed by apply round-trips bit-identically.
class ParameterLayout {
 public:
  explicit ParameterLayout(const ModelInstance& inst);

  std::size_t size() const { return size_; }
  std::vector<double> flatten(const ModelInstance& inst) const;
  ModelInstance apply(const ModelInstance& proto,
                      const std::vector<double>& params) const;

  bool encoder_c_trainable() const { return encoder_c_count_ > 0; }
  bool encoder_x_trainable() const { return encoder_x_count_ > 0; }

 private:
  friend std::vector<double> objective_gradient(const ModelInstance&,
                                                const std::vector<double>&,
                                                ObjectiveSelector);
  std::size_t encoder_c_count_ = 0;
  std::size_t encoder_x_count_ = 0;
  std::size_t prior_count_ = 0;  // grid logits or coupling block
  std::size_t size_ = 0;
};

/// Objective value at the instance's own parameters.
double objective_value(const ModelInstance& inst, ObjectiveSelector objective);

/// Objective value at the given flattened parameters.
double objective_value(const ModelInstance& inst,
                       const std::vector<double>& params,
                       ObjectiveSelector objective);

/// Exact gradient of the objective with respect to every trainable
/// parameter, differentiating through the induced marginals, the induced
/// joint, lazily resolved priors, and the InfoNCE normalizer.
std::vector<double> objective_gradient(const ModelInstance& inst,
                                       const std::vector<double>& params,
                                       ObjectiveSelector objective);

/// Central finite differences of an arbitrary scalar function (test oracle).
std::vector<double> finite_difference_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& params, double h);

/// Central finite differences of a selected objective (test oracle).
std::vector<double> finite_difference_gradient(const ModelInstance& inst,
                                               const std::vector<double>& params,
                                               ObjectiveSelector objective,
                                               double h);

struct TrainConfig {
  ObjectiveSelector objective = ObjectiveSelector::ElboMi;
  double step_size = 1.0;  // initial ascent step; adapted by backtracking
  std::size_t max_iterations = 5000;
  double gradient_tolerance = 1e-6;
  std::uint64_t seed = 0;  // used by generator-backed runs, not by train()
};

/// One accepted ascent step. `objective` and `diagnostic` describe the
/// state after the step; `gradient_norm` is the max-norm of the gradient
/// the step followed; `step_size` is the accepted step length.
struct TrainStep {
  std::size_t iteration;
  double objective;
  double gradient_norm;
  double step_size;
  double diagnostic;  // NaN when no diagnostic is installed
};

struct TrainTrace {
  double initial_objective;
  double initial_diagnostic;
  std::vector<TrainStep> steps;
  std::vector<double> final_params;
  ModelInstance final_instance;
  bool converged;  // gradient tolerance met before the iteration cap
};

using DiagnosticFn = std::function<double(const ModelInstance&)>;

/// Gradient ascent with backtracking step halving (the trial step doubles
/// after each accepted iteration). Accepted steps never decrease the
/// objective. Terminates when the gradient max-norm drops below tolerance
/// (converged) or at the iteration cap (not converged); a run whose
/// backtracking underflows also reports not converged. Deterministic:
/// the trace is a pure function of (instance, config).
TrainTrace train(const ModelInstance& inst, const TrainConfig& config,
                 const DiagnosticFn& diagnostic = {});

/// Build a shared-factor model with latent_count latents per side and the
/// prior the objective calls for, then train it, recording the exact mutual
/// information between the c-side latent and the hidden factor s as the
/// per-iteration diagnostic.
///
/// Draw sequence from SplitMix64(seed), all entries 0.1 * next_symmetric():
/// encoder_c logits row-major, encoder_x logits row-major, then for InfoNCE
/// objectives the coupling (z embeddings, z' embeddings, weight, row-major,
/// embedding dimension = latent_count), or for table-prior objectives the
/// grid logits row-major.
TrainTrace shared_factor_experiment(std::size_t s_count,
                                    std::size_t noise_count,
                                    double noise_level,
                                    std::size_t latent_count,
                                    ObjectiveSelector objective,
                                    std::uint64_t seed,
                                    std::optional<TrainConfig> config = {});

}  // namespace ssvae
