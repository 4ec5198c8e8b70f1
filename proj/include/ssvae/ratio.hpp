#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "ssvae/prob.hpp"

namespace ssvae {

/// Cells where either side carries at most this much mass have a divergent
/// or undefined optimal logit. They are excluded from the trained cell set
/// (their logit stays 0), from convergence checks, and from optimality
/// comparisons; MI estimates run on the remaining (masked) support.
inline constexpr double kRatioSupportMask = 1e-9;

/// Options for the logistic ratio fit. The loss is convex in the logits, so
/// plain full-batch gradient descent with backtracking suffices; tolerance
/// is on the gradient max-norm over the trained cells.
struct FitConfig {
  double initial_step = 1.0;
  double tolerance = 1e-8;
  std::size_t max_iterations = 100000;
  /// Observes the expected loss after every accepted step (test hook).
  std::function<void(double)> loss_observer;
};

/// One logit per cell of the classified space. After a converged fit
/// against distributions p and q, logit_i approximates log(p_i / q_i) on
/// every trained cell (both masses above kRatioSupportMask).
class TabularLogitClassifier {
 public:
  TabularLogitClassifier(std::vector<std::string> cell_labels,
                         std::vector<double> logits, std::vector<bool> trained,
                         std::size_t iterations, double final_gradient_norm);

  std::size_t size() const { return logits_.size(); }
  double logit(std::size_t i) const { return logits_[i]; }
  const std::vector<double>& logits() const { return logits_; }
  bool cell_trained(std::size_t i) const { return trained_[i]; }
  std::size_t trained_cell_count() const;
  const std::string& cell_label(std::size_t i) const { return labels_[i]; }
  std::size_t iterations() const { return iterations_; }
  double final_gradient_norm() const { return final_gradient_norm_; }

 private:
  std::vector<std::string> labels_;
  std::vector<double> logits_;
  std::vector<bool> trained_;
  std::size_t iterations_;
  double final_gradient_norm_;
};

/// Fit per-cell logits against the exact expected logistic loss
///   L(t) = 1/2 sum_i [ p_i softplus(-t_i) + q_i softplus(t_i) ],
/// whose minimizer is t_i = log(p_i / q_i) wherever both masses are
/// positive. Throws NonConvergenceError at the iteration cap.
TabularLogitClassifier fit_ratio_classifier(const FiniteDistribution& p,
                                            const FiniteDistribution& q,
                                            const FitConfig& config = {});
TabularLogitClassifier fit_ratio_classifier(const JointDistribution& p,
                                            const JointDistribution& q,
                                            const FitConfig& config = {});

/// Plug the fitted logits into the mutual-information expectation:
/// sum_i p_i logit_i over the trained cells. With a classifier fitted on
/// (joint, product of its marginals) this estimates the joint's mutual
/// information on the masked support.
double estimated_mutual_information(const TabularLogitClassifier& classifier,
                                    const JointDistribution& p);

}  // namespace ssvae
