#include "ssvae/ratio.hpp"

#include <cmath>
#include <utility>

#include "ssvae/errors.hpp"

namespace ssvae {

namespace {

// softplus(x) = log(1 + e^x), stable for large |x|.
double softplus(double x) {
  return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct Problem {
  const std::vector<double>& p;
  const std::vector<double>& q;
  const std::vector<bool>& trained;
};

double expected_loss(const Problem& prob, const std::vector<double>& t) {
  double loss = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!prob.trained[i]) continue;
    loss += 0.5 * (prob.p[i] * softplus(-t[i]) + prob.q[i] * softplus(t[i]));
  }
  return loss;
}

void gradient(const Problem& prob, const std::vector<double>& t,
              std::vector<double>& g) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    g[i] = prob.trained[i]
               ? 0.5 * (prob.q[i] * sigmoid(t[i]) - prob.p[i] * sigmoid(-t[i]))
               : 0.0;
  }
}

double max_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

TabularLogitClassifier fit_flat(const std::vector<double>& p,
                                const std::vector<double>& q,
                                std::vector<std::string> labels,
                                const FitConfig& config) {
  if (p.size() != q.size()) {
    throw ValidationError("ratio fit requires equal support shapes");
  }
  if (config.initial_step <= 0.0 || config.tolerance <= 0.0) {
    throw ValidationError("fit config needs positive step and tolerance");
  }
  // Cells with one-sided (or no) support have no finite optimum; they are
  // left out of the trained set and keep logit 0.
  std::vector<bool> trained(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    trained[i] = std::min(p[i], q[i]) > kRatioSupportMask;
  }
  const Problem prob{p, q, trained};

  std::vector<double> t(p.size(), 0.0);
  std::vector<double> g(p.size(), 0.0);
  std::vector<double> candidate(p.size(), 0.0);
  double loss = expected_loss(prob, t);
  double step = config.initial_step;
  double grad_norm = 0.0;
  for (std::size_t iter = 0; iter < config.max_iterations; ++iter) {
    gradient(prob, t, g);
    grad_norm = max_norm(g);
    if (grad_norm < config.tolerance) {
      return TabularLogitClassifier(std::move(labels), std::move(t),
                                    std::move(trained), iter, grad_norm);
    }
    double g_sq = 0.0;
    for (double gi : g) g_sq += gi * gi;
    // Backtracking with the sufficient-decrease rule; the previous accepted
    // step seeds the next trial at twice its size. Plain non-increase would
    // let the step ride the stability boundary, where iterates oscillate
    // across the optimum instead of contracting.
    step *= 2.0;
    while (true) {
      for (std::size_t i = 0; i < t.size(); ++i) {
        candidate[i] = t[i] - step * g[i];
      }
      const double candidate_loss = expected_loss(prob, candidate);
      if (std::isfinite(candidate_loss) &&
          candidate_loss <= loss - 0.5 * step * g_sq) {
        t.swap(candidate);
        loss = candidate_loss;
        break;
      }
      step *= 0.5;
      if (step < 1e-300) {
        throw NonConvergenceError(iter, grad_norm);
      }
    }
    if (config.loss_observer) config.loss_observer(loss);
  }
  gradient(prob, t, g);
  grad_norm = max_norm(g);
  if (grad_norm < config.tolerance) {
    return TabularLogitClassifier(std::move(labels), std::move(t),
                                  std::move(trained), config.max_iterations,
                                  grad_norm);
  }
  throw NonConvergenceError(config.max_iterations, grad_norm);
}

}  // namespace

TabularLogitClassifier::TabularLogitClassifier(
    std::vector<std::string> cell_labels, std::vector<double> logits,
    std::vector<bool> trained, std::size_t iterations,
    double final_gradient_norm)
    : labels_(std::move(cell_labels)),
      logits_(std::move(logits)),
      trained_(std::move(trained)),
      iterations_(iterations),
      final_gradient_norm_(final_gradient_norm) {
  if (labels_.size() != logits_.size() || trained_.size() != logits_.size()) {
    throw ValidationError("classifier labels and logits size mismatch");
  }
}

TabularLogitClassifier fit_ratio_classifier(const FiniteDistribution& p,
                                            const FiniteDistribution& q,
                                            const FitConfig& config) {
  if (p.space() != q.space()) {
    throw ValidationError("ratio fit requires matching spaces");
  }
  return fit_flat(p.probs(), q.probs(), p.space().labels(), config);
}

TabularLogitClassifier fit_ratio_classifier(const JointDistribution& p,
                                            const JointDistribution& q,
                                            const FitConfig& config) {
  if (p.row_space() != q.row_space() || p.col_space() != q.col_space()) {
    throw ValidationError("ratio fit requires matching spaces");
  }
  std::vector<std::string> labels;
  labels.reserve(p.rows() * p.cols());
  for (std::size_t i = 0; i < p.rows(); ++i) {
    for (std::size_t j = 0; j < p.cols(); ++j) {
      labels.push_back(p.row_space().label(i) + "|" + p.col_space().label(j));
    }
  }
  return fit_flat(p.table().data, q.table().data, std::move(labels), config);
}

std::size_t TabularLogitClassifier::trained_cell_count() const {
  std::size_t n = 0;
  for (bool b : trained_) n += b ? 1 : 0;
  return n;
}

double estimated_mutual_information(const TabularLogitClassifier& classifier,
                                    const JointDistribution& p) {
  if (classifier.size() != p.rows() * p.cols()) {
    throw ValidationError("classifier shape does not match the joint");
  }
  double mi = 0.0;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    for (std::size_t j = 0; j < p.cols(); ++j) {
      const std::size_t cell = i * p.cols() + j;
      if (!classifier.cell_trained(cell)) continue;  // masked support
      mi += p.prob(i, j) * classifier.logit(cell);
    }
  }
  return mi;
}

}  // namespace ssvae
