#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ssvae/model.hpp"
#include "ssvae/prob.hpp"
#include "ssvae/ratio.hpp"

using namespace ssvae;

namespace {

FiniteDistribution make_dist(std::vector<double> probs) {
  const std::size_t n = probs.size();
  return FiniteDistribution(labeled_range("a", n), std::move(probs));
}

// Tight tolerance for tests that compare converged logits to exact ratios.
// Below ~1.5e-9 the loss hits its double-precision resolution and the
// gradient can no longer be certified against it.
FitConfig tight_config() {
  FitConfig config;
  config.tolerance = 2e-9;
  return config;
}

JointDistribution seeded_induced_joint(std::uint64_t seed) {
  return induced_latent_joint(random_instance({4, 4, 3, 3}, seed));
}

}  // namespace

TEST_CASE("equal distributions fit to zero logits") {
  const auto p = make_dist({0.3, 0.45, 0.25});
  const auto clf = fit_ratio_classifier(p, p);
  for (std::size_t i = 0; i < clf.size(); ++i) {
    CHECK(std::abs(clf.logit(i)) < 1e-6);
  }
}

TEST_CASE("closed-form logistic optimum") {
  const auto p = make_dist({0.8, 0.2});
  const auto q = make_dist({0.5, 0.5});
  const auto clf = fit_ratio_classifier(p, q, tight_config());
  CHECK(clf.logit(0) == doctest::Approx(std::log(1.6)).epsilon(1e-6));
  CHECK(clf.logit(1) == doctest::Approx(std::log(0.4)).epsilon(1e-6));
}

TEST_CASE("joint-vs-product logits recover the exact log-ratio") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto joint = seeded_induced_joint(seed);
    const auto product = product_of_marginals(joint);
    const auto clf = fit_ratio_classifier(joint, product, tight_config());
    for (std::size_t i = 0; i < joint.rows(); ++i) {
      for (std::size_t j = 0; j < joint.cols(); ++j) {
        const double p = joint.prob(i, j);
        const double q = product.prob(i, j);
        if (std::min(p, q) <= 1e-9) continue;
        const double exact = std::log(p / q);
        CHECK(std::abs(clf.logit(i * joint.cols() + j) - exact) < 1e-6);
      }
    }
  }
}

TEST_CASE("estimated MI of a product joint is zero") {
  const auto joint = product_of_marginals(seeded_induced_joint(3));
  const auto product = product_of_marginals(joint);
  const auto clf = fit_ratio_classifier(joint, product, tight_config());
  CHECK(std::abs(estimated_mutual_information(clf, joint)) < 1e-6);
}

TEST_CASE("estimated MI of a perfectly correlated bit is ln 2") {
  Matrix m(2, 2, 0.0);
  m.at(0, 0) = 0.5;
  m.at(1, 1) = 0.5;
  const JointDistribution diag(labeled_range("z", 2), labeled_range("zp", 2),
                               std::move(m));
  const auto product = product_of_marginals(diag);
  // Off-diagonal cells have p = 0; their logits run to large negatives but
  // carry no weight in the MI expectation.
  const auto clf = fit_ratio_classifier(diag, product, tight_config());
  CHECK(estimated_mutual_information(clf, diag) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-5));
}

TEST_CASE("estimated MI matches exact MI on seeded joints") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto joint = seeded_induced_joint(seed + 100);
    const auto clf =
        fit_ratio_classifier(joint, product_of_marginals(joint), tight_config());
    const double estimated = estimated_mutual_information(clf, joint);
    CHECK(std::abs(estimated - mutual_information(joint)) < 1e-5);
  }
}

TEST_CASE("swapping p and q negates the logits") {
  const auto p = make_dist({0.7, 0.1, 0.2});
  const auto q = make_dist({0.2, 0.5, 0.3});
  const auto forward = fit_ratio_classifier(p, q, tight_config());
  const auto backward = fit_ratio_classifier(q, p, tight_config());
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(std::abs(forward.logit(i) + backward.logit(i)) < 1e-6);
  }
}

TEST_CASE("loss is non-increasing across accepted steps") {
  const auto joint = seeded_induced_joint(9);
  const auto product = product_of_marginals(joint);
  std::vector<double> losses;
  FitConfig config;
  config.loss_observer = [&losses](double loss) { losses.push_back(loss); };
  fit_ratio_classifier(joint, product, config);
  REQUIRE(losses.size() > 1);
  for (std::size_t i = 1; i < losses.size(); ++i) {
    CHECK(losses[i] <= losses[i - 1]);
  }
}

TEST_CASE("iteration cap raises NonConvergence with the gradient norm") {
  const auto p = make_dist({0.8, 0.2});
  const auto q = make_dist({0.5, 0.5});
  FitConfig config;
  config.max_iterations = 2;
  config.tolerance = 1e-14;
  try {
    fit_ratio_classifier(p, q, config);
    FAIL("expected NonConvergenceError");
  } catch (const NonConvergenceError& e) {
    CHECK(e.iterations() == 2);
    CHECK(e.final_gradient_norm() > 1e-14);
  }
}

TEST_CASE("mismatched spaces are rejected") {
  const auto p = make_dist({0.5, 0.5});
  const FiniteDistribution q(labeled_range("b", 2), {0.5, 0.5});
  CHECK_THROWS_AS(fit_ratio_classifier(p, q), ValidationError);
}

TEST_CASE("classifier carries labels and fit metadata") {
  const auto joint = seeded_induced_joint(4);
  const auto clf = fit_ratio_classifier(joint, product_of_marginals(joint));
  CHECK(clf.size() == 9);
  CHECK(clf.cell_label(0) == "z0|zp0");
  CHECK(clf.final_gradient_norm() < 1e-8);
  CHECK(clf.iterations() > 0);
}
