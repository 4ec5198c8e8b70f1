#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "ssvae/model.hpp"
#include "ssvae/objectives.hpp"
#include "ssvae/rng.hpp"

using namespace ssvae;

namespace {

JointDistribution make_joint(std::vector<std::vector<double>> rows) {
  const std::size_t nr = rows.size();
  const std::size_t nc = rows[0].size();
  Matrix m(nr, nc);
  for (std::size_t i = 0; i < nr; ++i) {
    for (std::size_t j = 0; j < nc; ++j) m.at(i, j) = rows[i][j];
  }
  return JointDistribution(labeled_range("c", nr), labeled_range("x", nc),
                           std::move(m));
}

// Explicit-table prior realizing exactly the product of the induced
// marginals (softmax of log-product logits reproduces the product).
PriorSpec product_prior(const ModelInstance& inst) {
  const auto qz = induced_latent_marginal(inst, Side::C);
  const auto qzp = induced_latent_marginal(inst, Side::X);
  Matrix logits(qz.size(), qzp.size());
  for (std::size_t k = 0; k < qz.size(); ++k) {
    for (std::size_t l = 0; l < qzp.size(); ++l) {
      logits.at(k, l) = std::log(qz.prob(k) * qzp.prob(l));
    }
  }
  return PriorSpec::explicit_table(std::move(logits));
}

// Coupling table equal to the exact density ratio Q(z,z') / (Q(z) Q(z')).
CouplingFunction exact_ratio_coupling(const ModelInstance& inst) {
  const auto qz = induced_latent_marginal(inst, Side::C);
  const auto qzp = induced_latent_marginal(inst, Side::X);
  const auto qzz = induced_latent_joint(inst);
  Matrix values(qz.size(), qzp.size());
  for (std::size_t k = 0; k < qz.size(); ++k) {
    for (std::size_t l = 0; l < qzp.size(); ++l) {
      values.at(k, l) = qzz.prob(k, l) / (qz.prob(k) * qzp.prob(l));
    }
  }
  return CouplingFunction::table(std::move(values));
}

// Replace each softmax encoder by the one-hot argmax of its rows.
ModelInstance deterministic_variant(const ModelInstance& inst) {
  auto harden = [](const Encoder& enc) {
    if (enc.is_deterministic()) return enc;
    const Matrix p = enc.probabilities();
    std::vector<std::size_t> map(p.rows, 0);
    for (std::size_t i = 0; i < p.rows; ++i) {
      double best = p.at(i, 0);
      for (std::size_t k = 1; k < p.cols; ++k) {
        if (p.at(i, k) > best) {
          best = p.at(i, k);
          map[i] = k;
        }
      }
    }
    return Encoder::deterministic(enc.given_space(), enc.target_space(),
                                  std::move(map));
  };
  return inst.with_encoders(harden(inst.encoder_c()),
                            harden(inst.encoder_x()));
}

}  // namespace

TEST_CASE("unstructured elbo: identity encoder with matched prior") {
  const auto data = make_joint({{0.4, 0.1}, {0.2, 0.3}});
  const auto ptrue = marginalize(data, Axis::Row);
  const Encoder enc = Encoder::deterministic(ptrue.space(),
                                             labeled_range("z", 2), {0, 1});
  // P(z) = Ptrue under the identity relabeling.
  const FiniteDistribution prior(enc.target_space(),
                                 {ptrue.prob(0), ptrue.prob(1)});
  for (std::size_t x = 0; x < 2; ++x) {
    CHECK(unstructured_elbo(ptrue, enc, prior, x) ==
          doctest::Approx(std::log(ptrue.prob(x))).epsilon(1e-12));
  }
}

TEST_CASE("unstructured elbo: prior equal to the induced marginal") {
  const ModelInstance inst = random_instance({4, 3, 3, 2}, 21);
  const auto ptrue = marginalize(inst.data_joint(), Axis::Row);
  const auto qz = induced_latent_marginal(inst, Side::C);
  const auto parts = expected_unstructured_elbo(ptrue, inst.encoder_c(), qz);
  CHECK(parts.kl_part == doctest::Approx(0.0).epsilon(1e-12));

  double elogp = 0.0;
  for (std::size_t x = 0; x < ptrue.size(); ++x) {
    elogp += ptrue.prob(x) * std::log(ptrue.prob(x));
  }
  CHECK(parts.value == doctest::Approx(elogp).epsilon(1e-12));
}

TEST_CASE("unstructured elbo: expectation equals const minus KL") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ModelInstance inst = random_instance({4, 3, 3, 2}, seed);
    const auto ptrue = marginalize(inst.data_joint(), Axis::Row);
    // An arbitrary strictly positive prior over z.
    SplitMix64 rng(seed + 999);
    std::vector<double> p(3);
    double total = 0.0;
    for (double& v : p) {
      v = 0.2 + rng.next_double();
      total += v;
    }
    for (double& v : p) v /= total;
    const FiniteDistribution prior(inst.latent_space(Side::C), p);

    const auto parts =
        expected_unstructured_elbo(ptrue, inst.encoder_c(), prior);
    double direct = 0.0;
    for (std::size_t x = 0; x < ptrue.size(); ++x) {
      direct += ptrue.prob(x) *
                unstructured_elbo(ptrue, inst.encoder_c(), prior, x);
    }
    CHECK(std::abs(parts.value - direct) < 1e-10);
    CHECK(parts.value == doctest::Approx(parts.const_part - parts.kl_part));
  }
}

TEST_CASE("expected unstructured elbo: collapsed encoder against uniform") {
  const auto data = make_joint({{0.2, 0.2}, {0.3, 0.3}});
  const auto ptrue = marginalize(data, Axis::Row);
  // Every data label maps to latent 0; prior uniform over 3 latents.
  const Encoder enc = Encoder::deterministic(ptrue.space(),
                                             labeled_range("z", 3), {0, 0});
  const FiniteDistribution prior =
      FiniteDistribution::uniform(enc.target_space());
  const auto parts = expected_unstructured_elbo(ptrue, enc, prior);
  CHECK(parts.kl_part == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("unstructured elbo: zero prior mass on a reached latent errors") {
  const auto data = make_joint({{0.4, 0.1}, {0.2, 0.3}});
  const auto ptrue = marginalize(data, Axis::Row);
  const Encoder enc = Encoder::deterministic(ptrue.space(),
                                             labeled_range("z", 2), {0, 1});
  const FiniteDistribution prior(enc.target_space(), {1.0, 0.0});
  CHECK_THROWS_AS(unstructured_elbo(ptrue, enc, prior, 1),
                  AbsoluteContinuityError);
}

TEST_CASE("structured elbo equals evidence for deterministic encoders") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ModelInstance hard =
        deterministic_variant(random_instance({4, 4, 3, 3}, seed));
    for (std::size_t c = 0; c < 4; ++c) {
      for (std::size_t x = 0; x < 4; ++x) {
        const double elbo = structured_elbo(hard, c, x).elbo;
        const double evidence = model_evidence(hard, c, x);
        CHECK(std::abs(elbo - evidence) < 1e-10);
      }
    }
  }
}

TEST_CASE("structured elbo: product prior zeroes the expected ratio term") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ModelInstance base = random_instance({4, 3, 3, 2}, seed);
    const ModelInstance inst = base.with_prior(product_prior(base));
    const double gap = expected_structured_elbo(inst) - expected_const(inst);
    CHECK(std::abs(gap) < 1e-10);
  }
}

TEST_CASE("Jensen: pointwise elbo never exceeds evidence") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const ModelInstance inst = random_instance({4, 4, 3, 3}, seed);
    double max_gap = 0.0;
    for (std::size_t c = 0; c < 4; ++c) {
      for (std::size_t x = 0; x < 4; ++x) {
        const double gap =
            model_evidence(inst, c, x) - structured_elbo(inst, c, x).elbo;
        CHECK(gap >= -1e-10);
        max_gap = std::max(max_gap, gap);
      }
    }
    // Stochastic encoders leave slack somewhere.
    CHECK(max_gap > 1e-12);
  }
}

TEST_CASE("evidence under the MI prior matches direct enumeration") {
  const ModelInstance inst =
      random_instance({3, 3, 2, 2}, 17).with_prior(
          PriorSpec::mutual_information());
  const auto qz = induced_latent_marginal(inst, Side::C);
  const auto qzp = induced_latent_marginal(inst, Side::X);
  const auto qzz = induced_latent_joint(inst);
  const Matrix a = inst.encoder_c().probabilities();
  const Matrix b = inst.encoder_x().probabilities();
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t x = 0; x < 3; ++x) {
      double expectation = 0.0;
      for (std::size_t k = 0; k < 2; ++k) {
        for (std::size_t l = 0; l < 2; ++l) {
          expectation += a.at(c, k) * b.at(x, l) * qzz.prob(k, l) /
                         (qz.prob(k) * qzp.prob(l));
        }
      }
      const double lhs = model_evidence(inst, c, x) -
                         structured_elbo(inst, c, x).const_term;
      CHECK(lhs == doctest::Approx(std::log(expectation)).epsilon(1e-10));
    }
  }
}

TEST_CASE("decomposition: MI prior leaves only the mutual information") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ModelInstance inst =
        random_instance({4, 4, 3, 3}, seed).with_prior(
            PriorSpec::mutual_information());
    const auto parts = elbo_decomposition(inst);
    CHECK(parts.kl_to_prior == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(std::abs(parts.total - parts.const_term - parts.mi_term) < 1e-10);
  }
}

TEST_CASE("decomposition: product prior cancels MI against the KL") {
  const ModelInstance base = random_instance({4, 3, 3, 2}, 31);
  const ModelInstance inst = base.with_prior(product_prior(base));
  const auto parts = elbo_decomposition(inst);
  CHECK(std::abs(parts.total - parts.const_term) < 1e-10);
  CHECK(parts.mi_term == doctest::Approx(parts.kl_to_prior).epsilon(1e-10));
}

TEST_CASE("decomposition balances for every prior kind") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const ModelInstance base = random_instance({4, 4, 3, 3}, seed);
    const std::vector<ModelInstance> variants = {
        base,
        base.with_prior(PriorSpec::mutual_information()),
        base.with_prior(
            PriorSpec::infonce(random_bilinear_coupling(3, 3, 2, seed + 77))),
    };
    for (const auto& inst : variants) {
      const auto parts = elbo_decomposition(inst);
      CHECK(std::abs(parts.mi_term - parts.kl_to_prior + parts.const_term -
                     parts.total) < 1e-10);
    }
  }
}

TEST_CASE("identity A: MI-prior expected elbo minus const is the MI") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const ModelInstance inst =
        random_instance({5, 4, 3, 4}, seed).with_prior(
            PriorSpec::mutual_information());
    const double lhs = expected_structured_elbo(inst) - expected_const(inst);
    const double mi = mutual_information(induced_latent_joint(inst));
    CHECK(std::abs(lhs - mi) < 1e-10);
  }
}

TEST_CASE("identity B: InfoNCE-prior expected elbo minus const is the "
          "contrastive objective") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const ModelInstance inst =
        random_instance({5, 4, 3, 4}, seed).with_prior(
            PriorSpec::infonce(random_bilinear_coupling(3, 4, 2, seed + 13)));
    const double lhs = expected_structured_elbo(inst) - expected_const(inst);
    CHECK(std::abs(lhs - infonce_exact(inst)) < 1e-10);
  }
}

TEST_CASE("infonce log ratio: constant coupling vanishes") {
  const ModelInstance inst =
      random_instance({3, 3, 2, 2}, 3).with_prior(
          PriorSpec::infonce(CouplingFunction::constant(2, 2, 4.0)));
  for (std::size_t k = 0; k < 2; ++k) {
    for (std::size_t l = 0; l < 2; ++l) {
      CHECK(infonce_log_ratio(inst, k, l) ==
            doctest::Approx(0.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("infonce log ratio: exact-ratio coupling gives the MI integrand") {
  const ModelInstance base = random_instance({4, 3, 3, 2}, 8);
  const ModelInstance inst =
      base.with_prior(PriorSpec::infonce(exact_ratio_coupling(base)));
  const auto qz = induced_latent_marginal(inst, Side::C);
  const auto qzp = induced_latent_marginal(inst, Side::X);
  const auto qzz = induced_latent_joint(inst);
  for (std::size_t k = 0; k < qz.size(); ++k) {
    for (std::size_t l = 0; l < qzp.size(); ++l) {
      const double integrand =
          std::log(qzz.prob(k, l) / (qz.prob(k) * qzp.prob(l)));
      CHECK(infonce_log_ratio(inst, k, l) ==
            doctest::Approx(integrand).epsilon(1e-10));
    }
  }
}

TEST_CASE("infonce log ratio agrees with the resolved-prior route") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ModelInstance inst =
        random_instance({4, 4, 3, 3}, seed).with_prior(
            PriorSpec::infonce(random_bilinear_coupling(3, 3, 2, seed + 5)));
    const auto prior = resolve_prior(inst);
    const auto qz = induced_latent_marginal(inst, Side::C);
    const auto qzp = induced_latent_marginal(inst, Side::X);
    for (std::size_t k = 0; k < 3; ++k) {
      for (std::size_t l = 0; l < 3; ++l) {
        const double via_prior =
            std::log(prior.prob(k, l) / (qz.prob(k) * qzp.prob(l)));
        CHECK(std::abs(infonce_log_ratio(inst, k, l) - via_prior) < 1e-10);
      }
    }
  }
}

TEST_CASE("infonce exact: constant coupling scores zero") {
  const ModelInstance inst =
      random_instance({3, 3, 2, 2}, 4).with_prior(
          PriorSpec::infonce(CouplingFunction::constant(2, 2, 7.0)));
  CHECK(infonce_exact(inst) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("infonce exact: exact-ratio coupling recovers the MI") {
  const ModelInstance base = random_instance({4, 3, 3, 2}, 12);
  const ModelInstance inst =
      base.with_prior(PriorSpec::infonce(exact_ratio_coupling(base)));
  const double mi = mutual_information(induced_latent_joint(inst));
  CHECK(infonce_exact(inst) == doctest::Approx(mi).epsilon(1e-10));
}

TEST_CASE("infonce exact is a lower bound on the latent MI") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const ModelInstance inst =
        random_instance({4, 4, 3, 3}, seed).with_prior(
            PriorSpec::infonce(random_bilinear_coupling(3, 3, 2, seed + 400)));
    const double mi = mutual_information(induced_latent_joint(inst));
    CHECK(infonce_exact(inst) <= mi + 1e-10);
  }
}

TEST_CASE("finite-N estimator: constant coupling has a closed form") {
  const ModelInstance inst =
      random_instance({3, 3, 2, 2}, 6).with_prior(
          PriorSpec::infonce(CouplingFunction::constant(2, 2, 3.0)));
  for (std::size_t n : {1u, 4u, 16u}) {
    const auto est = infonce_finite_n(inst, n, 200, 123);
    const double expected = std::log(double(n) / double(n + 1));
    CHECK(est.estimate == doctest::Approx(expected).epsilon(1e-12));
    CHECK(est.std_error < 1e-12);
  }
}

TEST_CASE("finite-N estimator: one-point latent space forces -ln 2") {
  const auto data = make_joint({{0.4, 0.1}, {0.2, 0.3}});
  const FiniteSpace one_z({"z0"});
  const FiniteSpace one_zp({"zp0"});
  const ModelInstance inst(
      data, Encoder::deterministic(data.row_space(), one_z, {0, 0}),
      Encoder::deterministic(data.col_space(), one_zp, {0, 0}),
      PriorSpec::infonce(CouplingFunction::constant(1, 1, 1.0)));
  const auto est = infonce_finite_n(inst, 1, 50, 7);
  CHECK(est.estimate == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
  CHECK(est.std_error < 1e-12);
}

TEST_CASE("finite-N estimator is deterministic in its seed") {
  const ModelInstance inst =
      random_instance({4, 4, 3, 3}, 9).with_prior(
          PriorSpec::infonce(random_bilinear_coupling(3, 3, 2, 10)));
  const auto a = infonce_finite_n(inst, 8, 500, 42);
  const auto b = infonce_finite_n(inst, 8, 500, 42);
  CHECK(a.estimate == b.estimate);
  CHECK(a.std_error == b.std_error);
  const auto c = infonce_finite_n(inst, 8, 500, 43);
  CHECK(a.estimate != c.estimate);
}

TEST_CASE("finite-N estimates converge to the exact objective") {
  const ModelInstance inst =
      random_instance({4, 4, 3, 3}, 2).with_prior(
          PriorSpec::infonce(random_bilinear_coupling(3, 3, 3, 2024)));
  const double exact = infonce_exact(inst);
  double previous_gap = std::numeric_limits<double>::infinity();
  for (std::size_t n : {1u, 4u, 16u, 64u, 256u}) {
    const auto est = infonce_finite_n(inst, n, 8000, 555);
    const double gap = std::abs(est.estimate - exact);
    CHECK(gap < previous_gap);
    previous_gap = gap;
  }
  const auto last = infonce_finite_n(inst, 256, 8000, 555);
  CHECK(std::abs(last.estimate - exact) < 3.0 * last.std_error + 0.02);
}

TEST_CASE("finite-N estimates stay below the exact value statistically") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ModelInstance inst =
        random_instance({4, 4, 3, 3}, seed).with_prior(
            PriorSpec::infonce(random_bilinear_coupling(3, 3, 2, seed + 31)));
    const double exact = infonce_exact(inst);
    for (std::size_t n : {1u, 8u, 64u}) {
      const auto est = infonce_finite_n(inst, n, 4000, seed * 7 + 1);
      CHECK(est.estimate <= exact + 3.0 * est.std_error);
    }
  }
}

TEST_CASE("the data constant is untouched by parameter changes") {
  const ModelInstance base = random_instance({4, 3, 3, 2}, 14);
  const ModelInstance perturbed = random_instance({4, 3, 3, 2}, 15);
  // Same data joint, different encoder and prior parameters.
  const ModelInstance other(base.data_joint(), perturbed.encoder_c(),
                            perturbed.encoder_x(), perturbed.prior());
  for (std::size_t c = 0; c < 4; ++c) {
    for (std::size_t x = 0; x < 3; ++x) {
      const double a = structured_elbo(base, c, x).const_term;
      const double b = structured_elbo(other, c, x).const_term;
      CHECK(a == b);  // bit-identical
    }
  }
  CHECK(expected_const(base) == expected_const(other));
}

TEST_CASE("objective report invariants") {
  const ModelInstance inst = random_instance({4, 4, 3, 3}, 19);
  const ObjectiveReport report = compute_objective_report(inst);
  REQUIRE(report.pair_labels.size() == 16);
  double expected = 0.0;
  for (std::size_t i = 0; i < 16; ++i) {
    CHECK(report.pointwise_gap[i] >= -1e-10);
    expected += inst.data_joint().prob(i / 4, i % 4) * report.pointwise_elbo[i];
  }
  CHECK(std::abs(expected - report.expected_elbo) < 1e-10);

  const auto kv = serialize_report(report);
  CHECK(kv.size() == 4 + 4 * 16);
  CHECK(kv[0].first == "expected_elbo");
}
