#include "doctest.h"

#include <cmath>
#include <random>

#include "hybridest/errors.hpp"
#include "hybridest/estimands.hpp"
#include "hybridest/ice_classifier.hpp"
#include "hybridest/simulator.hpp"
#include "support/fixtures.hpp"

using namespace hybridest;

namespace {

// Single-visit, two-arm bundle from (Y(0), Y(1), S(1)) triples.
TruthBundle bundle(const std::vector<std::array<double, 3>>& rows) {
  TruthBundle t;
  t.n_arms = 2;
  t.n_visits = 1;
  int id = 0;
  for (const auto& [y0, y1, s] : rows) {
    SubjectTruth st;
    st.id = "U" + std::to_string(++id);
    st.assigned = Arm{id % 2};
    st.potential = {{y0}, {y1}};
    st.policy = {{y0}, {y1}};
    st.safety_ice = {0, static_cast<int>(s)};
    st.category = {std::nullopt, s > 0 ? std::optional<Category>(Category::Safety) : std::nullopt};
    st.onset = {-1, s > 0 ? 0 : -1};
    t.subjects.push_back(st);
  }
  return t;
}

TruthBundle random_bundle(std::mt19937_64& gen, int n, double rho_s = 0.0) {
  std::normal_distribution<double> z(0, 1);
  std::vector<std::array<double, 3>> rows;
  for (int i = 0; i < n; ++i) {
    const double y0 = z(gen);
    const double y1 = y0 - 0.5 + 0.5 * z(gen);
    const double latent = rho_s * (y1 - y0) + z(gen);
    rows.push_back({y0, y1, latent > 1.0 ? 1.0 : 0.0});
  }
  return bundle(rows);
}

EstimandSpec spec_of(EstimandKind kind, double delta = 0.0) {
  EstimandSpec s;
  s.kind = kind;
  s.delta = delta;
  if (kind != EstimandKind::Hybrid) s.strategies = kHypotheticalStrategies;
  return s;
}

}  // namespace

TEST_CASE("hybrid oracle boundary cases") {
  const TruthBundle none = bundle({{0.0, -1.0, 0}, {1.0, 0.0, 0}, {0.5, -0.5, 0}});
  CHECK(true_hybrid(none, 0.3) == doctest::Approx(-1.0));
  CHECK(true_hybrid(none, std::nullopt) == doctest::Approx(true_theoretic(none)));
  CHECK(naive_decomposition(none, 0.3) == doctest::Approx(true_hybrid(none, 0.3)).epsilon(1e-15));

  const TruthBundle all = bundle({{0.0, -1.0, 1}, {1.0, 0.0, 1}});
  CHECK(true_hybrid(all, 0.4) == doctest::Approx(0.4));
  CHECK_THROWS_AS(true_hybrid(all, std::nullopt), InputError);

  // E[Y(1)-Y(0) | S=0] = -1, Pr(S=1) = 0.2.
  const TruthBundle fifth = bundle({{0, -1, 0}, {0, -1, 0}, {0, -1, 0}, {0, -1, 0}, {0, 5, 1}});
  CHECK(true_hybrid(fifth, 0.0) == doctest::Approx(-0.8));
  CHECK(safety_proportion(fifth) == doctest::Approx(0.2));
}

TEST_CASE("six-subject bundle separates the hybrid from the naive decomposition") {
  const TruthBundle b = bundle({{0, -1, 0}, {0, -1, 0}, {0, -1, 0}, {0, -1, 0}, {0, -3, 1}, {0, -3, 1}});
  CHECK(true_hybrid(b, 0.0) == doctest::Approx(-2.0 / 3.0).epsilon(1e-15));
  CHECK(naive_decomposition(b, 0.0) == doctest::Approx(-10.0 / 9.0).epsilon(1e-15));
  CHECK(true_hybrid(b, 0.0) != naive_decomposition(b, 0.0));
  // Gap = Pr(S=1) (E[Y(1)-Y(0) | S=0] - E[Y(1)-Y(0) | S=1]) weighted by Pr(S=0).
  CHECK(true_hybrid(b, 0.0) - naive_decomposition(b, 0.0) == doctest::Approx((4.0 / 6.0) * (2.0 / 6.0) * 2.0));
}

TEST_CASE("two algebraic forms agree and are affine in delta") {
  std::mt19937_64 gen(1);
  for (int rep = 0; rep < 200; ++rep) {
    const TruthBundle b = random_bundle(gen, 50, 1.0);
    if (safety_proportion(b) == 1.0) continue;
    for (double delta : {0.0, 0.2, 0.4}) {
      CHECK(std::fabs(true_hybrid(b, delta) - true_hybrid_pointwise(b, delta)) <= 1e-12);
    }
    const double slope = (true_hybrid(b, 0.4) - true_hybrid(b, 0.0)) / 0.4;
    CHECK(std::fabs(slope - safety_proportion(b)) <= 1e-12);
    CHECK(std::fabs(true_hybrid(b, 0.4) - 2 * true_hybrid(b, 0.2) + true_hybrid(b, 0.0)) <= 1e-12);
  }
}

TEST_CASE("independent S makes the two forms equal in expectation") {
  std::mt19937_64 gen(2);
  std::vector<double> gaps;
  for (int rep = 0; rep < 400; ++rep) {
    const TruthBundle b = random_bundle(gen, 200, 0.0);
    gaps.push_back(true_hybrid(b, 0.1) - naive_decomposition(b, 0.1));
  }
  double mean = 0, var = 0;
  for (double g : gaps) mean += g;
  mean /= gaps.size();
  for (double g : gaps) var += (g - mean) * (g - mean);
  var /= gaps.size() - 1;
  CHECK(std::fabs(mean) <= 4 * std::sqrt(var / gaps.size()));
}

TEST_CASE("oracles coincide without ICEs and respect the mixture bounds") {
  auto cfg = calibrate_preset("j2r_correct");
  cfg.n_per_arm = {200, 200};
  const int k = cfg.n_visits();
  cfg.safety_hazard = constant_hazards({0.0, 0.0}, k);
  cfg.administrative_hazard = constant_hazards({0.0, 0.0}, k);
  cfg.efficacy_threshold = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  const auto sim = simulate(cfg);
  CHECK(true_theoretic(sim.truth) == doctest::Approx(true_defacto(sim.truth)).epsilon(1e-14));
  CHECK(true_theoretic(sim.truth) == doctest::Approx(true_hybrid(sim.truth, 0.0)).epsilon(1e-14));

  const auto j2r = simulate(calibrate_preset("j2r_correct"));
  const double p = safety_proportion(j2r.truth);
  const double h = true_hybrid(j2r.truth, 0.4);
  // mu_h = (1 - p) * conditional contrast + p * delta.
  double cond = 0;
  int n0 = 0;
  for (const auto& s : j2r.truth.subjects) {
    if (!s.safety_ice[1]) {
      cond += s.potential[1].back() - s.potential[0].back();
      ++n0;
    }
  }
  cond /= n0;
  CHECK(h >= std::min(cond, 0.4) - 1e-12);
  CHECK(h <= std::max(cond, 0.4) + 1e-12);
  CHECK(h == doctest::Approx((1 - p) * cond + p * 0.4).epsilon(1e-12));
}

TEST_CASE("heavy placebo rescue attenuates the de facto oracle") {
  const auto sim = simulate(calibrate_preset("award1_like"));
  for (const Arm a : {Arm{1}, Arm{2}}) {
    CHECK(std::fabs(true_defacto(sim.truth, a)) < std::fabs(true_theoretic(sim.truth, a)));
  }
}

TEST_CASE("pipelines agree without ICEs") {
  const Dataset d = fixtures::random_complete(5, 80, 3);
  const auto t = estimate(d, spec_of(EstimandKind::Theoretic), 10, 1);
  const auto h = estimate(d, spec_of(EstimandKind::Hybrid), 10, 1);
  const auto f = estimate(d, spec_of(EstimandKind::DeFacto), 10, 1);
  CHECK(t.differences[0].value == h.differences[0].value);
  CHECK(t.differences[0].se == h.differences[0].se);
  CHECK(f.differences[0].value == doctest::Approx(t.differences[0].value).epsilon(1e-12));
  CHECK(h.provenance.imputed_cells == 0);
  CHECK(h.provenance.m == 0);
}

TEST_CASE("pipelines are reproducible, self-describing and within the CI") {
  const Dataset d = simulate(calibrate_preset("imagine3_like")).dataset;
  for (auto kind : {EstimandKind::Theoretic, EstimandKind::DeFacto, EstimandKind::Hybrid}) {
    const auto spec = spec_of(kind, 0.4);
    const auto a = estimate(d, spec, 8, 42);
    EstimateOptions opt;
    opt.threads = 3;
    const auto b = estimate(d, spec, 8, 42, opt);
    CHECK(a.differences[0].value == b.differences[0].value);
    CHECK(a.differences[0].se == b.differences[0].se);
    CHECK(a.provenance.dataset_digest == b.provenance.dataset_digest);
    CHECK(a.differences[0].ci_low <= a.differences[0].value);
    CHECK(a.differences[0].value <= a.differences[0].ci_high);
    CHECK(a.analysis_visit == 4);
    if (kind != EstimandKind::Theoretic) {
      CHECK(a.provenance.m == 8);
      CHECK(a.provenance.imputation_seeds.size() == 8u);
      CHECK(a.provenance.imputed_cells > 0);
      REQUIRE(a.differences[0].pooled.has_value());
      CHECK(a.differences[0].pooled->total >= a.differences[0].pooled->within);
    }
  }
}

TEST_CASE("pipeline rules") {
  const auto hybrid = pipeline_rules(spec_of(EstimandKind::Hybrid, 0.4));
  REQUIRE(hybrid.size() == 1);
  CHECK(hybrid[0].kind == ImputationKind::JumpToReferencePlusNim);
  CHECK(hybrid[0].scope == CellScope::PostIceMissing);
  CHECK(hybrid[0].nim == 0.4);
  CHECK(pipeline_rules(spec_of(EstimandKind::Hybrid))[0].kind == ImputationKind::JumpToReference);
  CHECK(pipeline_rules(spec_of(EstimandKind::Theoretic)).empty());
  const auto defacto = pipeline_rules(spec_of(EstimandKind::DeFacto));
  CHECK(defacto.size() == 2);
  EstimandSpec rtb = spec_of(EstimandKind::Hybrid);
  rtb.strategies = {IceStrategy::ReturnToBaseline, IceStrategy::NullByJumpToReference, IceStrategy::HypotheticalMar};
  const auto r = pipeline_rules(rtb);
  REQUIRE(r.size() == 2);
  CHECK(r[0].kind == ImputationKind::ReturnToBaseline);
}

TEST_CASE("spec validation") {
  EstimandSpec s = spec_of(EstimandKind::Hybrid);
  s.delta = -0.1;
  CHECK_THROWS_AS(validate_spec(s), InputError);
  s = spec_of(EstimandKind::Theoretic);
  s.strategies = {IceStrategy::ReturnToBaseline, IceStrategy::HypotheticalMar, IceStrategy::HypotheticalMar};
  CHECK_THROWS_AS(validate_spec(s), InputError);
  // The default map is accepted for every kind.
  s.strategies = kHybridStrategies;
  CHECK_NOTHROW(validate_spec(s));
  s = spec_of(EstimandKind::Hybrid);
  s.alpha = 1.0;
  CHECK_THROWS_AS(validate_spec(s), InputError);
  CHECK(spec_of(EstimandKind::Hybrid, 0.4).null_effect() == 0.4);
  s = spec_of(EstimandKind::Hybrid, 0.4);
  s.smaller_is_better = false;
  CHECK(s.null_effect() == -0.4);
  CHECK(parse_estimand_kind("hybrid") == EstimandKind::Hybrid);
  CHECK(parse_estimand_kind(to_string(EstimandKind::DeFacto)) == EstimandKind::DeFacto);
  CHECK_FALSE(parse_estimand_kind("tripartite").has_value());

  const Dataset d = fixtures::random_complete(5, 20, 2);
  s = spec_of(EstimandKind::Theoretic);
  s.analysis_visit = 3;
  try {
    estimate(d, s, 2, 1);
    FAIL("expected InputError");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).rfind("theoretic", 0) == 0);
  }
}

TEST_CASE("plug-in on complete data without ICEs is a difference of means") {
  const Dataset d = fixtures::random_complete(8, 30, 3);
  double m0 = 0, m1 = 0;
  int n0 = 0, n1 = 0;
  for (const auto& s : d.subjects) {
    (s.arm.z ? m1 : m0) += *s.outcomes[2];
    ++(s.arm.z ? n1 : n0);
  }
  const double direct = m1 / n1 - m0 / n0;
  CHECK(plug_in_mu_hat({d, d}, d, 0.4) == doctest::Approx(direct).epsilon(1e-14));
  Dataset unclassified = d;
  fixtures::add_ice(unclassified.subjects.back(), 1, IceReason::AdverseEvent);
  CHECK_THROWS_AS(plug_in_mu_hat({d}, unclassified, 0.0), InputError);
}

TEST_CASE("plug-in tends to the null when nearly every experimental subject has a safety ICE") {
  // The imputation model needs some experimental data at every visit, so one
  // experimental subject in 20 completes; the rest stop after visit 1.
  Dataset d = fixtures::random_complete(9, 300, 3);
  int n1 = 0, completers = 0;
  for (auto& s : d.subjects) {
    if (s.arm.z != 1) continue;
    if (n1++ % 20 == 0) {
      ++completers;
      continue;
    }
    fixtures::add_ice(s, 1, IceReason::AdverseEvent);
    s.outcomes[1].reset();
    s.outcomes[2].reset();
  }
  const auto r = hybrid_plug_in(d, spec_of(EstimandKind::Hybrid), 20, 3);
  double sd = 0, mean = 0;
  int n = 0;
  for (const auto& s : d.subjects) {
    if (s.arm.z == 0) {
      mean += *s.outcomes[2];
      ++n;
    }
  }
  mean /= n;
  for (const auto& s : d.subjects) {
    if (s.arm.z == 0) sd += (*s.outcomes[2] - mean) * (*s.outcomes[2] - mean);
  }
  sd = std::sqrt(sd / (n - 1));
  // Generating effect at visit 3 is -0.75 for completers and 0 under the null.
  const double expected = -0.75 * completers / n1;
  CHECK(std::fabs(r.value - expected) <= 3 * sd * std::sqrt(2.0 / n));
  CHECK(r.per_imputation.size() == 20u);
}

TEST_CASE("plug-in and pipeline target the same estimand") {
  auto cfg = calibrate_preset("j2r_correct");
  const Dataset d = simulate(cfg).dataset;
  const auto spec = spec_of(EstimandKind::Hybrid);
  const auto plug = hybrid_plug_in(d, spec, 50, 7);
  const auto pipe = estimate(d, spec, 50, 7);
  CHECK(std::fabs(plug.value - pipe.differences[0].value) <= 0.02);
}

TEST_CASE("dataset digest tracks content") {
  Dataset d = fixtures::random_complete(3, 10, 2);
  const auto a = dataset_digest(d);
  CHECK(a.size() == 16u);
  CHECK(dataset_digest(d) == a);
  *d.subjects[0].outcomes[0] += 1e-9;
  CHECK(dataset_digest(d) != a);
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
}
