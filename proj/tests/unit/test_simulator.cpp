#include "doctest.h"

#include <cmath>
#include <limits>

#include "hybridest/errors.hpp"
#include "hybridest/estimands.hpp"
#include "hybridest/ice_classifier.hpp"
#include "hybridest/simulator.hpp"

using namespace hybridest;

namespace {

constexpr double kNever = std::numeric_limits<double>::infinity();

ScenarioConfig quiet(ScenarioConfig c) {
  const int k = c.n_visits();
  const std::vector<double> zero(c.n_arms(), 0.0);
  c.safety_hazard = constant_hazards(zero, k);
  c.administrative_hazard = constant_hazards(zero, k);
  c.efficacy_threshold.assign(c.n_arms(), kNever);
  c.intermittent_missing_rate = 0.0;
  return c;
}

double chi_square_2x2(int a, int b, int c, int d) {
  const double n = a + b + c + d;
  const double num = n * std::pow(static_cast<double>(a) * d - static_cast<double>(b) * c, 2);
  return num / (static_cast<double>(a + b) * (c + d) * (a + c) * (b + d));
}

}  // namespace

TEST_CASE("zero hazards give complete data without ICEs") {
  const auto sim = simulate(quiet(calibrate_preset("award1_like")));
  for (const auto& s : sim.dataset.subjects) {
    CHECK_FALSE(s.ice.has_value());
    for (const auto& y : s.outcomes) CHECK(y.has_value());
  }
}

TEST_CASE("same seed, same output; different seed, different output") {
  const auto cfg = calibrate_preset("imagine3_like");
  const auto a = simulate(cfg), b = simulate(cfg);
  REQUIRE(a.dataset.subjects.size() == b.dataset.subjects.size());
  for (std::size_t i = 0; i < a.dataset.subjects.size(); ++i) {
    CHECK(a.dataset.subjects[i].outcomes == b.dataset.subjects[i].outcomes);
    CHECK(a.truth.subjects[i].potential == b.truth.subjects[i].potential);
    CHECK(a.truth.subjects[i].policy == b.truth.subjects[i].policy);
  }
  auto other = cfg;
  other.master_seed += 1;
  CHECK(dataset_digest(simulate(other).dataset) != dataset_digest(a.dataset));
}

TEST_CASE("observed values are consistent with the truth") {
  for (const auto& name : preset_names()) {
    const auto sim = simulate(calibrate_preset(name));
    for (std::size_t i = 0; i < sim.dataset.subjects.size(); ++i) {
      const auto& s = sim.dataset.subjects[i];
      const auto& t = sim.truth.subjects[i];
      const int z = s.arm.z;
      CHECK(t.assigned == s.arm);
      CHECK(t.baseline == s.baseline);
      CHECK(t.category[z] == s.category);
      const int onset = t.onset[z];
      CHECK(onset == (s.ice ? s.ice->visit_of_onset : -1));
      CHECK((t.safety_ice[z] == 1) == (s.category == Category::Safety));
      if (s.ice) CHECK(classify(*s.ice) == *s.category);
      for (int v = 0; v < sim.dataset.n_visits(); ++v) {
        if (!s.outcomes[v]) continue;
        const bool after = onset >= 0 && v >= onset;
        CHECK(s.post_ice[v] == after);
        CHECK(*s.outcomes[v] == (after ? t.policy[z][v] : t.potential[z][v]));
        if (!after) CHECK(t.policy[z][v] == t.potential[z][v]);
      }
    }
  }
}

TEST_CASE("configured Category 1 rates are realized") {
  auto cfg = quiet(calibrate_preset("imagine3_like"));
  const int k = cfg.n_visits();
  cfg.safety_hazard = constant_hazards({hazard_for_total(0.053, k), hazard_for_total(0.106, k)}, k);
  const auto sim = simulate(cfg);
  const auto table = summarize(sim.dataset);
  const double target[2] = {0.053, 0.106};
  for (int a = 0; a < 2; ++a) {
    const auto& row = table.rows[a];
    const double p = static_cast<double>(row.safety) / row.n;
    CHECK(std::fabs(p - target[a]) <= 3 * std::sqrt(target[a] * (1 - target[a]) / row.n));
  }
}

TEST_CASE("preset targets") {
  const auto award = calibrate_preset("award1_like");
  CHECK(award.targets.efficacy_rate[0] == doctest::Approx(0.163));
  CHECK(award.n_per_arm == std::vector<int>{141, 280, 279});
  const auto imagine = calibrate_preset("imagine3_like");
  CHECK(imagine.delta == 0.4);
  CHECK(imagine.targets.safety_rate[0] == doctest::Approx(0.053));
  CHECK(imagine.targets.safety_rate[1] == doctest::Approx(0.106));
  CHECK_THROWS_AS(calibrate_preset("award2_like"), InputError);
}

TEST_CASE("calibrated presets reproduce their category proportions on average") {
  for (const auto& name : {std::string("award1_like"), std::string("imagine3_like")}) {
    auto cfg = calibrate_preset(name);
    const int K = cfg.n_arms();
    std::vector<double> s(K), e(K), a(K);
    std::vector<int> n(K);
    const int reps = 40;
    for (int r = 0; r < reps; ++r) {
      cfg.master_seed = derive_seed(7, r);
      const auto table = summarize(simulate(cfg).dataset);
      for (int z = 0; z < K; ++z) {
        s[z] += table.rows[z].safety;
        e[z] += table.rows[z].efficacy;
        a[z] += table.rows[z].administrative;
        n[z] += table.rows[z].n;
      }
    }
    for (int z = 0; z < K; ++z) {
      const std::pair<double, double> pairs[] = {{s[z] / n[z], cfg.targets.safety_rate[z]},
                                                  {e[z] / n[z], cfg.targets.efficacy_rate[z]},
                                                  {a[z] / n[z], cfg.targets.administrative_rate[z]}};
      for (const auto& [got, want] : pairs) {
        CHECK_MESSAGE(std::fabs(got - want) <= 3 * std::sqrt(want * (1 - want) / n[z]) + 1e-9,
                      name << " arm " << z << ": " << got << " vs " << want);
      }
    }
  }
}

TEST_CASE("null scenario oracles are zero") {
  const auto cfg = calibrate_preset("null");
  const auto sim = simulate(cfg);
  double var = 0;
  for (const auto& s : sim.truth.subjects) var += std::pow(s.potential[1].back() - s.potential[0].back(), 2);
  const double se = std::sqrt(var / sim.truth.subjects.size() / sim.truth.subjects.size());
  CHECK(std::fabs(true_theoretic(sim.truth)) <= 3 * se + 1e-12);
  CHECK(std::fabs(true_defacto(sim.truth)) <= 3 * se + 1e-12);
  CHECK(std::fabs(true_hybrid(sim.truth, 0.0)) <= 3 * se + 1e-12);
}

TEST_CASE("principal ignorability controls dependence of S(1) on the effect") {
  auto count = [](bool ignorable) {
    auto cfg = calibrate_preset("j2r_correct");
    cfg.effect_heterogeneity_sd = 0.5;
    cfg.principal_ignorability = ignorable;
    cfg.frailty_log_odds = 1.5;
    std::vector<double> effect;
    std::vector<int> s1;
    for (int r = 0; r < 5; ++r) {
      cfg.master_seed = 1000 + r;
      const auto sim = simulate(cfg);
      for (const auto& s : sim.truth.subjects) {
        effect.push_back(s.potential[1].back() - s.potential[0].back());
        s1.push_back(s.safety_ice[1]);
      }
    }
    std::vector<double> sorted = effect;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double median = sorted[sorted.size() / 2];
    int t[4] = {0, 0, 0, 0};
    for (std::size_t i = 0; i < effect.size(); ++i) ++t[2 * (effect[i] > median) + s1[i]];
    return chi_square_2x2(t[0], t[1], t[2], t[3]);
  };
  CHECK(count(true) < 3.841);
  CHECK(count(false) > 3.841);
}

TEST_CASE("death is never followed by data") {
  auto cfg = calibrate_preset("award1_like");
  cfg.death_fraction = 0.5;
  cfg.retrieval_rate = 1.0;
  const auto sim = simulate(cfg);
  int deaths = 0;
  for (const auto& s : sim.dataset.subjects) {
    if (s.ice && s.ice->reason == IceReason::Death) {
      ++deaths;
      for (int t = s.ice->visit_of_onset; t < sim.dataset.n_visits(); ++t) CHECK(s.missing(t));
    } else if (s.ice) {
      for (int t = s.ice->visit_of_onset; t < sim.dataset.n_visits(); ++t) CHECK_FALSE(s.missing(t));
    }
  }
  CHECK(deaths > 0);
}

TEST_CASE("full rescue pull moves policy outcomes onto the reference path") {
  auto cfg = calibrate_preset("j2r_correct");
  const auto sim = simulate(cfg);
  for (const auto& s : sim.truth.subjects) {
    const int k = s.onset[1];
    if (k < 0) continue;
    for (int t = k; t < sim.truth.n_visits; ++t) CHECK(s.policy[1][t] == doctest::Approx(s.potential[0][t]).epsilon(1e-14));
  }
}

TEST_CASE("invalid configurations are rejected") {
  auto base = calibrate_preset("j2r_correct");
  auto c = base;
  c.safety_hazard[0][0] = 1.5;
  CHECK_THROWS_AS(validate_config(c), InputError);
  c = base;
  c.rescue_pull = -0.1;
  CHECK_THROWS_AS(validate_config(c), InputError);
  c = base;
  c.residual_covariance(0, 0) = -1.0;
  CHECK_THROWS_AS(validate_config(c), InputError);
  c = base;
  c.mean_change.pop_back();
  CHECK_THROWS_AS(simulate(c), InputError);
  CHECK_THROWS_AS(hazard_for_total(1.2, 4), InputError);
  CHECK(hazard_for_total(0.0, 4) == 0.0);
  CHECK(1 - std::pow(1 - hazard_for_total(0.2, 4), 4) == doctest::Approx(0.2));
}
