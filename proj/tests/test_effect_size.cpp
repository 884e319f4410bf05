#include "catch_amalgamated.hpp"

#include <algorithm>
#include <sstream>
#include <vector>

#include "bnpmeta/correlations.hpp"
#include "bnpmeta/effect_size.hpp"

using namespace bnpmeta;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("falconer h2 is twice the correlation difference") {
  CHECK_THAT(falconer_h2({0.5, 0.25, 10, 10}), WithinAbs(0.5, 1e-15));
  CHECK(falconer_h2({0.3, 0.3, 10, 10}) == 0.0);
  CHECK_THAT(falconer_h2({0.6, 0.1, 3, 7}), WithinAbs(1.0, 1e-15));
  // not clamped
  CHECK_THAT(falconer_h2({0.2, 0.6, 10, 10}), WithinAbs(-0.8, 1e-15));
  CHECK_THAT(falconer_h2({0.9, 0.1, 10, 10}), WithinAbs(1.6, 1e-15));
}

TEST_CASE("falconer h2 rejects invalid correlations") {
  CHECK_THROWS_AS(falconer_h2({1.2, 0.1, 10, 10}), std::domain_error);
  CHECK_THROWS_AS(falconer_h2({0.1, -1.01, 10, 10}), std::domain_error);
  CHECK_THROWS_AS(falconer_h2({std::nan(""), 0.1, 10, 10}), std::domain_error);
  CHECK_THROWS_AS(falconer_h2({kInf, 0.1, 10, 10}), std::domain_error);
}

TEST_CASE("falconer variance") {
  CHECK_THAT(falconer_variance({0.0, 0.0, 100, 100}), WithinAbs(0.08, 1e-15));
  CHECK(falconer_variance({1.0, 1.0, 50, 50}) == 0.0);
  const double expected = 4.0 * (0.75 * 0.75 / 200.0 + 0.9375 * 0.9375 / 400.0);
  CHECK_THAT(falconer_variance({0.5, 0.25, 200, 400}), WithinRel(expected, 1e-14));
  CHECK_THAT(falconer_variance({0.5, 0.25, 200, 400}), WithinAbs(0.020039, 1e-6));
  CHECK_THROWS_AS(falconer_variance({0.5, 0.25, 1, 400}), std::domain_error);
  CHECK_THROWS_AS(falconer_variance({0.5, 0.25, 200, 0}), std::domain_error);
  CHECK_THROWS_AS(falconer_variance({-1.5, 0.25, 200, 200}), std::domain_error);
}

TEST_CASE("falconer h2 is linear in the correlations") {
  const TwinCorrelations c{0.4, 0.15, 10, 10};
  for (double lambda : {-2.0, -0.5, 0.0, 0.3, 1.0, 2.0}) {
    const TwinCorrelations scaled{lambda * c.rho_mz, lambda * c.rho_dz, 10, 10};
    CHECK_THAT(falconer_h2(scaled), WithinAbs(lambda * falconer_h2(c), 1e-14));
  }
}

TEST_CASE("falconer variance is non-increasing in the pair counts") {
  Rng rng(3, 0);
  for (int t = 0; t < 200; ++t) {
    const double a = 2.0 * rng.uniform() - 1.0, b = 2.0 * rng.uniform() - 1.0;
    const long n = 2 + static_cast<long>(rng.uniform() * 500), m = 2 + static_cast<long>(rng.uniform() * 500);
    const double v = falconer_variance({a, b, n, m});
    CHECK(falconer_variance({a, b, n + 1, m}) <= v);
    CHECK(falconer_variance({a, b, n, m + 7}) <= v);
  }
}

TEST_CASE("pooling within a study") {
  const std::vector<HeritabilityEstimate> equal{{0.4, 0.02, false}, {0.6, 0.02, false}};
  auto p = pool_within_study(equal);
  CHECK_THAT(p.h2, WithinAbs(0.5, 1e-14));
  CHECK_THAT(p.var, WithinAbs(0.01, 1e-15));
  CHECK(p.pooled);

  const std::vector<HeritabilityEstimate> unequal{{0.4, 0.01, false}, {0.6, 0.04, false}};
  p = pool_within_study(unequal);
  CHECK_THAT(p.h2, WithinAbs(0.44, 1e-14));
  CHECK_THAT(p.var, WithinAbs(0.008, 1e-15));

  const std::vector<HeritabilityEstimate> single{{0.7, 0.05, false}};
  p = pool_within_study(single);
  CHECK_THAT(p.h2, WithinAbs(0.7, 1e-15));
  CHECK_THAT(p.var, WithinAbs(0.05, 1e-15));

  CHECK_THROWS_AS(pool_within_study(std::vector<HeritabilityEstimate>{}), std::invalid_argument);
  const std::vector<HeritabilityEstimate> zero{{0.4, 0.0, false}, {0.6, 0.04, false}};
  CHECK_THROWS_AS(pool_within_study(zero), std::domain_error);
}

TEST_CASE("pooling is order invariant, bounded and shrinks the variance") {
  Rng rng(11, 0);
  for (int t = 0; t < 100; ++t) {
    std::vector<HeritabilityEstimate> e;
    const int k = 1 + static_cast<int>(rng.uniform() * 6);
    for (int i = 0; i < k; ++i) e.push_back({rng.normal(0.5, 0.3), 0.001 + 0.1 * rng.uniform(), false});
    const auto p = pool_within_study(e);
    auto shuffled = e;
    std::reverse(shuffled.begin(), shuffled.end());
    std::rotate(shuffled.begin(), shuffled.begin() + k / 2, shuffled.end());
    const auto q = pool_within_study(shuffled);
    CHECK_THAT(q.h2, WithinAbs(p.h2, 1e-12));
    CHECK_THAT(q.var, WithinRel(p.var, 1e-12));
    const auto [lo, hi] = std::minmax_element(e.begin(), e.end(), [](auto& a, auto& b) { return a.h2 < b.h2; });
    CHECK(p.h2 >= lo->h2 - 1e-12);
    CHECK(p.h2 <= hi->h2 + 1e-12);
    const auto min_var = std::min_element(e.begin(), e.end(), [](auto& a, auto& b) { return a.var < b.var; })->var;
    CHECK(p.var <= min_var * (1.0 + 1e-12));
  }
}

TEST_CASE("simulated twin samples recover the generating correlations") {
  const auto c = simulate_twin_sample(0.5, 0.2, 100000, 100000, 7);
  CHECK_THAT(c.rho_mz, WithinAbs(0.7, 0.01));
  CHECK_THAT(c.rho_dz, WithinAbs(0.45, 0.01));
  CHECK_THAT(falconer_h2(c), WithinAbs(0.5, 0.02));

  const auto null = simulate_twin_sample(0.0, 0.0, 100000, 100000, 8);
  CHECK_THAT(null.rho_mz, WithinAbs(0.0, 0.015));
  CHECK_THAT(null.rho_dz, WithinAbs(0.0, 0.015));

  const auto additive = simulate_twin_sample(1.0, 0.0, 100000, 100000, 9);
  CHECK_THAT(additive.rho_mz, WithinAbs(1.0, 1e-9));
  CHECK_THAT(additive.rho_dz, WithinAbs(0.5, 0.01));
  CHECK_THAT(falconer_h2(additive), WithinAbs(1.0, 0.02));
}

TEST_CASE("twin simulation is deterministic and validates its inputs") {
  const auto a = simulate_twin_sample(0.3, 0.3, 500, 400, 42);
  const auto b = simulate_twin_sample(0.3, 0.3, 500, 400, 42);
  CHECK(a.rho_mz == b.rho_mz);
  CHECK(a.rho_dz == b.rho_dz);
  CHECK(a.n_mz == 500);
  CHECK(a.n_dz == 400);
  CHECK_THROWS_AS(simulate_twin_sample(0.7, 0.5, 10, 10, 1), std::domain_error);
  CHECK_THROWS_AS(simulate_twin_sample(-0.1, 0.5, 10, 10, 1), std::domain_error);
}

TEST_CASE("correlation files become effect size rows") {
  std::istringstream in(
      "study_id,informant,rho_mz,rho_dz,n_mz,n_dz\n"
      "A,mom,0.5,0.25,200,400\n"
      "A,teacher,0.6,0.4,100,100\n"
      "A,self,0.4,0.3,150,120\n"
      "B,mom,0.3,0.3,50,60\n");
  const auto rows = parse_correlations(in);
  REQUIRE(rows.size() == 4);

  const auto flat = compute_effect_sizes(rows, false);
  REQUIRE(flat.size() == 4);
  CHECK_THAT(flat[0].estimate.h2, WithinAbs(0.5, 1e-15));
  CHECK_FALSE(flat[0].estimate.pooled);

  const auto pooled = compute_effect_sizes(rows, true);
  REQUIRE(pooled.size() == 2);
  CHECK(pooled[0].study_id == "A");
  std::vector<HeritabilityEstimate> a;
  for (int k = 0; k < 3; ++k) a.push_back(falconer_estimate(rows[static_cast<std::size_t>(k)].correlations));
  const auto oracle = pool_within_study(a);
  CHECK(pooled[0].estimate.h2 == oracle.h2);
  CHECK(pooled[0].estimate.var == oracle.var);
  CHECK(pooled[0].estimate.pooled);
  CHECK_FALSE(pooled[1].estimate.pooled);
}

TEST_CASE("correlation file diagnostics name the row and column") {
  std::istringstream in(
      "study_id,informant,rho_mz,rho_dz,n_mz,n_dz\n"
      "A,mom,1.2,0.25,200,400\n");
  try {
    parse_correlations(in);
    FAIL("expected a DatasetError");
  } catch (const DatasetError& e) {
    REQUIRE(e.diagnostics().size() == 1);
    CHECK(e.diagnostics()[0].line == 2);
    CHECK(e.diagnostics()[0].column == "rho_mz");
  }
  std::istringstream missing("study_id,informant,rho_mz,rho_dz,n_mz\n");
  CHECK_THROWS_AS(parse_correlations(missing), DatasetError);
}
