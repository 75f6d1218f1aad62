#include <doctest.h>

#include "shrinkdim/cantor.hpp"

#include <cmath>
#include <cstdio>
#include <string>

using namespace shrinkdim;

namespace {

std::string text(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

CantorNode leaf(int level, int parent, double l, double r, double mu) {
  CantorNode nd;
  nd.level = level;
  nd.parent = parent;
  nd.left = text(l);
  nd.right = text(r);
  nd.approx_left = l;
  nd.log_width = std::log(r - l);
  nd.mu = mu;
  nd.log_mu = std::log(mu);
  return nd;
}

// Nested chain of nodes [l_k, r_k], one per level, with the given masses.
CantorResult chain(const std::vector<std::pair<double, double>>& iv, const std::vector<double>& mu) {
  CantorResult r;
  r.constants.h = 1.0;
  r.params.epsilon = 0.0;
  r.params.iota = 0.0;
  r.measure.bits = 64;
  for (std::size_t k = 0; k < iv.size(); ++k) {
    const int id = static_cast<int>(k);
    r.measure.nodes.push_back(leaf(id, id - 1, iv[k].first, iv[k].second, mu[k]));
    if (k > 0) r.measure.nodes[k - 1].children.push_back(id);
    CantorLevel lev;
    lev.k = id;
    lev.m = 10 * id;
    lev.intervals = {id};
    r.levels.push_back(lev);
  }
  return r;
}

}  // namespace

TEST_CASE("dense target set") {
  SUBCASE("uniform grid including end points") {
    const auto y = dense_target_set({0.2, 0.8}, 0.2);
    REQUIRE(y.size() == 61);
    CHECK(y.front() == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(y.back() == doctest::Approx(0.8).epsilon(1e-15));
    for (std::size_t j = 1; j < y.size(); ++j) CHECK(y[j] - y[j - 1] <= 0.01 + 1e-15);
  }
  SUBCASE("short range collapses to its midpoint") {
    const auto y = dense_target_set({0.4, 0.41}, 1.0);
    REQUIRE(y.size() == 1);
    CHECK(y[0] == doctest::Approx(0.405));
  }
  SUBCASE("range of exactly one spacing keeps both ends") {
    const auto y = dense_target_set({0.2, 0.21}, 0.2);
    REQUIRE(y.size() == 2);
    CHECK(y[0] == doctest::Approx(0.2));
    CHECK(y[1] == doctest::Approx(0.21));
  }
  CHECK_THROWS_AS(dense_target_set({0.2, 0.8}, 0.0), std::invalid_argument);
}

TEST_CASE("zero levels leave the seed with unit mass") {
  const Family f = Family::beta({1.9, 2.0});
  const StartPoint x = StartPoint::constant(1.0);
  const ParamInterval seed = select_seed(f, x, 8, 0.05);
  CHECK(seed.in_escape_position(0.05));
  CantorParams p;
  p.levels = 0;
  const CantorResult r = build_cantor(f, x, seed, p);
  REQUIRE(r.levels.size() == 1);
  REQUIRE(r.measure.nodes.size() == 1);
  CHECK(r.measure.nodes[0].mu == 1.0L);
  CHECK(r.measure.total_mass == doctest::Approx(1.0));
  CHECK_FALSE(local_exponent(r).defined);
}

TEST_CASE("invalid constants are rejected") {
  const Family f = Family::beta({1.9, 2.0});
  const StartPoint x = StartPoint::constant(1.0);
  const ParamInterval seed = select_seed(f, x, 8, 0.05);
  CantorParams p;
  p.levels = 1;
  p.tau1 = 10.0;
  CHECK_THROWS_AS(build_cantor(f, x, seed, p), std::invalid_argument);
  p.tau1 = 0.0;
  p.window_ratio = 0.5;
  CHECK_THROWS_AS(build_cantor(f, x, seed, p), std::invalid_argument);
}

TEST_CASE("default window ratio") {
  CHECK(default_window_ratio(1.0, 0.01, 0.05) == 10.0);
  CHECK(default_window_ratio(2.0, 0.01, 0.05) == doctest::Approx(1.0 + 3.0 / 0.22));
}

TEST_CASE("full-branch Markov family: cylinder count and properties") {
  const Family f = Family::markov_equal(2);
  const StartPoint x = StartPoint::identity();
  const ParamInterval seed = select_seed(f, x, 8, 0.05);
  CantorParams p;
  p.alpha = 1.0;
  p.levels = 2;
  const CantorResult r = build_cantor(f, x, seed, p);
  REQUIRE_FALSE(r.halted);
  REQUIRE(r.levels.size() == 3);
  CHECK(r.constants.h == doctest::Approx(std::log(2.0)).epsilon(1e-6));

  // Level 1 parents the seed itself: count the dyadic cylinders of
  // generation n inside it by enumeration.
  const ParentReport& rep = r.levels[1].parents.at(0);
  CHECK(rep.qualifying == rep.probes);
  CHECK(rep.rejected_entropy + rep.rejected_hit + rep.rejected_escape + rep.rejected_target == 0);
  const int n = r.measure.nodes[r.levels[1].intervals.at(0)].n;
  CHECK(n == rep.m);
  const double L = seed.left, R = seed.right, cell = std::ldexp(1.0, -n);
  long count = 0;
  for (long k = static_cast<long>(std::floor(L / cell)); k * cell < R; ++k)
    if (k * cell >= L && (k + 1) * cell <= R) ++count;
  CHECK(std::exp(rep.log_child_count) == doctest::Approx(static_cast<double>(count)).epsilon(1e-6));

  for (std::size_t k = 1; k < r.levels.size(); ++k) {
    for (const auto& pr : r.levels[k].parents) {
      CHECK(pr.pruned_verify + pr.pruned_length + pr.pruned_sum + pr.pruned_separation + pr.pruned_image == 0);
      for (const auto& a : pr.children) {
        CHECK(a.length_ok);
        CHECK(a.sum_ok);
        CHECK(a.window_ok);
        CHECK(a.separation_ok);
        CHECK(a.image_ok);
        CHECK(a.membership_ok);
        CHECK(a.image_error < 1e-6);
      }
    }
  }
  CHECK(r.measure.additivity_error <= 1e-12);
  CHECK(r.measure.total_mass == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("beta family construction: additivity and sibling gaps") {
  const Family f = Family::beta({1.9, 2.0});
  const StartPoint x = StartPoint::constant(1.0);
  const ParamInterval seed = select_seed(f, x, 8, 0.05);
  CantorParams p;
  p.alpha = 1.0;
  p.levels = 3;
  const CantorResult r = build_cantor(f, x, seed, p);
  REQUIRE_FALSE(r.halted);
  REQUIRE(r.levels.size() == 4);
  CHECK(r.measure.additivity_error <= 1e-12);
  CHECK(r.measure.total_mass == doctest::Approx(1.0).epsilon(1e-12));

  int gaps = 0;
  for (std::size_t k = 1; k < r.levels.size(); ++k) {
    const CantorLevel& lev = r.levels[k];
    CHECK(lev.m > 0);
    if (k > 1) CHECK(lev.m == static_cast<int>(std::ceil(10.0 * r.levels[k - 1].m)));
    for (const auto& pr : lev.parents) {
      for (const auto& a : pr.children) {
        if (a.node < 0 || a.log_separation == 0.0) continue;
        ++gaps;
        CHECK(a.separation_margin_3 >= 0.0);
      }
    }
    for (int id : lev.intervals) {
      const CantorNode& nd = r.measure.nodes[id];
      CHECK(nd.n >= lev.m);
      CHECK(nd.n <= static_cast<int>(std::floor((1.0 + p.iota) * lev.m + 1e-9)));
    }
  }
  CHECK(gaps > 0);

  const LocalExponent le = local_exponent(r, 128, 1);
  REQUIRE(le.defined);
  CHECK(le.level_exponents.size() == 3);
  CHECK(le.s_lower >= 0.5 - 0.1);
  const ScalingAudit au = scaling_audit(r, 128, 1);
  CHECK(au.holds);
  CHECK(au.s == doctest::Approx((1.0 - 0.17 - 0.05) / 2.0));

  const auto js = cantor_tree_json(r);
  CHECK(js["mu"].get<double>() == 1.0);
  CHECK(js["children"].size() == r.measure.nodes[0].children.size());
}

TEST_CASE("local exponent of hand-built measures") {
  SUBCASE("Lebesgue measure on the unit interval has exponent 1") {
    const CantorResult r = chain({{0.0, 1.0}, {0.0, 1.0}}, {1.0, 1.0});
    const LocalExponent le = local_exponent(r, 200, 3);
    REQUIRE(le.defined);
    CHECK(le.s_lower == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("mass concentrated on one child per level has exponent 0") {
    const CantorResult r = chain({{0.0, 1.0}, {0.0, 1e-3}, {0.0, 1e-6}, {0.0, 1e-9}}, {1.0, 1.0, 1.0, 1.0});
    const LocalExponent le = local_exponent(r, 64, 3);
    REQUIRE(le.defined);
    CHECK(le.s_lower == doctest::Approx(0.0));
    for (double e : le.level_exponents) CHECK(e == doctest::Approx(0.0));
  }
}
