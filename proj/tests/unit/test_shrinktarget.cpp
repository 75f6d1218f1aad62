#include <doctest.h>

#include "shrinkdim/sequence.hpp"
#include "shrinkdim/shrinktarget.hpp"

#include <cmath>

using namespace shrinkdim;

namespace {

bool probes_inside(const Family& fam, const StartPoint& X, const ParamInterval& parent, const CoverInterval& c) {
  for (int j = 0; j < 5; ++j) {
    const double b = c.left + c.length() * j / 4.0;
    const double v = xi_forced(fam, X, b, parent.itinerary).value;
    if (v < c.y - c.radius || v > c.y + c.radius) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("doubling cover at y = 0") {
  const auto fam = Family::doubling();
  const auto X = StartPoint::identity();
  const auto covers = build_cover(fam, X, {0.0, 1.0}, 0.0, 1.0, 2);
  REQUIRE(covers.size() == 4);
  for (const auto& c : covers) {
    CHECK(c.length() == doctest::Approx(1.0 / 16));
    CHECK(c.radius == doctest::Approx(0.25));
    CHECK(c.left == doctest::Approx(0.25 * c.parent));
  }
}

TEST_CASE("targets outside the image give empty covers") {
  const auto fam = Family::beta({1.1, 1.9});
  const auto p = continuity_partition(fam, StartPoint::constant(1.0), {1.1, 1.3}, 1);
  REQUIRE(p.size() == 1);
  // xi_1 = a - 1 lies in [0.1, 0.3]
  CHECK(build_cover(fam, StartPoint::constant(1.0), p, 0.9, 10.0).empty());
}

TEST_CASE("beta cover containment and length bound") {
  const auto fam = Family::beta({1.9, 2.0});
  const auto X = StartPoint::constant(1.0);
  const auto p = continuity_partition(fam, X, fam.range(), 10);
  const auto covers = build_cover(fam, X, p, 0.5, 1.0);
  CHECK(covers.size() > 10);
  const double c_hat = estimate_c_hat(fam, X, 10);
  for (const auto& c : covers) {
    CHECK(probes_inside(fam, X, p[c.parent], c));
    CHECK(c.left >= p[c.parent].left);
    CHECK(c.right <= p[c.parent].right);
    CHECK(c.length() <= c_hat * c_hat * 2 * c.radius / c.parent_min_deriv);
  }
}

TEST_CASE("critical exponent of the doubling covers") {
  const auto fam = Family::doubling();
  const auto X = StartPoint::identity();
  std::vector<double> grid;
  for (int j = 0; j <= 20; ++j) grid.push_back(j / 20.0);
  auto exponent = [&](double alpha) {
    std::vector<std::vector<CoverInterval>> covers;
    for (int n = 2; n <= 12; ++n) covers.push_back(build_cover(fam, X, {0.0, 1.0}, 0.0, alpha, n));
    return critical_exponent_upper(covers, grid).s_hat;
  };
  CHECK(exponent(1.0) == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(exponent(0.0) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(exponent(0.5) >= exponent(1.0));
  CHECK(exponent(1.0) >= exponent(2.0));

  const auto empty = critical_exponent_upper({{}, {}}, grid);
  CHECK(empty.empty);
  CHECK(empty.s_hat == 0.0);
}

TEST_CASE("hit frequencies") {
  const auto fam = Family::doubling();
  std::vector<double> samples;
  for (int i = 0; i < 20000; ++i) samples.push_back(weyl_point(i, 3));
  auto t = hit_frequency(fam, StartPoint::identity(), samples, 0.5, 0.1, {30, 30});
  CHECK(std::abs(t.rows[0].proxy - 0.2) < 0.02);
  t = hit_frequency(fam, StartPoint::identity(), samples, 0.5, 0.0, {10, 20});
  for (const auto& r : t.rows) {
    CHECK(r.proxy == 0.0);
    CHECK(r.f == 0.0);
  }
}

TEST_CASE("entropy pinch") {
  const auto beta = Family::beta({1.5, 2.0});
  std::vector<double> samples;
  for (int i = 0; i < 500; ++i) samples.push_back(1.5 + 0.5 * weyl_point(i, 1));
  const auto r = entropy_pinch(beta, StartPoint::constant(1.0), samples, [](double a) { return std::log(a); }, 1e-9,
                               {1, 40});
  for (const auto& row : r.rows) CHECK(row.fraction == 1.0);
  CHECK(r.fraction_all == 1.0);

  // mixed slopes: the fraction inside the band grows with n
  const auto tent = Family::tent(Tent{1.5, 0.0, 3.0, 0.0}, {0.0, 1.0});
  // entropy of this tent by long Birkhoff averages
  auto h = [&](double a) {
    return birkhoff_average(
        tent, a, 0.123456, [&](double x) { return std::log(std::abs(tent.deriv_x(a, x))); }, 200000);
  };
  const double h0 = h(0.5);
  // vary the start point instead of the (constant) parameter
  PinchRow early{}, late{};
  {
    int in_early = 0, in_late = 0;
    for (int i = 0; i < 1000; ++i) {
      const double x0 = weyl_point(i, 9);
      const auto p = entropy_pinch(tent, StartPoint::constant(x0), {0.5}, [&](double) { return h0; }, 0.05, {10, 400});
      in_early += p.rows.front().fraction > 0.5;
      in_late += p.rows.back().fraction > 0.5;
    }
    early.fraction = in_early / 1000.0;
    late.fraction = in_late / 1000.0;
  }
  CHECK(late.fraction > early.fraction);
  CHECK(late.fraction > 0.8);
}
