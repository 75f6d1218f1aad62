#include <doctest.h>

#include "shrinkdim/density.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace shrinkdim;

namespace {

// Parry density of x -> beta x mod 1, normalised, averaged over each bin.
std::vector<double> parry_bins(double beta, int bins) {
  std::vector<double> orbit{1.0};
  double t = 1.0;
  for (int n = 1; n < 80; ++n) {
    t = beta * t - std::floor(beta * t);
    orbit.push_back(t);
  }
  // phi(x) = sum_{n : x < T^n 1} beta^-n; integrate each term exactly over the bin
  std::vector<double> out(bins, 0.0);
  const double h = 1.0 / bins;
  double total = 0.0;
  for (std::size_t n = 0; n < orbit.size(); ++n) total += std::pow(beta, -double(n)) * orbit[n];
  for (int i = 0; i < bins; ++i) {
    double s = 0.0;
    for (std::size_t n = 0; n < orbit.size(); ++n) {
      const double ov = std::clamp(orbit[n] - i * h, 0.0, h);
      s += std::pow(beta, -double(n)) * ov;
    }
    out[i] = s / h / total;
  }
  return out;
}

}  // namespace

TEST_CASE("doubling map density is uniform") {
  const auto p = ulam_density(Family::doubling(), 0.5, 4096);
  double sup = 0.0, integral = 0.0;
  for (double v : p.values) {
    sup = std::max(sup, std::abs(v - 1.0));
    integral += v / p.bins;
  }
  CHECK(sup < 0.01);
  CHECK(std::abs(integral - 1.0) < 1e-9);
  CHECK(p.entropy == doctest::Approx(std::log(2.0)).epsilon(1e-9));
  CHECK(p.residual <= 2.0 / p.bins + 1e-6);
}

TEST_CASE("golden mean density matches Parry's formula") {
  const double g = (1.0 + std::sqrt(5.0)) / 2.0;
  const auto fam = Family::beta({1.5, 2.0});
  const auto p = ulam_density(fam, g, 4096);
  const auto parry = parry_bins(g, 4096);
  double err = 0.0;
  for (int i = 0; i < p.bins; ++i) err += std::abs(p.values[i] - parry[i]) / p.bins;
  CHECK(err <= 1e-3);
  const auto e = rokhlin_entropy(fam, g, p);
  CHECK(std::abs(e.quadrature - std::log(g)) < 1e-3);
  CHECK_FALSE(e.flagged);
  const auto p2 = ulam_density(fam, 2.0, 1024);
  CHECK(std::abs(p2.entropy - std::log(2.0)) < 1e-3);
}

TEST_CASE("symmetric tent density is uniform") {
  const auto fam = Family::tent(Tent{2.0, 0.0, 2.0, 0.0}, {0.0, 1.0});
  const auto p = ulam_density(fam, 0.5, 1024);
  for (double v : p.values) CHECK(std::abs(v - 1.0) < 0.01);
}

TEST_CASE("mixed slope tent entropy") {
  const auto fam = Family::tent(Tent{1.5, 0.0, 3.0, 0.0}, {0.0, 1.0});
  const auto p = ulam_density(fam, 0.5, 4096);
  const auto e = rokhlin_entropy(fam, 0.5, p, 1000000);
  CHECK(e.quadrature >= std::log(1.5));
  CHECK(e.quadrature <= std::log(3.0));
  CHECK(std::abs(e.quadrature - e.birkhoff) < 5e-3);
  CHECK(p.tau_lower <= p.tau_upper);
  for (int i = 0; i < p.bins; ++i) CHECK(p.values[i] >= 0.0);
}

TEST_CASE("common supports") {
  const auto beta = Family::beta({1.9, 2.0});
  const auto s = common_support(beta, {1.9, 1.95, 2.0}, 1024);
  REQUIRE_FALSE(s.empty);
  CHECK(s.interval.lo == doctest::Approx(1.0 / 1024));
  CHECK(s.interval.hi == doctest::Approx(1.0 - 1.0 / 1024));

  DensityProfile left, right;
  left.bins = right.bins = 100;
  left.support = {{0.0, 0.3}};
  right.support = {{0.5, 1.0}};
  const auto none = common_support({left, right});
  CHECK(none.empty);
  CHECK_FALSE(none.diagnostic.empty());
}

TEST_CASE("entropy bounds") {
  const auto fam = Family::beta({1.5, 2.0});
  for (double a : {1.55, 1.7, 1.93}) {
    const auto p = ulam_density(fam, a, 1024);
    CHECK(std::abs(p.entropy - std::log(a)) < 1e-9);
  }
}
