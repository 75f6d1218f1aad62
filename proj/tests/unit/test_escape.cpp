#include <doctest.h>

#include "shrinkdim/escape.hpp"

#include <cmath>

using namespace shrinkdim;

TEST_CASE("full-branch Markov family never waits to escape") {
  const auto fam = Family::markov_equal(3);
  const auto X = StartPoint::affine(0.1, 0.7);
  const auto p = continuity_partition(fam, X, fam.range(), 3);
  EscapeOptions o;
  o.delta = 0.1;
  o.samples = 200;
  o.iota = 0.2;
  for (const auto& iv : p) {
    if (!iv.in_escape_position(o.delta)) continue;
    for (const auto& r : escape_analysis(fam, X, iv, {10, 20}, o)) {
      CHECK(r.theta == 0);
      for (int e : r.E) CHECK(e == 0);
    }
  }
}

TEST_CASE("escape time cases on hand-made traces") {
  ImageTrace tr;
  tr.length = {0.5, 0.011, 0.02, 0.5, 0.001, 0.002, 0.003, 0.6};
  tr.is_return = {0, 1, 0, 0, 1, 0, 0, 0};
  const double delta = 0.1;  // delta^2 = 0.01
  // stays above delta^2 until it regains length delta
  CHECK(escape_time(tr, 1, delta, 50) == 0);
  // drops below delta^2: escape time is the first time back in escape position
  CHECK(escape_time(tr, 4, delta, 50) == 3);
  // never escapes inside the cap
  CHECK(escape_time(tr, 4, delta, 2) == kInfiniteEscape);

  const auto rec = theta_for_window(tr, 1, 4.0, delta, 50);
  REQUIRE(rec.nu.size() == 2);
  CHECK(rec.nu[0] == 1);
  CHECK(rec.nu[1] == 4);
  CHECK(rec.theta == 3);
}

TEST_CASE("tail statistics on constructed records") {
  std::vector<EscapeRecord> zero;
  for (int m : {10, 20, 30})
    for (int i = 0; i < 50; ++i) zero.push_back({0.0, m, {}, {}, 0, false});
  auto st = escape_tail_statistics(zero, 0.1);
  for (const auto& row : st.rows) CHECK(row.fraction == 0.0);
  CHECK_FALSE(st.rate_defined);

  std::vector<EscapeRecord> synth;
  for (int m : {10, 20, 30, 40})
    for (int i = 0; i < 100; ++i) synth.push_back({0.0, m, {}, {}, i < 10 ? m : 0, false});
  st = escape_tail_statistics(synth, 0.3);
  for (const auto& row : st.rows) CHECK(row.fraction == doctest::Approx(0.1));
  CHECK(st.rate_defined);
  CHECK(std::abs(st.rate) < 1e-12);
}

TEST_CASE("wrapped beta family has a decaying escape tail") {
  const auto fam = Family::beta({1.9, 2.0});
  const auto X = StartPoint::constant(1.0);
  const auto p = continuity_partition(fam, X, fam.range(), 6);
  ParamInterval anchor = p.front();
  for (const auto& iv : p)
    if (iv.image_length() > anchor.image_length()) anchor = iv;
  EscapeOptions o;
  o.delta = 0.5;
  o.iota = 0.2;
  o.steps_per_generation = check_assumptions(fam, 200).iterate_power;
  o.samples = 2000;
  o.c_hat = estimate_c_hat(fam, X, 10);
  const auto recs = escape_analysis(fam, X, anchor, {20, 24, 30, 36, 42, 48}, o);
  const auto st = escape_tail_statistics(recs, 0.03);
  REQUIRE(st.rate_defined);
  CHECK(st.slope < 0.0);
}
