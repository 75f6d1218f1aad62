#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace shrinkdim {

/// Closed parameter interval [lo, hi].
struct Range {
  double lo = 0.0;
  double hi = 1.0;

  double width() const { return hi - lo; }
  double mid() const { return 0.5 * (lo + hi); }
  bool contains(double a) const { return a >= lo && a <= hi; }
};

/// Value of T_a at a point together with the branch it was evaluated on.
struct Eval {
  double value;
  int branch;
};

/// A derivative that may be undefined at a branch boundary.
struct BoundaryDerivative {
  double value = 0.0;
  bool at_boundary = false;
};

// Concrete families. All of them act on the phase interval [0, 1]; every
// branch is affine in x, with coefficients that depend smoothly on a.

/// Parameter-independent piecewise-affine map.
struct FixedMap {
  std::vector<double> breaks;   // b_0 = 0 < ... < b_p = 1
  std::vector<double> slopes;   // one per branch
  std::vector<double> offsets;  // value at the left end of each branch
};

/// T_a(x) = T(a x) with T affine and onto [0, 1) on every [t_n, t_{n+1}).
/// The cut list is extended periodically with its last gap.
struct GeneralisedBeta {
  std::vector<double> cuts{0.0, 1.0};

  double cut(int n) const;
  int cut_index(double u) const;  // n with u in [t_n, t_{n+1})
};

/// T_a(x) = -a x mod 1, right-continuous at the cuts k / a.
struct NegativeBeta {};

/// Tent map with slopes alpha(a) = alpha0 + alpha1 a on the left and
/// -beta(a) = -(beta0 + beta1 a) on the right, conjugated from
/// [1 - beta, 1] to [0, 1].
struct Tent {
  double alpha0 = 2.0, alpha1 = 0.0;
  double beta0 = 2.0, beta1 = 0.0;

  double alpha(double a) const { return alpha0 + alpha1 * a; }
  double beta(double a) const { return beta0 + beta1 * a; }
  /// Turning point in rescaled coordinates.
  double turning(double a) const { return (beta(a) - 1.0) / beta(a); }
};

/// Full-branch increasing linear Markov map with breakpoints affine in a.
struct MarkovLinear {
  std::vector<std::pair<double, double>> breaks;  // b_i(a) = first + second * a
};

enum class FamilyKind { fixed, generalised_beta, negative_beta, tent, markov_linear };

std::string to_string(FamilyKind kind);

/// Starting point X(a): constant, identity or affine.
struct StartPoint {
  enum class Type { constant, identity, affine };
  Type type = Type::constant;
  double c0 = 1.0;
  double c1 = 0.0;

  double value(double a) const;
  double deriv(double a) const;

  static StartPoint constant(double c) { return {Type::constant, c, 0.0}; }
  static StartPoint identity() { return {Type::identity, 0.0, 1.0}; }
  static StartPoint affine(double c0, double c1) { return {Type::affine, c0, c1}; }
};

/// A parametrised family T_a, a in [a0, a1], of piecewise expanding maps.
class Family {
 public:
  using Variant = std::variant<FixedMap, GeneralisedBeta, NegativeBeta, Tent, MarkovLinear>;

  Family(Variant map, Range range);

  static Family doubling(Range range = {0.0, 1.0});
  static Family fixed_multiplier(int m, Range range = {0.0, 1.0});
  static Family beta(Range range);
  static Family negative_beta(Range range);
  static Family tent(Tent tent, Range range);
  static Family markov_equal(int branches, Range range = {0.0, 1.0});

  FamilyKind kind() const;
  const Range& range() const { return range_; }
  const Variant& map() const { return map_; }

  /// Ordered breakpoints b_0(a) = 0 < ... < b_p(a) = 1.
  std::vector<double> breakpoints(double a) const;
  int branch_count(double a) const;
  /// Index i with x in [b_i, b_{i+1}); x = 1 belongs to the last branch.
  int branch_of(double a, double x) const;

  Eval eval(double a, double x) const;
  double deriv_x(double a, double x) const;
  BoundaryDerivative deriv_a(double a, double x) const;

  // Affine extension of one branch; defined for any x.
  double value_on(int branch, double a, double x) const;
  double dx_on(int branch, double a, double x) const;
  double da_on(int branch, double a, double x) const;

  /// Image of the branch domain [b_i, b_{i+1}] under the branch.
  std::pair<double, double> branch_image(int branch, double a) const;

 private:
  void check_a(double a) const;
  void check_x(double x) const;

  Variant map_;
  Range range_;
};

/// Grid audit of the expansion assumptions.
struct AssumptionReport {
  double lambda_min = 0.0;
  double Lambda_max = 0.0;
  double lipschitz_L = 0.0;
  bool expansion_ok = false;
  int iterate_power = 0;  // smallest M with lambda_min^M >= e^5; 0 if not expanding
};

AssumptionReport check_assumptions(const Family& family, int grid_density = 10000);

/// Smallest M >= 1 with lambda^M >= e^5.
int iterate_power_for(double lambda);

/// Largest a-lower-boundary of the negative-beta admissibility condition
/// 2a(a - [a]) - 2 - a > 0 inside (k, k + 1), found by bisection.
double negative_beta_admissible_lower(int integer_part, double tol = 1e-13);
bool negative_beta_admissible(double a);

// JSON: {"kind": ..., "params": {...}, "a_range": [a0, a1], "X": {...}}
Family family_from_json(const nlohmann::json& j);
StartPoint start_point_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Family& family);
nlohmann::json to_json(const StartPoint& x);

}  // namespace shrinkdim
