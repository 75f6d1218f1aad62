#pragma once

#include "shrinkdim/partition.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace shrinkdim {

/// Uniform grid on S1 (end points included) with spacing at most delta^2/4.
/// A target interval shorter than delta^2/4 collapses to its midpoint.
std::vector<double> dense_target_set(Range s1, double delta);

struct CantorParams {
  double alpha = 1.0;
  double epsilon = 0.01;
  double iota = 0.05;
  double delta = 0.05;
  int levels = 3;
  int probes = 64;           // parameter samples per parent
  int children = 4;          // explicit children kept per parent
  int m_first = 0;           // first window; 0 selects max(16, 2 n(seed))
  double window_ratio = 0;   // m_{k+1} = ceil(ratio * m_k); 0 selects default_window_ratio
  int t_cap = 60;            // escape times beyond this are infinite
  std::uint64_t seed = 0;

  // Values <= 0 (or an empty S1) are measured from the family.
  double h = 0.0;
  double tau_hat = 0.0;
  Range s1{0.0, 0.0};
  double tau1 = 0.0;
  int density_bins = 4096;
};

/// Constants the construction actually used.
struct CantorConstants {
  double h = 0.0;
  double tau_hat = 0.0;
  Range s1{0.0, 0.0};
  double l = 0.0;
  double tau1 = 0.0;
  double sumfreq_margin = 0.0;  // tau l / 2 - 3 tau1 / iota
  int p = 0;                    // number of targets in Y
  double c1 = 1.0;              // min |I~| / |I| over parents
};

/// One interval of the construction. Endpoints are decimal strings at the
/// working precision; the doubles are summaries.
struct CantorNode {
  int level = 0;
  int parent = -1;
  bool remainder = false;  // mass of unenumerated siblings, spread over the parent's I~
  std::string left, right;
  double approx_left = 0.0;
  double log_width = 0.0;
  std::string carrier_left, carrier_right;  // I_{n(J)}(a)
  double log_carrier = 0.0;
  int n = 0;
  int y_index = -1;
  double y = 0.0;
  double log_radius = 0.0;  // log of the target radius at time n
  long double mu = 0.0L;
  double log_mu = 0.0;
  std::vector<int> children;
};

/// Property audit of one explicit child.
struct ChildAudit {
  int node = -1;
  bool length_ok = false;      // e^{-(1+a)(h+3e)n} <= |J| <= e^{-(1+a)(h-3e)n}
  bool sum_ok = false;         // (h-2e)n <= S_n log|T'| <= (h+2e)n on J
  bool window_ok = false;      // m <= n <= (1+iota)m
  bool separation_ok = true;   // weaker e^{-(h+4e)(1+iota)m} bound
  bool image_ok = false;       // |xi_n(J)| >= delta_k
  bool membership_ok = false;  // |xi_n(mid) - y| <= e^{-alpha S_n log|T'|}
  double log_separation = 0.0;        // log of the gap to the nearest explicit sibling
  double separation_margin_3 = 0.0;   // log gap - log e^{-(h+3e)(1+iota)m}
  double separation_margin_4 = 0.0;   // same against the 4e version
  double image_error = 0.0;           // | |xi_n(J)| / (2 radius) - 1 |
};

struct ParentReport {
  int node = -1;
  std::string tilde_left, tilde_right;
  double log_tilde = 0.0;
  double c1 = 0.0;  // |I~| / |I|
  int t_tilde = 0;  // time at which xi(I~) first exceeds delta
  int m = 0;
  int probes = 0;
  int outside = 0;  // sampled points whose itinerary left I~
  int rejected_entropy = 0;
  int rejected_hit = 0;
  int rejected_escape = 0;
  int rejected_target = 0;
  int qualifying = 0;  // probes realising the chosen target
  int y_index = -1;
  double log_lambda_f = 0.0;     // log lambda(I ∩ F_k)
  double log_child_count = 0.0;  // lambda(I ∩ F_k) / mean carrier length
  double count_margin = 0.0;     // log count - (h - 4e) n(K), minimised over children
  int pruned_verify = 0, pruned_length = 0, pruned_sum = 0, pruned_separation = 0, pruned_image = 0;
  std::vector<ChildAudit> children;
};

struct CantorLevel {
  int k = 0;
  int m = 0;  // scheduled window base
  double h = 0.0, epsilon = 0.0, iota = 0.0;
  double delta_k = 0.0;  // 2 e^{-alpha (h+2e)(1+iota) m}
  int bits = 0;          // working precision
  std::vector<int> intervals;  // explicit nodes of this level
  std::vector<ParentReport> parents;
};

struct MassMeasure {
  std::vector<CantorNode> nodes;  // nodes[0] is the seed
  double additivity_error = 0.0;  // max over parents of |sum children - mu| / mu
  double total_mass = 0.0;        // sum over leaves
  int bits = 0;                   // precision needed to read every endpoint
};

struct CantorResult {
  std::vector<CantorLevel> levels;  // levels[0] holds the seed
  MassMeasure measure;
  CantorConstants constants;
  CantorParams params;
  bool halted = false;
  std::string diagnostic;
};

/// max(10, 1 + 1.5 alpha / (17 epsilon + iota)). Earlier windows cost the
/// mass exponent about alpha / (ratio - 1) relative to 1 / (1 + alpha).
double default_window_ratio(double alpha, double epsilon, double iota);

/// Generation-n element in escape position closest to the middle of the range.
ParamInterval select_seed(const Family& family, const StartPoint& x, int n, double delta);

CantorResult build_cantor(const Family& family, const StartPoint& x, const ParamInterval& seed,
                          const std::vector<double>& targets, const CantorParams& params);

/// Convenience: measured constants, Y from S1, then the construction.
CantorResult build_cantor(const Family& family, const StartPoint& x, const ParamInterval& seed,
                          const CantorParams& params);

/// mu of an arbitrary interval, with leaves spread uniformly over their supports.
double log_mass(const MassMeasure& measure, const std::string& left, const std::string& right);

struct ExponentProbe {
  double approx_left = 0.0;
  double approx_right = 0.0;
  double log_length = 0.0;
  double log_mu = 0.0;
  double exponent = 0.0;  // log mu / log |I|
  int level = 0;
};

struct LocalExponent {
  double s_lower = 0.0;  // min exponent over probes at the deepest level
  std::vector<double> level_exponents;  // min log mu(J) / log |J| per level (level 0 omitted)
  std::vector<ExponentProbe> probes;
  bool defined = false;
};

/// Probes: every deepest-level element plus `probe_intervals` random
/// intervals around them, between the element scale and the sibling gap scale.
LocalExponent local_exponent(const CantorResult& result, int probe_intervals = 256, std::uint64_t seed = 0);

struct ScalingAudit {
  double s = 0.0;               // exponent just below (1 - 17e - iota) / (1 + alpha)
  double c2 = 0.0;              // max(3, p / ((1 - 2e) tau l c1))
  double log_c2_observed = 0.0; // max over probes of log mu(I) - s log |I|
  int probes = 0;
  int violations = 0;           // probes with mu(I) > 2 c2 |I|^s
  bool holds = false;
};

/// mu(I) <= 2 c2 |I|^s over every explicit element and random intervals at all scales.
ScalingAudit scaling_audit(const CantorResult& result, int probe_intervals = 512, std::uint64_t seed = 0);

/// Nested {interval, n, y, mu, log_mu, children[]} dump.
nlohmann::json cantor_tree_json(const CantorResult& result);

}  // namespace shrinkdim
