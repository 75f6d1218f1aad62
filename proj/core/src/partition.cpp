#include "shrinkdim/partition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace shrinkdim {

namespace {

struct Cut {
  double at;
  int branch_left;
  int branch_right;
};

class Splitter {
 public:
  Splitter(const Family& family, const StartPoint& x, const ParamInterval& parent)
      : family_(family), x_(x), parent_(parent) {}

  int branch_at(double b) const {
    const double v = std::clamp(xi_forced(family_, x_, b, parent_.itinerary).value, 0.0, 1.0);
    return family_.branch_of(b, v);
  }

  void find_cuts(double lo, int g_lo, double hi, int g_hi, std::vector<Cut>& out) const {
    if (g_lo == g_hi) return;
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) {
      out.push_back({hi, g_lo, g_hi});
      return;
    }
    const int g_mid = branch_at(mid);
    find_cuts(lo, g_lo, mid, g_mid, out);
    find_cuts(mid, g_mid, hi, g_hi, out);
  }

 private:
  const Family& family_;
  const StartPoint& x_;
  const ParamInterval& parent_;
};

ParamInterval make_child(const Family& family, const StartPoint& x, const ParamInterval& parent, double l,
                         double r, int branch) {
  ParamInterval c;
  c.left = l;
  c.right = r;
  c.generation = parent.generation + 1;
  c.itinerary = parent.itinerary;
  c.itinerary.push_back(branch);
  c.image_left = xi_forced(family, x, l, c.itinerary).value;
  c.image_right = xi_forced(family, x, r, c.itinerary).value;
  c.unresolved = parent.unresolved;
  return c;
}

}  // namespace

std::uint64_t ParamInterval::itinerary_hash() const {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (int b : itinerary) {
    for (int k = 0; k < 4; ++k) {
      h ^= static_cast<std::uint64_t>((static_cast<unsigned>(b) >> (8 * k)) & 0xffu);
      h *= 1099511628211ULL;
    }
  }
  return h;
}

double default_tol_a(double Lambda, int n) { return std::max(1e-14, std::pow(Lambda, -n) * 1e-3); }

ParamInterval root_interval(const Family& family, const StartPoint& x, Range range) {
  ParamInterval root;
  root.left = range.lo;
  root.right = range.hi;
  root.image_left = x.value(range.lo);
  root.image_right = x.value(range.hi);
  (void)family;
  return root;
}

std::vector<ParamInterval> split_next(const Family& family, const StartPoint& x, const ParamInterval& parent,
                                      double tol_a) {
  Splitter s(family, x, parent);
  const double l = parent.left, r = parent.right, w = r - l;

  // Probe grid strictly inside the interval; the insets keep one-sided
  // limits at the end points unambiguous.
  constexpr int kProbes = 9;
  std::vector<double> probes;
  const double inset = w * 1e-9;
  if (l + inset < r - inset) {
    probes.push_back(l + inset);
    for (int j = 1; j < kProbes - 1; ++j) probes.push_back(l + w * j / (kProbes - 1));
    probes.push_back(r - inset);
  } else {
    probes.push_back(0.5 * (l + r));
  }
  std::vector<int> branches(probes.size());
  for (std::size_t j = 0; j < probes.size(); ++j) branches[j] = s.branch_at(probes[j]);

  std::vector<Cut> cuts;
  for (std::size_t j = 0; j + 1 < probes.size(); ++j)
    s.find_cuts(probes[j], branches[j], probes[j + 1], branches[j + 1], cuts);

  std::vector<ParamInterval> out;
  double start = l;
  int branch = branches.front();
  for (const Cut& c : cuts) {
    out.push_back(make_child(family, x, parent, start, c.at, branch));
    // Skipped branches between c.branch_left and c.branch_right occupy less
    // than one ulp of parameter space.
    if (std::abs(c.branch_right - c.branch_left) > 1) out.back().unresolved = true;
    start = c.at;
    branch = c.branch_right;
  }
  out.push_back(make_child(family, x, parent, start, r, branch));
  if (out.size() > 1)
    for (auto& c : out)
      if (c.width() < tol_a) c.unresolved = true;
  return out;
}

std::vector<ParamInterval> extend_partition(const Family& family, const StartPoint& x,
                                            std::vector<ParamInterval> intervals, int generation,
                                            const PartitionOptions& opts) {
  if (intervals.empty()) return intervals;
  const double Lambda = opts.Lambda > 0.0 ? opts.Lambda : check_assumptions(family, 64).Lambda_max;
  const double tol = opts.tol_a >= 0.0 ? opts.tol_a : default_tol_a(Lambda, generation);
  while (intervals.front().generation < generation) {
    std::vector<ParamInterval> next;
    next.reserve(intervals.size() * 2);
    for (const auto& iv : intervals) {
      auto kids = split_next(family, x, iv, tol);
      for (auto& k : kids) next.push_back(std::move(k));
      if (next.size() > opts.node_budget)
        throw PartitionBudgetExceeded("continuity partition exceeded the node budget at generation " +
                                      std::to_string(iv.generation + 1));
    }
    intervals = std::move(next);
  }
  return intervals;
}

std::vector<std::vector<ParamInterval>> partition_generations(const Family& family, const StartPoint& x,
                                                              Range range, int n, const PartitionOptions& opts) {
  if (n < 0) throw std::invalid_argument("generation must be non-negative");
  if (n > opts.n_max) throw std::invalid_argument("generation exceeds the precision budget n_max");
  PartitionOptions o = opts;
  if (o.Lambda <= 0.0) o.Lambda = check_assumptions(family, 64).Lambda_max;
  if (o.tol_a < 0.0) o.tol_a = default_tol_a(o.Lambda, n);
  std::vector<std::vector<ParamInterval>> gens;
  gens.push_back({root_interval(family, x, range)});
  for (int k = 1; k <= n; ++k) gens.push_back(extend_partition(family, x, gens.back(), k, o));
  return gens;
}

std::vector<ParamInterval> continuity_partition(const Family& family, const StartPoint& x, Range range, int n,
                                                const PartitionOptions& opts) {
  if (n < 0) throw std::invalid_argument("generation must be non-negative");
  if (n > opts.n_max) throw std::invalid_argument("generation exceeds the precision budget n_max");
  PartitionOptions o = opts;
  if (o.Lambda <= 0.0) o.Lambda = check_assumptions(family, 64).Lambda_max;
  if (o.tol_a < 0.0) o.tol_a = default_tol_a(o.Lambda, n);
  return extend_partition(family, x, {root_interval(family, x, range)}, n, o);
}

double solve_image(const Family& family, const StartPoint& x, const ParamInterval& iv, double target) {
  double lo = iv.left, hi = iv.right;
  const bool increasing = iv.image_right >= iv.image_left;
  if (target <= iv.image_lo()) return increasing ? lo : hi;
  if (target >= iv.image_hi()) return increasing ? hi : lo;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;
    const double v = xi_forced(family, x, mid, iv.itinerary).value;
    if ((v < target) == increasing)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

RefineResult refine_partition(const std::vector<ParamInterval>& partition, const Family& family,
                              const StartPoint& x, double delta, double c_hat, double Lambda) {
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  RefineResult res;
  res.upper = 4.0 * c_hat * Lambda * delta;
  res.vacuous = true;
  for (const auto& iv : partition) {
    const double len = iv.image_length();
    if (len <= res.upper) {
      res.intervals.push_back(iv);
      continue;
    }
    res.vacuous = false;
    const int k = static_cast<int>(std::ceil(len / res.upper));
    const bool increasing = iv.image_right >= iv.image_left;
    std::vector<double> cuts{iv.left};
    for (int j = 1; j < k; ++j) {
      const double target = increasing ? iv.image_lo() + len * j / k : iv.image_hi() - len * j / k;
      cuts.push_back(solve_image(family, x, iv, target));
    }
    cuts.push_back(iv.right);
    for (int j = 0; j < k; ++j) {
      ParamInterval piece = iv;
      piece.left = cuts[j];
      piece.right = cuts[j + 1];
      piece.image_left = j == 0 ? iv.image_left : xi_forced(family, x, piece.left, iv.itinerary).value;
      piece.image_right = j == k - 1 ? iv.image_right : xi_forced(family, x, piece.right, iv.itinerary).value;
      res.intervals.push_back(std::move(piece));
    }
  }
  return res;
}

int count_child_violations(const std::vector<ParamInterval>& gen_n, const std::vector<ParamInterval>& gen_n1,
                           double delta) {
  int violations = 0;
  std::size_t j = 0;
  for (const auto& p : gen_n) {
    int kids = 0;
    while (j < gen_n1.size() && gen_n1[j].left < p.right) {
      if (gen_n1[j].right > p.left) ++kids;
      ++j;
    }
    if (j > 0 && gen_n1[j - 1].right > p.right) --j;
    if (p.image_length() <= 2.0 * delta && kids > 2) ++violations;
  }
  return violations;
}

double distortion_ratio(const Family& family, const StartPoint& x, const ParamInterval& iv, int probes) {
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (int j = 0; j < probes; ++j) {
    const double b = iv.left + iv.width() * (j + 0.5) / probes;
    const double d = std::abs(xi_forced(family, x, b, iv.itinerary).param_deriv);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  return hi / lo;
}

}  // namespace shrinkdim
