#pragma once

#include "shrinkdim/family.hpp"
#include "shrinkdim/orbit.hpp"

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace shrinkdim {

/// Maximal parameter interval on which a -> xi_n(a) is continuous.
struct ParamInterval {
  double left = 0.0;
  double right = 0.0;
  int generation = 0;
  std::vector<int> itinerary;  // branches of xi_0 .. xi_{n-1}
  double image_left = 0.0;     // xi_n(left+)
  double image_right = 0.0;    // xi_n(right-)
  bool unresolved = false;

  double width() const { return right - left; }
  double image_lo() const { return image_left < image_right ? image_left : image_right; }
  double image_hi() const { return image_left < image_right ? image_right : image_left; }
  double image_length() const { return image_hi() - image_lo(); }
  bool in_escape_position(double delta) const { return image_length() >= delta; }
  std::uint64_t itinerary_hash() const;
};

class PartitionBudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PartitionOptions {
  double tol_a = -1.0;        // cuts closer than this are "unresolved"; < 0 selects the default
  double Lambda = 0.0;        // expansion bound used by the default tol; 0 = estimate
  int n_max = 30;
  std::size_t node_budget = 4'000'000;
};

/// Default unresolved-cut tolerance max(1e-14, Lambda^-n * 1e-3).
double default_tol_a(double Lambda, int n);

/// Generation-0 interval covering the range.
ParamInterval root_interval(const Family& family, const StartPoint& x, Range range);

/// Children of one interval at the next generation. Cuts are located by
/// bisection on itinerary changes down to machine resolution.
std::vector<ParamInterval> split_next(const Family& family, const StartPoint& x, const ParamInterval& parent,
                                      double tol_a);

/// Continuity partition of `range` at generation n, ordered by left endpoint.
std::vector<ParamInterval> continuity_partition(const Family& family, const StartPoint& x, Range range, int n,
                                                const PartitionOptions& opts = {});

/// Partitions of every generation 0..n.
std::vector<std::vector<ParamInterval>> partition_generations(const Family& family, const StartPoint& x,
                                                              Range range, int n, const PartitionOptions& opts = {});

/// Extend a list of intervals (all of one generation) up to `generation`.
std::vector<ParamInterval> extend_partition(const Family& family, const StartPoint& x,
                                            std::vector<ParamInterval> intervals, int generation,
                                            const PartitionOptions& opts = {});

/// Parameter b in [left, right] with xi_n(b) = target along the interval's
/// itinerary (xi_n is monotone there). target must lie in the image.
double solve_image(const Family& family, const StartPoint& x, const ParamInterval& interval, double target);

struct RefineResult {
  std::vector<ParamInterval> intervals;
  double upper = 0.0;  // 4 c_hat Lambda delta
  bool vacuous = false;
};

/// Split every interval whose image exceeds 4 c_hat Lambda delta evenly in
/// image coordinates. Pieces inherit the parent's generation and itinerary.
RefineResult refine_partition(const std::vector<ParamInterval>& partition, const Family& family,
                              const StartPoint& x, double delta, double c_hat, double Lambda);

/// Number of generation-n intervals with image <= 2 delta that contain more
/// than two generation-(n+1) intervals.
int count_child_violations(const std::vector<ParamInterval>& gen_n, const std::vector<ParamInterval>& gen_n1,
                           double delta);

/// max |xi_n'| / min |xi_n'| over `probes` evenly spaced points of the interval.
double distortion_ratio(const Family& family, const StartPoint& x, const ParamInterval& interval, int probes = 10);

}  // namespace shrinkdim
