#include "shrinkdim/cantor.hpp"
#include "shrinkdim/density.hpp"
#include "shrinkdim/escape.hpp"
#include "shrinkdim/experiment.hpp"
#include "shrinkdim/orbit.hpp"
#include "shrinkdim/partition.hpp"
#include "shrinkdim/pressure.hpp"
#include "shrinkdim/shrinktarget.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace shrinkdim {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double at_or_nan(const std::vector<double>& v, std::size_t k) { return k < v.size() ? v[k] : kNaN; }

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) out += (k ? ";" : "") + v[k];
  return out;
}

std::vector<double> s_grid_of(const ExperimentConfig& c) {
  if (!c.s_grid.empty()) return c.s_grid;
  std::vector<double> g;
  for (int k = 1; k <= 50; ++k) g.push_back(0.02 * k);
  return g;
}

// Middle of the common density support over a few parameters of the range.
struct TargetSupport {
  Range s{0.0, 0.0};
  double y = 0.0;
  bool from_config = false;
};

TargetSupport resolve_target(const ExperimentConfig& c, const Family& f) {
  TargetSupport t;
  if (c.y) {
    t.y = *c.y;
    t.from_config = true;
    t.s = {*c.y, *c.y};
    return t;
  }
  std::vector<double> grid;
  const Range r = f.range();
  for (int j = 0; j < 5; ++j) grid.push_back(r.lo + r.width() * (j + 0.5) / 5.0);
  const CommonSupport cs = common_support(f, grid, c.bins, 1);
  if (cs.empty) throw NumericalFailure("common density support is empty: " + cs.diagnostic);
  t.s = cs.interval;
  t.y = cs.interval.mid();
  return t;
}

// Candidate targets: the resolved one, then up to five perturbations inside S.
std::vector<double> target_candidates(const TargetSupport& t) {
  std::vector<double> ys{t.y};
  if (t.from_config) return ys;
  const double step = t.s.width() / 12.0;
  for (int k : {1, -1, 2, -2, 3}) ys.push_back(t.y + k * step);
  return ys;
}

CantorParams cantor_params(const ExperimentConfig& c, double alpha) {
  CantorParams p;
  p.alpha = alpha;
  p.epsilon = c.epsilon;
  p.iota = c.iota;
  p.delta = c.delta;
  p.levels = c.levels;
  p.probes = c.probes;
  p.children = c.children;
  p.tau1 = c.tau1;
  p.seed = c.seed;
  p.density_bins = c.bins;
  return p;
}

nlohmann::json cantor_summary(const CantorResult& r, const LocalExponent& le, const ScalingAudit& au) {
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& lev : r.levels) {
    if (lev.k == 0) continue;
    int probes = 0, outside = 0, ent = 0, hit = 0, esc = 0, tgt = 0, pruned = 0;
    double count_margin = std::numeric_limits<double>::infinity();
    for (const auto& pr : lev.parents) {
      probes += pr.probes;
      outside += pr.outside;
      ent += pr.rejected_entropy;
      hit += pr.rejected_hit;
      esc += pr.rejected_escape;
      tgt += pr.rejected_target;
      pruned += pr.pruned_verify + pr.pruned_length + pr.pruned_sum + pr.pruned_separation + pr.pruned_image;
      count_margin = std::min(count_margin, pr.count_margin);
    }
    levels.push_back({{"k", lev.k},
                      {"m", lev.m},
                      {"delta_k", lev.delta_k},
                      {"bits", lev.bits},
                      {"intervals", lev.intervals.size()},
                      {"parents", lev.parents.size()},
                      {"probes", probes},
                      {"outside", outside},
                      {"rejected_entropy", ent},
                      {"rejected_hit", hit},
                      {"rejected_escape", esc},
                      {"rejected_target", tgt},
                      {"pruned", pruned},
                      {"min_count_margin", lev.parents.empty() ? 0.0 : count_margin}});
  }
  const auto& c = r.constants;
  return {{"alpha", r.params.alpha},
          {"halted", r.halted},
          {"diagnostic", r.diagnostic},
          {"window_ratio", r.params.window_ratio},
          {"constants",
           {{"h", c.h}, {"tau_hat", c.tau_hat}, {"S1", {c.s1.lo, c.s1.hi}}, {"l", c.l}, {"tau1", c.tau1},
            {"sumfreq_margin", c.sumfreq_margin}, {"p", c.p}, {"c1", c.c1}}},
          {"additivity_error", r.measure.additivity_error},
          {"total_mass", r.measure.total_mass},
          {"s_lower", le.s_lower},
          {"s_lower_defined", le.defined},
          {"level_exponents", le.level_exponents},
          {"scaling_audit",
           {{"s", au.s}, {"c2", au.c2}, {"log_c2_observed", au.log_c2_observed}, {"probes", au.probes},
            {"violations", au.violations}, {"holds", au.holds}}},
          {"levels", levels}};
}

}  // namespace

RunOutput cmd_orbit(const ExperimentConfig& c) {
  const Family f = c.family();
  const StartPoint x = c.start();
  const OrbitRecord rec = run_orbit(f, x, c.a, c.n);
  CsvTable t({"k", "x", "branch", "birkhoff_logderiv", "space_deriv", "param_deriv", "q_ratio"});
  for (std::size_t k = 0; k < rec.points.size(); ++k) {
    t.row().add(static_cast<long long>(k)).add(rec.points[k]);
    t.add(k < rec.itinerary.size() ? rec.itinerary[k] : -1);
    t.add(at_or_nan(rec.birkhoff_logderiv, k)).add(at_or_nan(rec.space_deriv, k));
    t.add(at_or_nan(rec.param_deriv, k)).add(at_or_nan(rec.q_ratio, k));
  }
  RunOutput out{"orbit", {}, {{"a", c.a}, {"n", c.n}, {"hit_breakpoint", rec.hit_breakpoint}}};
  out.add("orbit.csv", t);
  return out;
}

RunOutput cmd_partition(const ExperimentConfig& c) {
  const Family f = c.family();
  const StartPoint x = c.start();
  const auto part = continuity_partition(f, x, f.range(), c.n);
  CsvTable t({"index", "left", "right", "generation", "image_left", "image_right", "image_length", "escape_position",
              "unresolved", "itinerary_hash"});
  int escaping = 0, unresolved = 0;
  for (std::size_t k = 0; k < part.size(); ++k) {
    const auto& iv = part[k];
    const bool esc = iv.in_escape_position(c.delta);
    escaping += esc;
    unresolved += iv.unresolved;
    char hash[20];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(iv.itinerary_hash()));
    t.row().add(static_cast<long long>(k)).add(iv.left).add(iv.right).add(iv.generation);
    t.add(iv.image_left).add(iv.image_right).add(iv.image_length()).add(esc ? 1 : 0).add(iv.unresolved ? 1 : 0);
    t.add(std::string(hash));
  }
  RunOutput out{"partition", {}, {{"n", c.n}, {"intervals", part.size()}, {"escape_position", escaping},
                                  {"unresolved", unresolved}}};
  out.add("partition.csv", t);
  return out;
}

RunOutput cmd_pressure(const ExperimentConfig& c) {
  const Family f = c.family();
  const StartPoint x = c.start();
  const PressureTable table = build_pressure_table(f, x, f.range(), {c.n_min, c.n_max});
  CsvTable fan({"alpha", "s", "n", "p_n", "growth"});
  nlohmann::json roots = nlohmann::json::array();
  for (double alpha : c.alpha) {
    const RootResult root = root_s0(table, alpha);
    roots.push_back({{"alpha", alpha}, {"s0", root.s0}, {"bracket", {root.lo, root.hi}}, {"search_hi", root.search_hi}});
    std::vector<double> ss;
    for (int k = 0; k <= 10; ++k) ss.push_back(0.1 * k);
    ss.push_back(root.s0);
    std::sort(ss.begin(), ss.end());
    for (double s : ss) {
      const PressureEstimate est = pressure_from_table(table, s, alpha, table.estimator);
      for (const auto& [n, p] : est.p_sequence) {
        double g = kNaN;
        for (const auto& [gn, gv] : est.growth_sequence)
          if (gn == n) g = gv;
        fan.row().add(alpha).add(s).add(n).add(p).add(g);
      }
    }
  }
  const nlohmann::json js{{"n_window", {c.n_min, c.n_max}},
                          {"lambda_min", table.lambda_min},
                          {"Lambda_max", table.Lambda_max},
                          {"truncated", table.truncated},
                          {"roots", roots}};
  RunOutput out{"pressure", {}, js};
  out.add("pressure.json", js);
  out.add("pressure.csv", fan);
  return out;
}

RunOutput cmd_cover(const ExperimentConfig& c) {
  const Family f = c.family();
  const StartPoint x = c.start();
  const TargetSupport ts = resolve_target(c, f);
  const auto gens = partition_generations(f, x, f.range(), c.n_max);
  const int dump_n = std::clamp(c.n, c.n_min, c.n_max);
  CsvTable cover({"alpha", "n", "y", "left", "right", "radius", "s_n_mid"});
  CsvTable rates({"alpha", "s", "rate"});
  nlohmann::json per_alpha = nlohmann::json::array();
  for (double alpha : c.alpha) {
    std::vector<std::vector<CoverInterval>> covers;
    std::vector<std::size_t> sizes;
    for (int n = c.n_min; n <= c.n_max; ++n) {
      covers.push_back(build_cover(f, x, gens[n], ts.y, alpha));
      sizes.push_back(covers.back().size());
      if (n == dump_n)
        for (const auto& ci : covers.back())
          cover.row().add(alpha).add(n).add(ci.y).add(ci.left).add(ci.right).add(ci.radius).add(ci.s_n_mid);
    }
    const CriticalExponent ce = critical_exponent_upper(covers, s_grid_of(c));
    for (const auto& [s, r] : ce.rates) rates.row().add(alpha).add(s).add(r);
    per_alpha.push_back({{"alpha", alpha}, {"s_hat", ce.s_hat}, {"empty", ce.empty}, {"cover_sizes", sizes}});
  }
  const nlohmann::json js{{"y", ts.y}, {"n_window", {c.n_min, c.n_max}}, {"covers", per_alpha}};
  RunOutput out{"cover", {}, js};
  out.add("cover.json", js);
  out.add("cover.csv", cover);
  out.add("cover_exponent.csv", rates);
  return out;
}

RunOutput cmd_escape(const ExperimentConfig& c) {
  const Family f = c.family();
  const StartPoint x = c.start();
  const auto part = continuity_partition(f, x, f.range(), 6);
  ParamInterval anchor = part.front();
  for (const auto& iv : part)
    if (iv.image_length() > anchor.image_length()) anchor = iv;
  EscapeOptions o;
  o.delta = c.escape_delta;
  o.iota = c.escape_iota;
  o.steps_per_generation = std::max(1, check_assumptions(f, 2000).iterate_power);
  o.samples = c.samples;
  o.c_hat = estimate_c_hat(f, x, 10);
  o.seed = c.seed;
  const auto recs = escape_analysis(f, x, anchor, c.escape_m, o);
  const TailStatistics st = escape_tail_statistics(recs, c.escape_tau1);
  CsvTable t({"m", "samples", "capped", "exceed", "fraction", "log_fraction"});
  for (const auto& r : st.rows)
    t.row().add(r.m).add(r.samples).add(r.capped).add(r.exceed).add(r.fraction).add(
        r.fraction > 0.0 ? std::log(r.fraction) : kNaN);
  const nlohmann::json js{{"steps_per_generation", o.steps_per_generation},
                          {"anchor", {anchor.left, anchor.right}},
                          {"tau1", c.escape_tau1},
                          {"slope", st.slope},
                          {"rate", st.rate},
                          {"rate_defined", st.rate_defined}};
  RunOutput out{"escape", {}, js};
  out.add("escape.json", js);
  out.add("escape_tail.csv", t);
  return out;
}

RunOutput cmd_cantor(const ExperimentConfig& c) {
  const Family f = c.family();
  const StartPoint x = c.start();
  const ParamInterval seed = select_seed(f, x, c.seed_generation, c.delta);
  CsvTable probes({"alpha", "level", "probe_left", "probe_right", "mu", "log_mu", "exponent", "log_length"});
  CsvTable nodes({"alpha", "level", "node", "parent", "remainder", "n", "y", "approx_left", "log_width", "mu", "log_mu"});
  CsvTable audits({"alpha", "level", "node", "length_ok", "sum_ok", "window_ok", "separation_ok", "image_ok",
                   "membership_ok", "separation_margin_3", "separation_margin_4", "image_error"});
  nlohmann::json trees = nlohmann::json::array(), summaries = nlohmann::json::array();
  for (double alpha : c.alpha) {
    const CantorResult r = build_cantor(f, x, seed, cantor_params(c, alpha));
    const LocalExponent le = local_exponent(r, c.probe_intervals, c.seed);
    const ScalingAudit au = scaling_audit(r, 2 * c.probe_intervals, c.seed);
    for (const auto& pr : le.probes)
      probes.row().add(alpha).add(pr.level).add(pr.approx_left).add(pr.approx_right).add(std::exp(pr.log_mu)).add(
          pr.log_mu).add(pr.exponent).add(pr.log_length);
    for (std::size_t id = 0; id < r.measure.nodes.size(); ++id) {
      const CantorNode& nd = r.measure.nodes[id];
      nodes.row().add(alpha).add(nd.level).add(static_cast<long long>(id)).add(nd.parent).add(nd.remainder ? 1 : 0);
      nodes.add(nd.n).add(nd.y).add(nd.approx_left).add(nd.log_width).add(static_cast<double>(nd.mu)).add(nd.log_mu);
    }
    for (const auto& lev : r.levels)
      for (const auto& pr : lev.parents)
        for (const auto& a : pr.children) {
          audits.row().add(alpha).add(lev.k).add(a.node).add(a.length_ok ? 1 : 0).add(a.sum_ok ? 1 : 0);
          audits.add(a.window_ok ? 1 : 0).add(a.separation_ok ? 1 : 0).add(a.image_ok ? 1 : 0);
          audits.add(a.membership_ok ? 1 : 0).add(a.separation_margin_3).add(a.separation_margin_4).add(a.image_error);
        }
    trees.push_back({{"alpha", alpha}, {"tree", cantor_tree_json(r)}});
    summaries.push_back(cantor_summary(r, le, au));
  }
  const nlohmann::json js{{"seed_interval", {seed.left, seed.right}},
                          {"seed_generation", seed.generation},
                          {"runs", summaries}};
  RunOutput out{"cantor", {}, js};
  out.add("cantor.json", js);
  out.add("cantor_tree.json", nlohmann::json{{"runs", trees}});
  out.add("cantor_probes.csv", probes);
  out.add("cantor_nodes.csv", nodes);
  out.add("cantor_audit.csv", audits);
  return out;
}

RunOutput cmd_density(const ExperimentConfig& c) {
  const Family f = c.family();
  const DensityProfile prof = ulam_density(f, c.a, c.bins);
  const EntropyEstimate ent = rokhlin_entropy(f, c.a, prof);
  CsvTable t({"bin", "x", "density"});
  for (int j = 0; j < prof.bins; ++j) t.row().add(j).add((j + 0.5) / prof.bins).add(prof.values[j]);
  nlohmann::json support = nlohmann::json::array();
  for (const auto& r : prof.support) support.push_back({r.lo, r.hi});
  const nlohmann::json js{{"a", c.a},
                          {"bins", prof.bins},
                          {"entropy", ent.quadrature},
                          {"entropy_birkhoff", ent.birkhoff},
                          {"entropy_flagged", ent.flagged},
                          {"support", support},
                          {"tau_lower", prof.tau_lower},
                          {"tau_upper", prof.tau_upper},
                          {"residual", prof.residual},
                          {"iterations", prof.iterations},
                          {"converged", prof.converged}};
  RunOutput out{"density", {}, js};
  out.add("density.json", js);
  out.add("density.csv", t);
  return out;
}

RunOutput cmd_dimension(const ExperimentConfig& c, std::vector<DimensionReport>* reports_out) {
  const Family f = c.family();
  const StartPoint x = c.start();
  std::vector<DimensionReport> reports;

  std::optional<PressureTable> table;
  std::string pressure_error;
  try {
    table = build_pressure_table(f, x, f.range(), {c.n_min, c.n_max});
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    pressure_error = e.what();
  }
  std::optional<TargetSupport> ts;
  std::vector<std::vector<ParamInterval>> gens;
  std::string cover_error;
  try {
    ts = resolve_target(c, f);
    gens = partition_generations(f, x, f.range(), c.n_max);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    cover_error = e.what();
  }
  std::optional<ParamInterval> seed;
  std::string seed_error;
  try {
    seed = select_seed(f, x, c.seed_generation, c.delta);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    seed_error = e.what();
  }

  nlohmann::json cantor_runs = nlohmann::json::array();
  for (double alpha : c.alpha) {
    DimensionReport rep;
    rep.alpha = alpha;
    rep.predicted = 1.0 / (1.0 + alpha);
    rep.s0 = rep.s_hat_upper = rep.s_lower = kNaN;

    if (table) {
      try {
        rep.s0 = root_s0(*table, alpha).s0;
        if (table->truncated) rep.flags.push_back("pressure_truncated");
      } catch (const std::exception& e) {
        rep.flags.push_back(std::string("pressure_failed: ") + e.what());
      }
    } else {
      rep.flags.push_back("pressure_failed: " + pressure_error);
    }

    if (ts) {
      const auto ys = target_candidates(*ts);
      for (std::size_t k = 0; k < ys.size(); ++k) {
        rep.y = ys[k];
        rep.y_attempts = static_cast<int>(k) + 1;
        try {
          std::vector<std::vector<CoverInterval>> covers;
          for (int n = c.n_min; n <= c.n_max; ++n) covers.push_back(build_cover(f, x, gens[n], rep.y, alpha));
          const CriticalExponent ce = critical_exponent_upper(covers, s_grid_of(c));
          if (ce.empty) throw NumericalFailure("every cover is empty");
          rep.s_hat_upper = ce.s_hat;
          break;
        } catch (const std::exception& e) {
          rep.flags.push_back("cover_failed_at_y=" + format_number(rep.y) + ": " + e.what());
        }
      }
      if (rep.y_attempts > 1) rep.flags.push_back("y_retried");
    } else {
      rep.flags.push_back("cover_failed: " + cover_error);
    }

    if (seed) {
      try {
        const CantorResult r = build_cantor(f, x, *seed, cantor_params(c, alpha));
        const LocalExponent le = local_exponent(r, c.probe_intervals, c.seed);
        const ScalingAudit au = scaling_audit(r, 2 * c.probe_intervals, c.seed);
        if (le.defined) rep.s_lower = le.s_lower;
        if (r.halted) rep.flags.push_back("cantor_halted: " + r.diagnostic);
        if (!le.defined) rep.flags.push_back("s_lower_undefined");
        if (!au.holds) rep.flags.push_back("scaling_audit_failed");
        if (r.measure.additivity_error > 1e-12) rep.flags.push_back("additivity_error");
        cantor_runs.push_back(cantor_summary(r, le, au));
      } catch (const std::exception& e) {
        rep.flags.push_back(std::string("cantor_failed: ") + e.what());
      }
    } else {
      rep.flags.push_back("cantor_failed: " + seed_error);
    }

    if (std::isfinite(rep.s_lower) && std::isfinite(rep.s_hat_upper) &&
        rep.s_lower > rep.s_hat_upper + c.bracket_tolerance)
      rep.flags.push_back("bracket_violation");
    reports.push_back(rep);
  }

  CsvTable t({"alpha", "predicted", "s0", "s_hat_upper", "s_lower", "y", "y_attempts", "flags"});
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : reports) {
    t.row().add(r.alpha).add(r.predicted).add(r.s0).add(r.s_hat_upper).add(r.s_lower).add(r.y).add(r.y_attempts).add(
        join(r.flags));
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    rows.push_back({{"alpha", r.alpha},
                    {"predicted", r.predicted},
                    {"s0", num(r.s0)},
                    {"s_hat_upper", num(r.s_hat_upper)},
                    {"s_lower", num(r.s_lower)},
                    {"y", r.y},
                    {"y_attempts", r.y_attempts},
                    {"flags", r.flags}});
  }
  const nlohmann::json js{{"reports", rows}, {"cantor", cantor_runs}};
  RunOutput out{"dimension", {}, nlohmann::json{{"reports", rows}}};
  out.add("dimension.json", js);
  out.add("dimension.csv", t);
  if (reports_out) *reports_out = std::move(reports);
  return out;
}

}  // namespace shrinkdim
