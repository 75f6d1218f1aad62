#include "shrinkdim/family.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace shrinkdim {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kBoundaryTol = 1e-14;

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

std::pair<double, double> sorted(double u, double v) { return u <= v ? std::pair{u, v} : std::pair{v, u}; }

void validate(const FixedMap& m) {
  require(m.breaks.size() >= 2, "fixed map: need at least one branch");
  require(m.breaks.front() == 0.0 && m.breaks.back() == 1.0, "fixed map: breaks must start at 0 and end at 1");
  require(m.slopes.size() + 1 == m.breaks.size() && m.offsets.size() == m.slopes.size(),
          "fixed map: slopes/offsets must have one entry per branch");
  for (std::size_t i = 1; i < m.breaks.size(); ++i)
    require(m.breaks[i] > m.breaks[i - 1], "fixed map: breaks must be strictly increasing");
}

void validate(const GeneralisedBeta& g) {
  require(g.cuts.size() >= 2 && g.cuts.front() == 0.0, "generalised beta: cuts must start at 0");
  for (std::size_t i = 1; i < g.cuts.size(); ++i)
    require(g.cuts[i] > g.cuts[i - 1], "generalised beta: cuts must be strictly increasing");
  for (std::size_t i = 1; i < g.cuts.size(); ++i)
    require(g.cuts[i] - g.cuts[i - 1] <= 1.0, "generalised beta: base map must have slope >= 1 on every piece");
}

void validate(const Tent& t, const Range& r) {
  for (int j = 0; j <= 100; ++j) {
    const double a = r.lo + r.width() * j / 100.0;
    require(t.alpha(a) > 1.0 && t.beta(a) > 1.0, "tent: slopes must exceed 1");
    require(1.0 / t.alpha(a) + 1.0 / t.beta(a) >= 1.0 - 1e-12, "tent: need 1/alpha + 1/beta >= 1");
  }
}

void validate(const MarkovLinear& m, const Range& r) {
  require(m.breaks.size() >= 2, "markov: need at least one branch");
  for (double a : {r.lo, r.hi}) {
    auto b = [&](std::size_t i) { return m.breaks[i].first + m.breaks[i].second * a; };
    require(b(0) == 0.0 && b(m.breaks.size() - 1) == 1.0, "markov: breaks must run from 0 to 1");
    for (std::size_t i = 1; i < m.breaks.size(); ++i)
      require(b(i) > b(i - 1), "markov: breaks must be strictly increasing");
  }
}

}  // namespace

double GeneralisedBeta::cut(int n) const {
  const int last = static_cast<int>(cuts.size()) - 1;
  if (n <= last) return cuts[n];
  return cuts[last] + (n - last) * (cuts[last] - cuts[last - 1]);
}

int GeneralisedBeta::cut_index(double u) const {
  const int last = static_cast<int>(cuts.size()) - 1;
  if (u >= cuts[last]) {
    const double gap = cuts[last] - cuts[last - 1];
    int n = last + static_cast<int>(std::floor((u - cuts[last]) / gap));
    while (cut(n + 1) <= u) ++n;
    while (cut(n) > u) --n;
    return n;
  }
  return static_cast<int>(std::upper_bound(cuts.begin(), cuts.end(), u) - cuts.begin()) - 1;
}

std::string to_string(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::fixed: return "fixed";
    case FamilyKind::generalised_beta: return "generalised_beta";
    case FamilyKind::negative_beta: return "negative_beta";
    case FamilyKind::tent: return "tent";
    case FamilyKind::markov_linear: return "markov_linear";
  }
  return "unknown";
}

double StartPoint::value(double a) const {
  switch (type) {
    case Type::constant: return c0;
    case Type::identity: return a;
    case Type::affine: return c0 + c1 * a;
  }
  return c0;
}

double StartPoint::deriv(double) const {
  switch (type) {
    case Type::constant: return 0.0;
    case Type::identity: return 1.0;
    case Type::affine: return c1;
  }
  return 0.0;
}

Family::Family(Variant map, Range range) : map_(std::move(map)), range_(range) {
  require(range_.lo <= range_.hi, "parameter range must satisfy a0 <= a1");
  std::visit(overloaded{
                 [](const FixedMap& m) { validate(m); },
                 [&](const GeneralisedBeta& g) {
                   validate(g);
                   require(range_.lo > 0.0, "generalised beta: parameters must be positive");
                 },
                 [&](const NegativeBeta&) { require(range_.lo > 1.0, "negative beta: need a > 1"); },
                 [&](const Tent& t) { validate(t, range_); },
                 [&](const MarkovLinear& m) { validate(m, range_); },
             },
             map_);
}

Family Family::doubling(Range range) { return fixed_multiplier(2, range); }

Family Family::fixed_multiplier(int m, Range range) {
  require(m >= 2, "multiplier must be at least 2");
  FixedMap f;
  for (int i = 0; i <= m; ++i) f.breaks.push_back(static_cast<double>(i) / m);
  f.breaks.back() = 1.0;
  f.slopes.assign(m, static_cast<double>(m));
  f.offsets.assign(m, 0.0);
  return Family(f, range);
}

Family Family::beta(Range range) { return Family(GeneralisedBeta{}, range); }
Family Family::negative_beta(Range range) { return Family(NegativeBeta{}, range); }
Family Family::tent(Tent t, Range range) { return Family(t, range); }

Family Family::markov_equal(int branches, Range range) {
  require(branches >= 2, "markov: need at least two branches");
  MarkovLinear m;
  for (int i = 0; i <= branches; ++i) m.breaks.emplace_back(static_cast<double>(i) / branches, 0.0);
  m.breaks.back().first = 1.0;
  return Family(m, range);
}

FamilyKind Family::kind() const {
  return std::visit(overloaded{
                        [](const FixedMap&) { return FamilyKind::fixed; },
                        [](const GeneralisedBeta&) { return FamilyKind::generalised_beta; },
                        [](const NegativeBeta&) { return FamilyKind::negative_beta; },
                        [](const Tent&) { return FamilyKind::tent; },
                        [](const MarkovLinear&) { return FamilyKind::markov_linear; },
                    },
                    map_);
}

void Family::check_a(double a) const {
  if (!range_.contains(a)) throw std::domain_error("parameter outside the family's range");
}

void Family::check_x(double x) const {
  if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error("point outside the phase interval [0, 1]");
}

std::vector<double> Family::breakpoints(double a) const {
  return std::visit(overloaded{
                        [](const FixedMap& m) { return m.breaks; },
                        [a](const GeneralisedBeta& g) {
                          std::vector<double> b{0.0};
                          for (int n = 1; g.cut(n) < a; ++n) b.push_back(g.cut(n) / a);
                          b.push_back(1.0);
                          return b;
                        },
                        [a](const NegativeBeta&) {
                          std::vector<double> b{0.0};
                          for (int k = 1; k < a; ++k) b.push_back(k / a);
                          b.push_back(1.0);
                          return b;
                        },
                        [a](const Tent& t) { return std::vector<double>{0.0, t.turning(a), 1.0}; },
                        [a](const MarkovLinear& m) {
                          std::vector<double> b;
                          b.reserve(m.breaks.size());
                          for (const auto& [c0, c1] : m.breaks) b.push_back(c0 + c1 * a);
                          b.front() = 0.0;
                          b.back() = 1.0;
                          return b;
                        },
                    },
                    map_);
}

int Family::branch_count(double a) const { return static_cast<int>(breakpoints(a).size()) - 1; }

int Family::branch_of(double a, double x) const {
  if (const auto* t = std::get_if<Tent>(&map_)) return x <= t->turning(a) ? 0 : 1;
  if (const auto* g = std::get_if<GeneralisedBeta>(&map_)) {
    if (x >= 1.0) return g->cut_index(a) - (g->cut(g->cut_index(a)) == a ? 1 : 0);
    return g->cut_index(a * x);
  }
  if (std::holds_alternative<NegativeBeta>(map_)) {
    const int last = static_cast<int>(std::ceil(a)) - 1;
    if (x >= 1.0) return last;
    return std::min(last, static_cast<int>(std::floor(a * x)));
  }
  const auto b = breakpoints(a);
  const int i = static_cast<int>(std::upper_bound(b.begin(), b.end(), x) - b.begin()) - 1;
  return std::clamp(i, 0, static_cast<int>(b.size()) - 2);
}

double Family::value_on(int i, double a, double x) const {
  return std::visit(overloaded{
                        [&](const FixedMap& m) { return m.offsets[i] + m.slopes[i] * (x - m.breaks[i]); },
                        [&](const GeneralisedBeta& g) {
                          return (a * x - g.cut(i)) / (g.cut(i + 1) - g.cut(i));
                        },
                        [&](const NegativeBeta&) { return (i + 1) - a * x; },
                        [&](const Tent& t) {
                          const double al = t.alpha(a), be = t.beta(a);
                          if (i == 0) return al * (1.0 - be) / be + al * x + 1.0;
                          return be * (1.0 - x);
                        },
                        [&](const MarkovLinear& m) {
                          const double l = m.breaks[i].first + m.breaks[i].second * a;
                          const double r = m.breaks[i + 1].first + m.breaks[i + 1].second * a;
                          return (x - l) / (r - l);
                        },
                    },
                    map_);
}

double Family::dx_on(int i, double a, double) const {
  return std::visit(overloaded{
                        [&](const FixedMap& m) { return m.slopes[i]; },
                        [&](const GeneralisedBeta& g) { return a / (g.cut(i + 1) - g.cut(i)); },
                        [&](const NegativeBeta&) { return -a; },
                        [&](const Tent& t) { return i == 0 ? t.alpha(a) : -t.beta(a); },
                        [&](const MarkovLinear& m) {
                          const double l = m.breaks[i].first + m.breaks[i].second * a;
                          const double r = m.breaks[i + 1].first + m.breaks[i + 1].second * a;
                          return 1.0 / (r - l);
                        },
                    },
                    map_);
}

double Family::da_on(int i, double a, double x) const {
  return std::visit(overloaded{
                        [](const FixedMap&) { return 0.0; },
                        [&](const GeneralisedBeta& g) { return x / (g.cut(i + 1) - g.cut(i)); },
                        [&](const NegativeBeta&) { return -x; },
                        [&](const Tent& t) {
                          const double al = t.alpha(a), be = t.beta(a);
                          if (i == 0) return t.alpha1 * (1.0 / be - 1.0 + x) - al * t.beta1 / (be * be);
                          return t.beta1 * (1.0 - x);
                        },
                        [&](const MarkovLinear& m) {
                          const double l = m.breaks[i].first + m.breaks[i].second * a;
                          const double r = m.breaks[i + 1].first + m.breaks[i + 1].second * a;
                          const double dl = m.breaks[i].second, dr = m.breaks[i + 1].second;
                          const double w = r - l;
                          return (-dl * w - (x - l) * (dr - dl)) / (w * w);
                        },
                    },
                    map_);
}

Eval Family::eval(double a, double x) const {
  check_a(a);
  check_x(x);
  const int i = branch_of(a, x);
  return {value_on(i, a, x), i};
}

double Family::deriv_x(double a, double x) const {
  check_a(a);
  check_x(x);
  return dx_on(branch_of(a, x), a, x);
}

BoundaryDerivative Family::deriv_a(double a, double x) const {
  check_a(a);
  check_x(x);
  if (kind() == FamilyKind::fixed) return {0.0, false};
  const auto b = breakpoints(a);
  for (std::size_t k = 1; k + 1 < b.size(); ++k)
    if (std::abs(x - b[k]) <= kBoundaryTol) return {0.0, true};
  return {da_on(branch_of(a, x), a, x), false};
}

std::pair<double, double> Family::branch_image(int i, double a) const {
  const auto b = breakpoints(a);
  return sorted(value_on(i, a, b[i]), value_on(i, a, b[i + 1]));
}

int iterate_power_for(double lambda) {
  if (!(lambda > 1.0)) return 0;
  int m = std::max(1, static_cast<int>(std::ceil(5.0 / std::log(lambda) - 1e-12)));
  while (m * std::log(lambda) < 5.0) ++m;
  return m;
}

AssumptionReport check_assumptions(const Family& family, int grid_density) {
  if (grid_density < 2) throw std::invalid_argument("grid_density must be at least 2");
  AssumptionReport rep;
  rep.lambda_min = std::numeric_limits<double>::infinity();
  const Range& r = family.range();
  const int na = r.width() > 0.0 ? grid_density : 1;
  for (int ja = 0; ja < na; ++ja) {
    const double a = na == 1 ? r.lo : r.lo + r.width() * ja / (na - 1);
    const auto b = family.breakpoints(a);
    int branch = 0;
    double prev_x = 0.0, prev_d = 0.0;
    int prev_branch = -1;
    for (int jx = 0; jx < grid_density; ++jx) {
      const double x = static_cast<double>(jx) / (grid_density - 1);
      while (branch + 2 < static_cast<int>(b.size()) && x >= b[branch + 1]) ++branch;
      const double d = std::abs(family.dx_on(branch, a, x));
      rep.lambda_min = std::min(rep.lambda_min, d);
      rep.Lambda_max = std::max(rep.Lambda_max, d);
      if (branch == prev_branch && x > prev_x)
        rep.lipschitz_L = std::max(rep.lipschitz_L, std::abs(d - prev_d) / (x - prev_x));
      prev_x = x;
      prev_d = d;
      prev_branch = branch;
    }
  }
  rep.expansion_ok = rep.lambda_min > 1.0;
  rep.iterate_power = rep.expansion_ok ? iterate_power_for(rep.lambda_min) : 0;
  return rep;
}

double negative_beta_admissible_lower(int k, double tol) {
  if (k < 2) throw std::domain_error("no admissible parameters with integer part below 2");
  auto f = [k](double a) { return 2.0 * a * (a - k) - 2.0 - a; };
  double lo = k, hi = k + 1.0;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

bool negative_beta_admissible(double a) {
  const double k = std::floor(a);
  return 2.0 * a * (a - k) - 2.0 - a > 0.0;
}

namespace {

std::pair<double, double> affine_coeffs(const nlohmann::json& j) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  require(j.is_array() && j.size() == 2, "expected a number or a [c0, c1] pair");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

StartPoint start_point_from_json(const nlohmann::json& j) {
  const std::string type = j.value("type", "constant");
  if (type == "constant") return StartPoint::constant(j.value("value", 1.0));
  if (type == "identity") return StartPoint::identity();
  if (type == "affine") return StartPoint::affine(j.at("c0").get<double>(), j.at("c1").get<double>());
  throw std::invalid_argument("unsupported X type '" + type + "' (constant, identity, affine)");
}

Family family_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  const auto ar = j.at("a_range");
  require(ar.is_array() && ar.size() == 2, "a_range must be [a0, a1]");
  const Range range{ar[0].get<double>(), ar[1].get<double>()};
  const nlohmann::json params = j.value("params", nlohmann::json::object());

  if (kind == "fixed") {
    if (params.contains("multiplier")) return Family::fixed_multiplier(params["multiplier"].get<int>(), range);
    FixedMap m;
    m.breaks = params.at("breaks").get<std::vector<double>>();
    m.slopes = params.at("slopes").get<std::vector<double>>();
    m.offsets = params.value("offsets", std::vector<double>(m.slopes.size(), 0.0));
    return Family(m, range);
  }
  if (kind == "generalised_beta") {
    GeneralisedBeta g;
    if (params.contains("cuts")) g.cuts = params["cuts"].get<std::vector<double>>();
    return Family(g, range);
  }
  if (kind == "negative_beta") return Family::negative_beta(range);
  if (kind == "tent") {
    Tent t;
    std::tie(t.alpha0, t.alpha1) = affine_coeffs(params.at("alpha"));
    std::tie(t.beta0, t.beta1) = affine_coeffs(params.at("beta"));
    return Family::tent(t, range);
  }
  if (kind == "markov_linear") {
    if (params.contains("branches")) return Family::markov_equal(params["branches"].get<int>(), range);
    MarkovLinear m;
    for (const auto& b : params.at("breaks")) m.breaks.push_back(affine_coeffs(b));
    return Family(m, range);
  }
  throw std::invalid_argument("unknown family kind '" + kind + "'");
}

nlohmann::json to_json(const StartPoint& x) {
  switch (x.type) {
    case StartPoint::Type::constant: return {{"type", "constant"}, {"value", x.c0}};
    case StartPoint::Type::identity: return {{"type", "identity"}};
    case StartPoint::Type::affine: return {{"type", "affine"}, {"c0", x.c0}, {"c1", x.c1}};
  }
  return {};
}

nlohmann::json to_json(const Family& family) {
  nlohmann::json params = std::visit(
      overloaded{
          [](const FixedMap& m) -> nlohmann::json {
            return {{"breaks", m.breaks}, {"slopes", m.slopes}, {"offsets", m.offsets}};
          },
          [](const GeneralisedBeta& g) -> nlohmann::json { return {{"cuts", g.cuts}}; },
          [](const NegativeBeta&) -> nlohmann::json { return nlohmann::json::object(); },
          [](const Tent& t) -> nlohmann::json {
            return {{"alpha", {t.alpha0, t.alpha1}}, {"beta", {t.beta0, t.beta1}}};
          },
          [](const MarkovLinear& m) -> nlohmann::json {
            nlohmann::json b = nlohmann::json::array();
            for (const auto& [c0, c1] : m.breaks) b.push_back({c0, c1});
            return {{"breaks", b}};
          },
      },
      family.map());
  return {{"kind", to_string(family.kind())},
          {"params", params},
          {"a_range", {family.range().lo, family.range().hi}}};
}

}  // namespace shrinkdim
