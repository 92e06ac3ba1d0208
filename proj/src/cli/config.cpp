#include "stratreg/cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

namespace stratreg::cli {

namespace {

[[noreturn]] void fail(int line, const std::string& msg) {
  throw Error(ErrorCode::Config, (line > 0 ? "line " + std::to_string(line) + ": " : std::string()) + msg);
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == ',') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

double to_double(std::string_view s, int line) {
  double v = 0.0;
  if (s == "inf" || s == "+inf") return kInfinity;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) fail(line, "expected a number, got '" + std::string(s) + "'");
  return v;
}

long long to_integer(std::string_view s, int line) {
  long long v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) fail(line, "expected an integer, got '" + std::string(s) + "'");
  return v;
}

int to_int(std::string_view s, int line) {
  const long long v = to_integer(s, line);
  if (v < -2147483647LL || v > 2147483647LL) fail(line, "integer out of range");
  return static_cast<int>(v);
}

bool to_bool(std::string_view s, int line) {
  if (s == "true" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "no" || s == "0") return false;
  fail(line, "expected true or false, got '" + std::string(s) + "'");
}

std::vector<int> to_ints(std::string_view s, int line) {
  std::vector<int> out;
  for (double v : parse_numbers(s, line)) {
    if (v != std::floor(v)) fail(line, "expected integers");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

// Builds a model object, prefixing any failure with the line it came from.
template <class Fn>
auto at_line(int line, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Config) throw;
    std::string msg = e.what();
    const std::string prefix = std::string(to_string(e.code())) + ": ";
    if (msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
    throw Error(e.code(), "line " + std::to_string(line) + ": " + msg);
  }
}

class SectionReader {
 public:
  explicit SectionReader(const RawSection& s) : section_(s) {}

  const RawEntry* get(const std::string& key) {
    const RawEntry* found = nullptr;
    for (const auto& e : section_.entries)
      if (e.key == key) {
        if (found) fail(e.line, "duplicate key '" + key + "' in [" + section_.name + "]");
        found = &e;
      }
    used_.insert(key);
    return found;
  }

  std::vector<const RawEntry*> all(const std::string& key) {
    std::vector<const RawEntry*> out;
    for (const auto& e : section_.entries)
      if (e.key == key) out.push_back(&e);
    used_.insert(key);
    return out;
  }

  void finish() const {
    for (const auto& e : section_.entries)
      if (!used_.count(e.key)) fail(e.line, "unknown key '" + e.key + "' in [" + section_.name + "]");
  }

  int line() const { return section_.line; }

 private:
  const RawSection& section_;
  std::set<std::string> used_;
};

AttributeSpace read_space(SectionReader& r) {
  const RawEntry* kind = r.get("kind");
  const std::string k = kind ? kind->value : "explicit";
  const int kl = kind ? kind->line : r.line();
  if (k == "explicit") {
    std::vector<Vector> points;
    int first = r.line();
    for (const RawEntry* e : r.all("point")) {
      if (points.empty()) first = e->line;
      const auto xs = parse_numbers(e->value, e->line);
      if (xs.empty()) fail(e->line, "empty point");
      points.push_back(Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size())));
    }
    if (points.empty()) fail(r.line(), "[space] needs at least one 'point'");
    std::vector<double> mu;
    if (const RawEntry* e = r.get("mu")) {
      mu = parse_numbers(e->value, e->line);
    } else {
      mu.assign(points.size(), 1.0 / static_cast<double>(points.size()));
    }
    if (mu.size() != points.size()) fail(r.line(), "'mu' must list one probability per point");
    return at_line(first, [&] { return build_attribute_space(points, mu); });
  }
  if (k == "polynomial") {
    const RawEntry* deg = r.get("degree");
    const RawEntry* grid = r.get("grid");
    if (!deg || !grid) fail(kl, "polynomial space needs 'degree' and 'grid'");
    const int d = to_int(deg->value, deg->line);
    const auto g = parse_numbers(grid->value, grid->line);
    std::optional<std::vector<double>> weights;
    const RawEntry* dist = r.get("distribution");
    const RawEntry* w = r.get("weights");
    if (dist && dist->value != "uniform" && dist->value != "weights")
      fail(dist->line, "distribution must be 'uniform' or 'weights'");
    if (dist && dist->value == "weights") {
      if (!w) fail(dist->line, "distribution = weights needs a 'weights' line");
      weights = parse_numbers(w->value, w->line);
    } else if (w) {
      fail(w->line, "'weights' needs distribution = weights");
    }
    return at_line(kl, [&] { return polynomial_design_space(d, g, weights); });
  }
  fail(kl, "unknown space kind '" + k + "'");
}

PlayerPopulation read_population(SectionReader& r) {
  std::vector<CostType> types;
  auto add = [&](const RawEntry* e) {
    const auto words = split_words(e->value);
    if (words.size() < 2) fail(e->line, "expected '<count> <cost spec>'");
    const int count = to_int(words[0], e->line);
    if (count < 1) fail(e->line, "count must be at least 1");
    const auto rest = trim(std::string_view(e->value).substr(e->value.find(words[0]) + words[0].size()));
    types.push_back({parse_cost(rest, e->line), count});
  };
  for (const RawEntry* e : r.all("type")) add(e);
  for (const RawEntry* e : r.all("identical")) add(e);
  if (types.empty()) fail(r.line(), "[population] needs at least one 'type'");
  return PlayerPopulation::build(std::move(types));
}

Scalarization read_scalarization(SectionReader& r) {
  const RawEntry* kind = r.get("kind");
  if (!kind) fail(r.line(), "[scalarization] needs 'kind'");
  const std::string& k = kind->value;
  const RawEntry* q = r.get("q");
  if (q && k != "pow_trace") fail(q->line, "'q' only applies to pow_trace");
  std::vector<Vector> points;
  for (const RawEntry* e : r.all("point")) {
    const auto xs = parse_numbers(e->value, e->line);
    points.push_back(Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size())));
  }
  const RawEntry* weights = r.get("weights");
  return at_line(kind->line, [&]() -> Scalarization {
    if (k == "trace") return Scalarization::trace();
    if (k == "pow_trace") {
      if (!q) fail(kind->line, "pow_trace needs 'q'");
      return Scalarization::pow_trace(to_double(q->value, q->line));
    }
    if (k == "squared_frobenius") return Scalarization::squared_frobenius();
    if (k == "average_mse") {
      std::vector<double> w = weights ? parse_numbers(weights->value, weights->line)
                                      : std::vector<double>(points.size(), 1.0 / std::max<std::size_t>(1, points.size()));
      return Scalarization::average_mse(points, w);
    }
    if (k == "point_mse") return Scalarization::point_mse(points);
    fail(kind->line, "unknown scalarization '" + k + "'");
  });
}

void read_solver(SectionReader& r, SolverOptions& o) {
  if (auto* e = r.get("tol")) o.tol = to_double(e->value, e->line);
  if (auto* e = r.get("max_iters")) o.max_iters = to_int(e->value, e->line);
  if (auto* e = r.get("armijo_c")) o.armijo_c = to_double(e->value, e->line);
  if (auto* e = r.get("shrink")) o.shrink = to_double(e->value, e->line);
  if (auto* e = r.get("initial_step")) o.initial_step = to_double(e->value, e->line);
  if (auto* e = r.get("l_max")) o.l_max = to_double(e->value, e->line);
  if (auto* e = r.get("random_init")) o.random_init = to_bool(e->value, e->line);
  at_line(r.line(), [&] {
    o.validate();
    return 0;
  });
}

std::vector<std::pair<double, double>> read_pairs(const RawEntry& e) {
  std::vector<std::pair<double, double>> out;
  for (const auto& w : split_words(e.value)) {
    const auto colon = w.find(':');
    if (colon == std::string::npos) fail(e.line, "expected p_min:p_max, got '" + w + "'");
    out.emplace_back(to_double(std::string_view(w).substr(0, colon), e.line),
                     to_double(std::string_view(w).substr(colon + 1), e.line));
  }
  return out;
}

std::vector<int> default_n_grid() {
  std::vector<int> n;
  for (int v = 3; v <= 768; v *= 2) n.push_back(v);
  return n;
}

SweepSpec read_sweep(SectionReader& r) {
  SweepSpec s;
  if (auto* e = r.get("family")) {
    s.family = e->value;
    if (s.family != "identical" && s.family != "heterogeneous" && s.family != "polynomial" && s.family != "cosh")
      fail(e->line, "family must be identical, heterogeneous, polynomial or cosh");
  }
  const RawEntry* n = r.get("n");
  const RawEntry* geo = r.get("n_geometric");
  if (n && geo) fail(geo->line, "give either 'n' or 'n_geometric'");
  if (n) {
    s.n = to_ints(n->value, n->line);
  } else if (geo) {
    const auto v = parse_numbers(geo->value, geo->line);
    if (v.size() != 3 || v[0] < 1 || v[1] <= 1 || v[2] < v[0])
      fail(geo->line, "n_geometric = <start> <ratio> <cap>");
    for (double x = v[0]; x <= v[2] + 1e-9; x *= v[1]) s.n.push_back(static_cast<int>(std::llround(x)));
  } else {
    s.n = default_n_grid();
  }
  const int nl = n ? n->line : geo ? geo->line : r.line();
  if (s.n.size() < 3) fail(nl, "the n-grid needs at least 3 points");
  for (std::size_t i = 0; i < s.n.size(); ++i) {
    if (s.n[i] < 1) fail(nl, "n must be positive");
    if (i > 0 && s.n[i] <= s.n[i - 1]) fail(nl, "the n-grid must be strictly increasing");
  }
  if (auto* e = r.get("p")) s.p = parse_numbers(e->value, e->line);
  if (auto* e = r.get("q")) s.q = parse_numbers(e->value, e->line);
  if (s.q.empty()) s.q = {1.0};
  const RawEntry* pairs = r.get("pairs");
  if (pairs) s.pairs = read_pairs(*pairs);

  if (s.family == "identical" && s.p.empty()) fail(r.line(), "identical sweep needs 'p'");
  if ((s.family == "heterogeneous" || s.family == "polynomial") && s.pairs.empty())
    fail(r.line(), s.family + " sweep needs 'pairs'");
  if (s.family == "heterogeneous")
    for (int v : s.n)
      if (v % 3 != 0) fail(nl, "heterogeneous sweeps need n divisible by 3");
  if (s.family == "polynomial")
    for (const auto& [lo, hi] : s.pairs)
      if (lo != std::floor(lo) || hi != std::floor(hi) || lo < 1 || hi < lo)
        fail(pairs->line, "polynomial family needs integer 1 <= p_min <= p_max");
  return s;
}

PoaSpec read_poa(SectionReader& r) {
  PoaSpec s;
  if (auto* e = r.get("n")) s.n = to_ints(e->value, e->line);
  if (auto* e = r.get("p")) s.p = parse_numbers(e->value, e->line);
  if (auto* e = r.get("q")) s.q = parse_numbers(e->value, e->line);
  if (s.n.empty()) s.n = {1, 4, 16, 64, 256};
  if (s.p.empty()) s.p = {1.0};
  if (s.q.empty()) s.q = {1.0};
  for (int v : s.n)
    if (v < 1) fail(r.line(), "n must be positive");
  return s;
}

}  // namespace

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<double> parse_numbers(std::string_view text, int line) {
  const auto t = trim(text);
  const auto dots = t.find("..");
  if (dots != std::string_view::npos) {
    const long long a = to_integer(trim(t.substr(0, dots)), line);
    const long long b = to_integer(trim(t.substr(dots + 2)), line);
    if (b < a) fail(line, "empty range");
    if (b - a > 1000000) fail(line, "range too long");
    std::vector<double> out;
    for (long long v = a; v <= b; ++v) out.push_back(static_cast<double>(v));
    return out;
  }
  std::vector<double> out;
  for (const auto& w : split_words(t)) out.push_back(to_double(w, line));
  return out;
}

ProvisionCost parse_cost(std::string_view spec, int line) {
  const auto words = split_words(spec);
  if (words.empty()) fail(line, "empty cost spec");
  const std::string& kind = words[0];
  return at_line(line, [&]() -> ProvisionCost {
    if (kind == "linear" || kind == "monomial") {
      if (words.size() != 2) fail(line, kind + " takes one number");
      const double v = to_double(words[1], line);
      return kind == "linear" ? ProvisionCost::linear(v) : ProvisionCost::monomial(v);
    }
    if (kind == "polynomial") {
      std::vector<double> c, d;
      for (std::size_t i = 1; i < words.size(); ++i) {
        const auto colon = words[i].find(':');
        if (colon == std::string::npos) fail(line, "polynomial terms are coef:degree");
        c.push_back(to_double(std::string_view(words[i]).substr(0, colon), line));
        d.push_back(to_double(std::string_view(words[i]).substr(colon + 1), line));
      }
      return ProvisionCost::polynomial(c, d);
    }
    if (kind == "cosh") {
      if (words.size() != 1) fail(line, "cosh takes no arguments");
      return ProvisionCost::cosh_minus_one();
    }
    fail(line, "unknown cost kind '" + kind + "'");
  });
}

std::vector<RawSection> parse_sections(std::string_view text) {
  std::vector<RawSection> sections;
  int line = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line;
    auto s = raw;
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') fail(line, "malformed section header");
      const auto name = trim(s.substr(1, s.size() - 2));
      if (name.empty()) fail(line, "empty section name");
      for (const auto& existing : sections)
        if (existing.name == name) fail(line, "duplicate section [" + std::string(name) + "]");
      sections.push_back({std::string(name), line, {}});
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) fail(line, "expected 'key = value'");
    const auto key = trim(s.substr(0, eq));
    const auto value = trim(s.substr(eq + 1));
    if (key.empty()) fail(line, "missing key");
    if (sections.empty()) fail(line, "key outside of any section");
    sections.back().entries.push_back({std::string(key), std::string(value), line});
  }
  return sections;
}

const AttributeSpace& GameConfig::attribute_space() const {
  static const AttributeSpace unit = build_attribute_space({Vector::Ones(1)}, {1.0});
  return space ? *space : unit;
}

const PlayerPopulation& GameConfig::players() const {
  if (!population) throw Error(ErrorCode::Config, "this command needs a [population] section");
  return *population;
}

GameConfig parse_config(std::string_view text) {
  GameConfig cfg;
  for (const RawSection& section : parse_sections(text)) {
    SectionReader r(section);
    const std::string& name = section.name;
    if (name == "space") {
      cfg.space = read_space(r);
    } else if (name == "population") {
      cfg.population = read_population(r);
    } else if (name == "scalarization") {
      cfg.scalarization = read_scalarization(r);
    } else if (name == "solver") {
      read_solver(r, cfg.solver);
    } else if (name == "sweep") {
      cfg.sweep = read_sweep(r);
    } else if (name == "poa") {
      cfg.poa = read_poa(r);
    } else if (name == "ols") {
      if (auto* e = r.get("family")) {
        if (e->value != "counterexample" && e->value != "config")
          fail(e->line, "family must be counterexample or config");
        cfg.ols.family = e->value;
      }
      if (auto* e = r.get("n")) cfg.ols.n = to_ints(e->value, e->line);
      if (auto* e = r.get("p")) cfg.ols.p = to_double(e->value, e->line);
      if (auto* e = r.get("mode")) {
        if (e->value != "exact" && e->value != "monte_carlo") fail(e->line, "mode must be exact or monte_carlo");
        cfg.ols.exact = e->value == "exact";
      }
      if (auto* e = r.get("samples")) cfg.ols.samples = to_int(e->value, e->line);
      if (cfg.ols.samples < 1) fail(section.line, "samples must be positive");
      if (!(cfg.ols.p >= 1.0)) fail(section.line, "p must be at least 1");
      for (int v : cfg.ols.n)
        if (v < 1) fail(section.line, "n must be positive");
    } else if (name == "equivalence") {
      if (auto* e = r.get("epsilon")) cfg.equivalence.epsilon = to_double(e->value, e->line);
      if (auto* e = r.get("trials")) cfg.equivalence.trials = to_int(e->value, e->line);
      if (!(cfg.equivalence.epsilon > 0.0 && cfg.equivalence.epsilon < 0.5))
        fail(section.line, "epsilon must lie in (0, 1/2)");
      if (cfg.equivalence.trials < 1) fail(section.line, "trials must be positive");
    } else if (name == "simulate") {
      if (auto* e = r.get("beta")) cfg.simulate.beta = parse_numbers(e->value, e->line);
      if (auto* e = r.get("trials")) cfg.simulate.trials = to_int(e->value, e->line);
      if (auto* e = r.get("precision")) {
        if (e->value != "equilibrium") cfg.simulate.constant_precision = to_double(e->value, e->line);
      }
      if (cfg.simulate.trials < 1) fail(section.line, "trials must be positive");
    } else if (name == "run") {
      if (auto* e = r.get("seed")) {
        const long long v = to_integer(e->value, e->line);
        if (v < 0) fail(e->line, "seed must be nonnegative");
        cfg.seed = static_cast<std::uint64_t>(v);
      }
      if (auto* e = r.get("out")) cfg.out_dir = e->value;
    } else {
      fail(section.line, "unknown section [" + name + "]");
    }
    r.finish();
  }
  return cfg;
}

}  // namespace stratreg::cli
