#include "stratreg/cli/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <thread>
#include <tuple>

#include "stratreg/analysis.hpp"
#include "stratreg/cli/csv.hpp"
#include "stratreg/cli/svg.hpp"
#include "stratreg/estimator.hpp"
#include "stratreg/solver.hpp"

namespace stratreg::cli {

namespace fs = std::filesystem;

std::string config_hash(const std::string& text, std::uint64_t seed, bool normalize) {
  std::string material = text;
  material += "\nseed=" + std::to_string(seed);
  material += normalize ? "\nnormalize=1" : "\nnormalize=0";
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(material)));
  return buf;
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::Config: return 2;
    case ErrorCode::NotConverged: return 3;
    default: return 4;
  }
}

namespace {

// Runs task(i) for i in [0, count) on up to `jobs` threads. The first failure
// by index is rethrown so the reported error does not depend on scheduling.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& task) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto threads = static_cast<std::size_t>(std::max(1, jobs));
  std::vector<std::thread> pool;
  for (std::size_t k = 1; k < std::min(threads, count); ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void prepare(const RunContext& ctx) { fs::create_directories(ctx.out); }

void add_point_columns(std::vector<std::string>& header, const AttributeSpace& space) {
  if (space.abscissae()) {
    header.push_back("abscissa");
  } else {
    for (int k = 0; k < space.dim(); ++k) header.push_back("x" + std::to_string(k));
  }
}

void add_point_values(CsvTable& t, const AttributeSpace& space, std::size_t x) {
  if (space.abscissae()) {
    t.add((*space.abscissae())[x]);
  } else {
    for (int k = 0; k < space.dim(); ++k) t.add(space.point(x)[k]);
  }
}

std::string point_label(const AttributeSpace& space, std::size_t x) {
  if (space.abscissae()) return format_number((*space.abscissae())[x]);
  return std::to_string(x);
}

double total_precision(const AttributeSpace& space, const PlayerPopulation& pop, const PrecisionProfile& profile) {
  return equilibrium_design_measure(space, pop, profile).mass();
}

}  // namespace

// ---------------------------------------------------------------------------

int cmd_equilibrium(const RunContext& ctx) {
  const auto& space = ctx.config.attribute_space();
  const auto& pop = ctx.config.players();
  const auto& F = ctx.config.scalarization;
  SolverOptions opts = ctx.config.solver;
  opts.seed = ctx.seed;
  const EquilibriumResult r = minimize_potential(space, pop, F, opts);
  prepare(ctx);

  const DesignMeasure nu = equilibrium_design_measure(space, pop, r.profile);
  const double mass = nu.mass();
  std::vector<std::string> header{"point_index"};
  add_point_columns(header, space);
  header.insert(header.end(), {"mu", "nu_eq", "nu_eq_normalized"});
  for (std::size_t t = 0; t < pop.types(); ++t) header.push_back("lambda_" + std::to_string(t));
  CsvTable table(header);
  std::vector<Bar> bars;
  for (std::size_t x = 0; x < space.size(); ++x) {
    const auto xi = static_cast<Eigen::Index>(x);
    table.row().add(static_cast<long long>(x));
    add_point_values(table, space, x);
    const double normalized = mass > 0.0 ? nu.nu[xi] / mass : 0.0;
    table.add(space.mu(x)).add(nu.nu[xi]).add(normalized);
    for (std::size_t t = 0; t < pop.types(); ++t) table.add(r.profile.lambda(static_cast<Eigen::Index>(t), xi));
    bars.push_back({point_label(space, x), normalized});
  }
  table.write(ctx.out / "equilibrium.csv", ctx.config_hash);

  CsvTable summary({"potential", "estimation_cost", "kkt_residual", "iterations", "converged", "total_mass"});
  summary.row().add(r.potential_value).add(r.estimation_cost).add(r.kkt_residual).add(r.iterations).add(r.converged).add(mass);
  summary.write(ctx.out / "summary.csv", ctx.config_hash);

  if (ctx.svg) write_text(ctx.out / "equilibrium.svg", svg_bar_chart("Normalized equilibrium precision measure", bars));
  return r.converged ? 0 : 3;
}

int cmd_design(const RunContext& ctx) {
  const auto& space = ctx.config.attribute_space();
  const auto& F = ctx.config.scalarization;
  const DesignResult d = solve_optimal_design(space, F, ctx.config.solver);
  prepare(ctx);

  std::vector<std::string> header{"point_index"};
  add_point_columns(header, space);
  header.insert(header.end(), {"weight", "criterion"});
  CsvTable table(header);
  std::vector<Bar> bars;
  for (std::size_t x = 0; x < space.size(); ++x) {
    table.row().add(static_cast<long long>(x));
    add_point_values(table, space, x);
    table.add(d.design.nu[static_cast<Eigen::Index>(x)]).add(d.criterion);
    bars.push_back({point_label(space, x), d.design.nu[static_cast<Eigen::Index>(x)]});
  }
  table.write(ctx.out / "design.csv", ctx.config_hash);

  CsvTable summary({"criterion", "duality_gap", "iterations", "converged"});
  summary.row().add(d.criterion).add(d.duality_gap).add(d.iterations).add(d.converged);
  summary.write(ctx.out / "summary.csv", ctx.config_hash);

  if (ctx.svg) write_text(ctx.out / "design.svg", svg_bar_chart("Optimal design", bars));
  return d.converged ? 0 : 3;
}

// ---------------------------------------------------------------------------
// Sweep

namespace {

struct SeriesSpec {
  std::string name;
  std::string family;
  double p_min = 1.0;
  double p_max = 1.0;
  double q = 1.0;
};

struct SweepPoint {
  std::size_t series = 0;
  int n = 0;
  double estimation_cost = 0.0;
  double total_cost = 0.0;
  double total_precision = 0.0;
  double kkt_residual = 0.0;
  bool converged = false;
};

PlayerPopulation series_population(const SeriesSpec& s, int n) {
  if (s.family == "identical") return PlayerPopulation::identical(ProvisionCost::monomial(s.p_min), n);
  if (s.family == "heterogeneous")
    return PlayerPopulation::build({{ProvisionCost::monomial(s.p_min), 2 * n / 3}, {ProvisionCost::monomial(s.p_max), n / 3}});
  if (s.family == "polynomial") {
    std::vector<double> coeffs, degrees;
    for (double k = s.p_min; k <= s.p_max; k += 1.0) {
      coeffs.push_back(1.0);
      degrees.push_back(k);
    }
    return PlayerPopulation::identical(ProvisionCost::polynomial(coeffs, degrees), n);
  }
  return PlayerPopulation::identical(ProvisionCost::cosh_minus_one(), n);
}

std::vector<SeriesSpec> expand_series(const SweepSpec& sweep) {
  std::vector<SeriesSpec> out;
  for (double q : sweep.q) {
    const std::string qs = "q=" + format_number(q);
    if (sweep.family == "identical") {
      for (double p : sweep.p) out.push_back({"p=" + format_number(p) + " " + qs, sweep.family, p, p, q});
    } else if (sweep.family == "cosh") {
      out.push_back({"cosh " + qs, sweep.family, 2.0, kInfinity, q});
    } else {
      for (const auto& [lo, hi] : sweep.pairs)
        out.push_back({sweep.family + " " + format_number(lo) + ":" + format_number(hi) + " " + qs, sweep.family, lo,
                       hi, q});
    }
  }
  return out;
}

}  // namespace

int cmd_sweep(const RunContext& ctx) {
  if (!ctx.config.sweep) throw Error(ErrorCode::Config, "sweep needs a [sweep] section");
  const SweepSpec& sweep = *ctx.config.sweep;
  const auto& space = ctx.config.attribute_space();
  const std::vector<SeriesSpec> series = expand_series(sweep);
  for (const auto& s : series) asymptotic_bounds(s.p_min, s.p_max, s.q);  // BadExponents early

  // Tasks: every (series, n) plus one single-player solve per identical series
  // for the scaling prediction.
  std::vector<SweepPoint> points;
  for (std::size_t s = 0; s < series.size(); ++s)
    for (int n : sweep.n) points.push_back({s, n});
  std::vector<double> single_cost(series.size(), kInfinity);
  std::vector<std::size_t> single_tasks;
  for (std::size_t s = 0; s < series.size(); ++s)
    if (series[s].family == "identical") single_tasks.push_back(s);

  const std::size_t total = points.size() + single_tasks.size();
  parallel_for(total, ctx.jobs, [&](std::size_t i) {
    SolverOptions opts = ctx.config.solver;
    if (i >= points.size()) {
      const std::size_t s = single_tasks[i - points.size()];
      const auto pop = series_population(series[s], 1);
      const auto r = minimize_potential(space, pop, Scalarization::pow_trace(series[s].q), opts);
      if (!r.converged) throw Error(ErrorCode::NotConverged, "single-player solve for " + series[s].name);
      single_cost[s] = r.estimation_cost;
      return;
    }
    SweepPoint& pt = points[i];
    const SeriesSpec& s = series[pt.series];
    opts.seed = ctx.seed + 0x9E3779B97F4A7C15ULL * (i + 1);
    const auto pop = series_population(s, pt.n);
    const auto F = Scalarization::pow_trace(s.q);
    const auto r = minimize_potential(space, pop, F, opts);
    pt.estimation_cost = r.estimation_cost;
    pt.total_cost = social_cost(space, pop, r.profile, F);
    pt.total_precision = total_precision(space, pop, r.profile);
    pt.kkt_residual = r.kkt_residual;
    pt.converged = r.converged;
  });
  prepare(ctx);

  std::vector<double> first_cost(series.size(), 0.0);
  for (const auto& pt : points)
    if (pt.n == sweep.n.front()) first_cost[pt.series] = pt.estimation_cost;

  std::vector<std::size_t> order(points.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto key = [&](std::size_t i) {
    const auto& s = series[points[i].series];
    return std::make_tuple(points[i].n, s.p_min, s.p_max, s.q, points[i].series);
  };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });

  std::vector<std::string> header{"series", "n", "p", "q", "p_min", "p_max", "estimation_cost",
                                  "predicted_scaling_cost", "degradation_ratio_rate", "total_cost", "total_precision",
                                  "kkt_residual", "converged"};
  if (ctx.normalize) header.push_back("normalized_cost");
  CsvTable table(header);
  bool all_converged = true;
  for (std::size_t i : order) {
    const SweepPoint& pt = points[i];
    const SeriesSpec& s = series[pt.series];
    all_converged = all_converged && pt.converged;
    table.row().add(s.name).add(pt.n);
    if (s.family == "identical") table.add(s.p_min); else table.blank();
    table.add(s.q).add(s.p_min).add(s.p_max).add(pt.estimation_cost);
    if (s.family == "identical") {
      table.add(std::pow(pt.n, -s.q * (s.p_min - 1.0) / (s.p_min + s.q)) * single_cost[pt.series]);
      table.add(degradation_ratio(pt.n, s.p_min, s.q));
    } else {
      table.blank().blank();
    }
    table.add(pt.total_cost).add(pt.total_precision).add(pt.kkt_residual).add(pt.converged);
    if (ctx.normalize) table.add(pt.estimation_cost / first_cost[pt.series]);
  }
  table.write(ctx.out / "sweep.csv", ctx.config_hash);

  CsvTable rates({"series", "p", "q", "p_min", "p_max", "fitted_slope", "reference_slope", "upper_exponent",
                  "lower_exponent", "alpha", "sandwich_inside", "fit_residual"});
  std::vector<Series> plot;
  for (std::size_t s = 0; s < series.size(); ++s) {
    const SeriesSpec& spec = series[s];
    std::vector<std::pair<double, double>> pts;
    for (const auto& pt : points)
      if (pt.series == s) pts.emplace_back(pt.n, pt.estimation_cost);
    const AsymptoticBounds b = asymptotic_bounds(spec.p_min, spec.p_max, spec.q);
    rates.row().add(spec.name);
    if (spec.family == "identical") rates.add(spec.p_min); else rates.blank();
    rates.add(spec.q).add(spec.p_min).add(spec.p_max);
    bool positive = std::all_of(pts.begin(), pts.end(), [](const auto& p) { return p.second > 0.0 && std::isfinite(p.second); });
    if (positive) {
      const RateFit fit = rate_fit(pts);
      rates.add(fit.slope);
      if (spec.family == "heterogeneous")
        rates.add(-spec.q * (spec.p_max - 1.0) / (spec.p_max + spec.q));
      else
        rates.add(-b.upper_exponent);
      rates.add(b.upper_exponent);
      if (b.finite_p_max) {
        rates.add(b.lower_exponent).add(b.alpha).add(rate_sandwich(pts, b).all_inside);
      } else {
        rates.blank().blank().blank();
      }
      rates.add(fit.residual);
    } else {
      for (int k = 0; k < 7; ++k) rates.blank();
    }

    const double scale = ctx.normalize ? first_cost[s] : 1.0;
    Series line{spec.name, {}, false};
    for (const auto& [n, v] : pts) line.points.emplace_back(n, v / scale);
    if (!line.points.empty() && positive) {
      Series ref{"slope " + format_number(-b.upper_exponent), {}, true};
      const auto [n0, v0] = line.points.front();
      for (const auto& [n, v] : line.points) ref.points.emplace_back(n, v0 * std::pow(n / n0, -b.upper_exponent));
      plot.push_back(std::move(line));
      plot.push_back(std::move(ref));
    }
  }
  rates.write(ctx.out / "rates.csv", ctx.config_hash);

  if (ctx.svg)
    write_text(ctx.out / "sweep.svg",
               svg_loglog_plot("Estimation cost at equilibrium", ctx.normalize ? "normalized cost" : "cost", plot));
  return all_converged ? 0 : 3;
}

// ---------------------------------------------------------------------------

int cmd_poa(const RunContext& ctx) {
  struct Row {
    int n;
    double p, q;
    PoaReport report;
  };
  std::vector<Row> rows;
  const auto& space = ctx.config.attribute_space();
  if (ctx.config.poa) {
    for (double p : ctx.config.poa->p)
      for (double q : ctx.config.poa->q)
        for (int n : ctx.config.poa->n) rows.push_back({n, p, q, {}});
    parallel_for(rows.size(), ctx.jobs, [&](std::size_t i) {
      Row& r = rows[i];
      r.report = poa_report(space, PlayerPopulation::identical(ProvisionCost::monomial(r.p), r.n),
                            Scalarization::pow_trace(r.q), ctx.config.solver);
    });
  } else {
    const auto& pop = ctx.config.players();
    rows.push_back({pop.total(), pop.p_min(), ctx.config.scalarization.q(),
                    poa_report(space, pop, ctx.config.scalarization, ctx.config.solver)});
  }
  std::sort(rows.begin(), rows.end(),
            [](const Row& a, const Row& b) { return std::tie(a.n, a.p, a.q) < std::tie(b.n, b.p, b.q); });
  prepare(ctx);
  CsvTable table({"n", "p", "q", "poa", "bound", "ratio_to_bound", "within_bound"});
  for (const auto& r : rows)
    table.row().add(r.n).add(r.p).add(r.q).add(r.report.poa).add(r.report.bound).add(r.report.poa / r.report.bound)
        .add(r.report.within_bound);
  table.write(ctx.out / "poa.csv", ctx.config_hash);
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_ols(const RunContext& ctx) {
  const OlsSpec& spec = ctx.config.ols;
  const OlsMode mode = spec.exact ? OlsMode{OlsExact{}} : OlsMode{OlsMonteCarlo{spec.samples, ctx.seed}};
  struct Row {
    int n = 0;
    double c_ols = 0, c_gls = 0, printed = NAN, corrected = NAN, residual = 0;
    bool converged = false;
  };
  std::vector<Row> rows;
  auto solve = [&](const AttributeSpace& space, const PlayerPopulation& pop, const Scalarization& F, Row& row) {
    const OlsKernel kernel = ols_kernel(space, pop.total(), mode);
    const EquilibriumResult ols = minimize_ols_potential(space, pop, F, kernel, ctx.config.solver);
    const EquilibriumResult gls = minimize_potential(space, pop, F, ctx.config.solver);
    row.c_ols = ols.estimation_cost;
    row.c_gls = gls.estimation_cost;
    row.residual = ols.kkt_residual;
    row.converged = ols.converged && gls.converged;
  };

  if (spec.family == "counterexample") {
    const auto& one = GameConfig{}.attribute_space();
    for (int n : spec.n) rows.push_back({n});
    parallel_for(rows.size(), ctx.jobs, [&](std::size_t i) {
      Row& row = rows[i];
      const double n = row.n, p = spec.p;
      const auto pop = PlayerPopulation::build(
          {{ProvisionCost::monomial(p), row.n}, {ProvisionCost::linear((n + 1.0) * (n + 1.0)), 1}});
      solve(one, pop, Scalarization::trace(), row);
      row.printed = n * std::pow(n + 1.0, 2.0 / (p + 1.0) - 2.0) + 1.0;
      row.corrected = n * std::pow(p, 1.0 / (p + 1.0)) * std::pow(n + 1.0, 2.0 / (p + 1.0) - 2.0) + 1.0;
    });
  } else {
    Row row;
    row.n = ctx.config.players().total();
    solve(ctx.config.attribute_space(), ctx.config.players(), ctx.config.scalarization, row);
    rows.push_back(row);
  }
  prepare(ctx);
  CsvTable table({"n", "c_ols_at_equilibrium", "c_gls_counterpart", "paper_formula_value", "corrected_formula_value",
                  "kkt_residual", "converged"});
  bool ok = true;
  for (const auto& r : rows) {
    table.row().add(r.n).add(r.c_ols).add(r.c_gls);
    if (std::isnan(r.printed)) table.blank().blank(); else table.add(r.printed).add(r.corrected);
    table.add(r.residual).add(r.converged);
    ok = ok && r.converged;
  }
  table.write(ctx.out / "ols.csv", ctx.config_hash);
  return ok ? 0 : 3;
}

// ---------------------------------------------------------------------------

int cmd_equivalence(const RunContext& ctx) {
  const auto& spec = ctx.config.equivalence;
  const EquivalenceReport rep =
      equivalence_check(ctx.config.attribute_space(), ctx.config.players(), ctx.config.scalarization, spec.epsilon,
                        spec.trials, ctx.seed, ctx.config.solver);
  prepare(ctx);
  CsvTable table({"trial", "concentrated", "phi_ci_star", "sandwich_low", "sandwich_high", "phi_ci_at_star",
                  "exchange_ci_bound", "phi_at_ci_star", "exchange_bound", "sandwich", "exchange_ci", "exchange",
                  "pass"});
  const double pmax = ctx.config.players().p_max();
  for (std::size_t k = 0; k < rep.trials.size(); ++k) {
    const auto& t = rep.trials[k];
    table.row().add(static_cast<long long>(k)).add(t.concentrated).add(t.phi_ci_star).add(rep.sandwich_low)
        .add(rep.sandwich_high).add(t.phi_ci_at_star)
        .add(rep.d_n * std::pow(rep.r_plus, pmax - 1.0) * t.phi_ci_star).add(t.phi_at_ci_star)
        .add(rep.d_n_prime * std::pow(rep.r_minus, pmax - 1.0) * rep.phi_star).add(t.sandwich).add(t.exchange_ci)
        .add(t.exchange).add(t.pass());
  }
  table.write(ctx.out / "equivalence.csv", ctx.config_hash);
  CsvTable summary({"trials", "pass_rate", "probability_floor", "allowance", "passed", "phi_star", "d_n", "d_n_prime"});
  summary.row().add(static_cast<long long>(rep.trials.size())).add(rep.pass_rate).add(rep.probability_floor)
      .add(rep.allowance).add(rep.passed).add(rep.phi_star).add(rep.d_n).add(rep.d_n_prime);
  summary.write(ctx.out / "summary.csv", ctx.config_hash);
  return 0;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const RunContext& ctx) {
  const auto& space = ctx.config.attribute_space();
  const auto& pop = ctx.config.players();
  const auto& spec = ctx.config.simulate;
  PrecisionProfile profile;
  if (spec.constant_precision) {
    profile = PrecisionProfile::constant(pop.types(), space.size(), *spec.constant_precision);
  } else {
    const EquilibriumResult r = minimize_potential(space, pop, ctx.config.scalarization, ctx.config.solver);
    if (!r.converged) throw Error(ErrorCode::NotConverged, "equilibrium for the simulation did not converge");
    profile = r.profile;
  }
  ModelParameters beta{Vector::Ones(space.dim())};
  if (spec.beta) {
    if (static_cast<int>(spec.beta->size()) != space.dim())
      throw Error(ErrorCode::Config, "beta must have one entry per attribute dimension");
    beta.beta = Eigen::Map<const Vector>(spec.beta->data(), space.dim());
  }
  const SimulationResult sim = simulate_gls(space, pop, profile, beta, spec.trials, ctx.seed);
  prepare(ctx);
  CsvTable table({"quantity", "i", "j", "empirical", "theoretical", "z"});
  const int d = space.dim();
  for (int i = 0; i < d; ++i)
    table.row().add("mean").add(i).blank().add(sim.mean_beta[i]).add(beta.beta[i]).add(sim.bias_z[i]);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      table.row().add("cov").add(i).add(j).add(sim.empirical_cov(i, j)).add(sim.mean_draw_cov(i, j)).add(sim.cov_z(i, j));
  table.write(ctx.out / "simulate.csv", ctx.config_hash);
  CsvTable summary({"trials", "degenerate_draws"});
  summary.row().add(sim.trials).add(sim.degenerate_draws);
  summary.write(ctx.out / "summary.csv", ctx.config_hash);
  return 0;
}

int run_command(const std::string& name, const RunContext& ctx) {
  if (name == "equilibrium") return cmd_equilibrium(ctx);
  if (name == "design") return cmd_design(ctx);
  if (name == "sweep") return cmd_sweep(ctx);
  if (name == "poa") return cmd_poa(ctx);
  if (name == "ols") return cmd_ols(ctx);
  if (name == "equivalence") return cmd_equivalence(ctx);
  if (name == "simulate") return cmd_simulate(ctx);
  throw Error(ErrorCode::Config, "unknown command '" + name + "'");
}

}  // namespace stratreg::cli
