#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "sem/http_service.hpp"
#include "sem/sem.hpp"

using namespace sem;
namespace fs = std::filesystem;

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::io, "cannot create output directory", dir);
}

std::string in_dir(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

json equilibrium_json(const MarketSpec& spec, const EquilibriumResult& eq) {
  json groups = json::array();
  for (std::size_t g = 0; g < eq.groups.size(); ++g)
    groups.push_back({{"label", eq.groups[g].label},
                      {"period", eq.groups[g].period},
                      {"budget", eq.groups[g].budget},
                      {"mass", eq.groups[g].mass},
                      {"lottery", object_map(spec, eq.allocation[g])}});
  return {{"prices", object_map(spec, eq.prices)},
          {"demand", object_map(spec, eq.demand)},
          {"supply", object_map(spec, eq.supply)},
          {"clearing_error", eq.clearing_error},
          {"iterations", eq.iterations},
          {"converged", eq.converged},
          {"groups", std::move(groups)}};
}

json assignment_json(const MarketSpec& spec, const std::vector<std::vector<AgentInstance>>& seq,
                     const RunAssignment& run) {
  json periods = json::array();
  for (std::size_t t = 0; t < seq.size(); ++t) {
    json rows = json::array();
    for (std::size_t k = 0; k < seq[t].size(); ++k)
      rows.push_back({{"type", spec.types[seq[t][k].type].id}, {"object", spec.objects.ids[run[t][k]]}});
    periods.push_back({{"period", t + 1}, {"assignment", std::move(rows)}});
  }
  return {{"periods", std::move(periods)}, {"placement_rate", placement_rate(run, spec.null_object())}};
}

json audit_trace(const TraceDocument& t) {
  const auto greedy = greedy_check(t.periods);
  const auto envy = envy_check(t.periods);
  json gv = json::array(), ev = json::array();
  for (const auto& v : greedy.violations)
    gv.push_back({{"period", v.period},
                  {"arrival", v.arrival},
                  {"held", t.spec.objects.ids[v.held]},
                  {"preferred", t.spec.objects.ids[v.better]},
                  {"consumed", v.consumed},
                  {"supply", v.supply}});
  for (const auto& p : envy.pairs)
    ev.push_back({{"period", p.period}, {"arrival", p.arrival}, {"envied_period", p.other_period}, {"envied", p.other}});
  std::vector<WeakOrder> prefs;
  std::vector<ObjectIndex> assigned;
  for (const auto& rec : t.periods)
    for (std::size_t k = 0; k < rec.arrivals.size(); ++k) {
      prefs.push_back(rec.arrivals[k].prefs);
      assigned.push_back(rec.assignment[k]);
    }
  json eff{{"checked", false}};
  if (!t.periods.empty() && !prefs.empty()) {
    const auto v = ordinal_efficiency_oracle(efficiency_instance(prefs, assigned, t.periods.front().supply_before));
    eff = {{"checked", true}, {"efficient", v.efficient}, {"total_slack", v.total_slack}, {"exact", v.exact}};
    if (!v.efficient) {
      json rows = json::array();
      for (const auto& row : v.dominating) rows.push_back(object_map(t.spec, row));
      eff["dominating"] = std::move(rows);
    }
  }
  return {{"greedy", {{"holds", greedy.holds}, {"violations", std::move(gv)}}},
          {"envy", {{"holds", envy.holds}, {"pairs", std::move(ev)}}},
          {"ex_post_efficiency", std::move(eff)}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequential equilibrium mechanism toolkit"};
  app.require_subcommand(1);

  std::string market, out = "out", mechanism = "sem", trace_path, host = "127.0.0.1", data_dir, token;
  int period = 1, replicas = 1, markets = 25, perturbations = 100, port = 8080;
  std::uint64_t seed = 1;
  std::size_t seeds = 25, draws = 10000;
  double tolerance = 0.01, epsilon = 0.025;
  unsigned workers = 1;
  std::vector<int> grid;

  auto* solve = app.add_subcommand("solve", "compute a period's price equilibrium under the prior");
  solve->add_option("market", market, "market document")->required()->check(CLI::ExistingFile);
  solve->add_option("-t,--period", period, "period");
  solve->add_option("-n,--replicas", replicas, "replica count");
  solve->add_option("--draws", draws, "shock draws");
  solve->add_option("--seed", seed, "shock seed");
  solve->add_option("--tol", tolerance, "clearing tolerance");

  auto* simulate = app.add_subcommand("simulate", "run a mechanism on seeded arrival sequences");
  simulate->add_option("market", market, "market document")->required()->check(CLI::ExistingFile);
  simulate->add_option("-m,--mechanism", mechanism, "sem, sd-rtb or omniscient");
  simulate->add_option("-n,--replicas", replicas, "replica count");
  simulate->add_option("--seeds", seeds, "number of seeded runs");
  simulate->add_option("--seed", seed, "seed block");
  simulate->add_option("--draws", draws, "shock draws");
  simulate->add_option("-o,--out", out, "output directory");

  auto* audit = app.add_subcommand("audit", "check a SEM trace for greedy, envy and ex-post efficiency");
  audit->add_option("trace", trace_path, "trace document")->required()->check(CLI::ExistingFile);

  auto* t1 = app.add_subcommand("table1", "placement rates of SEM and SD-RTB over replica counts");
  t1->add_option("market", market, "market document")->required()->check(CLI::ExistingFile);
  t1->add_option("--seed", seed, "seed block");
  t1->add_option("--markets", markets, "markets per cell");
  t1->add_option("--grid", grid, "replica counts");
  t1->add_option("--draws", draws, "shock draws");
  t1->add_option("-j,--workers", workers, "worker threads");
  t1->add_option("-o,--out", out, "output directory");

  auto* conv = app.add_subcommand("converge", "distance of SEM lotteries to the offline equilibrium");
  conv->add_option("market", market, "market document")->required()->check(CLI::ExistingFile);
  conv->add_option("--seed", seed, "seed block");
  conv->add_option("--seeds", seeds, "runs per replica count");
  conv->add_option("--grid", grid, "replica counts");
  conv->add_option("--epsilon", epsilon, "tail threshold");
  conv->add_option("-j,--workers", workers, "worker threads");
  conv->add_option("-o,--out", out, "output directory");

  auto* pert = app.add_subcommand("perturb", "price stability under perturbed arrival densities");
  pert->add_option("market", market, "market document")->required()->check(CLI::ExistingFile);
  pert->add_option("--seed", seed, "seed block");
  pert->add_option("--markets", markets, "random base markets");
  pert->add_option("--perturbations", perturbations, "perturbations per market");
  pert->add_option("--epsilon", epsilon, "perturbation scale");
  pert->add_option("--draws", draws, "shock draws");
  pert->add_option("-j,--workers", workers, "worker threads");
  pert->add_option("-o,--out", out, "output directory");

  auto* serve = app.add_subcommand("serve", "run the session HTTP service");
  serve->add_option("--host", host, "bind address");
  serve->add_option("-p,--port", port, "port");
  serve->add_option("--data-dir", data_dir, "session log directory");
  serve->add_option("--token", token, "static bearer token");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve) {
      const auto spec = replicate(load_market_spec(market), replicas);
      SolverOptions opt;
      opt.tolerance = tolerance;
      const auto eq = solve_price_equilibrium(spec, period, spec.objects.supply,
                                              ShockSample::draw(spec.shock, spec.num_objects(), draws, seed), opt);
      std::cout << equilibrium_json(spec, eq).dump(2) << "\n";
      return eq.converged ? 0 : 3;
    }
    if (*simulate) {
      const auto spec = replicate(load_market_spec(market), replicas);
      const auto mech = parse_mechanism(mechanism);
      ensure_dir(out);
      SemOptions opt;
      opt.shock_draws = draws;
      std::vector<RunSummary> runs;
      for (std::size_t s = 0; s < seeds; ++s) {
        const auto run_seed = market_seed(seed, replicas, s);
        runs.push_back(run_mechanism(spec, mech, replicas, run_seed, opt));
        const auto seq = draw_arrival_sequence(spec, run_seed);
        const auto name = in_dir(out, std::string(to_string(mech)) + "-n" + std::to_string(replicas) + "-" +
                                          std::to_string(s) + ".json");
        if (mech == Mechanism::sem) report::write_file(name, trace_to_json(spec, run_sem(spec, seq, run_seed, opt).state).dump(1));
        else if (mech == Mechanism::sd_rtb) report::write_file(name, assignment_json(spec, seq, sd_rtb(spec, seq, run_seed)).dump(1));
        else report::write_file(name, assignment_json(spec, seq, omniscient_benchmark(spec, seq)).dump(1));
      }
      report::write_file(in_dir(out, "runs.csv"), report::runs_csv(runs));
      std::cout << report::runs_csv(runs);
      return 0;
    }
    if (*audit) {
      const auto verdict = audit_trace(trace_from_json(json::parse(read_file(trace_path))));
      std::cout << verdict.dump(2) << "\n";
      const bool ok = verdict["greedy"]["holds"] && verdict["envy"]["holds"];
      return ok ? 0 : 4;
    }
    if (*t1) {
      Table1Config cfg;
      cfg.seed = seed;
      cfg.markets = static_cast<std::size_t>(markets);
      if (!grid.empty()) cfg.replicas = grid;
      cfg.sem.shock_draws = draws;
      cfg.workers = workers;
      const auto res = table1(load_market_spec(market), cfg);
      ensure_dir(out);
      report::write_file(in_dir(out, "table1_summary.csv"), report::table1_csv(res.cells));
      report::write_file(in_dir(out, "table1_runs.csv"), report::runs_csv(res.runs));
      report::write_file(in_dir(out, "table1_density.svg"), report::density_svg(res.runs));
      std::cout << report::table1_csv(res.cells);
      return 0;
    }
    if (*conv) {
      ConvergenceConfig cfg;
      cfg.seed = seed;
      cfg.seeds = seeds;
      cfg.epsilon = epsilon;
      if (!grid.empty()) cfg.replicas = grid;
      cfg.workers = workers;
      const auto res = convergence_study(load_market_spec(market), cfg);
      ensure_dir(out);
      report::write_file(in_dir(out, "convergence.csv"), report::convergence_csv(res));
      std::cout << report::convergence_csv(res);
      return 0;
    }
    if (*pert) {
      PerturbationConfig cfg;
      cfg.seed = seed;
      cfg.markets = static_cast<std::size_t>(markets);
      cfg.perturbations = static_cast<std::size_t>(perturbations);
      cfg.epsilon = epsilon;
      cfg.shock_draws = draws;
      cfg.workers = workers;
      const auto res = perturbation_study(load_market_spec(market), cfg);
      ensure_dir(out);
      report::write_file(in_dir(out, "perturbation.csv"), report::perturbation_csv(res));
      std::cout << "average_distance," << report::fixed(res.average_distance) << "\n"
                << "average_preserved," << report::fixed(res.average_preserved) << "\n"
                << "average_clearing_error," << report::fixed(res.average_clearing_error) << "\n"
                << "failures," << res.failures << "\n";
      return 0;
    }
    if (*serve) {
      SessionManager sessions({data_dir, {}, 2.0});
      HttpService http(sessions, token);
      std::cerr << "listening on " << host << ":" << port << "\n";
      return http.listen(host, port) ? 0 : 1;
    }
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
