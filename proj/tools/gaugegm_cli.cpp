// gaugegm command-line driver.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gaugegm/gaugegm.hpp"
#include "gaugegm/io.hpp"

using namespace gaugegm;

namespace {

struct Common {
  std::string model;
  std::string out;
  std::uint64_t seed = 0;
  std::size_t budget = OptimizerConfig{}.max_iters;
  double delta0 = BarrierSchedule{}.delta0;
  double decay = BarrierSchedule{}.decay;
  std::size_t rounds = BarrierSchedule{}.rounds;
  double tol = GaugedConfig{}.improvement_tol;
  std::size_t restarts = 0;
};

void add_solver_flags(CLI::App* cmd, Common& c) {
  cmd->add_option("--budget", c.budget, "inner iterations per round");
  cmd->add_option("--delta0", c.delta0, "initial barrier weight");
  cmd->add_option("--decay", c.decay, "barrier decay per round");
  cmd->add_option("--rounds", c.rounds, "barrier rounds");
  cmd->add_option("--tol", c.tol, "round-over-round improvement tolerance");
  cmd->add_option("--restarts", c.restarts, "extra random starts");
  cmd->add_option("--seed", c.seed, "solver seed");
}

GaugedConfig gauged_config(const Common& c) {
  GaugedConfig g;
  g.opt.max_iters = c.budget;
  g.schedule.delta0 = c.delta0;
  g.schedule.decay = c.decay;
  g.schedule.rounds = c.rounds;
  g.improvement_tol = c.tol;
  g.restarts = c.restarts;
  g.seed = c.seed;
  return g;
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") {
    std::cout << text << '\n';
    return;
  }
  std::ofstream f(out);
  if (!f) throw InvalidModel("cannot write " + out);
  f << text << '\n';
}

int parse_sign(const std::string& s) {
  if (s == "plus") return 1;
  if (s == "minus") return -1;
  throw InvalidRecipe("--sign must be plus or minus");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gauge-optimized lower bounds on log partition functions of Forney-style models"};
  app.require_subcommand(1);
  Common c;

  // gen
  auto* gen = app.add_subcommand("gen", "emit a random model as JSON");
  std::string graph = "complete", mode = "generic", sign = "plus";
  std::size_t size = 4, rows = 0, cols = 0;
  double beta = 1.0;
  gen->add_option("--graph", graph, "complete|regular3|grid|line|altcycle");
  gen->add_option("--size", size, "node count");
  gen->add_option("--rows", rows);
  gen->add_option("--cols", cols);
  gen->add_option("--mode", mode, "generic|logsupermodular");
  gen->add_option("--beta", beta, "interaction scale T");
  gen->add_option("--seed", c.seed);
  gen->add_option("--sign", sign, "plus|minus");
  gen->add_option("--out", c.out);

  // exact / mf / bp
  auto* exact = app.add_subcommand("exact", "brute-force log Z");
  auto* mf = app.add_subcommand("mf", "mean-field lower bound");
  auto* bp = app.add_subcommand("bp", "loopy belief propagation estimate");
  double bp_bias = BpConfig{}.init_bias;
  bp->add_option("--init-bias", bp_bias, "initial message bias");
  for (auto* cmd : {exact, mf, bp}) {
    cmd->add_option("--model", c.model)->required();
    cmd->add_option("--out", c.out);
  }

  // gmf / gbp
  auto* gmf = app.add_subcommand("gmf", "gauged mean-field lower bound");
  auto* gbp = app.add_subcommand("gbp", "gauged BP lower bound");
  for (auto* cmd : {gmf, gbp}) {
    cmd->add_option("--model", c.model)->required();
    cmd->add_option("--out", c.out);
    add_solver_flags(cmd, c);
  }

  // correct
  auto* correct = app.add_subcommand("correct", "G-BP error corrections");
  std::string scheme = "single", base_path, inner = "gbp";
  double fraction = 0.1;
  correct->add_option("--scheme", scheme, "single|multiple|sequential")
      ->check(CLI::IsMember({"single", "multiple", "sequential"}));
  correct->add_option("--model", c.model)->required();
  correct->add_option("--base", base_path, "gbp result JSON; computed if omitted");
  correct->add_option("--inner", inner, "gbp|gmf|mf (sequential)");
  correct->add_option("--fraction", fraction, "sub-solve budget fraction (sequential)");
  correct->add_option("--out", c.out);
  add_solver_flags(correct, c);

  // experiment
  auto* exp = app.add_subcommand("experiment", "run a sweep and write CSV");
  std::string config_path, summary_path, grid_spec;
  std::optional<std::size_t> trials, exp_size, exp_budget;
  std::optional<std::uint64_t> exp_seed;
  std::optional<std::string> exp_graph, exp_sign;
  exp->add_option("--config", config_path, "experiment JSON")->required();
  exp->add_option("--out", c.out, "row CSV (default stdout)");
  exp->add_option("--summary", summary_path, "summary CSV");
  exp->add_option("--seed", exp_seed);
  exp->add_option("--trials", trials);
  exp->add_option("--beta-grid", grid_spec, "a:b:step");
  exp->add_option("--graph", exp_graph);
  exp->add_option("--size", exp_size);
  exp->add_option("--budget", exp_budget);
  exp->add_option("--sign", exp_sign, "plus|minus");

  // convert
  auto* convert = app.add_subcommand("convert", "factor graph JSON to Forney model JSON");
  std::string fg_path;
  convert->add_option("--factor-graph", fg_path)->required();
  convert->add_option("--out", c.out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      ModelRecipe r;
      r.family = parse_family(graph);
      r.size = size;
      r.rows = rows;
      r.cols = cols;
      if (r.family == GraphFamily::grid && rows * cols != 0) r.size = rows * cols;
      r.mode = parse_mode(mode);
      r.T = beta;
      r.seed = c.seed;
      r.sign = parse_sign(sign);
      emit(c.out, model_to_json(gen_model(r)).dump(2));
    } else if (exact->parsed()) {
      const ForneyGM gm = model_from_json(read_json_file(c.model));
      emit(c.out, json{{"log_z", exact_log_partition(gm)}}.dump(2));
    } else if (mf->parsed()) {
      const ForneyGM gm = normalized(model_from_json(read_json_file(c.model)));
      const auto r = mf_solve(gm, ProductDistribution::uniform(gm.num_edges()));
      emit(c.out, json{{"method", "mf"}, {"log_lower_bound", r.value}, {"q", r.q.p1}, {"sweeps", r.sweeps},
                       {"converged", r.converged}}
                      .dump(2));
    } else if (bp->parsed()) {
      const ForneyGM gm = model_from_json(read_json_file(c.model));
      BpConfig cfg;
      cfg.init_bias = bp_bias;
      const auto r = bp_solve(gm, cfg);
      emit(c.out, json{{"method", "bp"}, {"log_z", r.log_z}, {"iterations", r.iterations}, {"converged", r.converged}}
                      .dump(2));
    } else if (gmf->parsed() || gbp->parsed()) {
      const ForneyGM gm = model_from_json(read_json_file(c.model));
      const GaugedConfig cfg = gauged_config(c);
      emit(c.out, result_to_json(gmf->parsed() ? gmf_solve(gm, cfg) : gbp_solve(gm, cfg)).dump(2));
    } else if (correct->parsed()) {
      const ForneyGM gm = model_from_json(read_json_file(c.model));
      const GaugedConfig cfg = gauged_config(c);
      const LowerBoundResult base = base_path.empty() ? gbp_solve(gm, cfg) : result_from_json(read_json_file(base_path));
      LowerBoundResult r;
      if (scheme == "single") {
        r = gbp_single(gm, base);
      } else if (scheme == "multiple") {
        r = gbp_multiple(gm, base);
      } else {
        SequentialConfig sc;
        sc.base = cfg;
        sc.budget_fraction = fraction;
        sc.inner = parse_inner_method(inner);
        r = gbp_sequential(gm, base, sc);
      }
      json j = result_to_json(r);
      j["base_log_lower_bound"] = base.log_lower_bound;
      emit(c.out, j.dump(2));
    } else if (exp->parsed()) {
      ExperimentConfig cfg = experiment_config_from_json(read_json_file(config_path));
      if (exp_seed) cfg.seed = *exp_seed;
      if (trials) cfg.trials = *trials;
      if (!grid_spec.empty()) cfg.beta_grid = parse_grid(grid_spec);
      if (exp_graph) cfg.family = parse_family(*exp_graph);
      if (exp_size) cfg.size = *exp_size;
      if (exp_budget) cfg.gauged.opt.max_iters = *exp_budget;
      if (exp_sign) cfg.sign = parse_sign(*exp_sign);

      std::unique_ptr<std::ofstream> file, summary;
      std::ostream* out = &std::cout;
      if (!c.out.empty() && c.out != "-") {
        file = std::make_unique<std::ofstream>(c.out);
        if (!*file) throw InvalidModel("cannot write " + c.out);
        out = file.get();
      }
      if (!summary_path.empty()) {
        summary = std::make_unique<std::ofstream>(summary_path);
        if (!*summary) throw InvalidModel("cannot write " + summary_path);
      }
      run_experiment(cfg, *out, summary.get());
    } else if (convert->parsed()) {
      emit(c.out, model_to_json(factor_to_forney(factor_graph_from_json(read_json_file(fg_path)))).dump(2));
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
