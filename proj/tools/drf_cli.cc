// drf_cli: solve / optimize / gen-data front end.
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "config.h"

namespace {

using nlohmann::json;
using namespace drf;

constexpr int kExitFeasible = 0;
constexpr int kExitError = 1;
constexpr int kExitInfeasible = 2;

void ConfigureLogging() {
  const char* level = std::getenv("DRF_LOG");
  spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::warn);
  spdlog::set_pattern("[%l] %v");
}

json VectorJson(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

void WriteText(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

void WriteTrace(const std::string& path, const Trace& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "t,sp_gap,phi_value,elapsed_s\n" << std::setprecision(17);
  for (const Checkpoint& c : trace.checkpoints) {
    out << c.t << ',' << c.sp_gap << ',' << c.phi << ',' << c.elapsed_s << '\n';
  }
}

struct Common {
  std::string config;
  std::string out = "result.json";
  std::string trace;
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

cli::RunConfig Prepare(const Common& args) {
  cli::RunConfig config = cli::LoadRunConfig(args.config);
  if (args.seed) {
    config.solver.seed = *args.seed;
    config.echo["seed"] = *args.seed;
  }
  config.solver.threads = args.threads;
  config.echo["threads"] = args.threads;
  return config;
}

std::string TracePath(const Common& args) {
  return args.trace.empty() ? args.out + ".trace.csv" : args.trace;
}

int Solve(const Common& args) {
  cli::RunConfig config = Prepare(args);
  cli::BuiltProblem built = cli::BuildProblem(config);
  spdlog::info("solving m={} n={} d={}", built.problem.m, built.problem.n, built.problem.d);
  const FeasibilityResult res = RunFeasibility(built.problem, config.solver);
  const Trace& trace = res.trace;
  json doc;
  doc["status"] = res.certificate.feasible() ? "feasible" : "infeasible";
  doc["certificate_source"] = ToString(res.certificate.source);
  doc["x_bar"] = VectorJson(res.x_bar);
  doc["iterations"] = trace.iterations;
  doc["planned_T"] = res.schedule.T;
  doc["planned_T_tilde"] = res.schedule.T_tilde;
  doc["K"] = res.K;
  doc["wall_time_s"] = trace.wall_time_s;
  doc["final_sp_gap"] =
      trace.checkpoints.empty() ? json(nullptr) : json(trace.checkpoints.back().sp_gap);
  doc["seconds_per_iteration"] =
      trace.iterations > 0 ? trace.wall_time_s / trace.iterations : 0.0;
  doc["seed"] = config.solver.seed;
  doc["config_echo"] = config.echo;
  WriteText(args.out, doc.dump(2) + "\n");
  WriteTrace(TracePath(args), trace);
  spdlog::info("{} after {} iterations", doc["status"].get<std::string>(), trace.iterations);
  return res.certificate.feasible() ? kExitFeasible : kExitInfeasible;
}

int Optimize(const Common& args, bool no_warm_start) {
  cli::RunConfig config = Prepare(args);
  if (!config.objective) throw cli::ConfigError("objective: required for optimize");
  if (no_warm_start) {
    config.objective->options.warm_start = false;
    config.echo["objective"]["warm_start"] = false;
  }
  cli::BuiltProblem built = cli::BuildProblem(config);
  const cli::Bracket& b = *config.objective;
  SearchResult res;
  try {
    res = OptimizeBinarySearch(built.family, config.solver, b.lo, b.hi, b.options);
  } catch (const std::invalid_argument& e) {
    throw cli::ConfigError(std::string("objective: ") + e.what());
  }
  json stages = json::array();
  double wall = 0.0;
  for (const SearchStage& s : res.stages) {
    stages.push_back({{"threshold", s.threshold},
                      {"status", s.feasible ? "feasible" : "infeasible"},
                      {"iterations", s.iterations},
                      {"wall_time_s", s.wall_time_s},
                      {"certificate_source", ToString(s.source)}});
    wall += s.wall_time_s;
  }
  json doc;
  doc["status"] = "feasible";
  doc["value"] = res.value;
  doc["x_bar"] = VectorJson(res.x);
  doc["iterations"] = res.total_iterations;
  doc["wall_time_s"] = wall;
  doc["final_sp_gap"] = res.trace.checkpoints.empty()
                            ? json(nullptr)
                            : json(res.trace.checkpoints.back().sp_gap);
  doc["seconds_per_iteration"] = res.total_iterations > 0 ? wall / res.total_iterations : 0.0;
  doc["seed"] = config.solver.seed;
  doc["stages"] = stages;
  doc["config_echo"] = config.echo;
  WriteText(args.out, doc.dump(2) + "\n");
  WriteTrace(TracePath(args), res.trace);
  return kExitFeasible;
}

struct GenArgs {
  std::string problem;
  std::string prefix = "data";
  std::uint64_t seed = 0;
  int d = 10, n = 5000, J = 10, L = 25, m = 5;
  double sigma_sq = 0.1;
};

int GenData(const GenArgs& a) {
  if (a.problem == "newsvendor") {
    SaveNewsvendor(GenNewsvendor(a.d, a.n, a.seed), a.prefix);
  } else if (a.problem == "param-select") {
    SaveParamSelect(GenParamSelect(a.J, a.L, a.m, a.n, a.sigma_sq, a.seed), a.prefix);
  } else if (a.problem == "fairness") {
    SaveFairnessCsv(GenerateFairnessLr(a.n, a.d, a.seed), a.prefix);
  } else {
    throw cli::ConfigError("problem: unknown problem '" + a.problem + "'");
  }
  return kExitFeasible;
}

void AddCommon(CLI::App* cmd, Common& args) {
  cmd->add_option("config", args.config, "JSON run configuration")->required();
  cmd->add_option("-o,--out", args.out, "result document");
  cmd->add_option("--trace", args.trace, "trace CSV (default: <out>.trace.csv)");
  cmd->add_option("--seed", args.seed, "overrides the config seed");
  cmd->add_option("--threads", args.threads, "worker threads")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  ConfigureLogging();
  CLI::App app{"Distributionally robust feasibility solver"};
  app.require_subcommand(1);

  Common solve_args, optimize_args;
  bool no_warm_start = false;
  GenArgs gen;
  CLI::App* solve = app.add_subcommand("solve", "certify feasibility or infeasibility");
  AddCommon(solve, solve_args);
  CLI::App* optimize = app.add_subcommand("optimize", "binary search over the objective level");
  AddCommon(optimize, optimize_args);
  optimize->add_flag("--no-warm-start", no_warm_start, "start every stage from scratch");
  CLI::App* gen_data = app.add_subcommand("gen-data", "write a synthetic dataset");
  gen_data->add_option("problem", gen.problem, "newsvendor | param-select | fairness")->required();
  gen_data->add_option("--prefix", gen.prefix, "output path prefix");
  gen_data->add_option("--seed", gen.seed);
  gen_data->add_option("--d", gen.d, "items (newsvendor) or features (fairness)");
  gen_data->add_option("--n", gen.n, "samples");
  gen_data->add_option("--J", gen.J, "cohorts");
  gen_data->add_option("--L", gen.L, "levels");
  gen_data->add_option("--m", gen.m, "metrics");
  gen_data->add_option("--sigma-sq", gen.sigma_sq, "effect variance");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitError;
  }
  try {
    if (solve->parsed()) return Solve(solve_args);
    if (optimize->parsed()) return Optimize(optimize_args, no_warm_start);
    return GenData(gen);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
}
