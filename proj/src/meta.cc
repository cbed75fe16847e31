#include "drf/meta.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "drf/pupdate.h"
#include "drf/xupdate.h"
#include "parallel.h"

namespace drf {
namespace {

constexpr long kMinHorizon = 8;
constexpr long kMaxHorizon = 1L << 62;
constexpr double kWarmTolerance = 1e-6;

[[noreturn]] void BadConfig(const std::string& key, const std::string& why) {
  throw std::invalid_argument("config key '" + key + "': " + why);
}

long CeilToCount(double value, const char* what) {
  if (!std::isfinite(value) || value >= static_cast<double>(kMaxHorizon)) {
    throw std::overflow_error(std::string(what) + ": sample size overflows");
  }
  return std::max(1L, static_cast<long>(std::ceil(value)));
}

// Smallest T >= 8 with holds(T); holds must be monotone in T.
template <typename Pred>
long SmallestHorizon(Pred holds) {
  long hi = kMinHorizon;
  while (!holds(hi)) {
    if (hi >= kMaxHorizon / 2) throw std::overflow_error("plan: iteration count overflows");
    hi *= 2;
  }
  if (hi == kMinHorizon) return hi;
  long lo = hi / 2;  // fails
  while (hi - lo > 1) {
    const long mid = lo + (hi - lo) / 2;
    if (holds(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

double MaxPRegret(const DrfProblem& problem, const SolverConfig& cfg, const PlanConstants& pc,
                  double T) {
  double worst = 0.0;
  for (int i = 0; i < problem.m; ++i) worst = std::max(worst, PRegretBound(problem, cfg, pc, i, T));
  return worst;
}

double Seconds(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

void SolverConfig::Validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) BadConfig("epsilon", "must be > 0");
  if (!(c_k > 0.0 && c_k < 0.5)) BadConfig("c_k", "must lie in (0, 1/2)");
  if (mode == Mode::kSofo && feasibility_test == TestKind::kEfficient && !(c_k < 1.0 / 3.0)) {
    BadConfig("c_k", "the efficient test needs c_k < 1/3");
  }
  if (mode == Mode::kOfo && feasibility_test == TestKind::kEfficient) {
    BadConfig("feasibility_test", "the efficient test needs mode sofo");
  }
  if (!(nu0 > 0.0 && nu0 < 1.0)) BadConfig("nu0", "must lie in (0, 1)");
  if (!(nu1 > 0.0 && nu1 < 1.0)) BadConfig("nu1", "must lie in (0, 1)");
  if (omega_override && !(*omega_override >= 1.0)) BadConfig("omega_override", "must be >= 1");
  if (w_scale_override && !(*w_scale_override > 0.0)) BadConfig("c_s_override", "must be > 0");
  if (sum_bound_override && !(*sum_bound_override >= 1.0)) {
    BadConfig("c_g_override", "must be >= 1");
  }
  if (k.kind == SampleSizeRule::Kind::kFixed && k.fixed < 1) BadConfig("k", "must be >= 1");
  if (k.kind == SampleSizeRule::Kind::kBennett && !(k.sigma_sq > 0.0)) {
    BadConfig("k", "the Bennett variance must be > 0");
  }
  if (sp_gap_every && *sp_gap_every < 1) BadConfig("sp_gap_every", "must be >= 1");
  if (max_iters_override && *max_iters_override < 2) {
    BadConfig("max_iters", "must be >= 2");
  }
  if (inner_min_budget < 1) BadConfig("inner_min_budget", "must be >= 1");
  if (!(rho > 0.0)) BadConfig("rho", "must be > 0");
  if (!(delta > 0.0 && delta < 1.0)) BadConfig("delta", "must lie in (0, 1)");
  if (threads < 1) BadConfig("threads", "must be >= 1");
}

PlanConstants ResolveConstants(const DrfProblem& problem, const SolverConfig& cfg) {
  PlanConstants pc;
  pc.omega = cfg.omega_override.value_or(std::max(1.0, std::log(4.0 * problem.m / cfg.nu0)));
  pc.w_scale = cfg.w_scale_override.value_or(3.0 * std::sqrt(pc.omega));
  pc.sum_bound = cfg.sum_bound_override.value_or(Chi2Set(problem.n, cfg.rho, cfg.delta).SumBound());
  pc.diameter_x = problem.domain->diameter();
  return pc;
}

double XRegretBound(const DrfProblem& problem, const PlanConstants& pc, double T) {
  return pc.sum_bound * problem.lipschitz * std::log(T) * std::sqrt(2.0 * pc.diameter_x) /
         std::sqrt(T);
}

double PRegretBound(const DrfProblem& problem, const SolverConfig& cfg,
                    const PlanConstants& pc, int i, double T) {
  return 2.0 * pc.sum_bound * problem.bounds[i] * std::log(T) * std::sqrt(2.0 * cfg.rho) /
         (cfg.delta * std::sqrt(T));
}

Schedule Plan(const DrfProblem& problem, const SolverConfig& cfg) {
  CheckProblem(problem);
  cfg.Validate();
  if (!(problem.lipschitz > 0.0)) {
    throw std::invalid_argument("plan: the Lipschitz constant must be > 0");
  }
  for (double bound : problem.bounds) {
    if (!(bound > 0.0)) throw std::invalid_argument("plan: constraint bounds must be > 0");
  }
  Schedule s;
  s.constants = ResolveConstants(problem, cfg);
  const PlanConstants& pc = s.constants;
  if (!(pc.diameter_x > 0.0)) throw std::invalid_argument("plan: the domain has zero diameter");
  const double eps = cfg.epsilon;
  auto lhs = [&](long T) {
    const double t = static_cast<double>(T);
    return pc.w_scale * (XRegretBound(problem, pc, t) + MaxPRegret(problem, cfg, pc, t)) +
           cfg.c_k * eps;
  };
  s.T = SmallestHorizon([&](long T) { return lhs(T) <= eps / 2.0; });
  if (cfg.c_k < 1.0 / 3.0) {
    s.T_tilde = SmallestHorizon([&](long T) { return lhs(T) <= (1.0 - 2.0 * cfg.c_k) * eps; });
  }
  s.c_x = std::sqrt(pc.diameter_x / pc.omega) / (pc.sum_bound * problem.lipschitz);
  const double n = problem.n;
  for (int i = 0; i < problem.m; ++i) {
    s.c_p.push_back(2.0 * cfg.delta / (pc.sum_bound * problem.bounds[i] * n * n) *
                    std::sqrt(cfg.rho / pc.omega));
  }
  const double at = static_cast<double>(s.T_tilde > 0 ? s.T_tilde : s.T);
  s.kappa_bullet = pc.w_scale * XRegretBound(problem, pc, at) / eps + cfg.c_k;
  s.kappa_circ = pc.w_scale * MaxPRegret(problem, cfg, pc, at) / eps;
  return s;
}

long RunHorizon(const SolverConfig& cfg, const Schedule& schedule) {
  if (cfg.max_iters_override) return *cfg.max_iters_override;
  if (cfg.feasibility_test == TestKind::kEfficient) {
    if (schedule.T_tilde == 0) BadConfig("c_k", "the efficient test needs c_k < 1/3");
    return schedule.T_tilde;
  }
  return schedule.T;
}

long SampleSizeHoeffding(const DrfProblem& problem, const SolverConfig& cfg, long T) {
  if (T < 1) throw std::invalid_argument("sample size: T must be >= 1");
  const double M = problem.max_bound();
  const double value = 8.0 * M * M / (cfg.c_k * cfg.c_k * cfg.epsilon * cfg.epsilon) *
                       std::log(2.0 * problem.m * static_cast<double>(T) / cfg.nu1);
  return CeilToCount(value, "hoeffding");
}

long SampleSizeBennett(const DrfProblem& problem, const SolverConfig& cfg, long T,
                       double sigma_sq) {
  if (T < 1) throw std::invalid_argument("sample size: T must be >= 1");
  if (!(sigma_sq > 0.0)) throw std::invalid_argument("sample size: sigma^2 must be > 0");
  const double M = problem.max_bound();
  const double t = 2.0 * M * cfg.c_k * cfg.epsilon / sigma_sq;
  const double h = (1.0 + t) * std::log1p(t) - t;
  const double value = (4.0 * M * M / sigma_sq) * (1.0 / h) *
                       std::log(2.0 * problem.m * static_cast<double>(T) / cfg.nu1);
  return CeilToCount(value, "bennett");
}

long ResolveSampleSize(const DrfProblem& problem, const SolverConfig& cfg, long T) {
  switch (cfg.k.kind) {
    case SampleSizeRule::Kind::kFixed: return cfg.k.fixed;
    case SampleSizeRule::Kind::kHoeffding: return SampleSizeHoeffding(problem, cfg, T);
    case SampleSizeRule::Kind::kBennett:
      return SampleSizeBennett(problem, cfg, T, cfg.k.sigma_sq);
  }
  return cfg.k.fixed;
}

std::vector<double> ThetaWeights(long T) {
  std::vector<double> theta(T);
  double total = 0.0;
  for (long t = 1; t <= T; ++t) total += (theta[t - 1] = 1.0 / std::sqrt(static_cast<double>(t)));
  for (double& w : theta) w /= total;
  return theta;
}

void EstimateHistory::Append(std::span<const double> row) {
  if (static_cast<int>(row.size()) != m) throw std::invalid_argument("history: row width");
  values.insert(values.end(), row.begin(), row.end());
}

double EstimateHistory::WeightedMax() const {
  const long T = rows();
  if (T == 0) throw std::logic_error("history: empty");
  std::vector<double> weighted(m, 0.0);
  double total = 0.0;
  for (long t = 0; t < T; ++t) {
    const double theta = 1.0 / std::sqrt(static_cast<double>(t + 1));
    total += theta;
    for (int i = 0; i < m; ++i) weighted[i] += theta * values[t * m + i];
  }
  return *std::max_element(weighted.begin(), weighted.end()) / total;
}

Certificate ExactFeasibilityTest(const DrfProblem& problem, const Vector& x_bar,
                                 std::span<const Vector> p_bar, double epsilon) {
  Certificate cert;
  cert.epsilon = epsilon;
  cert.source = CertificateSource::kExactTest;
  if (Phi(problem, x_bar, p_bar) > epsilon / 2.0) {
    cert.kind = CertificateKind::kInfeasible;
    cert.p_bar.assign(p_bar.begin(), p_bar.end());
  } else {
    cert.kind = CertificateKind::kEpsFeasible;
    cert.x_bar = x_bar;
  }
  return cert;
}

Certificate EfficientFeasibilityTest(const EstimateHistory& history, long horizon,
                                     double kappa_bullet, double c_k, double epsilon,
                                     const Vector& x_bar, std::vector<Vector> p_bar) {
  if (history.rows() != horizon) {
    throw std::invalid_argument("efficient test: estimate history is incomplete");
  }
  if (!(c_k < 1.0 / 3.0)) throw std::invalid_argument("efficient test: needs c_k < 1/3");
  Certificate cert;
  cert.epsilon = epsilon;
  cert.source = CertificateSource::kEfficientTest;
  if (history.WeightedMax() > (kappa_bullet + c_k) * epsilon) {
    cert.kind = CertificateKind::kInfeasible;
    cert.p_bar = std::move(p_bar);
  } else {
    cert.kind = CertificateKind::kEpsFeasible;
    cert.x_bar = x_bar;
  }
  return cert;
}

FeasibilityResult RunFeasibility(const DrfProblem& problem, const SolverConfig& cfg,
                                 const WarmStart* warm) {
  const auto start = std::chrono::steady_clock::now();
  const Chi2Set set(problem.n, cfg.rho, cfg.delta);
  FeasibilityResult result;
  result.schedule = Plan(problem, cfg);
  const Schedule& sched = result.schedule;
  result.horizon = RunHorizon(cfg, sched);
  result.K = ResolveSampleSize(problem, cfg, result.horizon);
  const long H = result.horizon;
  const bool sofo = cfg.mode == Mode::kSofo;
  const bool efficient = cfg.feasibility_test == TestKind::kEfficient;
  if (result.K > std::numeric_limits<int>::max()) {
    throw std::overflow_error("sample size K does not fit the sampler");
  }
  const int K = static_cast<int>(result.K);

  // Initial iterates: the warm start (projected when marginally outside) or
  // the problem's starting point and the uniform distribution.
  Vector x = problem.StartingPoint();
  std::vector<Vector> p(problem.m, set.Uniform());
  if (warm) {
    if (warm->x.size() != problem.d || !problem.domain->Contains(warm->x, kWarmTolerance)) {
      throw std::invalid_argument("warm start: x is outside the domain");
    }
    x = problem.domain->Contains(warm->x, 1e-12) ? warm->x : problem.domain->Project(warm->x);
    if (static_cast<int>(warm->p.size()) != problem.m) {
      throw std::invalid_argument("warm start: need one distribution per constraint");
    }
    for (int i = 0; i < problem.m; ++i) {
      if (!Contains(set, warm->p[i], kWarmTolerance)) {
        throw std::invalid_argument("warm start: p is outside the ambiguity set");
      }
      p[i] = Contains(set, warm->p[i], 1e-12) ? warm->p[i] : Project(set, warm->p[i]);
    }
  }
  std::vector<DistState> states;
  if (sofo) {
    for (int i = 0; i < problem.m; ++i) states.emplace_back(set, p[i], cfg.sampler);
  }

  RunningAverage average;
  auto accumulate = [&](double theta) {
    if (sofo) {
      average.Update(theta, x);
      for (DistState& s : states) s.Accumulate(theta);
    } else {
      average.Update(theta, x, p);
    }
  };
  auto averaged_p = [&] {
    if (!sofo) return average.avg_p();
    std::vector<Vector> out;
    for (const DistState& s : states) out.push_back(s.Average());
    return out;
  };
  accumulate(1.0);

  EstimateHistory history{problem.m, {}};
  Trace& trace = result.trace;
  std::optional<Certificate> early;
  long t = 1;
  for (; t < H; ++t) {
    const StreamKey key{cfg.seed, static_cast<std::uint64_t>(t)};
    const double root_t = std::sqrt(static_cast<double>(t));
    const double step_x = sched.c_x / root_t;
    try {
      if (sofo) {
        SmdStep smd = EpsSmdStep(problem, x, states, K, step_x, key, cfg.threads);
        if (efficient) history.Append(smd.estimate.f_hat);
        internal::ParallelFor(problem.m, cfg.threads, [&](int i) {
          Rng rng = key.For(Stream::kDistribution, static_cast<std::uint64_t>(i));
          BmdStep(problem, i, x, states[i], sched.c_p[i] / root_t, rng);
        });
        x = std::move(smd.x_next);
      } else {
        OfoXResult ofo = OfoXStep(problem, x, p, step_x);
        internal::ParallelFor(problem.m, cfg.threads, [&](int i) {
          p[i] = OfoPStep(problem, set, i, x, p[i], sched.c_p[i] / root_t);
        });
        x = std::move(ofo.x_next);
      }
    } catch (const std::exception& e) {
      std::ostringstream msg;
      msg << "iteration " << t << ": " << e.what();
      throw std::runtime_error(msg.str());
    }
    accumulate(1.0 / std::sqrt(static_cast<double>(t + 1)));

    if (cfg.sp_gap_every && t % *cfg.sp_gap_every == 0) {
      const Vector x_bar = average.avg_x();
      std::vector<Vector> p_bar = averaged_p();
      const GapReport gap = SpGap(problem, set, x_bar, p_bar, cfg.inner_min_budget);
      trace.checkpoints.push_back({t, gap.gap, gap.phi_at_pair, Seconds(start)});
      if (gap.gap <= cfg.epsilon / 2.0) {
        Certificate cert;
        cert.epsilon = cfg.epsilon;
        cert.source = CertificateSource::kEarlyStopSpGap;
        if (gap.phi_at_pair > cfg.epsilon / 2.0) {
          cert.kind = CertificateKind::kInfeasible;
          cert.p_bar = p_bar;
        } else {
          cert.kind = CertificateKind::kEpsFeasible;
          cert.x_bar = x_bar;
        }
        early = std::move(cert);
        result.x_bar = x_bar;
        result.p_bar = std::move(p_bar);
        break;
      }
    }
  }

  if (early) {
    result.certificate = std::move(*early);
    trace.iterations = t + 1;
  } else {
    trace.iterations = H;
    result.x_bar = average.avg_x();
    result.p_bar = averaged_p();
    if (efficient) {
      const StreamKey key{cfg.seed, static_cast<std::uint64_t>(H)};
      history.Append(ApproxMaxIndex(problem, x, states, K, key, false, cfg.threads).f_hat);
      result.certificate = EfficientFeasibilityTest(history, H, sched.kappa_bullet, cfg.c_k,
                                                    cfg.epsilon, result.x_bar, result.p_bar);
    } else {
      result.certificate =
          ExactFeasibilityTest(problem, result.x_bar, result.p_bar, cfg.epsilon);
    }
  }
  trace.source = result.certificate.source;
  trace.wall_time_s = Seconds(start);
  return result;
}

std::string SerializeWarmStart(const WarmStart& warm, const WarmStartMeta& meta) {
  nlohmann::json doc;
  doc["x"] = std::vector<double>(warm.x.data(), warm.x.data() + warm.x.size());
  auto& p = doc["p"] = nlohmann::json::array();
  for (const Vector& v : warm.p) p.push_back(std::vector<double>(v.data(), v.data() + v.size()));
  doc["meta"] = {{"n", meta.n}, {"m", meta.m}, {"d", meta.d},
                 {"rho", meta.rho}, {"delta", meta.delta}};
  return doc.dump(2);
}

WarmStart ParseWarmStart(const std::string& text, WarmStartMeta* meta) {
  const nlohmann::json doc = nlohmann::json::parse(text);
  auto to_vector = [](const nlohmann::json& arr) {
    const auto values = arr.get<std::vector<double>>();
    return Vector(Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size())));
  };
  WarmStart warm;
  warm.x = to_vector(doc.at("x"));
  for (const auto& row : doc.at("p")) warm.p.push_back(to_vector(row));
  const auto& m = doc.at("meta");
  WarmStartMeta parsed{m.at("n").get<int>(), m.at("m").get<int>(), m.at("d").get<int>(),
                       m.at("rho").get<double>(), m.at("delta").get<double>()};
  if (parsed.m != static_cast<int>(warm.p.size()) || parsed.d != warm.x.size()) {
    throw std::invalid_argument("warm start: meta disagrees with the stored vectors");
  }
  for (const Vector& v : warm.p) {
    if (v.size() != parsed.n) throw std::invalid_argument("warm start: p has wrong length");
  }
  if (meta) *meta = parsed;
  return warm;
}

SearchResult OptimizeBinarySearch(const ProblemFamily& family, const SolverConfig& cfg,
                                  double lo, double hi, const SearchOptions& options) {
  if (!(lo <= hi)) throw std::invalid_argument("binary search: bracket needs lo <= hi");
  if (!(options.obj_tol > 0.0)) throw std::invalid_argument("binary search: obj_tol must be > 0");
  SearchResult out;
  std::optional<WarmStart> warm;
  bool have_feasible = false;

  // The two bracket checks sit at opposite ends of the bracket, so they start
  // cold; bisection stages continue from the latest stage.
  auto solve = [&](double threshold, bool bracket_check = false) {
    SolverConfig stage_cfg = cfg;
    stage_cfg.seed = cfg.seed + out.stages.size();
    const DrfProblem problem = family(threshold);
    const WarmStart* start = options.warm_start && warm && !bracket_check ? &*warm : nullptr;
    FeasibilityResult res = RunFeasibility(problem, stage_cfg, start);
    out.stages.push_back({threshold, res.certificate.feasible(), res.trace.iterations,
                          res.trace.wall_time_s, res.certificate.source});
    out.total_iterations += res.trace.iterations;
    warm = WarmStart{res.x_bar, res.p_bar};
    if (res.certificate.feasible()) {
      have_feasible = true;
      out.value = threshold;
      out.x = res.x_bar;
      out.trace = res.trace;
    }
    return res.certificate.feasible();
  };

  if (hi - lo <= options.obj_tol) {
    if (!solve(hi)) throw std::invalid_argument("binary search: bracket invalid, hi is infeasible");
    return out;
  }
  if (!options.trust_bracket) {
    if (!solve(hi, true)) throw std::invalid_argument("binary search: bracket invalid, hi is infeasible");
    if (solve(lo, true)) throw std::invalid_argument("binary search: bracket invalid, lo is feasible");
  }
  while (hi - lo > options.obj_tol) {
    const double mid = 0.5 * (lo + hi);
    if (solve(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  if (!have_feasible || out.value != hi) {
    if (!solve(hi)) throw std::invalid_argument("binary search: bracket invalid, hi is infeasible");
  }
  return out;
}

}  // namespace drf
