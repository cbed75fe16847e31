#include "config.h"

#include <fstream>
#include <set>

namespace drf::cli {
namespace {

using nlohmann::json;

// Reads keys out of one JSON object, records the resolved value of each in
// `echo`, and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& doc, std::string prefix, json& echo)
      : doc_(doc), prefix_(std::move(prefix)), echo_(echo) {
    if (!doc_.is_object()) throw ConfigError(Name("") + " must be an object");
  }

  template <typename T>
  T Get(const std::string& key, T fallback) {
    used_.insert(key);
    T value = fallback;
    if (doc_.contains(key) && !doc_[key].is_null()) value = Convert<T>(key);
    echo_[key] = value;
    return value;
  }

  template <typename T>
  std::optional<T> Optional(const std::string& key) {
    used_.insert(key);
    if (!doc_.contains(key) || doc_[key].is_null()) {
      echo_[key] = nullptr;
      return std::nullopt;
    }
    T value = Convert<T>(key);
    echo_[key] = value;
    return value;
  }

  template <typename T>
  T Required(const std::string& key) {
    used_.insert(key);
    if (!doc_.contains(key)) throw ConfigError(Name(key) + ": required key is missing");
    T value = Convert<T>(key);
    echo_[key] = value;
    return value;
  }

  const json* Raw(const std::string& key) {
    used_.insert(key);
    return doc_.contains(key) ? &doc_[key] : nullptr;
  }

  void Finish() const {
    for (const auto& [key, _] : doc_.items()) {
      if (!used_.count(key)) throw ConfigError(Name(key) + ": unknown key");
    }
  }

  std::string Name(const std::string& key) const {
    if (prefix_.empty()) return key.empty() ? "config" : key;
    return key.empty() ? prefix_ : prefix_ + "." + key;
  }

 private:
  template <typename T>
  T Convert(const std::string& key) const {
    try {
      return doc_[key].get<T>();
    } catch (const json::exception&) {
      throw ConfigError(Name(key) + ": wrong type");
    }
  }

  const json& doc_;
  std::string prefix_;
  json& echo_;
  std::set<std::string> used_;
};

SampleSizeRule ParseK(const json* raw) {
  if (!raw) return SampleSizeRule::Hoeffding();
  if (raw->is_number_integer()) return SampleSizeRule::Fixed(raw->get<long>());
  if (!raw->is_string()) throw ConfigError("k: expected an integer or a string");
  const auto text = raw->get<std::string>();
  if (text == "auto-hoeffding") return SampleSizeRule::Hoeffding();
  const std::string bennett = "auto-bennett:";
  if (text.rfind(bennett, 0) == 0) {
    try {
      std::size_t used = 0;
      const std::string rest = text.substr(bennett.size());
      const double sigma_sq = std::stod(rest, &used);
      if (used != rest.size()) throw std::invalid_argument(rest);
      return SampleSizeRule::Bennett(sigma_sq);
    } catch (const std::exception&) {
      throw ConfigError("k: cannot parse the Bennett variance in '" + text + "'");
    }
  }
  throw ConfigError("k: expected an integer, 'auto-hoeffding' or 'auto-bennett:<variance>'");
}

json EchoK(const SampleSizeRule& k) {
  switch (k.kind) {
    case SampleSizeRule::Kind::kFixed: return k.fixed;
    case SampleSizeRule::Kind::kHoeffding: return "auto-hoeffding";
    case SampleSizeRule::Kind::kBennett: return "auto-bennett:" + std::to_string(k.sigma_sq);
  }
  return nullptr;
}

std::string ProblemType(const json& doc) {
  if (!doc.contains("problem") || !doc["problem"].is_object()) {
    throw ConfigError("problem: required object is missing");
  }
  const json& p = doc["problem"];
  if (!p.contains("type") || !p["type"].is_string()) {
    throw ConfigError("problem.type: required string is missing");
  }
  return p["type"].get<std::string>();
}

std::string ResolvePath(const std::filesystem::path& base, const std::string& path) {
  const std::filesystem::path p(path);
  return p.is_absolute() ? p.string() : (base / p).string();
}

}  // namespace

RunConfig LoadRunConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: parse error: ") + e.what());
  }
  return ParseRunConfig(doc, std::filesystem::path(path).parent_path());
}

RunConfig ParseRunConfig(const json& doc, const std::filesystem::path& base_dir) {
  RunConfig config;
  config.base_dir = base_dir;
  const std::string type = ProblemType(doc);
  Section top(doc, "", config.echo);
  SolverConfig& s = config.solver;
  s.epsilon = top.Get("epsilon", s.epsilon);
  s.c_k = top.Get("c_k", s.c_k);
  s.k = ParseK(top.Raw("k"));
  config.echo["k"] = EchoK(s.k);
  s.nu0 = top.Get("nu0", s.nu0);
  s.nu1 = top.Get("nu1", s.nu1);
  const auto mode = top.Get<std::string>("mode", "sofo");
  if (mode == "sofo") {
    s.mode = Mode::kSofo;
  } else if (mode == "ofo") {
    s.mode = Mode::kOfo;
  } else {
    throw ConfigError("mode: expected 'sofo' or 'ofo'");
  }
  s.sp_gap_every = top.Optional<long>("sp_gap_every");
  s.w_scale_override = top.Optional<double>("c_s_override");
  s.sum_bound_override = top.Optional<double>("c_g_override");
  s.omega_override = top.Optional<double>("omega_override");
  s.max_iters_override = top.Optional<long>("max_iters");
  s.rho = top.Get("rho", s.rho);
  s.delta = top.Get("delta", type == "fairness" ? 0.95 : 0.9);
  const auto test = top.Get<std::string>("feasibility_test", "exact");
  if (test == "exact") {
    s.feasibility_test = TestKind::kExact;
  } else if (test == "efficient") {
    s.feasibility_test = TestKind::kEfficient;
  } else {
    throw ConfigError("feasibility_test: expected 'exact' or 'efficient'");
  }
  s.seed = top.Get<std::uint64_t>("seed", 0);
  s.inner_min_budget = top.Get("inner_min_budget", s.inner_min_budget);
  const auto sampler = top.Get<std::string>("sampler", "fenwick");
  if (sampler == "fenwick") {
    s.sampler = SamplerMode::kFenwick;
  } else if (sampler == "cumulative") {
    s.sampler = SamplerMode::kCumulative;
  } else {
    throw ConfigError("sampler: expected 'fenwick' or 'cumulative'");
  }
  s.threads = top.Get("threads", s.threads);

  if (const json* obj = top.Raw("objective")) {
    json& echo = config.echo["objective"];
    echo = json::object();
    Section o(*obj, "objective", echo);
    Bracket b;
    b.lo = o.Required<double>("lo");
    b.hi = o.Required<double>("hi");
    b.options.obj_tol = o.Get("tol", b.options.obj_tol);
    b.options.warm_start = o.Get("warm_start", b.options.warm_start);
    b.options.trust_bracket = o.Get("trust_bracket", b.options.trust_bracket);
    o.Finish();
    if (!(b.lo <= b.hi)) throw ConfigError("objective: need lo <= hi");
    if (!(b.options.obj_tol > 0)) throw ConfigError("objective.tol: must be > 0");
    config.objective = b;
  }
  config.problem = doc["problem"];
  top.Raw("problem");
  top.Finish();
  try {
    s.Validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return config;
}

BuiltProblem BuildProblem(RunConfig& config) {
  json& echo = config.echo["problem"];
  echo = json::object();
  Section p(config.problem, "problem", echo);
  const auto type = p.Required<std::string>("type");
  BuiltProblem out;
  try {
    if (type == "constant-toy") {
      const int m = p.Get("m", 2), n = p.Get("n", 8), d = p.Get("d", 2);
      const double value = p.Get("value", 0.5);
      if (m < 1 || n < 2 || d < 1) throw ConfigError("problem: need m >= 1, n >= 2, d >= 1");
      out.problem = MakeConstantToy(m, n, d, value);
    } else if (type == "linear-toy") {
      const int n = p.Get("n", 8), d = p.Get("d", 2);
      const double offset = p.Get("offset", -1.0);
      const auto seed = p.Get<std::uint64_t>("data_seed", 0);
      if (n < 2 || d < 1) throw ConfigError("problem: need n >= 2, d >= 1");
      out.problem = MakeLinearBallToy(n, d, offset, seed);
    } else if (type == "param-select") {
      ParamSelectSpec spec;
      if (auto path = p.Optional<std::string>("path")) {
        spec = LoadParamSelect(ResolvePath(config.base_dir, *path));
      } else {
        spec = GenParamSelect(p.Get("J", 10), p.Get("L", 15), p.Get("m", 3), p.Get("n", 1000),
                              p.Get("sigma_sq", 0.1), p.Get<std::uint64_t>("data_seed", 0),
                              p.Get("threshold_scale", 1.1), p.Get("objective_scale", 0.9));
      }
      out.problem = BuildParamSelect(spec);
    } else if (type == "newsvendor") {
      NewsvendorSpec spec;
      if (auto path = p.Optional<std::string>("path")) {
        spec = LoadNewsvendor(ResolvePath(config.base_dir, *path));
      } else {
        spec = GenNewsvendor(p.Get("d", 3), p.Get("n", 200), p.Get<std::uint64_t>("data_seed", 0));
      }
      NewsvendorModel model(std::move(spec));
      out.problem = model.Constraint();
      out.family = model.Family();
    } else if (type == "fairness") {
      const double cov = p.Get("cov_bound", 0.05);
      const double rhs = p.Get("loss_rhs", 0.5);
      FairnessLrSpec spec;
      if (auto path = p.Optional<std::string>("path")) {
        const auto schema_path = p.Required<std::string>("schema");
        const CsvSchema schema = LoadCsvSchema(ResolvePath(config.base_dir, schema_path));
        spec = MakeFairnessSpec(LoadCsvDataset(ResolvePath(config.base_dir, *path), schema),
                                cov, rhs);
      } else {
        spec = GenerateFairnessLr(p.Get("n", 5000), p.Get("d", 50),
                                  p.Get<std::uint64_t>("data_seed", 0), cov, rhs);
      }
      out.problem = BuildFairnessLr(spec);
    } else {
      throw ConfigError("problem.type: unknown problem '" + type + "'");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("problem: ") + e.what());
  }
  p.Finish();
  if (!out.family) out.family = ShiftedFamily(out.problem);
  return out;
}

}  // namespace drf::cli
