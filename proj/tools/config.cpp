#include "config.hpp"

#include <cmath>

namespace affinelp::cli {

namespace {

template <class T>
T get_or(const Json& obj, const char* key, T fallback) {
  if (!obj.contains(key) || obj[key].is_null()) return fallback;
  try {
    return obj[key].get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

const Json& section(const Json& j, const char* key) {
  static const Json empty = Json::object();
  if (!j.contains(key)) return empty;
  if (!j[key].is_object()) {
    throw ConfigError(std::string("config section '") + key +
                      "' must be an object");
  }
  return j[key];
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ConfigError(std::string(what) + " must be positive");
  }
}

}  // namespace

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentConfig parse_config(const Json& input, const Overrides& ov) {
  if (!input.is_object()) throw ConfigError("config must be a JSON object");
  Json j = input;
  if (ov.seed) j["seed"] = *ov.seed;
  if (ov.out) j["out"] = *ov.out;
  if (ov.tol_rank) j["tolerances"]["rank"] = *ov.tol_rank;
  if (ov.tol_lp) j["tolerances"]["lp"] = *ov.tol_lp;

  ExperimentConfig cfg;
  if (!j.contains("seed") || !j["seed"].is_number_integer()) {
    throw ConfigError("config needs an integer 'seed'");
  }
  cfg.seed = j["seed"].get<std::uint64_t>();
  cfg.out = get_or<std::string>(j, "out", ".");

  try {
    const Json& sys = section(j, "system");
    if (sys.contains("A")) {
      cfg.system.fixed = system_from_json(sys);
    } else {
      cfg.system.n = get_or<Eigen::Index>(sys, "n", 2);
      cfg.system.m = get_or<Eigen::Index>(sys, "m", 1);
      cfg.system.gamma = get_or<double>(sys, "gamma", 0.9);
      cfg.system.spectral_radius = get_or<double>(sys, "spectral_radius", 1.1);
      cfg.system.noise = get_or<double>(sys, "noise", 0.0);
      if (cfg.system.n < 1 || cfg.system.m < 1) {
        throw ConfigError("system dimensions must be >= 1");
      }
      if (!(cfg.system.gamma > 0.0 && cfg.system.gamma < 1.0)) {
        throw ConfigError("gamma must lie in (0, 1)");
      }
      if (cfg.system.noise < 0.0) throw ConfigError("noise must be >= 0");
    }

    const Json& cost = section(j, "cost");
    if (cost.contains("Lxx")) {
      cfg.cost = cost_from_json(cost);
    } else {
      cfg.cost_q = get_or<double>(cost, "q", 1.0);
      cfg.cost_r = get_or<double>(cost, "r", 1.0);
    }

    const Json& ds = section(j, "dataset");
    cfg.dataset.d = get_or<Eigen::Index>(ds, "d", 50);
    if (cfg.dataset.d < 1) throw ConfigError("dataset.d must be >= 1");
    cfg.dataset.input = get_or<std::string>(ds, "input", "gaussian");
    if (cfg.dataset.input != "gaussian" && cfg.dataset.input != "arithmetic" &&
        cfg.dataset.input != "confined") {
      throw ConfigError("dataset.input must be gaussian, arithmetic or confined");
    }
    cfg.dataset.input_scale = get_or<double>(ds, "input_scale", 1.0);
    if (ds.contains("x0")) cfg.dataset.x0 = vector_from_json(ds["x0"], "x0");
    cfg.dataset.confine_index = get_or<Eigen::Index>(ds, "confine_index", -1);
    cfg.dataset.confine_level = get_or<double>(ds, "confine_level", 1.0);

    const Json& pe = section(j, "pe");
    cfg.pe_order = get_or<Eigen::Index>(pe, "order", 0);
    cfg.horizon = get_or<Eigen::Index>(pe, "horizon", 1);
    if (cfg.pe_order < 0 || cfg.horizon < 1) {
      throw ConfigError("pe.order must be >= 0 and pe.horizon >= 1");
    }

    const Json& tg = section(j, "targets");
    if (tg.contains("count")) {
      const auto c = get_or<long long>(tg, "count", 0);
      if (c < 1) throw ConfigError("targets.count must be >= 1");
      cfg.targets.count = static_cast<std::size_t>(c);
    }
    cfg.targets.scale = get_or<double>(tg, "scale", 1.0);
    require_positive(cfg.targets.scale, "targets.scale");
    cfg.targets.w = get_or<std::string>(tg, "w", "gaussian");
    if (cfg.targets.w != "gaussian" && cfg.targets.w != "copy_u") {
      throw ConfigError("targets.w must be gaussian or copy_u");
    }
    const std::string mode = get_or<std::string>(tg, "mode", "equalize_norm");
    if (mode == "equalize_norm") {
      cfg.targets.mode = NormMode::equalize_norm;
    } else if (mode == "free") {
      cfg.targets.mode = NormMode::free;
    } else {
      throw ConfigError("targets.mode must be equalize_norm or free");
    }

    const Json& lp = section(j, "lp");
    if (lp.contains("bound") && lp["bound"].is_null()) {
      cfg.lp.bound.reset();
    } else {
      cfg.lp.bound = get_or<double>(lp, "bound", kDefaultBound);
      require_positive(*cfg.lp.bound, "lp.bound");
    }
    cfg.lp.objective_samples = get_or<std::size_t>(lp, "objective_samples", 20);
    if (cfg.lp.objective_samples < 1) {
      throw ConfigError("lp.objective_samples must be >= 1");
    }
    cfg.lp.objective_scale = get_or<double>(lp, "objective_scale", 1.0);
    cfg.lp.refine = get_or<bool>(lp, "refine", true);
    cfg.lp.rows = get_or<std::string>(lp, "rows", "data");
    if (cfg.lp.rows != "data" && cfg.lp.rows != "expected") {
      throw ConfigError("lp.rows must be data or expected");
    }
    cfg.lp.max_rounds = get_or<std::size_t>(lp, "max_rounds", 60);
    cfg.lp.realizations = get_or<Eigen::Index>(lp, "realizations", 1);
    if (cfg.lp.realizations < 1) throw ConfigError("lp.realizations must be >= 1");

    const Json& tol = section(j, "tolerances");
    cfg.tol.rank = get_or<double>(tol, "rank", kDefaultRankTol);
    cfg.tol.lp = get_or<double>(tol, "lp", 1e-9);
    cfg.tol.residual = get_or<double>(tol, "residual", 1e-6);
    cfg.tol.are = get_or<double>(tol, "are", 1e-9);
    cfg.tol.spread = get_or<double>(tol, "spread", 0.05);
    require_positive(cfg.tol.rank, "tolerances.rank");
    require_positive(cfg.tol.lp, "tolerances.lp");

    const Json& vf = section(j, "verify");
    cfg.verify.batch = get_or<std::size_t>(vf, "batch", 20);
    cfg.verify.n = get_or<Eigen::Index>(vf, "n", 3);
    cfg.verify.m = get_or<Eigen::Index>(vf, "m", 2);
    cfg.verify.grid = get_or<std::size_t>(vf, "grid", 100);
    if (cfg.verify.n < 1 || cfg.verify.m < 1) {
      throw ConfigError("verify dimensions must be >= 1");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }

  const Eigen::Index n = cfg.system.fixed ? cfg.system.fixed->n() : cfg.system.n;
  const Eigen::Index m = cfg.system.fixed ? cfg.system.fixed->m() : cfg.system.m;
  if (cfg.cost && (cfg.cost->n() != n || cfg.cost->m() != m)) {
    throw ConfigError("cost dimensions do not match the system");
  }
  if (cfg.dataset.x0 && cfg.dataset.x0->size() != n) {
    throw ConfigError("dataset.x0 has the wrong length");
  }
  if (cfg.dataset.confine_index >= n) {
    throw ConfigError("dataset.confine_index out of range");
  }

  cfg.effective = j;
  cfg.hash = fnv1a_hex(j.dump());
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path,
                             const Overrides& ov) {
  Json j;
  try {
    j = read_json(path);
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(j, ov);
}

AffineSystem random_system(Eigen::Index n, Eigen::Index m, double gamma,
                           double spectral_radius, double noise, Rng& rng) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    AffineSystem sys;
    sys.A = gaussian_matrix(n, n, rng);
    const double rho = sys.A.eigenvalues().cwiseAbs().maxCoeff();
    if (rho > 0.0) sys.A *= spectral_radius / rho;
    sys.B = gaussian_matrix(n, m, rng);
    sys.c = gaussian_vector(n, rng);
    sys.mu = Vector::Zero(n);
    sys.Sigma = SymMatrix::identity(n) * noise;
    sys.gamma = gamma;
    if (is_controllable(sys.A, sys.B) && is_stabilizable(sys)) return sys;
  }
  throw NumericalError("could not draw a controllable system");
}

AffineSystem make_system(const ExperimentConfig& cfg, Rng& rng) {
  if (cfg.system.fixed) return *cfg.system.fixed;
  return random_system(cfg.system.n, cfg.system.m, cfg.system.gamma,
                       cfg.system.spectral_radius, cfg.system.noise, rng);
}

StageCost make_cost(const ExperimentConfig& cfg, Eigen::Index n,
                    Eigen::Index m) {
  if (cfg.cost) return *cfg.cost;
  return StageCost::quadratic(n, m, cfg.cost_q, cfg.cost_r);
}

}  // namespace affinelp::cli
