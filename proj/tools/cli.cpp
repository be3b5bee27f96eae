#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "config.hpp"

namespace affinelp::cli {

namespace fs = std::filesystem;

namespace {

// Independent random streams per purpose, all derived from the seed.
enum class Stream : std::uint32_t {
  system = 1,
  dataset,
  w_matrix,
  targets,
  objective,
  verify
};

Rng make_rng(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return Rng(seq);
}

struct Context {
  ExperimentConfig cfg;
  bool quiet = false;

  fs::path path(const std::string& name) const { return cfg.out / name; }

  Json header(const std::string& command) const {
    Json j;
    j["tool_version"] = kToolVersion;
    j["config_hash"] = cfg.hash;
    j["command"] = command;
    j["seed"] = cfg.seed;
    return j;
  }

  void say(const std::string& line) const {
    if (!quiet) std::cout << line << "\n";
  }
};

AffineSystem load_system(const Context& ctx) {
  const fs::path p = ctx.path("system.json");
  if (fs::exists(p)) return system_from_json(read_json(p));
  if (ctx.cfg.system.fixed) return *ctx.cfg.system.fixed;
  throw ConfigError("no system.json in " + ctx.cfg.out.string() +
                    " (run gen first)");
}

StageCost load_cost(const Context& ctx, Eigen::Index n, Eigen::Index m) {
  const fs::path p = ctx.path("cost.json");
  if (fs::exists(p)) return cost_from_json(read_json(p));
  return make_cost(ctx.cfg, n, m);
}

Dataset load_dataset(const Context& ctx, const std::string& override_path) {
  const fs::path csv =
      override_path.empty() ? ctx.path("dataset.csv") : fs::path(override_path);
  fs::path header = csv;
  header.replace_extension(".json");
  bool single = true;
  if (fs::exists(header)) {
    single = read_json(header).value("single_trajectory", true);
  }
  return read_dataset_csv(csv, single);
}

Matrix design_inputs(const ExperimentConfig& cfg, const AffineSystem& sys,
                     Rng& rng) {
  const Eigen::Index m = sys.m();
  const Eigen::Index d = cfg.dataset.d;
  const double s = cfg.dataset.input_scale;
  if (cfg.dataset.input == "arithmetic") {
    const Vector start = gaussian_vector(m, rng, s);
    const Vector step = gaussian_vector(m, rng, s);
    Matrix u(m, d);
    for (Eigen::Index k = 0; k < d; ++k) {
      u.col(k) = start + static_cast<double>(k) * step;
    }
    return u;
  }
  return gaussian_matrix(m, d, rng, s);
}

// Trajectory held on e_i^T x = level by solving for the first input channel.
Dataset confined_trajectory(const ExperimentConfig& cfg,
                            const AffineSystem& sys, Rng& rng) {
  const Eigen::Index n = sys.n();
  const Eigen::Index m = sys.m();
  const Eigen::Index idx =
      cfg.dataset.confine_index >= 0 ? cfg.dataset.confine_index : n - 1;
  const double level = cfg.dataset.confine_level;
  if (std::abs(sys.B(idx, 0)) < 1e-9) {
    throw ConfigError("confined input needs B(confine_index, 0) != 0");
  }
  Vector x = cfg.dataset.x0 ? *cfg.dataset.x0 : Vector::Zero(n);
  x(idx) = level;
  const Eigen::Index d = cfg.dataset.d;
  Matrix inputs = gaussian_matrix(m, d, rng, cfg.dataset.input_scale);
  // Feedback is computed on the mean dynamics; the dataset keeps any noise.
  Dataset ds;
  ds.X.resize(n, d);
  ds.U.resize(m, d);
  ds.Xplus.resize(n, d);
  ds.Omega = Matrix(n, d);
  const NoiseSampler sampler(sys);
  for (Eigen::Index k = 0; k < d; ++k) {
    Vector u = inputs.col(k);
    const double rest = sys.A.row(idx).dot(x) + sys.c(idx) + sys.mu(idx) +
                        sys.B.row(idx).tail(m - 1).dot(u.tail(m - 1));
    u(0) = (level - rest) / sys.B(idx, 0);
    const Vector xi = sampler.draw(rng);
    ds.X.col(k) = x;
    ds.U.col(k) = u;
    ds.Omega->col(k) = xi;
    x = sys.A * x + sys.B * u + sys.c + xi;
    ds.Xplus.col(k) = x;
  }
  ds.single_trajectory = true;
  return ds;
}

int cmd_gen(const Context& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  Rng sys_rng = make_rng(cfg.seed, Stream::system);
  const AffineSystem sys = make_system(cfg, sys_rng);
  const StageCost cost = make_cost(cfg, sys.n(), sys.m());
  Rng data_rng = make_rng(cfg.seed, Stream::dataset);
  Dataset ds;
  if (cfg.dataset.input == "confined") {
    ds = confined_trajectory(cfg, sys, data_rng);
  } else {
    const Vector x0 = cfg.dataset.x0 ? *cfg.dataset.x0 : Vector::Zero(sys.n());
    const Matrix inputs = design_inputs(cfg, sys, data_rng);
    ds = simulate(sys, x0, inputs, data_rng);
  }
  fs::create_directories(cfg.out);
  write_json(ctx.path("system.json"), system_to_json(sys));
  write_json(ctx.path("cost.json"), cost_to_json(cost));
  write_dataset_csv(ds, ctx.path("dataset.csv"));
  Json header = ctx.header("gen");
  header["dataset"] = dataset_header(ds);
  header["stabilizable"] = is_stabilizable(sys);
  header["controllable"] = is_controllable(sys.A, sys.B);
  header["input"] = cfg.dataset.input;
  write_json(ctx.path("dataset.json"), header);
  ctx.say("gen: wrote system.json, cost.json, dataset.csv, dataset.json to " +
          cfg.out.string());
  return kExitOk;
}

int cmd_pe(const Context& ctx, const std::string& dataset_path,
           Eigen::Index order_flag) {
  const Dataset ds = load_dataset(ctx, dataset_path);
  const Eigen::Index order =
      order_flag > 0 ? order_flag
                     : (ctx.cfg.pe_order > 0 ? ctx.cfg.pe_order : ds.n() + 2);
  const PEReport pe = is_persistently_exciting(ds.U, order, ctx.cfg.tol.rank);
  Json report = ctx.header("pe");
  report["pe"] = pe_report_to_json(pe);
  if (pe.is_pe) {
    report["monotone_lower_orders"] =
        pe_monotonicity_check(ds.U, order, ctx.cfg.tol.rank);
  }
  const Eigen::Index L = ctx.cfg.horizon;
  if (ds.single_trajectory && ds.is_deterministic() && L <= ds.length()) {
    report["fundamental_lemma"] =
        rank_report_to_json(fundamental_lemma_report(ds, L, ctx.cfg.tol.rank));
    report["fundamental_lemma"]["horizon"] = L;
  } else {
    report["fundamental_lemma"] = "skipped: needs deterministic single trajectory";
  }
  Json probe = Json::array();
  if (ds.single_trajectory) {
    for (Eigen::Index i : affine_subspace_probe(ds)) probe.push_back(i);
  }
  report["affine_subspace_probe"] = probe;
  fs::create_directories(ctx.cfg.out);
  write_json(ctx.path("pe_report.json"), report);
  std::ostringstream os;
  os << "pe: order " << order << " rank " << pe.hankel_rank << "/"
     << pe.required_rank << (pe.is_pe ? " PE" : " not PE");
  if (!probe.empty()) os << "; trajectory confined along " << probe.dump();
  ctx.say(os.str());
  return pe.is_pe ? kExitOk : kExitNegative;
}

Matrix make_w(const Context& ctx, const Dataset& ds) {
  if (ctx.cfg.targets.w == "copy_u") return ds.U;
  Rng rng = make_rng(ctx.cfg.seed, Stream::w_matrix);
  return gaussian_matrix(ds.m(), ds.length(), rng);
}

int cmd_synth(const Context& ctx, const std::string& dataset_path) {
  const ExperimentConfig& cfg = ctx.cfg;
  const AffineSystem sys = load_system(ctx);
  const StageCost cost = load_cost(ctx, sys.n(), sys.m());
  const Dataset ds = load_dataset(ctx, dataset_path);
  const Matrix W = make_w(ctx, ds);
  fs::create_directories(cfg.out);
  Json report = ctx.header("synth");
  const RankReport rank = rank_condition_report(ds, W, cfg.tol.rank);
  report["rank_condition"] = rank_report_to_json(rank);
  report["w"] = cfg.targets.w;
  if (!rank.full) {
    write_json(ctx.path("synth_report.json"), report);
    std::cerr << "synth: rank condition fails (" << rank.rank << " < "
              << rank.required << ")\n"
              << rank_report_to_json(rank).dump(2) << "\n";
    return kExitNegative;
  }
  const Synthesizer synth(ds, W, sys.gamma, cfg.tol.rank);
  Rng rng = make_rng(cfg.seed, Stream::targets);
  const std::size_t count =
      cfg.targets.count.value_or(3 * quad_param_count(ds.n(), ds.m()));
  const std::vector<Target> targets =
      gaussian_targets(ds.n(), ds.m(), count, cfg.targets.scale, rng);
  const BatchResult batch =
      synthesize_batch(synth, cost, targets, {cfg.targets.mode, cfg.tol.spread});
  write_rows_csv(batch.rows, ds.n(), ds.m(), ctx.path("constraints.csv"));
  write_matrix_csv(W, "w_", ctx.path("W.csv"));

  std::size_t rejected = 0;
  Json failures = Json::array();
  for (std::size_t i = 0; i < batch.status.size(); ++i) {
    if (batch.status[i].ok) continue;
    ++rejected;
    failures.push_back({{"target", i}, {"message", batch.status[i].message}});
  }
  const bool deterministic = ds.is_deterministic();
  report["mode"] = cfg.targets.mode == NormMode::free ? "free" : "equalize_norm";
  report["targets"] = count;
  report["rows"] = batch.rows.size();
  report["rejected"] = rejected;
  report["failures"] = failures;
  report["least_norm_min"] = batch.least_norm_min;
  report["least_norm_max"] = batch.least_norm_max;
  report["spread"] = batch.spread;
  report["common_norm_sq"] =
      batch.common_norm_sq ? Json(*batch.common_norm_sq) : Json(nullptr);
  report["mixed_covariance"] = batch.mixed_covariance;
  report["deterministic"] = deterministic;
  report["estimator_variance"] =
      deterministic ? "zero (noise-free data)" : "alpha_norm_sq * Var(rho)";
  write_json(ctx.path("synth_report.json"), report);
  std::ostringstream os;
  os << "synth: " << batch.rows.size() << " rows, " << rejected << " rejected";
  if (deterministic) os << "; deterministic data, zero estimator variance";
  if (batch.mixed_covariance) os << "; WARNING mixed covariance";
  ctx.say(os.str());
  return kExitOk;
}

double policy_error(const AffinePolicy& a, const AffinePolicy& b) {
  return (a.K - b.K).norm() + (a.k - b.k).norm();
}

int cmd_solve(const Context& ctx, const std::string& constraints_path) {
  const ExperimentConfig& cfg = ctx.cfg;
  const AffineSystem sys = load_system(ctx);
  const StageCost cost = load_cost(ctx, sys.n(), sys.m());
  const Eigen::Index n = sys.n();
  const Eigen::Index m = sys.m();
  const fs::path rows_path = constraints_path.empty()
                                 ? ctx.path("constraints.csv")
                                 : fs::path(constraints_path);
  std::vector<ConstraintRow> rows = read_rows_csv(rows_path);
  if (rows.empty()) throw ConfigError("no constraints in " + rows_path.string());

  Rng rng = make_rng(cfg.seed, Stream::objective);
  const std::vector<StateInput> samples = gaussian_state_inputs(
      n, m, cfg.lp.objective_samples, cfg.lp.objective_scale, rng);

  std::optional<double> common_norm;
  bool deterministic = true;
  const fs::path synth_report = ctx.path("synth_report.json");
  if (fs::exists(synth_report)) {
    const Json sr = read_json(synth_report);
    if (sr.contains("common_norm_sq") && sr["common_norm_sq"].is_number()) {
      common_norm = sr["common_norm_sq"].get<double>();
    }
    deterministic = sr.value("deterministic", true);
  }

  SolverOptions solver;
  solver.tol = cfg.tol.lp;
  LPProblem lp = build_relaxed_qlp(rows, build_objective(samples), cfg.lp.bound);
  const bool mixed = lp.mixed_covariance && !deterministic;
  LPSolution sol;
  Json refine = nullptr;
  const bool have_data =
      fs::exists(ctx.path("dataset.csv")) && fs::exists(ctx.path("W.csv"));
  if (cfg.lp.refine && (cfg.lp.rows == "expected" || have_data)) {
    std::vector<Target> base;
    for (const ConstraintRow& r : rows) {
      if (r.meta.x.size() == n && r.meta.u.size() == m && r.meta.w.size() == m) {
        base.push_back({r.meta.x, r.meta.u, r.meta.w});
      }
    }
    RefineOptions ro;
    ro.max_rounds = cfg.lp.max_rounds;
    ro.solver = solver;
    RefineResult res;
    if (cfg.lp.rows == "expected") {
      res = refine_qlp(ExpectedRowSource(sys, cost), base, samples,
                       cfg.lp.bound, ro);
    } else {
      const Dataset ds = load_dataset(ctx, "");
      const Matrix W = read_matrix_csv(ctx.path("W.csv"));
      auto synth = std::make_shared<const Synthesizer>(ds, W, sys.gamma,
                                                       cfg.tol.rank);
      std::optional<Matrix> stacked;
      if (cfg.lp.realizations > 1) {
        Rng regen = make_rng(cfg.seed, Stream::dataset);
        stacked = regenerate_successors(sys, ds.X, ds.U, cfg.lp.realizations,
                                        regen);
      }
      res = refine_qlp(DataRowSource(synth, cost, common_norm, stacked), base,
                       samples, cfg.lp.bound, ro);
    }
    lp = std::move(res.lp);
    sol = res.solution;
    refine = {{"rounds", res.rounds},
              {"rows_added", res.rows_added},
              {"skipped_targets", res.skipped_targets},
              {"converged", res.converged}};
  } else {
    sol = solve(lp, solver);
  }

  fs::create_directories(cfg.out);
  write_json(ctx.path("lp.json"), lp_to_json(lp));
  write_rows_csv(lp.rows, n, m, ctx.path("lp_rows.csv"));
  write_json(ctx.path("solution.json"), solution_to_json(sol));

  Json report = ctx.header("solve");
  report["status"] = to_string(sol.status);
  report["objective_value"] = sol.objective_value;
  report["rows"] = lp.rows.size();
  report["refinement"] = refine;
  report["mixed_covariance_warning"] = mixed;
  int code = kExitOk;
  std::optional<AffinePolicy> pol;
  try {
    pol = extract_policy(sol, n, m);
    write_json(ctx.path("policy.json"), policy_to_json(*pol));
  } catch (const ExtractionError& e) {
    report["extraction_error"] = e.what();
    code = kExitNegative;
  }
  if (sol.status != LPStatus::optimal) code = kExitNegative;

  try {
    const FixedPoints fp = compute_fixed_points(sys, cost);
    Json metrics;
    if (pol) metrics["policy_error"] = policy_error(*pol, fp.policy);
    if (sol.theta.size() == quad_param_count(n, m)) {
      const bool biased = common_norm && !deterministic &&
                          cfg.lp.rows == "data";
      const QuadFunction target =
          biased ? biased_q(fp, sys, *common_norm) : fp.q_hat;
      metrics["theta_reference"] = biased ? "q_bar" : "q_hat";
      metrics["theta_error"] =
          (sol.theta - target.theta()).cwiseAbs().maxCoeff();
      const Eigen::Index blocks = quad_param_count(n, m) - 1;
      metrics["theta_error_Q_Ql"] =
          (sol.theta.head(blocks) - fp.q_hat.theta().head(blocks))
              .cwiseAbs()
              .maxCoeff();
    }
    report["metrics"] = metrics;
  } catch (const Error& e) {
    report["metrics"] = std::string("unavailable: ") + e.what();
  }
  write_json(ctx.path("solve_report.json"), report);
  std::ostringstream os;
  os << "solve: status " << to_string(sol.status) << ", " << lp.rows.size()
     << " rows";
  if (report["metrics"].is_object() && report["metrics"].contains("policy_error")) {
    os << ", policy error " << report["metrics"]["policy_error"].get<double>();
  }
  if (mixed) os << "; WARNING mixed covariance constraints";
  ctx.say(os.str());
  return code;
}

struct Check {
  std::string name;
  double value = 0.0;
  double tol = 0.0;
  bool pass = false;
};

struct Verification {
  std::vector<Check> checks;
  double offset = 0.0;
};

Verification verify_instance(const AffineSystem& sys, const StageCost& cost,
                             const Tolerances& tol, std::size_t grid,
                             Rng& rng) {
  const FixedPoints fp = compute_fixed_points(sys, cost);
  const AugmentedSystem aug = augment(sys, cost);
  double t_res = 0.0;
  double f_res = 0.0;
  double fr_res = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < grid; ++i) {
    const Vector x = gaussian_vector(sys.n(), rng);
    const Vector u = gaussian_vector(sys.m(), rng);
    t_res = std::max(t_res, std::abs(fp.v_star(x) - apply_T(fp.v_star, sys, cost, x)));
    f_res = std::max(f_res, std::abs(fp.q_star(x, u) -
                                     apply_F(fp.q_star, sys, cost, x, u)));
    fr_res = std::max(fr_res, std::abs(fp.q_hat(x, u) -
                                       apply_F_relaxed(fp.q_hat, sys, cost, x, u)));
    const double gap = fp.q_hat(x, u) - fp.q_star(x, u);
    lo = std::min(lo, gap);
    hi = std::max(hi, gap);
  }
  const double expected_offset = relaxed_offset(fp.q_star, sys);
  const AffinePolicy from_v = policy_from_value(fp.v_star, sys, cost);
  const AffinePolicy from_qhat = argmin_policy(fp.q_hat);
  const double pol = std::max(policy_error(from_v, fp.policy),
                              policy_error(from_qhat, fp.policy));
  auto mk = [](std::string name, double value, double t) {
    return Check{std::move(name), value, t, value <= t};
  };
  return {{
      mk("are_residual", are_residual(aug, fp.are.Ptil), tol.are),
      mk("v_star_minus_T_v_star", t_res, tol.residual),
      mk("q_star_minus_F_q_star", f_res, tol.residual),
      mk("q_hat_minus_Frelaxed_q_hat", fr_res, tol.residual),
      mk("policy_consistency", pol, 1e-8),
      mk("offset_spread", hi - lo, 1e-8),
      mk("offset_formula", std::abs(0.5 * (hi + lo) - expected_offset), 1e-8),
      mk("offset_negativity", std::max(0.0, -lo), 1e-12),
  }, fp.relaxed_offset};
}

int cmd_verify(const Context& ctx) {
  const ExperimentConfig& cfg = ctx.cfg;
  Rng rng = make_rng(cfg.seed, Stream::verify);
  struct Instance {
    std::string label;
    std::optional<AffineSystem> sys;
    std::optional<StageCost> cost;
  };
  std::vector<Instance> instances;
  if (cfg.system.fixed) {
    instances.push_back({"config", cfg.system.fixed,
                         make_cost(cfg, cfg.system.fixed->n(),
                                   cfg.system.fixed->m())});
  }
  for (std::size_t i = 0; i < cfg.verify.batch; ++i) {
    std::uniform_real_distribution<double> g(0.8, 0.99);
    const double gamma = g(rng);
    AffineSystem sys = random_system(cfg.verify.n, cfg.verify.m, gamma, 1.1,
                                     0.0, rng);
    const Matrix F = gaussian_matrix(sys.n(), sys.n(), rng, 0.3);
    sys.Sigma = SymMatrix::from_upper(F * F.transpose());
    sys.mu = gaussian_vector(sys.n(), rng, 0.1);
    const bool custom_fits =
        cfg.cost && cfg.cost->n() == sys.n() && cfg.cost->m() == sys.m();
    instances.push_back(
        {"random_" + std::to_string(i), sys,
         custom_fits ? *cfg.cost
                     : StageCost::quadratic(sys.n(), sys.m(), cfg.cost_q,
                                            cfg.cost_r)});
  }

  Json table = Json::array();
  bool all_pass = true;
  for (const Instance& inst : instances) {
    Json row;
    row["instance"] = inst.label;
    try {
      const Verification v =
          verify_instance(*inst.sys, *inst.cost, cfg.tol, cfg.verify.grid, rng);
      bool pass = true;
      Json cj = Json::object();
      for (const Check& c : v.checks) {
        cj[c.name] = {{"value", c.value}, {"tol", c.tol}, {"pass", c.pass}};
        pass = pass && c.pass;
      }
      row["checks"] = cj;
      row["offset"] = v.offset;
      row["status"] = pass ? "pass" : "fail";
      all_pass = all_pass && pass;
    } catch (const PreconditionError& e) {
      row["status"] = "precondition_failed";
      row["message"] = e.what();
      all_pass = false;
    } catch (const Error& e) {
      row["status"] = "error";
      row["message"] = e.what();
      all_pass = false;
    }
    if (!ctx.quiet) {
      std::cout << std::left << std::setw(12) << inst.label << " "
                << row["status"].get<std::string>();
      if (row.contains("offset")) {
        std::cout << "  offset " << format_double(row["offset"].get<double>());
      }
      if (row.contains("message")) std::cout << "  " << row["message"].get<std::string>();
      std::cout << "\n";
    }
    table.push_back(std::move(row));
  }
  Json report = ctx.header("verify");
  report["instances"] = table;
  report["all_pass"] = all_pass;
  fs::create_directories(cfg.out);
  write_json(ctx.path("verify_report.json"), report);
  ctx.say(std::string("verify: ") + (all_pass ? "all pass" : "FAILURES"));
  return all_pass ? kExitOk : kExitNegative;
}

void flatten(const Json& j, const std::string& prefix,
             std::vector<std::pair<std::string, std::string>>& out) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(),
              out);
    }
  } else if (j.is_number_float()) {
    out.emplace_back(prefix, format_double(j.get<double>()));
  } else if (j.is_primitive()) {
    out.emplace_back(prefix, j.is_string() ? j.get<std::string>() : j.dump());
  }
}

int cmd_report(const Context& ctx) {
  Json summary = ctx.header("report");
  Json sections = Json::object();
  for (const char* name : {"dataset", "pe_report", "synth_report",
                           "solve_report", "verify_report"}) {
    const fs::path p = ctx.path(std::string(name) + ".json");
    if (fs::exists(p)) sections[name] = read_json(p);
  }
  if (sections.empty()) {
    throw ConfigError("report: no outputs found in " + ctx.cfg.out.string());
  }
  summary["sections"] = sections;
  write_json(ctx.path("summary.json"), summary);
  std::vector<std::pair<std::string, std::string>> flat;
  for (auto it = sections.begin(); it != sections.end(); ++it) {
    // Per-instance verify tables and singular values are left to the JSON.
    Json s = it.value();
    s.erase("instances");
    flatten(s, it.key(), flat);
  }
  std::string csv = "key,value\n";
  for (const auto& [k, v] : flat) {
    if (k.find("singular_values") != std::string::npos) continue;
    std::string value = v;
    std::replace(value.begin(), value.end(), ',', ';');
    csv += k + "," + value + "\n";
  }
  write_text(ctx.path("summary.csv"), csv);
  ctx.say("report: wrote summary.json and summary.csv");
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Data-driven LP approach to affine LQ control"};
  app.require_subcommand(1);
  std::string config_path;
  Overrides ov;
  std::uint64_t seed = 0;
  std::string out;
  double tol_rank = 0.0;
  double tol_lp = 0.0;
  bool quiet = false;
  auto* seed_opt = app.add_option("--seed", seed, "Override the config seed");
  auto* out_opt = app.add_option("--out", out, "Output directory");
  auto* tr_opt = app.add_option("--tol-rank", tol_rank, "Relative rank tolerance");
  auto* tl_opt = app.add_option("--tol-lp", tol_lp, "LP feasibility tolerance");
  app.add_option("--config", config_path, "Experiment config (JSON)")
      ->required();
  app.add_flag("--quiet", quiet, "Suppress progress output");

  auto* gen = app.add_subcommand("gen", "Generate system, cost and dataset");
  auto* pe = app.add_subcommand("pe", "Certify persistency of excitation");
  std::string pe_dataset;
  Eigen::Index pe_order = 0;
  pe->add_option("--dataset", pe_dataset, "Dataset CSV");
  pe->add_option("--order", pe_order, "PE order to test");
  auto* synth = app.add_subcommand("synth", "Synthesize constraint rows");
  std::string synth_dataset;
  synth->add_option("--dataset", synth_dataset, "Dataset CSV");
  auto* solve_cmd = app.add_subcommand("solve", "Solve the relaxed Q-LP");
  std::string constraints;
  solve_cmd->add_option("--constraints", constraints, "Constraint CSV");
  auto* verify = app.add_subcommand("verify", "Run the closed-form oracle suite");
  auto* report = app.add_subcommand("report", "Aggregate outputs");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  if (*seed_opt) ov.seed = seed;
  if (*out_opt) ov.out = out;
  if (*tr_opt) ov.tol_rank = tol_rank;
  if (*tl_opt) ov.tol_lp = tol_lp;

  try {
    Context ctx{load_config(config_path, ov), quiet};
    if (*gen) return cmd_gen(ctx);
    if (*pe) return cmd_pe(ctx, pe_dataset, pe_order);
    if (*synth) return cmd_synth(ctx, synth_dataset);
    if (*solve_cmd) return cmd_solve(ctx, constraints);
    if (*verify) return cmd_verify(ctx);
    if (*report) return cmd_report(ctx);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DepthError& e) {
    std::cerr << "depth error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DimensionError& e) {
    std::cerr << "dimension error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNegative;
  } catch (const Json::exception& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace affinelp::cli
