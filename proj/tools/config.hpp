#pragma once

// Experiment configuration for the affinelp command-line tool.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "affinelp/io.hpp"

namespace affinelp::cli {

inline constexpr const char* kToolVersion = "0.1.0";

struct SystemSpec {
  std::optional<AffineSystem> fixed;  // explicit matrices
  // Random ensemble, used when no matrices are given.
  Eigen::Index n = 2;
  Eigen::Index m = 1;
  double gamma = 0.9;
  double spectral_radius = 1.1;
  double noise = 0.0;  // Sigma = noise * I
};

struct DatasetSpec {
  Eigen::Index d = 50;
  std::string input = "gaussian";  // gaussian | arithmetic | confined
  double input_scale = 1.0;
  std::optional<Vector> x0;
  Eigen::Index confine_index = -1;  // default: last state
  double confine_level = 1.0;
};

struct TargetSpec {
  std::optional<std::size_t> count;  // default 3p
  double scale = 1.0;
  std::string w = "gaussian";  // gaussian | copy_u
  NormMode mode = NormMode::equalize_norm;
};

struct LPSpec {
  std::optional<double> bound = kDefaultBound;
  std::size_t objective_samples = 20;
  double objective_scale = 1.0;
  bool refine = true;
  std::string rows = "data";  // data | expected
  std::size_t max_rounds = 60;
  Eigen::Index realizations = 1;  // successor draws averaged per data row
};

struct Tolerances {
  double rank = kDefaultRankTol;
  double lp = 1e-9;
  double residual = 1e-6;
  double are = 1e-9;
  double spread = 0.05;
};

struct VerifySpec {
  std::size_t batch = 20;
  Eigen::Index n = 3;
  Eigen::Index m = 2;
  std::size_t grid = 100;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  SystemSpec system;
  std::optional<StageCost> cost;  // default quadratic(q, r)
  double cost_q = 1.0;
  double cost_r = 1.0;
  DatasetSpec dataset;
  Eigen::Index pe_order = 0;  // 0: n + 2
  Eigen::Index horizon = 1;
  TargetSpec targets;
  LPSpec lp;
  Tolerances tol;
  VerifySpec verify;
  std::filesystem::path out = ".";
  Json effective;    // config after overrides, as hashed
  std::string hash;  // FNV-1a of effective.dump()
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<double> tol_rank;
  std::optional<double> tol_lp;
};

// Throws ConfigError for missing seed, bad dimensions or malformed fields.
ExperimentConfig parse_config(const Json& j, const Overrides& ov);
ExperimentConfig load_config(const std::filesystem::path& path,
                             const Overrides& ov);

std::string fnv1a_hex(const std::string& text);

// System and cost from the config, drawing the random ensemble when no
// matrices are given. Random systems are redrawn until controllable.
AffineSystem make_system(const ExperimentConfig& cfg, Rng& rng);
StageCost make_cost(const ExperimentConfig& cfg, Eigen::Index n,
                    Eigen::Index m);

// Random controllable, stabilizable system with the given shape.
AffineSystem random_system(Eigen::Index n, Eigen::Index m, double gamma,
                           double spectral_radius, double noise, Rng& rng);

}  // namespace affinelp::cli
