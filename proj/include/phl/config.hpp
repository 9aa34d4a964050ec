#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "phl/control.hpp"
#include "phl/system.hpp"

namespace phl {

enum class Experiment { Fig1, Fig2, Fig3, Fig4, Fig5 };

std::string experiment_name(Experiment e);
Experiment experiment_from_string(const std::string& name);

struct GdConfig {
  double step = 2e-5;
  int iterations = 20000;
};

struct MpcConfig {
  int horizon = 20;
  int predictor_horizon = 20;
  TerminalMode terminal = TerminalMode::Error;
};

/// One sweep. Grids are validated on parse: non-empty, N strictly
/// increasing, reps >= 1. When `model` is set it replaces the built-in system
/// of the experiment and `a_grid` is ignored.
struct ExperimentConfig {
  Experiment experiment = Experiment::Fig1;
  std::vector<double> a_grid;
  std::vector<int> horizon_grid;
  std::vector<std::size_t> n_grid;
  int reps = 1;
  std::uint64_t base_seed = 0;
  std::optional<LtiModel> model;
  std::vector<Regime> regimes;  // fig4 / fig5
  Matrix control_b;             // input matrix for the misspecified control run
  GdConfig gd;
  MpcConfig mpc;
  bool empirical_eval = false;
  std::size_t eval_len = 20000;
  double ridge = 0.0;
  std::string output;
  int threads = 0;
};

/// Defaults per experiment (grids, replication counts, systems).
ExperimentConfig default_config(Experiment e);

/// Parses a JSON config on top of the experiment defaults. Unknown keys,
/// wrong types and invalid grids raise InvalidConfig.
ExperimentConfig parse_config(const std::string& json_text);

/// Log-spaced integers in [lo, hi], deduplicated and strictly increasing.
std::vector<std::size_t> log_grid(std::size_t lo, std::size_t hi, std::size_t count);

void validate(const ExperimentConfig& cfg);

}  // namespace phl
