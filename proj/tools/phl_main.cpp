// Command-line front end for the experiment harness.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "phl/config.hpp"
#include "phl/error.hpp"
#include "phl/harness.hpp"
#include "phl/numerics.hpp"
#include "phl/predictors.hpp"
#include "phl/system.hpp"
#include "phl/theory.hpp"

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  const std::filesystem::path parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
}

struct SweepFlags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> reps;
  std::optional<int> threads;
  std::optional<int> horizon;
  std::vector<std::size_t> n;
  std::optional<double> ridge;
  bool empirical = false;
};

int run_sweep(phl::Experiment e, const SweepFlags& f) {
  phl::ExperimentConfig cfg = phl::default_config(e);
  if (!f.config.empty()) {
    cfg = phl::parse_config(read_file(f.config));
    if (cfg.experiment != e) {
      throw UsageError("config is for " + phl::experiment_name(cfg.experiment) + ", not " +
                       phl::experiment_name(e));
    }
  }
  if (f.seed) cfg.base_seed = *f.seed;
  if (f.reps) cfg.reps = *f.reps;
  if (f.threads) cfg.threads = *f.threads;
  if (f.horizon) cfg.horizon_grid = {*f.horizon};
  if (!f.n.empty()) cfg.n_grid = f.n;
  if (f.ridge) cfg.ridge = *f.ridge;
  if (f.empirical) cfg.empirical_eval = true;
  if (!f.out.empty()) cfg.output = f.out;

  const auto records = phl::run_experiment(cfg);
  std::ostringstream csv;
  phl::write_csv(csv, records);
  write_text(cfg.output, csv.str());
  return 0;
}

// Trajectory CSV: header y0..y{dy-1},u0..u{du-1}, one row per time step.
std::string trajectory_to_csv(const phl::Trajectory& t) {
  std::ostringstream out;
  const std::size_t dy = t.y.cols(), du = t.u.cols();
  for (std::size_t i = 0; i < dy; ++i) out << (i ? "," : "") << 'y' << i;
  for (std::size_t i = 0; i < du; ++i) out << (dy + i ? "," : "") << 'u' << i;
  out << '\n';
  for (std::size_t r = 0; r < t.length(); ++r) {
    for (std::size_t i = 0; i < dy; ++i) out << (i ? "," : "") << phl::format_double(t.y(r, i));
    for (std::size_t i = 0; i < du; ++i)
      out << (dy + i ? "," : "") << phl::format_double(t.u(r, i));
    out << '\n';
  }
  return out.str();
}

phl::Trajectory trajectory_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw UsageError("trajectory file is empty");
  std::size_t dy = 0, du = 0;
  {
    std::istringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) {
      if (!cell.empty() && cell[0] == 'y' && du == 0) {
        ++dy;
      } else if (!cell.empty() && cell[0] == 'u') {
        ++du;
      } else {
        throw UsageError("bad trajectory header column '" + cell + "'");
      }
    }
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<double> row;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() != dy + du) throw UsageError("ragged trajectory row");
    rows.push_back(std::move(row));
  }
  phl::Trajectory t;
  t.y = phl::Matrix::zeros(rows.size(), dy);
  t.u = phl::Matrix::zeros(rows.size(), du);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t i = 0; i < dy; ++i) t.y(r, i) = rows[r][i];
    for (std::size_t i = 0; i < du; ++i) t.u(r, i) = rows[r][dy + i];
  }
  return t;
}

phl::LtiModel load_model(const std::string& path) {
  const std::string text = read_file(path);
  // Accept either a bare model or an experiment config carrying one.
  if (text.find("\"experiment\"") != std::string::npos) {
    auto cfg = phl::parse_config(text);
    if (cfg.model) return *cfg.model;
    if (cfg.experiment == phl::Experiment::Fig1) return phl::example1_system();
    throw UsageError("config has no model");
  }
  return phl::model_from_json(text);
}

void print_theory(const phl::LtiModel& model, int h) {
  const phl::SystemAnalysis sys = phl::analyze(model, h);
  std::printf("%-28s %s\n", "regime", model.well_specified() ? "well" : "mis");
  std::printf("%-28s %d\n", "horizon", h);
  std::printf("%-28s %.6g\n", "rho(A)", phl::numerics::spectral_radius(model.a()));
  if (model.well_specified()) {
    std::printf("%-28s %.10g\n", "irreducible |Gamma_w|^2", sys.ops.gamma_w.squared_norm());
    std::printf("%-28s %.10g\n", "multi_step rate", phl::theory::prop1_multistep_rate(model, sys));
    std::printf("%-28s %.10g\n", "single_step rate", phl::theory::prop2_singlestep_rate(model, sys));
    return;
  }
  std::printf("%-28s %.10g\n", "single-step limit rho(R)",
              phl::theory::lemma1_check(model, sys.bundle));
  std::printf("%-28s %.10g\n", "multi_step bias", phl::theory::prop3_multistep_bias(model, sys));
  std::printf("%-28s %.10g\n", "single_step bias", phl::theory::prop4_singlestep_bias(model, sys));
  if (model.du() == 0) {
    std::printf("%-28s %.10g\n", "multi_step rate", phl::theory::prop3_reducible_rate(model, sys));
    std::printf("%-28s %.10g\n", "single_step rate", phl::theory::prop4_reducible_rate(model, sys));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-step vs single-step predictor experiments"};
  app.require_subcommand(1);

  SweepFlags sweep;
  const phl::Experiment experiments[] = {phl::Experiment::Fig1, phl::Experiment::Fig2,
                                         phl::Experiment::Fig3, phl::Experiment::Fig4,
                                         phl::Experiment::Fig5};
  std::vector<std::pair<CLI::App*, phl::Experiment>> sweep_cmds;
  for (phl::Experiment e : experiments) {
    const std::string name = phl::experiment_name(e).substr(0, 4);
    auto* sub = app.add_subcommand(name, "Run the " + phl::experiment_name(e) + " sweep");
    sub->add_option("--config", sweep.config, "Experiment config (JSON)");
    sub->add_option("--out", sweep.out, "Output CSV path ('-' for stdout)");
    sub->add_option("--seed", sweep.seed, "Base seed");
    sub->add_option("--reps", sweep.reps, "Replications per cell")->check(CLI::PositiveNumber);
    sub->add_option("--threads", sweep.threads, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--horizon", sweep.horizon, "Single horizon")->check(CLI::PositiveNumber);
    sub->add_option("--n", sweep.n, "Training lengths")->delimiter(',');
    sub->add_option("--ridge", sweep.ridge, "Ridge added to the Gram matrix");
    sub->add_flag("--empirical-eval", sweep.empirical, "Score on a fresh rollout");
    sweep_cmds.emplace_back(sub, e);
  }

  std::string run_config;
  auto* run = app.add_subcommand("run", "Run the sweep named in a config");
  run->add_option("--config", run_config, "Experiment config (JSON)")->required();
  run->add_option("--out", sweep.out, "Output CSV path");
  run->add_option("--threads", sweep.threads, "Worker threads")->check(CLI::PositiveNumber);

  std::string model_path;
  int theory_h = 5;
  auto* theory = app.add_subcommand("theory", "Print closed-form quantities for a model");
  theory->add_option("--model,--config", model_path, "Model or config JSON")->required();
  theory->add_option("--horizon", theory_h, "Horizon")->check(CLI::PositiveNumber);

  std::size_t sim_n = 1000;
  std::uint64_t sim_seed = 0;
  std::string sim_out;
  auto* sim = app.add_subcommand("simulate", "Simulate an open-loop trajectory to CSV");
  sim->add_option("--model", model_path, "Model JSON")->required();
  sim->add_option("--n", sim_n, "Length")->check(CLI::PositiveNumber);
  sim->add_option("--seed", sim_seed, "Seed");
  sim->add_option("--out", sim_out, "Output CSV path");

  std::string data_path, structure = "multi_step", fit_out;
  int fit_h = 5;
  double fit_ridge = 0.0;
  auto* fit = app.add_subcommand("fit", "Fit a predictor to a trajectory CSV");
  fit->add_option("--data", data_path, "Trajectory CSV")->required();
  fit->add_option("--horizon", fit_h, "Horizon")->check(CLI::PositiveNumber);
  fit->add_option("--structure", structure, "single_step | multi_step | structured_gd");
  fit->add_option("--ridge", fit_ridge, "Ridge");
  fit->add_option("--out", fit_out, "Output JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    for (auto& [sub, e] : sweep_cmds)
      if (sub->parsed()) return run_sweep(e, sweep);
    if (run->parsed()) {
      auto cfg = phl::parse_config(read_file(run_config));
      sweep.config = run_config;
      return run_sweep(cfg.experiment, sweep);
    }
    if (theory->parsed()) {
      print_theory(load_model(model_path), theory_h);
      return 0;
    }
    if (sim->parsed()) {
      write_text(sim_out, trajectory_to_csv(phl::simulate(load_model(model_path), sim_n, sim_seed)));
      return 0;
    }
    if (fit->parsed()) {
      const phl::Trajectory t = trajectory_from_csv(read_file(data_path));
      phl::Predictor p;
      switch (phl::structure_from_string(structure)) {
        case phl::Structure::SingleStepRollout:
          p = phl::single_step_predictor(t, fit_h, fit_ridge);
          break;
        case phl::Structure::DirectMultiStep:
          p = phl::fit_multi_step(t, fit_h, fit_ridge);
          break;
        case phl::Structure::StructuredGD:
          p = phl::fit_structured_gd(t, fit_h, phl::fit_single_step(t, fit_ridge)).predictor;
          break;
      }
      write_text(fit_out, phl::predictor_to_json(p) + "\n");
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const phl::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.kind() == phl::ErrorKind::InvalidConfig ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
