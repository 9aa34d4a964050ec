#include "phl/config.hpp"

#include <cmath>
#include <set>

#include "json_io.hpp"
#include "phl/error.hpp"

namespace phl {

namespace {

using detail::json;

[[noreturn]] void bad(const std::string& msg) { throw Error(ErrorKind::InvalidConfig, msg); }

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) bad("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T get_as(const json& j, const std::string& key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    bad("key '" + key + "' has the wrong type");
  }
}

Regime regime_from_string(const std::string& s) {
  if (s == "well") return Regime::Well;
  if (s == "mis") return Regime::Mis;
  bad("regime must be 'well' or 'mis', got '" + s + "'");
}

}  // namespace

std::string experiment_name(Experiment e) {
  switch (e) {
    case Experiment::Fig1: return "fig1_bias";
    case Experiment::Fig2: return "fig2_wellspec_rate";
    case Experiment::Fig3: return "fig3_misspec_bias";
    case Experiment::Fig4: return "fig4_multistep_loss";
    case Experiment::Fig5: return "fig5_control";
  }
  return "unknown";
}

Experiment experiment_from_string(const std::string& name) {
  for (Experiment e : {Experiment::Fig1, Experiment::Fig2, Experiment::Fig3, Experiment::Fig4,
                       Experiment::Fig5}) {
    const std::string full = experiment_name(e);
    if (name == full || name == full.substr(0, 4)) return e;
  }
  bad("unknown experiment '" + name + "'");
}

std::vector<std::size_t> log_grid(std::size_t lo, std::size_t hi, std::size_t count) {
  std::vector<std::size_t> out;
  if (lo == 0 || hi < lo || count == 0) return out;
  if (count == 1) return {hi};
  const double l0 = std::log(static_cast<double>(lo)), l1 = std::log(static_cast<double>(hi));
  for (std::size_t i = 0; i < count; ++i) {
    const double v = std::exp(l0 + (l1 - l0) * static_cast<double>(i) / (count - 1));
    const auto n = static_cast<std::size_t>(std::llround(v));
    if (out.empty() || n > out.back()) out.push_back(n);
  }
  return out;
}

ExperimentConfig default_config(Experiment e) {
  ExperimentConfig c;
  c.experiment = e;
  c.control_b = Matrix::from_rows({{0.0}, {0.25}});
  switch (e) {
    case Experiment::Fig1:
      for (int h = 1; h <= 30; ++h) c.horizon_grid.push_back(h);
      c.model = example1_system();
      break;
    case Experiment::Fig2:
      c.a_grid = {0.5, 0.75, 0.9};
      c.horizon_grid = {5};
      c.n_grid = log_grid(15, 3000, 25);
      c.reps = 2000;
      break;
    case Experiment::Fig3:
      c.a_grid = {0.5, 0.75, 0.9};
      c.horizon_grid = {5};
      c.n_grid = log_grid(10, 3000, 25);
      c.reps = 1000;
      break;
    case Experiment::Fig4:
      c.a_grid = {0.9};
      c.horizon_grid = {10};
      c.n_grid = log_grid(50, 3000, 10);
      c.reps = 100;
      c.regimes = {Regime::Well, Regime::Mis};
      break;
    case Experiment::Fig5:
      c.a_grid = {0.9};
      c.horizon_grid = {20};
      c.n_grid = log_grid(60, 3000, 12);
      c.reps = 1000;
      c.regimes = {Regime::Well, Regime::Mis};
      break;
  }
  return c;
}

void validate(const ExperimentConfig& c) {
  if (c.reps < 1) bad("reps must be at least 1");
  if (c.horizon_grid.empty()) bad("horizon grid is empty");
  for (int h : c.horizon_grid)
    if (h < 1) bad("horizons must be at least 1");
  if (c.experiment != Experiment::Fig1) {
    if (c.n_grid.empty()) bad("N grid is empty");
    for (std::size_t i = 1; i < c.n_grid.size(); ++i)
      if (c.n_grid[i] <= c.n_grid[i - 1]) bad("N grid must be strictly increasing");
    if (c.n_grid.front() < 2) bad("N must be at least 2");
    if (!c.model && c.a_grid.empty()) bad("a grid is empty");
  }
  if ((c.experiment == Experiment::Fig4 || c.experiment == Experiment::Fig5) &&
      c.regimes.empty() && !c.model) {
    bad("regime list is empty");
  }
  if (!(c.gd.step > 0.0)) bad("gd.step must be positive");
  if (c.gd.iterations < 0) bad("gd.iters must be nonnegative");
  if (c.mpc.horizon < 1 || c.mpc.predictor_horizon < c.mpc.horizon) {
    bad("mpc.predictor_horizon must be at least mpc.horizon >= 1");
  }
  if (c.ridge < 0.0) bad("ridge must be nonnegative");
  if (c.empirical_eval && c.eval_len < 1000 + 64) bad("eval_len too short for the burn-in");
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    bad(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) bad("config must be a JSON object");
  reject_unknown(j,
                 {"experiment", "a_grid", "horizon", "horizon_grid", "n_grid", "reps",
                  "base_seed", "model", "regimes", "control_B", "gd", "mpc", "empirical_eval",
                  "eval_len", "ridge", "output", "threads"},
                 "config");
  if (!j.contains("experiment")) bad("config needs an 'experiment' key");
  ExperimentConfig c = default_config(experiment_from_string(get_as<std::string>(j, "experiment")));

  if (j.contains("a_grid")) c.a_grid = get_as<std::vector<double>>(j, "a_grid");
  if (j.contains("horizon") && j.contains("horizon_grid")) {
    bad("give either 'horizon' or 'horizon_grid', not both");
  }
  if (j.contains("horizon")) c.horizon_grid = {get_as<int>(j, "horizon")};
  if (j.contains("horizon_grid")) c.horizon_grid = get_as<std::vector<int>>(j, "horizon_grid");
  if (j.contains("n_grid")) {
    const auto raw = get_as<std::vector<long long>>(j, "n_grid");
    c.n_grid.clear();
    for (long long n : raw) {
      if (n < 1) bad("N values must be positive");
      c.n_grid.push_back(static_cast<std::size_t>(n));
    }
  }
  if (j.contains("reps")) c.reps = get_as<int>(j, "reps");
  if (j.contains("base_seed")) c.base_seed = get_as<std::uint64_t>(j, "base_seed");
  if (j.contains("model")) {
    try {
      c.model = detail::model_from_json_object(j.at("model"));
    } catch (const Error& e) {
      bad(std::string("model: ") + e.what());
    }
  }
  if (j.contains("regimes")) {
    c.regimes.clear();
    for (const auto& s : get_as<std::vector<std::string>>(j, "regimes"))
      c.regimes.push_back(regime_from_string(s));
  }
  if (j.contains("control_B")) c.control_b = detail::matrix_from_json(j.at("control_B"), "control_B");
  if (j.contains("gd")) {
    const json& g = j.at("gd");
    if (!g.is_object()) bad("'gd' must be an object");
    reject_unknown(g, {"step", "iters"}, "gd");
    if (g.contains("step")) c.gd.step = get_as<double>(g, "step");
    if (g.contains("iters")) c.gd.iterations = get_as<int>(g, "iters");
  }
  if (j.contains("mpc")) {
    const json& m = j.at("mpc");
    if (!m.is_object()) bad("'mpc' must be an object");
    reject_unknown(m, {"horizon", "predictor_horizon", "terminal"}, "mpc");
    if (m.contains("horizon")) c.mpc.horizon = get_as<int>(m, "horizon");
    if (m.contains("predictor_horizon")) {
      c.mpc.predictor_horizon = get_as<int>(m, "predictor_horizon");
    }
    if (m.contains("terminal")) {
      const auto t = get_as<std::string>(m, "terminal");
      if (t == "error") {
        c.mpc.terminal = TerminalMode::Error;
      } else if (t == "min_norm") {
        c.mpc.terminal = TerminalMode::MinNorm;
      } else {
        bad("mpc.terminal must be 'error' or 'min_norm'");
      }
    }
  }
  if (j.contains("empirical_eval")) c.empirical_eval = get_as<bool>(j, "empirical_eval");
  if (j.contains("eval_len")) c.eval_len = get_as<std::size_t>(j, "eval_len");
  if (j.contains("ridge")) c.ridge = get_as<double>(j, "ridge");
  if (j.contains("output")) c.output = get_as<std::string>(j, "output");
  if (j.contains("threads")) c.threads = get_as<int>(j, "threads");
  validate(c);
  return c;
}

}  // namespace phl
