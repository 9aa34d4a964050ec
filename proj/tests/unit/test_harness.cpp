#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <sstream>

#include "phl/config.hpp"
#include "phl/error.hpp"
#include "phl/harness.hpp"

using namespace phl;

namespace {

std::string csv_of(const std::vector<SweepRecord>& r) {
  std::ostringstream out;
  write_csv(out, r);
  return out.str();
}

ExperimentConfig small_fig2() {
  ExperimentConfig c = default_config(Experiment::Fig2);
  c.a_grid = {0.5};
  c.n_grid = {40, 120};
  c.reps = 12;
  c.base_seed = 7;
  return c;
}

}  // namespace

TEST_CASE("running statistics") {
  RunningStats s;
  const std::vector<double> xs = {1.0, 4.0, 2.0, 8.0, 5.0};
  for (double x : xs) s.add(x);
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= xs.size();
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= xs.size() - 1;
  CHECK(s.mean() == doctest::Approx(mean));
  CHECK(s.stderr_of_mean() == doctest::Approx(std::sqrt(var / xs.size())));
  s.add(std::numeric_limits<double>::infinity());
  CHECK(std::isinf(s.mean()));
  CHECK(s.count() == 6);
}

TEST_CASE("parallel_for covers every index once and propagates errors") {
  std::vector<std::atomic<int>> hits(200);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i]++; });
  for (auto& h : hits) CHECK(h.load() == 1);
  CHECK_THROWS_AS(parallel_for(50, 3,
                               [](std::size_t i) {
                                 if (i == 17) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
}

TEST_CASE("log grid") {
  const auto g = log_grid(10, 3000, 25);
  CHECK(g.front() == 10);
  CHECK(g.back() == 3000);
  for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] > g[i - 1]);
  CHECK(log_grid(5, 5, 3) == std::vector<std::size_t>{5});
}

TEST_CASE("config parsing") {
  const ExperimentConfig c = parse_config(R"({
    "experiment": "fig4_multistep_loss", "a_grid": [0.8], "horizon": 6,
    "n_grid": [100, 200], "reps": 3, "base_seed": 9, "regimes": ["mis"],
    "gd": {"step": 1e-4, "iters": 50}, "mpc": {"horizon": 4, "predictor_horizon": 6}
  })");
  CHECK(c.experiment == Experiment::Fig4);
  CHECK(c.horizon_grid == std::vector<int>{6});
  CHECK(c.reps == 3);
  CHECK(c.regimes == std::vector<Regime>{Regime::Mis});
  CHECK(c.gd.iterations == 50);
  CHECK(c.mpc.horizon == 4);

  const ExperimentConfig d = parse_config(R"({"experiment": "fig2"})");
  CHECK(d.reps == 2000);
  CHECK(d.a_grid.size() == 3);

  auto rejects = [](const char* text) {
    try {
      parse_config(text);
    } catch (const Error& e) {
      return e.kind() == ErrorKind::InvalidConfig;
    }
    return false;
  };
  CHECK(rejects(R"({"experiment": "fig2", "bogus": 1})"));
  CHECK(rejects(R"({"experiment": "fig9"})"));
  CHECK(rejects(R"({"experiment": "fig2", "n_grid": [100, 50]})"));
  CHECK(rejects(R"({"experiment": "fig2", "reps": 0})"));
  CHECK(rejects(R"({"experiment": "fig5", "regimes": ["sideways"]})"));
  CHECK(rejects(R"({"experiment": "fig5", "mpc": {"horizon": 30}})"));
  CHECK(rejects(R"({"experiment": "fig2", "reps": "many"})"));
  CHECK(rejects("[1, 2]"));
  CHECK(rejects("{"));
}

TEST_CASE("fig1 rows carry both bias curves") {
  ExperimentConfig c = default_config(Experiment::Fig1);
  c.horizon_grid = {1, 5, 10};
  const auto rows = run_experiment(c);
  REQUIRE(rows.size() == 6);
  for (std::size_t i = 0; i < rows.size(); i += 2) {
    CHECK(rows[i].predictor == "multi_step");
    CHECK(rows[i + 1].predictor == "single_step");
    CHECK(rows[i + 1].mean >= rows[i].mean - 1e-9);
    CHECK_FALSE(rows[i].n.has_value());
  }
}

TEST_CASE("sweeps are deterministic across thread counts") {
  ExperimentConfig c = small_fig2();
  c.threads = 1;
  const std::string one = csv_of(run_experiment(c));
  c.threads = 3;
  const std::string three = csv_of(run_experiment(c));
  CHECK(one == three);
  c.base_seed = 8;
  CHECK(csv_of(run_experiment(c)) != one);
}

TEST_CASE("CSV layout") {
  const std::string csv = csv_of(run_experiment(small_fig2()));
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == kCsvHeader);
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 10);
  }
  // Three analytic rows plus two predictors per N cell.
  CHECK(rows == 3 + 2 * 2);
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_double(0.1) == "0.10000000000000001");
}

TEST_CASE("short datasets are dropped, not fatal") {
  ExperimentConfig c = small_fig2();
  c.n_grid = {8, 60};
  const auto rows = run_experiment(c);
  bool saw_drop = false;
  for (const auto& r : rows) {
    // Eight samples leave three windows for a seven-dimensional regressor.
    if (r.n && *r.n == 8 && r.predictor == "multi_step") {
      saw_drop = r.notes.find("dropped=12") != std::string::npos;
      CHECK(std::isnan(r.mean));
    }
  }
  CHECK(saw_drop);
}

TEST_CASE("fig5 reference rows") {
  ExperimentConfig c = default_config(Experiment::Fig5);
  c.n_grid = {200};
  c.reps = 4;
  c.mpc = {5, 5, TerminalMode::Error};
  const auto rows = run_experiment(c);
  int exact = 0, limits = 0;
  for (const auto& r : rows) {
    if (r.predictor == "exact") ++exact;
    if (r.predictor.find("_limit") != std::string::npos) ++limits;
    if (r.notes.find("regime=mis") != std::string::npos && !r.n) {
      CHECK(r.notes.find("control_B=0|0.25") != std::string::npos);
    }
  }
  CHECK(exact == 2);
  CHECK(limits == 8);
}

TEST_CASE("PHL_THREADS overrides the configured worker count") {
  CHECK(resolve_threads(3) >= 1);
  setenv("PHL_THREADS", "2", 1);
  CHECK(resolve_threads(7) == 2);
  unsetenv("PHL_THREADS");
  CHECK(resolve_threads(7) == 7);
}
