#include "phl/harness.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "phl/control.hpp"
#include "phl/error.hpp"
#include "phl/predictors.hpp"
#include "phl/rng.hpp"
#include "phl/theory.hpp"

namespace phl {

void RunningStats::add(double x) {
  if (std::isinf(x) && x > 0) {
    ++inf_count_;
    return;
  }
  ++n_;
  const double delta = x - mean_;
  mean_ += delta / static_cast<double>(n_);
  m2_ += delta * (x - mean_);
}

double RunningStats::mean() const {
  if (inf_count_ > 0) return std::numeric_limits<double>::infinity();
  if (n_ == 0) return std::numeric_limits<double>::quiet_NaN();
  return mean_;
}

double RunningStats::stderr_of_mean() const {
  if (inf_count_ > 0) return std::numeric_limits<double>::infinity();
  if (n_ < 2) return 0.0;
  const double var = m2_ / static_cast<double>(n_ - 1);
  return std::sqrt(var / static_cast<double>(n_));
}

int resolve_threads(int requested) {
  if (const char* env = std::getenv("PHL_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<int>(v);
  }
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body) {
  const std::size_t workers =
      std::min<std::size_t>(count, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next.store(count);
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(std::ostream& out, const std::vector<SweepRecord>& records) {
  out << kCsvHeader << '\n';
  for (const auto& r : records) {
    std::string notes = r.notes;
    for (char& ch : notes)
      if (ch == ',' || ch == '\n') ch = ';';
    out << r.experiment << ',' << (std::isnan(r.a) ? "" : format_double(r.a)) << ','
        << r.horizon << ',' << (r.n ? std::to_string(*r.n) : "") << ',' << r.predictor << ','
        << r.metric << ',' << format_double(r.mean) << ',' << format_double(r.stderr_) << ','
        << r.reps << ',' << r.seed << ',' << notes << '\n';
  }
}

namespace {

using Outcome = std::vector<std::optional<double>>;

struct SeriesSummary {
  RunningStats stats;
  std::size_t dropped = 0;
};

bool recoverable(ErrorKind k) {
  switch (k) {
    case ErrorKind::SingularGram:
    case ErrorKind::TooShort:
    case ErrorKind::Diverged:
    case ErrorKind::DegenerateTerminal:
    case ErrorKind::SingularKkt:
    case ErrorKind::SingularMatrix:
    case ErrorKind::NotConverged:
      return true;
    default:
      return false;
  }
}

// Runs fn and turns recoverable failures into an empty result.
template <typename F>
auto guarded(F&& fn) -> std::optional<decltype(fn())> {
  try {
    return fn();
  } catch (const Error& e) {
    if (recoverable(e.kind())) return std::nullopt;
    throw;
  }
}

// Replications run in parallel into per-index slots; the reduction walks the
// slots in index order so results do not depend on scheduling.
std::vector<SeriesSummary> monte_carlo(const ExperimentConfig& cfg, std::size_t series,
                                       const std::function<Outcome(std::uint64_t)>& rep_fn) {
  const std::size_t reps = static_cast<std::size_t>(cfg.reps);
  std::vector<Outcome> outcomes(reps);
  parallel_for(reps, resolve_threads(cfg.threads), [&](std::size_t r) {
    outcomes[r] = rep_fn(static_cast<std::uint64_t>(r));
    if (outcomes[r].size() != series) throw std::logic_error("replication series mismatch");
  });
  std::vector<SeriesSummary> out(series);
  for (const auto& o : outcomes) {
    for (std::size_t s = 0; s < series; ++s) {
      if (o[s]) {
        out[s].stats.add(*o[s]);
      } else {
        ++out[s].dropped;
      }
    }
  }
  return out;
}

std::string eval_note(const ExperimentConfig& cfg) {
  return cfg.empirical_eval ? "eval=empirical(len=" + std::to_string(cfg.eval_len) + ")"
                            : "eval=analytic";
}

struct RecordFactory {
  const ExperimentConfig& cfg;
  double a;
  int horizon;

  SweepRecord analytic(const std::string& predictor, const std::string& metric, double value,
                       const std::string& notes) const {
    SweepRecord r;
    r.experiment = experiment_name(cfg.experiment);
    r.a = a;
    r.horizon = horizon;
    r.predictor = predictor;
    r.metric = metric;
    r.mean = value;
    r.stderr_ = 0.0;
    r.reps = 1;
    r.seed = cfg.base_seed;
    r.notes = notes.empty() ? "analytic" : "analytic;" + notes;
    return r;
  }

  SweepRecord cell(std::size_t n, const std::string& predictor, const std::string& metric,
                   const SeriesSummary& s, const std::string& notes) const {
    SweepRecord r;
    r.experiment = experiment_name(cfg.experiment);
    r.a = a;
    r.horizon = horizon;
    r.n = n;
    r.predictor = predictor;
    r.metric = metric;
    r.mean = s.stats.mean();
    r.stderr_ = s.stats.stderr_of_mean();
    r.reps = cfg.reps;
    r.seed = cfg.base_seed;
    r.notes = "monte_carlo;dropped=" + std::to_string(s.dropped) + ";" + notes;
    return r;
  }
};

std::uint64_t train_seed(const ExperimentConfig& cfg, std::uint64_t r) { return cfg.base_seed + r; }
std::uint64_t eval_seed(const ExperimentConfig& cfg, std::uint64_t r) {
  return cfg.base_seed + kEvalSeedOffset + r;
}

// Systems swept by an experiment: (a label, model). A config model replaces
// the built-in family and leaves the a column empty.
std::vector<std::pair<double, LtiModel>> systems(const ExperimentConfig& cfg, bool well) {
  std::vector<std::pair<double, LtiModel>> out;
  if (cfg.model) {
    out.emplace_back(std::numeric_limits<double>::quiet_NaN(), *cfg.model);
    return out;
  }
  for (double a : cfg.a_grid) out.emplace_back(a, eq10_system(a, well));
  return out;
}

double loss_of(const ExperimentConfig& cfg, const Predictor& p, const LtiModel& model,
               const SystemAnalysis& sys, std::uint64_t r) {
  if (cfg.empirical_eval) return empirical_loss(p, model, cfg.eval_len, eval_seed(cfg, r));
  return analytic_loss(p, model, sys);
}

}  // namespace

std::vector<SweepRecord> run_fig1(const ExperimentConfig& cfg) {
  const LtiModel model = cfg.model ? *cfg.model : example1_system();
  std::vector<SweepRecord> out;
  const double rho = theory::lemma1_check(model, covariances(model, 1));
  const std::string notes = "lemma1_rho=" + format_double(rho);
  for (int h : cfg.horizon_grid) {
    const SystemAnalysis sys = analyze(model, h);
    RecordFactory f{cfg, std::numeric_limits<double>::quiet_NaN(), h};
    out.push_back(f.analytic("multi_step", "bias", theory::prop3_multistep_bias(model, sys), notes));
    out.push_back(
        f.analytic("single_step", "bias", theory::prop4_singlestep_bias(model, sys), notes));
  }
  return out;
}

std::vector<SweepRecord> run_fig2(const ExperimentConfig& cfg) {
  std::vector<SweepRecord> out;
  for (const auto& [a, model] : systems(cfg, true)) {
    if (!model.well_specified()) {
      throw Error(ErrorKind::RegimeMismatch, "fig2 needs a well-specified model");
    }
    for (int h : cfg.horizon_grid) {
      const SystemAnalysis sys = analyze(model, h);
      const double gw2 = sys.ops.gamma_w.squared_norm();
      RecordFactory f{cfg, a, h};
      out.push_back(f.analytic("multi_step", "prop1_rate", theory::prop1_multistep_rate(model, sys), ""));
      out.push_back(f.analytic("single_step", "prop2_rate", theory::prop2_singlestep_rate(model, sys), ""));
      out.push_back(f.analytic("exact", "irreducible", gw2, ""));
      for (std::size_t n : cfg.n_grid) {
        const double nd = static_cast<double>(n);
        auto res = monte_carlo(cfg, 2, [&](std::uint64_t r) -> Outcome {
          const Trajectory traj = simulate(model, n, train_seed(cfg, r));
          auto multi = guarded([&] {
            return nd * (loss_of(cfg, fit_multi_step(traj, h, cfg.ridge), model, sys, r) - gw2);
          });
          auto single = guarded([&] {
            return nd *
                   (loss_of(cfg, single_step_predictor(traj, h, cfg.ridge), model, sys, r) - gw2);
          });
          return {multi, single};
        });
        out.push_back(f.cell(n, "multi_step", "scaled_excess_loss", res[0], eval_note(cfg)));
        out.push_back(f.cell(n, "single_step", "scaled_excess_loss", res[1], eval_note(cfg)));
      }
    }
  }
  return out;
}

std::vector<SweepRecord> run_fig3(const ExperimentConfig& cfg) {
  std::vector<SweepRecord> out;
  for (const auto& [a, model] : systems(cfg, false)) {
    if (model.well_specified()) {
      throw Error(ErrorKind::RegimeMismatch, "fig3 needs a misspecified model");
    }
    for (int h : cfg.horizon_grid) {
      const SystemAnalysis sys = analyze(model, h);
      const double b3 = theory::prop3_multistep_bias(model, sys);
      const double b4 = theory::prop4_singlestep_bias(model, sys);
      RecordFactory f{cfg, a, h};
      out.push_back(f.analytic("multi_step", "bias", b3, ""));
      out.push_back(f.analytic("single_step", "bias", b4, ""));
      out.push_back(f.analytic("multi_step", "reducible_rate",
                               theory::prop3_reducible_rate(model, sys), ""));
      out.push_back(f.analytic("single_step", "reducible_rate",
                               theory::prop4_reducible_rate(model, sys), ""));
      for (std::size_t n : cfg.n_grid) {
        const double nd = static_cast<double>(n);
        auto res = monte_carlo(cfg, 4, [&](std::uint64_t r) -> Outcome {
          const Trajectory traj = simulate(model, n, train_seed(cfg, r));
          auto multi = guarded([&] { return loss_of(cfg, fit_multi_step(traj, h, cfg.ridge), model, sys, r); });
          auto single = guarded([&] {
            return loss_of(cfg, single_step_predictor(traj, h, cfg.ridge), model, sys, r);
          });
          std::optional<double> multi_x, single_x;
          if (multi) multi_x = nd * (*multi - b3);
          if (single) single_x = nd * (*single - b4);
          return {multi, single, multi_x, single_x};
        });
        out.push_back(f.cell(n, "multi_step", "loss", res[0], eval_note(cfg)));
        out.push_back(f.cell(n, "single_step", "loss", res[1], eval_note(cfg)));
        out.push_back(f.cell(n, "multi_step", "scaled_excess_loss", res[2], eval_note(cfg)));
        out.push_back(f.cell(n, "single_step", "scaled_excess_loss", res[3], eval_note(cfg)));
      }
    }
  }
  return out;
}

std::vector<SweepRecord> run_fig4(const ExperimentConfig& cfg) {
  std::vector<SweepRecord> out;
  std::vector<Regime> regimes = cfg.regimes;
  if (cfg.model) regimes = {cfg.model->well_specified() ? Regime::Well : Regime::Mis};
  std::ostringstream gd_note;
  gd_note << "gd_step=" << format_double(cfg.gd.step) << ";gd_iters=" << cfg.gd.iterations
          << ";gd_init=single_step;gd_loss=mean";
  for (Regime regime : regimes) {
    const bool well = regime == Regime::Well;
    const std::string tag = well ? "regime=well;" : "regime=mis;";
    for (const auto& [a, model] : systems(cfg, well)) {
      for (int h : cfg.horizon_grid) {
        const SystemAnalysis sys = analyze(model, h);
        const double floor = well ? sys.ops.gamma_w.squared_norm()
                                  : theory::prop3_multistep_bias(model, sys);
        RecordFactory f{cfg, a, h};
        if (well) {
          out.push_back(f.analytic("multi_step", "irreducible", floor, tag));
          out.push_back(f.analytic("multi_step", "prop1_rate", theory::prop1_multistep_rate(model, sys), tag));
          out.push_back(f.analytic("single_step", "prop2_rate", theory::prop2_singlestep_rate(model, sys), tag));
        } else {
          out.push_back(f.analytic("multi_step", "bias", floor, tag));
          out.push_back(f.analytic("single_step", "bias", theory::prop4_singlestep_bias(model, sys), tag));
        }
        for (std::size_t n : cfg.n_grid) {
          auto res = monte_carlo(cfg, 6, [&](std::uint64_t r) -> Outcome {
            const Trajectory traj = simulate(model, n, train_seed(cfg, r));
            auto multi = guarded([&] { return loss_of(cfg, fit_multi_step(traj, h, cfg.ridge), model, sys, r); });
            auto init = guarded([&] { return fit_single_step(traj, cfg.ridge); });
            std::optional<double> single, gd;
            if (init) {
              single = loss_of(cfg, compose_rollout(init->g_y, init->g_u, h), model, sys, r);
              gd = guarded([&] {
                const GdOptions opts{cfg.gd.step, cfg.gd.iterations, false};
                return loss_of(cfg, fit_structured_gd(traj, h, *init, opts).predictor, model, sys, r);
              });
            }
            Outcome o{multi, single, gd, {}, {}, {}};
            for (std::size_t s = 0; s < 3; ++s)
              if (o[s]) o[s + 3] = *o[s] - floor;
            return o;
          });
          const std::string notes = tag + eval_note(cfg) + ";" + gd_note.str();
          const char* names[] = {"multi_step", "single_step", "structured_gd"};
          for (std::size_t s = 0; s < 3; ++s) {
            out.push_back(f.cell(n, names[s], "loss", res[s], notes));
            out.push_back(f.cell(n, names[s], "excess_loss", res[s + 3], notes));
          }
        }
      }
    }
  }
  return out;
}

std::vector<SweepRecord> run_fig5(const ExperimentConfig& cfg) {
  std::vector<SweepRecord> out;
  std::vector<Regime> regimes = cfg.regimes;
  if (cfg.model) regimes = {cfg.model->well_specified() ? Regime::Well : Regime::Mis};
  const int hp = cfg.mpc.predictor_horizon;
  const MpcOptions mpc{cfg.mpc.horizon, cfg.mpc.terminal};
  std::ostringstream mpc_note;
  mpc_note << "mpc_horizon=" << cfg.mpc.horizon << ";predictor_horizon=" << hp
           << ";terminal=" << (cfg.mpc.terminal == TerminalMode::Error ? "error" : "min_norm");

  for (Regime regime : regimes) {
    const bool well = regime == Regime::Well;
    std::string tag = well ? "regime=well;" : "regime=mis;";
    std::vector<std::pair<double, LtiModel>> models;
    if (cfg.model) {
      models.emplace_back(std::numeric_limits<double>::quiet_NaN(), *cfg.model);
    } else {
      for (double a : cfg.a_grid) {
        LtiModel m = eq10_system(a, well);
        if (!well) m = m.with_input(cfg.control_b);
        models.emplace_back(a, std::move(m));
      }
      if (!well) {
        // The misspecified system has no input of its own; record the one used.
        tag += "control_B=";
        for (std::size_t i = 0; i < cfg.control_b.rows(); ++i)
          for (std::size_t j = 0; j < cfg.control_b.cols(); ++j)
            tag += (i + j ? "|" : "") + format_double(cfg.control_b(i, j));
        tag += ";";
      }
    }
    for (const auto& [a, model] : models) {
      const SystemAnalysis sys = analyze(model, hp);
      RecordFactory f{cfg, a, cfg.mpc.horizon};
      const std::string ref_notes = tag + mpc_note.str();
      auto reference = [&](const std::string& name, const Predictor& p) {
        auto m = guarded([&] { return closed_loop_metrics(model, synthesize_mpc(p, mpc)); });
        const double nan = std::numeric_limits<double>::quiet_NaN();
        const std::string notes = m ? ref_notes : ref_notes + ";synthesis_failed";
        out.push_back(f.analytic(name, "lqr_cost", m ? m->lqr_cost : nan, notes));
        out.push_back(f.analytic(name, "rho_cl", m ? m->rho_cl : nan, notes));
      };
      if (well) {
        Predictor exact;
        exact.structure = Structure::DirectMultiStep;
        exact.horizon = hp;
        exact.dy = model.dy();
        exact.du = model.du();
        exact.g = sys.ops.g_star;
        reference("exact", exact);
      }
      reference("multi_step_limit",
                theory::population_predictor(model, sys, Structure::DirectMultiStep));
      reference("single_step_limit",
                theory::population_predictor(model, sys, Structure::SingleStepRollout));

      for (std::size_t n : cfg.n_grid) {
        auto res = monte_carlo(cfg, 8, [&](std::uint64_t r) -> Outcome {
          const Trajectory traj = simulate(model, n, train_seed(cfg, r));
          Outcome o(8);
          auto eval = [&](const std::optional<Predictor>& p, std::size_t base) {
            if (!p) return;
            auto m = guarded([&] { return closed_loop_metrics(model, synthesize_mpc(*p, mpc)); });
            if (!m) return;
            o[base] = m->lqr_cost;
            if (m->stable) o[base + 1] = m->lqr_cost;
            o[base + 2] = m->rho_cl;
            o[base + 3] = m->stable ? 0.0 : 1.0;
          };
          eval(guarded([&] { return single_step_predictor(traj, hp, cfg.ridge); }), 0);
          eval(guarded([&] { return fit_multi_step(traj, hp, cfg.ridge); }), 4);
          return o;
        });
        const std::string notes = tag + mpc_note.str();
        const char* names[] = {"single_step", "multi_step"};
        for (std::size_t p = 0; p < 2; ++p) {
          const std::size_t b = 4 * p;
          out.push_back(f.cell(n, names[p], "lqr_cost", res[b], notes));
          out.push_back(f.cell(n, names[p], "lqr_cost_stable", res[b + 1],
                               notes + ";excluded_unstable_or_dropped"));
          out.push_back(f.cell(n, names[p], "rho_cl", res[b + 2], notes));
          out.push_back(f.cell(n, names[p], "unstable_fraction", res[b + 3], notes));
        }
      }
    }
  }
  return out;
}

std::vector<SweepRecord> run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  switch (cfg.experiment) {
    case Experiment::Fig1: return run_fig1(cfg);
    case Experiment::Fig2: return run_fig2(cfg);
    case Experiment::Fig3: return run_fig3(cfg);
    case Experiment::Fig4: return run_fig4(cfg);
    case Experiment::Fig5: return run_fig5(cfg);
  }
  return {};
}

}  // namespace phl
