// Runs each acceptance criterion at its stated scale and prints one
// PASS/FAIL line per criterion. Exits nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "phl/config.hpp"
#include "phl/harness.hpp"
#include "phl/numerics.hpp"
#include "phl/predictors.hpp"
#include "phl/theory.hpp"
#include "support.hpp"

using namespace phl;
using phl::testing::random_matrix;
using phl::testing::random_stable;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [x]");
  }
};

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double rel(double got, double want) { return std::abs(got - want) / std::abs(want); }

const SweepRecord& row(const std::vector<SweepRecord>& rows, const std::string& predictor,
                       const std::string& metric, std::optional<std::size_t> n, int h = 0,
                       double a = std::nan("")) {
  for (const auto& r : rows) {
    if (r.predictor != predictor || r.metric != metric || r.n != n) continue;
    if (h && r.horizon != h) continue;
    if (!std::isnan(a) && std::abs(r.a - a) > 1e-12) continue;
    return r;
  }
  throw std::runtime_error("missing row " + predictor + "/" + metric);
}

// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= x.size();
  my /= y.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

Outcome example1_golden() {
  Outcome o;
  const LtiModel m = example1_system();
  const double rho = theory::lemma1_check(m, covariances(m, 1));
  const double rho_a = numerics::spectral_radius(m.a());
  o.require(std::abs(rho - 0.99) <= 0.005, fmt("rho(CA Sx C' Sy^-1) = %.5f", rho));
  o.require(std::abs(rho_a - 0.9) <= 1e-8 * 0.9, fmt("rho(A) = %.12g", rho_a));
  return o;
}

Outcome lemma1_property() {
  Outcome o;
  std::mt19937_64 gen(1001);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const LtiModel m = phl::testing::random_misspecified(gen);
    worst = std::max(worst, theory::lemma1_check(m, covariances(m, 1)));
  }
  o.require(worst <= 1.0 + 1e-9, fmt("max rho over 200 systems = %.9f", worst));
  return o;
}

Outcome fig2_rates() {
  Outcome o;
  ExperimentConfig c = default_config(Experiment::Fig2);
  c.n_grid = {3000};
  c.reps = 2000;
  const auto rows = run_experiment(c);
  for (double a : c.a_grid) {
    const double p1 = row(rows, "multi_step", "prop1_rate", {}, 5, a).mean;
    const double p2 = row(rows, "single_step", "prop2_rate", {}, 5, a).mean;
    const double ms = row(rows, "multi_step", "scaled_excess_loss", 3000, 5, a).mean;
    const double ss = row(rows, "single_step", "scaled_excess_loss", 3000, 5, a).mean;
    o.require(rel(ms, p1) <= 0.10, fmt("a=%.2f multi %.1f vs %.1f", a, ms, p1));
    o.require(rel(ss, p2) <= 0.10, fmt("single %.1f vs %.1f", ss, p2));
    o.require(p2 <= p1, "prop2 <= prop1");
  }
  return o;
}

Outcome scalar_closed_forms() {
  Outcome o;
  double worst = 0.0;
  const int h = 6;
  for (double a : {0.1, 0.5, 0.9, 0.99}) {
    const LtiModel m(Matrix::from_rows({{a}}), Matrix(1, 0), Matrix::identity(1),
                     Matrix::identity(1), Matrix(1, 1));
    const Matrix ms = theory::m_ms(m, h);
    const Matrix ss = theory::m_ss(m, covariances(m, h), h);
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < h; ++j) {
        worst = std::max(worst, std::abs(ms(i, j) - std::pow(a, std::abs(i - j))));
        worst = std::max(worst, std::abs(ss(i, j) - std::pow(a, i + j)));
      }
  }
  o.require(worst <= 1e-12, fmt("max abs error %.2e", worst));
  return o;
}

Outcome psd_gap() {
  Outcome o;
  std::mt19937_64 gen(1002);
  double lo = INFINITY;
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t dx = 1 + rep % 4;
    const int h = 1 + rep % 8;
    const LtiModel m(random_stable(gen, dx, 0.95), Matrix(dx, 0), random_matrix(gen, dx, 1 + rep % 2),
                     Matrix::identity(dx), Matrix(dx, dx));
    const auto g = theory::gap_matrices(m, covariances(m, h), h);
    lo = std::min(lo, numerics::symmetric_eigen(g.gap).values.front());
  }
  o.require(lo >= -1e-10, fmt("min eigenvalue %.3e", lo));
  return o;
}

Outcome fig3_biases() {
  Outcome o;
  ExperimentConfig c = default_config(Experiment::Fig3);
  c.a_grid = {0.9};
  c.n_grid = {3000};
  c.reps = 1000;
  const auto rows = run_experiment(c);
  const double b3 = row(rows, "multi_step", "bias", {}).mean;
  const double b4 = row(rows, "single_step", "bias", {}).mean;
  const double ms = row(rows, "multi_step", "loss", 3000).mean;
  const double ss = row(rows, "single_step", "loss", 3000).mean;
  o.require(rel(ms, b3) <= 0.05, fmt("multi %.3f vs %.3f", ms, b3));
  o.require(rel(ss, b4) <= 0.05, fmt("single %.3f vs %.3f", ss, b4));
  o.require(b4 > b3, "prop4 > prop3");
  return o;
}

Outcome bias_minimizer() {
  Outcome o;
  std::mt19937_64 gen(1003);
  double worst = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const LtiModel m = phl::testing::random_misspecified(gen);
    const int h = 1 + rep % 5;
    const SystemAnalysis sys = analyze(m, h);
    const double b3 = theory::prop3_multistep_bias(m, sys);
    const double num = phl::testing::numeric_quadratic_min(
        [&](const Matrix& off) { return theory::bias_objective(m, sys, off); }, h * m.dy(), m.dy());
    worst = std::max(worst, std::abs(b3 - num) / std::max(1.0, std::abs(b3)));
  }
  o.require(worst <= 1e-8, fmt("max relative gap %.2e", worst));
  return o;
}

Outcome rate_oracles() {
  Outcome o;
  ExperimentConfig c = default_config(Experiment::Fig3);
  c.model = LtiModel(Matrix::from_rows({{0.8}}), Matrix(1, 0), Matrix::identity(1),
                     Matrix::identity(1), Matrix::identity(1));
  c.horizon_grid = {2, 3};
  c.n_grid = {3000};
  c.reps = 2000;
  const auto rows = run_experiment(c);
  for (int h : c.horizon_grid) {
    const double p3 = row(rows, "multi_step", "reducible_rate", {}, h).mean;
    const double th = row(rows, "single_step", "reducible_rate", {}, h).mean;
    const SweepRecord& ms = row(rows, "multi_step", "scaled_excess_loss", 3000, h);
    const SweepRecord& ss = row(rows, "single_step", "scaled_excess_loss", 3000, h);
    o.require(rel(ms.mean, p3) <= 0.15,
              fmt("H=%d multi %.3f+-%.3f vs %.3f", h, ms.mean, ms.stderr_, p3));
    o.require(rel(ss.mean, th) <= 0.20,
              fmt("single %.3f+-%.3f vs %.3f", ss.mean, ss.stderr_, th));
  }
  return o;
}

Outcome gradient_check() {
  Outcome o;
  std::mt19937_64 gen(1004);
  const int h = 4;
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    const LtiModel m(random_stable(gen, 2, 0.8), random_matrix(gen, 2, 1), Matrix::identity(2),
                     Matrix::identity(2), Matrix(2, 2));
    const RegressionMoments mom = regression_moments(simulate(m, 300, 500 + rep), h);
    const Matrix gy = random_matrix(gen, 2, 2) * 0.4;
    const Matrix gu = random_matrix(gen, 2, 1);
    const LossGradient lg = structured_loss_gradient(mom, gy, gu);
    const double eps = 1e-5;
    for (int which = 0; which < 2; ++which) {
      const Matrix& base = which == 0 ? gy : gu;
      const Matrix& grad = which == 0 ? lg.grad_gy : lg.grad_gu;
      for (std::size_t k = 0; k < base.data().size(); ++k) {
        Matrix p = base, q = base;
        p.data()[k] += eps;
        q.data()[k] -= eps;
        const double fp = which == 0 ? structured_loss_gradient(mom, p, gu).loss
                                     : structured_loss_gradient(mom, gy, p).loss;
        const double fq = which == 0 ? structured_loss_gradient(mom, q, gu).loss
                                     : structured_loss_gradient(mom, gy, q).loss;
        const double fd = (fp - fq) / (2.0 * eps);
        worst = std::max(worst, std::abs(grad.data()[k] - fd) / std::max(1.0, std::abs(fd)));
      }
    }
  }
  o.require(worst <= 1e-5, fmt("max relative error %.2e", worst));
  return o;
}

Outcome fig4_shape() {
  Outcome o;
  const ExperimentConfig c = default_config(Experiment::Fig4);
  const auto rows = run_experiment(c);
  auto find = [&](const std::string& pred, const std::string& metric, std::size_t n,
                  const char* regime) -> const SweepRecord& {
    for (const auto& r : rows) {
      if (r.predictor == pred && r.metric == metric && r.n == n &&
          r.notes.find(regime) != std::string::npos)
        return r;
    }
    throw std::runtime_error("missing fig4 row");
  };
  std::vector<double> ns, gd, ss;
  for (std::size_t n : c.n_grid) {
    ns.push_back(static_cast<double>(n));
    gd.push_back(find("structured_gd", "excess_loss", n, "regime=well").mean);
    ss.push_back(find("single_step", "excess_loss", n, "regime=well").mean);
  }
  const double s_gd = loglog_slope(ns, gd), s_ss = loglog_slope(ns, ss);
  o.require(std::abs(s_gd / s_ss - 1.0) <= 0.20,
            fmt("well slopes gd %.3f single %.3f", s_gd, s_ss));

  const std::size_t last = c.n_grid.back();
  const double gm = find("structured_gd", "loss", last, "regime=mis").mean;
  const double mm = find("multi_step", "loss", last, "regime=mis").mean;
  const double sm = find("single_step", "loss", last, "regime=mis").mean;
  o.require(gm >= mm && gm <= 1.10 * mm && gm < sm,
            fmt("mis plateau gd %.2f multi %.2f single %.2f", gm, mm, sm));
  return o;
}

Outcome fig5_shape() {
  Outcome o;
  const ExperimentConfig c = default_config(Experiment::Fig5);
  const auto rows = run_experiment(c);
  auto find = [&](const std::string& pred, const std::string& metric, std::optional<std::size_t> n,
                  const char* regime) -> const SweepRecord& {
    for (const auto& r : rows) {
      if (r.predictor == pred && r.metric == metric && r.n == n &&
          r.notes.find(regime) != std::string::npos)
        return r;
    }
    throw std::runtime_error("missing fig5 row");
  };
  const std::size_t first = c.n_grid.front(), last = c.n_grid.back();
  const double exact = find("exact", "lqr_cost", {}, "regime=well").mean;
  const double s0 = find("single_step", "lqr_cost", first, "regime=well").mean;
  const double m0 = find("multi_step", "lqr_cost", first, "regime=well").mean;
  const double s1 = find("single_step", "lqr_cost", last, "regime=well").mean;
  const double m1 = find("multi_step", "lqr_cost", last, "regime=well").mean;
  o.require(s0 <= m0, fmt("N=%zu single %.3f <= multi %.3f", first, s0, m0));
  o.require(rel(s1, exact) <= 0.05 && rel(m1, exact) <= 0.05,
            fmt("N=%zu single %.4f multi %.4f exact %.4f", last, s1, m1, exact));

  double s_max = 0.0, m_max = 0.0;
  for (std::size_t n : c.n_grid) {
    s_max = std::max(s_max, find("single_step", "rho_cl", n, "regime=mis").mean);
    m_max = std::max(m_max, find("multi_step", "rho_cl", n, "regime=mis").mean);
  }
  o.require(s_max > 1.0, fmt("mis max mean rho single %.3f", s_max));
  o.require(m_max < 1.0, fmt("multi %.3f", m_max));
  return o;
}

Outcome h1_collapse() {
  Outcome o;
  std::mt19937_64 gen(1005);
  int equal = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const LtiModel m(random_stable(gen, 2, 0.8), random_matrix(gen, 2, 1), Matrix::identity(2),
                     Matrix::identity(2), Matrix(2, 2));
    const Trajectory t = simulate(m, 60 + 7 * rep, 600 + rep);
    const SingleStepFit s = fit_single_step(t);
    equal += fit_multi_step(t, 1).g == hstack({s.g_y, s.g_u});
  }
  o.require(equal == 20, fmt("%d/20 bit-identical", equal));
  return o;
}

Outcome rollout_identity() {
  Outcome o;
  std::mt19937_64 gen(1006);
  std::normal_distribution<double> nd;
  const std::size_t dy = 2, du = 1;
  const int h = 8;
  const Matrix gy = random_matrix(gen, dy, dy) * 0.5;
  const Matrix gu = random_matrix(gen, dy, du);
  const Predictor p = compose_rollout(gy, gu, h);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> y(dy), u(h * du);
    for (double& v : y) v = nd(gen);
    for (double& v : u) v = nd(gen);
    const auto a = predict(p, y, u);
    const auto b = rollout_recursive(gy, gu, y, u, h);
    for (std::size_t i = 0; i < a.size(); ++i)
      worst = std::max(worst, std::abs(a[i] - b[i]) / (1.0 + std::abs(b[i])));
  }
  o.require(worst <= 1e-10, fmt("max error %.2e", worst));
  return o;
}

struct Criterion {
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> all = {
      {"example1_golden", 1, example1_golden},
      {"lemma1_property", 10, lemma1_property},
      {"fig2_rate_convergence", 600, fig2_rates},
      {"scalar_closed_forms", 1, scalar_closed_forms},
      {"psd_gap", 10, psd_gap},
      {"fig3_bias_convergence", 600, fig3_biases},
      {"bias_minimizer_identity", 5, bias_minimizer},
      {"rate_oracles", 600, rate_oracles},
      {"gradient_check", 10, gradient_check},
      {"fig4_shape", 1200, fig4_shape},
      {"fig5_shape", 1200, fig5_shape},
      {"h1_collapse", 1, h1_collapse},
      {"rollout_identity", 1, rollout_identity},
  };
  int failures = 0;
  for (const Criterion& c : all) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("error: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > c.budget_s) o.require(false, fmt("over time budget %.0f s", c.budget_s));
    failures += !o.pass;
    std::printf("%s %-24s %7.2fs  %s\n", o.pass ? "PASS" : "FAIL", c.name, secs, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, all.size());
  return failures == 0 ? 0 : 1;
}
