#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "phl/config.hpp"

namespace phl {

/// One CSV row: a Monte Carlo cell (or an analytic reference when `n` is
/// empty) for one predictor and metric.
struct SweepRecord {
  std::string experiment;
  double a = std::numeric_limits<double>::quiet_NaN();  // NaN renders empty
  int horizon = 0;
  std::optional<std::size_t> n;
  std::string predictor;
  std::string metric;
  double mean = 0.0;
  double stderr_ = 0.0;
  int reps = 0;
  std::uint64_t seed = 0;
  std::string notes;
};

/// One-pass mean/variance (Welford). Infinite samples are kept apart so a
/// single unstable replication makes the mean +inf without poisoning the
/// variance arithmetic.
class RunningStats {
 public:
  void add(double x);
  std::size_t count() const { return n_ + inf_count_; }
  double mean() const;
  /// Standard error of the mean; 0 for fewer than two samples.
  double stderr_of_mean() const;

 private:
  std::size_t n_ = 0;
  std::size_t inf_count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

/// Effective worker count: PHL_THREADS when set, else `requested`, else the
/// hardware concurrency.
int resolve_threads(int requested);

/// Runs body(i) for i in [0, count) on `threads` workers. Exceptions are
/// rethrown on the caller after all workers stop.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body);

std::vector<SweepRecord> run_fig1(const ExperimentConfig& cfg);
std::vector<SweepRecord> run_fig2(const ExperimentConfig& cfg);
std::vector<SweepRecord> run_fig3(const ExperimentConfig& cfg);
std::vector<SweepRecord> run_fig4(const ExperimentConfig& cfg);
std::vector<SweepRecord> run_fig5(const ExperimentConfig& cfg);
std::vector<SweepRecord> run_experiment(const ExperimentConfig& cfg);

inline constexpr const char* kCsvHeader =
    "experiment,a,H,N,predictor,metric,mean,stderr,reps,seed,notes";

/// %.17g rendering; inf and nan spelled "inf", "-inf", "nan".
std::string format_double(double v);
void write_csv(std::ostream& out, const std::vector<SweepRecord>& records);

}  // namespace phl
