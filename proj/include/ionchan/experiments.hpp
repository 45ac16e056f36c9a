#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ionchan/det_solvers.hpp"
#include "ionchan/stats.hpp"
#include "ionchan/stoch.hpp"

namespace ionchan {

/// sup over the union of both time grids of max_k |V - U|, with each side
/// linearly interpolated between its own rows.
double sup_error(const Trajectory& stoch, const MeanFieldTrajectory& det, double T);

/// Streaming form of sup_error: sees the same time points without storing
/// the stochastic path. Optionally tracks sup max |Zbar - S| for window N.
class SupErrorObserver : public TrajectoryObserver {
 public:
  SupErrorObserver(const MeanFieldTrajectory& det, double T, const CircleLattice* lattice = nullptr,
                   int window = 0);
  void on_record(const SystemState& state) override;
  double error() const noexcept { return error_; }
  double zbar_error() const noexcept { return zbar_error_; }

 private:
  void compare(double t, std::span<const double> v);

  const MeanFieldTrajectory& det_;
  double T_;
  const CircleLattice* lattice_;
  int window_;
  std::size_t next_row_ = 0;  // first det row not yet compared
  bool started_ = false;
  double t_prev_ = 0.0;
  std::vector<double> v_prev_, v_tmp_, u_tmp_, s_tmp_;
  double error_ = 0.0;
  double zbar_error_ = 0.0;
};

/// Builds the model and initial data for a given lattice (the toy bump is
/// centered using the lattice).
using ModelFactory = std::function<ModelSpec(const CircleLattice&)>;

struct ExperimentRecord {
  std::string run_id;
  Algorithm algorithm = Algorithm::Pet;
  int n = 0;  // compartments
  double h = 0.0;
  double p = -1.0;  // negative when the Zbar channel is off
  std::uint64_t seed = 0;
  double T = 0.0;
  double error_V = 0.0;
  std::optional<double> error_Zbar;
  double wall_time = 0.0;
  std::int64_t events = 0;
  bool failed = false;
  std::string message;
};

struct ConvergenceConfig {
  ModelFactory factory;
  std::vector<int> inverse_spacings;  // h = 1 / value
  double L = 16.0;
  double D = 1.0;
  double T = 15.0;
  int samples = 10;
  Algorithm algorithm = Algorithm::Pet;
  SimOptions sim;
  double mf_dt = 1e-3;
  std::optional<double> p;  // enables the Zbar error channel
  std::uint64_t seed = 1;
  int workers = 1;
  std::vector<ExperimentRecord> existing;  // rows with these run ids are not recomputed
  std::function<void(const ExperimentRecord&)> progress;
};

/// Seed of one (inverse spacing, sample) cell, derived from the master seed.
std::uint64_t run_seed(std::uint64_t master, int inverse_spacing, int sample);
std::string run_id(int inverse_spacing, int sample);

/// Rows in (h, sample) order. Failed simulations are recorded, not thrown.
std::vector<ExperimentRecord> convergence_study(const ConvergenceConfig& config);

void write_records_csv(std::ostream& os, const std::vector<ExperimentRecord>& rows);
std::vector<ExperimentRecord> read_records_csv(std::istream& is);

/// Per-h mean of the successful rows, as (h, mean error) points.
std::vector<std::pair<double, double>> mean_error_points(const std::vector<ExperimentRecord>& rows);

/// columns[c] holds the stored error samples for h = hs[c]. Each draw picks one
/// sample per column independently and fits the log-log slope.
std::vector<double> swap_histogram(const std::vector<std::vector<double>>& columns, const std::vector<double>& hs,
                                   int draws, std::uint64_t seed);

struct AlgoErrorConfig {
  ModelFactory factory;
  double h = 0.25;
  double L = 16.0;
  double D = 1.0;
  double T = 15.0;
  int samples = 100;
  Algorithm first = Algorithm::Pet;
  Algorithm second = Algorithm::Il;
  SimOptions sim;  // sim.tau is the IL step
  int bootstrap = 200;
  std::uint64_t seed = 1;
  int workers = 1;
};

struct AlgoErrorEstimate {
  double estimate = 0.0;
  double se = 0.0;
  int site = 0;
  std::vector<double> times;
  std::vector<double> mean_first, mean_second;
  int failed = 0;
};

/// sup_t |E V_first(t) - E V_second(t)| at the compartment nearest L/2,
/// with a bootstrap standard error.
AlgoErrorEstimate algorithmic_error(const AlgoErrorConfig& config);

enum class ClockKind { Identity, Random, Zero };

struct PoissonWindow {
  int n = 0;
  double threshold = 0.0;  // 6 gamma sqrt(n) log n
  int exceedances = 0;
  double max_sup = 0.0;
  MeanSe final_sum;  // compensated sum at T
};

struct PoissonLlnReport {
  double gamma = 0.0;
  double growth = 0.0;  // fitted exponent a in n_i ~ i^a
  bool admissible = true;
  int trials = 0;
  std::vector<PoissonWindow> windows;
};

/// Per window n_i: n_i unit-rate Poisson processes run through clocks
/// tau_k(t) <= tau_T; exact sup_{t <= T} |sum_k N_k(tau_k(t)) - tau_k(t)|.
PoissonLlnReport poisson_lln_check(double gamma, const std::vector<int>& windows, double T, int trials,
                                   std::uint64_t seed, double tau_T = 1.0, ClockKind clocks = ClockKind::Identity);

/// Runs body(index) for index in [0, count) on `workers` threads. Exceptions
/// are the body's responsibility.
void parallel_for(int count, int workers, const std::function<void(int)>& body);

}  // namespace ionchan
