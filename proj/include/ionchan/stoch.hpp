#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ionchan/det_solvers.hpp"
#include "ionchan/model.hpp"
#include "ionchan/rng.hpp"

namespace ionchan {

/// Per-site bounds on the total exit rate of each channel type and the
/// resulting global candidate rate Lambda = n * slots * sum_i lambda_i.
struct RateBound {
  std::vector<double> per_type;  // lambda_i
  double lambda_local = 0.0;     // sum_i lambda_i
  double Lambda = 0.0;
  int slots = 1;
};

/// Uses the model's declared bounds where present; otherwise (1 + margin) times
/// the largest total exit rate over a 1025-point grid of the declared range.
RateBound rate_bound(const ChannelModel& model, int n_sites, double margin = 0.1);

enum class Algorithm { Pet, Il, Oracle };
const char* algorithm_name(Algorithm a);
Algorithm parse_algorithm(const std::string& name);

/// How PET obtains the voltage at a candidate time.
///  Exact: integrate the whole lattice up to every candidate time.
///  Dense: integrate on a grid of dt_max and read candidate voltages from the
///         cubic Hermite interpolant of each substep; integration restarts at
///         every accepted event.
enum class VoltageEval { Exact, Dense };

struct SimOptions {
  double dt_max = 1e-2;     // PET/IL substep bound
  double tau = 1.0 / 8.0;   // IL macro-step
  double dt = 1e-4;         // oracle step
  double dt_record = 0.0;   // record grid; 0 means T/512
  double margin = 0.1;
  VoltageEval voltage = VoltageEval::Dense;
};

struct Event {
  double t;
  int k;
  int i;
  int from;
  int to;
  friend bool operator==(const Event&, const Event&) = default;
};

/// Receives the recorded states: the record grid plus the state after every
/// event (PET, oracle) or after every leap that changed occupancy (IL).
class TrajectoryObserver {
 public:
  virtual ~TrajectoryObserver() = default;
  virtual void on_record(const SystemState& state) = 0;
  virtual void on_event(const Event&) {}
};

struct SimStats {
  std::int64_t candidates = 0;
  std::int64_t events = 0;
  std::int64_t steps = 0;
  RateBound bound;
};

/// Stored snapshots and events.
struct Trajectory {
  int n = 0;
  int types = 0;
  int configs = 0;
  std::vector<double> times;
  std::vector<double> V;  // rows of n
  std::vector<int> occ;   // rows of n*I; empty when occupancy was not kept
  std::vector<Event> events;

  std::size_t rows() const noexcept { return times.size(); }
  std::span<const double> voltage(std::size_t row) const {
    return {V.data() + row * n, static_cast<std::size_t>(n)};
  }
  /// Linear interpolation of V between snapshots (V is continuous in time).
  void voltage_at(double t, std::span<double> out) const;

  void write_csv(std::ostream& os) const;         // t,k,V
  void write_events_csv(std::ostream& os) const;  // t,k,i,from,to (one-based i, from, to)
  void write_binary(std::ostream& os) const;
  static Trajectory read_binary(std::istream& is);

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Observer that stores everything into a Trajectory.
class Recorder : public TrajectoryObserver {
 public:
  explicit Recorder(bool keep_occupancy = true) : keep_occ_(keep_occupancy) {}
  void on_record(const SystemState& state) override;
  void on_event(const Event& e) override { traj_.events.push_back(e); }
  Trajectory& trajectory() noexcept { return traj_; }

 private:
  Trajectory traj_;
  bool keep_occ_;
};

/// Algorithm I. `state` is advanced to T in place.
SimStats pet_simulate(const CircleLattice& lattice, const ChannelModel& model, SystemState& state,
                      double T, Rng& rng, const SimOptions& options, TrajectoryObserver& observer);
/// Algorithm II.
SimStats il_simulate(const CircleLattice& lattice, const ChannelModel& model, SystemState& state,
                     double T, Rng& rng, const SimOptions& options, TrajectoryObserver& observer);
/// Fixed-step Euler-jump reference scheme.
SimStats oracle_simulate(const CircleLattice& lattice, const ChannelModel& model, SystemState& state,
                         double T, Rng& rng, const SimOptions& options, TrajectoryObserver& observer);

SimStats simulate(Algorithm algorithm, const CircleLattice& lattice, const ChannelModel& model,
                  SystemState& state, double T, Rng& rng, const SimOptions& options,
                  TrajectoryObserver& observer);

/// Convenience forms returning the recorded trajectory.
Trajectory pet_simulate(const CircleLattice& lattice, const ChannelModel& model, SystemState state,
                        double T, double dt_max, std::uint64_t seed);
Trajectory il_simulate(const CircleLattice& lattice, const ChannelModel& model, SystemState state,
                       double T, double tau, std::uint64_t seed);
Trajectory oracle_simulate(const CircleLattice& lattice, const ChannelModel& model, SystemState state,
                           double T, double dt, std::uint64_t seed);

}  // namespace ionchan
