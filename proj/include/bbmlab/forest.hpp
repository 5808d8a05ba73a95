#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "bbmlab/branching_law.hpp"
#include "bbmlab/point_measure.hpp"

namespace bbm {

// Simulation configuration for one replica.
//
// Checkpoints are the only times at which positions are recorded; everything
// between consecutive events is advanced by a single exact Gaussian
// increment, so there is no discretization error anywhere in the particle
// system.  The grid must be strictly increasing, lie in (start_time, horizon]
// and end exactly at the horizon; start_time itself is always recorded as an
// implicit extra checkpoint.
struct SimConfig {
  std::uint64_t seed = 0;
  std::uint64_t replica = 0;

  double start_time = 0.0;
  double horizon = 1.0;
  std::vector<double> checkpoints;

  BranchingLaw law = BranchingLaw::binary();

  // Pruning: at any checkpoint at time >= prune_after, a particle more than
  // prune_gap below the running front is frozen: it keeps its recorded
  // history but neither moves nor branches again.  prune_gap 0 disables
  // pruning entirely; enabled values below 8 are rejected because the bias
  // on front statistics becomes visible.
  double prune_gap = 0.0;
  double prune_after = 0.0;

  std::uint64_t max_nodes = 10'000'000;

  void validate() const;  // throws ConfigError

  // Uniform grid start+dt, start+2dt, ..., horizon.  dt must divide the span.
  static std::vector<double> uniform_checkpoints(double horizon, double dt,
                                                 double start = 0.0);
};

enum class EndReason : std::uint8_t { kBranch, kHorizon, kPruned };

struct ForestNode {
  static constexpr std::uint32_t kNoParent = std::numeric_limits<std::uint32_t>::max();

  std::uint32_t parent = kNoParent;
  EndReason reason = EndReason::kHorizon;
  double birth = 0.0;      // birth time (parent's branch time)
  double end = 0.0;        // branch time, prune time, or horizon
  double birth_pos = 0.0;  // position inherited from the parent at birth
  std::uint64_t stream = 0;  // RNG stream key; stable under pruning changes
  std::uint64_t pos_offset = 0;
  std::int32_t first_ck = -1;  // checkpoint index of the first recorded position
  std::int32_t n_ck = 0;
};

// Starting particle for a continuation run (regrowing a frozen state).
struct InitialParticle {
  double position = 0.0;
  std::uint64_t stream = 0;
};

// Full genealogy of one replica: an arena of particle segments plus the flat
// array of checkpointed positions.  Built by simulate(), immutable afterwards.
class GenealogyForest {
 public:
  const SimConfig& config() const { return config_; }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<ForestNode>& nodes() const { return nodes_; }
  const ForestNode& node(std::uint32_t v) const;

  // Checkpoint grid including the implicit leading start_time entry.
  const std::vector<double>& checkpoint_times() const { return ck_times_; }

  // Index of the checkpoint at time t; LookupError when t is not on the grid.
  int checkpoint_index(double t) const;

  // A node occupies [birth, end]; it is alive at checkpoint time t when
  // birth <= t and either t < end or t == end without a branch (a particle
  // at the horizon, or at its prune time, still counts; a parent at its
  // branch time has already been replaced by its children).
  bool alive(std::uint32_t v, int ck) const;
  std::vector<std::uint32_t> alive_at(int ck) const;
  std::size_t n_alive(int ck) const;

  // Absolute particle positions at checkpoint time t, one atom per alive node.
  PointMeasure alive_positions(double t) const;

  // Recorded position of node v itself at checkpoint ck.
  double position(std::uint32_t v, int ck) const;

  // Position of v's ancestral line at checkpoint ck (v's own segment or the
  // ancestor segment covering that time).
  double lineage_position(std::uint32_t v, int ck) const;

  // The ancestor node whose segment contains time s.
  std::uint32_t ancestor_at(std::uint32_t v, double s) const;

  // Time up to which the ancestral paths of v (alive at t) and w (alive at
  // t2 >= t) coincide: t itself when one is an ancestor of the other, the
  // most recent common ancestor's branch time otherwise.
  double branching_time(std::uint32_t v, double t, std::uint32_t w, double t2) const;

  // Max recorded position at a checkpoint (the running front); -inf if the
  // checkpoint has no recorded particle (cannot happen for a completed run).
  double checkpoint_max(int ck) const { return ck_max_[static_cast<std::size_t>(ck)]; }

  std::uint64_t pruned_count() const { return pruned_total_; }
  // True when any particle was pruned at a checkpoint <= ck, i.e. the state
  // at ck is no longer exact.
  bool pruned_before(int ck) const;

  const std::vector<double>& positions_flat() const { return pos_; }

  // Rebuild a forest from serialized parts.  Derived tables (front curve,
  // prune counters) are recomputed; shape violations throw ConfigError.
  static GenealogyForest restore(SimConfig config, std::vector<ForestNode> nodes,
                                 std::vector<double> pos);

 private:
  friend GenealogyForest simulate(const SimConfig&);
  friend GenealogyForest simulate_from(const SimConfig&, const std::vector<InitialParticle>&);
  friend class ForestBuilder;

  SimConfig config_;
  std::vector<double> ck_times_;
  std::vector<ForestNode> nodes_;
  std::vector<double> pos_;
  std::vector<double> ck_max_;
  std::vector<std::uint32_t> pruned_at_ck_;
  std::uint64_t pruned_total_ = 0;
};

// Run one replica from a single particle at the origin.
GenealogyForest simulate(const SimConfig& config);

// Run one replica from the given particles (config.start_time is their common
// birth time); used to regrow a frozen state under fresh randomness.
GenealogyForest simulate_from(const SimConfig& config,
                              const std::vector<InitialParticle>& initial);

}  // namespace bbm
