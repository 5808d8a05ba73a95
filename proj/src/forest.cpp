#include "bbmlab/forest.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bbmlab/errors.hpp"
#include "bbmlab/rng.hpp"

namespace bbm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

}  // namespace

void SimConfig::validate() const {
  if (!std::isfinite(horizon) || !(horizon > start_time)) {
    throw ConfigError("sim config: horizon must be finite and > start_time");
  }
  if (!std::isfinite(start_time)) throw ConfigError("sim config: start_time must be finite");
  if (checkpoints.empty()) throw ConfigError("sim config: checkpoint grid is empty");
  double prev = start_time;
  for (double t : checkpoints) {
    if (!std::isfinite(t) || !(t > prev)) {
      throw ConfigError("sim config: checkpoints must be strictly increasing and > start_time");
    }
    prev = t;
  }
  if (std::fabs(checkpoints.back() - horizon) > 1e-9 * std::max(1.0, std::fabs(horizon))) {
    throw ConfigError("sim config: last checkpoint (" + fmt(checkpoints.back()) +
                      ") must equal the horizon (" + fmt(horizon) + ")");
  }
  if (prune_gap != 0.0) {
    if (!(prune_gap >= 8.0)) {
      throw ConfigError("sim config: prune_gap must be 0 (disabled) or >= 8, got " +
                        fmt(prune_gap));
    }
    if (!std::isfinite(prune_after) || prune_after < 0.0) {
      throw ConfigError("sim config: prune_after must be finite and >= 0");
    }
  }
  if (max_nodes < 1) throw ConfigError("sim config: max_nodes must be >= 1");
}

std::vector<double> SimConfig::uniform_checkpoints(double horizon, double dt, double start) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("checkpoint grid: dt must be > 0");
  const double span = horizon - start;
  if (!(span > 0.0)) throw ConfigError("checkpoint grid: horizon must be > start");
  const double n_real = span / dt;
  const auto n = static_cast<std::size_t>(std::llround(n_real));
  if (n < 1 || std::fabs(n_real - static_cast<double>(n)) > 1e-9) {
    throw ConfigError("checkpoint grid: dt = " + fmt(dt) + " does not divide the span " +
                      fmt(span));
  }
  std::vector<double> ck(n);
  for (std::size_t i = 0; i + 1 < n; ++i) ck[i] = start + dt * static_cast<double>(i + 1);
  ck[n - 1] = horizon;
  return ck;
}

const ForestNode& GenealogyForest::node(std::uint32_t v) const {
  if (v >= nodes_.size()) {
    throw UsageError("forest: node id " + std::to_string(v) + " out of range (size " +
                     std::to_string(nodes_.size()) + ")");
  }
  return nodes_[v];
}

int GenealogyForest::checkpoint_index(double t) const {
  const double tol = 1e-12 * std::max(1.0, std::fabs(t));
  auto it = std::lower_bound(ck_times_.begin(), ck_times_.end(), t - tol);
  if (it == ck_times_.end() || std::fabs(*it - t) > tol) {
    throw LookupError("forest: t = " + fmt(t) + " is not a checkpoint time");
  }
  return static_cast<int>(it - ck_times_.begin());
}

namespace {

inline bool alive_node(const ForestNode& n, double t) {
  if (t < n.birth || t > n.end) return false;
  return t < n.end || n.reason != EndReason::kBranch;
}

}  // namespace

bool GenealogyForest::alive(std::uint32_t v, int ck) const {
  const ForestNode& n = node(v);
  if (ck < 0 || ck >= static_cast<int>(ck_times_.size())) {
    throw LookupError("forest: checkpoint index out of range");
  }
  return alive_node(n, ck_times_[static_cast<std::size_t>(ck)]);
}

std::vector<std::uint32_t> GenealogyForest::alive_at(int ck) const {
  if (ck < 0 || ck >= static_cast<int>(ck_times_.size())) {
    throw LookupError("forest: checkpoint index out of range");
  }
  const double t = ck_times_[static_cast<std::size_t>(ck)];
  std::vector<std::uint32_t> out;
  for (std::uint32_t v = 0; v < nodes_.size(); ++v) {
    if (alive_node(nodes_[v], t)) out.push_back(v);
  }
  return out;
}

std::size_t GenealogyForest::n_alive(int ck) const {
  if (ck < 0 || ck >= static_cast<int>(ck_times_.size())) {
    throw LookupError("forest: checkpoint index out of range");
  }
  const double t = ck_times_[static_cast<std::size_t>(ck)];
  std::size_t n = 0;
  for (const ForestNode& nd : nodes_) {
    if (alive_node(nd, t)) ++n;
  }
  return n;
}

PointMeasure GenealogyForest::alive_positions(double t) const {
  const int ck = checkpoint_index(t);
  const double tck = ck_times_[static_cast<std::size_t>(ck)];
  PointMeasure out;
  for (const ForestNode& nd : nodes_) {
    // an alive node's span always covers the checkpoint, index directly
    if (alive_node(nd, tck)) {
      out.atoms.push_back(pos_[nd.pos_offset + static_cast<std::size_t>(ck - nd.first_ck)]);
    }
  }
  return out;
}

double GenealogyForest::position(std::uint32_t v, int ck) const {
  const ForestNode& n = node(v);
  if (ck < n.first_ck || ck >= n.first_ck + n.n_ck) {
    throw LookupError("forest: node " + std::to_string(v) +
                      " has no recorded position at checkpoint index " + std::to_string(ck));
  }
  return pos_[n.pos_offset + static_cast<std::size_t>(ck - n.first_ck)];
}

double GenealogyForest::lineage_position(std::uint32_t v, int ck) const {
  const ForestNode* n = &node(v);
  if (ck < 0 || ck >= static_cast<int>(ck_times_.size())) {
    throw LookupError("forest: checkpoint index out of range");
  }
  if (ck_times_[static_cast<std::size_t>(ck)] > n->end) {
    throw LookupError("forest: checkpoint lies after the node's segment");
  }
  while (n->first_ck < 0 || ck < n->first_ck) {
    if (n->parent == ForestNode::kNoParent) {
      throw LookupError("forest: checkpoint precedes the root segment");
    }
    n = &nodes_[n->parent];
  }
  return pos_[n->pos_offset + static_cast<std::size_t>(ck - n->first_ck)];
}

std::uint32_t GenealogyForest::ancestor_at(std::uint32_t v, double s) const {
  const ForestNode* n = &node(v);
  if (s > n->end || s < config_.start_time) {
    throw DomainError("forest: s = " + fmt(s) + " outside [start, node end]");
  }
  std::uint32_t cur = v;
  while (nodes_[cur].birth > s) {
    cur = nodes_[cur].parent;  // root has birth == start_time <= s, so this stops
  }
  return cur;
}

double GenealogyForest::branching_time(std::uint32_t v, double t, std::uint32_t w,
                                       double t2) const {
  const int ck_t = checkpoint_index(t);
  const int ck_t2 = checkpoint_index(t2);
  if (t2 < t) throw DomainError("branching_time: t2 must be >= t");
  if (!alive(v, ck_t)) throw DomainError("branching_time: v is not alive at t");
  if (!alive(w, ck_t2)) throw DomainError("branching_time: w is not alive at t2");
  std::uint32_t a = v;
  std::uint32_t b = w;
  while (a != b) {
    // climb the later-born line; ties (siblings) climb a first
    if (nodes_[a].birth >= nodes_[b].birth) {
      if (nodes_[a].parent == ForestNode::kNoParent) {
        // distinct roots of a multi-root forest never met
        return config_.start_time;
      }
      a = nodes_[a].parent;
    } else {
      if (nodes_[b].parent == ForestNode::kNoParent) return config_.start_time;
      b = nodes_[b].parent;
    }
  }
  // paths coincide up to t itself when one segment contains the other's line
  if (a == v || a == w) return t;
  return nodes_[a].end;
}

bool GenealogyForest::pruned_before(int ck) const {
  if (ck < 0 || ck >= static_cast<int>(pruned_at_ck_.size())) {
    throw LookupError("forest: checkpoint index out of range");
  }
  for (int i = 0; i <= ck; ++i) {
    if (pruned_at_ck_[static_cast<std::size_t>(i)] > 0) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// simulation
// ---------------------------------------------------------------------------

class ForestBuilder {
 public:
  static GenealogyForest run(const SimConfig& config,
                             const std::vector<InitialParticle>& initial) {
    config.validate();
    if (initial.empty()) throw UsageError("simulate: no initial particles");

    GenealogyForest f;
    f.config_ = config;
    f.config_.checkpoints.back() = config.horizon;  // snap the checked tolerance away
    f.ck_times_.reserve(config.checkpoints.size() + 1);
    f.ck_times_.push_back(config.start_time);
    for (double t : f.config_.checkpoints) f.ck_times_.push_back(t);
    const std::size_t n_ck = f.ck_times_.size();
    f.ck_max_.assign(n_ck, -kInf);
    f.pruned_at_ck_.assign(n_ck, 0);

    for (const InitialParticle& p : initial) {
      ForestNode root;
      root.parent = ForestNode::kNoParent;
      root.birth = config.start_time;
      root.birth_pos = p.position;
      root.stream = p.stream;
      f.nodes_.push_back(root);
    }

    const bool prune_on = config.prune_gap > 0.0;
    const double horizon = config.horizon;

    // FIFO processing: children are appended while scanning, so index order
    // is creation order and the running front at each checkpoint only ever
    // lags the true front (pruning errs on the side of keeping particles).
    for (std::size_t i = 0; i < f.nodes_.size(); ++i) {
      ForestNode nd = f.nodes_[i];
      Rng rng(nd.stream);

      const double life = rng.exponential(1.0);
      double end = nd.birth + life;
      EndReason reason = EndReason::kBranch;
      if (end >= horizon) {
        end = horizon;
        reason = EndReason::kHorizon;
      }

      double x = nd.birth_pos;
      double tcur = nd.birth;
      nd.pos_offset = f.pos_.size();
      nd.first_ck = -1;
      nd.n_ck = 0;

      auto it = std::lower_bound(f.ck_times_.begin(), f.ck_times_.end(), nd.birth);
      for (std::size_t ck = static_cast<std::size_t>(it - f.ck_times_.begin());
           ck < n_ck && f.ck_times_[ck] <= end; ++ck) {
        const double tk = f.ck_times_[ck];
        if (tk > tcur) {
          x += rng.gaussian() * std::sqrt(tk - tcur);
          tcur = tk;
        }
        f.pos_.push_back(x);
        if (nd.first_ck < 0) nd.first_ck = static_cast<std::int32_t>(ck);
        ++nd.n_ck;
        if (f.ck_max_[ck] < x) f.ck_max_[ck] = x;
        if (prune_on && tk >= config.prune_after && x < f.ck_max_[ck] - config.prune_gap) {
          end = tk;
          reason = EndReason::kPruned;
          ++f.pruned_at_ck_[ck];
          ++f.pruned_total_;
          break;
        }
      }

      if (reason == EndReason::kBranch) {
        if (end > tcur) x += rng.gaussian() * std::sqrt(end - tcur);
        const std::size_t k = config.law.sample(rng);
        for (std::size_t slot = 1; slot <= k; ++slot) {
          if (f.nodes_.size() >= config.max_nodes) {
            throw ResourceError("simulate: node cap " + std::to_string(config.max_nodes) +
                                " reached at t = " + fmt(end) + " (horizon " + fmt(horizon) +
                                "); raise max_nodes or enable pruning");
          }
          ForestNode child;
          child.parent = static_cast<std::uint32_t>(i);
          child.birth = end;
          child.birth_pos = x;
          child.stream = derive_stream(nd.stream, slot);
          f.nodes_.push_back(child);
        }
      }

      nd.end = end;
      nd.reason = reason;
      f.nodes_[i] = nd;
    }
    return f;
  }
};

GenealogyForest GenealogyForest::restore(SimConfig config, std::vector<ForestNode> nodes,
                                         std::vector<double> pos) {
  config.validate();
  if (nodes.empty()) throw ConfigError("restore: empty forest");

  GenealogyForest f;
  f.config_ = std::move(config);
  f.config_.checkpoints.back() = f.config_.horizon;
  f.ck_times_.reserve(f.config_.checkpoints.size() + 1);
  f.ck_times_.push_back(f.config_.start_time);
  for (double t : f.config_.checkpoints) f.ck_times_.push_back(t);
  const std::size_t n_ck = f.ck_times_.size();
  f.ck_max_.assign(n_ck, -kInf);
  f.pruned_at_ck_.assign(n_ck, 0);

  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const ForestNode& nd = nodes[i];
    if (nd.parent != ForestNode::kNoParent && nd.parent >= i) {
      throw ConfigError("restore: node " + std::to_string(i) + " has parent " +
                        std::to_string(nd.parent) + " at or after itself");
    }
    if (!(nd.birth <= nd.end)) {
      throw ConfigError("restore: node " + std::to_string(i) + " ends before its birth");
    }
    if (nd.n_ck < 0 || (nd.n_ck > 0 && nd.first_ck < 0)) {
      throw ConfigError("restore: node " + std::to_string(i) + " has a malformed span");
    }
    if (nd.n_ck > 0) {
      const std::size_t last = static_cast<std::size_t>(nd.first_ck) +
                               static_cast<std::size_t>(nd.n_ck);
      if (last > n_ck || nd.pos_offset + static_cast<std::uint64_t>(nd.n_ck) > pos.size()) {
        throw ConfigError("restore: node " + std::to_string(i) +
                          " points outside the position table");
      }
      for (std::int32_t k = 0; k < nd.n_ck; ++k) {
        const std::size_t ck = static_cast<std::size_t>(nd.first_ck + k);
        const double x = pos[nd.pos_offset + static_cast<std::uint64_t>(k)];
        if (f.ck_max_[ck] < x) f.ck_max_[ck] = x;
      }
    }
    if (nd.reason == EndReason::kPruned) {
      if (nd.n_ck <= 0) {
        throw ConfigError("restore: pruned node " + std::to_string(i) +
                          " has no recorded position");
      }
      ++f.pruned_at_ck_[static_cast<std::size_t>(nd.first_ck + nd.n_ck - 1)];
      ++f.pruned_total_;
    }
  }
  f.nodes_ = std::move(nodes);
  f.pos_ = std::move(pos);
  return f;
}

GenealogyForest simulate(const SimConfig& config) {
  const std::uint64_t root = derive_stream(config.seed, config.replica);
  return ForestBuilder::run(config, {{0.0, root}});
}

GenealogyForest simulate_from(const SimConfig& config,
                              const std::vector<InitialParticle>& initial) {
  return ForestBuilder::run(config, initial);
}

}  // namespace bbm
