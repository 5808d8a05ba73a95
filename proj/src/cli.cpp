#include "bbmlab/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <map>

#include <CLI11.hpp>

#include "bbmlab/cluster.hpp"
#include "bbmlab/ergodic.hpp"
#include "bbmlab/errors.hpp"
#include "bbmlab/extremal.hpp"
#include "bbmlab/forest.hpp"
#include "bbmlab/io.hpp"
#include "bbmlab/kpp.hpp"
#include "bbmlab/parallel.hpp"

namespace bbm {

namespace {

using io::json;

using Setter = std::function<void(const json&)>;
using SetterMap = std::map<std::string, Setter>;

// Config keys mirror the flags one-to-one (dashes become underscores);
// values loaded here are overwritten by any flag given on the command line.
void apply_config_file(const std::string& path, const std::string& command,
                       const SetterMap& setters) {
  const json whole = io::load_config(path);
  const json* section = &whole;
  if (whole.contains(command) && whole.at(command).is_object()) {
    section = &whole.at(command);
  }
  for (const auto& [key, value] : section->items()) {
    if (section == &whole && value.is_object()) continue;  // other subcommand sections
    auto it = setters.find(key);
    if (it == setters.end()) {
      throw ConfigError(path + ": unknown config key '" + key + "' for " + command);
    }
    try {
      it->second(value);
    } catch (const json::exception& e) {
      throw ConfigError(path + ": bad value for '" + key + "': " + e.what());
    }
  }
}

std::uint64_t seed_from_env() {
  const char* env = std::getenv("BBM_SEED");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (!end || *end != '\0') {
    throw ConfigError("BBM_SEED must be an unsigned integer, got '" + std::string(env) +
                      "'");
  }
  return static_cast<std::uint64_t>(v);
}

BranchingLaw law_from_pmf(const std::vector<double>& pmf) {
  try {
    return BranchingLaw(pmf);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("--pmf: ") + e.what());
  }
}

void write_output(const std::string& path, const std::string& content) {
  if (path == "-") {
    std::fwrite(content.data(), 1, content.size(), stdout);
    return;
  }
  io::write_text(path, content);
}

void emit_report(const std::string& path, const std::string& out_dir,
                 const std::string& command, const json& effective_config,
                 json payload) {
  json out{{"version", io::version()},
           {"command", command},
           {"config", effective_config},
           {"report", std::move(payload)}};
  if (!out_dir.empty()) {
    for (const auto& p : io::write_report(out, out_dir)) {
      std::fprintf(stderr, "wrote %s\n", p.c_str());
    }
    return;
  }
  write_output(path, out.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateOptions {
  std::uint64_t seed = 1;
  std::uint64_t replica = 0;
  double horizon = 10.0;
  double dt = 0.25;
  std::vector<double> pmf = {0.0, 1.0};
  double prune_gap = 0.0;
  double prune_after = 0.0;
  std::uint64_t max_nodes = 10'000'000;
  std::string out = "forest.jsonl";
};

int run_simulate(const SimulateOptions& o) {
  if (o.out == "-" || o.out.empty()) {
    throw ConfigError("simulate: --out needs a file path");
  }
  SimConfig cfg;
  cfg.seed = o.seed;
  cfg.replica = o.replica;
  cfg.horizon = o.horizon;
  cfg.checkpoints = SimConfig::uniform_checkpoints(o.horizon, o.dt);
  cfg.law = law_from_pmf(o.pmf);
  cfg.prune_gap = o.prune_gap;
  cfg.prune_after = o.prune_after;
  cfg.max_nodes = o.max_nodes;
  const GenealogyForest forest = simulate(cfg);
  io::save_forest(forest, o.out);
  std::fprintf(stderr, "simulate: %zu nodes, %zu alive at t = %s, %zu pruned -> %s\n",
               forest.size(),
               forest.n_alive(static_cast<int>(forest.checkpoint_times().size()) - 1),
               io::format_g17(o.horizon).c_str(), forest.pruned_count(), o.out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// stats
// ---------------------------------------------------------------------------

struct StatsOptions {
  std::string in;
  std::vector<double> at;  // empty: horizon only
  std::string atoms_out;
  std::string out = "-";
  std::string out_dir;
};

int run_stats(const StatsOptions& o) {
  if (o.in.empty()) throw ConfigError("stats: --in is required");
  const GenealogyForest forest = io::load_forest(o.in);
  std::vector<double> times = o.at;
  if (times.empty()) times.push_back(forest.config().horizon);

  json rows = json::array();
  for (double t : times) {
    const int ck = forest.checkpoint_index(t);
    const PointMeasure mu = forest.alive_positions(t);
    const MartingalePair mart = martingales(forest, t);
    json row{{"t", t},
             {"n_alive", forest.n_alive(ck)},
             {"Y", mart.Y},
             {"Z", mart.Z},
             {"pruned_before", forest.pruned_before(ck)}};
    if (!mu.empty()) {
      row["max"] = mu.max();
      if (t > 0.0) {
        row["m_t"] = recenter_m(t);
        row["recentred_max"] = mu.max() - recenter_m(t);
      }
    }
    rows.push_back(std::move(row));
  }
  if (!o.atoms_out.empty()) {
    const double t = times.back();
    const PointMeasure ext = extremal_process(forest, t);
    write_output(o.atoms_out,
                 io::point_measure_csv(
                     ext, {std::string("bbmlab ") + io::version(),
                           "recentred positions at t = " + io::format_g17(t),
                           "m_t = " + io::format_g17(recenter_m(t)),
                           "seed = " + std::to_string(forest.config().seed) +
                               ", replica = " + std::to_string(forest.config().replica)}));
  }
  emit_report(o.out, o.out_dir, "stats", json{{"in", o.in}, {"at", times}},
              json{{"sim_config", io::to_json(forest.config())},
                   {"n_nodes", forest.size()},
                   {"pruned_nodes", forest.pruned_count()},
                   {"checkpoints", std::move(rows)}});
  return 0;
}

// ---------------------------------------------------------------------------
// kpp
// ---------------------------------------------------------------------------

struct KppOptions {
  double t = 10.0;
  double dx = 0.02;
  double dt = 0.01;
  double x_min = -30.0;
  double x_max = 40.0;
  bool moving_window = false;
  double front_margin = 60.0;
  std::vector<double> pmf = {0.0, 1.0};
  std::string tf;  // empty: Heaviside data
  bool validate_init = false;
  double trace_dt = 0.0;  // > 0: record the front trace
  double fit_min = 0.0, fit_max = 0.0;  // both 0: [t/2, t]
  std::string trace_out;
  std::vector<double> cr;
  double y_max = 28.0;
  std::vector<double> sandwich_r;
  std::vector<double> sandwich_x;
  std::vector<double> profile_times;
  double profile_xi_lo = -8.0, profile_xi_hi = 8.0;
  std::string profile_out;
  std::string out = "-";
  std::string out_dir;
};

kpp::SolverConfig solver_config(const KppOptions& o) {
  kpp::SolverConfig cfg;
  cfg.dx = o.dx;
  cfg.dt = o.dt;
  cfg.x_min = o.x_min;
  cfg.x_max = o.x_max;
  cfg.moving_window = o.moving_window;
  cfg.front_margin = o.front_margin;
  cfg.law = law_from_pmf(o.pmf);
  return cfg;
}

kpp::KppSolution fresh_solution(const KppOptions& o) {
  const kpp::SolverConfig cfg = solver_config(o);
  if (o.tf.empty()) return kpp::init_heaviside(cfg);
  return kpp::init_from_test_function(cfg, TestFunction::library(o.tf));
}

int run_kpp(const KppOptions& o) {
  json rep;
  if (o.validate_init) {
    const auto sol = fresh_solution(o);
    rep["initial_condition"] = io::to_json(kpp::validate_initial_condition(sol));
  }
  if (o.trace_dt > 0.0) {
    auto sol = fresh_solution(o);
    const kpp::FrontTrace trace = kpp::trace_front(sol, o.t, o.trace_dt);
    if (!o.trace_out.empty()) write_output(o.trace_out, io::front_trace_csv(trace));
    json block{{"samples", trace.size()},
               {"final_front", trace.empty() ? 0.0 : trace.back().x_half},
               {"window_shift", sol.window_shift()}};
    const double fit_lo = o.fit_max > o.fit_min ? o.fit_min : o.t / 2.0;
    const double fit_hi = o.fit_max > o.fit_min ? o.fit_max : o.t;
    try {
      block["bramson"] = io::to_json(kpp::bramson_fit(trace, fit_lo, fit_hi));
      block["fit_window"] = json{{"lo", fit_lo}, {"hi", fit_hi}};
    } catch (const GridError& e) {
      block["bramson_skipped"] = e.what();
    }
    rep["front"] = std::move(block);
  }
  if (!o.cr.empty()) {
    auto sol = fresh_solution(o);
    json arr = json::array();
    for (const auto& cr : kpp::c_r_curve(sol, o.cr, o.y_max)) {
      arr.push_back(io::to_json(cr));
    }
    rep["c_r"] = std::move(arr);
  }
  if (!o.sandwich_r.empty()) {
    if (o.sandwich_x.empty()) {
      throw ConfigError("kpp: --sandwich-x is required with --sandwich-r");
    }
    json arr = json::array();
    for (const auto& sw : kpp::run_tail_sandwich(solver_config(o), o.sandwich_r, o.t,
                                                 o.sandwich_x, o.y_max)) {
      arr.push_back(io::to_json(sw));
    }
    rep["sandwich"] = std::move(arr);
  }
  if (!o.profile_times.empty()) {
    auto sol = fresh_solution(o);
    json arr = json::array();
    for (const auto& d : kpp::wave_profile_convergence(sol, o.profile_times,
                                                       o.profile_xi_lo, o.profile_xi_hi)) {
      arr.push_back(json{{"t_from", d.t_from},
                         {"t_to", d.t_to},
                         {"sup_distance", d.sup_distance},
                         {"interpolated", d.interpolated}});
    }
    rep["profile_convergence"] = std::move(arr);
  }
  if (!o.profile_out.empty()) {
    auto sol = fresh_solution(o);
    sol.step_to(o.t);
    std::string csv = "x,u\n";
    for (std::size_t i = 0; i < sol.u().size(); ++i) {
      csv += io::format_g17(sol.x_of(i)) + "," + io::format_g17(sol.u()[i]) + "\n";
    }
    write_output(o.profile_out, csv);
  }
  if (rep.empty()) {
    auto sol = fresh_solution(o);
    sol.step_to(o.t);
    rep["front_position"] = sol.front_position(0.5);
    rep["max_preclamp_excursion"] = sol.max_preclamp_excursion();
  }
  emit_report(o.out, o.out_dir, "kpp",
              json{{"t", o.t},
                   {"dx", o.dx},
                   {"dt", o.dt},
                   {"x_min", o.x_min},
                   {"x_max", o.x_max},
                   {"moving_window", o.moving_window},
                   {"tf", o.tf},
                   {"pmf", o.pmf},
                   {"y_max", o.y_max}},
              std::move(rep));
  return 0;
}

// ---------------------------------------------------------------------------
// cluster
// ---------------------------------------------------------------------------

struct ClusterOptions {
  double t_d = 10.0;
  std::size_t n = 1000;
  std::uint64_t seed = 1;
  double max_depth = std::numeric_limits<double>::infinity();
  std::vector<double> pmf = {0.0, 1.0};
  std::string tf;
  double quad_step = 0.01;
  std::string atoms_out;
  int threads = 1;
  std::string out = "-";
  std::string out_dir;
};

int run_cluster(const ClusterOptions& o) {
  const BranchingLaw law = law_from_pmf(o.pmf);
  std::vector<ClusterSample> pool(o.n);
  parallel_for(o.n, o.threads, [&](std::size_t j) {
    pool[j] = sample_cluster(o.t_d, law, o.seed, j, o.max_depth);
  });

  std::uint64_t attempts = 0;
  std::size_t atom_total = 0;
  for (const auto& c : pool) {
    attempts += c.attempts;
    atom_total += c.atoms.size();
  }
  json rep{{"n", o.n},
           {"t_d", o.t_d},
           {"max_depth", o.max_depth},
           {"total_attempts", attempts},
           {"mean_attempts", o.n ? static_cast<double>(attempts) / o.n : 0.0},
           {"acceptance_rate", attempts ? static_cast<double>(o.n) / attempts : 0.0},
           {"mean_atoms", o.n ? static_cast<double>(atom_total) / o.n : 0.0}};

  if (!o.tf.empty()) {
    const TestFunction tf = TestFunction::library(o.tf);
    json integral = io::to_json(C_from_clusters(tf, pool, o.quad_step));
    integral["tf_id"] = tf.id();
    rep["integral"] = std::move(integral);
  }
  if (!o.atoms_out.empty()) {
    std::string lines;
    for (std::size_t j = 0; j < pool.size(); ++j) {
      json row{{"index", j},
               {"attempts", pool[j].attempts},
               {"atoms", pool[j].atoms.atoms}};
      lines += row.dump();
      lines += '\n';
    }
    write_output(o.atoms_out, lines);
  }
  emit_report(o.out, o.out_dir, "cluster",
              json{{"t_d", o.t_d},
                   {"n", o.n},
                   {"seed", o.seed},
                   {"max_depth", o.max_depth},
                   {"pmf", o.pmf},
                   {"tf", o.tf},
                   {"quad_step", o.quad_step}},
              std::move(rep));
  return 0;
}

// ---------------------------------------------------------------------------
// ergodic
// ---------------------------------------------------------------------------

struct ErgodicOptions {
  std::string tf = "bump1";
  double T = 40.0;
  double epsilon = 0.1;
  double dt_avg = 0.25;
  std::uint64_t seed = 1;
  std::size_t seeds = 1;
  std::vector<double> pmf = {0.0, 1.0};
  double prune_gap = 8.0;
  double z_cap = 12.0;
  double kpp_r = 12.0;
  double space_t = 0.0;  // > 0: add the fixed-time replica average
  std::size_t space_replicas = 200;
  bool decomposition = false;
  std::size_t decomp_outer = 32;
  std::size_t decomp_inner = 16;
  double decomp_grid = 0.5;
  int threads = 1;
  std::string out = "-";
  std::string out_dir;
};

int run_ergodic(const ErgodicOptions& o) {
  const TestFunction tf = TestFunction::library(o.tf);
  ErgodicConfig base;
  base.T = o.T;
  base.epsilon = o.epsilon;
  base.dt_avg = o.dt_avg;
  base.seed = o.seed;
  base.law = law_from_pmf(o.pmf);
  base.prune_gap = o.prune_gap;
  base.z_time_cap = o.z_cap;
  base.kpp_r = o.kpp_r;
  base.validate();

  const CEstimate c_est = compute_C_kpp(tf, o.kpp_r, 28.0, base.law);

  json rep;
  rep["C"] = io::to_json(c_est);
  if (o.seeds <= 1) {
    rep["run"] = io::to_json(run_time_average(base, tf, &c_est));
  } else {
    std::vector<ErgodicReport> runs(o.seeds);
    parallel_for(o.seeds, o.threads, [&](std::size_t i) {
      ErgodicConfig cfg = base;
      cfg.seed = o.seed + i;
      runs[i] = run_time_average(cfg, tf, &c_est);
    });
    json arr = json::array();
    std::vector<double> gaps;
    for (const auto& r : runs) {
      arr.push_back(io::to_json(r));
      gaps.push_back(r.abs_gap);
    }
    std::sort(gaps.begin(), gaps.end());
    rep["runs"] = std::move(arr);
    rep["median_abs_gap"] = gaps[gaps.size() / 2];
  }
  if (o.space_t > 0.0) {
    rep["space_average"] = io::to_json(
        run_space_average(base, tf, o.space_replicas, o.space_t, &c_est, o.threads));
  }
  if (o.decomposition) {
    DecompositionConfig dc;
    dc.T = o.T;
    dc.n_outer = o.decomp_outer;
    dc.n_inner = o.decomp_inner;
    dc.grid_dt = o.decomp_grid;
    dc.seed = o.seed;
    dc.law = base.law;
    dc.prune_gap = o.prune_gap;
    rep["decomposition"] = io::to_json(run_decomposition_diagnostics(dc, tf, o.threads));
  }
  emit_report(o.out, o.out_dir, "ergodic",
              json{{"tf", o.tf},
                   {"T", o.T},
                   {"epsilon", o.epsilon},
                   {"dt_avg", o.dt_avg},
                   {"seed", o.seed},
                   {"seeds", o.seeds},
                   {"pmf", o.pmf},
                   {"prune_gap", o.prune_gap},
                   {"z_cap", o.z_cap},
                   {"kpp_r", o.kpp_r},
                   {"threads", o.threads}},
              std::move(rep));
  return 0;
}

// ---------------------------------------------------------------------------
// gumbel
// ---------------------------------------------------------------------------

struct GumbelOptions {
  double T = 40.0;
  double epsilon = 0.1;
  double dt_avg = 0.25;
  std::uint64_t seed = 1;
  std::size_t seeds = 30;
  double x_min = -2.5, x_max = 3.5, x_step = 0.5;
  std::vector<double> pmf = {0.0, 1.0};
  double prune_gap = 8.0;
  double z_cap = 12.0;
  double kpp_r = 12.0;
  int threads = 1;
  std::string out = "-";
  std::string out_dir;
};

int run_gumbel_cmd(const GumbelOptions& o) {
  ErgodicConfig base;
  base.T = o.T;
  base.epsilon = o.epsilon;
  base.dt_avg = o.dt_avg;
  base.law = law_from_pmf(o.pmf);
  base.prune_gap = o.prune_gap;
  base.z_time_cap = o.z_cap;
  base.kpp_r = o.kpp_r;
  base.validate();
  if (!(o.x_step > 0.0 && o.x_max > o.x_min)) {
    throw ConfigError("gumbel: need x_step > 0 and x_max > x_min");
  }
  std::vector<double> x_grid;
  for (double x = o.x_min; x <= o.x_max + 1e-9; x += o.x_step) x_grid.push_back(x);
  std::vector<std::uint64_t> seed_list(o.seeds);
  for (std::size_t i = 0; i < o.seeds; ++i) seed_list[i] = o.seed + i;

  const GumbelReport rep = run_gumbel(base, x_grid, seed_list, o.threads);
  emit_report(o.out, o.out_dir, "gumbel",
              json{{"T", o.T},
                   {"epsilon", o.epsilon},
                   {"dt_avg", o.dt_avg},
                   {"seed", o.seed},
                   {"seeds", o.seeds},
                   {"x_min", o.x_min},
                   {"x_max", o.x_max},
                   {"x_step", o.x_step},
                   {"pmf", o.pmf},
                   {"prune_gap", o.prune_gap},
                   {"z_cap", o.z_cap},
                   {"kpp_r", o.kpp_r},
                   {"threads", o.threads}},
              io::to_json(rep));
  return 0;
}

// ---------------------------------------------------------------------------
// qtime
// ---------------------------------------------------------------------------

struct QtimeOptions {
  double t = 12.0;
  double t2 = 16.0;
  double window_lo = -3.0;
  double window_hi = 0.0;
  std::vector<double> r = {0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5};
  std::size_t replicas = 2000;
  std::uint64_t seed = 1;
  std::vector<double> pmf = {0.0, 1.0};
  double prune_gap = 8.0;
  double grid_dt = 0.5;
  int threads = 1;
  std::string out = "-";
  std::string out_dir;
};

int run_qtime(const QtimeOptions& o) {
  BranchingTimeConfig cfg;
  cfg.t = o.t;
  cfg.t2 = o.t2;
  cfg.window_lo = o.window_lo;
  cfg.window_hi = o.window_hi;
  cfg.r_list = o.r;
  cfg.n_replicas = o.replicas;
  cfg.seed = o.seed;
  cfg.law = law_from_pmf(o.pmf);
  cfg.prune_gap = o.prune_gap;
  cfg.grid_dt = o.grid_dt;

  const BranchingTimeReport rep = run_branching_time(cfg, o.threads);
  emit_report(o.out, o.out_dir, "qtime",
              json{{"t", o.t},
                   {"t2", o.t2},
                   {"window_lo", o.window_lo},
                   {"window_hi", o.window_hi},
                   {"r", o.r},
                   {"replicas", o.replicas},
                   {"seed", o.seed},
                   {"pmf", o.pmf},
                   {"prune_gap", o.prune_gap},
                   {"grid_dt", o.grid_dt},
                   {"threads", o.threads}},
              io::to_json(rep));
  return 0;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct ReportOptions {
  std::string in;
  std::string schema;
  std::string schema_dir = "data/schemas";
  std::string out = "-";
  std::string out_dir;
};

int run_report(const ReportOptions& o) {
  if (o.in.empty()) throw ConfigError("report: --in is required");
  const json doc = io::parse_json(io::read_text(o.in), o.in);
  json rep{{"in", o.in}};
  if (!o.schema.empty()) {
    const std::string schema_path = o.schema_dir + "/" + o.schema + ".schema.json";
    const json schema = io::parse_json(io::read_text(schema_path), schema_path);
    io::check_schema(doc, schema);
    rep["schema"] = o.schema;
    rep["schema_ok"] = true;
  }
  json keys = json::array();
  if (doc.is_object()) {
    for (const auto& [k, v] : doc.items()) {
      keys.push_back(json{{"key", k}, {"type", v.type_name()}});
    }
  }
  rep["top_level"] = std::move(keys);
  if (doc.is_object() && doc.contains("version")) rep["version"] = doc.at("version");
  if (doc.is_object() && doc.contains("command")) rep["command"] = doc.at("command");
  emit_report(o.out, o.out_dir, "report", json{{"in", o.in}, {"schema", o.schema}},
              std::move(rep));
  return 0;
}

// typed setter helpers for the config-file mirror
Setter set_d(double& r) { return [&r](const json& v) { r = v.get<double>(); }; }
Setter set_u64(std::uint64_t& r) { return [&r](const json& v) { r = v.get<std::uint64_t>(); }; }
Setter set_sz(std::size_t& r) { return [&r](const json& v) { r = v.get<std::size_t>(); }; }
Setter set_i(int& r) { return [&r](const json& v) { r = v.get<int>(); }; }
Setter set_b(bool& r) { return [&r](const json& v) { r = v.get<bool>(); }; }
Setter set_s(std::string& r) { return [&r](const json& v) { r = v.get<std::string>(); }; }
Setter set_vd(std::vector<double>& r) {
  return [&r](const json& v) { r = v.get<std::vector<double>>(); };
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args) {
  try {
    SimulateOptions so;
    StatsOptions to;
    KppOptions ko;
    ClusterOptions co;
    ErgodicOptions eo;
    GumbelOptions go;
    QtimeOptions qo;
    ReportOptions ro;
    bool seed_from_config = false;

    const std::map<std::string, SetterMap> config_keys{
        {"simulate",
         {{"seed", [&](const json& v) { so.seed = v.get<std::uint64_t>(); seed_from_config = true; }},
          {"replica", set_u64(so.replica)},
          {"horizon", set_d(so.horizon)},
          {"dt", set_d(so.dt)},
          {"pmf", set_vd(so.pmf)},
          {"prune_gap", set_d(so.prune_gap)},
          {"prune_after", set_d(so.prune_after)},
          {"max_nodes", set_u64(so.max_nodes)},
          {"out", set_s(so.out)}}},
        {"stats",
         {{"in", set_s(to.in)},
          {"at", set_vd(to.at)},
          {"atoms_out", set_s(to.atoms_out)},
          {"out", set_s(to.out)}}},
        {"kpp",
         {{"t", set_d(ko.t)},
          {"dx", set_d(ko.dx)},
          {"dt", set_d(ko.dt)},
          {"x_min", set_d(ko.x_min)},
          {"x_max", set_d(ko.x_max)},
          {"moving_window", set_b(ko.moving_window)},
          {"front_margin", set_d(ko.front_margin)},
          {"pmf", set_vd(ko.pmf)},
          {"tf", set_s(ko.tf)},
          {"validate_init", set_b(ko.validate_init)},
          {"trace_dt", set_d(ko.trace_dt)},
          {"fit_min", set_d(ko.fit_min)},
          {"fit_max", set_d(ko.fit_max)},
          {"trace_out", set_s(ko.trace_out)},
          {"cr", set_vd(ko.cr)},
          {"y_max", set_d(ko.y_max)},
          {"sandwich_r", set_vd(ko.sandwich_r)},
          {"sandwich_x", set_vd(ko.sandwich_x)},
          {"profile_times", set_vd(ko.profile_times)},
          {"profile_xi_lo", set_d(ko.profile_xi_lo)},
          {"profile_xi_hi", set_d(ko.profile_xi_hi)},
          {"profile_out", set_s(ko.profile_out)},
          {"out", set_s(ko.out)}}},
        {"cluster",
         {{"seed", [&](const json& v) { co.seed = v.get<std::uint64_t>(); seed_from_config = true; }},
          {"t_d", set_d(co.t_d)},
          {"n", set_sz(co.n)},
          {"max_depth", set_d(co.max_depth)},
          {"pmf", set_vd(co.pmf)},
          {"tf", set_s(co.tf)},
          {"quad_step", set_d(co.quad_step)},
          {"atoms_out", set_s(co.atoms_out)},
          {"threads", set_i(co.threads)},
          {"out", set_s(co.out)}}},
        {"ergodic",
         {{"seed", [&](const json& v) { eo.seed = v.get<std::uint64_t>(); seed_from_config = true; }},
          {"tf", set_s(eo.tf)},
          {"T", set_d(eo.T)},
          {"epsilon", set_d(eo.epsilon)},
          {"dt_avg", set_d(eo.dt_avg)},
          {"seeds", set_sz(eo.seeds)},
          {"pmf", set_vd(eo.pmf)},
          {"prune_gap", set_d(eo.prune_gap)},
          {"z_cap", set_d(eo.z_cap)},
          {"kpp_r", set_d(eo.kpp_r)},
          {"space_t", set_d(eo.space_t)},
          {"space_replicas", set_sz(eo.space_replicas)},
          {"decomposition", set_b(eo.decomposition)},
          {"decomp_outer", set_sz(eo.decomp_outer)},
          {"decomp_inner", set_sz(eo.decomp_inner)},
          {"decomp_grid", set_d(eo.decomp_grid)},
          {"threads", set_i(eo.threads)},
          {"out", set_s(eo.out)}}},
        {"gumbel",
         {{"seed", [&](const json& v) { go.seed = v.get<std::uint64_t>(); seed_from_config = true; }},
          {"T", set_d(go.T)},
          {"epsilon", set_d(go.epsilon)},
          {"dt_avg", set_d(go.dt_avg)},
          {"seeds", set_sz(go.seeds)},
          {"x_min", set_d(go.x_min)},
          {"x_max", set_d(go.x_max)},
          {"x_step", set_d(go.x_step)},
          {"pmf", set_vd(go.pmf)},
          {"prune_gap", set_d(go.prune_gap)},
          {"z_cap", set_d(go.z_cap)},
          {"kpp_r", set_d(go.kpp_r)},
          {"threads", set_i(go.threads)},
          {"out", set_s(go.out)}}},
        {"qtime",
         {{"seed", [&](const json& v) { qo.seed = v.get<std::uint64_t>(); seed_from_config = true; }},
          {"t", set_d(qo.t)},
          {"t2", set_d(qo.t2)},
          {"window_lo", set_d(qo.window_lo)},
          {"window_hi", set_d(qo.window_hi)},
          {"r", set_vd(qo.r)},
          {"replicas", set_sz(qo.replicas)},
          {"pmf", set_vd(qo.pmf)},
          {"prune_gap", set_d(qo.prune_gap)},
          {"grid_dt", set_d(qo.grid_dt)},
          {"threads", set_i(qo.threads)},
          {"out", set_s(qo.out)}}},
        {"report",
         {{"in", set_s(ro.in)},
          {"schema", set_s(ro.schema)},
          {"schema_dir", set_s(ro.schema_dir)},
          {"out", set_s(ro.out)}}},
    };

    // locate --config and the subcommand name before CLI11 runs, so file
    // values sit in the option structs as defaults the flags then override
    std::string config_path;
    std::string sub_name;
    for (std::size_t i = 0; i < args.size(); ++i) {
      const std::string& a = args[i];
      if (a == "--config") {
        if (i + 1 < args.size()) config_path = args[++i];
      } else if (a.rfind("--config=", 0) == 0) {
        config_path = a.substr(9);
      } else if (sub_name.empty() && !a.empty() && a[0] != '-') {
        sub_name = a;
      }
    }
    if (!config_path.empty()) {
      auto it = config_keys.find(sub_name);
      if (it == config_keys.end()) {
        throw ConfigError("--config needs a recognised subcommand on the command line");
      }
      apply_config_file(config_path, sub_name, it->second);
    }

    CLI::App app{"event-exact branching Brownian motion laboratory"};
    app.set_version_flag("--version", io::version());
    app.require_subcommand(1);
    std::string config_echo;  // value consumed in the prescan above
    app.add_option("--config", config_echo,
                   "JSON config mirroring the flags; flags override its values");
    std::string out_dir;
    app.add_option("--out-dir", out_dir,
                   "write <command>_report.json and a CSV summary row here");

    auto* sim = app.add_subcommand("simulate", "run one replica and export the forest");
    auto* sim_seed = sim->add_option("--seed", so.seed, "RNG seed (or BBM_SEED env)");
    sim->add_option("--replica", so.replica, "replica index under the seed");
    sim->add_option("--horizon", so.horizon, "end time");
    sim->add_option("--dt", so.dt, "checkpoint spacing");
    sim->add_option("--pmf", so.pmf, "offspring law p1,p2,... (mean 2)")->delimiter(',');
    sim->add_option("--prune-gap", so.prune_gap,
                    "freeze particles this far below the front (0 off, else >= 8)");
    sim->add_option("--prune-after", so.prune_after, "first time pruning may act");
    sim->add_option("--max-nodes", so.max_nodes, "node budget");
    sim->add_option("--out", so.out, "forest file (.jsonl or .jsonl.gz)");

    auto* st = app.add_subcommand("stats", "extremal statistics of a stored forest");
    st->add_option("--in", to.in, "forest file");
    st->add_option("--at", to.at, "checkpoint times to report")->delimiter(',');
    st->add_option("--atoms-out", to.atoms_out,
                   "CSV of the recentred cloud at the last time");
    st->add_option("--out", to.out, "report destination (- for stdout)");

    auto* kp = app.add_subcommand("kpp", "front equation: traces, fits, tail functionals");
    kp->add_option("--t", ko.t, "evolution horizon");
    kp->add_option("--dx", ko.dx, "grid spacing");
    kp->add_option("--dt", ko.dt, "time step (<= 0.1)");
    kp->add_option("--x-min", ko.x_min, "left edge");
    kp->add_option("--x-max", ko.x_max, "right edge");
    kp->add_flag("--moving-window", ko.moving_window, "slide the window with the front");
    kp->add_option("--front-margin", ko.front_margin,
                   "kept ahead of the front when sliding");
    kp->add_option("--pmf", ko.pmf, "offspring law")->delimiter(',');
    kp->add_option("--tf", ko.tf,
                   "initial data from this test function (default Heaviside)");
    kp->add_flag("--validate-init", ko.validate_init,
                 "check front-suitability of the data");
    kp->add_option("--trace-dt", ko.trace_dt, "sample the front every this often");
    kp->add_option("--fit-min", ko.fit_min, "speed fit window start");
    kp->add_option("--fit-max", ko.fit_max, "speed fit window end");
    kp->add_option("--trace-out", ko.trace_out, "front trace CSV");
    kp->add_option("--cr", ko.cr, "tail functional at these times")->delimiter(',');
    kp->add_option("--y-max", ko.y_max, "tail functional integration range");
    kp->add_option("--sandwich-r", ko.sandwich_r, "sandwich table r values")
        ->delimiter(',');
    kp->add_option("--sandwich-x", ko.sandwich_x, "sandwich table X values")
        ->delimiter(',');
    kp->add_option("--profile-times", ko.profile_times, "recentred profile snapshots")
        ->delimiter(',');
    kp->add_option("--profile-xi-lo", ko.profile_xi_lo, "profile window left");
    kp->add_option("--profile-xi-hi", ko.profile_xi_hi, "profile window right");
    kp->add_option("--profile-out", ko.profile_out, "final profile CSV");
    kp->add_option("--out", ko.out, "report destination");

    auto* cl = app.add_subcommand("cluster", "decoration sampling and the pool integral");
    auto* cl_seed = cl->add_option("--seed", co.seed, "RNG seed (or BBM_SEED env)");
    cl->add_option("--t-d", co.t_d, "source horizon (>= 4)");
    cl->add_option("--n", co.n, "pool size");
    cl->add_option("--max-depth", co.max_depth,
                   "drop atoms deeper than this below the top");
    cl->add_option("--pmf", co.pmf, "offspring law")->delimiter(',');
    cl->add_option("--tf", co.tf, "also compute the pool integral for this test function");
    cl->add_option("--quad-step", co.quad_step, "quadrature step of the pool integral");
    cl->add_option("--atoms-out", co.atoms_out, "cluster atoms as JSON lines");
    cl->add_option("--threads", co.threads, "worker threads");
    cl->add_option("--out", co.out, "report destination");

    auto* er = app.add_subcommand("ergodic", "time-average functionals against exp(-C Z)");
    auto* er_seed = er->add_option("--seed", eo.seed, "RNG seed (or BBM_SEED env)");
    er->add_option("--tf", eo.tf, "test function id");
    er->add_option("--T", eo.T, "averaging horizon");
    er->add_option("--epsilon", eo.epsilon, "early-window fraction");
    er->add_option("--dt-avg", eo.dt_avg, "averaging grid spacing");
    er->add_option("--seeds", eo.seeds, "number of seeds (aggregate when > 1)");
    er->add_option("--pmf", eo.pmf, "offspring law")->delimiter(',');
    er->add_option("--prune-gap", eo.prune_gap, "pruning width beyond T'");
    er->add_option("--z-cap", eo.z_cap, "derivative readout cap T'");
    er->add_option("--kpp-r", eo.kpp_r, "equation-route horizon for C");
    er->add_option("--space-t", eo.space_t, "add a fixed-time replica average at this t");
    er->add_option("--space-replicas", eo.space_replicas, "replica count for --space-t");
    er->add_flag("--decomposition", eo.decomposition,
                 "add freeze/regrow correlation diagnostics");
    er->add_option("--decomp-outer", eo.decomp_outer, "outer replicas");
    er->add_option("--decomp-inner", eo.decomp_inner, "inner continuations (>= 16)");
    er->add_option("--decomp-grid", eo.decomp_grid, "diagnostic grid spacing");
    er->add_option("--threads", eo.threads, "worker threads");
    er->add_option("--out", eo.out, "report destination");

    auto* gu = app.add_subcommand("gumbel", "double-exponential law of the recentred max");
    auto* gu_seed = gu->add_option("--seed", go.seed, "base seed (or BBM_SEED env)");
    gu->add_option("--T", go.T, "averaging horizon");
    gu->add_option("--epsilon", go.epsilon, "early-window fraction");
    gu->add_option("--dt-avg", go.dt_avg, "averaging grid spacing");
    gu->add_option("--seeds", go.seeds, "number of seeds");
    gu->add_option("--x-min", go.x_min, "threshold grid start");
    gu->add_option("--x-max", go.x_max, "threshold grid end");
    gu->add_option("--x-step", go.x_step, "threshold grid step");
    gu->add_option("--pmf", go.pmf, "offspring law")->delimiter(',');
    gu->add_option("--prune-gap", go.prune_gap, "pruning width beyond T'");
    gu->add_option("--z-cap", go.z_cap, "derivative readout cap T'");
    gu->add_option("--kpp-r", go.kpp_r, "equation-route horizon for the normalisation");
    gu->add_option("--threads", go.threads, "worker threads");
    gu->add_option("--out", go.out, "report destination");

    auto* qt = app.add_subcommand("qtime", "latest common branching time of front pairs");
    auto* qt_seed = qt->add_option("--seed", qo.seed, "RNG seed (or BBM_SEED env)");
    qt->add_option("--t", qo.t, "first observation time");
    qt->add_option("--t2", qo.t2, "second observation time");
    qt->add_option("--window-lo", qo.window_lo, "front window left edge");
    qt->add_option("--window-hi", qo.window_hi, "front window right edge");
    qt->add_option("--r", qo.r, "exceedance thresholds")->delimiter(',');
    qt->add_option("--replicas", qo.replicas, "replica count");
    qt->add_option("--pmf", qo.pmf, "offspring law")->delimiter(',');
    qt->add_option("--prune-gap", qo.prune_gap, "pruning width (from the start)");
    qt->add_option("--grid-dt", qo.grid_dt, "checkpoint spacing");
    qt->add_option("--threads", qo.threads, "worker threads");
    qt->add_option("--out", qo.out, "report destination");

    auto* re = app.add_subcommand("report", "validate and summarise a report file");
    re->add_option("--in", ro.in, "report JSON");
    re->add_option("--schema", ro.schema, "schema name under the schema directory");
    re->add_option("--schema-dir", ro.schema_dir, "schema directory");
    re->add_option("--out", ro.out, "summary destination");

    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("bbmlab");
    for (const auto& a : args) argv.push_back(a.c_str());

    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e);
      return code == 0 ? 0 : 2;
    }

    // seed resolution: flag beats config file beats BBM_SEED beats default 1
    if (app.got_subcommand(sim) && !sim_seed->count() && !seed_from_config) {
      so.seed = seed_from_env();
    }
    if (app.got_subcommand(cl) && !cl_seed->count() && !seed_from_config) {
      co.seed = seed_from_env();
    }
    if (app.got_subcommand(er) && !er_seed->count() && !seed_from_config) {
      eo.seed = seed_from_env();
    }
    if (app.got_subcommand(gu) && !gu_seed->count() && !seed_from_config) {
      go.seed = seed_from_env();
    }
    if (app.got_subcommand(qt) && !qt_seed->count() && !seed_from_config) {
      qo.seed = seed_from_env();
    }

    to.out_dir = ko.out_dir = co.out_dir = eo.out_dir = out_dir;
    go.out_dir = qo.out_dir = ro.out_dir = out_dir;

    if (app.got_subcommand(sim)) return run_simulate(so);
    if (app.got_subcommand(st)) return run_stats(to);
    if (app.got_subcommand(kp)) return run_kpp(ko);
    if (app.got_subcommand(cl)) return run_cluster(co);
    if (app.got_subcommand(er)) return run_ergodic(eo);
    if (app.got_subcommand(gu)) return run_gumbel_cmd(go);
    if (app.got_subcommand(qt)) return run_qtime(qo);
    if (app.got_subcommand(re)) return run_report(ro);
    throw UsageError("no subcommand given");
  } catch (const ResourceError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const SolverError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const DomainError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const LookupError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const GridError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}

}  // namespace bbm
