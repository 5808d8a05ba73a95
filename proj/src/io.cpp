#include "bbmlab/io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "bbmlab/errors.hpp"

namespace bbm::io {

namespace {

bool has_gz_suffix(const std::string& path) {
  return path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
}

const char* reason_name(EndReason r) {
  switch (r) {
    case EndReason::kBranch: return "branch";
    case EndReason::kHorizon: return "horizon";
    case EndReason::kPruned: return "pruned";
  }
  throw UsageError("forest: unknown end reason");
}

EndReason reason_from(const std::string& s, const std::string& origin) {
  if (s == "branch") return EndReason::kBranch;
  if (s == "horizon") return EndReason::kHorizon;
  if (s == "pruned") return EndReason::kPruned;
  throw ConfigError(origin + ": unknown end reason '" + s + "'");
}

json parse_line(const std::string& line, const std::string& path, std::size_t lineno) {
  return parse_json(line, path + ":" + std::to_string(lineno));
}

}  // namespace

const char* version() { return "0.1.0"; }

std::string format_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void write_text(const std::string& path, const std::string& content) {
  if (has_gz_suffix(path)) {
    gzFile g = gzopen(path.c_str(), "wb");
    if (!g) throw ConfigError("cannot open " + path + " for writing");
    std::size_t off = 0;
    while (off < content.size()) {
      const auto chunk = static_cast<unsigned>(
          std::min<std::size_t>(content.size() - off, 1u << 28));
      if (gzwrite(g, content.data() + off, chunk) != static_cast<int>(chunk)) {
        gzclose(g);
        throw ResourceError("write failed on " + path);
      }
      off += chunk;
    }
    if (gzclose(g) != Z_OK) throw ResourceError("close failed on " + path);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw ResourceError("write failed on " + path);
}

std::string read_text(const std::string& path) {
  if (has_gz_suffix(path)) {
    gzFile g = gzopen(path.c_str(), "rb");
    if (!g) throw ConfigError("cannot open " + path);
    std::string out;
    std::vector<char> buf(1 << 20);
    for (;;) {
      const int n = gzread(g, buf.data(), static_cast<unsigned>(buf.size()));
      if (n < 0) {
        gzclose(g);
        throw ResourceError("read failed on " + path);
      }
      out.append(buf.data(), static_cast<std::size_t>(n));
      if (n == 0) break;
    }
    gzclose(g);
    return out;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t upto = std::min(text.size(), e.byte > 0 ? e.byte - 1 : 0);
    for (std::size_t i = 0; i < upto; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) +
                      ": " + e.what());
  }
}

json to_json(const SimConfig& c) {
  return json{{"seed", c.seed},
              {"replica", c.replica},
              {"start_time", c.start_time},
              {"horizon", c.horizon},
              {"checkpoints", c.checkpoints},
              {"pmf", c.law.pmf_vector()},
              {"prune_gap", c.prune_gap},
              {"prune_after", c.prune_after},
              {"max_nodes", c.max_nodes}};
}

SimConfig sim_config_from_json(const json& j) {
  try {
    SimConfig c;
    c.seed = j.at("seed").get<std::uint64_t>();
    c.replica = j.at("replica").get<std::uint64_t>();
    c.start_time = j.at("start_time").get<double>();
    c.horizon = j.at("horizon").get<double>();
    c.checkpoints = j.at("checkpoints").get<std::vector<double>>();
    const auto pmf = j.at("pmf").get<std::vector<double>>();
    c.law = (pmf.size() == 1 && std::fabs(pmf[0] - 1.0) < 1e-12)
                ? BranchingLaw::single_lineage()
                : BranchingLaw(pmf);
    c.prune_gap = j.at("prune_gap").get<double>();
    c.prune_after = j.at("prune_after").get<double>();
    c.max_nodes = j.at("max_nodes").get<std::uint64_t>();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("sim config: ") + e.what());
  }
}

void save_forest(const GenealogyForest& f, const std::string& path) {
  std::string out;
  out.reserve(128 * f.size());
  json header{{"type", "bbm-forest"},
              {"version", version()},
              {"config", to_json(f.config())},
              {"n_nodes", f.size()}};
  out += header.dump();
  out += '\n';
  const auto& pos = f.positions_flat();
  for (std::size_t i = 0; i < f.size(); ++i) {
    const ForestNode& nd = f.nodes()[i];
    json row{{"id", i},
             {"parent", nd.parent == ForestNode::kNoParent
                            ? static_cast<std::int64_t>(-1)
                            : static_cast<std::int64_t>(nd.parent)},
             {"birth", nd.birth},
             {"end", nd.end},
             {"reason", reason_name(nd.reason)},
             {"birth_pos", nd.birth_pos},
             {"stream", nd.stream},
             {"first_ck", nd.first_ck}};
    json p = json::array();
    for (std::int32_t k = 0; k < nd.n_ck; ++k) {
      p.push_back(pos[nd.pos_offset + static_cast<std::uint64_t>(k)]);
    }
    row["pos"] = std::move(p);
    out += row.dump();
    out += '\n';
  }
  write_text(path, out);
}

GenealogyForest load_forest(const std::string& path) {
  const std::string text = read_text(path);
  std::size_t off = 0, lineno = 0;
  auto next_line = [&]() -> std::string {
    if (off >= text.size()) throw ConfigError(path + ": truncated forest file");
    const std::size_t nl = text.find('\n', off);
    const std::size_t end = nl == std::string::npos ? text.size() : nl;
    std::string line = text.substr(off, end - off);
    off = end + 1;
    ++lineno;
    return line;
  };

  const json header = parse_line(next_line(), path, lineno);
  try {
    if (header.at("type").get<std::string>() != "bbm-forest") {
      throw ConfigError(path + ": not a forest file");
    }
  } catch (const json::exception& e) {
    throw ConfigError(path + ":1: " + e.what());
  }
  SimConfig cfg = sim_config_from_json(header.at("config"));
  const auto n_nodes = header.at("n_nodes").get<std::size_t>();

  std::vector<ForestNode> nodes;
  std::vector<double> pos;
  nodes.reserve(n_nodes);
  for (std::size_t i = 0; i < n_nodes; ++i) {
    const json row = parse_line(next_line(), path, lineno);
    const std::string origin = path + ":" + std::to_string(lineno);
    try {
      if (row.at("id").get<std::size_t>() != i) {
        throw ConfigError(origin + ": node ids must be consecutive from 0");
      }
      ForestNode nd;
      const auto parent = row.at("parent").get<std::int64_t>();
      nd.parent = parent < 0 ? ForestNode::kNoParent : static_cast<std::uint32_t>(parent);
      nd.birth = row.at("birth").get<double>();
      nd.end = row.at("end").get<double>();
      nd.reason = reason_from(row.at("reason").get<std::string>(), origin);
      nd.birth_pos = row.at("birth_pos").get<double>();
      nd.stream = row.at("stream").get<std::uint64_t>();
      nd.first_ck = row.at("first_ck").get<std::int32_t>();
      const auto& parr = row.at("pos");
      if (!parr.is_array()) throw ConfigError(origin + ": pos must be an array");
      nd.n_ck = static_cast<std::int32_t>(parr.size());
      nd.pos_offset = pos.size();
      for (const auto& v : parr) pos.push_back(v.get<double>());
      nodes.push_back(nd);
    } catch (const json::exception& e) {
      throw ConfigError(origin + ": " + e.what());
    }
  }
  return GenealogyForest::restore(std::move(cfg), std::move(nodes), std::move(pos));
}

json to_json(const TimeAverageResult& r) {
  return json{{"value", r.value},
              {"t_split", r.t_split},
              {"early_avg", r.early_avg},
              {"late_avg", r.late_avg},
              {"early_contrib", r.early_contrib},
              {"late_contrib", r.late_contrib}};
}

json to_json(const CEstimate& c) {
  return json{{"value", c.value}, {"route", c.route}, {"r_used", c.r_used}};
}

json to_json(const MeanSE& m) {
  return json{{"value", m.value}, {"se", m.se}, {"n", m.n}};
}

json to_json(const ErgodicReport& r) {
  return json{{"tf_id", r.tf_id},
              {"T", r.T},
              {"epsilon", r.epsilon},
              {"dt_avg", r.dt_avg},
              {"time_average", to_json(r.avg)},
              {"z_time", r.z_time},
              {"Y_estimate", r.Y_estimate},
              {"Z_estimate", r.Z_estimate},
              {"z_degenerate", r.z_degenerate},
              {"C", to_json(r.C)},
              {"analytic_value", r.analytic_value},
              {"abs_gap", r.abs_gap},
              {"seed", r.seed},
              {"replica", r.replica},
              {"total_nodes", r.total_nodes},
              {"pruned_nodes", r.pruned_nodes}};
}

json to_json(const SpaceAverageReport& r) {
  return json{{"tf_id", r.tf_id},
              {"t", r.t},
              {"n_replicas", r.n_replicas},
              {"laplace", to_json(r.laplace)},
              {"analytic", to_json(r.analytic)},
              {"gap", r.gap},
              {"combined_se", r.combined_se},
              {"C", to_json(r.C)},
              {"n_degenerate", r.n_degenerate}};
}

json to_json(const GumbelReport& r) {
  json seeds = json::array();
  for (const auto& s : r.per_seed) {
    seeds.push_back(json{{"seed", s.seed},
                         {"lambda", s.fit.lambda},
                         {"a", s.fit.a},
                         {"r_squared", s.fit.r_squared},
                         {"n_points", s.fit.n_points},
                         {"fit_valid", s.fit_valid},
                         {"Z_estimate", s.z_estimate},
                         {"z_degenerate", s.z_degenerate},
                         {"g_values", s.g_values}});
  }
  return json{{"T", r.T},
              {"x_grid", r.x_grid},
              {"per_seed", std::move(seeds)},
              {"lambda_tol", r.lambda_tol},
              {"n_lambda_ok", r.n_lambda_ok},
              {"c_max", to_json(r.c_max)},
              {"a_on_cz",
               json{{"slope", r.a_on_cz.slope},
                    {"intercept", r.a_on_cz.intercept},
                    {"r_squared", r.a_on_cz.r_squared}}},
              {"a_on_cz_valid", r.a_on_cz_valid},
              {"n_degenerate", r.n_degenerate}};
}

json to_json(const BranchingTimeReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back(json{{"r", row.r},
                        {"count", row.count},
                        {"freq", row.freq},
                        {"ci_lo", row.ci.lo},
                        {"ci_hi", row.ci.hi}});
  }
  auto fit_json = [](const LineFit& f) {
    return json{{"slope", f.slope}, {"intercept", f.intercept}, {"r_squared", f.r_squared}};
  };
  return json{{"t", r.t},
              {"t2", r.t2},
              {"window_lo", r.window_lo},
              {"window_hi", r.window_hi},
              {"n_replicas", r.n_replicas},
              {"n_effective", r.n_effective},
              {"n_empty", r.n_empty},
              {"rows", std::move(rows)},
              {"decay_k03", fit_json(r.decay_k03)},
              {"decay_k05", fit_json(r.decay_k05)},
              {"decay_valid", r.decay_valid}};
}

json to_json(const CorrelationDiagnostic& r) {
  auto pair_json = [](const PairStat& p) {
    return json{{"mean", p.mean}, {"se", p.se}, {"n_pairs", p.n_pairs}};
  };
  return json{{"T", r.T},
              {"R_T", r.R_T},
              {"n_outer", r.n_outer},
              {"n_inner", r.n_inner},
              {"s_grid", r.s_grid},
              {"far_product", pair_json(r.far_product)},
              {"near_product", pair_json(r.near_product)},
              {"max_abs_y", r.max_abs_y}};
}

json to_json(const kpp::BramsonFit& f) {
  return json{{"speed", f.speed},
              {"log_coef", f.log_coef},
              {"constant", f.constant},
              {"max_residual", f.max_residual},
              {"n_points", f.n_points}};
}

json to_json(const kpp::CrResult& c) {
  return json{{"value", c.value},
              {"r", c.r},
              {"y_max", c.y_max},
              {"tail_integrand", c.tail_integrand}};
}

json to_json(const kpp::SandwichReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back(json{{"X", row.X},
                        {"u", row.u_val},
                        {"predicted", row.predicted},
                        {"ratio", row.ratio},
                        {"in_asymptotic_regime", row.in_asymptotic_regime}});
  }
  return json{{"t", r.t},
              {"r", r.r},
              {"c_r", r.c_r},
              {"gamma_hat", r.gamma_hat},
              {"rows", std::move(rows)}};
}

json to_json(const kpp::InitialConditionReport& r) {
  return json{{"right_tail_ok", r.right_tail_ok},
              {"right_rate", r.right_rate},
              {"left_mass_ok", r.left_mass_ok},
              {"left_min_mass", r.left_min_mass},
              {"m_centering_ok", r.m_centering_ok},
              {"conclusive", r.conclusive}};
}

json to_json(const ClusterIntegral& c) {
  return json{{"value", c.value},
              {"se", c.se},
              {"tail", c.tail},
              {"mc_lo", c.mc_lo},
              {"mc_hi", c.mc_hi},
              {"n_clusters", c.n_clusters}};
}

std::string point_measure_csv(const PointMeasure& mu,
                              const std::vector<std::string>& comments) {
  std::string out;
  for (const auto& c : comments) {
    out += "# " + c + "\n";
  }
  out += "atom\n";
  for (double a : mu.atoms) {
    out += format_g17(a) + "\n";
  }
  return out;
}

std::string front_trace_csv(const kpp::FrontTrace& trace) {
  std::string out = "t,x_half\n";
  for (const auto& s : trace) {
    out += format_g17(s.t) + "," + format_g17(s.x_half) + "\n";
  }
  return out;
}

json load_config(const std::string& path) {
  const json doc = parse_json(read_text(path), path);
  if (!doc.is_object()) throw ConfigError(path + ": config root must be an object");
  return doc;
}

namespace {

// depth-first scalar leaves as (dotted path, printed value) pairs
void collect_scalars(const json& node, const std::string& prefix,
                     std::vector<std::pair<std::string, std::string>>& out) {
  if (node.is_object()) {
    for (const auto& [key, value] : node.items()) {
      collect_scalars(value, prefix.empty() ? key : prefix + "." + key, out);
    }
  } else if (node.is_number_float()) {
    out.emplace_back(prefix, format_g17(node.get<double>()));
  } else if (node.is_number() || node.is_boolean()) {
    out.emplace_back(prefix, node.dump());
  } else if (node.is_string()) {
    out.emplace_back(prefix, node.get<std::string>());
  }
  // arrays are plot data, not summary scalars
}

}  // namespace

std::vector<std::string> write_report(const json& report, const std::string& dir) {
  if (!report.is_object() || !report.contains("command")) {
    throw ConfigError("write_report: report must be an object with a command field");
  }
  const std::string command = report.at("command").get<std::string>();
  const std::string json_path = dir + "/" + command + "_report.json";
  const std::string csv_path = dir + "/" + command + "_summary.csv";
  write_text(json_path, report.dump(2) + "\n");

  std::vector<std::pair<std::string, std::string>> cells;
  collect_scalars(report, "", cells);
  std::string header, row;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) {
      header += ',';
      row += ',';
    }
    header += cells[i].first;
    row += cells[i].second;
  }
  write_text(csv_path, header + "\n" + row + "\n");
  return {json_path, csv_path};
}

void check_schema(const json& doc, const json& schema, const std::string& where) {
  if (schema.contains("type")) {
    const std::string ty = schema.at("type").get<std::string>();
    const bool ok = (ty == "object" && doc.is_object()) ||
                    (ty == "array" && doc.is_array()) ||
                    (ty == "string" && doc.is_string()) ||
                    (ty == "boolean" && doc.is_boolean()) ||
                    (ty == "integer" && doc.is_number_integer()) ||
                    (ty == "number" && doc.is_number()) || (ty == "null" && doc.is_null());
    if (!ok) throw ConfigError("schema: " + where + " must have type " + ty);
  }
  if (schema.contains("required")) {
    for (const auto& k : schema.at("required")) {
      const auto key = k.get<std::string>();
      if (!doc.is_object() || !doc.contains(key)) {
        throw ConfigError("schema: " + where + " is missing required key '" + key + "'");
      }
    }
  }
  if (schema.contains("properties") && doc.is_object()) {
    for (const auto& [key, sub] : schema.at("properties").items()) {
      if (doc.contains(key)) check_schema(doc.at(key), sub, where + "." + key);
    }
  }
  if (schema.contains("items") && doc.is_array()) {
    std::size_t i = 0;
    for (const auto& el : doc) {
      check_schema(el, schema.at("items"), where + "[" + std::to_string(i) + "]");
      ++i;
    }
  }
}

}  // namespace bbm::io
