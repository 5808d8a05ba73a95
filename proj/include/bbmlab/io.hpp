#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "bbmlab/cluster.hpp"
#include "bbmlab/ergodic.hpp"
#include "bbmlab/forest.hpp"
#include "bbmlab/kpp.hpp"
#include "bbmlab/point_measure.hpp"

namespace bbm::io {

using json = nlohmann::json;

const char* version();

// Shortest round-trip-exact decimal for CSV cells (17 significant digits).
std::string format_g17(double x);

// Plain or gzip by suffix: a path ending in .gz is compressed transparently.
void write_text(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);

// Parse with ConfigError("origin:line:col: ...") on malformed input.
json parse_json(const std::string& text, const std::string& origin);

// Forest persistence: one JSON object per line, header first.  The round
// trip is exact: save(load(save(f))) produces identical bytes.
void save_forest(const GenealogyForest& f, const std::string& path);
GenealogyForest load_forest(const std::string& path);

json to_json(const SimConfig& c);
SimConfig sim_config_from_json(const json& j);

json to_json(const TimeAverageResult& r);
json to_json(const CEstimate& c);
json to_json(const ErgodicReport& r);
json to_json(const SpaceAverageReport& r);
json to_json(const GumbelReport& r);
json to_json(const BranchingTimeReport& r);
json to_json(const CorrelationDiagnostic& r);
json to_json(const kpp::BramsonFit& f);
json to_json(const kpp::CrResult& c);
json to_json(const kpp::SandwichReport& r);
json to_json(const kpp::InitialConditionReport& r);
json to_json(const ClusterIntegral& c);
json to_json(const MeanSE& m);

std::string point_measure_csv(const PointMeasure& mu,
                              const std::vector<std::string>& comments);
std::string front_trace_csv(const kpp::FrontTrace& trace);

// Experiment config file: must parse to a JSON object.
json load_config(const std::string& path);

// Writes <command>_report.json plus <command>_summary.csv (one row of the
// report's scalar leaves) into dir and returns the paths written.
std::vector<std::string> write_report(const json& report, const std::string& dir);

// Structural validation against the subset of JSON Schema used under
// data/schemas: type, required, properties, items.  Violations raise
// ConfigError naming the offending path.
void check_schema(const json& doc, const json& schema, const std::string& where = "$");

}  // namespace bbm::io
