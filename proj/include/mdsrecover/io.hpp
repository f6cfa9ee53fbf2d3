#pragma once

// CSV and JSON serialization for matrices, labels, models and results.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mdsrecover/datagen.hpp"
#include "mdsrecover/diagnostics.hpp"
#include "mdsrecover/phase.hpp"

namespace mdsr::io {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

/// Shortest decimal that parses back to exactly `value`.
std::string format_double(double value);

struct CsvTable {
  std::vector<std::string> header;  // empty when the file has none
  Matrix values;
};

/// Comma separated numbers, row-major. A first line whose first token is not
/// numeric is taken as a header.
CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::filesystem::path& path);

std::string format_csv(const Matrix& values, const std::vector<std::string>& header = {});

std::vector<int> parse_labels(const std::string& text);
std::vector<int> read_labels(const std::filesystem::path& path);
std::string format_labels(const std::vector<int>& labels);

std::string read_text(const std::filesystem::path& path);

Json to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);
Json to_json(const Vector& v);

Json to_json(const ClusterModel& model);
ClusterModel model_from_json(const Json& j);

Json to_json(const ModelStats& stats);
Json to_json(const PerturbationReport& report);
Json to_json(const ConditionReport& report);

/// Phase grid configuration. Unknown keys are rejected.
PhaseGridConfig phase_config_from_json(const Json& j);
Json to_json(const PhaseGridConfig& config);
Json to_json(const PhaseGridResult& result);
Json to_json(const BoundaryFit& fit);

/// Fractions grid: header "sigma,<axis values...>", then one row per sigma.
std::string format_fractions_csv(const PhaseGridResult& result);
/// Reads a fractions grid written by format_fractions_csv.
PhaseGridResult fractions_from_csv(const CsvTable& table, const PhaseGridConfig& config);

/// Parses a JSON double that may be the string "inf".
double json_number(const Json& j);
Json json_number(double value);

}  // namespace mdsr::io
