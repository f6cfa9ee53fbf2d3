#include "mdsrecover/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "mdsrecover/error.hpp"

namespace mdsr::io {

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

namespace {

std::string trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return std::string(s.substr(begin, end - begin + 1));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::optional<double> parse_number(const std::string& token) {
  if (token.empty()) return std::nullopt;
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last) return std::nullopt;
  return value;
}

}  // namespace

CsvTable parse_csv(const std::string& text) {
  CsvTable table;
  std::vector<std::vector<double>> rows;
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (rows.empty() && table.header.empty() && !parse_number(cells.front())) {
      table.header = cells;
      continue;
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& cell : cells) {
      const auto v = parse_number(cell);
      if (!v) fail(ErrorKind::InvalidInput, "csv line " + std::to_string(line_no) + ": '" + cell + "' is not a number");
      row.push_back(*v);
    }
    if (rows.empty()) width = row.size();
    if (row.size() != width)
      fail(ErrorKind::InvalidInput, "csv line " + std::to_string(line_no) + " has " + std::to_string(row.size()) +
                                        " fields, expected " + std::to_string(width));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) fail(ErrorKind::InvalidInput, "csv has no data rows");
  table.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < width; ++j) table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return table;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::InvalidInput, "cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_text(path)); }

std::string format_csv(const Matrix& values, const std::vector<std::string>& header) {
  std::string out;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j) out += ',';
    out += header[j];
  }
  if (!header.empty()) out += '\n';
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      if (j) out += ',';
      out += format_double(values(i, j));
    }
    out += '\n';
  }
  return out;
}

std::vector<int> parse_labels(const std::string& text) {
  const CsvTable table = parse_csv(text);
  require(table.values.cols() == 1, "labels file must have one value per line");
  std::vector<int> labels(static_cast<std::size_t>(table.values.rows()));
  for (Eigen::Index i = 0; i < table.values.rows(); ++i) {
    const double v = table.values(i, 0);
    if (v != std::floor(v) || v < 1 || v > std::numeric_limits<int>::max())
      fail(ErrorKind::InvalidInput, "labels must be positive integers");
    labels[static_cast<std::size_t>(i)] = static_cast<int>(v);
  }
  return labels;
}

std::vector<int> read_labels(const std::filesystem::path& path) { return parse_labels(read_text(path)); }

std::string format_labels(const std::vector<int>& labels) {
  std::string out;
  for (int l : labels) {
    out += std::to_string(l);
    out += '\n';
  }
  return out;
}

double json_number(const Json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  fail(ErrorKind::InvalidInput, "expected a number in JSON");
}

Json json_number(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (std::isnan(value)) return nullptr;
  return value;
}

Json to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(json_number(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(json_number(v(i)));
  return out;
}

Matrix matrix_from_json(const Json& j) {
  require(j.is_array() && !j.empty(), "expected a nonempty array of rows");
  const std::size_t cols = j.front().size();
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    require(j[i].is_array() && j[i].size() == cols, "matrix rows must be arrays of equal length");
    for (std::size_t c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = json_number(j[i][c]);
  }
  return m;
}

namespace {

void reject_unknown(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  require(j.is_object(), where + " must be a JSON object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& item : j.items())
    if (!keys.count(item.key())) fail(ErrorKind::InvalidInput, where + ": unknown key '" + item.key() + "'");
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorKind::InvalidInput, std::string("bad value for '") + key + "'");
  }
}

Json knn_json(const KnnParams& p) { return Json{{"K", p.neighbors}, {"c", p.cube_side}, {"seed", p.seed}}; }

KnnParams knn_from_json(const Json& j) {
  reject_unknown(j, {"K", "c", "seed"}, "knn");
  KnnParams p;
  p.neighbors = get_or<int>(j, "K", p.neighbors);
  p.cube_side = get_or<double>(j, "c", p.cube_side);
  p.seed = get_or<std::uint64_t>(j, "seed", p.seed);
  return p;
}

}  // namespace

Json to_json(const ClusterModel& model) {
  Json cov{{"kind", to_string(model.covariance.kind)}, {"sigma", model.covariance.sigma}};
  if (model.covariance.kind == CovarianceKind::Knn) cov["knn"] = knn_json(model.covariance.knn);
  return Json{{"means", to_json(model.means)}, {"sizes", model.sizes}, {"covariance", cov}};
}

ClusterModel model_from_json(const Json& j) {
  reject_unknown(j, {"means", "sizes", "covariance"}, "model");
  require(j.contains("means") && j.contains("sizes") && j.contains("covariance"), "model needs means, sizes, covariance");
  ClusterModel model;
  model.means = matrix_from_json(j.at("means"));
  model.sizes = get_or<std::vector<int>>(j, "sizes", {});
  const Json& cov = j.at("covariance");
  reject_unknown(cov, {"kind", "sigma", "knn"}, "covariance");
  model.covariance.kind = covariance_kind_from_string(get_or<std::string>(cov, "kind", "isotropic"));
  model.covariance.sigma = get_or<double>(cov, "sigma", 0.0);
  if (cov.contains("knn")) model.covariance.knn = knn_from_json(cov.at("knn"));
  validate(model);
  return model;
}

Json to_json(const ModelStats& st) {
  return Json{{"mu_diff", json_number(st.mu_diff)}, {"mu_max", json_number(st.mu_max)},
              {"sigma_max", json_number(st.sigma_max)}, {"snr", json_number(st.snr)},
              {"gamma", json_number(st.gamma)}, {"zeta", json_number(st.zeta)},
              {"xi", json_number(st.xi)}, {"rho", json_number(st.rho)},
              {"trace_sigma", json_number(st.trace_sigma)}, {"s", st.s}, {"r", st.r},
              {"N", st.n}, {"d", st.d}, {"k", st.k}, {"n_min", st.n_min}, {"lambdas", to_json(st.lambdas)}};
}

Json to_json(const PerturbationReport& r) {
  return Json{{"spec_norm_P", json_number(r.spec_norm_P)},
              {"inf_norm_P", json_number(r.inf_norm_P)},
              {"centered_spec_norm", json_number(r.centered_spec_norm)},
              {"eigvec_err_max", json_number(r.eigvec_err_max)},
              {"eigvec_err_identity", json_number(r.eigvec_err_identity)},
              {"embed_err_max", json_number(r.embed_err_max)},
              {"bound_rhs_thm1", json_number(r.bound_rhs_thm1)},
              {"bound_rhs_thm2", json_number(r.bound_rhs_thm2)},
              {"ratio_thm1", json_number(r.ratio_thm1)},
              {"ratio_thm2", json_number(r.ratio_thm2)},
              {"weyl_max_dev", json_number(r.weyl_max_dev)},
              {"lambda1", json_number(r.lambda1)}};
}

Json to_json(const ConditionReport& rep) {
  auto one = [](const ConditionCheck& c) {
    return Json{{"holds", c.holds}, {"lhs", json_number(c.lhs)}, {"rhs", json_number(c.rhs)}, {"detail", c.detail}};
  };
  return Json{{"condition1", one(rep.balance)}, {"condition2", one(rep.eigenvalue)}, {"violations", rep.violations}};
}

PhaseGridConfig phase_config_from_json(const Json& j) {
  reject_unknown(j,
                 {"schema_version", "model", "axis", "fixed", "axis_values", "sigma_values", "replicates", "clustering",
                  "embedding_rank", "eigenratio_floor", "debias", "criterion", "seed", "threads"},
                 "phase config");
  if (j.contains("schema_version"))
    require(j.at("schema_version") == kSchemaVersion, "unsupported schema_version");
  require(j.contains("model") && j.contains("axis") && j.contains("axis_values") && j.contains("sigma_values"),
          "phase config needs model, axis, axis_values and sigma_values");
  PhaseGridConfig c;

  const Json& m = j.at("model");
  reject_unknown(m, {"preset", "means", "covariance", "knn"}, "model");
  c.model.preset = get_or<std::string>(m, "preset", "");
  if (m.contains("means")) c.model.means = matrix_from_json(m.at("means"));
  if (m.contains("covariance")) c.model.covariance = covariance_kind_from_string(get_or<std::string>(m, "covariance", ""));
  if (m.contains("knn")) c.model.knn = knn_from_json(m.at("knn"));
  require(c.model.preset.empty() != (c.model.means.size() == 0), "model needs exactly one of preset or means");
  if (!c.model.preset.empty()) simulation_preset(c.model.preset);

  const auto axis = get_or<std::string>(j, "axis", "");
  if (axis == "N")
    c.axis = SweepAxis::N;
  else if (axis == "d")
    c.axis = SweepAxis::D;
  else
    fail(ErrorKind::InvalidInput, "axis must be \"N\" or \"d\"");
  require(j.contains("fixed"), "phase config needs 'fixed' (d for an N sweep, N for a d sweep)");
  c.fixed_value = get_or<int>(j, "fixed", 0);
  c.axis_values = get_or<std::vector<int>>(j, "axis_values", {});
  c.sigma_values = get_or<std::vector<double>>(j, "sigma_values", {});
  c.replicates = get_or<int>(j, "replicates", c.replicates);
  c.clustering = get_or<std::string>(j, "clustering", c.clustering);
  if (j.contains("embedding_rank")) {
    const Json& r = j.at("embedding_rank");
    if (r.is_number_integer()) {
      c.rank = {RankMode::Fixed, r.get<int>()};
    } else if (r == "auto" || r == "auto-eigenratio") {
      c.rank = {RankMode::AutoEigenratio, 0};
    } else if (r == "model-rank") {
      c.rank = {RankMode::ModelRank, 0};
    } else {
      fail(ErrorKind::InvalidInput, "embedding_rank must be an integer, \"auto\" or \"model-rank\"");
    }
  }
  c.eigenratio_floor = get_or<double>(j, "eigenratio_floor", c.eigenratio_floor);
  c.debias = get_or<bool>(j, "debias", c.debias);
  const auto criterion = get_or<std::string>(j, "criterion", "agreement");
  if (criterion == "agreement")
    c.criterion = RecoveryCriterion::Agreement;
  else if (criterion == "pgr")
    c.criterion = RecoveryCriterion::Pgr;
  else
    fail(ErrorKind::InvalidInput, "criterion must be \"agreement\" or \"pgr\"");
  c.base_seed = get_or<std::uint64_t>(j, "seed", c.base_seed);
  c.threads = get_or<int>(j, "threads", c.threads);
  validate(c);
  return c;
}

Json to_json(const PhaseGridConfig& c) {
  Json model = Json::object();
  if (!c.model.preset.empty()) {
    model["preset"] = c.model.preset;
  } else {
    model["means"] = to_json(c.model.means);
    model["covariance"] = to_string(c.model.covariance);
  }
  if (c.model.covariance == CovarianceKind::Knn || c.model.knn.seed != 0) model["knn"] = knn_json(c.model.knn);
  Json rank;
  switch (c.rank.mode) {
    case RankMode::Fixed: rank = c.rank.value; break;
    case RankMode::ModelRank: rank = "model-rank"; break;
    case RankMode::AutoEigenratio: rank = "auto"; break;
  }
  return Json{{"schema_version", kSchemaVersion},
              {"model", model},
              {"axis", c.axis == SweepAxis::N ? "N" : "d"},
              {"fixed", c.fixed_value},
              {"axis_values", c.axis_values},
              {"sigma_values", c.sigma_values},
              {"replicates", c.replicates},
              {"clustering", c.clustering},
              {"embedding_rank", rank},
              {"eigenratio_floor", c.eigenratio_floor},
              {"debias", c.debias},
              {"criterion", c.criterion == RecoveryCriterion::Agreement ? "agreement" : "pgr"},
              {"seed", c.base_seed},
              {"threads", c.threads}};
}

Json to_json(const PhaseGridResult& r) {
  return Json{{"schema_version", kSchemaVersion},
              {"config", to_json(r.config)},
              {"seed", r.config.base_seed},
              {"fractions", to_json(r.fractions)},
              {"snr", to_json(r.snr_values)},
              {"recovered", r.recovered},
              {"failures", r.failures},
              {"unreliable", r.unreliable},
              {"wall_time", r.wall_time}};
}

Json to_json(const BoundaryFit& fit) {
  Json crossings = Json::array();
  for (const auto& c : fit.crossings)
    crossings.push_back(Json{{"column", c.column}, {"x", c.x}, {"log_snr", c.log_snr}});
  return Json{{"schema_version", kSchemaVersion}, {"slope", fit.slope},
              {"intercept", fit.intercept},         {"r_squared", fit.r_squared},
              {"transform", fit.transform},         {"crossing_points", crossings},
              {"excluded_columns", fit.excluded_columns}};
}

std::string format_fractions_csv(const PhaseGridResult& result) {
  std::vector<std::string> header{"sigma"};
  for (int v : result.config.axis_values) header.push_back(std::to_string(v));
  Matrix body(result.fractions.rows(), result.fractions.cols() + 1);
  for (Eigen::Index s = 0; s < body.rows(); ++s) body(s, 0) = result.config.sigma_values[static_cast<std::size_t>(s)];
  body.rightCols(result.fractions.cols()) = result.fractions;
  return format_csv(body, header);
}

PhaseGridResult fractions_from_csv(const CsvTable& table, const PhaseGridConfig& config) {
  require(table.values.cols() >= 2, "fractions csv needs a sigma column and at least one axis column");
  PhaseGridConfig c = config;
  c.sigma_values.clear();
  for (Eigen::Index s = 0; s < table.values.rows(); ++s) c.sigma_values.push_back(table.values(s, 0));
  if (table.header.size() == static_cast<std::size_t>(table.values.cols())) {
    c.axis_values.clear();
    for (std::size_t a = 1; a < table.header.size(); ++a) {
      const auto v = parse_number(table.header[a]);
      require(v.has_value() && *v >= 1 && *v == std::floor(*v), "fractions csv header must hold integer axis values");
      c.axis_values.push_back(static_cast<int>(*v));
    }
  }
  require(c.axis_values.size() == static_cast<std::size_t>(table.values.cols() - 1),
          "fractions csv columns do not match the axis values");
  PhaseGridResult r;
  r.config = c;
  r.fractions = table.values.rightCols(table.values.cols() - 1);
  for (Eigen::Index i = 0; i < r.fractions.size(); ++i)
    require(r.fractions.data()[i] >= 0.0 && r.fractions.data()[i] <= 1.0, "fractions must lie in [0, 1]");
  r.snr_values = grid_snr(c);
  return r;
}

}  // namespace mdsr::io
