#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "drf/problems.h"

namespace drf {
namespace {

using nlohmann::json;

std::string Trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

// Comma separated, double quotes may wrap a field and "" escapes a quote.
std::vector<std::string> SplitCsvLine(const std::string& line, int line_no) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char ch = line[k];
    if (quoted) {
      if (ch == '"' && k + 1 < line.size() && line[k + 1] == '"') {
        field += '"';
        ++k;
      } else if (ch == '"') {
        quoted = false;
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(Trim(field));
      field.clear();
    } else {
      field += ch;
    }
  }
  if (quoted) throw std::runtime_error("line " + std::to_string(line_no) + ": unterminated quote");
  fields.push_back(Trim(field));
  return fields;
}

double ParseNumber(const std::string& text, int line_no, const std::string& column) {
  double value = 0.0;
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw std::runtime_error("line " + std::to_string(line_no) + ": column '" + column +
                             "' is not a finite number: '" + text + "'");
  }
  return value;
}

struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line_numbers;
};

RawTable ReadTable(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  RawTable table;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    auto fields = SplitCsvLine(line, line_no);
    if (table.header.empty()) {
      table.header = std::move(fields);
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw std::runtime_error(path + ": line " + std::to_string(line_no) + " has " +
                               std::to_string(fields.size()) + " fields, header has " +
                               std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(fields));
    table.line_numbers.push_back(line_no);
  }
  if (table.header.empty()) throw std::runtime_error(path + ": empty file");
  return table;
}

int ColumnIndex(const RawTable& table, const std::string& name, const std::string& role) {
  const auto it = std::find(table.header.begin(), table.header.end(), name);
  if (it == table.header.end()) {
    throw std::runtime_error("missing " + role + " column '" + name + "'");
  }
  return int(it - table.header.begin());
}

double BinaryField(const std::string& text, const std::string& positive, int line_no,
                   const std::string& column) {
  if (!positive.empty()) return text == positive ? 1.0 : 0.0;
  return ParseNumber(text, line_no, column);
}

std::string FormatDouble(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

std::vector<double> ToStd(const Vector& v) { return {v.data(), v.data() + v.size()}; }
Vector FromStd(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), Eigen::Index(v.size()));
}

json ReadJson(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

void WriteJson(const std::string& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << doc.dump(2) << '\n';
}

std::string Sibling(const std::string& spec_path, const std::string& name) {
  return (std::filesystem::path(spec_path).parent_path() / name).string();
}

std::string BaseName(const std::string& path) {
  return std::filesystem::path(path).filename().string();
}

}  // namespace

std::vector<std::vector<int>> Monomials(int vars, int degree) {
  std::vector<std::vector<int>> out;
  for (int k = 2; k <= degree; ++k) {
    // Nondecreasing index tuples of length k, in lexicographic order.
    std::vector<int> idx(k, 0);
    if (vars < 1) break;
    while (true) {
      out.push_back(idx);
      int pos = k - 1;
      while (pos >= 0 && idx[pos] == vars - 1) --pos;
      if (pos < 0) break;
      ++idx[pos];
      for (int q = pos + 1; q < k; ++q) idx[q] = idx[pos];
    }
  }
  return out;
}

CsvSchema ParseCsvSchema(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("schema: ") + e.what());
  }
  CsvSchema schema;
  auto get_string = [&](const char* key, bool required) {
    if (!doc.contains(key)) {
      if (required) throw std::runtime_error(std::string("schema: missing key '") + key + "'");
      return std::string();
    }
    if (!doc[key].is_string()) throw std::runtime_error(std::string("schema: '") + key + "' must be a string");
    return doc[key].get<std::string>();
  };
  schema.label = get_string("label", true);
  schema.sensitive = get_string("sensitive", true);
  schema.label_positive = get_string("label_positive", false);
  schema.sensitive_positive = get_string("sensitive_positive", false);
  try {
    if (doc.contains("continuous")) schema.continuous = doc["continuous"].get<std::vector<std::string>>();
    if (doc.contains("categorical")) schema.categorical = doc["categorical"].get<std::vector<std::string>>();
    if (doc.contains("degree")) schema.degree = doc["degree"].get<int>();
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("schema: ") + e.what());
  }
  if (schema.degree < 1) throw std::runtime_error("schema: 'degree' must be >= 1");
  return schema;
}

CsvSchema LoadCsvSchema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return ParseCsvSchema(buf.str());
}

LoadedDataset LoadCsvDataset(const std::string& path, const CsvSchema& schema) {
  const RawTable table = ReadTable(path);
  const int n = int(table.rows.size());
  if (n == 0) throw std::runtime_error(path + ": no data rows");
  const int label_col = ColumnIndex(table, schema.label, "label");
  const int sensitive_col = ColumnIndex(table, schema.sensitive, "sensitive");
  std::vector<int> cont_cols, cat_cols;
  for (const auto& c : schema.continuous) cont_cols.push_back(ColumnIndex(table, c, "continuous"));
  for (const auto& c : schema.categorical) cat_cols.push_back(ColumnIndex(table, c, "categorical"));

  LoadedDataset data;
  data.labels.resize(n);
  data.sensitive.resize(n);
  Eigen::MatrixXd cont(n, cont_cols.size());
  for (int r = 0; r < n; ++r) {
    const auto& row = table.rows[r];
    const int line_no = table.line_numbers[r];
    data.labels[r] = BinaryField(row[label_col], schema.label_positive, line_no, schema.label);
    if (data.labels[r] != 0.0 && data.labels[r] != 1.0) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": label must be 0 or 1");
    }
    data.sensitive[r] =
        BinaryField(row[sensitive_col], schema.sensitive_positive, line_no, schema.sensitive);
    for (std::size_t c = 0; c < cont_cols.size(); ++c) {
      cont(r, c) = ParseNumber(row[cont_cols[c]], line_no, schema.continuous[c]);
    }
  }
  for (Eigen::Index c = 0; c < cont.cols(); ++c) {
    const double lo = cont.col(c).minCoeff();
    const double range = cont.col(c).maxCoeff() - lo;
    if (range > 0) {
      cont.col(c) = (cont.col(c).array() - lo) / range;
    } else {
      cont.col(c).setZero();
    }
  }
  const auto monomials = Monomials(int(cont_cols.size()), schema.degree);
  std::vector<std::vector<std::string>> levels;
  int one_hot = 0;
  for (int col : cat_cols) {
    std::set<std::string> seen;
    for (const auto& row : table.rows) seen.insert(row[col]);
    levels.emplace_back(seen.begin(), seen.end());
    one_hot += int(seen.size());
  }
  const int d = int(cont_cols.size() + monomials.size()) + one_hot;
  if (d == 0) throw std::runtime_error("schema selects no feature columns");
  data.features.resize(n, d);
  int at = 0;
  for (std::size_t c = 0; c < cont_cols.size(); ++c, ++at) {
    data.features.col(at) = cont.col(c);
    data.feature_names.push_back(schema.continuous[c]);
  }
  for (const auto& mono : monomials) {
    Eigen::VectorXd col = Eigen::VectorXd::Ones(n);
    std::string name;
    for (int v : mono) {
      col.array() *= cont.col(v).array();
      name += (name.empty() ? "" : "*") + schema.continuous[v];
    }
    data.features.col(at++) = col;
    data.feature_names.push_back(name);
  }
  for (std::size_t c = 0; c < cat_cols.size(); ++c) {
    for (const auto& level : levels[c]) {
      for (int r = 0; r < n; ++r) data.features(r, at) = table.rows[r][cat_cols[c]] == level;
      data.feature_names.push_back(schema.categorical[c] + "=" + level);
      ++at;
    }
  }
  return data;
}

void WriteMatrixCsv(const std::string& path, const Matrix& data,
                    const std::vector<std::string>& header) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    for (Eigen::Index c = 0; c < data.cols(); ++c) {
      out << (c ? "," : "") << FormatDouble(data(r, c));
    }
    out << '\n';
  }
}

Matrix ReadMatrixCsv(const std::string& path, std::vector<std::string>* header) {
  const RawTable table = ReadTable(path);
  Matrix data(Eigen::Index(table.rows.size()), Eigen::Index(table.header.size()));
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      data(r, c) = ParseNumber(table.rows[r][c], table.line_numbers[r], table.header[c]);
    }
  }
  if (header) *header = table.header;
  return data;
}

namespace {

std::vector<std::string> NumberedHeader(const std::string& stem, Eigen::Index count) {
  std::vector<std::string> header;
  for (Eigen::Index k = 0; k < count; ++k) header.push_back(stem + std::to_string(k));
  return header;
}

}  // namespace

void SaveNewsvendor(const NewsvendorSpec& spec, const std::string& prefix) {
  const std::string csv = prefix + ".csv";
  WriteMatrixCsv(csv, spec.demand, NumberedHeader("demand", spec.d));
  json doc = {{"problem", "newsvendor"},
              {"d", spec.d},
              {"cost", ToStd(spec.cost)},
              {"retail", ToStd(spec.retail)},
              {"salvage", ToStd(spec.salvage)},
              {"backorder", ToStd(spec.backorder)},
              {"demand_mean", ToStd(spec.demand_mean)},
              {"budget", spec.budget},
              {"cvar_level", spec.cvar_level},
              {"cvar_bound", spec.cvar_bound},
              {"tau_interval", {spec.tau.lo, spec.tau.hi}},
              {"samples", BaseName(csv)}};
  WriteJson(prefix + ".json", doc);
}

NewsvendorSpec LoadNewsvendor(const std::string& spec_path) {
  const json doc = ReadJson(spec_path);
  NewsvendorSpec spec;
  try {
    spec.d = doc.at("d").get<int>();
    spec.cost = FromStd(doc.at("cost").get<std::vector<double>>());
    spec.retail = FromStd(doc.at("retail").get<std::vector<double>>());
    spec.salvage = FromStd(doc.at("salvage").get<std::vector<double>>());
    spec.backorder = FromStd(doc.at("backorder").get<std::vector<double>>());
    spec.demand_mean = FromStd(doc.at("demand_mean").get<std::vector<double>>());
    spec.budget = doc.at("budget").get<double>();
    spec.cvar_level = doc.at("cvar_level").get<double>();
    spec.cvar_bound = doc.at("cvar_bound").get<double>();
    const auto tau = doc.at("tau_interval").get<std::vector<double>>();
    if (tau.size() != 2) throw std::runtime_error("tau_interval needs two entries");
    spec.tau = {tau[0], tau[1]};
    spec.demand = ReadMatrixCsv(Sibling(spec_path, doc.at("samples").get<std::string>()));
  } catch (const json::exception& e) {
    throw std::runtime_error(spec_path + ": " + e.what());
  }
  return spec;
}

void SaveParamSelect(const ParamSelectSpec& spec, const std::string& prefix) {
  json files = json::array();
  json means = json::array();
  for (std::size_t i = 0; i < spec.effects.size(); ++i) {
    const std::string csv = prefix + "_metric" + std::to_string(i) + ".csv";
    WriteMatrixCsv(csv, spec.effects[i], NumberedHeader("u", spec.effects[i].cols()));
    files.push_back(BaseName(csv));
    means.push_back(ToStd(spec.means[i]));
  }
  json doc = {{"problem", "param-select"}, {"J", spec.J},          {"L", spec.L},
              {"sigma_sq", spec.sigma_sq}, {"thresholds", spec.thresholds},
              {"means", means},            {"samples", files}};
  WriteJson(prefix + ".json", doc);
}

ParamSelectSpec LoadParamSelect(const std::string& spec_path) {
  const json doc = ReadJson(spec_path);
  ParamSelectSpec spec;
  try {
    spec.J = doc.at("J").get<int>();
    spec.L = doc.at("L").get<int>();
    spec.sigma_sq = doc.value("sigma_sq", 0.0);
    spec.thresholds = doc.at("thresholds").get<std::vector<double>>();
    if (doc.contains("means")) {
      for (const auto& mu : doc["means"]) spec.means.push_back(FromStd(mu.get<std::vector<double>>()));
    }
    for (const auto& file : doc.at("samples")) {
      spec.effects.push_back(ReadMatrixCsv(Sibling(spec_path, file.get<std::string>())));
    }
  } catch (const json::exception& e) {
    throw std::runtime_error(spec_path + ": " + e.what());
  }
  return spec;
}

void SaveFairnessCsv(const FairnessLrSpec& spec, const std::string& prefix) {
  const Eigen::Index d = spec.features.cols();
  Matrix table(spec.features.rows(), d + 2);
  table.leftCols(d) = spec.features;
  table.col(d) = spec.labels;
  table.col(d + 1) = spec.sensitive;
  auto header = NumberedHeader("f", d);
  header.push_back("label");
  header.push_back("sensitive");
  WriteMatrixCsv(prefix + ".csv", table, header);
  json schema = {{"label", "label"},
                 {"sensitive", "sensitive"},
                 {"continuous", NumberedHeader("f", d)},
                 {"categorical", json::array()},
                 {"degree", 1}};
  WriteJson(prefix + ".schema.json", schema);
}

}  // namespace drf
