#include "cgmm/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cgmm/errors.hpp"

namespace cgmm {

namespace {

using nlohmann::json;

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

// Splits one logical CSV record; quoted fields may contain commas, doubled
// quotes and newlines, so more lines are pulled from `in` as needed.
bool read_record(std::istream& in, std::vector<std::string>& fields, Index& line_no) {
  fields.clear();
  std::string line;
  if (!std::getline(in, line)) return false;
  ++line_no;
  std::string cur;
  bool quoted = false;
  for (std::size_t k = 0;; ++k) {
    if (k == line.size()) {
      if (quoted) {
        std::string more;
        if (!std::getline(in, more)) throw DataError("line " + std::to_string(line_no) + ": unterminated quote");
        ++line_no;
        cur += '\n';
        line = more;
        k = static_cast<std::size_t>(-1);
        continue;
      }
      break;
    }
    const char c = line[k];
    if (quoted) {
      if (c == '"') {
        if (k + 1 < line.size() && line[k + 1] == '"') {
          cur += '"';
          ++k;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  if (!fields.empty() && !fields.back().empty() && fields.back().back() == '\r') fields.back().pop_back();
  return true;
}

bool is_missing_token(const std::string& cell) {
  const std::string t = lower(trim(cell));
  return t.empty() || t == "na" || t == "nan";
}

double parse_number(const std::string& cell, bool& ok) {
  const std::string t = trim(cell);
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  ok = res.ec == std::errc() && res.ptr == t.data() + t.size() && std::isfinite(v) && !t.empty();
  return v;
}

std::string format_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

Matrix matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) throw DataError("params: " + what + " must be an array of rows");
  const auto rows = static_cast<Index>(j.size());
  const Index cols = rows > 0 ? static_cast<Index>(j.at(0).size()) : 0;
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const json& row = j.at(static_cast<std::size_t>(r));
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) {
      throw DataError("params: " + what + " has ragged rows");
    }
    for (Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

LoadedData read_csv(std::istream& in, const std::string& source) {
  std::vector<std::string> header;
  Index line_no = 0;
  if (!read_record(in, header, line_no)) throw DataError(source + ": empty file (header row required)");
  if (!header.empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0].erase(0, 3);

  LoadedData out;
  std::vector<std::size_t> xcols, ycols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string name = trim(header[c]);
    if (!name.empty() && (name[0] == 'x' || name[0] == 'X')) {
      xcols.push_back(c);
      out.x_names.push_back(name);
    } else if (!name.empty() && (name[0] == 'y' || name[0] == 'Y')) {
      ycols.push_back(c);
      out.y_names.push_back(name);
    } else {
      throw DataError(source + ": column " + std::to_string(c + 1) + " ('" + name +
                      "') is neither a covariate (x...) nor a response (y...)");
    }
  }
  if (xcols.empty()) throw DataError(source + ": no covariate columns (x...)");
  if (ycols.empty()) throw DataError(source + ": no response columns (y...)");

  std::vector<std::vector<double>> xs, ys;
  std::vector<std::vector<bool>> obs;
  std::vector<std::string> fields;
  Index row = 0;
  while (read_record(in, fields, line_no)) {
    if (fields.size() == 1 && trim(fields[0]).empty()) continue;
    ++row;
    const std::string where = source + ": row " + std::to_string(row);
    if (fields.size() != header.size()) {
      throw DataError(where + ": expected " + std::to_string(header.size()) + " fields, found " +
                      std::to_string(fields.size()));
    }
    std::vector<double> xr, yr;
    std::vector<bool> ob;
    bool ok = false;
    for (std::size_t k = 0; k < xcols.size(); ++k) {
      const std::string& cell = fields[xcols[k]];
      if (is_missing_token(cell)) throw DataError(where + ", column " + out.x_names[k] + ": missing covariate");
      xr.push_back(parse_number(cell, ok));
      if (!ok) throw DataError(where + ", column " + out.x_names[k] + ": non-numeric value '" + cell + "'");
    }
    for (std::size_t k = 0; k < ycols.size(); ++k) {
      const std::string& cell = fields[ycols[k]];
      if (is_missing_token(cell)) {
        yr.push_back(std::nan(""));
        ob.push_back(false);
        continue;
      }
      yr.push_back(parse_number(cell, ok));
      if (!ok) throw DataError(where + ", column " + out.y_names[k] + ": non-numeric value '" + cell + "'");
      ob.push_back(true);
    }
    xs.push_back(std::move(xr));
    ys.push_back(std::move(yr));
    obs.push_back(std::move(ob));
  }
  if (xs.empty()) throw DataError(source + ": no data rows");
  const auto n = static_cast<Index>(xs.size());
  const auto q = static_cast<Index>(xcols.size());
  const auto p = static_cast<Index>(ycols.size());
  out.data.x.resize(n, q);
  out.data.y.resize(n, p);
  out.data.delta.resize(n, p);
  for (Index i = 0; i < n; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    for (Index j = 0; j < q; ++j) out.data.x(i, j) = xs[ii][static_cast<std::size_t>(j)];
    for (Index j = 0; j < p; ++j) {
      out.data.y(i, j) = ys[ii][static_cast<std::size_t>(j)];
      out.data.delta(i, j) = obs[ii][static_cast<std::size_t>(j)];
    }
  }
  out.data.validate();
  return out;
}

LoadedData load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_csv(in, path);
}

void write_csv(std::ostream& out, const Dataset& data, const std::vector<std::string>& x_names,
               const std::vector<std::string>& y_names) {
  if (static_cast<Index>(x_names.size()) != data.q() || static_cast<Index>(y_names.size()) != data.p()) {
    throw UsageError("column name count does not match data");
  }
  std::vector<std::string> header = x_names;
  header.insert(header.end(), y_names.begin(), y_names.end());
  for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << quote_if_needed(header[k]);
  out << "\n";
  for (Index i = 0; i < data.n(); ++i) {
    for (Index j = 0; j < data.q(); ++j) out << (j ? "," : "") << format_number(data.x(i, j));
    for (Index j = 0; j < data.p(); ++j) {
      out << ",";
      if (data.delta(i, j)) out << format_number(data.y(i, j));
    }
    out << "\n";
  }
}

void save_csv(const std::string& path, const Dataset& data, const std::vector<std::string>& x_names,
              const std::vector<std::string>& y_names) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  write_csv(out, data, x_names, y_names);
}

void write_fractional_csv(std::ostream& out, const ImputationResult& result,
                          const std::vector<std::string>& y_names) {
  out << "row,component,weight";
  for (const auto& name : y_names) out << "," << quote_if_needed(name);
  out << "\n";
  for (const auto& rec : result.fractional) {
    for (Index g = 0; g < rec.weights.size(); ++g) {
      out << rec.row + 1 << "," << g + 1 << "," << format_number(rec.weights(g));
      std::vector<std::string> cells(y_names.size());
      for (std::size_t k = 0; k < rec.missing.size(); ++k) {
        cells[static_cast<std::size_t>(rec.missing[k])] = format_number(rec.means(g, static_cast<Index>(k)));
      }
      for (const auto& c : cells) out << "," << c;
      out << "\n";
    }
  }
}

std::vector<std::string> default_names(char prefix, Index count) {
  std::vector<std::string> out;
  for (Index k = 1; k <= count; ++k) out.push_back(std::string(1, prefix) + std::to_string(k));
  return out;
}

nlohmann::json design_to_json(const DesignSpec& design) {
  return json{{"gate_covariates", design.gate_covariates},
              {"mean_covariates", design.mean_covariates},
              {"gate_intercept", design.gate_intercept},
              {"mean_intercept", design.mean_intercept}};
}

DesignSpec design_from_json(const nlohmann::json& j) {
  DesignSpec d;
  d.gate_covariates = j.at("gate_covariates").get<IndexList>();
  d.mean_covariates = j.at("mean_covariates").get<IndexList>();
  d.gate_intercept = j.at("gate_intercept").get<bool>();
  d.mean_intercept = j.at("mean_intercept").get<bool>();
  return d;
}

nlohmann::json params_to_json(const CgmmParams& params, const FitReport* report) {
  json j;
  j["version"] = "cgmm-params-v1";
  j["G"] = params.G();
  j["p"] = params.p();
  j["design"] = design_to_json(params.design);
  j["alpha"] = matrix_to_json(params.alpha);
  j["B"] = json::array();
  j["Sigma"] = json::array();
  for (Index g = 0; g < params.G(); ++g) {
    j["B"].push_back(matrix_to_json(params.B[static_cast<std::size_t>(g)]));
    j["Sigma"].push_back(matrix_to_json(params.Sigma[static_cast<std::size_t>(g)]));
  }
  if (report) {
    j["loglik"] = report->loglik();
    j["bic"] = report->bic;
    j["converged"] = report->converged;
    j["iterations"] = report->n_iter;
    j["loglik_trace"] = report->loglik_trace;
    j["warnings"] = report->warnings;
  }
  return j;
}

CgmmParams params_from_json(const nlohmann::json& j) {
  try {
    if (j.value("version", std::string()) != "cgmm-params-v1") {
      throw DataError("params: unsupported or missing version (expected cgmm-params-v1)");
    }
    CgmmParams params;
    params.design = design_from_json(j.at("design"));
    params.alpha = matrix_from_json(j.at("alpha"), "alpha");
    const auto G = j.at("G").get<Index>();
    if (static_cast<Index>(j.at("B").size()) != G || static_cast<Index>(j.at("Sigma").size()) != G) {
      throw DataError("params: B and Sigma must have G entries");
    }
    for (Index g = 0; g < G; ++g) {
      params.B.push_back(matrix_from_json(j.at("B").at(static_cast<std::size_t>(g)), "B"));
      params.Sigma.push_back(matrix_from_json(j.at("Sigma").at(static_cast<std::size_t>(g)), "Sigma"));
    }
    params.validate();
    return params;
  } catch (const json::exception& e) {
    throw DataError(std::string("params: ") + e.what());
  }
}

void save_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

}  // namespace cgmm
