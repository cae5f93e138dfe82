#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "cgmm/em.hpp"
#include "cgmm/imputation.hpp"

namespace cgmm {

struct LoadedData {
  Dataset data;
  std::vector<std::string> x_names;
  std::vector<std::string> y_names;
};

/// Reads a CSV with a header row. Columns whose names start with 'x' are
/// covariates and columns starting with 'y' are responses, each kept in file
/// order. Empty, "NA" and "NaN" response cells (case-insensitive) are missing;
/// a missing covariate is an error.
LoadedData read_csv(std::istream& in, const std::string& source = "<stream>");
LoadedData load_csv(const std::string& path);

/// Writes x and y columns; missing responses become empty cells.
void write_csv(std::ostream& out, const Dataset& data, const std::vector<std::string>& x_names,
               const std::vector<std::string>& y_names);
void save_csv(const std::string& path, const Dataset& data, const std::vector<std::string>& x_names,
              const std::vector<std::string>& y_names);

/// Long-format fractional records: row, component, weight, one mean column
/// per response (empty where that response was observed).
void write_fractional_csv(std::ostream& out, const ImputationResult& result,
                          const std::vector<std::string>& y_names);

std::vector<std::string> default_names(char prefix, Index count);

nlohmann::json design_to_json(const DesignSpec& design);
DesignSpec design_from_json(const nlohmann::json& j);

/// Params document tagged "cgmm-params-v1". The fit report fields (trace,
/// BIC, convergence, warnings) are included when `report` is given.
nlohmann::json params_to_json(const CgmmParams& params, const FitReport* report = nullptr);
CgmmParams params_from_json(const nlohmann::json& j);

void save_json(const std::string& path, const nlohmann::json& j);
nlohmann::json load_json(const std::string& path);

}  // namespace cgmm
