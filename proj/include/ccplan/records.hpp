#pragma once

#include <string>

#include "json.hpp"

#include "ccplan/montecarlo.hpp"
#include "ccplan/solver.hpp"

namespace ccplan {

// JSON records exchanged by the command-line tool. Non-finite numbers are
// written as the strings "inf", "-inf" and "nan".

nlohmann::json to_json(const PwaQuantile& pwa);
PwaQuantile pwa_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Solution& sol, const std::vector<CompiledConstraint>& cat,
                       const std::string& scenario_name);
/// Restores inputs, risks, slacks and summary fields (labels are not needed).
Solution solution_from_json(const nlohmann::json& j);

nlohmann::json to_json(const CertificationReport& rep);
nlohmann::json to_json(const McReport& rep);

nlohmann::json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const nlohmann::json& j);

}  // namespace ccplan
