#pragma once

#include <stdexcept>
#include <string>

#include "ccplan/reformulate.hpp"

namespace ccplan {

class ScenarioParseError : public std::runtime_error {
 public:
  ScenarioParseError(std::string source, int line, std::string field, const std::string& msg);
  const std::string& source() const { return source_; }
  int line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  std::string source_;
  int line_;
  std::string field_;
};

/// Scenario text format: "[section]" headers and "key = value" lines, '#'
/// comments. Sections:
///
///   [system]       name, model (cwh | matrix), dt, horizon,
///                  cwh: mass, mu, radius, planar;  matrix: A, B
///   [inputs]       lower, upper                    (per-step bounds)
///   [disturbance]  type (gaussian | cauchy), sigma | sigma_diag, gamma
///   [constraints]  separation, alpha_terminal, alpha_avoid, alpha_obstacle,
///                  position_rows | position_matrix
///   [vehicle]      x0, and either target_lower/target_upper,
///                  target_center/target_half_width, or repeated
///                  face = <normal...> <bound>       (one section per vehicle)
///   [obstacle]     center, radius                  (optional, repeatable)
///
/// Vectors are whitespace separated; matrix rows are separated by ';'.
Scenario parse_scenario(const std::string& text, const std::string& source = "<scenario>");
Scenario load_scenario(const std::string& path);

/// Text that parse_scenario maps back to an identical Scenario.
std::string serialize_scenario(const Scenario& scn);

}  // namespace ccplan
