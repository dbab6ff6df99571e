#pragma once

// Declarative scenario files (JSON). Two forms:
//
//  * aggregation example: no "systems"; "coupling.graph", "partition" and
//    "lambda" generate the network and its certificates;
//  * general: named "systems", one "abstractions" entry per network
//    component (in coupling order), each run through the construction
//    pipeline, and "coupling.matrix" (or a graph, coupled as w = -L y).
//
// Unknown keys are rejected at every level.

#include <optional>
#include <string>
#include <vector>

#include "netabs/casestudy.hpp"
#include "netabs/serialize.hpp"

namespace netabs {

struct SystemDef {
  std::string name;
  NonlinearControlSystem system;
};

struct AbstractionDef {
  std::string name;
  std::string system;  // name of a SystemDef
  Matrix P;
  std::optional<StorageCertificate> certificate;
  std::optional<Matrix> H, What, free_Bhat;
  BhatMode bhat_mode = BhatMode::Free;
  std::optional<double> pi;
  std::optional<LmiSolverOptions> solver;
};

struct CouplingDef {
  std::optional<GraphDescriptor> graph;
  std::optional<Matrix> matrix;
  std::optional<Matrix> abstract_matrix;
};

struct Scenario {
  std::vector<SystemDef> systems;
  std::vector<AbstractionDef> abstractions;
  CouplingDef coupling;
  std::vector<Eigen::Index> partition;
  std::optional<double> lambda;
  std::optional<Vector> mu;
  std::optional<std::vector<Matrix>> output_rows;
  SimulationSettings simulation;
  Tolerance tol;
  int verification_samples = 0;

  bool is_case_study() const { return systems.empty(); }
};

Scenario parse_scenario(const Json& j);
Scenario parse_scenario_text(const std::string& text);
Scenario load_scenario_file(const std::string& path);
Json serialize_scenario(const Scenario& s);

CaseStudyConfig to_case_study_config(const Scenario& s);

/// Runs the construction pipeline for every abstraction entry.
std::vector<AbstractionResult> synthesize_scenario(const Scenario& s);

NetworkRun build_network_run(const Scenario& s);

}  // namespace netabs
