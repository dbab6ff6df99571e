#pragma once

// Network runs end to end: per-component abstraction, composition checks,
// closed-loop co-simulation of the concrete network (driven through the
// interfaces) against the abstract network, and the output error bound
// trace. The aggregation example on graph Laplacians is built in.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "netabs/compose.hpp"
#include "netabs/synthesis.hpp"

namespace netabs {

enum class GraphKind { Complete, Path, Cycle, Explicit };

struct GraphDescriptor {
  GraphKind kind = GraphKind::Complete;
  Eigen::Index n = 0;
  Matrix adjacency;  // Explicit only; symmetric, nonnegative, zero diagonal
};

/// L = diag(A 1) - A for the adjacency of the descriptor. Throws BadDescriptor.
Matrix build_laplacian(const GraphDescriptor& graph);

/// Default external output: for n = 9 split 3+3+3 the selector of
/// coordinates 1, 5, 9; otherwise the first coordinate of every block.
/// Returns the per-block rows (1 x n_i each).
std::vector<Matrix> default_output_rows(const std::vector<Eigen::Index>& partition);

enum class X0Policy { Matched, Perturbed };

struct SimulationSettings {
  double T = 10.0;
  double dt = 1e-3;
  X0Policy x0_policy = X0Policy::Matched;
  double perturbation_V0 = 1.0;
  std::uint64_t seed = 1;
  /// Piecewise-constant abstract input (start time, stacked value); empty means the default schedule.
  std::vector<std::pair<double, Vector>> input_schedule;
  double uhat_bound = 14.0;          // entrywise limit on the abstract input
  std::optional<Vector> xhat0;       // default: 1.5 in every abstract coordinate
  bool use_half = true;
};

/// Steers a consensus-direction abstraction from 1.5 to 8.5 and back:
/// +v, 0, -v, 0 on quarters of [0, T] with v = 28 / T.
std::vector<std::pair<double, Vector>> default_input_schedule(Eigen::Index dim, double T);

struct NetworkRun {
  InterconnectionSpec spec;
  std::vector<AbstractionResult> abstractions;  // optional record of how components were built
  Vector mu;                                    // default ones
  std::optional<Matrix> Mhat;                   // solved when absent
  SimulationSettings simulation;
  Tolerance tol;
  int verification_samples = 0;  // sampled per-component dissipation checks; 0 skips
};

struct SmallGainRecord {
  Eigen::Index n = 0;
  double lambda = 0.0;
  double dissipativity_margin = 0.0;  // max eigenvalue of -L - L^T
  double small_gain_value = 0.0;      // (n - 1) / (n - 1 + lambda)
  double spectral_radius = 0.0;       // of L
};

struct RunArtifacts {
  std::vector<VerificationReport> component_reports;
  std::vector<AbstractionResult> abstractions;
  CompositionCertificate composition;
  Vector times;
  Matrix concrete_states;  // n x K
  Matrix abstract_states;  // nh x K
  Matrix abstract_inputs;  // mh x K
  Matrix concrete_inputs;  // m x K
  Vector error;            // |z - zh|
  Vector bound;
  double V0 = 0.0;
  double uhat_sup = 0.0;
  int bound_violations = 0;
  double max_error = 0.0;
  std::optional<SmallGainRecord> small_gain;

  bool certified() const;
  std::string error_trace_csv() const;
  /// Columns t, then the rows of `states` named prefix1, prefix2, ...
  static std::string states_csv(const Vector& times, const Matrix& states, const std::string& prefix);
};

/// Tolerance above the bound before a grid point counts as a violation.
inline constexpr double kBoundSlack = 1e-9;

/// Certifies the composition (throws ConditionsNotCertified naming the
/// failing condition) then co-simulates and evaluates the bound.
RunArtifacts run_network(const NetworkRun& run);

struct CaseStudyConfig {
  GraphDescriptor graph{GraphKind::Complete, 9, {}};
  std::vector<Eigen::Index> partition{3, 3, 3};
  double lambda = 2.0;
  std::optional<std::vector<Matrix>> output_rows;  // C1 per block
  std::optional<Vector> mu;
  SimulationSettings simulation;
  Tolerance tol;
  int verification_samples = 0;
};

/// Subsystem i: (0, I, C1_i, I, I) with the certificate Mhat = I, K = -lambda I,
/// kappa_hat = 2 lambda, Z = W = I, X11 = X22 = 0, X12 = X21 = I; abstraction
/// by P = 1 with H = What = 1. Coupling w = -L y.
NetworkRun build_case_study(const CaseStudyConfig& config);

RunArtifacts run_case_study(const CaseStudyConfig& config);

SmallGainRecord small_gain_compare(Eigen::Index n, double lambda);

}  // namespace netabs
