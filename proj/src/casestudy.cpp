#include "netabs/casestudy.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

namespace netabs {

namespace {

std::vector<Vector> split(const Vector& v, const std::vector<Eigen::Index>& sizes) {
  std::vector<Vector> out;
  Eigen::Index at = 0;
  for (auto s : sizes) {
    out.push_back(v.segment(at, s));
    at += s;
  }
  return out;
}

Vector join(const std::vector<Vector>& parts) {
  Eigen::Index total = 0;
  for (const auto& p : parts) total += p.size();
  Vector out(total);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.segment(at, p.size()) = p;
    at += p.size();
  }
  return out;
}

[[noreturn]] void bad_scenario(const std::string& what) { throw Error(ErrorCode::BadScenario, what); }

}  // namespace

// ---------------------------------------------------------------------------

Matrix build_laplacian(const GraphDescriptor& graph) {
  Matrix adj;
  const auto n = graph.kind == GraphKind::Explicit ? graph.adjacency.rows() : graph.n;
  if (n < 2) throw Error(ErrorCode::BadDescriptor, "a graph needs at least two nodes");
  switch (graph.kind) {
    case GraphKind::Complete:
      adj = Matrix::Ones(n, n) - Matrix::Identity(n, n);
      break;
    case GraphKind::Path:
    case GraphKind::Cycle:
      adj = Matrix::Zero(n, n);
      for (Eigen::Index i = 0; i + 1 < n; ++i) adj(i, i + 1) = adj(i + 1, i) = 1.0;
      if (graph.kind == GraphKind::Cycle && n > 2) adj(0, n - 1) = adj(n - 1, 0) = 1.0;
      break;
    case GraphKind::Explicit:
      adj = graph.adjacency;
      if (adj.cols() != n || !all_finite(adj)) throw Error(ErrorCode::BadDescriptor, "adjacency must be square and finite");
      if (graph.n != 0 && graph.n != n) throw Error(ErrorCode::BadDescriptor, "n disagrees with the adjacency size");
      if (max_abs(adj - adj.transpose()) > 0.0) throw Error(ErrorCode::BadDescriptor, "adjacency must be symmetric");
      if (adj.minCoeff() < 0.0) throw Error(ErrorCode::BadDescriptor, "adjacency weights must be nonnegative");
      if (adj.diagonal().cwiseAbs().maxCoeff() > 0.0) throw Error(ErrorCode::BadDescriptor, "adjacency needs a zero diagonal");
      break;
  }
  Matrix L = -adj;
  L.diagonal() += adj.rowwise().sum();
  return L;
}

std::vector<Matrix> default_output_rows(const std::vector<Eigen::Index>& partition) {
  std::vector<Matrix> rows;
  const bool nine = partition == std::vector<Eigen::Index>{3, 3, 3};
  for (std::size_t i = 0; i < partition.size(); ++i) {
    Matrix r = Matrix::Zero(1, partition[i]);
    // coordinates 1, 5, 9 of the stacked state for the 3+3+3 split
    r(0, nine ? static_cast<Eigen::Index>(i) : 0) = 1.0;
    rows.push_back(r);
  }
  return rows;
}

std::vector<std::pair<double, Vector>> default_input_schedule(Eigen::Index dim, double T) {
  if (!(T > 0.0)) bad_scenario("horizon must be positive");
  const double v = 28.0 / T;
  const double q = T / 4.0;
  return {{0.0, Vector::Constant(dim, v)},
          {q, Vector::Zero(dim)},
          {2.0 * q, Vector::Constant(dim, -v)},
          {3.0 * q, Vector::Zero(dim)}};
}

// ---------------------------------------------------------------------------

bool RunArtifacts::certified() const {
  return composition.passed() && std::all_of(component_reports.begin(), component_reports.end(),
                                             [](const VerificationReport& r) { return r.passed(); });
}

std::string RunArtifacts::error_trace_csv() const {
  std::ostringstream os;
  os << std::setprecision(12) << "t,err,bound\n";
  for (Eigen::Index k = 0; k < times.size(); ++k) os << times(k) << ',' << error(k) << ',' << bound(k) << '\n';
  return os.str();
}

std::string RunArtifacts::states_csv(const Vector& times, const Matrix& states, const std::string& prefix) {
  std::ostringstream os;
  os << std::setprecision(12) << 't';
  for (Eigen::Index i = 0; i < states.rows(); ++i) os << ',' << prefix << i + 1;
  os << '\n';
  for (Eigen::Index k = 0; k < times.size(); ++k) {
    os << times(k);
    for (Eigen::Index i = 0; i < states.rows(); ++i) os << ',' << states(i, k);
    os << '\n';
  }
  return os.str();
}

RunArtifacts run_network(const NetworkRun& run) {
  const auto& spec = run.spec;
  const auto& sim = run.simulation;
  const Tolerance& tol = run.tol;
  spec.validate();
  const auto N = spec.size();
  const Vector mu = run.mu.size() > 0 ? run.mu : Vector::Ones(static_cast<Eigen::Index>(N));

  RunArtifacts art;
  art.abstractions = run.abstractions;
  for (std::size_t i = 0; i < N; ++i) {
    const auto& c = spec.components[i];
    VerificationReport rep = check_assumption1(c.system, c.certificate, tol);
    if (run.verification_samples > 0) {
      SamplingOptions so;
      so.samples = run.verification_samples;
      so.seed = sim.seed + i;
      rep.merge(verify_dissipation_inequality(c.system, c.abstraction, c.certificate, so, tol));
    }
    for (const auto& e : rep.entries) {
      if (!e.passed) {
        std::ostringstream os;
        os << "component " << i + 1 << ": " << e.check << " fails (margin " << e.margin << ")";
        throw Error(ErrorCode::ConditionsNotCertified, os.str());
      }
    }
    art.component_reports.push_back(std::move(rep));
  }

  art.composition = certify_composition(spec, mu, run.Mhat, tol);
  if (art.composition.condition5_margin > tol.definiteness) {
    std::ostringstream os;
    os << "condition 5 fails: max eigenvalue " << art.composition.condition5_margin;
    throw Error(ErrorCode::ConditionsNotCertified, os.str());
  }
  if (art.composition.condition6_residual > tol.residual) {
    std::ostringstream os;
    os << "condition 6 fails: residual " << art.composition.condition6_residual;
    throw Error(ErrorCode::ConditionsNotCertified, os.str());
  }
  const Matrix& Mhat = art.composition.Mhat_coupling;
  const ComparisonFunctions& cf = art.composition.composite_cf;

  std::vector<Eigen::Index> n, nh, mh;
  std::vector<Matrix> Pb, C1b, C1hb, Mb;
  for (const auto& c : spec.components) {
    n.push_back(c.system.n());
    nh.push_back(c.abstraction.n());
    mh.push_back(c.abstraction.m());
    Pb.push_back(c.certificate.P);
    C1b.push_back(c.system.C1);
    C1hb.push_back(c.abstraction.C1);
    Mb.push_back(c.certificate.Mhat);
  }
  const Matrix P = block_diagonal(Pb), C1 = block_diagonal(C1b), C1h = block_diagonal(C1hb);
  const Eigen::Index Nx = P.rows(), Nh = P.cols();
  const Eigen::Index Mh = std::accumulate(mh.begin(), mh.end(), Eigen::Index{0});
  const CompositeSimulationFunction V(Pb, Mb, mu, cf);

  // Abstract input.
  auto schedule = sim.input_schedule.empty() ? default_input_schedule(Mh, sim.T) : sim.input_schedule;
  for (const auto& [t, v] : schedule) {
    if (v.size() != Mh) bad_scenario("input schedule entries must match the stacked abstract input size");
    if (v.size() > 0 && v.cwiseAbs().maxCoeff() > sim.uhat_bound + 1e-12) {
      bad_scenario("input schedule leaves the abstract input bound");
    }
  }
  const SignalSpec uh = SignalSpec::piecewise_constant(schedule);
  art.uhat_sup = uh.sup_norm();

  // Initial states.
  const Vector xh0 = sim.xhat0 ? *sim.xhat0 : Vector::Constant(Nh, 1.5);
  if (xh0.size() != Nh) bad_scenario("xhat0 must match the stacked abstract state size");
  Vector x0 = P * xh0;
  if (sim.x0_policy == X0Policy::Perturbed) {
    std::mt19937_64 rng(sim.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Vector d(Nx);
    for (Eigen::Index i = 0; i < Nx; ++i) d(i) = gauss(rng);
    const double vd = V(d, Vector::Zero(Nh));
    if (vd > 0.0) x0 += d * std::sqrt(std::max(sim.perturbation_V0, 0.0) / vd);
  }
  art.V0 = V(x0, xh0);

  auto inputs = [&](double t, const Vector& x, const Vector& xh, Vector& u_all, std::vector<Vector>& us,
                    std::vector<Vector>& ws, std::vector<Vector>& whs, std::vector<Vector>& uhs) {
    const auto xs = split(x, n), xhs = split(xh, nh);
    std::vector<Vector> ys, yhs, ps, phs;
    for (std::size_t i = 0; i < N; ++i) {
      ys.push_back(spec.components[i].system.C2 * xs[i]);
      yhs.push_back(spec.components[i].abstraction.C2 * xhs[i]);
      ps.push_back(Vector(spec.components[i].system.p()));
      phs.push_back(Vector(spec.components[i].abstraction.p()));
    }
    std::vector<Eigen::Index> p, ph;
    for (std::size_t i = 0; i < N; ++i) {
      p.push_back(spec.components[i].system.p());
      ph.push_back(spec.components[i].abstraction.p());
    }
    ws = split(spec.M * join(ys), p);
    whs = split(Mhat * join(yhs), ph);
    uhs = split(uh(t), mh);
    us.clear();
    for (std::size_t i = 0; i < N; ++i) {
      us.push_back(interface_input(spec.components[i].certificate, spec.components[i].system, xs[i], xhs[i], uhs[i]));
    }
    u_all = join(us);
  };

  VectorField f = [&](double t, const Vector& s) {
    const Vector x = s.head(Nx), xh = s.tail(Nh);
    Vector u_all;
    std::vector<Vector> us, ws, whs, uhs;
    inputs(t, x, xh, u_all, us, ws, whs, uhs);
    const auto xs = split(x, n), xhs = split(xh, nh);
    std::vector<Vector> dx, dxh;
    for (std::size_t i = 0; i < N; ++i) {
      dx.push_back(spec.components[i].system.drift(xs[i], us[i], ws[i]));
      dxh.push_back(spec.components[i].abstraction.drift(xhs[i], uhs[i], whs[i]));
    }
    Vector ds(Nx + Nh);
    ds.head(Nx) = join(dx);
    ds.tail(Nh) = join(dxh);
    return ds;
  };

  Vector s0(Nx + Nh);
  s0.head(Nx) = x0;
  s0.tail(Nh) = xh0;
  const Matrix traj = integrate_rk4(f, s0, sim.T, sim.dt);
  art.times = time_grid(sim.T, sim.dt);
  const auto K = traj.cols();
  art.concrete_states = traj.topRows(Nx);
  art.abstract_states = traj.bottomRows(Nh);
  art.abstract_inputs.resize(Mh, K);
  art.error.resize(K);
  art.bound.resize(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    const double t = art.times(k);
    Vector u_all;
    std::vector<Vector> us, ws, whs, uhs;
    inputs(t, art.concrete_states.col(k), art.abstract_states.col(k), u_all, us, ws, whs, uhs);
    if (k == 0) art.concrete_inputs.resize(u_all.size(), K);
    art.concrete_inputs.col(k) = u_all;
    art.abstract_inputs.col(k) = join(uhs);
    art.error(k) = (C1 * art.concrete_states.col(k) - C1h * art.abstract_states.col(k)).norm();
    art.bound(k) = error_bound(cf, art.V0, art.uhat_sup, t, sim.use_half);
    if (art.error(k) > art.bound(k) + kBoundSlack) ++art.bound_violations;
  }
  art.max_error = K > 0 ? art.error.maxCoeff() : 0.0;
  return art;
}

// ---------------------------------------------------------------------------

NetworkRun build_case_study(const CaseStudyConfig& config) {
  if (!(config.lambda > 0.0)) bad_scenario("lambda must be positive");
  if (config.partition.empty()) bad_scenario("partition must be nonempty");
  const Matrix L = build_laplacian(config.graph);
  const Eigen::Index total = std::accumulate(config.partition.begin(), config.partition.end(), Eigen::Index{0});
  if (total != L.rows()) bad_scenario("partition must sum to the number of graph nodes");
  const auto rows = config.output_rows ? *config.output_rows : default_output_rows(config.partition);
  if (rows.size() != config.partition.size()) bad_scenario("one output row block per partition block is required");

  NetworkRun run;
  run.spec.M = -L;
  run.simulation = config.simulation;
  run.tol = config.tol;
  run.verification_samples = config.verification_samples;
  run.mu = config.mu ? *config.mu : Vector::Ones(static_cast<Eigen::Index>(config.partition.size()));

  for (std::size_t i = 0; i < config.partition.size(); ++i) {
    const auto ni = config.partition[i];
    if (ni <= 0) bad_scenario("partition blocks must be positive");
    if (rows[i].cols() != ni) bad_scenario("output rows must match block sizes");
    const Matrix I = Matrix::Identity(ni, ni);
    const auto sys = NonlinearControlSystem::linear(Matrix::Zero(ni, ni), I, rows[i], I, I);

    StorageCertificate cert;
    cert.Mhat = I;
    cert.K = -config.lambda * I;
    cert.L1 = Matrix::Zero(ni, 1);
    cert.Z = I;
    cert.W = I;
    cert.X11 = Matrix::Zero(ni, ni);
    cert.X22 = Matrix::Zero(ni, ni);
    cert.X12 = I;
    cert.X21 = I;
    cert.kappa_hat = 2.0 * config.lambda;
    cert.pi = config.lambda;

    PipelineOptions po;
    po.certificate = cert;
    po.H = ones(ni, 1);
    po.What = ones(ni, 1);
    AbstractionResult res = table1_pipeline(sys, ones(ni, 1), po, config.tol);
    run.spec.components.push_back(Component{sys, res.abstract_system, res.certificate});
    run.abstractions.push_back(std::move(res));
  }
  return run;
}

RunArtifacts run_case_study(const CaseStudyConfig& config) {
  RunArtifacts art = run_network(build_case_study(config));
  if (config.graph.kind == GraphKind::Complete) art.small_gain = small_gain_compare(config.graph.n, config.lambda);
  return art;
}

SmallGainRecord small_gain_compare(Eigen::Index n, double lambda) {
  if (n < 2 || !(lambda > 0.0)) bad_scenario("small-gain comparison needs n >= 2 and lambda > 0");
  const Matrix L = build_laplacian({GraphKind::Complete, n, {}});
  SmallGainRecord rec;
  rec.n = n;
  rec.lambda = lambda;
  Eigen::SelfAdjointEigenSolver<Matrix> es(-L - L.transpose(), Eigen::EigenvaluesOnly);
  rec.dissipativity_margin = es.eigenvalues().maxCoeff();
  Eigen::SelfAdjointEigenSolver<Matrix> el(L, Eigen::EigenvaluesOnly);
  rec.spectral_radius = el.eigenvalues().cwiseAbs().maxCoeff();
  rec.small_gain_value = static_cast<double>(n - 1) / (static_cast<double>(n - 1) + lambda);
  return rec;
}

}  // namespace netabs
