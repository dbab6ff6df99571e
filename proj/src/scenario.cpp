#include "netabs/scenario.hpp"

#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace netabs {

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::BadScenario, what); }

const char* graph_name(GraphKind k) {
  switch (k) {
    case GraphKind::Complete: return "complete";
    case GraphKind::Path: return "path";
    case GraphKind::Cycle: return "cycle";
    case GraphKind::Explicit: return "explicit";
  }
  return "complete";
}

GraphDescriptor graph_from_json(const Json& j) {
  require_keys(j, {"kind", "n", "adjacency"}, "coupling.graph");
  if (!j.contains("kind") || !j["kind"].is_string()) bad("coupling.graph.kind is required");
  const auto kind = j["kind"].get<std::string>();
  GraphDescriptor g;
  if (kind == "complete") {
    g.kind = GraphKind::Complete;
  } else if (kind == "path") {
    g.kind = GraphKind::Path;
  } else if (kind == "cycle") {
    g.kind = GraphKind::Cycle;
  } else if (kind == "explicit") {
    g.kind = GraphKind::Explicit;
  } else {
    bad("unknown graph kind '" + kind + "'");
  }
  if (g.kind == GraphKind::Explicit) {
    if (!j.contains("adjacency")) bad("an explicit graph needs an adjacency matrix");
    g.adjacency = matrix_from_json(j["adjacency"], "adjacency");
    g.n = g.adjacency.rows();
  } else {
    if (!j.contains("n") || !j["n"].is_number_integer()) bad("coupling.graph.n must be an integer");
    g.n = j["n"].get<Eigen::Index>();
  }
  return g;
}

Json graph_to_json(const GraphDescriptor& g) {
  Json j;
  j["kind"] = graph_name(g.kind);
  if (g.kind == GraphKind::Explicit) {
    j["adjacency"] = matrix_to_json(g.adjacency);
  } else {
    j["n"] = g.n;
  }
  return j;
}

double positive(const Json& j, const std::string& what) {
  const double v = number_from_json(j, what);
  if (!(v > 0.0) || !std::isfinite(v)) bad(what + " must be positive and finite");
  return v;
}

SimulationSettings simulation_from_json(const Json& j) {
  require_keys(j, {"T", "dt", "x0_policy", "perturbation_V0", "seed", "input_schedule", "uhat_bound", "xhat0",
                   "use_half"},
               "simulation");
  SimulationSettings s;
  if (j.contains("T")) s.T = positive(j["T"], "simulation.T");
  if (j.contains("dt")) s.dt = positive(j["dt"], "simulation.dt");
  if (s.dt > s.T) bad("simulation.dt must not exceed simulation.T");
  if (j.contains("x0_policy")) {
    const auto p = j["x0_policy"].get<std::string>();
    if (p == "matched") {
      s.x0_policy = X0Policy::Matched;
    } else if (p == "perturbed") {
      s.x0_policy = X0Policy::Perturbed;
    } else {
      bad("simulation.x0_policy must be 'matched' or 'perturbed'");
    }
  }
  if (j.contains("perturbation_V0")) {
    s.perturbation_V0 = number_from_json(j["perturbation_V0"], "simulation.perturbation_V0");
    if (!(s.perturbation_V0 >= 0.0)) bad("simulation.perturbation_V0 must be nonnegative");
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) bad("simulation.seed must be a nonnegative integer");
    s.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("input_schedule")) {
    if (!j["input_schedule"].is_array()) bad("simulation.input_schedule must be an array");
    for (const auto& e : j["input_schedule"]) {
      require_keys(e, {"t", "value"}, "input_schedule entry");
      if (!e.contains("t") || !e.contains("value")) bad("input_schedule entries need t and value");
      s.input_schedule.emplace_back(number_from_json(e["t"], "input_schedule.t"),
                                    vector_from_json(e["value"], "input_schedule.value"));
    }
  }
  if (j.contains("uhat_bound")) s.uhat_bound = positive(j["uhat_bound"], "simulation.uhat_bound");
  if (j.contains("xhat0")) s.xhat0 = vector_from_json(j["xhat0"], "simulation.xhat0");
  if (j.contains("use_half")) {
    if (!j["use_half"].is_boolean()) bad("simulation.use_half must be a boolean");
    s.use_half = j["use_half"].get<bool>();
  }
  return s;
}

Json simulation_to_json(const SimulationSettings& s) {
  Json j;
  j["T"] = s.T;
  j["dt"] = s.dt;
  j["x0_policy"] = s.x0_policy == X0Policy::Matched ? "matched" : "perturbed";
  j["perturbation_V0"] = s.perturbation_V0;
  j["seed"] = s.seed;
  Json sched = Json::array();
  for (const auto& [t, v] : s.input_schedule) sched.push_back({{"t", t}, {"value", vector_to_json(v)}});
  j["input_schedule"] = sched;
  j["uhat_bound"] = s.uhat_bound;
  if (s.xhat0) j["xhat0"] = vector_to_json(*s.xhat0);
  j["use_half"] = s.use_half;
  return j;
}

AbstractionDef abstraction_from_json(const Json& j) {
  require_keys(j, {"name", "system", "P", "certificate", "options"}, "abstraction");
  if (!j.contains("system") || !j["system"].is_string()) bad("abstraction.system must name a system");
  if (!j.contains("P")) bad("abstraction.P is required");
  AbstractionDef a;
  a.name = j.value("name", std::string{});
  a.system = j["system"].get<std::string>();
  a.P = matrix_from_json(j["P"], "P");
  if (j.contains("certificate")) a.certificate = certificate_from_json(j["certificate"]);
  if (j.contains("options")) {
    const Json& o = j["options"];
    require_keys(o, {"H", "What", "bhat_mode", "free_Bhat", "pi", "solver"}, "abstraction.options");
    if (o.contains("H")) a.H = matrix_from_json(o["H"], "H");
    if (o.contains("What")) a.What = matrix_from_json(o["What"], "What");
    if (o.contains("free_Bhat")) a.free_Bhat = matrix_from_json(o["free_Bhat"], "free_Bhat");
    if (o.contains("pi")) a.pi = positive(o["pi"], "options.pi");
    if (o.contains("bhat_mode")) {
      const auto m = o["bhat_mode"].get<std::string>();
      if (m == "free") {
        a.bhat_mode = BhatMode::Free;
      } else if (m == "behavior") {
        a.bhat_mode = BhatMode::BehaviorPreserving;
      } else {
        bad("options.bhat_mode must be 'free' or 'behavior'");
      }
    }
    if (o.contains("solver")) {
      const Json& so = o["solver"];
      require_keys(so, {"kappa_hat", "max_iters"}, "options.solver");
      LmiSolverOptions opts;
      if (so.contains("kappa_hat")) opts.kappa_hat = positive(so["kappa_hat"], "solver.kappa_hat");
      if (so.contains("max_iters")) {
        if (!so["max_iters"].is_number_integer() || so["max_iters"].get<int>() <= 0) {
          bad("solver.max_iters must be a positive integer");
        }
        opts.max_iters = so["max_iters"].get<int>();
      }
      a.solver = opts;
    }
  }
  return a;
}

Json abstraction_to_json(const AbstractionDef& a) {
  Json j;
  if (!a.name.empty()) j["name"] = a.name;
  j["system"] = a.system;
  j["P"] = matrix_to_json(a.P);
  if (a.certificate) j["certificate"] = to_json(*a.certificate);
  Json o = Json::object();
  if (a.H) o["H"] = matrix_to_json(*a.H);
  if (a.What) o["What"] = matrix_to_json(*a.What);
  if (a.free_Bhat) o["free_Bhat"] = matrix_to_json(*a.free_Bhat);
  if (a.pi) o["pi"] = *a.pi;
  o["bhat_mode"] = a.bhat_mode == BhatMode::Free ? "free" : "behavior";
  if (a.solver) o["solver"] = {{"kappa_hat", a.solver->kappa_hat}, {"max_iters", a.solver->max_iters}};
  j["options"] = o;
  return j;
}

}  // namespace

// ---------------------------------------------------------------------------

Scenario parse_scenario(const Json& j) {
  require_keys(j, {"systems", "abstractions", "coupling", "partition", "lambda", "mu", "output_rows", "simulation",
                   "tolerances", "verification_samples"},
               "scenario");
  Scenario s;
  if (j.contains("systems")) {
    if (!j["systems"].is_array()) bad("systems must be an array");
    for (const auto& e : j["systems"]) {
      if (!e.is_object() || !e.contains("name") || !e["name"].is_string()) bad("every system needs a name");
      Json body = e;
      body.erase("name");
      s.systems.push_back({e["name"].get<std::string>(), system_from_json(body)});
    }
  }
  if (j.contains("abstractions")) {
    if (!j["abstractions"].is_array()) bad("abstractions must be an array");
    for (const auto& e : j["abstractions"]) s.abstractions.push_back(abstraction_from_json(e));
  }
  if (j.contains("coupling")) {
    const Json& c = j["coupling"];
    require_keys(c, {"graph", "matrix", "abstract_matrix"}, "coupling");
    if (c.contains("graph")) s.coupling.graph = graph_from_json(c["graph"]);
    if (c.contains("matrix")) s.coupling.matrix = matrix_from_json(c["matrix"], "coupling.matrix");
    if (c.contains("abstract_matrix")) {
      s.coupling.abstract_matrix = matrix_from_json(c["abstract_matrix"], "coupling.abstract_matrix");
    }
    if (s.coupling.graph && s.coupling.matrix) bad("coupling takes either a graph or a matrix, not both");
  }
  if (j.contains("partition")) {
    if (!j["partition"].is_array()) bad("partition must be an array of block sizes");
    for (const auto& e : j["partition"]) {
      if (!e.is_number_integer() || e.get<long long>() <= 0) bad("partition blocks must be positive integers");
      s.partition.push_back(e.get<Eigen::Index>());
    }
  }
  if (j.contains("lambda")) s.lambda = positive(j["lambda"], "lambda");
  if (j.contains("mu")) {
    s.mu = vector_from_json(j["mu"], "mu");
    if (s.mu->size() > 0 && s.mu->minCoeff() < 0.0) bad("mu must be nonnegative");
  }
  if (j.contains("output_rows")) {
    if (!j["output_rows"].is_array()) bad("output_rows must be an array of matrices");
    std::vector<Matrix> rows;
    for (const auto& e : j["output_rows"]) rows.push_back(matrix_from_json(e, "output_rows"));
    s.output_rows = rows;
  }
  if (j.contains("simulation")) s.simulation = simulation_from_json(j["simulation"]);
  if (j.contains("tolerances")) {
    const Json& t = j["tolerances"];
    require_keys(t, {"definiteness", "rank", "residual"}, "tolerances");
    if (t.contains("definiteness")) s.tol.definiteness = positive(t["definiteness"], "tolerances.definiteness");
    if (t.contains("rank")) s.tol.rank = positive(t["rank"], "tolerances.rank");
    if (t.contains("residual")) s.tol.residual = positive(t["residual"], "tolerances.residual");
    s.tol.validate();
  }
  if (j.contains("verification_samples")) {
    if (!j["verification_samples"].is_number_integer() || j["verification_samples"].get<int>() < 0) {
      bad("verification_samples must be a nonnegative integer");
    }
    s.verification_samples = j["verification_samples"].get<int>();
  }

  // Cross-field invariants.
  if (s.is_case_study()) {
    if (!s.abstractions.empty()) bad("abstractions need systems");
    if (!s.coupling.graph) bad("the aggregation form needs coupling.graph");
    if (s.partition.empty()) bad("the aggregation form needs a partition");
    if (!s.lambda) bad("the aggregation form needs lambda");
    const Eigen::Index n = s.coupling.graph->n;
    if (std::accumulate(s.partition.begin(), s.partition.end(), Eigen::Index{0}) != n) {
      bad("partition must sum to the number of graph nodes");
    }
  } else {
    if (s.abstractions.empty()) bad("systems need at least one abstraction entry");
    std::map<std::string, int> names;
    for (const auto& d : s.systems) {
      if (names[d.name]++) bad("duplicate system name '" + d.name + "'");
    }
    for (const auto& a : s.abstractions) {
      if (!names.count(a.system)) bad("abstraction refers to unknown system '" + a.system + "'");
    }
    if (!s.coupling.graph && !s.coupling.matrix) bad("coupling needs a graph or a matrix");
  }
  return s;
}

Scenario parse_scenario_text(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    bad(std::string("malformed JSON: ") + e.what());
  }
  return parse_scenario(j);
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) bad("cannot open scenario file " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return parse_scenario_text(os.str());
}

Json serialize_scenario(const Scenario& s) {
  Json j;
  if (!s.systems.empty()) {
    Json arr = Json::array();
    for (const auto& d : s.systems) {
      Json body = to_json(d.system);
      body["name"] = d.name;
      arr.push_back(body);
    }
    j["systems"] = arr;
    Json abs = Json::array();
    for (const auto& a : s.abstractions) abs.push_back(abstraction_to_json(a));
    j["abstractions"] = abs;
  }
  Json c = Json::object();
  if (s.coupling.graph) c["graph"] = graph_to_json(*s.coupling.graph);
  if (s.coupling.matrix) c["matrix"] = matrix_to_json(*s.coupling.matrix);
  if (s.coupling.abstract_matrix) c["abstract_matrix"] = matrix_to_json(*s.coupling.abstract_matrix);
  j["coupling"] = c;
  if (!s.partition.empty()) j["partition"] = s.partition;
  if (s.lambda) j["lambda"] = *s.lambda;
  if (s.mu) j["mu"] = vector_to_json(*s.mu);
  if (s.output_rows) {
    Json rows = Json::array();
    for (const auto& r : *s.output_rows) rows.push_back(matrix_to_json(r));
    j["output_rows"] = rows;
  }
  j["simulation"] = simulation_to_json(s.simulation);
  j["tolerances"] = {{"definiteness", s.tol.definiteness}, {"rank", s.tol.rank}, {"residual", s.tol.residual}};
  j["verification_samples"] = s.verification_samples;
  return j;
}

// ---------------------------------------------------------------------------

CaseStudyConfig to_case_study_config(const Scenario& s) {
  if (!s.is_case_study()) bad("scenario is not in the aggregation form");
  CaseStudyConfig c;
  c.graph = *s.coupling.graph;
  c.partition = s.partition;
  c.lambda = *s.lambda;
  c.output_rows = s.output_rows;
  c.mu = s.mu;
  c.simulation = s.simulation;
  c.tol = s.tol;
  c.verification_samples = s.verification_samples;
  return c;
}

std::vector<AbstractionResult> synthesize_scenario(const Scenario& s) {
  if (s.is_case_study()) return build_case_study(to_case_study_config(s)).abstractions;
  std::map<std::string, const NonlinearControlSystem*> by_name;
  for (const auto& d : s.systems) by_name[d.name] = &d.system;
  std::vector<AbstractionResult> out;
  for (const auto& a : s.abstractions) {
    PipelineOptions po;
    po.certificate = a.certificate;
    if (a.solver) po.solver = *a.solver;
    po.pi = a.pi;
    po.H = a.H;
    po.What = a.What;
    po.bhat_mode = a.bhat_mode;
    po.free_Bhat = a.free_Bhat;
    out.push_back(table1_pipeline(*by_name.at(a.system), a.P, po, s.tol));
  }
  return out;
}

NetworkRun build_network_run(const Scenario& s) {
  if (s.is_case_study()) {
    NetworkRun run = build_case_study(to_case_study_config(s));
    if (s.coupling.abstract_matrix) run.Mhat = *s.coupling.abstract_matrix;
    return run;
  }
  NetworkRun run;
  std::map<std::string, const NonlinearControlSystem*> by_name;
  for (const auto& d : s.systems) by_name[d.name] = &d.system;
  run.abstractions = synthesize_scenario(s);
  for (std::size_t i = 0; i < s.abstractions.size(); ++i) {
    const auto& r = run.abstractions[i];
    run.spec.components.push_back(Component{*by_name.at(s.abstractions[i].system), r.abstract_system, r.certificate});
  }
  run.spec.M = s.coupling.matrix ? *s.coupling.matrix : Matrix(-build_laplacian(*s.coupling.graph));
  run.Mhat = s.coupling.abstract_matrix;
  if (s.mu) run.mu = *s.mu;
  run.simulation = s.simulation;
  run.tol = s.tol;
  run.verification_samples = s.verification_samples;
  return run;
}

}  // namespace netabs
