// netabs: certify, build and simulate network abstractions from scenario files.
//
// Exit status: 0 when every check passes, 2 on a certification failure,
// 1 on bad usage or a malformed scenario.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "netabs/casestudy.hpp"
#include "netabs/plot.hpp"
#include "netabs/scenario.hpp"
#include "netabs/serialize.hpp"

namespace fs = std::filesystem;
using namespace netabs;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kUncertified = 2;

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void emit(const Json& j, const std::string& out_dir, const std::string& file) {
  const std::string text = j.dump(2) + "\n";
  if (out_dir.empty()) {
    std::cout << text;
  } else {
    write_file(fs::path(out_dir) / file, text);
    std::cout << "wrote " << (fs::path(out_dir) / file).string() << "\n";
  }
}

std::vector<Eigen::Index> parse_partition(const std::string& text) {
  std::vector<Eigen::Index> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || v <= 0) throw Error(ErrorCode::BadScenario, "bad partition entry '" + item + "'");
    out.push_back(static_cast<Eigen::Index>(v));
  }
  if (out.empty()) throw Error(ErrorCode::BadScenario, "empty partition");
  return out;
}

/// Error trace, trajectories, plot and summary for a finished run.
void write_run(const RunArtifacts& art, const std::string& out_dir, bool case_study) {
  const fs::path dir(out_dir);
  write_file(dir / "error_trace.csv", art.error_trace_csv());
  write_file(dir / "trajectories" / "concrete_states.csv",
             RunArtifacts::states_csv(art.times, art.concrete_states, "x"));
  write_file(dir / "trajectories" / "abstract_states.csv",
             RunArtifacts::states_csv(art.times, art.abstract_states, "xh"));
  write_file(dir / "trajectories" / "abstract_inputs.csv",
             RunArtifacts::states_csv(art.times, art.abstract_inputs, "uh"));
  write_file(dir / "trajectories" / "concrete_inputs.csv",
             RunArtifacts::states_csv(art.times, art.concrete_inputs, "u"));

  Panel err{"Output error and certified bound", "value", art.times, {}, {}};
  err.series.push_back({"|z - zh|", art.error});
  err.series.push_back({"bound", art.bound});
  Panel states{"Abstract states", "xh", art.times, {}, {}};
  for (Eigen::Index i = 0; i < art.abstract_states.rows(); ++i) {
    states.series.push_back({"xh" + std::to_string(i + 1), art.abstract_states.row(i).transpose()});
  }
  std::vector<Box> boxes;
  if (case_study) {
    states.bands = {{"T1", 1.0, 2.0}, {"T2", 8.0, 9.0}};
    boxes = case_study_boxes();
  }
  write_file(dir / "plot.html", render_html("Network abstraction run", {err, states}, boxes));

  Json summary = run_summary(art);
  summary["abstractions"] = Json::array();
  for (const auto& a : art.abstractions) summary["abstractions"].push_back(to_json(a));
  write_file(dir / "summary.json", summary.dump(2) + "\n");
}

void print_run(const RunArtifacts& art) {
  std::cout << "certified: " << (art.certified() ? "yes" : "no") << "\n"
            << "condition5 margin: " << art.composition.condition5_margin << "\n"
            << "condition6 residual: " << art.composition.condition6_residual << "\n"
            << "max error: " << art.max_error << "\n"
            << "bound(0): " << (art.bound.size() ? art.bound(0) : 0.0) << "\n"
            << "bound violations: " << art.bound_violations << "\n";
  if (art.small_gain) {
    std::cout << "small-gain value: " << art.small_gain->small_gain_value
              << "  dissipativity margin: " << art.small_gain->dissipativity_margin << "\n";
  }
}

int run_certify(const std::string& path, const std::string& out_dir, int samples) {
  const Scenario s = load_scenario_file(path);
  NetworkRun run = build_network_run(s);
  if (samples > 0) run.verification_samples = samples;
  const Vector mu = run.mu.size() ? run.mu : Vector::Ones(static_cast<Eigen::Index>(run.spec.size()));

  Json j;
  bool ok = true;
  Json comps = Json::array();
  for (std::size_t i = 0; i < run.spec.components.size(); ++i) {
    const auto& c = run.spec.components[i];
    VerificationReport rep = check_assumption1(c.system, c.certificate, run.tol);
    if (run.verification_samples > 0) {
      SamplingOptions so;
      so.samples = run.verification_samples;
      so.seed = run.simulation.seed + i;
      rep.merge(verify_dissipation_inequality(c.system, c.abstraction, c.certificate, so, run.tol));
    }
    ok = ok && rep.passed();
    comps.push_back(to_json(rep));
  }
  j["component_reports"] = comps;
  const CompositionCertificate cc = certify_composition(run.spec, mu, run.Mhat, run.tol);
  ok = ok && cc.passed();
  j["composition"] = to_json(cc);
  j["certified"] = ok;
  emit(j, out_dir, "certify.json");
  return ok ? kOk : kUncertified;
}

int run_synthesize(const std::string& path, const std::string& out_dir) {
  const Scenario s = load_scenario_file(path);
  const auto results = synthesize_scenario(s);
  Json arr = Json::array();
  for (const auto& r : results) arr.push_back(to_json(r));
  emit(Json{{"abstractions", arr}}, out_dir, "abstractions.json");
  return kOk;
}

int run_compose(const std::string& path, const std::string& out_dir, int samples) {
  const Scenario s = load_scenario_file(path);
  const NetworkRun run = build_network_run(s);
  const Vector mu = run.mu.size() ? run.mu : Vector::Ones(static_cast<Eigen::Index>(run.spec.size()));
  const CompositionCertificate cc = certify_composition(run.spec, mu, run.Mhat, run.tol);
  Json j{{"composition", to_json(cc)}};
  bool ok = cc.passed();
  if (ok && samples > 0) {
    const VerificationReport rep =
        verify_composite(run.spec, mu, cc.Mhat_coupling, samples, run.simulation.seed, run.tol);
    j["composite_report"] = to_json(rep);
    ok = rep.passed();
  }
  j["certified"] = ok;
  emit(j, out_dir, "composition.json");
  return ok ? kOk : kUncertified;
}

int finish_run(const RunArtifacts& art, const std::string& out_dir, bool case_study) {
  print_run(art);
  if (!out_dir.empty()) {
    write_run(art, out_dir, case_study);
    std::cout << "artifacts in " << out_dir << "\n";
  }
  return art.certified() && art.bound_violations == 0 ? kOk : kUncertified;
}

int run_simulate(const std::string& path, const std::string& out_dir) {
  const Scenario s = load_scenario_file(path);
  RunArtifacts art = run_network(build_network_run(s));
  if (s.is_case_study() && s.coupling.graph->kind == GraphKind::Complete && s.lambda) {
    art.small_gain = small_gain_compare(s.coupling.graph->n, *s.lambda);
  }
  return finish_run(art, out_dir, s.is_case_study());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Certified abstractions of interconnected control systems"};
  app.require_subcommand(1);

  std::string scenario, out_dir;
  int samples = 0;

  auto* certify = app.add_subcommand("certify", "check every component certificate and the composition conditions");
  auto* synthesize = app.add_subcommand("synthesize", "construct the abstractions of a scenario");
  auto* compose = app.add_subcommand("compose", "certify the interconnection of a scenario");
  auto* simulate = app.add_subcommand("simulate", "co-simulate a scenario and evaluate the error bound");
  for (auto* sub : {certify, synthesize, compose, simulate}) {
    sub->add_option("scenario", scenario, "scenario JSON file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory");
  }
  for (auto* sub : {certify, compose}) {
    sub->add_option("--samples", samples, "sampled dissipation checks (0 skips)")->check(CLI::NonNegativeNumber);
  }

  auto* cs = app.add_subcommand("casestudy", "complete-graph consensus network with a block aggregation");
  Eigen::Index n = 9;
  std::string partition = "3,3,3";
  double lambda = 2.0, T = 10.0, dt = 1e-3;
  std::uint64_t seed = 1;
  bool perturbed = false;
  cs->add_option("--n", n, "number of nodes")->check(CLI::Range(2, 1000000));
  cs->add_option("--partition", partition, "block sizes, comma separated");
  cs->add_option("--lambda", lambda, "interface gain")->check(CLI::PositiveNumber);
  cs->add_option("--T", T, "horizon")->check(CLI::PositiveNumber);
  cs->add_option("--dt", dt, "step size")->check(CLI::PositiveNumber);
  cs->add_option("--seed", seed, "seed for the initial-state perturbation");
  cs->add_flag("--perturbed", perturbed, "start with V0 = 1 instead of x0 = P xh0");
  cs->add_option("--samples", samples, "sampled dissipation checks per component")->check(CLI::NonNegativeNumber);
  cs->add_option("--out", out_dir, "output directory");

  auto* sg = app.add_subcommand("smallgain", "compare the dissipativity and small-gain conditions");
  Eigen::Index sg_n = 9;
  double sg_lambda = 2.0;
  sg->add_option("--n", sg_n, "number of nodes")->required()->check(CLI::Range(2, 1000000));
  sg->add_option("--lambda", sg_lambda, "interface gain")->required()->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*certify) return run_certify(scenario, out_dir, samples);
    if (*synthesize) return run_synthesize(scenario, out_dir);
    if (*compose) return run_compose(scenario, out_dir, samples);
    if (*simulate) return run_simulate(scenario, out_dir);
    if (*cs) {
      CaseStudyConfig cfg;
      cfg.graph = GraphDescriptor{GraphKind::Complete, n, {}};
      cfg.partition = parse_partition(partition);
      cfg.lambda = lambda;
      cfg.simulation.T = T;
      cfg.simulation.dt = dt;
      cfg.simulation.seed = seed;
      cfg.simulation.x0_policy = perturbed ? X0Policy::Perturbed : X0Policy::Matched;
      cfg.verification_samples = samples;
      return finish_run(run_case_study(cfg), out_dir, true);
    }
    if (*sg) {
      std::cout << to_json(small_gain_compare(sg_n, sg_lambda)).dump(2) << "\n";
      return kOk;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.code()) {
      case ErrorCode::BadScenario:
      case ErrorCode::BadDescriptor:
      case ErrorCode::DimensionMismatch:
      case ErrorCode::RowMismatch:
      case ErrorCode::NonSquare:
        return kUsage;
      default:
        return kUncertified;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
