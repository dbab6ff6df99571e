#include "netabs/serialize.hpp"

#include <cmath>
#include <limits>
#include <set>

namespace netabs {

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::BadScenario, what); }

const char* kind_name(NonlinearityKind k) {
  switch (k) {
    case NonlinearityKind::Zero: return "zero";
    case NonlinearityKind::Linear: return "linear";
    case NonlinearityKind::Saturation: return "saturation";
    case NonlinearityKind::Tanh: return "tanh";
    case NonlinearityKind::Tabulated: return "tabulated";
  }
  return "zero";
}

Json optional_matrix(const Matrix& M) { return M.size() == 0 && M.rows() == 0 ? Json(nullptr) : matrix_to_json(M); }

}  // namespace

Json number_to_json(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return nullptr;
  return v;
}

double number_from_json(const Json& j, const std::string& what) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  bad(what + " must be a number");
}

Json matrix_to_json(const Matrix& M) {
  if (M.size() == 0 && (M.rows() > 0 || M.cols() > 0)) return Json{{"shape", {M.rows(), M.cols()}}};
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index k = 0; k < M.cols(); ++k) row.push_back(number_to_json(M(i, k)));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const Json& j, const std::string& what) {
  if (j.is_number()) return Matrix::Constant(1, 1, j.get<double>());
  if (j.is_object()) {
    require_keys(j, {"shape"}, what);
    const Json& sh = j.contains("shape") ? j["shape"] : Json();
    if (!sh.is_array() || sh.size() != 2 || !sh[0].is_number_integer() || !sh[1].is_number_integer() ||
        sh[0].get<long long>() < 0 || sh[1].get<long long>() < 0) {
      bad(what + ".shape must be [rows, cols]");
    }
    const auto r = sh[0].get<Eigen::Index>(), c = sh[1].get<Eigen::Index>();
    if (r > 0 && c > 0) bad(what + ": the shape form is only for empty matrices");
    return Matrix(r, c);
  }
  if (!j.is_array()) bad(what + " must be a nested array");
  const auto r = static_cast<Eigen::Index>(j.size());
  if (r == 0) return Matrix(0, 0);
  if (!j[0].is_array()) bad(what + " must be a nested array of rows");
  const auto c = static_cast<Eigen::Index>(j[0].size());
  Matrix M(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    const Json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != c) bad(what + " rows must have equal length");
    for (Eigen::Index k = 0; k < c; ++k) M(i, k) = number_from_json(row[static_cast<std::size_t>(k)], what);
  }
  return M;
}

Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number_to_json(v(i)));
  return out;
}

Vector vector_from_json(const Json& j, const std::string& what) {
  if (!j.is_array()) bad(what + " must be an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number_from_json(j[i], what);
  return v;
}

void require_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& what) {
  if (!j.is_object()) bad(what + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) bad("unknown key '" + key + "' in " + what);
  }
}

// ---------------------------------------------------------------------------

Json to_json(const SlopeRestrictedFunction& phi) {
  Json j;
  j["kind"] = kind_name(phi.kind());
  if (phi.kind() == NonlinearityKind::Linear || phi.kind() == NonlinearityKind::Saturation ||
      phi.kind() == NonlinearityKind::Tanh) {
    j["parameter"] = phi.parameter();
  }
  if (phi.kind() == NonlinearityKind::Tabulated) {
    Json bps = Json::array();
    for (const auto& [r, v] : phi.breakpoints()) bps.push_back({r, v});
    j["breakpoints"] = bps;
  }
  if (phi.shift() != 0.0) j["shift"] = phi.shift();
  if (phi.kind() != NonlinearityKind::Zero) {
    j["bounds"] = {number_to_json(phi.slope_lower()), number_to_json(phi.slope_upper())};
  }
  return j;
}

SlopeRestrictedFunction nonlinearity_from_json(const Json& j) {
  require_keys(j, {"kind", "parameter", "breakpoints", "shift", "bounds"}, "phi");
  if (!j.contains("kind") || !j["kind"].is_string()) bad("phi.kind is required");
  const auto kind = j["kind"].get<std::string>();
  auto param = [&]() {
    if (!j.contains("parameter")) bad("phi.parameter is required for kind " + kind);
    return number_from_json(j["parameter"], "phi.parameter");
  };
  SlopeRestrictedFunction f = SlopeRestrictedFunction::zero();
  if (kind == "zero") {
    return f;
  } else if (kind == "linear") {
    f = SlopeRestrictedFunction::linear(param());
  } else if (kind == "saturation") {
    f = SlopeRestrictedFunction::saturation(param());
  } else if (kind == "tanh") {
    f = SlopeRestrictedFunction::tanh_like(param());
  } else if (kind == "tabulated") {
    if (!j.contains("breakpoints") || !j["breakpoints"].is_array()) bad("phi.breakpoints is required");
    std::vector<std::pair<double, double>> bps;
    for (const auto& bp : j["breakpoints"]) {
      if (!bp.is_array() || bp.size() != 2) bad("phi.breakpoints entries must be [r, value]");
      bps.emplace_back(number_from_json(bp[0], "breakpoint"), number_from_json(bp[1], "breakpoint"));
    }
    f = SlopeRestrictedFunction::tabulated(std::move(bps));
  } else {
    bad("unknown phi.kind '" + kind + "'");
  }
  if (j.contains("shift")) f = f.with_shift(number_from_json(j["shift"], "phi.shift"));
  if (j.contains("bounds")) {
    const Json& b = j["bounds"];
    if (!b.is_array() || b.size() != 2) bad("phi.bounds must be [a, b]");
    f = f.with_bounds(number_from_json(b[0], "phi.bounds"), number_from_json(b[1], "phi.bounds"));
  }
  return f;
}

Json to_json(const NonlinearControlSystem& sys) {
  Json j;
  j["A"] = matrix_to_json(sys.A);
  j["B"] = matrix_to_json(sys.B);
  j["C1"] = matrix_to_json(sys.C1);
  j["C2"] = matrix_to_json(sys.C2);
  j["D"] = matrix_to_json(sys.D);
  const bool e = sys.E.size() > 0 && max_abs(sys.E) > 0.0;
  const bool f = sys.F.size() > 0 && max_abs(sys.F) > 0.0;
  if (e || f || !sys.phi.is_zero()) {
    j["E"] = matrix_to_json(sys.E);
    j["F"] = matrix_to_json(sys.F);
  }
  if (!sys.phi.is_zero()) j["phi"] = to_json(sys.phi);
  return j;
}

NonlinearControlSystem system_from_json(const Json& j) {
  require_keys(j, {"A", "B", "C1", "C2", "D", "E", "F", "phi"}, "system");
  for (const char* k : {"A", "B", "C1", "C2", "D"}) {
    if (!j.contains(k)) bad(std::string("system.") + k + " is required");
  }
  NonlinearControlSystem sys;
  sys.A = matrix_from_json(j["A"], "A");
  const auto n = sys.A.rows();
  auto widen_rows = [&](Matrix M) { return M.size() == 0 && M.rows() == 0 ? Matrix(Matrix::Zero(0, n)) : M; };
  auto widen_cols = [&](Matrix M) { return M.size() == 0 && M.cols() == 0 ? Matrix(Matrix::Zero(n, 0)) : M; };
  sys.B = widen_cols(matrix_from_json(j["B"], "B"));
  sys.C1 = widen_rows(matrix_from_json(j["C1"], "C1"));
  sys.C2 = widen_rows(matrix_from_json(j["C2"], "C2"));
  sys.D = widen_cols(matrix_from_json(j["D"], "D"));
  sys.E = j.contains("E") ? matrix_from_json(j["E"], "E") : Matrix::Zero(n, 1);
  sys.F = j.contains("F") ? matrix_from_json(j["F"], "F") : Matrix::Zero(1, n);
  if (j.contains("phi")) sys.phi = nonlinearity_from_json(j["phi"]);
  try {
    sys.validate();
  } catch (const Error& e) {
    bad(std::string("invalid system: ") + e.what());
  }
  return sys;
}

Json to_json(const StorageCertificate& c) {
  Json j;
  j["Mhat"] = matrix_to_json(c.Mhat);
  j["K"] = matrix_to_json(c.K);
  j["Z"] = matrix_to_json(c.Z);
  j["W"] = matrix_to_json(c.W);
  j["X11"] = matrix_to_json(c.X11);
  j["X12"] = matrix_to_json(c.X12);
  j["X21"] = matrix_to_json(c.X21);
  j["X22"] = matrix_to_json(c.X22);
  j["kappa_hat"] = c.kappa_hat;
  j["pi"] = c.pi;
  const std::pair<const char*, const Matrix*> optional[] = {{"L1", &c.L1},     {"L2", &c.L2}, {"P", &c.P},
                                                            {"Q", &c.Q},       {"H", &c.H},   {"What", &c.What},
                                                            {"Rtilde", &c.Rtilde}};
  for (const auto& [key, M] : optional) {
    const Json v = optional_matrix(*M);
    if (!v.is_null()) j[key] = v;
  }
  return j;
}

StorageCertificate certificate_from_json(const Json& j) {
  require_keys(j, {"Mhat", "K", "Z", "W", "X11", "X12", "X21", "X22", "kappa_hat", "pi", "L1", "L2", "P", "Q", "H",
                   "What", "Rtilde"},
               "certificate");
  for (const char* k : {"Mhat", "K", "Z", "W", "X11", "X12", "X21", "X22", "kappa_hat"}) {
    if (!j.contains(k)) bad(std::string("certificate.") + k + " is required");
  }
  StorageCertificate c;
  c.Mhat = matrix_from_json(j["Mhat"], "Mhat");
  c.K = matrix_from_json(j["K"], "K");
  c.Z = matrix_from_json(j["Z"], "Z");
  c.W = matrix_from_json(j["W"], "W");
  c.X11 = matrix_from_json(j["X11"], "X11");
  c.X12 = matrix_from_json(j["X12"], "X12");
  c.X21 = matrix_from_json(j["X21"], "X21");
  c.X22 = matrix_from_json(j["X22"], "X22");
  c.kappa_hat = number_from_json(j["kappa_hat"], "kappa_hat");
  c.pi = j.contains("pi") ? number_from_json(j["pi"], "pi") : c.kappa_hat / 2.0;
  const std::pair<const char*, Matrix*> optional[] = {{"L1", &c.L1}, {"L2", &c.L2},     {"P", &c.P},
                                                      {"Q", &c.Q},   {"H", &c.H},       {"What", &c.What},
                                                      {"Rtilde", &c.Rtilde}};
  for (const auto& [key, M] : optional) {
    if (j.contains(key)) *M = matrix_from_json(j[key], key);
  }
  return c;
}

// ---------------------------------------------------------------------------

Json to_json(const VerificationReport& report) {
  Json arr = Json::array();
  for (const auto& e : report.entries) {
    Json j;
    j["check"] = e.check;
    j["margin"] = number_to_json(e.margin);
    j["tol"] = number_to_json(e.tol);
    j["passed"] = e.passed;
    if (e.witness) {
      Json w = Json::array();
      for (double v : *e.witness) w.push_back(number_to_json(v));
      j["witness"] = w;
    } else {
      j["witness"] = nullptr;
    }
    arr.push_back(std::move(j));
  }
  return arr;
}

Json to_json(const ComparisonFunctions& cf) {
  return Json{{"alpha_coeff", number_to_json(cf.alpha_coeff)},
              {"eta_coeff", number_to_json(cf.eta_coeff)},
              {"rho_coeff", number_to_json(cf.rho_coeff)}};
}

Json to_json(const AbstractionResult& r) {
  Json j;
  j["abstract_system"] = to_json(r.abstract_system);
  j["certificate"] = to_json(r.certificate);
  Json log = Json::array();
  for (const auto& e : r.construction_log) log.push_back({{"step", e.step}, {"residual", number_to_json(e.residual)}});
  j["construction_log"] = log;
  j["warnings"] = r.warnings;
  if (r.behavior) {
    j["behavior"] = {{"Phat", matrix_to_json(r.behavior->Phat)},
                     {"G", matrix_to_json(r.behavior->G)},
                     {"T", matrix_to_json(r.behavior->T)},
                     {"Bhat", matrix_to_json(r.behavior->Bhat)},
                     {"residual", r.behavior->residual},
                     {"trajectory_gap", r.behavior->trajectory_gap}};
  }
  return j;
}

Json to_json(const CompositionCertificate& cc) {
  Json j;
  j["mu"] = vector_to_json(cc.mu);
  j["Mhat_coupling"] = matrix_to_json(cc.Mhat_coupling);
  j["X_assembled"] = matrix_to_json(cc.X_assembled);
  j["W"] = matrix_to_json(cc.W);
  j["What"] = matrix_to_json(cc.What);
  j["H"] = matrix_to_json(cc.H);
  j["condition5_margin"] = number_to_json(cc.condition5_margin);
  j["condition6_residual"] = number_to_json(cc.condition6_residual);
  j["passed"] = cc.passed();
  j["composite_cf"] = to_json(cc.composite_cf);
  return j;
}

Json to_json(const SmallGainRecord& rec) {
  return Json{{"n", rec.n},
              {"lambda", rec.lambda},
              {"dissipativity_margin", number_to_json(rec.dissipativity_margin)},
              {"small_gain_value", number_to_json(rec.small_gain_value)},
              {"spectral_radius", number_to_json(rec.spectral_radius)}};
}

Json run_summary(const RunArtifacts& art) {
  Json j;
  j["certified"] = art.certified();
  Json comps = Json::array();
  for (const auto& r : art.component_reports) comps.push_back(to_json(r));
  j["component_reports"] = comps;
  Json comp = to_json(art.composition);
  comp.erase("X_assembled");
  j["composition"] = comp;
  j["V0"] = art.V0;
  j["uhat_sup"] = art.uhat_sup;
  j["max_error"] = art.max_error;
  j["bound_at_0"] = art.bound.size() > 0 ? number_to_json(art.bound(0)) : Json(nullptr);
  j["bound_violations"] = art.bound_violations;
  j["grid_points"] = art.times.size();
  j["small_gain"] = art.small_gain ? to_json(*art.small_gain) : Json(nullptr);
  return j;
}

}  // namespace netabs
