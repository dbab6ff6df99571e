#include "netabs/sysmodel.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

namespace netabs {

namespace {

constexpr double kDivergence = 1e12;

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::DimensionMismatch, what);
}

}  // namespace

// ---------------------------------------------------------------------------
// SlopeRestrictedFunction

SlopeRestrictedFunction SlopeRestrictedFunction::zero() {
  SlopeRestrictedFunction f;
  f.kind_ = NonlinearityKind::Zero;
  f.lower_ = 0.0;
  f.upper_ = std::numeric_limits<double>::infinity();
  return f;
}

SlopeRestrictedFunction SlopeRestrictedFunction::linear(double gain) {
  SlopeRestrictedFunction f;
  f.kind_ = NonlinearityKind::Linear;
  f.param_ = gain;
  f.lower_ = gain;
  f.upper_ = gain;
  return f;
}

SlopeRestrictedFunction SlopeRestrictedFunction::saturation(double level) {
  if (!(level > 0.0)) throw Error(ErrorCode::BadDescriptor, "saturation level must be positive");
  SlopeRestrictedFunction f;
  f.kind_ = NonlinearityKind::Saturation;
  f.param_ = level;
  f.lower_ = 0.0;
  f.upper_ = 1.0;
  return f;
}

SlopeRestrictedFunction SlopeRestrictedFunction::tanh_like(double scale) {
  if (!(scale > 0.0)) throw Error(ErrorCode::BadDescriptor, "tanh scale must be positive");
  SlopeRestrictedFunction f;
  f.kind_ = NonlinearityKind::Tanh;
  f.param_ = scale;
  f.lower_ = 0.0;
  f.upper_ = 1.0;
  return f;
}

SlopeRestrictedFunction SlopeRestrictedFunction::tabulated(std::vector<std::pair<double, double>> breakpoints) {
  if (breakpoints.size() < 2) throw Error(ErrorCode::BadDescriptor, "tabulated nonlinearity needs >= 2 breakpoints");
  for (std::size_t k = 1; k < breakpoints.size(); ++k) {
    if (!(breakpoints[k].first > breakpoints[k - 1].first)) {
      throw Error(ErrorCode::BadDescriptor, "tabulated breakpoints must be strictly increasing");
    }
  }
  SlopeRestrictedFunction f;
  f.kind_ = NonlinearityKind::Tabulated;
  f.table_ = std::move(breakpoints);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < f.table_.size(); ++k) {
    const double s = (f.table_[k].second - f.table_[k - 1].second) / (f.table_[k].first - f.table_[k - 1].first);
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  f.lower_ = lo;
  f.upper_ = hi > 0.0 ? hi : std::numeric_limits<double>::infinity();
  return f;
}

double SlopeRestrictedFunction::base(double r) const {
  switch (kind_) {
    case NonlinearityKind::Zero: return 0.0;
    case NonlinearityKind::Linear: return param_ * r;
    case NonlinearityKind::Saturation: return std::clamp(r, -param_, param_);
    case NonlinearityKind::Tanh: return param_ * std::tanh(r / param_);
    case NonlinearityKind::Tabulated: {
      const auto& t = table_;
      std::size_t k = 1;
      if (r >= t.back().first) {
        k = t.size() - 1;
      } else if (r > t.front().first) {
        auto it = std::upper_bound(t.begin(), t.end(), r, [](double v, const auto& bp) { return v < bp.first; });
        k = static_cast<std::size_t>(it - t.begin());
      }
      const auto& [r0, v0] = t[k - 1];
      const auto& [r1, v1] = t[k];
      return v0 + (v1 - v0) * (r - r0) / (r1 - r0);
    }
  }
  return 0.0;
}

double SlopeRestrictedFunction::operator()(double r) const { return base(r) - shift_ * r; }

SlopeRestrictedFunction SlopeRestrictedFunction::with_bounds(double a, double b) const {
  if (!(a <= b)) throw Error(ErrorCode::BadDescriptor, "slope bounds need a <= b");
  if (!(b > 0.0)) throw Error(ErrorCode::BadDescriptor, "slope upper bound must be positive or +inf");
  SlopeRestrictedFunction f = *this;
  f.lower_ = a;
  f.upper_ = b;
  return f;
}

SlopeRestrictedFunction SlopeRestrictedFunction::shifted_by(double a) const {
  SlopeRestrictedFunction f = *this;
  f.shift_ += a;
  f.lower_ -= a;
  f.upper_ -= a;
  if (f.kind_ == NonlinearityKind::Linear && f.param_ == f.shift_) {
    // The nonlinearity is absorbed completely.
    return zero();
  }
  return f;
}

SlopeRestrictedFunction SlopeRestrictedFunction::with_shift(double shift) const {
  SlopeRestrictedFunction f = *this;
  f.shift_ = shift;
  return f;
}

bool SlopeRestrictedFunction::satisfies_bounds(int samples, std::uint64_t seed, double range, double slack) const {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-range, range);
  for (int i = 0; i < samples; ++i) {
    const double v = dist(rng);
    const double w = dist(rng);
    if (v == w) continue;
    const double q = ((*this)(v) - (*this)(w)) / (v - w);
    if (q < lower_ - slack) return false;
    if (!upper_is_infinite() && q > upper_ + slack) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// NonlinearControlSystem

bool NonlinearControlSystem::has_nonlinearity() const {
  return !phi.is_zero() && E.size() > 0 && max_abs(E) > 0.0;
}

void NonlinearControlSystem::validate() const {
  const auto n = A.rows();
  require(A.cols() == n, "A must be square");
  require(n > 0, "state dimension must be positive");
  require(B.rows() == n, "B must have n rows");
  require(C1.cols() == n, "C1 must have n columns");
  require(C2.cols() == n, "C2 must have n columns");
  require(D.rows() == n, "D must have n rows");
  require(E.rows() == n && E.cols() == 1, "E must be n x 1");
  require(F.rows() == 1 && F.cols() == n, "F must be 1 x n");
  for (const Matrix* mat : {&A, &B, &C1, &C2, &D, &E, &F}) {
    require(all_finite(*mat), "system matrices must be finite");
  }
}

Vector NonlinearControlSystem::drift(const Vector& x, const Vector& u, const Vector& w) const {
  Vector dx = A * x;
  if (m() > 0) dx.noalias() += B * u;
  if (p() > 0) dx.noalias() += D * w;
  if (has_nonlinearity()) dx += E.col(0) * phi((F * x)(0));
  return dx;
}

NonlinearControlSystem NonlinearControlSystem::linear(Matrix A, Matrix B, Matrix C1, Matrix C2, Matrix D) {
  NonlinearControlSystem sys;
  const auto n = A.rows();
  sys.A = std::move(A);
  sys.B = std::move(B);
  sys.C1 = std::move(C1);
  sys.C2 = std::move(C2);
  sys.D = std::move(D);
  sys.E = Matrix::Zero(n, 1);
  sys.F = Matrix::Zero(1, n);
  sys.phi = SlopeRestrictedFunction::zero();
  sys.validate();
  return sys;
}

NonlinearControlSystem normalize_slope(const NonlinearControlSystem& sys) {
  const double a = sys.phi.slope_lower();
  if (!std::isfinite(a)) throw Error(ErrorCode::BadDescriptor, "slope normalization needs a finite lower bound");
  if (a == 0.0) return sys;
  NonlinearControlSystem out = sys;
  out.A = sys.A + a * sys.E * sys.F;
  out.phi = sys.phi.shifted_by(a);
  return out;
}

// ---------------------------------------------------------------------------
// SignalSpec

SignalSpec SignalSpec::zero(Eigen::Index dim) {
  SignalSpec s;
  s.kind = SignalKind::Zero;
  s.dim = dim;
  return s;
}

SignalSpec SignalSpec::constant(Vector v) {
  SignalSpec s;
  s.kind = SignalKind::Constant;
  s.dim = v.size();
  s.value = std::move(v);
  return s;
}

SignalSpec SignalSpec::piecewise_constant(std::vector<std::pair<double, Vector>> schedule) {
  if (schedule.empty()) throw Error(ErrorCode::BadDescriptor, "piecewise-constant schedule must be nonempty");
  SignalSpec s;
  s.kind = SignalKind::PiecewiseConstant;
  s.dim = schedule.front().second.size();
  s.schedule = std::move(schedule);
  s.validate();
  return s;
}

SignalSpec SignalSpec::sinusoid(Vector amplitude, Vector frequency, Vector phase) {
  SignalSpec s;
  s.kind = SignalKind::Sinusoid;
  s.dim = amplitude.size();
  s.amplitude = std::move(amplitude);
  s.frequency = std::move(frequency);
  s.phase = std::move(phase);
  s.validate();
  return s;
}

void SignalSpec::validate() const {
  switch (kind) {
    case SignalKind::Zero: break;
    case SignalKind::Constant: require(value.size() == dim, "constant signal dimension"); break;
    case SignalKind::PiecewiseConstant:
      for (std::size_t k = 0; k < schedule.size(); ++k) {
        require(schedule[k].second.size() == dim, "schedule entries must share one dimension");
        if (k > 0 && !(schedule[k].first > schedule[k - 1].first)) {
          throw Error(ErrorCode::BadDescriptor, "schedule times must be strictly increasing");
        }
      }
      break;
    case SignalKind::Sinusoid:
      require(frequency.size() == dim && phase.size() == dim, "sinusoid parameter dimensions");
      break;
  }
}

Vector SignalSpec::operator()(double t) const {
  switch (kind) {
    case SignalKind::Zero: return Vector::Zero(dim);
    case SignalKind::Constant: return value;
    case SignalKind::PiecewiseConstant: {
      const Vector* current = &schedule.front().second;
      for (const auto& [start, v] : schedule) {
        if (t >= start) current = &v;
        else break;
      }
      return *current;
    }
    case SignalKind::Sinusoid: {
      Vector out(dim);
      for (Eigen::Index i = 0; i < dim; ++i) {
        out(i) = amplitude(i) * std::sin(2.0 * std::numbers::pi * frequency(i) * t + phase(i));
      }
      return out;
    }
  }
  return Vector::Zero(dim);
}

double SignalSpec::sup_norm() const {
  switch (kind) {
    case SignalKind::Zero: return 0.0;
    case SignalKind::Constant: return value.norm();
    case SignalKind::PiecewiseConstant: {
      double best = 0.0;
      for (const auto& entry : schedule) best = std::max(best, entry.second.norm());
      return best;
    }
    case SignalKind::Sinusoid:
      // Componentwise amplitudes bound the norm; attained when phases align.
      return amplitude.norm();
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Simulation

Vector time_grid(double horizon, double dt) {
  if (!(dt > 0.0) || !(horizon > 0.0) || dt > horizon * (1.0 + 1e-12)) {
    throw Error(ErrorCode::DimensionMismatch, "need 0 < dt <= T");
  }
  const auto steps = static_cast<Eigen::Index>(std::llround(horizon / dt));
  Vector t(steps + 1);
  for (Eigen::Index k = 0; k <= steps; ++k) t(k) = static_cast<double>(k) * dt;
  return t;
}

Matrix integrate_rk4(const VectorField& f, const Vector& x0, double horizon, double dt) {
  const Vector t = time_grid(horizon, dt);
  Matrix out(x0.size(), t.size());
  Vector x = x0;
  out.col(0) = x;
  for (Eigen::Index k = 0; k + 1 < t.size(); ++k) {
    const double tk = t(k);
    const Vector k1 = f(tk, x);
    const Vector k2 = f(tk + 0.5 * dt, x + 0.5 * dt * k1);
    const Vector k3 = f(tk + 0.5 * dt, x + 0.5 * dt * k2);
    const Vector k4 = f(tk + dt, x + dt * k3);
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!x.allFinite() || (x.size() > 0 && x.cwiseAbs().maxCoeff() > kDivergence)) {
      std::ostringstream os;
      os << "state diverged at t = " << t(k + 1);
      throw Error(ErrorCode::NonFiniteState, os.str());
    }
    out.col(k + 1) = x;
  }
  return out;
}

Trajectory simulate(const NonlinearControlSystem& sys, const Vector& x0, const SignalSpec& u, const SignalSpec& w,
                    double horizon, double dt) {
  sys.validate();
  require(x0.size() == sys.n(), "initial state dimension");
  require(u.dim == sys.m(), "external input dimension");
  require(w.dim == sys.p(), "internal input dimension");
  u.validate();
  w.validate();

  Trajectory traj;
  traj.times = time_grid(horizon, dt);
  traj.states = integrate_rk4([&](double t, const Vector& x) { return sys.drift(x, u(t), w(t)); }, x0, horizon, dt);
  const auto K = traj.times.size();
  traj.external_input.resize(sys.m(), K);
  traj.internal_input.resize(sys.p(), K);
  for (Eigen::Index k = 0; k < K; ++k) {
    traj.external_input.col(k) = u(traj.times(k));
    traj.internal_input.col(k) = w(traj.times(k));
  }
  traj.external_output = sys.C1 * traj.states;
  traj.internal_output = sys.C2 * traj.states;
  return traj;
}

std::string Trajectory::to_csv() const {
  std::ostringstream os;
  os << std::setprecision(15);
  os << "t";
  auto header = [&](const char* prefix, Eigen::Index count) {
    for (Eigen::Index i = 1; i <= count; ++i) os << ',' << prefix << i;
  };
  header("x", states.rows());
  header("u", external_input.rows());
  header("w", internal_input.rows());
  header("z", external_output.rows());
  header("y", internal_output.rows());
  os << '\n';
  for (Eigen::Index k = 0; k < times.size(); ++k) {
    os << times(k);
    for (const Matrix* block : {&states, &external_input, &internal_input, &external_output, &internal_output}) {
      for (Eigen::Index i = 0; i < block->rows(); ++i) os << ',' << (*block)(i, k);
    }
    os << '\n';
  }
  return os.str();
}

NonlinearControlSystem interconnect(const std::vector<NonlinearControlSystem>& subsystems, const Matrix& M) {
  require(!subsystems.empty(), "interconnection needs at least one subsystem");
  std::vector<Matrix> As, Bs, C1s, C2s, Ds;
  Eigen::Index total_p = 0;
  Eigen::Index total_q2 = 0;
  int nonlinear_index = -1;
  for (std::size_t i = 0; i < subsystems.size(); ++i) {
    const auto& s = subsystems[i];
    s.validate();
    As.push_back(s.A);
    Bs.push_back(s.B);
    C1s.push_back(s.C1);
    C2s.push_back(s.C2);
    Ds.push_back(s.D);
    total_p += s.p();
    total_q2 += s.q2();
    if (s.has_nonlinearity()) {
      if (nonlinear_index >= 0) {
        throw Error(ErrorCode::UnsupportedNonlinearity,
                    "symbolic interconnection keeps a single nonlinearity; use cosimulate");
      }
      nonlinear_index = static_cast<int>(i);
    }
  }
  require(M.rows() == total_p && M.cols() == total_q2, "coupling matrix must be (sum p_i) x (sum q2_i)");

  NonlinearControlSystem net;
  net.A = block_diagonal(As) + block_diagonal(Ds) * M * block_diagonal(C2s);
  net.B = block_diagonal(Bs);
  net.C1 = block_diagonal(C1s);
  const auto n = net.A.rows();
  net.C2 = Matrix::Zero(0, n);
  net.D = Matrix::Zero(n, 0);
  net.E = Matrix::Zero(n, 1);
  net.F = Matrix::Zero(1, n);
  net.phi = SlopeRestrictedFunction::zero();
  if (nonlinear_index >= 0) {
    Eigen::Index offset = 0;
    for (int i = 0; i < nonlinear_index; ++i) offset += subsystems[static_cast<std::size_t>(i)].n();
    const auto& s = subsystems[static_cast<std::size_t>(nonlinear_index)];
    net.E.block(offset, 0, s.n(), 1) = s.E;
    net.F.block(0, offset, 1, s.n()) = s.F;
    net.phi = s.phi;
  }
  return net;
}

Trajectory cosimulate(const std::vector<NonlinearControlSystem>& subsystems, const Matrix& M,
                      const std::vector<Vector>& x0, const std::vector<SignalSpec>& u, double horizon, double dt) {
  const std::size_t N = subsystems.size();
  require(N > 0, "cosimulation needs at least one subsystem");
  require(x0.size() == N && u.size() == N, "one initial state and input per subsystem");

  std::vector<Eigen::Index> n_off(N + 1, 0), p_off(N + 1, 0), q2_off(N + 1, 0), m_off(N + 1, 0), q1_off(N + 1, 0);
  for (std::size_t i = 0; i < N; ++i) {
    const auto& s = subsystems[i];
    s.validate();
    require(x0[i].size() == s.n(), "initial state dimension");
    require(u[i].dim == s.m(), "external input dimension");
    n_off[i + 1] = n_off[i] + s.n();
    p_off[i + 1] = p_off[i] + s.p();
    q2_off[i + 1] = q2_off[i] + s.q2();
    m_off[i + 1] = m_off[i] + s.m();
    q1_off[i + 1] = q1_off[i] + s.q1();
  }
  require(M.rows() == p_off[N] && M.cols() == q2_off[N], "coupling matrix must be (sum p_i) x (sum q2_i)");

  auto internal_outputs = [&](const Vector& x) {
    Vector y(q2_off[N]);
    for (std::size_t i = 0; i < N; ++i) {
      y.segment(q2_off[i], subsystems[i].q2()) = subsystems[i].C2 * x.segment(n_off[i], subsystems[i].n());
    }
    return y;
  };

  auto field = [&](double t, const Vector& x) {
    const Vector w = M * internal_outputs(x);
    Vector dx(n_off[N]);
    for (std::size_t i = 0; i < N; ++i) {
      const auto& s = subsystems[i];
      dx.segment(n_off[i], s.n()) = s.drift(x.segment(n_off[i], s.n()), u[i](t), w.segment(p_off[i], s.p()));
    }
    return dx;
  };

  Vector x_init(n_off[N]);
  for (std::size_t i = 0; i < N; ++i) x_init.segment(n_off[i], subsystems[i].n()) = x0[i];

  Trajectory traj;
  traj.times = time_grid(horizon, dt);
  traj.states = integrate_rk4(field, x_init, horizon, dt);
  const auto K = traj.times.size();
  traj.external_input.resize(m_off[N], K);
  traj.internal_input.resize(p_off[N], K);
  traj.external_output.resize(q1_off[N], K);
  traj.internal_output.resize(q2_off[N], K);
  for (Eigen::Index k = 0; k < K; ++k) {
    const Vector x = traj.states.col(k);
    const Vector y = internal_outputs(x);
    traj.internal_output.col(k) = y;
    traj.internal_input.col(k) = M * y;
    for (std::size_t i = 0; i < N; ++i) {
      const auto& s = subsystems[i];
      traj.external_input.block(m_off[i], k, s.m(), 1) = u[i](traj.times(k));
      traj.external_output.block(q1_off[i], k, s.q1(), 1) = s.C1 * x.segment(n_off[i], s.n());
    }
  }
  return traj;
}

}  // namespace netabs
