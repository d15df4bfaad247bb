#include "sme.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <functional>
#include <thread>

#include "error.hpp"
#include "rng.hpp"

namespace omtsim {

void SmeRates::validate() const {
  require(gamma_minus >= 0 && gamma_1 >= 0 && gamma_2 >= 0 && Gamma >= 0,
          ErrorCode::InvalidArgument, "rates must be non-negative");
  require(eta >= 0 && eta <= 1.0, ErrorCode::InvalidArgument,
          "eta must be in [0, 1]");
  require(std::isfinite(total()), ErrorCode::InvalidArgument,
          "rates must be finite");
}

SmeRates sme_rates(const EffectiveRates& r) {
  SmeRates s;
  s.gamma_minus = r.gamma_relax;
  s.gamma_1 = r.gamma_phi + r.gamma_loss_1 + r.gamma_mech_1;
  s.gamma_2 = r.gamma_phi + r.gamma_mech_2;
  s.Gamma = r.joint_rate();
  s.eta = r.eta;
  s.validate();
  return s;
}

EffectiveRates rates_from_sme(const SmeRates& r) {
  r.validate();
  EffectiveRates e;
  e.gamma_meas = r.Gamma;
  e.gamma_mech_1 = r.gamma_1;
  e.gamma_mech_2 = r.gamma_2;
  e.gamma_loss_1 = 0;
  e.gamma_relax = r.gamma_minus;
  e.gamma_phi = 0;
  e.eta = r.eta;
  e.tau = 1.0;
  return e;
}

double SmeConfig::resolve_dt() const {
  const SmeRates r = sme_rates(rates);
  if (dt > 0) {
    require(dt * r.total() <= 1e-2 + 1e-12, ErrorCode::InvalidArgument,
            "dt violates stability guard dt * (sum of rates) <= 1e-2");
    return dt;
  }
  // The stiffest elementwise coefficients are 2 gamma_minus on the doubly
  // excited population and (up to) 8 Gamma on the extreme coherence. The
  // automatic step keeps dt times this weighted sum at 1e-3, well inside the
  // 1e-2 stability guard: near-pure conditioned states sit on the boundary of
  // the positive cone and the size of their negative excursions scales with
  // the step, so the default favours accuracy over speed.
  const double stiff =
      2 * r.gamma_minus + r.gamma_1 + r.gamma_2 + 4 * r.Gamma;
  require(stiff > 0, ErrorCode::InvalidArgument,
          "all rates vanish; supply dt explicitly");
  return 1e-3 / stiff;
}

void SmeConfig::validate() const {
  sme_rates(rates);
  require(T >= 0 && std::isfinite(T), ErrorCode::InvalidArgument,
          "T must be finite and non-negative");
  require(n_traj >= 1, ErrorCode::InvalidArgument, "n_traj must be >= 1");
  for (double t : snapshot_times)
    require(t >= 0 && t <= T * (1 + 1e-9) + 1e-300, ErrorCode::InvalidArgument,
            "snapshot time outside [0, T]");
}

namespace {

template <int Dim>
class Stepper {
 public:
  using Mat = Eigen::Matrix<std::complex<double>, Dim, Dim>;
  using Vec = Eigen::Matrix<double, Dim, 1>;

  Stepper(const SmeRates& r, const Vec& S, double dt)
      : S_(S), dt_(dt), amp_(std::sqrt(r.eta * r.Gamma)), gm_(r.gamma_minus) {
    Vec sz1, sz2, p1, p2;
    if constexpr (Dim == 4) {
      sz1 = sz1_diag();
      sz2 = sz2_diag();
      p1 << 0, 0, 1, 1;  // qubit 1 excited
      p2 << 0, 1, 0, 1;  // qubit 2 excited
    } else {
      sz1 << 1, -1;
      sz2 << 0, 0;
      p1 << 0, 1;
      p2 << 0, 0;
    }
    // Diagonal Lindblad channels act elementwise: D[A] scales rho_jk by
    // -(a_j - a_k)^2 / 2. Relaxation contributes its anticommutator here and
    // its gain term separately in step().
    for (int j = 0; j < Dim; ++j)
      for (int k = 0; k < Dim; ++k) {
        const double d1 = sz1(j) - sz1(k), d2 = sz2(j) - sz2(k),
                     dS = S_(j) - S_(k);
        mask_(j, k) = -0.5 * (r.gamma_1 * d1 * d1 + r.gamma_2 * d2 * d2 +
                              r.Gamma * dS * dS) -
                      0.5 * gm_ * (p1(j) + p1(k) + p2(j) + p2(k));
      }
  }

  // Advances rho in place; returns the current increment I dt built from the
  // same Wiener increment.
  double step_inplace(Mat& rho, double dW) const {
    double expS = 0;
    for (int j = 0; j < Dim; ++j) expS += S_(j) * rho(j, j).real();
    const double i_dt = 2.0 * amp_ * expS * dt_ + dW;

    Mat next;
    for (int j = 0; j < Dim; ++j)
      for (int k = 0; k < Dim; ++k) {
        const double lin = mask_(j, k) * dt_ +
                           amp_ * (S_(j) + S_(k) - 2.0 * expS) * dW;
        next(j, k) = rho(j, k) * (1.0 + lin);
      }
    if (gm_ > 0) {
      const double g = gm_ * dt_;
      if constexpr (Dim == 4) {
        next.template block<2, 2>(0, 0) += g * rho.template block<2, 2>(2, 2);
        next(0, 0) += g * rho(1, 1);
        next(0, 2) += g * rho(1, 3);
        next(2, 0) += g * rho(3, 1);
        next(2, 2) += g * rho(3, 3);
      } else {
        next(0, 0) += g * rho(1, 1);
      }
    }

    next = 0.5 * (next + next.adjoint()).eval();
    const double tr = next.real().trace();
    require(tr > 1e-6, ErrorCode::SolverFailure,
            "trajectory aborted: trace collapsed during integration");
    rho = next / tr;
    return i_dt;
  }

 private:
  Eigen::Matrix<double, Dim, Dim> mask_;
  Vec S_;
  double dt_;
  double amp_;
  double gm_;
};

// An explicit stochastic step can push a near-pure conditioned state slightly
// outside the positive cone. Reported states clip negative eigenvalues and
// renormalize; the integration state itself is left untouched so the noise
// realization, not the repair, drives the dynamics.
template <int Dim>
Eigen::Matrix<std::complex<double>, Dim, Dim> clip_positive(
    const Eigen::Matrix<std::complex<double>, Dim, Dim>& rho) {
  Eigen::SelfAdjointEigenSolver<
      Eigen::Matrix<std::complex<double>, Dim, Dim>>
      es(rho);
  require(es.info() == Eigen::Success, ErrorCode::SolverFailure,
          "snapshot eigendecomposition failed");
  if (es.eigenvalues().minCoeff() >= 0) return rho;
  Eigen::Matrix<double, Dim, 1> ev = es.eigenvalues().cwiseMax(0.0);
  ev /= ev.sum();
  Eigen::Matrix<std::complex<double>, Dim, Dim> out =
      es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
  return 0.5 * (out + out.adjoint()).eval();
}

std::vector<long> snapshot_steps(const std::vector<double>& times, double T,
                                 double dt) {
  std::vector<double> ts = times.empty() ? std::vector<double>{T} : times;
  std::vector<long> ks;
  ks.reserve(ts.size());
  for (double t : ts) ks.push_back(std::lround(t / dt));
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  return ks;
}

template <int Dim>
TrajectoryRecord integrate(
    const Eigen::Matrix<std::complex<double>, Dim, Dim>& rho0,
    const SmeRates& rates,
    const Eigen::Matrix<double, Dim, 1>& S, double T, double dt,
    const std::vector<double>& snapshot_times, bool store_states,
    uint64_t seed, uint64_t traj_index) {
  const Stepper<Dim> stepper(rates, S, dt);
  TrajectoryRecord rec;
  rec.dt = dt;
  rec.dW_stream_id = derive_stream(seed, traj_index);
  NormalRng rng(rec.dW_stream_id);

  const std::vector<long> ks = snapshot_steps(snapshot_times, T, dt);
  const double sqrt_dt = std::sqrt(dt);

  Eigen::Matrix<std::complex<double>, Dim, Dim> rho = rho0;
  auto record = [&](double t, double current, double J) {
    rec.times.push_back(t);
    rec.current.push_back(current);
    rec.J.push_back(J);
    if (store_states) rec.states.emplace_back(clip_positive<Dim>(rho));
  };

  std::size_t next = 0;
  double J = 0;
  if (!ks.empty() && ks[0] == 0) {
    record(0.0, 0.0, 0.0);
    ++next;
  }
  const long n_steps = ks.empty() ? 0 : ks.back();
  for (long i = 1; i <= n_steps; ++i) {
    const double dW = sqrt_dt * rng.gaussian();
    const double i_dt = stepper.step_inplace(rho, dW);
    J += i_dt;
    if (next < ks.size() && i == ks[next]) {
      record(static_cast<double>(i) * dt, i_dt / dt, J);
      ++next;
    }
  }
  return rec;
}

}  // namespace

std::pair<Mat4c, double> step(const Mat4c& rho, const SmeConfig& cfg,
                              double dW) {
  require(std::isfinite(dW), ErrorCode::InvalidArgument, "dW must be finite");
  const SmeRates r = sme_rates(cfg.rates);
  const double dt = cfg.resolve_dt();
  const Eigen::Vector4d S = cfg.sign_mode == SignMode::TotalSpin
                                ? spin_sum_diag()
                                : spin_diff_diag();
  const Stepper<4> stepper(r, S, dt);
  Mat4c out = rho;
  const double i_dt = stepper.step_inplace(out, dW);
  return {out, i_dt};
}

TrajectoryRecord run_trajectory(const Mat4c& rho0, const SmeConfig& cfg,
                                uint64_t traj_index) {
  cfg.validate();
  const SmeRates r = sme_rates(cfg.rates);
  const double dt = cfg.resolve_dt();
  const Eigen::Vector4d S = cfg.sign_mode == SignMode::TotalSpin
                                ? spin_sum_diag()
                                : spin_diff_diag();
  return integrate<4>(rho0, r, S, cfg.T, dt, cfg.snapshot_times,
                      cfg.store_states, cfg.seed, traj_index);
}

std::vector<TrajectoryRecord> run_ensemble(const Mat4c& rho0,
                                           const SmeConfig& cfg) {
  cfg.validate();
  std::vector<TrajectoryRecord> out(static_cast<std::size_t>(cfg.n_traj));
  int workers = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("OMTSIM_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end && *end == '\0' && v >= 1) workers = static_cast<int>(v);
  }
  workers = std::clamp(workers, 1, cfg.n_traj);
  // Noise streams depend only on (seed, index), so results are identical no
  // matter how trajectories are spread over workers.
  auto chunk = [&](int w, std::exception_ptr& err) noexcept {
    try {
      for (int i = w; i < cfg.n_traj; i += workers)
        out[static_cast<std::size_t>(i)] =
            run_trajectory(rho0, cfg, static_cast<uint64_t>(i));
    } catch (...) {
      err = std::current_exception();
    }
  };
  std::vector<std::exception_ptr> errs(static_cast<std::size_t>(workers));
  if (workers == 1) {
    chunk(0, errs[0]);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
      pool.emplace_back(chunk, w, std::ref(errs[static_cast<std::size_t>(w)]));
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errs)
    if (e) std::rethrow_exception(e);
  return out;
}

TrajectoryRecord single_qubit_mode(const Mat2c& rho0, const SmeRates& rates,
                                   double T, double dt, uint64_t seed,
                                   std::vector<double> snapshot_times,
                                   uint64_t traj_index) {
  rates.validate();
  require(rates.gamma_2 == 0, ErrorCode::InvalidArgument,
          "single-qubit mode has no second dephasing channel");
  require(dt > 0 && dt * rates.total() <= 1e-2 + 1e-12,
          ErrorCode::InvalidArgument,
          "dt violates stability guard dt * (sum of rates) <= 1e-2");
  Eigen::Vector2d S;
  S << 1, -1;
  return integrate<2>(rho0, rates, S, T, dt, snapshot_times,
                      /*store_states=*/true, seed, traj_index);
}

}  // namespace omtsim
