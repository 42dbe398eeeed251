#include "diffplan/mpc.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace diffplan::datagen {

void MpcConfig::validate() const {
  if (horizon < 2) throw Error(ErrorCode::kConfigValidation, "MPC horizon must be >= 2");
  if (!(ts > 0.0) || !(v_ref > 0.0)) throw Error(ErrorCode::kConfigValidation, "MPC T_s and v_ref must be positive");
  if (gamma < 0.0 || gamma > 1.0) throw Error(ErrorCode::kConfigValidation, "MPC gamma must lie in [0, 1]");
  const auto psd3 = [](const Eigen::Matrix3d& m) {
    return m.isApprox(m.transpose()) && Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(m).eigenvalues().minCoeff() >= -1e-12;
  };
  const auto psd2 = [](const Eigen::Matrix2d& m) {
    return m.isApprox(m.transpose()) && Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(m).eigenvalues().minCoeff() >= -1e-12;
  };
  if (!psd3(q1) || !psd3(q2) || !psd2(r1) || !psd2(r2))
    throw Error(ErrorCode::kConfigValidation, "MPC weight matrices must be symmetric positive semidefinite");
}

std::vector<double> project_schedule(double s_cur, double v_ref, double dt, int horizon, double total_length) {
  if (!(v_ref > 0.0)) throw_invalid("project_schedule: v_ref must be positive");
  std::vector<double> s(static_cast<std::size_t>(horizon));
  double prev = std::min(s_cur, total_length);
  for (int k = 0; k < horizon; ++k) {
    prev = std::min(prev + dt * v_ref, total_length);
    s[static_cast<std::size_t>(k)] = prev;
  }
  return s;
}

MpcSolver::MpcSolver(MpcConfig cfg, VehicleParams params) : cfg_(std::move(cfg)), params_(params) {
  cfg_.validate();
  params_.validate();
}

std::vector<VehicleState> MpcSolver::predict(const VehicleState& state, const std::vector<Control>& controls) const {
  std::vector<VehicleState> out;
  out.reserve(controls.size());
  VehicleState s = state;
  for (const Control& u : controls) {
    s = kinematic_step(s, u, cfg_.ts, params_);
    out.push_back(s);
  }
  return out;
}

double MpcSolver::cost(const MpcProblem& p, const std::vector<Control>& u) const {
  const int n = cfg_.horizon;
  const double gamma = cfg_.gamma;
  double j_static = 0.0;
  double j_dynamic = 0.0;
  VehicleState s = p.state;
  for (int k = 0; k < n; ++k) {
    s = kinematic_step(s, u[static_cast<std::size_t>(k)], cfg_.ts, params_);
    if (gamma < 1.0) {
      const ReferencePath::Sample& r = p.refs[static_cast<std::size_t>(k)];
      const Eigen::Vector3d e(s.x - r.x, s.y - r.y, wrap_angle(s.phi - r.phi));
      j_static += e.dot(cfg_.q1 * e);
      if (k == n - 1) j_static += e.dot(cfg_.q2 * e);
    }
    if (gamma > 0.0) {
      const double t = p.t0 + (k + 1) * cfg_.ts;
      for (const sim::DynamicObstacle& o : p.obstacles) {
        const double d = (s.position() - o.position(t)).norm();
        j_dynamic += cfg_.alpha / std::max(d, cfg_.obstacle_floor);
      }
    }
  }
  if (gamma < 1.0) {
    for (int k = 0; k + 1 < n; ++k) {
      const Control& a = u[static_cast<std::size_t>(k)];
      const Control& b = u[static_cast<std::size_t>(k + 1)];
      const Eigen::Vector2d du(b.delta - a.delta, b.a - a.a);
      const Eigen::Vector2d uk(a.delta, a.a);
      j_static += du.dot(cfg_.r1 * du) + uk.dot(cfg_.r2 * uk);
    }
  }
  if (gamma == 0.0) return j_static;
  if (gamma == 1.0) return j_dynamic;
  return gamma * j_dynamic + (1.0 - gamma) * j_static;
}

std::vector<Control> MpcSolver::to_controls(const Eigen::VectorXd& z) const {
  std::vector<Control> u(static_cast<std::size_t>(cfg_.horizon));
  for (int k = 0; k < cfg_.horizon; ++k) {
    u[static_cast<std::size_t>(k)] = {params_.delta_max * std::tanh(z(2 * k)), params_.a_max * std::tanh(z(2 * k + 1))};
  }
  return u;
}

Eigen::VectorXd MpcSolver::to_z(const std::vector<Control>& u) const {
  Eigen::VectorXd z = Eigen::VectorXd::Zero(2 * cfg_.horizon);
  // Warm starts stay off the flat tails of tanh so saturated controls can still move.
  const double lim = 0.95;
  for (int k = 0; k < cfg_.horizon && k < static_cast<int>(u.size()); ++k) {
    z(2 * k) = std::atanh(std::clamp(u[static_cast<std::size_t>(k)].delta / params_.delta_max, -lim, lim));
    z(2 * k + 1) = std::atanh(std::clamp(u[static_cast<std::size_t>(k)].a / params_.a_max, -lim, lim));
  }
  return z;
}

double MpcSolver::cost_z(const MpcProblem& p, const Eigen::VectorXd& z) { return cost(p, to_controls(z)); }

Eigen::VectorXd MpcSolver::gradient(const MpcProblem& p, const Eigen::VectorXd& z) {
  Eigen::VectorXd g(z.size());
  Eigen::VectorXd zz = z;
  const double h = cfg_.fd_step;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    zz(i) = z(i) + h;
    const double fp = cost_z(p, zz);
    zz(i) = z(i) - h;
    const double fm = cost_z(p, zz);
    zz(i) = z(i);
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

MpcSolution MpcSolver::solve(const MpcProblem& p) {
  if (static_cast<int>(p.refs.size()) < cfg_.horizon && cfg_.gamma < 1.0)
    throw_invalid("MPC problem needs one reference per predicted step");
  const Eigen::Index n = 2 * cfg_.horizon;
  Eigen::VectorXd z = p.warm_start.empty() ? Eigen::VectorXd::Zero(n) : to_z(p.warm_start);
  double f = cost_z(p, z);
  Eigen::VectorXd g = gradient(p, z);
  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(n, n);
  int it = 0;
  for (; it < cfg_.max_iterations; ++it) {
    if (g.lpNorm<Eigen::Infinity>() < cfg_.grad_tol) break;
    Eigen::VectorXd dir = -hinv * g;
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      hinv.setIdentity();
      dir = -g;
      slope = -g.squaredNorm();
    }
    double step = 1.0;
    Eigen::VectorXd z_new;
    double f_new = f;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      z_new = z + step * dir;
      f_new = cost_z(p, z_new);
      if (f_new <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (hinv.isIdentity()) break;
      hinv.setIdentity();
      continue;
    }
    const Eigen::VectorXd g_new = gradient(p, z_new);
    const Eigen::VectorXd sk = z_new - z;
    const Eigen::VectorXd yk = g_new - g;
    const double sy = sk.dot(yk);
    if (sy > 1e-12) {
      const double rho = 1.0 / sy;
      const Eigen::VectorXd hy = hinv * yk;
      hinv += (rho * rho * yk.dot(hy) + rho) * sk * sk.transpose() - rho * (hy * sk.transpose() + sk * hy.transpose());
    }
    z = z_new;
    f = f_new;
    g = g_new;
  }
  MpcSolution sol{to_controls(z), f, g.lpNorm<Eigen::Infinity>(), it};
  if (sol.grad_norm >= cfg_.grad_tol) throw MpcNotConverged(std::move(sol));
  return sol;
}

MpcSolution solve_mpc_step(const VehicleState& state, const ReferencePath& ref, double s_cur,
                           const std::vector<sim::DynamicObstacle>& obstacles, double t0, const MpcConfig& cfg,
                           const VehicleParams& params) {
  MpcSolver solver(cfg, params);
  MpcProblem p;
  p.state = state;
  for (double s : project_schedule(s_cur, cfg.v_ref, cfg.ts, cfg.horizon, ref.total_length())) p.refs.push_back(ref.at(s));
  p.obstacles = obstacles;
  p.t0 = t0;
  return solver.solve(p);
}

}  // namespace diffplan::datagen
