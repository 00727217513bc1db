#include "mhe/system_model.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <stdexcept>

namespace mhe {
namespace {

// Deterministic uniform double in [lo, hi): identical across platforms,
// unlike std::uniform_real_distribution.
double uniform_from(std::mt19937_64& eng, double lo, double hi) {
  const double u01 = static_cast<double>(eng() >> 11) * 0x1.0p-53;
  return lo + u01 * (hi - lo);
}

Eigen::VectorXd sample_box(std::mt19937_64& eng, const Box& box) {
  Eigen::VectorXd v(box.dim());
  for (int i = 0; i < box.dim(); ++i) {
    if (!std::isfinite(box.lower[i]) || !std::isfinite(box.upper[i]))
      throw std::invalid_argument("uniform noise law requires a bounded box");
    v[i] = uniform_from(eng, box.lower[i], box.upper[i]);
  }
  return v;
}

Eigen::VectorXd draw(std::mt19937_64& eng, const NoiseLaw& law, const Box& box, int d) {
  if (law.kind == LawKind::uniform_box) return sample_box(eng, box);
  if (law.value.size() != d) throw std::invalid_argument("constant noise law has wrong dimension");
  return law.value;
}

}  // namespace

DataBatch DataBatch::slice(int tau, int N) const {
  if (tau < 0 || N < 0 || tau + N > horizon())
    throw std::out_of_range("DataBatch::slice: window outside data range");
  DataBatch out;
  out.u = u.middleCols(tau, N + 1);
  out.y = y.middleCols(tau, N + 1);
  return out;
}

std::uint64_t DataBatch::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const Eigen::MatrixXd& mat) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(mat.data());
    const std::size_t len = sizeof(double) * static_cast<std::size_t>(mat.size());
    for (std::size_t i = 0; i < len; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  };
  mix(u);
  mix(y);
  return h;
}

SimulationResult simulate(const Scenario& scenario, std::uint64_t seed) {
  const SystemModel& model = scenario.model;
  const int T = scenario.T;
  if (T < 0) throw std::invalid_argument("simulate: negative horizon");
  if (scenario.x0.size() != model.n) throw std::invalid_argument("simulate: x0 dimension mismatch");

  std::mt19937_64 eng(seed);
  SimulationResult out;
  out.states.resize(model.n, T + 1);
  out.disturbances.resize(model.q, std::max(T, 0));
  out.noises.resize(model.p, T + 1);
  out.data.u.resize(model.m, T + 1);
  out.data.y.resize(model.p, T + 1);

  Eigen::VectorXd x = scenario.x0;
  for (int t = 0; t <= T; ++t) {
    out.states.col(t) = x;

    Eigen::VectorXd u = Eigen::VectorXd::Zero(model.m);
    const bool reset = scenario.resets.period > 0 && t > 0 && t % scenario.resets.period == 0 &&
                       t < T;  // resets act on x_{t+1}
    if (reset) {
      // f_a(x, u) = f_a(x, 0) + u for the built-in models, so this input
      // drives the drift to the target; the sampled w_t then lands on top.
      u = scenario.resets.target - model.f_a(x, Eigen::VectorXd::Zero(model.m));
    }
    out.data.u.col(t) = u;

    const Eigen::VectorXd v = draw(eng, scenario.v_law, scenario.sets.V, model.p);
    out.noises.col(t) = v;
    out.data.y.col(t) = model.h(x, u) + v;

    if (t < T) {
      const Eigen::VectorXd w = draw(eng, scenario.w_law, scenario.sets.W, model.q);
      out.disturbances.col(t) = w;
      if (!membership(scenario.sets, x, u, w, v))
        throw std::runtime_error("simulate: constraint violation at step " + std::to_string(t));
      x = model.f(x, u, w);
      if (!x.allFinite())
        throw std::runtime_error("simulate: non-finite state at step " + std::to_string(t + 1));
    } else {
      if (!scenario.sets.X.contains(x) || !scenario.sets.V.contains(v))
        throw std::runtime_error("simulate: constraint violation at final step");
    }
  }
  return out;
}

SystemModel scalar_integrator_model() {
  SystemModel model;
  model.n = model.m = model.q = model.p = 1;
  model.additive = true;
  model.L_f = 1.0;
  model.L_h = 1.0;
  model.f = [](const Eigen::VectorXd& x, const Eigen::VectorXd&, const Eigen::VectorXd& w) {
    return Eigen::VectorXd(x + w);
  };
  model.f_a = [](const Eigen::VectorXd& x, const Eigen::VectorXd&) { return x; };
  model.h = [](const Eigen::VectorXd& x, const Eigen::VectorXd&) { return x; };
  model.f_x = [](const Eigen::VectorXd&, const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Identity(1, 1).eval();
  };
  model.f_w = [](const Eigen::VectorXd&, const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Identity(1, 1).eval();
  };
  model.h_x = [](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Identity(1, 1).eval();
  };
  model.h_output_matrix = Eigen::MatrixXd::Identity(1, 1);
  model.audit_box = Box(Eigen::VectorXd::Constant(1, -100.0), Eigen::VectorXd::Constant(1, 100.0));
  model.name = "scalar_integrator";
  return model;
}

Scenario motivating_scenario(int T, std::uint64_t seed) {
  Scenario sc;
  sc.model = scalar_integrator_model();
  sc.sets.X = Box::all(1);
  sc.sets.U = Box::all(1);
  sc.sets.W = Box::all(1);
  sc.sets.V = Box::all(1);
  sc.x0 = Eigen::VectorXd::Constant(1, 1.0);
  sc.T = T;
  sc.seed = seed;
  sc.w_law = NoiseLaw::constant(Eigen::VectorXd::Constant(1, 1.0));
  sc.v_law = NoiseLaw::constant(Eigen::VectorXd::Constant(1, 1.0));
  sc.name = "mot_integrator";
  return sc;
}

namespace {

constexpr double kReactorK1 = 0.16;
constexpr double kReactorK2 = 0.0064;
constexpr double kReactorDt = 0.1;

Eigen::VectorXd reactor_drift(const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
  Eigen::VectorXd next(2);
  next[0] = x[0] + kReactorDt * (-2.0 * kReactorK1 * x[0] * x[0] + 2.0 * kReactorK2 * x[1]) + u[0];
  next[1] = x[1] + kReactorDt * (kReactorK1 * x[0] * x[0] - kReactorK2 * x[1]) + u[1];
  return next;
}

Eigen::MatrixXd reactor_drift_jacobian(const Eigen::VectorXd& x) {
  Eigen::MatrixXd J(2, 2);
  J(0, 0) = 1.0 - 4.0 * kReactorDt * kReactorK1 * x[0];
  J(0, 1) = 2.0 * kReactorDt * kReactorK2;
  J(1, 0) = 2.0 * kReactorDt * kReactorK1 * x[0];
  J(1, 1) = 1.0 - kReactorDt * kReactorK2;
  return J;
}

// Jacobian spectral norm is monotone in x1 over the audit box, so a grid
// with the endpoint included attains the maximum.
double reactor_lipschitz_f(const Box& audit) {
  double worst = 0.0;
  const int grid = 1001;
  Eigen::VectorXd x(2);
  x[1] = 0.0;
  for (int i = 0; i < grid; ++i) {
    x[0] = audit.lower[0] + (audit.upper[0] - audit.lower[0]) * i / (grid - 1);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(reactor_drift_jacobian(x));
    worst = std::max(worst, svd.singularValues()[0]);
  }
  return worst * (1.0 + 1e-9);
}

}  // namespace

SystemModel batch_reactor_model() {
  SystemModel model;
  model.n = 2;
  model.m = 2;
  model.q = 2;
  model.p = 1;
  model.additive = true;
  model.f_a = reactor_drift;
  model.f = [](const Eigen::VectorXd& x, const Eigen::VectorXd& u, const Eigen::VectorXd& w) {
    return Eigen::VectorXd(reactor_drift(x, u) + w);
  };
  model.h = [](const Eigen::VectorXd& x, const Eigen::VectorXd&) {
    return Eigen::VectorXd::Constant(1, x[0] + x[1]).eval();
  };
  model.f_x = [](const Eigen::VectorXd& x, const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return reactor_drift_jacobian(x);
  };
  model.f_w = [](const Eigen::VectorXd&, const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Identity(2, 2).eval();
  };
  Eigen::MatrixXd H(1, 2);
  H << 1.0, 1.0;
  model.h_x = [H](const Eigen::VectorXd&, const Eigen::VectorXd&) { return H; };
  model.h_output_matrix = H;
  Eigen::VectorXd lo(2), hi(2);
  lo << 0.0, 0.0;
  hi << 4.0, 2.0;
  model.audit_box = Box(lo, hi);
  model.L_f = reactor_lipschitz_f(model.audit_box);
  model.L_h = std::sqrt(2.0) * (1.0 + 1e-9);
  model.name = "batch_reactor";
  model.params = {kReactorK1, kReactorK2, kReactorDt};
  return model;
}

Scenario batch_reactor_scenario(int T, std::uint64_t seed) {
  if (T < 1) throw std::invalid_argument("batch_reactor_scenario: T must be >= 1");
  Scenario sc;
  sc.model = batch_reactor_model();
  sc.sets.X = Box::all(2);
  sc.sets.U = Box::all(2);
  sc.sets.W = Box::symmetric(2, 0.05);
  sc.sets.V = Box::symmetric(1, 0.5);
  sc.x0 = Eigen::VectorXd::Zero(2);
  sc.x0[0] = 3.0;
  sc.T = T;
  sc.seed = seed;
  sc.w_law = NoiseLaw::uniform();
  sc.v_law = NoiseLaw::uniform();
  sc.resets.period = 50;
  sc.resets.target = sc.x0;
  sc.name = "batch_reactor";
  return sc;
}

std::vector<int> reactor_reset_times(int T) {
  std::vector<int> times;
  for (int i = 1; 50 * i <= T - 1; ++i) times.push_back(50 * i);
  return times;
}

double sampled_lipschitz_ratio(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& g,
                               const Box& box, int samples, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  double worst = 0.0;
  for (int k = 0; k < samples; ++k) {
    const Eigen::VectorXd x1 = sample_box(eng, box);
    const Eigen::VectorXd x2 = sample_box(eng, box);
    const double dist = (x1 - x2).norm();
    if (dist < 1e-12) continue;
    worst = std::max(worst, (g(x1) - g(x2)).norm() / dist);
  }
  return worst;
}

}  // namespace mhe
