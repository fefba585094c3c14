#include "lsgd/fedsim.hpp"

#include "lsgd/errors.hpp"
#include "lsgd/spectral.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace lsgd {

std::string_view to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::lsgd: return "lsgd";
    case OptimizerKind::sgd: return "sgd";
    case OptimizerKind::gd: return "gd";
    case OptimizerKind::newton: return "newton";
  }
  return "unknown";
}

std::optional<OptimizerKind> parse_optimizer(std::string_view name) {
  for (OptimizerKind k : {OptimizerKind::lsgd, OptimizerKind::sgd, OptimizerKind::gd,
                          OptimizerKind::newton}) {
    if (name == to_string(k)) return k;
  }
  return std::nullopt;
}

void FedRunConfig::validate() const {
  if (clients < 1) throw ArgumentError("clients (m) must be >= 1");
  if (local_steps < 1) throw ArgumentError("local_steps (K) must be >= 1");
  if (rounds < 1) throw ArgumentError("rounds (T) must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ArgumentError("learning_rate must be > 0");
  }
  if (batch_size < 1) throw ArgumentError("batch_size must be >= 1");
  if (optimizer == OptimizerKind::sgd) {
    if (baseline_batch < 1) throw ArgumentError("baseline_batch must be >= 1");
    if (!(baseline_learning_rate > 0.0)) throw ArgumentError("baseline_learning_rate must be > 0");
  }
}

LocalUpdate local_client_update(const LossProblem& problem, const ClientShard& shard,
                                const ParamVector& x_t, std::size_t local_steps,
                                double learning_rate, std::size_t batch_size,
                                const RngStream& stream, bool full_batch, bool keep_step_grads) {
  require_length(static_cast<std::size_t>(x_t.size()), problem.dim(), "x_t");
  if (local_steps < 1) throw ArgumentError("local_steps must be >= 1");
  if (!(learning_rate > 0.0)) throw ArgumentError("learning_rate must be > 0");
  LocalUpdate out;
  out.delta = Vector::Zero(x_t.size());
  out.step_grad_norms.reserve(local_steps);
  if (keep_step_grads) out.step_grads.reserve(local_steps);
  Vector x = x_t;
  for (std::size_t k = 0; k < local_steps; ++k) {
    const RngStream at = stream.at(k);
    IndexList batch = full_batch ? shard.indices : sample_batch(shard, batch_size, at);
    CounterEngine noise = at.engine(RngPurpose::noise);
    Vector g = problem.stochastic_grad(x, batch, noise);
    if (!g.allFinite()) {
      throw DivergenceError(stream.round, stream.client, k, "non-finite stochastic gradient");
    }
    const Vector step = learning_rate * g;
    x -= step;
    out.delta += step;
    out.step_grad_norms.push_back(g.norm());
    if (keep_step_grads) out.step_grads.push_back(std::move(g));
  }
  return out;
}

Vector aggregate(std::span<const Vector> client_deltas) {
  if (client_deltas.empty()) throw ArgumentError("aggregate needs at least one client update");
  const Eigen::Index d = client_deltas.front().size();
  Vector sum = Vector::Zero(d);
  for (const Vector& v : client_deltas) {
    require_length(static_cast<std::size_t>(v.size()), static_cast<std::size_t>(d),
                   "client update");
    sum += v;
  }
  return sum / static_cast<double>(client_deltas.size());
}

double sgd_lsgd_gap(const Vector& full_grad, std::size_t local_steps, double learning_rate,
                    const Vector& delta) {
  require_length(static_cast<std::size_t>(delta.size()), static_cast<std::size_t>(full_grad.size()),
                 "update");
  return (static_cast<double>(local_steps) * learning_rate * full_grad - delta).squaredNorm();
}

NewtonStep newton_step(const Matrix& hessian, const Vector& grad) {
  require_length(static_cast<std::size_t>(grad.size()), static_cast<std::size_t>(hessian.rows()),
                 "gradient");
  const EigenSystem eig = eig_sym(hessian);
  const double lmax = eig.values.cwiseAbs().maxCoeff();
  const double tol = 1e-10 * lmax;
  const Vector w = eig.vectors.transpose() * grad;
  Vector coeff = Vector::Zero(w.size());
  NewtonStep out;
  double null_energy = 0.0;
  for (Eigen::Index l = 0; l < w.size(); ++l) {
    const double lambda = eig.values(l);
    if (lmax > 0.0 && std::abs(lambda) > tol) {
      coeff(l) = w(l) / lambda;
      ++out.rank;
    } else {
      null_energy += w(l) * w(l);
    }
  }
  out.step = eig.vectors * coeff;
  const double gnorm = grad.norm();
  if (gnorm > 0.0) {
    out.residual = (hessian * out.step - grad).norm() / gnorm;
    out.null_space_fraction = std::sqrt(null_energy) / gnorm;
  }
  out.rank_deficient = out.rank < eig.dim() && out.null_space_fraction > 1e-8;
  return out;
}

NewtonStep newton_step(const LossProblem& problem, const ParamVector& x) {
  return newton_step(problem.hessian(x), problem.grad(x));
}

double sample_variance_trace(std::span<const Vector> vectors) {
  if (vectors.size() < 2) return 0.0;
  const Vector mean = aggregate(vectors);
  double total = 0.0;
  for (const Vector& v : vectors) total += (v - mean).squaredNorm();
  return total / static_cast<double>(vectors.size() - 1);
}

std::vector<ClientShard> make_shards(const LossProblem& problem, const FedRunConfig& config) {
  const std::size_t n = problem.sample_count();
  if (config.partition == PartitionMode::shared) return partition_shared(n, config.clients);
  return partition_iid(n, config.clients, config.seed);
}

namespace {

struct ClientResult {
  Vector delta;
  double max_step_norm = 0.0;
};

ClientResult run_client(const LossProblem& problem, const FedRunConfig& config,
                        const ClientShard& shard, const ParamVector& x, std::size_t round) {
  const RngStream stream{.seed = config.seed, .client = shard.client, .round = round};
  auto max_of = [](const std::vector<double>& v) {
    return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
  };
  switch (config.optimizer) {
    case OptimizerKind::lsgd: {
      LocalUpdate u = local_client_update(problem, shard, x, config.local_steps,
                                          config.learning_rate, config.batch_size, stream,
                                          config.full_batch);
      return {std::move(u.delta), max_of(u.step_grad_norms)};
    }
    case OptimizerKind::gd: {
      LocalUpdate u = local_client_update(problem, shard, x, 1, config.learning_rate, shard.size(),
                                          stream, true);
      return {std::move(u.delta), max_of(u.step_grad_norms)};
    }
    case OptimizerKind::sgd: {
      const std::size_t per_client = std::clamp<std::size_t>(
          config.baseline_batch / config.clients, 1, shard.size());
      LocalUpdate u = local_client_update(problem, shard, x, 1, config.baseline_learning_rate,
                                          per_client, stream, false);
      return {std::move(u.delta), max_of(u.step_grad_norms)};
    }
    case OptimizerKind::newton:
      break;
  }
  throw ArgumentError("run_client: unsupported optimizer");
}

}  // namespace

TrainingResult run_training(const LossProblem& problem, const FedRunConfig& config,
                            const ParamVector& x0, const Evaluator& test_accuracy) {
  config.validate();
  require_length(static_cast<std::size_t>(x0.size()), problem.dim(), "x0");
  if (!x0.allFinite()) throw ArgumentError("x0 contains non-finite entries");
  const std::vector<ClientShard> shards = make_shards(problem, config);
  const std::size_t m = shards.size();

  std::size_t eff_steps = config.local_steps;
  double eff_eta = config.learning_rate;
  if (config.optimizer != OptimizerKind::lsgd) eff_steps = 1;
  if (config.optimizer == OptimizerKind::sgd) eff_eta = config.baseline_learning_rate;

  TrainingResult result;
  result.traces.reserve(config.rounds);
  ParamVector x = x0;
  std::vector<ClientResult> clients(m);
  for (std::size_t t = 0; t < config.rounds; ++t) {
    RoundTrace trace;
    trace.round = t;
    trace.x = x;
    trace.full_grad = problem.grad(x);
    trace.loss = problem.loss(x);
    if (!trace.full_grad.allFinite() || !std::isfinite(trace.loss)) {
      throw DivergenceError(t, 0, 0, "non-finite loss or gradient at the global model");
    }
    if (test_accuracy) trace.test_accuracy = test_accuracy(x);

    if (config.optimizer == OptimizerKind::newton) {
      NewtonStep step = newton_step(problem, x);
      for (ClientResult& c : clients) c = {step.step, trace.full_grad.norm()};
    } else {
      detail::parallel_for(m, config.threads, [&](std::size_t i) {
        clients[i] = run_client(problem, config, shards[i], x, t);
      });
    }

    std::vector<Vector> deltas;
    deltas.reserve(m);
    for (ClientResult& c : clients) {
      trace.max_step_grad_norm = std::max(trace.max_step_grad_norm, c.max_step_norm);
      deltas.push_back(std::move(c.delta));
    }
    trace.delta = aggregate(deltas);
    trace.client_delta_variance = sample_variance_trace(deltas);
    trace.gap_eq3 = sgd_lsgd_gap(trace.full_grad, eff_steps, eff_eta, trace.delta);
    if (config.records(t)) trace.client_deltas = std::move(deltas);

    x = trace.x - trace.delta;
    if (!x.allFinite()) throw DivergenceError(t, 0, 0, "non-finite global model after update");
    result.traces.push_back(std::move(trace));
  }
  result.final_x = std::move(x);
  return result;
}

}  // namespace lsgd
