#include "lsgd/residue.hpp"

#include "lsgd/errors.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace lsgd {
namespace {

// g_k - g_0 - Hs, flushed to exact zero when it is at the rounding level of
// its terms (so quadratics give exactly zero).
Vector combine_residue(const Vector& gk, const Vector& g0, const Vector& hs) {
  Vector r = gk - g0 - hs;
  const double scale = gk.norm() + g0.norm() + hs.norm();
  const double floor = 64.0 * std::numeric_limits<double>::epsilon() * scale;
  if (r.norm() <= floor) r.setZero();
  return r;
}

}  // namespace

Vector residue(const LossProblem& problem, const ParamVector& x0, const ParamVector& xk,
               IndexSpan batch) {
  require_length(static_cast<std::size_t>(xk.size()), static_cast<std::size_t>(x0.size()), "x_k");
  const Vector step = xk - x0;
  return combine_residue(problem.grad(xk, batch), problem.grad(x0, batch),
                         problem.hvp(x0, batch, step));
}

Vector residue(const LossProblem& problem, const ParamVector& x0, const ParamVector& xk) {
  return residue(problem, x0, xk, problem.all_samples());
}

double assumption3_ratio(double grad_norm, double residue_norm) {
  if (!(grad_norm >= 0.0)) throw ArgumentError("gradient norm must be non-negative");
  if (residue_norm < 1e-15) return std::numeric_limits<double>::infinity();
  return grad_norm / residue_norm;
}

ResidueEstimate estimate_residue_expectation(const LossProblem& problem,
                                             const ClientShard& shard, const ParamVector& x0,
                                             const ResidueRequest& request) {
  if (request.trials < 1) throw ArgumentError("residue estimation needs at least one trial");
  require_length(static_cast<std::size_t>(x0.size()), problem.dim(), "x0");
  const IndexSpan batch = shard.indices;
  const Vector g0 = problem.grad(x0, batch);

  ResidueEstimate out;
  out.report.round = request.round;
  out.report.iteration = request.iteration;
  out.report.trials = request.trials;
  out.report.grad_norm = g0.norm();
  out.mean_residue = Vector::Zero(x0.size());

  if (request.iteration == 0) {
    // n^s(x_0) is zero by definition.
    out.report.residue_norm = 0.0;
    out.report.ratio = assumption3_ratio(out.report.grad_norm, 0.0);
    return out;
  }

  std::vector<Vector> residues(request.trials);
  std::vector<char> ok(request.trials, 0);
  detail::parallel_for(request.trials, request.threads, [&](std::size_t trial) {
    const RngStream stream{.seed = derive_seed(request.seed, trial),
                           .client = shard.client,
                           .round = request.round};
    try {
      const LocalUpdate u = local_client_update(problem, shard, x0, request.iteration,
                                                request.learning_rate, request.batch_size, stream);
      const ParamVector xk = x0 - u.delta;
      Vector r = combine_residue(problem.grad(xk, batch), g0, problem.hvp(x0, batch, xk - x0));
      if (r.allFinite()) {
        residues[trial] = std::move(r);
        ok[trial] = 1;
      }
    } catch (const DivergenceError&) {
    }
  });

  std::vector<double> norms;
  norms.reserve(request.trials);
  for (std::size_t trial = 0; trial < request.trials; ++trial) {
    if (!ok[trial]) {
      ++out.report.excluded_trials;
      continue;
    }
    out.mean_residue += residues[trial];
    norms.push_back(residues[trial].norm());
  }
  if (10 * out.report.excluded_trials > request.trials) {
    throw DivergenceError(request.round, shard.client, request.iteration,
                          std::to_string(out.report.excluded_trials) + " of " +
                              std::to_string(request.trials) + " residue trials diverged");
  }
  out.mean_residue /= static_cast<double>(norms.size());
  out.report.residue_norm = out.mean_residue.norm();
  out.report.ratio = assumption3_ratio(out.report.grad_norm, out.report.residue_norm);

  SampleStats& s = out.report.trial_residue_norm;
  s.min = *std::min_element(norms.begin(), norms.end());
  s.max = *std::max_element(norms.begin(), norms.end());
  double sum = 0.0;
  for (double v : norms) sum += v;
  s.mean = sum / static_cast<double>(norms.size());
  double sq = 0.0;
  for (double v : norms) sq += (v - s.mean) * (v - s.mean);
  s.stddev = norms.size() > 1 ? std::sqrt(sq / static_cast<double>(norms.size() - 1)) : 0.0;
  return out;
}

LearningRateCondition check_learning_rate_condition(std::size_t local_steps, double eta, double n,
                                                    double lipschitz) {
  if (!(n > 0.0)) throw ArgumentError("learning-rate condition needs N > 0");
  if (local_steps < 1 || !(eta > 0.0)) {
    throw ArgumentError("learning-rate condition needs K >= 1 and eta > 0");
  }
  if (!(lipschitz >= 0.0)) throw ArgumentError("learning-rate condition needs L >= 0");
  LearningRateCondition c;
  c.local_steps = local_steps;
  c.eta = eta;
  c.n = n;
  c.lipschitz = lipschitz;
  c.bound = lipschitz > 0.0 ? 1.0 / (n * lipschitz) : std::numeric_limits<double>::infinity();
  const double k_eta = static_cast<double>(local_steps) * eta;
  c.satisfied = k_eta <= c.bound;
  c.margin = k_eta - c.bound;
  return c;
}

std::optional<double> max_pairwise_correlation(std::span<const Vector> client_deltas) {
  if (client_deltas.size() < 2) return std::nullopt;
  const Vector mean = aggregate(client_deltas);
  const auto m = static_cast<Eigen::Index>(client_deltas.size());
  Matrix centred(mean.size(), m);
  for (Eigen::Index i = 0; i < m; ++i) {
    centred.col(i) = client_deltas[static_cast<std::size_t>(i)] - mean;
    centred.col(i).array() -= centred.col(i).mean();
  }
  const Matrix gram = centred.transpose() * centred;
  double best = 0.0;
  bool any = false;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const double denom = std::sqrt(gram(i, i) * gram(j, j));
      if (!(denom > 0.0)) continue;
      best = std::max(best, std::abs(gram(i, j) / denom));
      any = true;
    }
  }
  if (!any) return std::nullopt;
  return best;
}

AssumptionAudit audit_assumptions(std::span<const RoundTrace> traces,
                                  std::span<const Vector> eigenvalues_per_round,
                                  std::size_t local_steps, double eta, double n) {
  if (traces.empty()) throw ArgumentError("audit needs at least one round trace");
  AssumptionAudit a;
  std::size_t clients = 0;
  for (const RoundTrace& t : traces) {
    a.g_hat = std::max(a.g_hat, t.max_step_grad_norm);
    a.sigma1_sq_hat = std::max(a.sigma1_sq_hat, t.client_delta_variance);
    if (!t.client_deltas.empty()) {
      clients = std::max(clients, t.client_deltas.size());
      if (auto c = max_pairwise_correlation(t.client_deltas)) {
        a.max_client_correlation = std::max(a.max_client_correlation.value_or(0.0), *c);
      }
    }
  }
  for (const Vector& ev : eigenvalues_per_round) {
    if (ev.size() > 0) a.l_hat = std::max(a.l_hat, ev.cwiseAbs().maxCoeff());
  }
  if (eigenvalues_per_round.empty()) {
    a.notices.emplace_back("no analyzed Hessian spectra; L_hat is 0");
  }
  a.lr_condition = check_learning_rate_condition(local_steps, eta, n, a.l_hat);
  if (clients < 2) {
    a.notices.emplace_back(
        "fewer than 2 recorded client updates; independence diagnostic omitted");
    a.max_client_correlation.reset();
  } else {
    a.correlation_baseline = -1.0 / static_cast<double>(clients - 1);
    if (!a.max_client_correlation) {
      a.notices.emplace_back("client updates have zero spread; correlation undefined");
    }
  }
  return a;
}

}  // namespace lsgd
