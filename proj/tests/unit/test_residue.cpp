#include "lsgd/data.hpp"
#include "lsgd/errors.hpp"
#include "lsgd/fedsim.hpp"
#include "lsgd/residue.hpp"
#include "oracles.hpp"
#include "test_problems.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <memory>
#include <random>

using namespace lsgd;
using lsgd::testing::CubicProblem;

namespace {

Vector random_vector(std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  Vector v(d);
  for (double& e : v) e = n01(rng);
  return v;
}

}  // namespace

TEST(Residue, ZeroOnQuadraticsForAllPairs) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t d = 1 + rng() % 10;
    std::vector<double> spec(d);
    for (double& l : spec) l = std::uniform_real_distribution<double>(0.0, 3.0)(rng);
    auto p = make_synthetic_quadratic(d, spec, rng());
    const Vector x0 = random_vector(d, rng);
    const Vector xk = random_vector(d, rng);
    ASSERT_LT(residue(*p, x0, xk).norm(), 1e-12 * (1.0 + p->grad(xk).norm()));
  }
}

TEST(Residue, CubicHandComputation) {
  const CubicProblem p(1);
  EXPECT_NEAR(residue(p, Vector::Constant(1, 1.0), Vector::Constant(1, 2.0))(0), 3.0, 1e-14);
  const CubicProblem q(3);
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const Vector x0 = random_vector(3, rng);
    const Vector xk = random_vector(3, rng);
    const Vector expected = 3.0 * (xk - x0).array().square().matrix();
    ASSERT_LT((residue(q, x0, xk) - expected).norm(), 1e-12 * (1.0 + expected.norm()));
  }
}

TEST(Residue, VanishesAtStartingPoint) {
  auto data = std::make_shared<const Dataset>(make_synthetic_multiclass(50, 4, 3, 2));
  const SoftmaxProblem p(data);
  std::mt19937_64 rng(3);
  const Vector x0 = random_vector(p.dim(), rng);
  EXPECT_EQ(residue(p, x0, x0).norm(), 0.0);
  EXPECT_THROW(residue(p, x0, Vector::Zero(3)), DimensionError);
}

TEST(Residue, NonzeroOnLogisticTrajectories) {
  auto data = std::make_shared<const Dataset>(make_synthetic_binary(60, 3, 4, 1.0));
  const LogisticProblem p(data);
  std::mt19937_64 rng(4);
  const Vector x0 = random_vector(3, rng);
  const Vector xk = x0 + 0.5 * random_vector(3, rng);
  EXPECT_GT(residue(p, x0, xk).norm(), 1e-6);
}

TEST(ResidueRatio, Examples) {
  EXPECT_DOUBLE_EQ(assumption3_ratio(10.0, 1.0), 10.0);
  EXPECT_TRUE(std::isinf(assumption3_ratio(5.0, 0.0)));
  EXPECT_TRUE(std::isinf(assumption3_ratio(5.0, 1e-16)));
  EXPECT_THROW(assumption3_ratio(-1.0, 1.0), ArgumentError);
}

TEST(EstimateResidue, QuadraticIsZeroWithInfiniteRatio) {
  auto base = make_synthetic_quadratic(4, {0.1, 0.5, 1.0, 2.0}, 5);
  const QuadraticProblem noisy(base->a(), base->b(), 0.2, 10);
  const ClientShard shard{0, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}};
  ResidueRequest req;
  req.iteration = 10;
  req.learning_rate = 0.1;
  req.batch_size = 2;
  req.trials = 50;
  const ResidueEstimate est = estimate_residue_expectation(noisy, shard, Vector::Ones(4), req);
  EXPECT_LT(est.mean_residue.norm(), 1e-12);
  EXPECT_TRUE(std::isinf(est.report.ratio));
  EXPECT_EQ(est.report.trials, 50u);
  EXPECT_EQ(est.report.excluded_trials, 0u);
}

TEST(EstimateResidue, ZeroIterationsGivesZero) {
  auto data = std::make_shared<const Dataset>(make_synthetic_binary(40, 3, 1, 1.0));
  const LogisticProblem p(data);
  const ClientShard shard{0, partition_iid(40, 1, 0).front().indices};
  ResidueRequest req;
  req.trials = 5;
  const ResidueEstimate est = estimate_residue_expectation(p, shard, Vector::Ones(3), req);
  EXPECT_EQ(est.mean_residue, Vector::Zero(3));
  EXPECT_TRUE(std::isinf(est.report.ratio));
  EXPECT_GT(est.report.grad_norm, 0.0);
}

TEST(EstimateResidue, Errors) {
  const QuadraticProblem p(Matrix::Identity(2, 2), Vector::Zero(2));
  ResidueRequest req;
  req.trials = 0;
  EXPECT_THROW(estimate_residue_expectation(p, ClientShard{0, {0}}, Vector::Zero(2), req),
               ArgumentError);
}

TEST(EstimateResidue, DivergingTrialsAreCounted) {
  // Every trial blows up: the estimate refuses to report.
  const CubicProblem p(1);
  ResidueRequest req;
  req.iteration = 60;
  req.learning_rate = 1.0;
  req.trials = 10;
  try {
    estimate_residue_expectation(p, ClientShard{0, {0}}, Vector::Constant(1, -2.0), req);
    FAIL() << "expected divergence";
  } catch (const DivergenceError&) {
  }
}

class ResidueFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    data_ = std::make_shared<const Dataset>(make_synthetic_multiclass(120, 4, 3, 9));
    problem_ = std::make_unique<SoftmaxProblem>(data_);
    shard_ = partition_iid(120, 3, 5).front();
    x0_ = Vector::Zero(static_cast<Eigen::Index>(problem_->dim()));
  }

  ResidueRequest request(std::size_t trials, std::uint64_t seed) const {
    ResidueRequest req;
    req.iteration = 20;
    req.learning_rate = 0.5;
    req.batch_size = 2;
    req.trials = trials;
    req.seed = seed;
    return req;
  }

  std::shared_ptr<const Dataset> data_;
  std::unique_ptr<SoftmaxProblem> problem_;
  ClientShard shard_;
  Vector x0_;
};

TEST_F(ResidueFixture, DeterministicPerSeedAndAcrossThreads) {
  ResidueRequest req = request(40, 17);
  const ResidueEstimate a = estimate_residue_expectation(*problem_, shard_, x0_, req);
  req.threads = 3;
  const ResidueEstimate b = estimate_residue_expectation(*problem_, shard_, x0_, req);
  EXPECT_EQ(a.mean_residue, b.mean_residue);
  EXPECT_EQ(a.report.residue_norm, b.report.residue_norm);
  req.seed = 18;
  EXPECT_NE(estimate_residue_expectation(*problem_, shard_, x0_, req).mean_residue,
            a.mean_residue);
  EXPECT_GT(a.report.residue_norm, 0.0);
  EXPECT_NEAR(a.report.ratio, a.report.grad_norm / a.report.residue_norm, 1e-12 * a.report.ratio);
  EXPECT_LE(a.report.trial_residue_norm.min, a.report.trial_residue_norm.mean);
  EXPECT_GE(a.report.trial_residue_norm.max, a.report.trial_residue_norm.mean);
  EXPECT_GE(a.report.trial_residue_norm.mean, a.report.residue_norm);
}

TEST_F(ResidueFixture, EstimateConvergesWithTrials) {
  // The spread across seeds of the T-trial estimate stands in for
  // sigma/sqrt(T); doubling T must move each coordinate by less than twice
  // that in at least 95% of cases.
  const std::size_t trials = 30, reps = 40;
  const auto d = static_cast<Eigen::Index>(problem_->dim());
  std::vector<Vector> base, doubled;
  for (std::size_t r = 0; r < reps; ++r) {
    base.push_back(estimate_residue_expectation(*problem_, shard_, x0_, request(trials, r))
                       .mean_residue);
    doubled.push_back(
        estimate_residue_expectation(*problem_, shard_, x0_, request(2 * trials, r))
            .mean_residue);
  }
  Vector mean = Vector::Zero(d), var = Vector::Zero(d);
  for (const Vector& v : base) mean += v / static_cast<double>(reps);
  for (const Vector& v : base) var += (v - mean).cwiseAbs2() / static_cast<double>(reps - 1);
  const Vector se = var.cwiseSqrt();
  std::size_t within = 0, total = 0;
  for (std::size_t r = 0; r < reps; ++r) {
    for (Eigen::Index j = 0; j < d; ++j) {
      if (se(j) == 0.0) continue;
      ++total;
      within += std::abs(doubled[r](j) - base[r](j)) < 2.0 * se(j);
    }
  }
  ASSERT_GT(total, 0u);
  EXPECT_GE(static_cast<double>(within), 0.95 * static_cast<double>(total));
}

TEST(LearningRateCondition, Examples) {
  const LearningRateCondition violated = check_learning_rate_condition(300, 0.01, 1.0, 1.558);
  EXPECT_FALSE(violated.satisfied);
  EXPECT_NEAR(violated.bound, 1.0 / 1.558, 1e-15);
  EXPECT_NEAR(violated.margin, 2.358, 5e-4);
  EXPECT_NEAR(violated.margin, 3.0 - 1.0 / 1.558, 1e-12);

  const LearningRateCondition ok = check_learning_rate_condition(1, 0.1, 1.0, 1.0);
  EXPECT_TRUE(ok.satisfied);
  EXPECT_NEAR(ok.margin, -0.9, 1e-15);

  EXPECT_THROW(check_learning_rate_condition(0, 0.1, 1.0, 1.0), ArgumentError);
  EXPECT_THROW(check_learning_rate_condition(1, 0.1, 0.0, 1.0), ArgumentError);
}

TEST(Audit, SharedShardDeterministicRunHasNoClientSpread) {
  auto data = std::make_shared<const Dataset>(make_synthetic_binary(30, 3, 2, 1.0));
  const LogisticProblem p(data);
  FedRunConfig cfg;
  cfg.clients = 4;
  cfg.local_steps = 3;
  cfg.rounds = 3;
  cfg.learning_rate = 0.1;
  cfg.full_batch = true;
  cfg.partition = PartitionMode::shared;
  cfg.record_all_rounds = true;
  const auto res = run_training(p, cfg, Vector::Zero(3));
  const std::vector<Vector> spectra{Eigen::Vector3d(0.1, 0.2, 0.3)};
  const AssumptionAudit a = audit_assumptions(res.traces, spectra, 3, 0.1, 1.0);
  EXPECT_EQ(a.sigma1_sq_hat, 0.0);
  EXPECT_NEAR(a.l_hat, 0.3, 1e-15);
  EXPECT_TRUE(a.lr_condition.satisfied);
  EXPECT_GT(a.g_hat, 0.0);
  EXPECT_FALSE(a.max_client_correlation.has_value());
  EXPECT_FALSE(a.notices.empty());
}

TEST(Audit, IidRunReportsIndependenceDiagnostic) {
  auto data = std::make_shared<const Dataset>(make_synthetic_multiclass(200, 4, 3, 3));
  const SoftmaxProblem p(data);
  FedRunConfig cfg;
  cfg.clients = 5;
  cfg.local_steps = 300;
  cfg.rounds = 2;
  cfg.learning_rate = 0.01;
  cfg.batch_size = 2;
  cfg.record_all_rounds = true;
  const auto res = run_training(p, cfg, Vector::Zero(static_cast<Eigen::Index>(p.dim())));
  const std::vector<Vector> spectra{Vector::Constant(3, -4.869e-10),
                                    (Vector(2) << -4.869e-10, 1.558).finished()};
  const AssumptionAudit a = audit_assumptions(res.traces, spectra, 300, 0.01, 1.0);
  EXPECT_NEAR(a.l_hat, 1.558, 1e-15);
  EXPECT_FALSE(a.lr_condition.satisfied);
  EXPECT_NEAR(a.lr_condition.margin, 3.0 - 1.0 / 1.558, 1e-12);
  ASSERT_TRUE(a.max_client_correlation.has_value());
  EXPECT_GE(*a.max_client_correlation, 0.0);
  EXPECT_LE(*a.max_client_correlation, 1.0 + 1e-12);
  ASSERT_TRUE(a.correlation_baseline.has_value());
  EXPECT_DOUBLE_EQ(*a.correlation_baseline, -0.25);
  EXPECT_GT(a.sigma1_sq_hat, 0.0);
  double g = 0.0;
  for (const RoundTrace& tr : res.traces) g = std::max(g, tr.max_step_grad_norm);
  EXPECT_EQ(a.g_hat, g);
  EXPECT_THROW(audit_assumptions({}, spectra, 1, 0.1, 1.0), ArgumentError);
}

TEST(Correlation, PerfectlyAnticorrelatedPair) {
  // Two clients: centring makes their updates exact negatives.
  const std::vector<Vector> two{Eigen::Vector3d(1.0, 2.0, 0.0), Eigen::Vector3d(0.0, 1.0, 3.0)};
  const auto c = max_pairwise_correlation(two);
  ASSERT_TRUE(c.has_value());
  EXPECT_NEAR(*c, 1.0, 1e-12);
  EXPECT_FALSE(max_pairwise_correlation(std::vector<Vector>{Vector::Ones(3)}).has_value());
}
