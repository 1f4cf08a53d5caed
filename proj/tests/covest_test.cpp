#include <gtest/gtest.h>

#include <vector>

#include "tdinf/covest.hpp"
#include "tdinf/error.hpp"
#include "tdinf/td.hpp"

using namespace tdinf;

namespace {

SampleTuple random_tuple(Rng& rng, Eigen::Index d) {
  SampleTuple t;
  t.A = Matrix(d, d);
  t.b = Vector(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    t.b(i) = 2.0 * uniform01(rng) - 1.0;
    for (Eigen::Index j = 0; j < d; ++j) t.A(i, j) = 2.0 * uniform01(rng) - 1.0;
  }
  return t;
}

Vector random_vector(Rng& rng, Eigen::Index d) {
  Vector v(d);
  for (Eigen::Index i = 0; i < d; ++i) v(i) = 2.0 * uniform01(rng) - 1.0;
  return v;
}

double max_rel(const Matrix& a, const Matrix& b) {
  const double scale = std::max(b.cwiseAbs().maxCoeff(), 1e-300);
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace

TEST(Accumulator, FirstSampleIsExact) {
  Rng rng(1);
  const SampleTuple t = random_tuple(rng, 3);
  MomentAccumulator acc(3);
  acc.update(t);
  EXPECT_EQ(acc.count(), 1);
  EXPECT_EQ(acc.a_bar(), t.A);
  EXPECT_LE((acc.aa_bar() - kron(t.A, t.A)).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LE((acc.ab_bar() - (kron(t.A, t.b) + kron(t.b, t.A))).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((acc.bb_bar() - kron(t.b, t.b)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Accumulator, RepeatedSampleLeavesMomentsUnchanged) {
  Rng rng(2);
  const SampleTuple t = random_tuple(rng, 2);
  MomentAccumulator acc(2);
  acc.update(t);
  const Matrix aa = acc.aa_bar();
  const Matrix ab = acc.ab_bar();
  acc.update(t);
  EXPECT_EQ(acc.a_bar(), t.A);
  EXPECT_EQ(acc.aa_bar(), aa);
  EXPECT_EQ(acc.ab_bar(), ab);
}

TEST(Accumulator, ShadowBatchMeans) {
  Rng rng(3);
  const Eigen::Index d = 3;
  MomentAccumulator acc(d);
  Matrix a = Matrix::Zero(d, d), aa = Matrix::Zero(d * d, d * d), ab = Matrix::Zero(d * d, d);
  Vector bb = Vector::Zero(d * d);
  const int n = 1000;
  for (int k = 0; k < n; ++k) {
    const SampleTuple t = random_tuple(rng, d);
    acc.update(t);
    a += t.A;
    aa += kron(t.A, t.A);
    ab += kron(t.A, t.b) + kron(t.b, t.A);
    bb += kron(t.b, t.b);
  }
  EXPECT_LE(max_rel(acc.a_bar(), a / n), 1e-10);
  EXPECT_LE(max_rel(acc.aa_bar(), aa / n), 1e-10);
  EXPECT_LE(max_rel(acc.ab_bar(), ab / n), 1e-10);
  EXPECT_LE(max_rel(acc.bb_bar(), bb / n), 1e-10);
}

TEST(Accumulator, FeatureUpdateMatchesMatrixUpdate) {
  const TabularMdp mdp = build_hard_mdp(10, 5, 0.2, 0.01);
  MomentAccumulator x(5), y(5);
  TupleSampler sampler(mdp, hard_mdp_stationary(10, 5));
  Rng rng(4);
  for (int k = 0; k < 200; ++k) {
    const SampleTuple t = sampler(rng);
    x.update(t);
    y.update_features(mdp.features.row(t.s).transpose(), mdp.features.row(t.s_next).transpose(), mdp.gamma,
                      t.reward);
  }
  EXPECT_LE((x.aa_bar() - y.aa_bar()).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE((x.ab_bar() - y.ab_bar()).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LE((x.bb_bar() - y.bb_bar()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Finalize, SingleSample) {
  Rng rng(5);
  const SampleTuple t = random_tuple(rng, 3);
  const Vector th = random_vector(rng, 3);
  MomentAccumulator acc(3);
  acc.update(t);
  const Vector v = t.A * th - t.b;
  EXPECT_LE(max_rel(acc.gamma_hat(th), v * v.transpose()), 1e-12);
}

TEST(Finalize, ZeroThetaGivesMeanOfBbT) {
  Rng rng(6);
  MomentAccumulator acc(2);
  Matrix bbt = Matrix::Zero(2, 2);
  for (int k = 0; k < 50; ++k) {
    const SampleTuple t = random_tuple(rng, 2);
    acc.update(t);
    bbt += t.b * t.b.transpose();
  }
  EXPECT_LE(max_rel(acc.gamma_hat(Vector::Zero(2)), bbt / 50), 1e-12);
}

TEST(Finalize, OnlineEqualsBatchOracle) {
  Rng rng(7);
  for (int k = 0; k < 50; ++k) {
    const Eigen::Index d = 1 + k % 4;
    std::vector<SampleTuple> samples;
    MomentAccumulator acc(d);
    for (int i = 0; i < 1000; ++i) {
      samples.push_back(random_tuple(rng, d));
      acc.update(samples.back());
    }
    const Vector th = random_vector(rng, d);
    EXPECT_LE(max_rel(acc.gamma_hat(th), batch_gamma_oracle(samples, th)), 1e-9);
  }
}

TEST(Finalize, ZeroResidualsAndErrors) {
  Matrix a = Matrix::Identity(2, 2);
  Vector th(2);
  th << 0.3, -0.7;
  SampleTuple t{0, 0, 0.0, a, a * th};
  std::vector<SampleTuple> samples{t, t};
  EXPECT_TRUE(batch_gamma_oracle(samples, th).isZero());

  MomentAccumulator empty(2);
  EXPECT_THROW(empty.gamma_hat(th), DomainError);
  MomentAccumulator acc(2);
  EXPECT_THROW(acc.update(Matrix::Identity(3, 3), Vector::Zero(3)), ShapeError);

  SampleTuple rank1{0, 0, 0.0, Matrix::Ones(2, 2), Vector::Ones(2)};
  acc.update(rank1);
  EXPECT_THROW(acc.finalize(th), SingularError);
}

TEST(Finalize, PsdAndLambdaDefinition) {
  const TabularMdp mdp = build_hard_mdp(10, 3, 0.2, 0.01);
  const Vector mu = hard_mdp_stationary(10, 3);
  TupleSampler sampler(mdp, mu);
  Rng rng(8);
  MomentAccumulator acc(3);
  TdState st = td_init(3);
  for (int t = 0; t < 5000; ++t) {
    const SampleTuple s = sampler(rng);
    acc.update(s);
    td_step(st, s, StepSchedule{});
  }
  const CovarianceEstimate est = acc.finalize(st.theta_bar);
  EXPECT_EQ(est.n, 5000);
  EXPECT_EQ(est.gamma_hat, est.gamma_hat.transpose());
  EXPECT_GE(lambda_min(est.gamma_hat), -1e-9 * est.gamma_hat.norm());
  const Matrix ainv = est.a_bar.inverse();
  EXPECT_LE(max_rel(est.lambda_hat, ainv * est.gamma_hat * ainv.transpose()), 1e-10);

  const nlohmann::json j = to_json(est);
  EXPECT_EQ(j.at("n").get<long>(), 5000);
  EXPECT_EQ(j.at("lambda_hat").size(), 3u);
}

// Lambda_hat error shrinks between t = 1e3 and 1e5 in nearly every trial.
TEST(Consistency, LambdaHatImproves) {
  const TabularMdp mdp = build_hard_mdp(10, 3, 0.2, 0.01);
  const GroundTruth g = ground_truth(mdp);
  TupleSampler sampler(mdp, g.mu);
  const StepSchedule sched{};
  int better = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    Rng rng(seed);
    MomentAccumulator acc(3);
    TdState st = td_init(3);
    SampleTuple s;
    double early = 0.0;
    for (long t = 1; t <= 100000; ++t) {
      sampler.sample_into(rng, s);
      acc.update_features(mdp.features.row(s.s).transpose(), mdp.features.row(s.s_next).transpose(), mdp.gamma,
                          s.reward);
      td_step_features(st, mdp.features.row(s.s).transpose(), mdp.features.row(s.s_next).transpose(), mdp.gamma,
                       s.reward, sched);
      if (t == 1000) early = (acc.finalize(st.theta_bar).lambda_hat - g.Lambda_star).norm();
    }
    const double late = (acc.finalize(st.theta_bar).lambda_hat - g.Lambda_star).norm();
    if (late < early) ++better;
  }
  EXPECT_GE(better, 95);
}
