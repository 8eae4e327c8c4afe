#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <numbers>
#include <set>
#include <sstream>

#include "mapbench/synth.hpp"
#include "mapbench/trajectory.hpp"

using namespace mapbench;

namespace {

constexpr double kPi = std::numbers::pi;

// Homogeneous-matrix SE(2), independent of the closed-form ominus.
Eigen::Matrix3d mat(const Pose2& p) {
  Eigen::Matrix3d m;
  m << std::cos(p.theta), -std::sin(p.theta), p.x, std::sin(p.theta), std::cos(p.theta), p.y, 0, 0, 1;
  return m;
}

struct MatrixResidual {
  double t = 0.0;
  double r = 0.0;
};

MatrixResidual matrix_residual(const PoseSample& i, const PoseSample& j) {
  const Eigen::Matrix3d gt = mat(i.truth).inverse() * mat(j.truth);
  const Eigen::Matrix3d est = mat(i.estimated).inverse() * mat(j.estimated);
  const Eigen::Matrix3d e = gt.inverse() * est;
  return {std::hypot(e(0, 2), e(1, 2)), std::abs(std::atan2(e(1, 0), e(0, 0)))};
}

/// Exhaustive all-pairs error computed with matrices.
RunError matrix_oracle(const RunLog& run, ErrorMode mode) {
  double st = 0.0, sr = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < run.size(); ++i)
    for (std::size_t j = i + 1; j < run.size(); ++j) {
      const auto r = matrix_residual(run.samples[i], run.samples[j]);
      st += mode == ErrorMode::Absolute ? r.t : r.t * r.t;
      sr += mode == ErrorMode::Absolute ? r.r : r.r * r.r;
      ++n;
    }
  return {st / n, sr / n, mode, n};
}

RunLog identical_run(std::size_t poses) {
  RunLog run = synth::drifting_run("r", poses, 1);
  for (auto& s : run.samples) s.estimated = s.truth;
  return run;
}

RunLog two_pose_run(Pose2 gt_j, Pose2 est_j) {
  RunLog run;
  run.id = "pair";
  run.samples = {{0.0, Pose2{}, Pose2{}}, {1.0, est_j, gt_j}};
  return run;
}

}  // namespace

TEST(Angles, WrapIntoHalfOpenInterval) {
  EXPECT_DOUBLE_EQ(wrap_angle(kPi), kPi);
  EXPECT_DOUBLE_EQ(wrap_angle(-kPi), kPi);
  EXPECT_NEAR(wrap_angle(3 * kPi), kPi, 1e-12);
  EXPECT_NEAR(wrap_angle(0.5 + 4 * kPi), 0.5, 1e-12);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  for (int i = 0; i < 1000; ++i) {
    const double a = wrap_angle(u(rng));
    EXPECT_GT(a, -kPi);
    EXPECT_LE(a, kPi);
  }
}

TEST(Ominus, SpecExamples) {
  const RelPose a = ominus(Pose2{0, 0, 0}, Pose2{1, 0, kPi / 2});
  EXPECT_DOUBLE_EQ(a.dx, 1.0);
  EXPECT_DOUBLE_EQ(a.dy, 0.0);
  EXPECT_DOUBLE_EQ(a.dtheta, kPi / 2);

  const Pose2 x{3.2, -1.1, 0.7};
  const RelPose z = ominus(x, x);
  EXPECT_EQ(z.dx, 0.0);
  EXPECT_EQ(z.dy, 0.0);
  EXPECT_EQ(z.dtheta, 0.0);

  // Hand-evaluated rotation: b is one metre along a's x axis (world +y).
  const RelPose c = ominus(Pose2{0, 0, kPi / 2}, Pose2{0, 1, kPi / 2});
  EXPECT_NEAR(c.dx, 1.0, 1e-15);
  EXPECT_NEAR(c.dy, 0.0, 1e-15);
  EXPECT_EQ(c.dtheta, 0.0);
}

TEST(Ominus, InvertsCompose) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int i = 0; i < 200; ++i) {
    const Pose2 a{u(rng), u(rng), u(rng)};
    const RelPose d{u(rng), u(rng), u(rng)};
    const RelPose back = ominus(a, compose(a, d));
    EXPECT_NEAR(back.dx, d.dx, 1e-12);
    EXPECT_NEAR(back.dy, d.dy, 1e-12);
    EXPECT_NEAR(wrap_angle(back.dtheta - d.dtheta), 0.0, 1e-12);
  }
}

TEST(PairResidual, SpecExamples) {
  const Pose2 gi{1, 2, 0.3}, gj{2, 3, 1.0};
  const RelPose same = pair_residual(gi, gj, gi, gj);
  EXPECT_EQ(same.translation(), 0.0);
  EXPECT_EQ(same.dtheta, 0.0);

  const RelPose off = pair_residual(Pose2{}, Pose2{1.1, 0, 0}, Pose2{}, Pose2{1, 0, 0});
  EXPECT_NEAR(off.translation(), 0.1, 1e-15);
  EXPECT_EQ(off.dtheta, 0.0);
}

TEST(PairResidual, MatchesMatrixOracle) {
  const RunLog run = synth::drifting_run("r", 60, 11);
  for (std::size_t i = 0; i < run.size(); i += 7)
    for (std::size_t j = i + 1; j < run.size(); j += 5) {
      const auto& a = run.samples[i];
      const auto& b = run.samples[j];
      const RelPose r = pair_residual(a.estimated, b.estimated, a.truth, b.truth);
      const auto o = matrix_residual(a, b);
      EXPECT_NEAR(r.translation(), o.t, 1e-12);
      EXPECT_NEAR(std::abs(r.dtheta), o.r, 1e-12);
    }
}

TEST(PairResidual, FullTurnOffsetIsZeroRotation) {
  const RelPose r = pair_residual(Pose2{0, 0, 0}, Pose2{1, 0, 0.4 + 2 * kPi}, Pose2{0, 0, 0}, Pose2{1, 0, 0.4});
  EXPECT_NEAR(r.dtheta, 0.0, 1e-12);
}

TEST(PairResidual, LeftInvariantUnderGlobalTransform) {
  const RunLog run = synth::drifting_run("r", 40, 5);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int k = 0; k < 20; ++k) {
    const Pose2 g{u(rng), u(rng), u(rng)};
    auto move = [&](const Pose2& p) { return compose(g, RelPose{p.x, p.y, p.theta}); };
    for (std::size_t i = 0; i + 3 < run.size(); i += 3) {
      const auto& a = run.samples[i];
      const auto& b = run.samples[i + 3];
      const RelPose r0 = pair_residual(a.estimated, b.estimated, a.truth, b.truth);
      const RelPose r1 = pair_residual(move(a.estimated), move(b.estimated), move(a.truth), move(b.truth));
      EXPECT_NEAR(r0.dx, r1.dx, 1e-9);
      EXPECT_NEAR(r0.dy, r1.dy, 1e-9);
      EXPECT_NEAR(wrap_angle(r0.dtheta - r1.dtheta), 0.0, 1e-9);
    }
  }
}

TEST(SampleSize, ZScoreTable) {
  EXPECT_DOUBLE_EQ(z_score(0.99), 2.576);
  EXPECT_DOUBLE_EQ(z_score(0.95), 1.960);
  EXPECT_DOUBLE_EQ(z_score(0.90), 1.645);
  EXPECT_THROW(z_score(1.0), ValidationError);
}

TEST(SampleSize, SpecExamples) {
  SamplingPolicy p;
  p.confidence = 0.99;
  p.margin_t = 0.02;
  EXPECT_EQ(sample_size(0.25, p, 1'000'000), 4148u);
  EXPECT_EQ(sample_size(0.0, p, 1'000'000), p.pilot_pairs);
  EXPECT_EQ(sample_size(0.25, p, 1000), 1000u);  // clamp to available pairs
  p.square_z = false;
  EXPECT_EQ(required_samples(0.25, 0.02, 0.99, false), 1610u);
}

TEST(Sampling, TwoPosesGiveTheSinglePair) {
  const RunLog run = two_pose_run(Pose2{1, 0, 0}, Pose2{1.1, 0, 0});
  const RelationSample s = sample_relations(run, SamplingPolicy{});
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s.pairs[0], (IndexPair{0, 1}));
}

TEST(Sampling, ZeroVarianceGivesPilotSizedSample) {
  const RunLog run = identical_run(100);
  SamplingPolicy p;
  const RelationSample s = sample_relations(run, p);
  EXPECT_EQ(s.size(), p.pilot_pairs);
  std::set<IndexPair> unique(s.pairs.begin(), s.pairs.end());
  EXPECT_EQ(unique.size(), s.size());
  for (const auto& pr : s.pairs) EXPECT_LT(pr.i, pr.j);
}

TEST(Sampling, DeterministicPerSeed) {
  const RunLog run = synth::drifting_run("r", 300, 3);
  SamplingPolicy p;
  p.seed = 77;
  const auto a = sample_relations(run, p);
  const auto b = sample_relations(run, p);
  EXPECT_EQ(a.pairs, b.pairs);
  p.seed = 78;
  EXPECT_NE(sample_relations(run, p).pairs, a.pairs);
}

TEST(Sampling, PairIndexingCoversEveryPairOnce) {
  for (std::uint64_t T : {2u, 3u, 7u, 40u}) {
    std::vector<IndexPair> seen;
    for (std::uint64_t k = 0; k < T * (T - 1) / 2; ++k) seen.push_back(detail::pair_from_index(k, T));
    std::vector<IndexPair> expected;
    for (std::uint32_t i = 0; i + 1 < T; ++i)
      for (std::uint32_t j = i + 1; j < T; ++j) expected.push_back({i, j});
    EXPECT_EQ(seen, expected);
  }
}

TEST(LocalizationError, IdenticalTrajectoriesAreExactlyZero) {
  const RunLog run = identical_run(50);
  const RunError e = localization_error(run, all_relations(run));
  EXPECT_EQ(e.eps_t, 0.0);
  EXPECT_EQ(e.eps_r, 0.0);
}

TEST(LocalizationError, AbsoluteAndSquaredModes) {
  const RunLog run = two_pose_run(Pose2{1, 0, 0}, Pose2{1.1, 0, 0});
  const auto rel = all_relations(run);
  EXPECT_NEAR(localization_error(run, rel, ErrorMode::Absolute).eps_t, 0.1, 1e-15);
  EXPECT_NEAR(localization_error(run, rel, ErrorMode::Squared).eps_t, 0.01, 1e-15);
  EXPECT_EQ(localization_error(run, rel, ErrorMode::Absolute).eps_r, 0.0);
}

TEST(LocalizationError, ExhaustiveMatchesMatrixOracle) {
  const RunLog run = synth::drifting_run("r", 120, 8);
  for (const ErrorMode mode : {ErrorMode::Absolute, ErrorMode::Squared}) {
    const RunError e = localization_error(run, all_relations(run), mode);
    const RunError o = matrix_oracle(run, mode);
    EXPECT_EQ(e.n, o.n);
    EXPECT_NEAR(e.eps_t, o.eps_t, 1e-10 * std::max(1.0, o.eps_t));
    EXPECT_NEAR(e.eps_r, o.eps_r, 1e-12);
  }
}

TEST(LocalizationError, NonNegativeAndZeroOnlyForIdentity) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const RunLog run = synth::drifting_run("r", 80, seed);
    SamplingPolicy p;
    p.seed = seed;
    const RunError e = evaluate_run(run, p);
    EXPECT_GT(e.eps_t, 0.0);
    EXPECT_GT(e.eps_r, 0.0);
  }
}

TEST(LocalizationError, SampledAgreesWithExhaustiveWithinMargin) {
  const RunLog run = synth::drifting_run("r", 500, 21);
  const RunError exact = localization_error(run, all_relations(run));
  int within = 0;
  const int trials = 100;
  for (int s = 0; s < trials; ++s) {
    SamplingPolicy p;
    p.seed = static_cast<std::uint64_t>(s);
    const RunError e = evaluate_run(run, p);
    within += std::abs(e.eps_t - exact.eps_t) <= p.margin_t && std::abs(e.eps_r - exact.eps_r) <= p.margin_r;
  }
  EXPECT_GE(within, 95);
}

TEST(LocalizationError, SampledMeanIsUnbiased) {
  const RunLog run = synth::drifting_run("r", 200, 13);
  const RunError exact = localization_error(run, all_relations(run));
  SamplingPolicy p;
  p.margin_t = 0.2;  // keep samples well below the 19900 available pairs
  p.margin_r = 0.05;
  double sum = 0.0;
  std::size_t max_n = 0;
  for (int s = 0; s < 1000; ++s) {
    p.seed = static_cast<std::uint64_t>(s);
    const RunError e = evaluate_run(run, p);
    sum += e.eps_t;
    max_n = std::max(max_n, e.n);
  }
  EXPECT_LT(max_n, run.pair_count());
  EXPECT_NEAR(sum / 1000.0, exact.eps_t, 0.01 * exact.eps_t);
}

TEST(Aggregate, SpecExamples) {
  const PerformanceVector p = aggregate({{0.2, 0.01}, {0.4, 0.03}});
  EXPECT_DOUBLE_EQ(p.mean_eps_t, 0.3);
  EXPECT_DOUBLE_EQ(p.std_eps_t, 0.1);
  EXPECT_DOUBLE_EQ(p.mean_eps_r, 0.02);
  EXPECT_DOUBLE_EQ(p.std_eps_r, 0.01);
  EXPECT_EQ(p.runs, 2u);
  EXPECT_EQ(aggregate({{0.7, 0.1}}).std_eps_t, 0.0);
  EXPECT_THROW(aggregate({}), ValidationError);
}

TEST(Aggregate, CopiesHaveExactlyZeroSpread) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int i = 0; i < 500; ++i) {
    const RunError e{u(rng), u(rng) / 10, ErrorMode::Absolute, 100};
    const PerformanceVector p = aggregate(std::vector<RunError>(2 + rng() % 40, e));
    EXPECT_EQ(p.std_eps_t, 0.0);
    EXPECT_EQ(p.std_eps_r, 0.0);
    EXPECT_EQ(p.mean_eps_t, e.eps_t);
  }
}

TEST(RunCount, IdenticalRunsAreSatisfiedAtPilot) {
  SamplingPolicy p;
  const RunCountEstimate est = estimate_run_count(std::vector<RunError>(10, RunError{0.3, 0.02}), p);
  EXPECT_TRUE(est.satisfied);
  EXPECT_EQ(est.required, 10u);
  EXPECT_EQ(est.additional(), 0u);
  EXPECT_THROW(estimate_run_count(std::vector<RunError>(9, RunError{}), p), ValidationError);
}

TEST(RunCount, ReportsAdditionalRunsNeeded) {
  SamplingPolicy p;
  p.margin_t = 0.02;
  p.margin_r = 1.0;
  std::vector<RunError> batch;
  for (int i = 0; i < 10; ++i) batch.push_back({i % 2 ? 0.4 : 0.2, 0.0});
  // Unbiased variance of five 0.2s and five 0.4s is 0.1^2 * 10/9.
  const RunCountEstimate est = estimate_run_count(batch, p);
  EXPECT_FALSE(est.satisfied);
  EXPECT_EQ(est.required, required_samples(0.01 * 10.0 / 9.0, 0.02, 0.99));
  EXPECT_EQ(est.additional(), est.required - 10);
}

TEST(RunCount, NormalDrawsConvergeNearClosedForm) {
  // Raw draws: the stopping rule only ratchets upwards after an inflated pilot
  // variance, so the median overshoots the closed form slightly.
  SamplingPolicy p;
  p.confidence = 0.95;
  p.margin_t = 0.01;
  p.margin_r = 1.0;
  const double sigma = 0.05;
  const double target = std::ceil(1.96 * 1.96 * sigma * sigma / (p.margin_t * p.margin_t));
  std::vector<double> finals;
  for (std::uint64_t seed = 0; seed < 31; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.3, sigma);
    std::vector<RunError> batch;
    for (int i = 0; i < 10; ++i) batch.push_back({n(rng), 0.0});
    for (auto est = estimate_run_count(batch, p); !est.satisfied; est = estimate_run_count(batch, p))
      for (std::size_t k = 0; k < est.additional(); ++k) batch.push_back({n(rng), 0.0});
    finals.push_back(static_cast<double>(batch.size()));
  }
  std::nth_element(finals.begin(), finals.begin() + 15, finals.end());
  EXPECT_GE(finals[15], target - 1);
  EXPECT_LE(finals[15], 1.25 * target);
}

TEST(RunCount, ExactSigmaBatchesConvergeToClosedForm) {
  // Each batch is standardized to unbiased std sigma, so the closed form is exact.
  SamplingPolicy p;
  p.margin_t = 0.02;
  p.margin_r = 1.0;
  for (const double sigma : {0.03, 0.08, 0.15}) {
    const auto expected = required_samples(sigma * sigma, p.margin_t, p.confidence);
    std::mt19937_64 rng(static_cast<std::uint64_t>(sigma * 1000));
    std::normal_distribution<double> n01;
    std::vector<double> raw;
    auto batch_of = [&](std::size_t n) {
      while (raw.size() < n) raw.push_back(n01(rng));
      double m = 0.0, ss = 0.0;
      for (std::size_t i = 0; i < n; ++i) m += raw[i];
      m /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) ss += (raw[i] - m) * (raw[i] - m);
      const double sd = std::sqrt(ss / static_cast<double>(n - 1));
      std::vector<RunError> out;
      for (std::size_t i = 0; i < n; ++i) out.push_back({0.5 + sigma * (raw[i] - m) / sd, 0.0});
      return out;
    };
    std::size_t performed = p.pilot_runs;
    RunCountEstimate est = estimate_run_count(batch_of(performed), p);
    for (int guard = 0; !est.satisfied && guard < 50; ++guard) {
      performed += est.additional();
      est = estimate_run_count(batch_of(performed), p);
    }
    EXPECT_TRUE(est.satisfied);
    EXPECT_NEAR(static_cast<double>(performed), static_cast<double>(std::max<std::uint64_t>(expected, 10)), 1.0);
  }
}

TEST(RunLogCsv, RoundTripIsLossless) {
  const RunLog run = synth::drifting_run("r", 50, 2);
  std::stringstream ss;
  write_run_csv(ss, run);
  const RunLog back = parse_run_csv(ss, "r");
  ASSERT_EQ(back.size(), run.size());
  for (std::size_t i = 0; i < run.size(); ++i) {
    EXPECT_EQ(back.samples[i].t, run.samples[i].t);
    EXPECT_EQ(back.samples[i].estimated, run.samples[i].estimated);
    EXPECT_EQ(back.samples[i].truth, run.samples[i].truth);
  }
}

TEST(RunLogCsv, RejectsMalformedInput) {
  auto parse = [](const std::string& text) {
    std::stringstream ss(text);
    return parse_run_csv(ss, "bad");
  };
  const std::string header = "t,est_x,est_y,est_theta,gt_x,gt_y,gt_theta\n";
  EXPECT_THROW(parse(""), ParseError);
  EXPECT_THROW(parse("t,est_x\n0,1\n"), ParseError);
  EXPECT_THROW(parse(header + "0,1,2,3,4,5\n"), ParseError);
  EXPECT_THROW(parse(header + "0,1,2,x,4,5,6\n1,1,2,3,4,5,6\n"), ParseError);
  EXPECT_THROW(parse(header + "0,1,2,3,4,5,6\n"), ValidationError);
  EXPECT_THROW(parse(header + "1,1,2,3,4,5,6\n0,1,2,3,4,5,6\n"), ValidationError);
  // Column order is free.
  const RunLog ok = parse("gt_theta,gt_y,gt_x,est_theta,est_y,est_x,t\n0,0,0,0,0,0,0\n0,0,1,0,0,1,1\n");
  EXPECT_EQ(ok.samples[1].truth.x, 1.0);
}
