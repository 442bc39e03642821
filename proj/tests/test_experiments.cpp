#include "skewmeet/experiments.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace skewmeet;

namespace {

SimParams small_params(double k1, double k2, double alpha) {
  SimParams p;
  p.kappa1 = k1;
  p.kappa2 = k2;
  p.alpha = alpha;
  p.x0 = {1.0, 1.0};
  p.horizon = 4.0;
  p.dt = 2e-3;
  p.seed = 5;
  return p;
}

const std::vector<double> kGrid{0.4, 0.2, 0.1};

}  // namespace

TEST(EstimateJointHit, ReportShapeAndInvariants) {
  const auto rep = estimate_joint_hit(small_params(0.5, 0.5, 0.5), kGrid, 200, 2);
  ASSERT_EQ(rep.hit_prob.size(), kGrid.size());
  EXPECT_EQ(rep.trials, 200u);
  EXPECT_EQ(rep.verdict_expected, Verdict::HitsAlmostSurely);
  EXPECT_NEAR(rep.S, closed_form_S_four_ray(0.5, 0.5, 0.5), 1e-15);
  EXPECT_EQ(rep.schema_version, kReportSchemaVersion);
  for (std::size_t j = 0; j < kGrid.size(); ++j) {
    EXPECT_GE(rep.hit_prob[j], 0.0);
    EXPECT_LE(rep.hit_prob[j], 1.0);
    EXPECT_LE(rep.ci[j].lo, rep.hit_prob[j]);
    EXPECT_GE(rep.ci[j].hi, rep.hit_prob[j]);
    EXPECT_GE(rep.ci_halfwidth[j], 0.0);
    // Nested balls: every hit of a smaller ball is a hit of the larger one.
    if (j > 0) {
      EXPECT_LE(rep.hits[j], rep.hits[j - 1]);
    }
  }
  EXPECT_TRUE(rep.underpowered);
}

TEST(EstimateJointHit, StartInsideBallHitsSurely) {
  const std::vector<double> grid{2.0, 1.0};
  const auto rep = estimate_joint_hit(small_params(0.5, -0.5, 0.5), grid, 100);
  EXPECT_EQ(rep.hit_prob[0], 1.0);
  EXPECT_EQ(rep.hit_prob[1], 1.0);
}

TEST(EstimateJointHit, IndependentOfThreadCount) {
  const auto a = estimate_joint_hit(small_params(0.5, -0.5, 0.5), kGrid, 150, 1);
  const auto b = estimate_joint_hit(small_params(0.5, -0.5, 0.5), kGrid, 150, 3);
  EXPECT_EQ(a.hits, b.hits);
}

TEST(EstimateJointHit, Preconditions) {
  EXPECT_THROW(estimate_joint_hit(small_params(0.5, 0.5, 0.5), kGrid, 99), DomainError);
  const std::vector<double> rising{0.1, 0.2};
  EXPECT_THROW(estimate_joint_hit(small_params(0.5, 0.5, 0.5), rising, 100), DomainError);
  SimParams bad = small_params(0.5, 0.5, 0.5);
  bad.alpha = 1.0;
  EXPECT_THROW(estimate_joint_hit(bad, kGrid, 100), DomainError);
}

TEST(Contrast, RatiosAndGuards) {
  const auto table = dichotomy_contrast(small_params(0.5, 0.5, 0.5),
                                        small_params(0.5, 0.5, -0.5), kGrid, 200);
  ASSERT_EQ(table.rows.size(), kGrid.size());
  for (const auto& row : table.rows) {
    if (row.lower_bound_only) {
      EXPECT_EQ(row.p_neg, 0.0);
      EXPECT_TRUE(std::isinf(row.ratio_ci.hi));
    } else if (row.p_pos > 0.0) {
      EXPECT_NEAR(row.ratio, row.p_pos / row.p_neg, 1e-15);
      EXPECT_LE(row.ratio_ci.lo, row.ratio);
      EXPECT_GE(row.ratio_ci.hi, row.ratio);
    }
  }
  EXPECT_THROW(dichotomy_contrast(small_params(0.5, 0.5, 0.5), small_params(0.4, 0.5, -0.5),
                                  kGrid, 200),
               std::invalid_argument);
}

TEST(Contrast, ZeroPermeabilityArmsLookAlike) {
  // kappa1 = 0 in both arms: the laws coincide up to the alpha reflection.
  const auto table = dichotomy_contrast(small_params(0.0, 0.5, 0.5),
                                        small_params(0.0, -0.5, 0.5), kGrid, 400);
  EXPECT_EQ(table.positive.verdict_expected, Verdict::DoesNotHit);
  EXPECT_EQ(table.negative.verdict_expected, Verdict::DoesNotHit);
  const auto& last = table.rows.front();
  EXPECT_LE(last.ratio_ci.lo, 1.0);
  EXPECT_GE(last.ratio_ci.hi, 1.0);
}

TEST(MarginalSuite, SmallBudget) {
  const std::vector<double> kappas{-0.5, 1.0};
  const auto rows = marginal_law_suite(kappas, 1.0, 1e-3, 4000, 3);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_TRUE(rows[0].pass);
  EXPECT_EQ(rows[1].p_hat, 1.0);
  EXPECT_EQ(rows[0].expected, 0.25);
}

TEST(Decorrelation, WhitenedAndRaw) {
  for (double alpha : {-0.9, 0.5}) {
    const auto res = decorrelation_test(alpha, 100000, 42);
    EXPECT_TRUE(res.pass) << alpha;
    EXPECT_NEAR(res.bound, 3.0 / std::sqrt(1e5), 1e-15);
    EXPECT_NEAR(res.rho_raw, alpha, 0.01);
  }
}

TEST(Sweep, SingleCellReducesToEstimate) {
  SweepGrid grid{{0.5}, {0.5}, {0.5}};
  const auto res = sweep(grid, small_params(0.0, 0.0, 0.0), kGrid, 150);
  ASSERT_EQ(res.rows.size(), 1u);
  const auto direct = estimate_joint_hit(small_params(0.5, 0.5, 0.5), kGrid, 150);
  EXPECT_EQ(res.rows[0].report->hits, direct.hits);
  EXPECT_EQ(res.evaluated, 1u);
  EXPECT_TRUE(res.rows[0].near_zero);
}

TEST(Sweep, RecordsCellFailuresAndContinues) {
  SweepGrid grid{{0.5, 1.5}, {0.5}, {0.5}};
  const auto res = sweep(grid, small_params(0.0, 0.0, 0.0), kGrid, 100);
  ASSERT_EQ(res.rows.size(), 2u);
  EXPECT_TRUE(res.rows[0].report.has_value());
  EXPECT_FALSE(res.rows[1].report.has_value());
  EXPECT_FALSE(res.rows[1].error.empty());
  EXPECT_EQ(res.evaluated, 1u);
}

TEST(Sweep, ZeroProductCellsAreNoHit) {
  SweepGrid grid{{0.0, 0.5}, {0.5}, {0.0, 0.5}};
  const auto res = sweep(grid, small_params(0.0, 0.0, 0.0), kGrid, 100);
  for (const auto& row : res.rows) {
    if (row.kappa1 * row.kappa2 * row.alpha == 0.0) {
      EXPECT_EQ(row.verdict, Verdict::DoesNotHit);
      EXPECT_EQ(row.S, 0.0);
    }
  }
}

TEST(Sweep, NearZeroMarksSmallestAbsS) {
  SweepGrid grid{{0.25, 0.5}, {0.25, 0.5}, {0.5}};
  const auto res = sweep(grid, small_params(0.0, 0.0, 0.0), kGrid, 100);
  // ceil(0.1 * 4) = 1 cell: the (0.25, 0.25) one.
  int marked = 0;
  for (const auto& row : res.rows) {
    marked += row.near_zero;
    if (row.near_zero) {
      EXPECT_EQ(row.kappa1, 0.25);
      EXPECT_EQ(row.kappa2, 0.25);
    }
  }
  EXPECT_EQ(marked, 1);
}

TEST(EmpiricalVerdict, Threshold) {
  ExperimentReport rep;
  rep.hit_prob = {0.5, 0.3};
  EXPECT_EQ(empirical_verdict(rep, 0.55), Verdict::HitsAlmostSurely);
  EXPECT_EQ(empirical_verdict(rep, 0.65), Verdict::DoesNotHit);
  rep.hit_prob = {0.0, 0.0};
  EXPECT_EQ(empirical_verdict(rep), Verdict::DoesNotHit);
}

TEST(HorizonSensitivity, DoubledHorizonHitsAtLeastAsOften) {
  const auto [base, doubled] =
      horizon_sensitivity(small_params(0.5, 0.5, 0.5), kGrid, 150);
  EXPECT_EQ(doubled.params.horizon, 2.0 * base.params.horizon);
  for (std::size_t j = 0; j < kGrid.size(); ++j) EXPECT_GE(doubled.hits[j], base.hits[j]);
}
