#include <gtest/gtest.h>

#include <cmath>

#include "netabs/casestudy.hpp"
#include "netabs/compose.hpp"
#include "test_support.hpp"

using namespace netabs;
using netabs::testing::Rng;

namespace {

NetworkRun aggregation(Eigen::Index n = 9, std::vector<Eigen::Index> partition = {3, 3, 3}, double lambda = 2.0,
                       GraphKind kind = GraphKind::Complete) {
  CaseStudyConfig cfg;
  cfg.graph = GraphDescriptor{kind, n, {}};
  cfg.partition = std::move(partition);
  cfg.lambda = lambda;
  return build_case_study(cfg);
}

/// Aggregation run on an explicit graph, one block per node.
NetworkRun singleton_run(const Matrix& adjacency, double lambda = 1.0) {
  CaseStudyConfig cfg;
  cfg.graph = GraphDescriptor{GraphKind::Explicit, adjacency.rows(), adjacency};
  cfg.partition.assign(adjacency.rows(), 1);
  cfg.lambda = lambda;
  std::vector<Matrix> rows(adjacency.rows(), Matrix::Ones(1, 1));
  cfg.output_rows = rows;
  return build_case_study(cfg);
}

std::vector<StorageCertificate> certificates(const InterconnectionSpec& spec) {
  std::vector<StorageCertificate> out;
  for (const auto& c : spec.components) out.push_back(c.certificate);
  return out;
}

Matrix block_ones_J(Eigen::Index n) { return Matrix::Ones(n, n); }

}  // namespace

// ---------------------------------------------------------------------------
// Supply matrix assembly.

TEST(AssembleX, SingleComponentIsScaledSupply) {
  const auto run = aggregation();
  const auto& c = run.spec.components[0].certificate;
  Vector mu(1);
  mu << 2.5;
  const Matrix X = assemble_X({c}, mu);
  EXPECT_LT((X - 2.5 * c.X()).norm(), 1e-15);
}

TEST(AssembleX, AggregationExample) {
  const auto run = aggregation();
  const Matrix X = assemble_X(certificates(run.spec), Vector::Ones(3));
  Matrix ref = Matrix::Zero(18, 18);
  ref.topRightCorner(9, 9) = Matrix::Identity(9, 9);
  ref.bottomLeftCorner(9, 9) = Matrix::Identity(9, 9);
  EXPECT_EQ(X, ref);
}

TEST(AssembleX, ZeroWeightDropsBlock) {
  const auto run = aggregation();
  Vector mu(3);
  mu << 1, 0, 1;
  const Matrix X = assemble_X(certificates(run.spec), mu);
  EXPECT_EQ(X.block(3, 12, 3, 3), Matrix::Zero(3, 3));
  EXPECT_EQ(X.block(0, 9, 3, 3), Matrix::Identity(3, 3));
  try {
    assemble_X(certificates(run.spec), Vector::Ones(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimensionMismatch);
  }
}

// ---------------------------------------------------------------------------
// Interconnection conditions.

TEST(Condition5, LaplacianCouplingExamples) {
  auto run = aggregation();
  const Matrix L = build_laplacian({GraphKind::Complete, 9, {}});
  auto r = check_condition5(run.spec, Vector::Ones(3));
  EXPECT_TRUE(r.holds);
  // The quadratic form is -L - L^T, whose top eigenvalue is 0 on the consensus direction.
  EXPECT_NEAR(r.value, 0.0, 1e-12);

  run.spec.M = L;
  r = check_condition5(run.spec, Vector::Ones(3));
  EXPECT_FALSE(r.holds);
  EXPECT_NEAR(r.value, 18.0, 1e-9);  // 2 lambda_max(L) for K9
}

TEST(Condition5, ZeroSupplyHoldsTrivially) {
  auto run = aggregation();
  for (auto& c : run.spec.components) {
    c.certificate.X12.setZero();
    c.certificate.X21.setZero();
  }
  const auto r = check_condition5(run.spec, Vector::Ones(3));
  EXPECT_TRUE(r.holds);
  EXPECT_EQ(r.value, 0.0);
}

TEST(Condition6, Examples) {
  const auto run = aggregation();
  const auto Mh = solve_abstract_coupling(run.spec);
  ASSERT_TRUE(Mh.has_value());
  auto r = check_condition6(run.spec, *Mh);
  EXPECT_TRUE(r.holds);
  EXPECT_LE(r.value, 1e-12);
  r = check_condition6(run.spec, Matrix::Zero(3, 3));
  EXPECT_FALSE(r.holds);
  EXPECT_NEAR(r.value, 6.0, 1e-12);
  EXPECT_THROW(check_condition6(run.spec, Matrix::Zero(2, 3)), Error);
}

TEST(SolveAbstractCoupling, CompleteGraphThreeBlocks) {
  const auto run = aggregation();
  const auto Mh = solve_abstract_coupling(run.spec);
  ASSERT_TRUE(Mh.has_value());
  const Matrix ref = -(9.0 * Matrix::Identity(3, 3) - 3.0 * block_ones_J(3));
  EXPECT_LT((*Mh - ref).norm(), 1e-12);

  bool consistent = false;
  const Matrix oracle = netabs::testing::block_row_sums(run.spec.M, {3, 3, 3}, &consistent);
  EXPECT_TRUE(consistent);
  EXPECT_LT((*Mh - oracle).norm(), 1e-12);
}

TEST(SolveAbstractCoupling, TrivialPartitionReproducesCoupling) {
  const auto run = aggregation(4, {1, 1, 1, 1}, 1.0, GraphKind::Path);
  const auto Mh = solve_abstract_coupling(run.spec);
  ASSERT_TRUE(Mh.has_value());
  const Matrix L = netabs::testing::laplacian_from_edges(4, {{0, 1}, {1, 2}, {2, 3}});
  EXPECT_LT((*Mh + L).norm(), 1e-12);
}

TEST(SolveAbstractCoupling, NonEquitablePartitionIsInfeasible) {
  const auto run = aggregation(3, {2, 1}, 1.0, GraphKind::Path);
  bool consistent = true;
  netabs::testing::block_row_sums(run.spec.M, {2, 1}, &consistent);
  EXPECT_FALSE(consistent);
  EXPECT_FALSE(solve_abstract_coupling(run.spec).has_value());
  const auto cc = certify_composition(run.spec, Vector::Ones(2));
  EXPECT_FALSE(cc.passed());
  EXPECT_GT(cc.condition6_residual, 0.1);
}

TEST(SolveAbstractCoupling, EmptyAbstractChannel) {
  auto run = aggregation();
  for (auto& c : run.spec.components) {
    c.certificate.What = Matrix::Zero(3, 0);
    c.abstraction.D = Matrix::Zero(1, 0);
  }
  // W M H != 0 cannot be matched with no abstract channel.
  EXPECT_FALSE(solve_abstract_coupling(run.spec).has_value());
  // A decoupled network can.
  run.spec.M.setZero();
  const auto Mh = solve_abstract_coupling(run.spec);
  ASSERT_TRUE(Mh.has_value());
  EXPECT_EQ(Mh->rows(), 0);
  EXPECT_EQ(Mh->cols(), 3);
  const auto r = check_condition6(run.spec, *Mh);
  EXPECT_TRUE(r.holds);
  EXPECT_EQ(r.value, 0.0);
}

// ---------------------------------------------------------------------------
// Composed comparison functions.

TEST(ComposeComparison, SingleComponentIsScaled) {
  ComparisonFunctions p;
  p.alpha_coeff = 2.0;
  p.eta_coeff = 3.0;
  p.rho_coeff = 5.0;
  Vector mu(1);
  mu << 0.5;
  const auto cf = compose_comparison_functions({p}, mu, {true});
  EXPECT_DOUBLE_EQ(cf.alpha_coeff, 1.0);
  EXPECT_DOUBLE_EQ(cf.eta_coeff, 3.0);
  EXPECT_DOUBLE_EQ(cf.rho_coeff, 2.5);
}

TEST(ComposeComparison, AggregationExample) {
  const auto run = aggregation();
  const auto cc = certify_composition(run.spec, Vector::Ones(3));
  EXPECT_TRUE(cc.passed());
  EXPECT_NEAR(cc.composite_cf.alpha_coeff, 1.0 / 3.0, 1e-14);
  EXPECT_NEAR(cc.composite_cf.eta_coeff, 2.0, 1e-14);
  EXPECT_EQ(cc.composite_cf.rho_coeff, 0.0);
}

TEST(ComposeComparison, KappaIsSmallestWeightedRate) {
  ComparisonFunctions a, b;
  a.eta_coeff = 1.0;
  b.eta_coeff = 3.0;
  EXPECT_DOUBLE_EQ(compose_comparison_functions({a, b}, Vector::Ones(2), {true, true}).eta_coeff, 1.0);
  Vector mu(2);
  mu << 0.0, 1.0;
  EXPECT_DOUBLE_EQ(compose_comparison_functions({a, b}, mu, {false, true}).eta_coeff, 3.0);
  try {
    compose_comparison_functions({a, b}, mu, {true, true});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConditionsNotCertified);
  }
}

TEST(ComposeComparisonProperty, MatchesGridOracles) {
  Rng rng(61);
  for (int trial = 0; trial < 20; ++trial) {
    Vector mu(3), ca(3), ck(3), cr(3);
    for (int i = 0; i < 3; ++i) {
      mu(i) = rng.uniform(0.2, 3.0);
      ca(i) = rng.uniform(0.2, 3.0);
      ck(i) = rng.uniform(0.2, 3.0);
      cr(i) = rng.uniform(0.0, 3.0);
    }
    std::vector<ComparisonFunctions> parts(3);
    for (int i = 0; i < 3; ++i) {
      parts[i].alpha_coeff = ca(i);
      parts[i].eta_coeff = ck(i);
      parts[i].rho_coeff = cr(i);
    }
    const auto cf = compose_comparison_functions(parts, mu, {true, true, true});
    const double ga = netabs::testing::grid_alpha_coeff(mu, ca);
    const double gk = netabs::testing::grid_kappa(mu, ck);
    const double gr = netabs::testing::grid_rho_coeff(mu, cr, rng);
    // The grid maximum of the alpha problem can only undershoot the true one.
    EXPECT_LE(cf.alpha_coeff, ga * (1.0 + 1e-12));
    EXPECT_NEAR(cf.alpha_coeff, ga, 0.01 * ga);
    EXPECT_NEAR(cf.eta_coeff, gk, 0.01 * gk);
    EXPECT_NEAR(cf.rho_coeff, gr, 0.01 * gr + 1e-15);
  }
}

// ---------------------------------------------------------------------------
// Simulation function.

TEST(CompositeSimulationFunction, AggregationExample) {
  const auto run = aggregation();
  const auto Mh = *solve_abstract_coupling(run.spec);
  const auto V = compose_simulation_function(run.spec, Vector::Ones(3), Mh);
  Vector x = Vector::LinSpaced(9, 1.0, 9.0), xh(3);
  xh << 2.0, 5.0, 8.0;
  // Block deviations (-1, 0, 1) in each block.
  EXPECT_NEAR(V(x, xh), 6.0, 1e-12);
  EXPECT_NEAR(V(x, Vector::Zero(3)), x.squaredNorm(), 1e-12);
  EXPECT_THROW(V(x, Vector::Zero(2)), Error);
  EXPECT_NEAR(V.comparison().alpha_coeff, 1.0 / 3.0, 1e-14);
}

TEST(CompositeSimulationFunction, RequiresBothConditions) {
  auto run = aggregation();
  const auto Mh = *solve_abstract_coupling(run.spec);
  run.spec.M = -run.spec.M;
  try {
    compose_simulation_function(run.spec, Vector::Ones(3), -Mh);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConditionsNotCertified);
  }
  run = aggregation();
  EXPECT_THROW(compose_simulation_function(run.spec, Vector::Ones(3), Matrix::Zero(3, 3)), Error);
}

TEST(VerifyComposite, AggregationPasses) {
  const auto run = aggregation();
  const auto Mh = *solve_abstract_coupling(run.spec);
  const auto rep = verify_composite(run.spec, Vector::Ones(3), Mh, 10000, 3);
  EXPECT_TRUE(rep.passed());
  ASSERT_NE(rep.find("composite_dissipation"), nullptr);
  ASSERT_NE(rep.find("composite_output_bound"), nullptr);
}

TEST(VerifyComposite, SignFlippedCouplingFails) {
  auto run = aggregation();
  run.spec.M = -run.spec.M;
  const auto Mh = *solve_abstract_coupling(run.spec);
  const auto rep = verify_composite(run.spec, Vector::Ones(3), Mh, 2000, 3);
  EXPECT_FALSE(rep.find("composite_dissipation")->passed);
  EXPECT_TRUE(rep.find("composite_output_bound")->passed);
  ASSERT_TRUE(rep.find("composite_dissipation")->witness.has_value());
  EXPECT_EQ(rep.find("composite_dissipation")->witness->size(), 9u + 3u + 3u);
}

TEST(SearchMu, AggregationKeepsConditionFive) {
  const auto run = aggregation();
  const Vector mu = search_mu(run.spec, 2);
  ASSERT_EQ(mu.size(), 3);
  EXPECT_EQ(mu(0), 1.0);
  EXPECT_TRUE(check_condition5(run.spec, mu).holds);
}

// ---------------------------------------------------------------------------
// Properties.

TEST(CompositionProperty, RandomGraphsCertifyWithZeroMargin) {
  Rng rng(62);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = rng.integer(2, 8);
    Matrix adj = Matrix::Zero(n, n);
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (rng.coin(0.4)) {
          adj(i, j) = adj(j, i) = 1.0;
          edges.emplace_back(i, j);
        }
    const auto run = singleton_run(adj, rng.uniform(0.5, 3.0));
    const Matrix L = netabs::testing::laplacian_from_edges(n, edges);
    const auto cc = certify_composition(run.spec, Vector::Ones(n));
    // margin = -2 lambda_min(L) = 0 since every Laplacian has the constant kernel vector.
    EXPECT_NEAR(cc.condition5_margin, 0.0, 1e-9) << trial;
    EXPECT_TRUE(cc.passed()) << trial;
    EXPECT_LT((cc.Mhat_coupling + L).norm(), 1e-12) << trial;
  }
}

TEST(CompositionProperty, ScaleFreeInNetworkSize) {
  for (Eigen::Index n : {6, 9, 30, 90}) {
    const Eigen::Index b = n / 3;
    const auto run = aggregation(n, {b, b, b});
    const auto cc = certify_composition(run.spec, Vector::Ones(3));
    EXPECT_TRUE(cc.passed()) << n;
    EXPECT_NEAR(cc.composite_cf.alpha_coeff, 1.0 / 3.0, 1e-12) << n;
    EXPECT_NEAR(cc.composite_cf.eta_coeff, 2.0, 1e-12) << n;
    const Matrix ref = -(static_cast<double>(n) * Matrix::Identity(3, 3) - static_cast<double>(b) * block_ones_J(3));
    EXPECT_LT((cc.Mhat_coupling - ref).norm(), 1e-9 * n) << n;
    // Every component stays three-dimensional (1 abstract state).
    for (const auto& c : run.spec.components) EXPECT_EQ(c.abstraction.n(), 1);
  }
}
