#include "fixtures.hpp"
#include "oracles.hpp"
#include "modt/error.hpp"
#include "modt/gating.hpp"

#include <doctest.h>

#include <cmath>

using namespace modt;

TEST_SUITE("gating") {

TEST_CASE("gate input columns") {
  Matrix X(2, 3);
  X << 1, 2, 3,
       4, 5, 6;
  Matrix full(2, 4);
  full << 1, 2, 3, 1,
          4, 5, 6, 1;
  CHECK(gate_input(X, GateMode::full()) == full);

  Matrix row(1, 4);
  row << 7, 8, 9, 10;
  Matrix two(1, 3);
  two << 7, 9, 1;
  CHECK(gate_input(row, GateMode::two_d(0, 2)) == two);

  try {
    gate_input(row, GateMode::two_d(1, 1));
    FAIL("expected BadFeatureIndex");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::BadFeatureIndex);
  }
  CHECK_THROWS_AS(gate_input(row, GateMode::two_d(0, 4)), Error);
}

TEST_CASE("zero theta gives uniform rows") {
  const Matrix Xg = Matrix::Random(5, 3);
  const Matrix G = gating_values(Xg, Matrix::Zero(3, 3));
  for (Eigen::Index i = 0; i < 5; ++i)
    for (Eigen::Index j = 0; j < 3; ++j) CHECK(G(i, j) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("logits ln7, ln2, ln1") {
  Matrix Xg(1, 1);
  Xg << 1.0;
  Matrix theta(1, 3);
  theta << std::log(7.0), std::log(2.0), std::log(1.0);
  const Matrix G = gating_values(Xg, theta);
  const auto oracle_row = oracle::naive_softmax({std::log(7.0), std::log(2.0), 0.0});
  for (Eigen::Index j = 0; j < 3; ++j) CHECK(G(0, j) == doctest::Approx(oracle_row[static_cast<std::size_t>(j)]));
  CHECK(G(0, 0) == doctest::Approx(0.7));
  CHECK(G(0, 1) == doctest::Approx(0.2));
  CHECK(G(0, 2) == doctest::Approx(0.1));
}

TEST_CASE("shifting one row of logits leaves it unchanged") {
  Matrix Xg(2, 2);
  Xg << 0.3, 1.0,
        -0.7, 1.0;
  Matrix theta(2, 3);
  theta << 1.0, -2.0, 0.5,
           0.2, 0.1, -0.3;
  const Matrix G = gating_values(Xg, theta);
  // Adding c to the bias row shifts every logit of a row by c.
  Matrix shifted_theta = theta;
  shifted_theta.row(1).array() += 50.0;
  Matrix single(1, 2);
  single << 0.3, 1.0;
  const Matrix Gs = gating_values(single, shifted_theta);
  for (Eigen::Index j = 0; j < 3; ++j) CHECK(Gs(0, j) == doctest::Approx(G(0, j)).epsilon(1e-12));
}

TEST_CASE("huge logits stay finite and row-stochastic") {
  Matrix Xg(1, 1);
  Xg << 1.0;
  Matrix theta(1, 3);
  theta << 1e6, -1e6, 1e6 - 1.0;
  const Matrix G = gating_values(Xg, theta);
  CHECK(G.row(0).sum() == doctest::Approx(1.0));
  CHECK(std::isfinite(G(0, 0)));
  CHECK(G(0, 1) >= 0.0);
  CHECK(G(0, 1) < 1e-300);
  CHECK(G(0, 2) == doctest::Approx(1.0 / (1.0 + std::exp(1.0))));
}

TEST_CASE("gating value errors") {
  const Matrix Xg = Matrix::Ones(2, 3);
  CHECK_THROWS_AS(gating_values(Xg, Matrix::Zero(2, 3)), Error);
  Matrix bad = Xg;
  bad(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(gating_values(bad, Matrix::Zero(3, 2)), Error);
}

TEST_CASE("select expert") {
  const std::vector<double> row{0.7, 0.2, 0.1}, tie{0.5, 0.5}, last{0.1, 0.2, 0.7};
  CHECK(select_expert(row) == 0);
  CHECK(select_expert(tie) == 0);
  CHECK(select_expert(last) == 2);
}

TEST_CASE("init theta") {
  const Matrix a = init_theta(2, 3, 9);
  CHECK(a.rows() == 3);
  CHECK(a.cols() == 3);
  CHECK(a == init_theta(2, 3, 9));
  CHECK(a != init_theta(2, 3, 10));
  CHECK(a.maxCoeff() <= 1.0);
  CHECK(a.minCoeff() >= -1.0);

  const Matrix one = init_theta(4, 1, 3);
  const Matrix G = gating_values(Matrix::Random(10, 5) * 100.0, one);
  CHECK(G == Matrix::Ones(10, 1));
}

TEST_CASE("two features always select (0,1)") {
  Rng rng(1);
  const auto d = fixtures::random_dataset(rng, 40, 2, 2);
  for (auto method : {SelectionMethod::TreeImportance, SelectionMethod::LinearImportance, SelectionMethod::Pca})
    CHECK(select_gating_features(d.X, d.y, 2, method) == FeaturePair{0, 1});
}

TEST_CASE("the only informative feature ranks first") {
  Rng rng(4);
  Matrix X(60, 4);
  std::vector<int> y(60);
  for (Eigen::Index i = 0; i < 60; ++i) {
    X(i, 0) = 3.0;
    X(i, 1) = rng.uniform(-1.0, 1.0);
    X(i, 2) = -1.0;
    X(i, 3) = 2.0;
    y[static_cast<std::size_t>(i)] = X(i, 1) > 0.2;
  }
  CHECK(select_gating_features(X, y, 2, SelectionMethod::TreeImportance).first == 1);
  CHECK(select_gating_features(X, y, 2, SelectionMethod::LinearImportance).first == 1);
  CHECK(select_gating_features(X, y, 2, SelectionMethod::Pca).first == 1);
}

TEST_CASE("tree importance ranks by hand-computed Gini decrease") {
  // Root on feature 0 removes 8 * 30/64 - 1.5 = 2.25; the follow-up split on
  // feature 2 removes 1.5 - 1.0 = 0.5; feature 1 is constant.
  Matrix X(8, 3);
  X << 0, 5, 0,
       0, 5, 0,
       0, 5, 1,
       0, 5, 1,
       1, 5, 0,
       1, 5, 0,
       1, 5, 1,
       1, 5, 1;
  const std::vector<int> y{0, 0, 0, 1, 1, 1, 1, 1};
  CHECK(select_gating_features(X, y, 2, SelectionMethod::TreeImportance) == FeaturePair{0, 2});
}

TEST_CASE("manual pair") {
  Matrix X = Matrix::Random(10, 5);
  const std::vector<int> y(10, 0);
  CHECK(select_gating_features(X, y, 2, SelectionMethod::Manual, FeaturePair{3, 1}) == FeaturePair{3, 1});
  CHECK_THROWS_AS(select_gating_features(X, y, 2, SelectionMethod::Manual, FeaturePair{3, 3}), Error);
  CHECK_THROWS_AS(select_gating_features(X, y, 2, SelectionMethod::Manual, FeaturePair{3, 5}), Error);
  CHECK_THROWS_AS(select_gating_features(X, y, 2, SelectionMethod::Manual), Error);
  CHECK_THROWS_AS(select_gating_features(Matrix::Random(10, 1), y, 2, SelectionMethod::Pca), Error);
}

TEST_CASE("expert count from well separated blobs") {
  const Matrix X = fixtures::blobs(60, 3, 8.0, 21);
  CHECK(estimate_expert_count(X, 6, 0) == 3);
  // Closed-form BIC for one component and for the generating partition.
  std::vector<std::size_t> one(180, 0), truth(180);
  for (std::size_t i = 0; i < 180; ++i) truth[i] = i / 60;
  const double bic1 = oracle::spherical_bic(X, one, 1);
  const double bic3 = oracle::spherical_bic(X, truth, 3);
  CHECK(gmm_bic(X, 1, 0) == doctest::Approx(bic1).epsilon(1e-9));
  CHECK(gmm_bic(X, 3, 0) == doctest::Approx(bic3).epsilon(1e-6));
  CHECK(bic3 < bic1);
  for (std::size_t k = 1; k <= 6; ++k)
    if (k != 3) CHECK(gmm_bic(X, k, 0) > gmm_bic(X, 3, 0));
}

TEST_CASE("identical points and e_max = 1 give one expert") {
  const Matrix same = Matrix::Constant(20, 2, 1.5);
  CHECK(estimate_expert_count(same, 5, 0) == 1);
  CHECK(estimate_expert_count(fixtures::blobs(30, 3, 8.0, 2), 1, 0) == 1);
  CHECK_THROWS_AS(estimate_expert_count(same, 20, 0), Error);
}

}  // TEST_SUITE
