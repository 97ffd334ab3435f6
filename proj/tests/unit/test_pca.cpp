#include <doctest.h>

#include "drcnn/error.hpp"
#include "drcnn/pca.hpp"
#include "drcnn/random.hpp"

using namespace drcnn;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) x(i, j) = rng.normal() * double(j + 1);
  }
  // Mix the columns so the covariance is not diagonal.
  Eigen::MatrixXd mix = Eigen::MatrixXd::Identity(cols, cols);
  for (Eigen::Index j = 1; j < cols; ++j) mix(j - 1, j) = 0.5;
  return x * mix;
}

Eigen::MatrixXd covariance(const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
  return c.transpose() * c / double(x.rows());
}

}  // namespace

TEST_CASE("collinear features produce a zero variance") {
  Rng rng(1);
  Eigen::MatrixXd x(50, 2);
  for (Eigen::Index i = 0; i < 50; ++i) x(i, 0) = x(i, 1) = rng.normal();
  const auto m = pca_fit(x);
  CHECK(m.variances(0) > 0.0);
  CHECK(m.variances(1) == 0.0);
}

TEST_CASE("identity covariance gives unit variances") {
  Eigen::MatrixXd x(4, 2);
  x << 1, 1, 1, -1, -1, 1, -1, -1;
  const auto m = pca_fit(x);
  CHECK(m.variances(0) == doctest::Approx(1.0));
  CHECK(m.variances(1) == doctest::Approx(1.0));
}

TEST_CASE("transformed training data is decorrelated") {
  const Eigen::MatrixXd x = random_matrix(200, 10, 3);
  const auto m = pca_fit(x);
  const Eigen::MatrixXd t = pca_transform(m, x);
  const Eigen::MatrixXd cov = covariance(t);
  Eigen::MatrixXd off = cov;
  off.diagonal().setZero();
  CHECK(off.cwiseAbs().maxCoeff() < 1e-9);
  for (Eigen::Index k = 0; k < 10; ++k) CHECK(std::abs(cov(k, k) - m.variances(k)) < 1e-9);
}

TEST_CASE("model invariants") {
  const Eigen::MatrixXd x = random_matrix(120, 8, 4);
  const auto m = pca_fit(x);
  CHECK((m.components.transpose() * m.components - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-9);
  for (Eigen::Index k = 1; k < 8; ++k) CHECK(m.variances(k) <= m.variances(k - 1));
  CHECK(m.variances.minCoeff() >= 0.0);
  for (Eigen::Index k = 0; k < 8; ++k) {
    Eigen::Index at = 0;
    m.components.col(k).cwiseAbs().maxCoeff(&at);
    CHECK(m.components(at, k) > 0.0);
  }
  // Reconstruction and trace preservation.
  const Eigen::MatrixXd t = pca_transform(m, x);
  CHECK((t * m.components.transpose() - x).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(std::abs(m.variances.sum() - covariance(x).trace()) < 1e-8);
  // Deterministic.
  CHECK(pca_fit(x) == m);
}

TEST_CASE("transform") {
  PcaModel<double> id{Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Ones(3)};
  const Eigen::MatrixXd x = random_matrix(5, 3, 9);
  CHECK(pca_transform(id, x) == x);
  const auto m = pca_fit(random_matrix(30, 3, 2));
  CHECK(pca_transform(m, Eigen::MatrixXd::Zero(1, 3)).isZero(0.0));
  CHECK_THROWS_AS(pca_transform(m, Eigen::MatrixXd::Zero(1, 4)), ValidationError);
}

TEST_CASE("fit preconditions") {
  CHECK_THROWS_AS(pca_fit(Eigen::MatrixXd::Zero(1, 3)), ValidationError);
  Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(3, 2);
  bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(pca_fit(bad), ValidationError);
}

TEST_CASE("single precision instantiation") {
  const Eigen::MatrixXf x = random_matrix(60, 4, 5).cast<float>();
  const auto m = pca_fit(x);
  CHECK(m.variances.size() == 4);
  CHECK((m.components.transpose() * m.components - Eigen::MatrixXf::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-4f);
}
