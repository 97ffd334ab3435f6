#include <doctest.h>

#include <cstring>
#include <set>

#include "drcnn/ensemble.hpp"
#include "drcnn/error.hpp"
#include "drcnn/experiment.hpp"
#include "support.hpp"

using namespace drcnn;

namespace {

const std::vector<Sample>& toy() {
  static const std::vector<Sample> s = test::small_samples(14, 6, "toy");
  return s;
}

TrainConfig quick(int voters, SelectionMode mode, int subset = 20) {
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.selection.num_voters = voters;
  cfg.selection.mode = mode;
  cfg.selection.subset_size = subset;
  cfg.seed = 17;
  return cfg;
}

/// Model over `dim` raw features with identity normalization and no PCA.
EnsembleModel hand_model(Eigen::Index dim, std::vector<VoterNet<double>> voters) {
  EnsembleModel m{NormStats::restore(Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)), std::nullopt, {}, {},
                  nlohmann::json::object()};
  for (auto& v : voters) {
    SubsetMask all(static_cast<std::size_t>(dim));
    for (Eigen::Index i = 0; i < dim; ++i) all[std::size_t(i)] = int(i);
    m.masks.push_back(all);
    m.voters.push_back(std::move(v));
  }
  return m;
}

/// A one-input voter whose output on x = 1 is exactly sigmoid(logit).
VoterNet<double> constant_voter(double p) {
  auto v = VoterNet<double>::zeros(1, 1);
  v.b2 = std::log(p / (1.0 - p));
  return v;
}

}  // namespace

TEST_CASE("setting 1 is a single full-width network") {
  const auto settings = table_settings(TrainConfig{});
  const TrainConfig cfg = [&] {
    TrainConfig c = settings[0].cfg;
    c.epochs = 2;
    return c;
  }();
  const EnsembleModel m = train(toy(), cfg);
  REQUIRE(m.num_voters() == 1);
  CHECK_FALSE(m.pca.has_value());
  CHECK(m.masks[0].size() == 387);
  CHECK(m.voters[0].inputs() == 387);
  CHECK(m.voters[0].hidden() == 20);
  // Score is the network's sigmoid output.
  const Eigen::MatrixXd raw = feature_matrix(toy()).topRows(5);
  const Eigen::VectorXd s = predict(m, raw);
  const Eigen::MatrixXd x = transformed_features(m, raw);
  for (Eigen::Index i = 0; i < 5; ++i) {
    const Eigen::VectorXd xi = x.row(i).transpose();
    CHECK(std::abs(s(i) - forward(m.voters[0], xi).p) <= 1e-12);
    CHECK(s(i) > 0.0);
    CHECK(s(i) < 1.0);
  }
}

TEST_CASE("setting 4 builds many voters over distinct subsets") {
  const EnsembleModel m = train(toy(), quick(100, SelectionMode::srs));
  CHECK(m.num_voters() == 100);
  CHECK(m.pca.has_value());
  CHECK(std::set<SubsetMask>(m.masks.begin(), m.masks.end()).size() >= 2);
  for (const auto& v : m.voters) CHECK(v.inputs() == 20);
  const Eigen::VectorXd s = predict(m, toy());
  CHECK(s.minCoeff() >= 0.0);
  CHECK(s.maxCoeff() <= 100.0);
}

TEST_CASE("setting 3 shares one mask") {
  const EnsembleModel m = train(toy(), quick(5, SelectionMode::largest_variance));
  for (const auto& mask : m.masks) CHECK(mask == m.masks.front());
  CHECK(m.masks.front() == select_largest(20, m.pca->variances));
}

TEST_CASE("training is deterministic and independent of thread count") {
  const TrainConfig cfg = quick(6, SelectionMode::srs);
  const std::string a = save_model(train(toy(), cfg, 1));
  CHECK(save_model(train(toy(), cfg, 1)) == a);
  CHECK(save_model(train(toy(), cfg, 4)) == a);
  TrainConfig other = cfg;
  other.seed = 18;
  CHECK(save_model(train(toy(), other, 1)) != a);
}

TEST_CASE("frozen layers are not trained") {
  const TrainConfig cfg = quick(3, SelectionMode::srs);
  TrainConfig none = cfg;
  none.epochs = 0;
  const EnsembleModel trained = train(toy(), cfg);
  const EnsembleModel untrained = train(toy(), none);
  CHECK(trained.norm == untrained.norm);
  CHECK(*trained.pca == *untrained.pca);
  CHECK(trained.masks == untrained.masks);
  CHECK_FALSE(trained.voters[0] == untrained.voters[0]);
}

TEST_CASE("training loss decreases") {
  TrainConfig cfg = quick(4, SelectionMode::srs);
  cfg.epochs = 10;
  TrainLog log;
  train(toy(), cfg, 1, &log);
  REQUIRE(log.epoch_loss.size() == 10);
  CHECK(log.epoch_loss.back() < log.epoch_loss.front());
}

TEST_CASE("training errors") {
  CHECK_THROWS_AS(train(std::vector<Sample>{}, TrainConfig{}), ValidationError);
  CHECK_THROWS_AS(train(std::span(toy()).first(1), TrainConfig{}), ValidationError);
  CHECK_THROWS_AS(train(toy(), quick(2, SelectionMode::srs, 400)), ConfigError);
  TrainConfig bad = quick(2, SelectionMode::srs);
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(train(toy(), bad), ConfigError);
}

TEST_CASE("soft voting sums voter probabilities") {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(2, 1);
  SUBCASE("zero voters give m/2") {
    const auto m = hand_model(1, {VoterNet<double>::zeros(1), VoterNet<double>::zeros(1), VoterNet<double>::zeros(1),
                                  VoterNet<double>::zeros(1)});
    CHECK(predict(m, x)(0) == 2.0);
  }
  SUBCASE("hand-fixed voters") {
    const auto m = hand_model(1, {constant_voter(0.2), constant_voter(0.4), constant_voter(0.9)});
    CHECK(predict(m, x)(0) == doctest::Approx(1.5).epsilon(1e-12));
    const Eigen::MatrixXd each = voter_outputs(m, x);
    CHECK(each(0, 0) == doctest::Approx(0.2));
    CHECK(each(0, 2) == doctest::Approx(0.9));
  }
  SUBCASE("monotone in each voter") {
    const auto lo = hand_model(1, {constant_voter(0.3), constant_voter(0.5)});
    const auto hi = hand_model(1, {constant_voter(0.3), constant_voter(0.6)});
    CHECK(predict(hi, x)(0) > predict(lo, x)(0));
  }
  SUBCASE("dimension mismatch") {
    const auto m = hand_model(1, {constant_voter(0.5)});
    CHECK_THROWS_AS(predict(m, Eigen::MatrixXd::Ones(2, 3)), ValidationError);
  }
}

TEST_CASE("thresholding") {
  const std::vector<double> s{0.4, 1.6};
  CHECK(classify(s, 1.0) == std::vector<bool>{false, true});
  CHECK(classify(s, 0.0) == std::vector<bool>{true, true});
  CHECK(classify(s, 1.6) == std::vector<bool>{false, false});
}

TEST_CASE("model files") {
  const EnsembleModel m = train(toy(), quick(8, SelectionMode::srs));
  const std::string doc = save_model(m);
  const EnsembleModel back = load_model(doc);
  CHECK(save_model(back) == doc);
  CHECK(back.masks == m.masks);
  CHECK(back.norm == m.norm);
  CHECK(*back.pca == *m.pca);
  for (std::size_t v = 0; v < m.voters.size(); ++v) CHECK(back.voters[v] == m.voters[v]);
  const Eigen::VectorXd a = predict(m, toy());
  const Eigen::VectorXd b = predict(back, toy());
  CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * std::size_t(a.size())) == 0);

  SUBCASE("setting 1 stores no pca layer") {
    TrainConfig c = quick(1, SelectionMode::all);
    const std::string d = save_model(train(toy(), c));
    CHECK(nlohmann::json::parse(d).at("pca").is_null());
    CHECK(save_model(load_model(d)) == d);
  }
  SUBCASE("truncated") { CHECK_THROWS_AS(load_model(doc.substr(0, doc.size() / 2)), ParseError); }
  SUBCASE("version mismatch") {
    auto j = nlohmann::json::parse(doc);
    j["version"] = 99;
    CHECK_THROWS_AS(load_model(j.dump()), ValidationError);
  }
  SUBCASE("corrupted shapes") {
    auto j = nlohmann::json::parse(doc);
    j["voters"][0]["b1"].erase(0);
    CHECK_THROWS_AS(load_model(j.dump()), ValidationError);
    j = nlohmann::json::parse(doc);
    j["masks"][1] = {5, 3};
    CHECK_THROWS_AS(load_model(j.dump()), ValidationError);
    j = nlohmann::json::parse(doc);
    j["masks"].erase(0);
    CHECK_THROWS_AS(load_model(j.dump()), ValidationError);
  }
}

TEST_CASE("config json") {
  TrainConfig cfg = quick(7, SelectionMode::largest_variance, 9);
  cfg.loss.w1 = 4.0;
  cfg.pca = true;
  const TrainConfig back = train_config_from_json(to_json(cfg));
  CHECK(to_json(back) == to_json(cfg));
  CHECK(back.selection.num_voters == 7);
  CHECK(back.use_pca());
  CHECK_THROWS_AS(train_config_from_json({{"epoch", 3}}), SchemaError);
  CHECK_THROWS_AS(train_config_from_json({{"selection", {{"mode", "bogus"}}}}), ConfigError);
  CHECK_FALSE(train_config_from_json({{"selection", {{"mode", "all"}}}}).use_pca());
}
