#include "doctest.h"

#include <random>

#include "oracles.hpp"
#include "support.hpp"
#include "xsect/error.hpp"
#include "xsect/predictor.hpp"

using namespace xsect;

namespace {

Eigen::MatrixXd uniform_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = u(rng);
  return m;
}

DnnConfig small_dnn(std::vector<int> layers, std::vector<double> dropout, int epochs) {
  DnnConfig c;
  c.hidden_layers = std::move(layers);
  c.dropout_rates = std::move(dropout);
  c.epochs = epochs;
  c.minibatch = 32;
  return c;
}

}  // namespace

// ---------------------------------------------------------------- ridge

TEST_CASE("ridge: 2x2 identity example against the normal-equation oracle") {
  const Eigen::MatrixXd X = Eigen::MatrixXd::Identity(2, 2);
  Eigen::VectorXd y(2);
  y << 1.0, 0.0;
  const RidgeModel m = ridge_fit(X, y, RidgeConfig{1.0});
  // Centered by hand: Xc = [.5 -.5; -.5 .5], yc = (.5, -.5).
  Eigen::Matrix2d A;
  A << 1.5, -0.5, -0.5, 1.5;
  const Eigen::Vector2d b(0.5, -0.5);
  const Eigen::Vector2d beta = A.fullPivLu().solve(b);
  CHECK(beta(0) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(m.coef.isApprox(beta, 1e-14));
  CHECK(m.intercept == doctest::Approx(0.5 - 0.5 * (beta(0) + beta(1))).epsilon(1e-15));
  // the same system reaches +-1/3 only at alpha = 0.5
  CHECK(ridge_fit(X, y, RidgeConfig{0.5}).coef(0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("ridge: constant target gives zero slope") {
  const Eigen::MatrixXd X = uniform_matrix(50, 33, 1);
  const RidgeModel m = ridge_fit(X, Eigen::VectorXd::Constant(50, 0.37), RidgeConfig{1.0});
  CHECK(m.coef.cwiseAbs().maxCoeff() < 1e-14);
  CHECK(m.intercept == doctest::Approx(0.37).epsilon(1e-14));
  CHECK((m.predict(uniform_matrix(5, 33, 2)).array() - 0.37).abs().maxCoeff() < 1e-13);
}

TEST_CASE("ridge: shrinkage is monotone in alpha") {
  const Eigen::MatrixXd X = uniform_matrix(200, 33, 3);
  const Eigen::VectorXd y = X.col(0) * 2.0 - X.col(5) + 0.1 * uniform_matrix(200, 1, 4);
  double prev = std::numeric_limits<double>::infinity();
  for (double a : {0.01, 0.1, 1.0, 10.0, 100.0, 1e3, 1e4, 1e6}) {
    const double norm = ridge_fit(X, y, RidgeConfig{a}).coef.norm();
    CHECK(norm < prev);
    prev = norm;
  }
  CHECK(prev < 1e-3);
}

TEST_CASE("ridge: singular system with alpha = 0") {
  Eigen::MatrixXd X = uniform_matrix(20, 3, 5);
  X.col(2) = X.col(0) + X.col(1);
  try {
    ridge_fit(X, uniform_matrix(20, 1, 6).col(0), RidgeConfig{0.0});
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("alpha > 0") != std::string::npos);
  }
  CHECK_NOTHROW(ridge_fit(X, uniform_matrix(20, 1, 6).col(0), RidgeConfig{0.1}));
}

TEST_CASE("ridge: normal equations hold") {
  const Eigen::MatrixXd X = uniform_matrix(1000, 33, 9);
  const Eigen::VectorXd y = uniform_matrix(1000, 1, 10).col(0);
  const RidgeModel m = ridge_fit(X, y, RidgeConfig{1.0});
  const Eigen::MatrixXd Xc = X.rowwise() - X.colwise().mean();
  const Eigen::VectorXd yc = y.array() - y.mean();
  const Eigen::VectorXd lhs = (Xc.transpose() * Xc + Eigen::MatrixXd::Identity(33, 33)) * m.coef;
  const Eigen::VectorXd rhs = Xc.transpose() * yc;
  CHECK((lhs - rhs).norm() / rhs.norm() < 1e-10);
}

// ---------------------------------------------------------------- forest

TEST_CASE("forest: constant target") {
  ForestConfig c;
  c.n_estimators = 20;
  const ForestModel f = forest_fit(uniform_matrix(60, 33, 1), Eigen::VectorXd::Constant(60, 0.4), c, 7);
  CHECK((f.predict(uniform_matrix(10, 33, 2)).array() == 0.4).all());
}

TEST_CASE("forest: single split on {(0,0),(1,1)}") {
  ForestConfig c{1, 1, 1, false};
  Eigen::MatrixXd X(2, 1);
  X << 0.0, 1.0;
  Eigen::VectorXd y(2);
  y << 0.0, 1.0;
  const ForestModel f = forest_fit(X, y, c, 0);
  const auto& nodes = f.trees.at(0).nodes();
  REQUIRE(nodes.size() == 3);
  CHECK(nodes[0].feature == 0);
  CHECK(nodes[0].threshold == 0.5);
  Eigen::MatrixXd q(2, 1);
  q << 0.2, 0.9;
  const Eigen::VectorXd p = f.predict(q);
  CHECK(p(0) == 0.0);
  CHECK(p(1) == 1.0);
}

TEST_CASE("forest: unbounded tree interpolates distinct points") {
  const Eigen::MatrixXd X = uniform_matrix(300, 5, 11);
  const Eigen::VectorXd y = uniform_matrix(300, 1, 12).col(0);
  ForestConfig c{1, 5, std::nullopt, false};
  const ForestModel f = forest_fit(X, y, c, 3);
  CHECK(f.predict(X) == y);
  CHECK(f.trees[0].leaves().size() == 300);
}

TEST_CASE("forest: depth-0 trees predict the target mean") {
  const Eigen::MatrixXd X = uniform_matrix(40, 33, 13);
  const Eigen::VectorXd y = uniform_matrix(40, 1, 14).col(0);
  ForestConfig c{5, 11, 0, false};
  const ForestModel f = forest_fit(X, y, c, 3);
  CHECK((f.predict(uniform_matrix(6, 33, 15)).array() - y.mean()).abs().maxCoeff() < 1e-15);
}

TEST_CASE("forest: depth bound, leaf range, ensemble range, thread invariance") {
  const Eigen::MatrixXd X = uniform_matrix(400, 33, 21);
  const Eigen::VectorXd y = (X.col(0).array() * 3.0 + X.col(1).array().square()).matrix() + 0.2 * uniform_matrix(400, 1, 22);
  for (int depth : {3, 5, 7}) {
    ForestConfig c{40, 11, depth, true};
    const ForestModel f = forest_fit(X, y, c, 99, 1);
    for (const auto& t : f.trees) {
      CHECK(t.depth() <= depth);
      for (int leaf : t.leaves()) {
        CHECK(t.nodes()[static_cast<std::size_t>(leaf)].value >= y.minCoeff());
        CHECK(t.nodes()[static_cast<std::size_t>(leaf)].value <= y.maxCoeff());
      }
    }
    const Eigen::MatrixXd Q = uniform_matrix(30, 33, 23);
    const Eigen::MatrixXd per = f.predict_per_tree(Q);
    const Eigen::VectorXd p = f.predict(Q);
    CHECK((p.array() >= per.colwise().minCoeff().transpose().array() - 1e-15).all());
    CHECK((p.array() <= per.colwise().maxCoeff().transpose().array() + 1e-15).all());
    const ForestModel g = forest_fit(X, y, c, 99, 3);
    CHECK(g.predict(Q) == p);
  }
}

TEST_CASE("forest: config validation") {
  CHECK_THROWS(validate(ForestConfig{0, 11, 3, true}, 33));
  CHECK_THROWS(validate(ForestConfig{10, 34, 3, true}, 33));
  CHECK_THROWS(validate(ForestConfig{10, 0, 3, true}, 33));
  CHECK_THROWS(validate(ForestConfig{10, 11, -1, true}, 33));
  CHECK_THROWS(forest_fit(uniform_matrix(1, 3, 1), Eigen::VectorXd::Zero(1), ForestConfig{1, 1, 1, false}, 0));
}

// ---------------------------------------------------------------- dnn

TEST_CASE("dnn: untrained network gives finite outputs on the unit cube") {
  const DnnModel m = dnn_fit(uniform_matrix(64, 33, 1), uniform_matrix(64, 1, 2).col(0),
                             small_dnn({16, 8}, {0.5, 0.2}, 0), 5);
  CHECK(m.predict(uniform_matrix(100, 33, 3)).allFinite());
}

TEST_CASE("dnn: identical rows normalize to zero, layer output equals beta") {
  Rng rng(4);
  DnnModel m(6, small_dnn({5}, {0.0}, 0), rng);
  Eigen::VectorXd theta = m.parameters();
  // beta of the only hidden layer sits after W (6x5), b and gamma
  const Eigen::Index beta_at = 30 + 5 + 5;
  for (Eigen::Index k = 0; k < 5; ++k) theta(beta_at + k) = 0.1 * static_cast<double>(k + 1);
  m.set_parameters(theta);
  const Eigen::MatrixXd X = Eigen::MatrixXd::Ones(8, 6) * 0.3;
  const ForwardTrace t = m.forward_train(X, m.unit_masks(8));
  CHECK(t.normalized[0].cwiseAbs().maxCoeff() == 0.0);
  for (Eigen::Index k = 0; k < 5; ++k) CHECK((t.shifted[0].col(k).array() == 0.1 * static_cast<double>(k + 1)).all());
}

TEST_CASE("dnn: analytic gradient matches central differences") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Rng rng(seed);
    DnnModel m(5, small_dnn({4, 3}, {0.3, 0.2}, 0), rng);
    const Eigen::MatrixXd X = uniform_matrix(5, 5, seed + 10);
    const Eigen::VectorXd y = uniform_matrix(5, 1, seed + 20).col(0);
    const auto masks = m.sample_masks(5, rng);
    std::vector<Eigen::Index> all(static_cast<std::size_t>(m.parameter_count()));
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    const auto r = oracle::gradient_check(m, X, y, masks, all);
    CHECK(r.coordinates == m.parameter_count());
    CHECK(r.worst <= 1e-4);
  }
}

TEST_CASE("dnn: determinism, inference mode, loss decreases") {
  const Eigen::MatrixXd X = uniform_matrix(400, 10, 31);
  const Eigen::VectorXd y = (X.col(0) - X.col(3)) * 0.5 + 0.05 * uniform_matrix(400, 1, 32).col(0);
  const DnnConfig c = small_dnn({16, 8}, {0.1, 0.1}, 15);
  const DnnModel a = dnn_fit(X, y, c, 17), b = dnn_fit(X, y, c, 17);
  CHECK(a.parameters() == b.parameters());
  const Eigen::VectorXd p = a.predict(X);
  CHECK(a.predict(X) == p);
  // inference statistics are frozen: a row scores the same in any batch
  CHECK(a.predict(X.topRows(7)) == p.head(7));
  CHECK(a.predict(X.row(123))(0) == p(123));

  const DnnModel init = dnn_fit(X, y, small_dnn({16, 8}, {0.1, 0.1}, 0), 17);
  const double mse0 = (init.predict(X) - y).squaredNorm(), mse1 = (p - y).squaredNorm();
  CHECK(mse1 < mse0);
}

TEST_CASE("dnn: exploding training is reported with learning-rate guidance") {
  DnnConfig c = small_dnn({8}, {0.0}, 50);
  c.learning_rate = 1e200;
  try {
    dnn_fit(uniform_matrix(64, 4, 1), uniform_matrix(64, 1, 2).col(0) * 1e150, c, 1);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("learning_rate") != std::string::npos);
  }
}

// ---------------------------------------------------------------- predictor

TEST_CASE("presets") {
  CHECK(preset_names() == std::vector<std::string>{"DNN1", "DNN2", "DNN3", "DNN4", "DNN5", "DNN6", "RF1", "RF2",
                                                   "RF3", "RR1", "RR2", "RR3"});
  const auto& d1 = std::get<DnnConfig>(preset("DNN1").config);
  CHECK(d1.hidden_layers == std::vector<int>{500, 200, 100, 50, 10});
  CHECK(d1.dropout_rates == std::vector<double>{0.5, 0.4, 0.3, 0.2, 0.1});
  CHECK(d1.epochs == 20);
  CHECK(d1.minibatch == 500);
  const auto& d4 = std::get<DnnConfig>(preset("DNN4").config);
  CHECK(d4.hidden_layers == std::vector<int>{200, 200, 100, 100, 50});
  CHECK(d4.dropout_rates == std::vector<double>{0.5, 0.5, 0.3, 0.3, 0.1});
  CHECK(d4.epochs == 30);
  const auto& d5 = std::get<DnnConfig>(preset("DNN5").config);
  CHECK(d5.hidden_layers == std::vector<int>{300, 300, 150, 150, 50});
  CHECK(d5.epochs == 20);
  const auto& rf = std::get<ForestConfig>(preset("RF2").config);
  CHECK(rf.n_estimators == 1000);
  CHECK(rf.max_features == 11);
  CHECK(rf.max_depth == 5);
  CHECK(std::get<RidgeConfig>(preset("RR3").config).alpha == 10.0);
  CHECK_THROWS_AS(preset("RR4"), ConfigError);
}

TEST_CASE("predictor: spec json round trip") {
  for (const auto& name : preset_names()) {
    const ModelSpec s = preset(name, 42);
    const ModelSpec t = model_spec_from_json(to_json(s));
    CHECK(to_json(t) == to_json(s));
  }
  CHECK(model_spec_from_json(nlohmann::json("RF3")).name == "RF3");
}

TEST_CASE("predictor: save/load is lossless for every family") {
  const Eigen::MatrixXd X = uniform_matrix(120, 33, 41);
  const Eigen::VectorXd y = uniform_matrix(120, 1, 42).col(0);
  test::TempDir dir("pred");
  std::vector<ModelSpec> specs = {preset("RR1", 1), preset("RF1", 2)};
  std::get<ForestConfig>(specs[1].config).n_estimators = 10;
  ModelSpec dnn{"tiny", small_dnn({7, 3}, {0.2, 0.1}, 2), 3};
  specs.push_back(dnn);
  for (const auto& spec : specs) {
    const Predictor p = Predictor::fit(X, y, spec);
    save_predictor(p, dir / "model.json");
    const Predictor q = load_predictor(dir / "model.json");
    CHECK(q.predict(X) == p.predict(X));
    CHECK(q.spec().name == spec.name);
  }
}

TEST_CASE("predictor: feature dimension is enforced") {
  const Predictor p = Predictor::fit(uniform_matrix(50, 33, 1), uniform_matrix(50, 1, 2).col(0), preset("RR2"));
  CHECK_THROWS_AS(p.predict(uniform_matrix(3, 32, 3)), ValidationError);
  const Eigen::VectorXd s = p.predict(uniform_matrix(3, 33, 3));
  CHECK(s.allFinite());
}

TEST_CASE("predictor: refit reproduces predictions") {
  const Eigen::MatrixXd X = uniform_matrix(200, 33, 51);
  const Eigen::VectorXd y = uniform_matrix(200, 1, 52).col(0);
  ModelSpec rf = preset("RF3", 9);
  std::get<ForestConfig>(rf.config).n_estimators = 30;
  const Predictor a = Predictor::fit(X, y, rf, FitOptions{1}), b = Predictor::fit(X, y, rf, FitOptions{4});
  CHECK(a.predict(X) == b.predict(X));
}
