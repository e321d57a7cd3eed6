#include "xsect/predictor.hpp"

#include <fstream>

#include "xsect/error.hpp"

namespace xsect {
namespace {

using nlohmann::json;

template <typename Derived>
json array_of(const Eigen::DenseBase<Derived>& m) {
  json a = json::array();
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) a.push_back(m(i, j));
  return a;
}

Eigen::MatrixXd matrix_of(const json& a, Eigen::Index rows, Eigen::Index cols) {
  if (!a.is_array() || static_cast<Eigen::Index>(a.size()) != rows * cols)
    throw Error("predictor file: array has the wrong length");
  Eigen::MatrixXd m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = a[k++].get<double>();
  return m;
}

Eigen::VectorXd vector_of(const json& a) {
  return matrix_of(a, static_cast<Eigen::Index>(a.size()), 1);
}

Eigen::RowVectorXd row_of(const json& a) { return vector_of(a).transpose(); }

ModelKind kind_from_string(const std::string& s) {
  if (s == "ridge") return ModelKind::ridge;
  if (s == "forest") return ModelKind::forest;
  if (s == "dnn") return ModelKind::dnn;
  throw ConfigError("unknown model kind '" + s + "'");
}

DnnConfig dnn_preset(std::vector<int> layers, std::vector<double> dropout, int epochs) {
  DnnConfig c;
  c.hidden_layers = std::move(layers);
  c.dropout_rates = std::move(dropout);
  c.epochs = epochs;
  c.minibatch = 500;
  return c;
}

ForestConfig forest_preset(int depth) {
  ForestConfig c;
  c.n_estimators = 1000;
  c.max_features = 11;
  c.max_depth = depth;
  return c;
}

}  // namespace

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::ridge: return "ridge";
    case ModelKind::forest: return "forest";
    case ModelKind::dnn: return "dnn";
  }
  return "?";
}

ModelKind kind_of(const ModelConfig& config) { return static_cast<ModelKind>(config.index()); }

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"DNN1", "DNN2", "DNN3", "DNN4", "DNN5", "DNN6",
                                                 "RF1",  "RF2",  "RF3",  "RR1",  "RR2",  "RR3"};
  return names;
}

ModelSpec preset(std::string_view name, std::uint64_t seed) {
  const std::vector<int> a = {500, 200, 100, 50, 10}, b = {200, 200, 100, 100, 50}, c = {300, 300, 150, 150, 50};
  const std::vector<double> da = {0.5, 0.4, 0.3, 0.2, 0.1}, db = {0.5, 0.5, 0.3, 0.3, 0.1};
  ModelConfig cfg;
  if (name == "DNN1") cfg = dnn_preset(a, da, 20);
  else if (name == "DNN2") cfg = dnn_preset(a, da, 30);
  else if (name == "DNN3") cfg = dnn_preset(b, db, 20);
  else if (name == "DNN4") cfg = dnn_preset(b, db, 30);
  else if (name == "DNN5") cfg = dnn_preset(c, db, 20);
  else if (name == "DNN6") cfg = dnn_preset(c, db, 30);
  else if (name == "RF1") cfg = forest_preset(3);
  else if (name == "RF2") cfg = forest_preset(5);
  else if (name == "RF3") cfg = forest_preset(7);
  else if (name == "RR1") cfg = RidgeConfig{0.1};
  else if (name == "RR2") cfg = RidgeConfig{1.0};
  else if (name == "RR3") cfg = RidgeConfig{10.0};
  else throw ConfigError("unknown model preset '" + std::string(name) + "'");
  return ModelSpec{std::string(name), cfg, seed};
}

json to_json(const ModelConfig& config) {
  return std::visit(
      [](const auto& c) -> json {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, RidgeConfig>) {
          return {{"alpha", c.alpha}};
        } else if constexpr (std::is_same_v<T, ForestConfig>) {
          return {{"n_estimators", c.n_estimators},
                  {"max_features", c.max_features},
                  {"max_depth", c.max_depth ? json(*c.max_depth) : json(nullptr)},
                  {"bootstrap", c.bootstrap}};
        } else {
          return {{"hidden_layers", c.hidden_layers}, {"dropout_rates", c.dropout_rates},
                  {"epochs", c.epochs},               {"minibatch", c.minibatch},
                  {"learning_rate", c.learning_rate}, {"beta1", c.beta1},
                  {"beta2", c.beta2},                 {"epsilon", c.epsilon},
                  {"bn_momentum", c.bn_momentum},     {"bn_epsilon", c.bn_epsilon}};
        }
      },
      config);
}

ModelConfig model_config_from_json(ModelKind kind, const json& j) {
  try {
    switch (kind) {
      case ModelKind::ridge: {
        RidgeConfig c;
        c.alpha = j.value("alpha", c.alpha);
        return c;
      }
      case ModelKind::forest: {
        ForestConfig c;
        c.n_estimators = j.value("n_estimators", c.n_estimators);
        c.max_features = j.value("max_features", c.max_features);
        if (j.contains("max_depth")) c.max_depth = j["max_depth"].is_null() ? std::nullopt : std::optional<int>(j["max_depth"].get<int>());
        c.bootstrap = j.value("bootstrap", c.bootstrap);
        return c;
      }
      case ModelKind::dnn: {
        DnnConfig c;
        c.hidden_layers = j.value("hidden_layers", c.hidden_layers);
        c.dropout_rates = j.value("dropout_rates", c.dropout_rates);
        c.epochs = j.value("epochs", c.epochs);
        c.minibatch = j.value("minibatch", c.minibatch);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.beta1 = j.value("beta1", c.beta1);
        c.beta2 = j.value("beta2", c.beta2);
        c.epsilon = j.value("epsilon", c.epsilon);
        c.bn_momentum = j.value("bn_momentum", c.bn_momentum);
        c.bn_epsilon = j.value("bn_epsilon", c.bn_epsilon);
        validate(c);
        return c;
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad model config: ") + e.what());
  }
  throw ConfigError("bad model kind");
}

json to_json(const ModelSpec& spec) {
  return {{"name", spec.name},
          {"kind", std::string(to_string(kind_of(spec.config)))},
          {"config", to_json(spec.config)},
          {"seed", spec.seed}};
}

ModelSpec model_spec_from_json(const json& j) {
  if (j.is_string()) return preset(j.get<std::string>());
  if (!j.is_object() || !j.contains("name")) throw ConfigError("model entry needs a name");
  const auto name = j["name"].get<std::string>();
  ModelSpec spec;
  if (!j.contains("kind")) {
    spec = preset(name);
  } else {
    spec.name = name;
    spec.config = model_config_from_json(kind_from_string(j["kind"].get<std::string>()), j.value("config", json::object()));
  }
  if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
  return spec;
}

Predictor::Predictor(ModelSpec spec, int n_features, Params params)
    : spec_(std::move(spec)), n_features_(n_features), params_(std::move(params)) {}

Predictor Predictor::fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ModelSpec& spec,
                         const FitOptions& options) {
  if (X.rows() < 1) throw ValidationError("fit: empty training set");
  const int p = static_cast<int>(X.cols());
  Params params = std::visit(
      [&](const auto& c) -> Params {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, RidgeConfig>) return ridge_fit(X, y, c);
        else if constexpr (std::is_same_v<T, ForestConfig>) return forest_fit(X, y, c, spec.seed, options.threads);
        else return dnn_fit(X, y, c, spec.seed);
      },
      spec.config);
  return Predictor(spec, p, std::move(params));
}

Predictor Predictor::fit(const TrainingWindow& window, const ModelSpec& spec, const FitOptions& options) {
  return fit(window.features, window.targets, spec, options);
}

Eigen::VectorXd Predictor::predict(const Eigen::MatrixXd& features) const {
  if (features.cols() != n_features_)
    throw ValidationError("predict: expected " + std::to_string(n_features_) + " features per row, got " +
                          std::to_string(features.cols()));
  return std::visit([&](const auto& m) -> Eigen::VectorXd { return m.predict(features); }, params_);
}

json to_json(const Predictor& p) {
  json params = std::visit(
      [](const auto& m) -> json {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, RidgeModel>) {
          return {{"intercept", m.intercept}, {"coef", array_of(m.coef)}};
        } else if constexpr (std::is_same_v<T, ForestModel>) {
          json trees = json::array();
          for (const auto& t : m.trees) {
            json nodes = json::array();
            for (const auto& n : t.nodes()) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
            trees.push_back(std::move(nodes));
          }
          return {{"trees", std::move(trees)}};
        } else {
          json layers = json::array();
          for (const auto& h : m.hidden()) {
            layers.push_back({{"rows", h.weight.rows()},
                              {"cols", h.weight.cols()},
                              {"weight", array_of(h.weight)},
                              {"bias", array_of(h.bias)},
                              {"gamma", array_of(h.gamma)},
                              {"beta", array_of(h.beta)},
                              {"running_mean", array_of(h.running_mean)},
                              {"running_var", array_of(h.running_var)},
                              {"dropout", h.dropout}});
          }
          return {{"bn_epsilon", m.bn_epsilon()},
                  {"hidden", std::move(layers)},
                  {"output_weight", array_of(m.output_weight())},
                  {"output_bias", m.output_bias()}};
        }
      },
      p.params());
  json j;
  j["magic"] = std::string(kPredictorMagic);
  j["version"] = kPredictorVersion;
  j["spec"] = to_json(p.spec());
  j["n_features"] = p.n_features();
  j["params"] = std::move(params);
  return j;
}

Predictor predictor_from_json(const json& j) {
  try {
    if (j.value("magic", std::string()) != kPredictorMagic) throw Error("not a predictor file (bad magic)");
    if (j.value("version", 0) != kPredictorVersion)
      throw Error("unsupported predictor file version " + std::to_string(j.value("version", 0)));
    ModelSpec spec = model_spec_from_json(j.at("spec"));
    const int p = j.at("n_features").get<int>();
    const json& params = j.at("params");
    switch (kind_of(spec.config)) {
      case ModelKind::ridge:
        return Predictor(spec, p, RidgeModel{params.at("intercept").get<double>(), vector_of(params.at("coef"))});
      case ModelKind::forest: {
        ForestModel f;
        f.n_features = p;
        for (const auto& t : params.at("trees")) {
          std::vector<TreeNode> nodes;
          for (const auto& n : t)
            nodes.push_back(TreeNode{n[0].get<int>(), n[1].get<double>(), n[2].get<int>(), n[3].get<int>(), n[4].get<double>()});
          f.trees.emplace_back(std::move(nodes));
        }
        return Predictor(spec, p, std::move(f));
      }
      case ModelKind::dnn: {
        std::vector<HiddenLayer> hidden;
        for (const auto& h : params.at("hidden")) {
          HiddenLayer l;
          l.weight = matrix_of(h.at("weight"), h.at("rows").get<Eigen::Index>(), h.at("cols").get<Eigen::Index>());
          l.bias = row_of(h.at("bias"));
          l.gamma = row_of(h.at("gamma"));
          l.beta = row_of(h.at("beta"));
          l.running_mean = row_of(h.at("running_mean"));
          l.running_var = row_of(h.at("running_var"));
          l.dropout = h.at("dropout").get<double>();
          hidden.push_back(std::move(l));
        }
        return Predictor(spec, p,
                         DnnModel(p, params.at("bn_epsilon").get<double>(), std::move(hidden),
                                  vector_of(params.at("output_weight")), params.at("output_bias").get<double>()));
      }
    }
  } catch (const json::exception& e) {
    throw Error(std::string("malformed predictor file: ") + e.what());
  }
  throw Error("malformed predictor file");
}

void save_predictor(const Predictor& predictor, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << to_json(predictor).dump() << '\n';
}

Predictor load_predictor(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
  return predictor_from_json(j);
}

}  // namespace xsect
