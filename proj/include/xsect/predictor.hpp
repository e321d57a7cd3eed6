#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "xsect/dnn.hpp"
#include "xsect/forest.hpp"
#include "xsect/preprocess.hpp"
#include "xsect/ridge.hpp"

namespace xsect {

enum class ModelKind { ridge, forest, dnn };

std::string_view to_string(ModelKind kind);

using ModelConfig = std::variant<RidgeConfig, ForestConfig, DnnConfig>;

ModelKind kind_of(const ModelConfig& config);

// One entry of a model grid.
struct ModelSpec {
  std::string name;
  ModelConfig config;
  std::uint64_t seed = 0;
};

// DNN1-6, RF1-3, RR1-3 in report order.
const std::vector<std::string>& preset_names();
ModelSpec preset(std::string_view name, std::uint64_t seed = 0);

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(ModelKind kind, const nlohmann::json& j);
nlohmann::json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j);

struct FitOptions {
  int threads = 1;
};

// A fitted model. Immutable; predict is deterministic.
class Predictor {
 public:
  using Params = std::variant<RidgeModel, ForestModel, DnnModel>;

  Predictor(ModelSpec spec, int n_features, Params params);

  static Predictor fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const ModelSpec& spec,
                       const FitOptions& options = {});
  static Predictor fit(const TrainingWindow& window, const ModelSpec& spec, const FitOptions& options = {});

  const ModelSpec& spec() const { return spec_; }
  ModelKind kind() const { return kind_of(spec_.config); }
  int n_features() const { return n_features_; }
  const Params& params() const { return params_; }

  // One score per row. Throws ValidationError when the column count differs
  // from the fitted dimension (33 for every pipeline model).
  Eigen::VectorXd predict(const Eigen::MatrixXd& features) const;

 private:
  ModelSpec spec_;
  int n_features_;
  Params params_;
};

inline constexpr std::string_view kPredictorMagic = "xsect-predictor";
inline constexpr int kPredictorVersion = 1;

nlohmann::json to_json(const Predictor& predictor);
Predictor predictor_from_json(const nlohmann::json& j);
void save_predictor(const Predictor& predictor, const std::filesystem::path& path);
Predictor load_predictor(const std::filesystem::path& path);

}  // namespace xsect
