#ifndef MCDIMPUTE_EVAL_HPP
#define MCDIMPUTE_EVAL_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mcdimpute/dataio.hpp"
#include "mcdimpute/models.hpp"

namespace mcdi {

/// sqrt of the mean squared residual over cells where mask is true.
double rmse_masked(const Matrix& imputed, const Matrix& truth, const Mask& mask);

/// RMSE over every cell of the matrix.
double rmse_all(const Matrix& imputed, const Matrix& truth);

/// Binary logistic regression, zero-initialized, full-batch gradient descent.
struct Classifier {
  Vector weights;  // d
  double bias = 0;
  int iterations = 500;
  double learning_rate = 0.1;

  int predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
};

Classifier classifier_fit(const Dataset& train, std::uint64_t seed = 0);
double classifier_accuracy(const Classifier& c, const Dataset& test);

/// accuracy(original_train) - accuracy(imputed_train), both measured on eval_set.
double delta_acc(const Dataset& original_train, const Dataset& imputed_train, const Dataset& eval_set,
                 std::uint64_t seed = 0);

/// Sample standard deviation (divide by n - 1); 0 for fewer than two values.
double sample_std(const std::vector<double>& v);
double mean_of(const std::vector<double>& v);

struct DatasetSource {
  std::string id;          // wisc, pima, synth-milk, or a user label
  std::string path;        // CSV path; unused for synth-milk
  std::string class_column = "class";
  std::string missing_marker = "?";
};

/// Loads a source and applies complete-case filtering and normalization.
Dataset load_dataset(const DatasetSource& source, std::uint64_t synth_seed = 0);

struct NamedDataset {
  std::string id;
  Dataset data;
};

struct ExperimentConfig {
  std::vector<DatasetSource> datasets;
  std::vector<ModelKind> models{std::begin(kAllModelKinds), std::end(kAllModelKinds)};
  std::vector<double> missing_rates{0.1, 0.3, 0.5};
  int epochs = 300;
  double dropout = 0.2;
  int mc_samples = 100;
  int folds = 5;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double kl_weight = 0.01;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string out;
  std::string data_dir = "data";
};

/// One (dataset, model, rate) cell of the result grid.
struct CellResult {
  std::string dataset;
  ModelKind model = ModelKind::ae;
  double rate = 0;
  std::vector<double> fold_rmse;
  std::vector<double> fold_delta_acc;
  std::vector<double> fold_rmse_all;  // over every test cell, observed ones included
  double rmse_mean = 0;
  double rmse_all_mean = 0;
  double rmse_std = 0;
  double delta_acc = 0;
  bool failed = false;
  std::string failure;
};

struct EvalReport {
  std::vector<CellResult> cells;
  std::uint64_t seed = 0;
  int mc_samples = 0;
  int epochs = 0;
  int folds = 0;

  const CellResult* find(const std::string& dataset, ModelKind model, double rate) const;
};

/// k-fold cross-validated grid over the given datasets. Every (dataset,
/// family, rate, fold) job draws from streams keyed by the master seed and the
/// job key, so the report is the same for any cfg.jobs.
EvalReport run_cv(const ExperimentConfig& cfg, const std::vector<NamedDataset>& datasets);
EvalReport run_cv(const ExperimentConfig& cfg);

}  // namespace mcdi

#endif  // MCDIMPUTE_EVAL_HPP
