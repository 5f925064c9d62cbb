#include "mcdimpute/eval.hpp"

#include <cmath>
#include <numeric>

#include "mcdimpute/errors.hpp"

namespace mcdi {

double rmse_masked(const Matrix& imputed, const Matrix& truth, const Mask& mask) {
  if (imputed.rows() != truth.rows() || imputed.cols() != truth.cols() || mask.rows() != truth.rows() ||
      mask.cols() != truth.cols())
    throw std::invalid_argument("rmse_masked: shape mismatch");
  const Eigen::Index m = mask.count();
  if (m == 0) throw std::invalid_argument("rmse_masked: no masked cells");
  const double sum = mask.select((imputed - truth).array().square(), 0.0).sum();
  return std::sqrt(sum / static_cast<double>(m));
}

double rmse_all(const Matrix& imputed, const Matrix& truth) {
  if (imputed.rows() != truth.rows() || imputed.cols() != truth.cols() || truth.size() == 0)
    throw std::invalid_argument("rmse_all: shape mismatch");
  return std::sqrt((imputed - truth).squaredNorm() / static_cast<double>(truth.size()));
}

int Classifier::predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  const double logit = x.dot(weights) + bias;
  return 1.0 / (1.0 + std::exp(-logit)) >= 0.5 ? 1 : 0;
}

Classifier classifier_fit(const Dataset& train, std::uint64_t /*seed*/) {
  if (train.class_count() != 2) throw DataError("classifier_fit: exactly two classes required");
  const Eigen::Index n = train.n();
  if (n < 2) throw DataError("classifier_fit: need at least two instances");
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = train.labels[static_cast<std::size_t>(i)];
  if (y.minCoeff() == y.maxCoeff()) throw DataError("classifier_fit: single-class training data");

  Classifier c;
  c.weights = Vector::Zero(train.d());
  const double inv_n = 1.0 / static_cast<double>(n);
  for (int it = 0; it < c.iterations; ++it) {
    const Eigen::VectorXd logits = (train.values * c.weights).array() + c.bias;
    const Eigen::VectorXd residual = (1.0 / (1.0 + (-logits.array()).exp())).matrix() - y;
    c.weights -= c.learning_rate * inv_n * (train.values.transpose() * residual);
    c.bias -= c.learning_rate * inv_n * residual.sum();
  }
  return c;
}

double classifier_accuracy(const Classifier& c, const Dataset& test) {
  if (test.n() == 0) throw DataError("classifier_accuracy: empty test set");
  if (test.d() != c.weights.size()) throw DataError("classifier_accuracy: schema mismatch");
  Eigen::Index correct = 0;
  for (Eigen::Index i = 0; i < test.n(); ++i)
    correct += c.predict(test.values.row(i)) == test.labels[static_cast<std::size_t>(i)];
  return static_cast<double>(correct) / static_cast<double>(test.n());
}

double delta_acc(const Dataset& original_train, const Dataset& imputed_train, const Dataset& eval_set,
                 std::uint64_t seed) {
  if (original_train.d() != imputed_train.d() || original_train.labels != imputed_train.labels)
    throw DataError("delta_acc: training sets differ in schema or labels");
  const double a1 = classifier_accuracy(classifier_fit(original_train, seed), eval_set);
  const double a2 = classifier_accuracy(classifier_fit(imputed_train, seed), eval_set);
  return a1 - a2;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

const CellResult* EvalReport::find(const std::string& dataset, ModelKind model, double rate) const {
  for (const auto& c : cells)
    if (c.dataset == dataset && c.model == model && std::abs(c.rate - rate) < 1e-12) return &c;
  return nullptr;
}

}  // namespace mcdi
