#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "mcdimpute/errors.hpp"
#include "mcdimpute/eval.hpp"
#include "mcdimpute/report.hpp"
#include "support.hpp"

using namespace mcdi;

namespace {

Dataset labelled(Matrix values, std::vector<int> labels) {
  Dataset ds;
  ds.values = std::move(values);
  ds.labels = std::move(labels);
  ds.class_names = {"a", "b"};
  ds.norm = {Vector::Zero(ds.d()), Vector::Ones(ds.d())};
  return ds;
}

Dataset separable_toy() {
  // 20 points either side of x0 + x1 = 1 with margin 0.5.
  RngStream rng(2);
  Matrix x(20, 2);
  std::vector<int> y;
  for (int i = 0; i < 20; ++i) {
    const int cls = i % 2;
    const double t = rng.uniform();
    const double offset = (cls ? 0.5 : -0.5) * (0.5 + rng.uniform());
    x(i, 0) = t + offset;
    x(i, 1) = 1 - t + offset;
    y.push_back(cls);
  }
  return labelled(x, y);
}

}  // namespace

TEST_CASE("rmse_masked") {
  Matrix truth = Matrix::Zero(2, 2), imp = Matrix::Zero(2, 2);
  Mask m = Mask::Constant(2, 2, false);
  m(0, 0) = m(1, 1) = true;
  CHECK(rmse_masked(imp, truth, m) == 0.0);
  imp(0, 0) = 0.1;
  imp(1, 1) = -0.2;
  CHECK(rmse_masked(imp, truth, m) == doctest::Approx(0.15811388).epsilon(1e-7));
  imp(0, 1) = 9;
  CHECK(rmse_masked(imp, truth, m) == doctest::Approx(std::sqrt(0.025)));
  CHECK_THROWS_WITH(rmse_masked(imp, truth, Mask::Constant(2, 2, false)), doctest::Contains("no masked cells"));
  CHECK(rmse_all(imp, truth) == doctest::Approx(std::sqrt((0.01 + 0.04 + 81) / 4)));
}

TEST_CASE("classifier") {
  const Dataset toy = separable_toy();
  const Classifier c = classifier_fit(toy);
  CHECK(classifier_accuracy(c, toy) == 1.0);
  CHECK(classifier_fit(toy).weights == c.weights);

  // Reordering test rows does not change accuracy.
  std::vector<Eigen::Index> rev(20);
  std::iota(rev.rbegin(), rev.rend(), Eigen::Index{0});
  CHECK(classifier_accuracy(c, subset(toy, rev)) == 1.0);

  const Dataset flat = labelled(Matrix::Zero(5, 2), {1, 1, 1, 0, 1});
  const Classifier bias_only = classifier_fit(flat);
  CHECK(bias_only.weights.isZero(0));
  CHECK(classifier_accuracy(bias_only, flat) == doctest::Approx(0.8));

  Classifier half;
  half.weights = Vector::Zero(2);
  half.bias = -1;
  CHECK(classifier_accuracy(half, labelled(Matrix::Zero(4, 2), {0, 1, 0, 1})) == 0.5);

  CHECK_THROWS_AS(classifier_fit(labelled(Matrix::Zero(3, 2), {0, 0, 0})), DataError);
  CHECK_THROWS_AS(classifier_accuracy(c, labelled(Matrix::Zero(0, 2), {})), DataError);
}

TEST_CASE("delta_acc") {
  const Dataset toy = separable_toy();
  CHECK(delta_acc(toy, toy, toy) == 0.0);
  Dataset scrambled = toy;
  scrambled.values.col(0).setConstant(0.5);
  scrambled.values.col(1).setConstant(0.5);
  // Imputation that destroys the signal can only hurt on separable data.
  CHECK(delta_acc(toy, scrambled, toy) > 0.0);
  CHECK(delta_acc(scrambled, toy, toy) < 0.0);
}

TEST_CASE("aggregates") {
  CHECK(mean_of({1, 2, 3}) == 2.0);
  CHECK(sample_std({1, 2, 3}) == 1.0);
  CHECK(sample_std({4}) == 0.0);
}

TEST_CASE("run_cv grid, failures and report layout") {
  ExperimentConfig cfg;
  cfg.models = {ModelKind::ae, ModelKind::mcd_vae};
  cfg.missing_rates = {0.1};
  cfg.epochs = 3;
  cfg.mc_samples = 3;
  cfg.folds = 3;
  cfg.seed = 5;
  std::vector<NamedDataset> data{{"wisc", load_dataset({"wisc", testsupport::data_file("wisc.csv")})}};
  const EvalReport r = run_cv(cfg, data);
  CHECK(r.cells.size() == 2);
  const CellResult* cell = r.find("wisc", ModelKind::mcd_vae, 0.1);
  REQUIRE(cell != nullptr);
  CHECK(cell->fold_rmse.size() == 3);
  CHECK(cell->rmse_mean == doctest::Approx(mean_of(cell->fold_rmse)));
  CHECK(cell->rmse_std == doctest::Approx(sample_std(cell->fold_rmse)));

  const std::string tables = format_tables(r, cfg);
  CHECK(tables.find("10% missing data (RMSE)") != std::string::npos);
  CHECK(tables.find("\nAE ") != std::string::npos);
  CHECK(tables.find("\nMCD-VAE ") != std::string::npos);
  CHECK(tables.find("\nVAE ") == std::string::npos);  // only the two requested rows
  const CellResult* best = r.cells[0].rmse_mean < r.cells[1].rmse_mean ? &r.cells[0] : &r.cells[1];
  const auto row = tables.find("\n" + std::string(display_name(best->model)) + " ") + 1;
  CHECK(tables.find('*', row) < tables.find('\n', row));

  CHECK(run_cv(cfg, data).cells[1].fold_rmse == cell->fold_rmse);

  ExperimentConfig bad = cfg;
  bad.missing_rates = {0.0};
  CHECK_THROWS_AS(run_cv(bad, data), UsageError);

  ExperimentConfig blowup = cfg;
  blowup.learning_rate = 1e300;
  blowup.models = {ModelKind::ae};
  const EvalReport failed = run_cv(blowup, data);
  CHECK(failed.cells[0].failed);
  CHECK(format_tables(failed, blowup).find("failed") != std::string::npos);
}
