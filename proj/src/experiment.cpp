#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>

#include "mcdimpute/errors.hpp"
#include "mcdimpute/eval.hpp"
#include "mcdimpute/imputer.hpp"

namespace mcdi {
namespace {

struct Job {
  std::size_t dataset = 0;
  ModelFamily family = ModelFamily::ae;
  std::size_t rate = 0;
  int fold = 0;
};

struct FoldOutcome {
  ModelKind kind;
  double rmse = 0;
  double rmse_all = 0;
  double delta_acc = 0;
};

struct JobResult {
  std::vector<FoldOutcome> outcomes;
  bool failed = false;
  std::string failure;
  std::exception_ptr error;
};

std::string rate_key(double rate) { return format_number(rate); }

const char* family_key(ModelFamily f) { return f == ModelFamily::ae ? "ae" : "vae"; }

JobResult run_job(const ExperimentConfig& cfg, const NamedDataset& named, const FoldSplit& folds, const Job& job) {
  const RngStream root(cfg.seed);
  const double rate = cfg.missing_rates[job.rate];
  const std::string fold_key = named.id + "/" + rate_key(rate) + "/" + std::to_string(job.fold);
  const std::string train_key = std::string("train/") + family_key(job.family) + "/" + fold_key;

  const Dataset train = subset(named.data, folds.rows_not_in(job.fold));
  const Dataset test = subset(named.data, folds.rows_in(job.fold));

  RngStream train_rng = root.child(train_key);
  Model model = build_model(job.family, named.data.d(), cfg.dropout, cfg.kl_weight, train_rng.child("init").seed());
  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.corruption_rate = rate;
  tc.adam.learning_rate = cfg.learning_rate;
  JobResult result;
  try {
    train_denoising(model, train, tc, train_rng);
  } catch (const DivergenceError& e) {
    result.failed = true;
    result.failure = e.what();
    return result;
  }

  RngStream mask_rng = root.child("mask/" + fold_key);
  const MaskedDataset md = mask_mcar(test, rate, mask_rng);
  for (ModelKind kind : cfg.models) {
    if (family_of(kind) != job.family) continue;
    ImputeConfig ic;
    ic.mode = is_mcd(kind) ? ImputeConfig::Mode::mcd : ImputeConfig::Mode::deterministic;
    ic.samples = cfg.mc_samples;
    ic.seed = root.child("impute/" + std::string(to_string(kind)) + "/" + fold_key).seed();
    const Dataset imputed = impute_dataset(kind, model, md, ic);
    FoldOutcome o{kind};
    o.rmse = rmse_masked(imputed.values, test.values, md.mask);
    o.rmse_all = rmse_all(imputed.values, test.values);
    // The held-out fold, original vs imputed, trains the two classifiers; the
    // untouched training portion scores them.
    o.delta_acc = delta_acc(test, imputed, train, ic.seed);
    result.outcomes.push_back(o);
  }
  return result;
}

}  // namespace

Dataset load_dataset(const DatasetSource& source, std::uint64_t synth_seed) {
  if (source.id == "synth-milk") return synth_milk(610, synth_seed);
  if (source.path.empty()) throw UsageError("dataset '" + source.id + "' has no file path");
  return normalize(complete_cases(load_csv(source.path, source.class_column, source.missing_marker)));
}

EvalReport run_cv(const ExperimentConfig& cfg, const std::vector<NamedDataset>& datasets) {
  if (cfg.folds < 2) throw UsageError("folds must be >= 2");
  if (cfg.mc_samples < 1) throw UsageError("mc_samples must be >= 1");
  if (cfg.epochs < 1) throw UsageError("epochs must be >= 1");
  for (double r : cfg.missing_rates)
    if (!(r > 0 && r < 1)) throw UsageError("missing_rate must be in (0,1), got " + format_number(r));

  const RngStream root(cfg.seed);
  std::vector<FoldSplit> folds;
  for (const auto& ds : datasets) {
    if (ds.data.n() < cfg.folds) throw DataError(ds.id + ": fewer instances than folds");
    RngStream fold_rng = root.child("folds/" + ds.id);
    folds.push_back(kfold(ds.data, cfg.folds, fold_rng));
  }

  std::vector<ModelFamily> families;
  for (ModelKind k : cfg.models)
    if (std::find(families.begin(), families.end(), family_of(k)) == families.end()) families.push_back(family_of(k));
  std::sort(families.begin(), families.end());

  std::vector<Job> jobs;
  for (std::size_t d = 0; d < datasets.size(); ++d)
    for (ModelFamily f : families)
      for (std::size_t r = 0; r < cfg.missing_rates.size(); ++r)
        for (int k = 0; k < cfg.folds; ++k) jobs.push_back({d, f, r, k});

  std::vector<JobResult> results(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        results[i] = run_job(cfg, datasets[jobs[i].dataset], folds[jobs[i].dataset], jobs[i]);
      } catch (...) {
        results[i].error = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(cfg.jobs, static_cast<int>(jobs.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& r : results)
    if (r.error) std::rethrow_exception(r.error);

  EvalReport report;
  report.seed = cfg.seed;
  report.mc_samples = cfg.mc_samples;
  report.epochs = cfg.epochs;
  report.folds = cfg.folds;
  for (std::size_t d = 0; d < datasets.size(); ++d)
    for (ModelKind kind : cfg.models)
      for (std::size_t r = 0; r < cfg.missing_rates.size(); ++r) {
        CellResult cell;
        cell.dataset = datasets[d].id;
        cell.model = kind;
        cell.rate = cfg.missing_rates[r];
        for (std::size_t j = 0; j < jobs.size(); ++j) {
          const Job& job = jobs[j];
          if (job.dataset != d || job.rate != r || job.family != family_of(kind)) continue;
          if (results[j].failed) {
            cell.failed = true;
            cell.failure = "fold " + std::to_string(job.fold) + ": " + results[j].failure;
            continue;
          }
          for (const auto& o : results[j].outcomes)
            if (o.kind == kind) {
              cell.fold_rmse.push_back(o.rmse);
              cell.fold_delta_acc.push_back(o.delta_acc);
              cell.fold_rmse_all.push_back(o.rmse_all);
            }
        }
        if (!cell.failed) {
          cell.rmse_mean = mean_of(cell.fold_rmse);
          cell.rmse_std = sample_std(cell.fold_rmse);
          cell.delta_acc = mean_of(cell.fold_delta_acc);
          cell.rmse_all_mean = mean_of(cell.fold_rmse_all);
        }
        report.cells.push_back(std::move(cell));
      }
  return report;
}

EvalReport run_cv(const ExperimentConfig& cfg) {
  std::vector<NamedDataset> datasets;
  for (const auto& src : cfg.datasets) datasets.push_back({src.id, load_dataset(src, cfg.seed)});
  if (datasets.empty()) throw UsageError("dataset missing");
  return run_cv(cfg, datasets);
}

}  // namespace mcdi
