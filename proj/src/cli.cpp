#include "mcdimpute/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "mcdimpute/errors.hpp"
#include "mcdimpute/imputer.hpp"
#include "mcdimpute/models.hpp"
#include "mcdimpute/report.hpp"

namespace mcdi::cli {
namespace {

template <typename T>
const T& broadcast(const std::vector<T>& v, std::size_t i, const T& fallback) {
  if (v.empty()) return fallback;
  return v.size() == 1 ? v.front() : v[i];
}

std::vector<DatasetSource> resolve_datasets(const std::vector<std::string>& ids, const std::vector<std::string>& paths,
                                            const std::string& data, const std::vector<std::string>& class_columns,
                                            const std::vector<std::string>& markers, const std::string& data_dir) {
  std::vector<std::string> id_list = ids;
  std::vector<std::string> path_list = paths;
  if (!path_list.empty() && path_list.size() != id_list.size())
    throw UsageError("data-path: expected one path per --dataset");
  if (!data.empty()) {
    if (id_list.empty()) {
      id_list.push_back(std::filesystem::path(data).stem().string());
      path_list = {data};
    } else if (id_list.size() == 1) {
      path_list = {data};
    } else {
      throw UsageError("data: --data pairs with at most one --dataset");
    }
  }
  if (id_list.empty()) throw UsageError("dataset missing");
  for (const auto* list : {&class_columns, &markers})
    if (list->size() > 1 && list->size() != id_list.size())
      throw UsageError("class_column/missing_marker: give one value or one per dataset");

  std::vector<DatasetSource> out;
  for (std::size_t i = 0; i < id_list.size(); ++i) {
    DatasetSource src;
    src.id = id_list[i];
    src.class_column = broadcast(class_columns, i, std::string("class"));
    src.missing_marker = broadcast(markers, i, std::string("?"));
    if (!path_list.empty() && !path_list[i].empty())
      src.path = path_list[i];
    else if (src.id == "wisc" || src.id == "pima")
      src.path = (std::filesystem::path(data_dir) / (src.id + ".csv")).string();
    else if (src.id != "synth-milk")
      throw UsageError("dataset: unknown id '" + src.id + "' (expected wisc, pima or synth-milk, or give --data)");
    out.push_back(std::move(src));
  }
  return out;
}

void validate(const ExperimentConfig& c) {
  for (double r : c.missing_rates)
    if (!(r > 0 && r < 1)) throw UsageError("missing_rate must be in (0,1), got " + format_number(r));
  if (c.missing_rates.empty()) throw UsageError("missing_rate: at least one rate required");
  if (c.epochs < 1) throw UsageError("epochs must be >= 1");
  if (!(c.dropout >= 0 && c.dropout < 1)) throw UsageError("dropout must be in [0,1)");
  if (c.mc_samples < 1) throw UsageError("mc_samples must be >= 1");
  if (c.folds < 2) throw UsageError("folds must be >= 2");
  if (c.batch_size < 1) throw UsageError("batch_size must be >= 1");
  if (!(c.learning_rate > 0)) throw UsageError("lr must be > 0");
  if (!(c.kl_weight > 0)) throw UsageError("kl_weight must be > 0");
  if (c.jobs < 1) throw UsageError("jobs must be >= 1");
}

ModelKind single_model(const Invocation& inv) {
  if (!inv.models_given) return ModelKind::mcd_vae;
  if (inv.config.models.size() != 1) throw UsageError("model: give exactly one --model for this command");
  return inv.config.models.front();
}

TrainConfig train_config(const ExperimentConfig& c) {
  TrainConfig tc;
  tc.epochs = c.epochs;
  tc.batch_size = c.batch_size;
  tc.corruption_rate = c.missing_rates.front();
  tc.adam.learning_rate = c.learning_rate;
  tc.seed = RngStream(c.seed).child("train").seed();
  return tc;
}

struct TrainedModel {
  Model model;
  ModelSchema schema;
};

TrainedModel train_on(const RawTable& raw, ModelKind kind, const ExperimentConfig& c, std::ostream& out) {
  const Dataset ds = normalize(complete_cases(raw));
  const TrainConfig tc = train_config(c);
  Model model = build_model(family_of(kind), ds.d(), c.dropout, c.kl_weight, RngStream(tc.seed).child("init").seed());
  const auto history = train_denoising(model, ds, tc);
  out << "trained " << to_string(family_of(kind) == ModelFamily::ae ? ModelKind::ae : ModelKind::vae) << " on "
      << ds.n() << " complete rows for " << history.size() << " epochs, final loss " << format_number(history.back())
      << '\n';
  return {std::move(model), {ds.attribute_names, ds.class_name, ds.norm}};
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write '" + path + "'");
  return os;
}

}  // namespace

Invocation parse_config(const std::vector<std::string>& args) {
  Invocation inv;
  ExperimentConfig& c = inv.config;
  CLI::App app{"Monte Carlo dropout autoencoder imputation"};
  app.set_config("--config", "", "Read option values from a TOML/INI file");
  app.allow_config_extras(false);

  std::vector<std::string> dataset_ids, data_paths, class_columns, markers, model_names;
  std::string data;
  std::vector<double> rates;
  app.add_option("--data", data, "CSV file to use");
  app.add_option("--dataset", dataset_ids, "Dataset id: wisc, pima, synth-milk (repeatable)");
  app.add_option("--data-path", data_paths, "CSV path for each --dataset");
  app.add_option("--data-dir", c.data_dir, "Directory holding wisc.csv and pima.csv");
  app.add_option("--class-column", class_columns, "Class column name or zero-based index");
  app.add_option("--missing-marker", markers, "Text marking a missing cell");
  app.add_option("--model", model_names, "ae, vae, mcd-ae or mcd-vae (repeatable)");
  app.add_option("--missing-rate", rates, "MCAR missing rate (repeatable)");
  app.add_option("--epochs", c.epochs);
  app.add_option("--dropout", c.dropout);
  app.add_option("--mc-samples", c.mc_samples, "Monte Carlo decoder passes T");
  app.add_option("--folds", c.folds);
  app.add_option("--batch-size", c.batch_size);
  app.add_option("--lr", c.learning_rate);
  app.add_option("--kl-weight", c.kl_weight);
  app.add_option("--seed", c.seed);
  app.add_option("--jobs", c.jobs, "Parallel grid jobs");
  app.add_option("--out", c.out, "Output directory (reproduce) or file (train, impute)");
  app.add_option("--model-file", inv.impute.model_file, "impute: trained model to load");
  app.add_option("--train-data", inv.impute.train_data, "impute: CSV to train on");
  app.add_option("--std-out", inv.impute.std_out, "impute: per-cell standard deviation file");
  app.add_flag("--normalized", inv.impute.normalized, "impute: write normalized values");

  for (const char* name : {"impute", "reproduce", "train"}) app.add_subcommand(name)->fallthrough();

  std::vector<std::string> argv_store{"mcdimpute"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    throw;
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  for (const auto* sub : app.get_subcommands()) inv.command = sub->get_name();
  if (!rates.empty()) c.missing_rates = rates;
  if (!model_names.empty()) {
    c.models.clear();
    for (const auto& m : model_names) c.models.push_back(parse_model_kind(m));
    inv.models_given = true;
  }
  c.datasets = resolve_datasets(dataset_ids, data_paths, data, class_columns, markers, c.data_dir);
  validate(c);
  if (inv.command.empty()) throw UsageError("no command given (impute, reproduce or train)");
  return inv;
}

int cmd_reproduce(const ExperimentConfig& cfg, std::ostream& out) {
  const EvalReport report = run_cv(cfg);
  const std::string dir = cfg.out.empty() ? "mcdimpute-report" : cfg.out;
  write_report(dir, report, cfg);
  out << format_tables(report, cfg);
  for (const auto& cell : report.cells)
    if (cell.failed) return 3;
  return 0;
}

int cmd_train(const Invocation& inv, std::ostream& out) {
  const auto& c = inv.config;
  if (c.datasets.size() != 1) throw UsageError("train: exactly one dataset required");
  const auto& src = c.datasets.front();
  if (src.path.empty()) throw UsageError("train: needs a CSV file (--data)");
  const ModelKind kind = single_model(inv);
  const TrainedModel tm = train_on(load_csv(src.path, src.class_column, src.missing_marker), kind, c, out);
  const std::string path = c.out.empty() ? "model.txt" : c.out;
  auto os = open_out(path);
  save_model(os, tm.model, &tm.schema);
  out << "model written to " << path << '\n';
  return 0;
}

int cmd_impute(const Invocation& inv, std::ostream& out) {
  const auto& c = inv.config;
  if (c.datasets.size() != 1 || c.datasets.front().path.empty()) throw UsageError("impute: needs one input CSV (--data)");
  const auto& src = c.datasets.front();
  const ModelKind kind = single_model(inv);
  const RawTable input = load_csv(src.path, src.class_column, src.missing_marker);

  std::ostringstream log;
  TrainedModel tm;
  if (!inv.impute.model_file.empty()) {
    std::ifstream is(inv.impute.model_file);
    if (!is) throw DataError("cannot open model file '" + inv.impute.model_file + "'");
    auto [model, schema] = load_model(is);
    if (!schema) throw DataError("model file has no schema section");
    tm = {std::move(model), std::move(*schema)};
  } else if (!inv.impute.train_data.empty()) {
    tm = train_on(load_csv(inv.impute.train_data, src.class_column, src.missing_marker), kind, c, log);
  } else {
    tm = train_on(input, kind, c, log);
  }
  if (tm.schema.attribute_names != input.attribute_names || tm.schema.class_name != input.class_name)
    throw DataError("input columns do not match the model's schema");

  Dataset base;
  base.attribute_names = input.attribute_names;
  base.class_name = input.class_name;
  base.norm = tm.schema.norm;
  base.values = apply_norm(tm.schema.norm, input);
  base.labels.assign(input.n(), 0);
  Mask mask = base.values.array().isNaN();
  const MaskedDataset md = with_mask(base, std::move(mask));

  ImputeConfig ic;
  ic.mode = is_mcd(kind) ? ImputeConfig::Mode::mcd : ImputeConfig::Mode::deterministic;
  ic.samples = c.mc_samples;
  ic.seed = RngStream(c.seed).child("impute").seed();
  const ImputationResult result = impute(kind, tm.model, md, ic);
  const Matrix original_units = denormalize(tm.schema.norm, result.imputed);

  std::ostringstream csv;
  const std::size_t width = input.d() + 1;
  for (std::size_t col = 0, a = 0; col < width; ++col) {
    csv << (col ? "," : "") << (col == input.class_position ? input.class_name : input.attribute_names[a++]);
  }
  csv << '\n';
  for (std::size_t i = 0; i < input.n(); ++i) {
    for (std::size_t col = 0, a = 0; col < width; ++col) {
      if (col) csv << ',';
      if (col == input.class_position) {
        csv << input.class_labels[i];
        continue;
      }
      const auto r = static_cast<Eigen::Index>(i), j = static_cast<Eigen::Index>(a);
      const auto& cell = input.rows[i][a++];
      if (inv.impute.normalized)
        csv << format_number(result.imputed(r, j));
      else
        csv << format_number(cell ? *cell : original_units(r, j));
    }
    csv << '\n';
  }

  std::string std_path = inv.impute.std_out;
  if (std_path.empty() && !c.out.empty()) std_path = c.out + ".std.csv";
  if (c.out.empty()) {
    out << csv.str();
  } else {
    open_out(c.out) << csv.str();
    out << log.str() << "imputed " << result.cells.size() << " cells, written to " << c.out << '\n';
  }
  if (is_mcd(kind) && !std_path.empty()) {
    auto os = open_out(std_path);
    os << "row,column,std\n";
    for (std::size_t k = 0; k < result.cells.size(); ++k) {
      const auto [i, j] = result.cells[k];
      const double range = tm.schema.norm.max[j] - tm.schema.norm.min[j];
      const double s = result.cell_std[static_cast<Eigen::Index>(k)] * (inv.impute.normalized ? 1.0 : range);
      os << i << ',' << input.attribute_names[static_cast<std::size_t>(j)] << ',' << format_number(s) << '\n';
    }
  }
  return 0;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    const Invocation inv = parse_config(args);
    if (inv.command == "reproduce") return cmd_reproduce(inv.config, out);
    if (inv.command == "train") return cmd_train(inv, out);
    return cmd_impute(inv, out);
  } catch (const CLI::CallForHelp&) {
    out << "usage: mcdimpute {reproduce|train|impute} [--dataset ID | --data FILE] [options]\n"
           "run with an unknown flag to see the full option list in the error message\n";
    return 0;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return 2;
  } catch (const DivergenceError& e) {
    err << "numeric divergence: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace mcdi::cli
