#include "mcdimpute/report.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "mcdimpute/errors.hpp"

namespace mcdi {
namespace {

std::string fixed5(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.5f", v);
  return buf;
}

std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

std::string quoted(const std::string& s) { return '"' + s + '"'; }

template <typename T, typename F>
std::string toml_list(const std::vector<T>& items, F&& fmt) {
  std::string out = "[";
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + fmt(items[i]);
  return out + "]";
}

std::string percent(double rate) {
  std::ostringstream os;
  os << rate * 100;
  return os.str() + "%";
}

// Column order follows the report, so grids run on in-memory datasets print too.
std::vector<std::string> dataset_ids(const EvalReport& report) {
  std::vector<std::string> ids;
  for (const auto& c : report.cells)
    if (std::find(ids.begin(), ids.end(), c.dataset) == ids.end()) ids.push_back(c.dataset);
  return ids;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

}  // namespace

std::string describe_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  auto str = [](const std::string& s) { return quoted(s); };
  std::vector<std::string> ids, paths, classes, markers;
  for (const auto& d : cfg.datasets) {
    ids.push_back(d.id);
    paths.push_back(d.path);
    classes.push_back(d.class_column);
    markers.push_back(d.missing_marker);
  }
  std::vector<std::string> models;
  for (ModelKind k : cfg.models) models.emplace_back(to_string(k));
  os << "dataset = " << toml_list(ids, str) << '\n';
  os << "data-path = " << toml_list(paths, str) << '\n';
  os << "class-column = " << toml_list(classes, str) << '\n';
  os << "missing-marker = " << toml_list(markers, str) << '\n';
  os << "model = " << toml_list(models, str) << '\n';
  os << "missing-rate = " << toml_list(cfg.missing_rates, [](double r) { return format_number(r); }) << '\n';
  os << "epochs = " << cfg.epochs << '\n';
  os << "dropout = " << format_number(cfg.dropout) << '\n';
  os << "mc-samples = " << cfg.mc_samples << '\n';
  os << "folds = " << cfg.folds << '\n';
  os << "batch-size = " << cfg.batch_size << '\n';
  os << "lr = " << format_number(cfg.learning_rate) << '\n';
  os << "kl-weight = " << format_number(cfg.kl_weight) << '\n';
  os << "seed = " << cfg.seed << '\n';
  return os.str();
}

std::string format_tables(const EvalReport& report, const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "# mcdimpute cross-validated imputation report\n";
  std::istringstream conf(describe_config(cfg));
  for (std::string line; std::getline(conf, line);) os << "# " << line << '\n';
  os << "# RMSE on masked cells of normalized data, mean[std] over " << report.folds
     << " folds; * marks the lowest RMSE per dataset\n";

  const auto ids = dataset_ids(report);
  constexpr std::size_t kModelCol = 10, kCellCol = 20;
  for (double rate : cfg.missing_rates) {
    os << '\n' << percent(rate) << " missing data (RMSE)\n" << pad("Models", kModelCol);
    for (const auto& id : ids) os << pad(upper(id), kCellCol);
    os << '\n';
    std::vector<double> best(ids.size(), std::numeric_limits<double>::infinity());
    for (std::size_t c = 0; c < ids.size(); ++c)
      for (ModelKind k : cfg.models)
        if (const auto* cell = report.find(ids[c], k, rate); cell && !cell->failed)
          best[c] = std::min(best[c], cell->rmse_mean);
    for (ModelKind k : cfg.models) {
      os << pad(std::string(display_name(k)), kModelCol);
      for (std::size_t c = 0; c < ids.size(); ++c) {
        const auto* cell = report.find(ids[c], k, rate);
        std::string text = "n/a";
        if (cell && cell->failed)
          text = "failed";
        else if (cell)
          text = fixed5(cell->rmse_mean) + "[" + fixed5(cell->rmse_std) + "]" +
                 (cell->rmse_mean == best[c] ? "*" : "");
        os << pad(text, kCellCol);
      }
      os << '\n';
    }
  }
  for (double rate : cfg.missing_rates) {
    os << '\n' << percent(rate) << " missing data (delta acc)\n" << pad("Models", kModelCol);
    for (const auto& id : ids) os << pad(upper(id), kCellCol);
    os << '\n';
    for (ModelKind k : cfg.models) {
      os << pad(std::string(display_name(k)), kModelCol);
      for (const auto& id : ids) {
        const auto* cell = report.find(id, k, rate);
        os << pad(!cell ? "n/a" : cell->failed ? "failed" : fixed5(cell->delta_acc), kCellCol);
      }
      os << '\n';
    }
  }
  return os.str();
}

std::string format_dump(const EvalReport& report, const ExperimentConfig& cfg) {
  std::ostringstream os;
  std::istringstream conf(describe_config(cfg));
  for (std::string line; std::getline(conf, line);) {
    const auto eq = line.find(" = ");
    os << "config." << line.substr(0, eq) << '=' << line.substr(eq + 3) << '\n';
  }
  for (const auto& c : report.cells) {
    const std::string key = "cell." + c.dataset + "." + std::string(to_string(c.model)) + "." + format_number(c.rate);
    os << key << ".status=" << (c.failed ? "failed" : "ok") << '\n';
    if (c.failed) {
      os << key << ".failure=" << c.failure << '\n';
      continue;
    }
    os << key << ".rmse_mean=" << format_number(c.rmse_mean) << '\n';
    os << key << ".rmse_std=" << format_number(c.rmse_std) << '\n';
    os << key << ".delta_acc=" << format_number(c.delta_acc) << '\n';
    os << key << ".rmse_all_mean=" << format_number(c.rmse_all_mean) << '\n';
    for (std::size_t f = 0; f < c.fold_rmse.size(); ++f) {
      os << key << ".fold." << f << ".rmse=" << format_number(c.fold_rmse[f]) << '\n';
      os << key << ".fold." << f << ".delta_acc=" << format_number(c.fold_delta_acc[f]) << '\n';
      os << key << ".fold." << f << ".rmse_all=" << format_number(c.fold_rmse_all[f]) << '\n';
    }
  }
  return os.str();
}

void write_report(const std::filesystem::path& dir, const EvalReport& report, const ExperimentConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory '" + dir.string() + "': " + ec.message());
  auto write = [&](const char* name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw DataError("cannot write '" + (dir / name).string() + "'");
    out << text;
  };
  write("report.txt", format_tables(report, cfg));
  write("results.kv", format_dump(report, cfg));
  write("config.toml", describe_config(cfg));
}

}  // namespace mcdi
