// Acceptance suite: one PASS/FAIL line per criterion, with the measured numbers.
#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include "mcdimpute/cli.hpp"
#include "mcdimpute/eval.hpp"
#include "mcdimpute/imputer.hpp"
#include "support.hpp"

using namespace mcdi;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1. Finite differences on random small networks.
Outcome gradient_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  RngStream root(2024);
  double worst = 0;
  const nn::Activation acts[] = {nn::Activation::linear, nn::Activation::relu, nn::Activation::sigmoid};
  for (int net_id = 0; net_id < 50; ++net_id) {
    RngStream rng = root.child(static_cast<std::uint64_t>(net_id));
    const int depth = 1 + static_cast<int>(rng.below(3));
    Eigen::Index width = 1 + static_cast<Eigen::Index>(rng.below(6));
    const Eigen::Index in = width;
    nn::Network<double> net;
    for (int k = 0; k < depth; ++k) {
      const Eigen::Index out = 1 + static_cast<Eigen::Index>(rng.below(6));
      const double p = rng.bernoulli(0.5) ? 0.3 : 0.0;
      net.push_back(nn::make_dense<double>(width, out, acts[rng.below(3)], p, rng));
      net.back().bias = Vector::Random(out) * 0.1;
      width = out;
    }
    const Eigen::Index batch = 1 + static_cast<Eigen::Index>(rng.below(4));
    const Matrix x = testsupport::random_unit(batch, in, rng);
    const Matrix y = testsupport::random_unit(batch, width, rng);
    const std::uint64_t mask_seed = rng.child("masks").seed();
    auto eval = [&](nn::Gradients<double>* out) {
      RngStream masks(mask_seed);
      nn::ForwardCache<double> cache;
      nn::forward(net, x, true, &masks, &cache);
      auto lg = nn::backward(net, y, cache);
      if (out) *out = std::move(lg.grads);
      return lg.loss;
    };
    nn::Gradients<double> analytic;
    eval(&analytic);
    worst = std::max(worst, testsupport::max_fd_error(nn::parameters_of(net), analytic, [&] { return eval(nullptr); }));
  }
  // The two model objectives, VAE head and reparameterization included.
  RngStream data(5);
  const Matrix target = testsupport::random_unit(4, 6, data);
  Matrix input = target;
  input(1, 2) = kSentinel;
  auto model_error = [&](auto model) {
    nn::Gradients<double> g;
    RngStream r0(31);
    model.loss_and_gradients(input, target, r0, g);
    return testsupport::max_fd_error(model.parameters(), g, [&] {
      RngStream r(31);
      nn::Gradients<double> scratch;
      return model.loss_and_gradients(input, target, r, scratch);
    });
  };
  const double model_worst = std::max(model_error(build_ae(6, 0.2, 1)), model_error(build_vae(6, 0.2, 1.0, 2)));
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && model_worst < 1e-4 && secs < 10,
          fmt("max rel err %.2e over 50 nets (AE/VAE objectives %.2e), %.2fs", worst, model_worst, secs)};
}

// 2. KL closed form against Simpson quadrature of q log(q/p).
Outcome kl_oracle() {
  RngStream rng(7);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    const double mu = 4 * rng.uniform() - 2, lv = 4 * rng.uniform() - 2;
    const double sigma = std::exp(lv / 2);
    const double lo = mu - 14 * sigma, hi = mu + 14 * sigma;
    const int n = 20000;
    const double h = (hi - lo) / n;
    double acc = 0;
    for (int k = 0; k <= n; ++k) {
      const double x = lo + k * h;
      const double log_q = -0.5 * std::log(2 * M_PI) - std::log(sigma) - (x - mu) * (x - mu) / (2 * sigma * sigma);
      const double log_p = -0.5 * std::log(2 * M_PI) - x * x / 2;
      const double w = (k == 0 || k == n) ? 1 : (k % 2 ? 4 : 2);
      acc += w * std::exp(log_q) * (log_q - log_p);
    }
    const double quad = acc * h / 3;
    worst = std::max(worst, std::abs(quad - kl_gauss(Matrix::Constant(1, 1, mu), Matrix::Constant(1, 1, lv))));
  }
  return {worst < 1e-6, fmt("max |closed - quadrature| = %.2e over 100 cases", worst)};
}

// 3. Inverted dropout is unbiased.
Outcome dropout_expectation() {
  RngStream rng(3);
  const Matrix x = (testsupport::random_unit(1, 16, rng).array() + 0.5).matrix();
  double worst = 0;
  for (double p : {0.2, 0.5}) {
    Matrix sum = Matrix::Zero(1, 16);
    const int masks = 100000;
    for (int k = 0; k < masks; ++k) sum += nn::dropout_apply<double>(x, p, rng, true).output;
    worst = std::max(worst, ((sum / masks - x).array() / x.array()).abs().maxCoeff());
  }
  return {worst < 0.02, fmt("max relative deviation %.4f (p = 0.2, 0.5; 1e5 masks)", worst)};
}

// 4. Exact MCAR counts and sentinel placement.
Outcome mask_exactness() {
  bool ok = true;
  std::string bad;
  const std::pair<Eigen::Index, Eigen::Index> shapes[] = {{50, 8}, {699, 9}, {768, 8}};
  for (auto [n, d] : shapes)
    for (double rate : {0.1, 0.3, 0.5}) {
      RngStream rng(static_cast<std::uint64_t>(n * 100 + d));
      Dataset ds;
      ds.values = testsupport::random_unit(n, d, rng);
      ds.labels.assign(static_cast<std::size_t>(n), 0);
      ds.class_names = {"c"};
      const MaskedDataset md = mask_mcar(ds, rate, rng);
      const auto expected = std::llround(rate * static_cast<double>(n * d));
      Matrix want = ds.values;
      for (Eigen::Index i = 0; i < want.size(); ++i)
        if (md.mask.data()[i]) want.data()[i] = -1.0;
      const bool same_bits =
          std::memcmp(want.data(), md.sentinel_view.data(), sizeof(double) * static_cast<std::size_t>(want.size())) == 0;
      if (md.masked_count() != expected || !same_bits) {
        ok = false;
        bad += fmt(" (%ld,%ld,%.1f)", static_cast<long>(n), static_cast<long>(d), rate);
      }
    }
  return {ok, ok ? "9/9 shape-rate pairs exact" : "mismatch at" + bad};
}

// 5. No dropout and no latent noise: MC mean equals the deterministic pass.
Outcome noiseless_equivalence() {
  RngStream rng(11);
  Dataset ds;
  ds.values = testsupport::random_unit(699, 9, rng);
  for (int i = 0; i < 699; ++i) ds.labels.push_back(i % 2);
  ds.class_names = {"a", "b"};
  TrainConfig tc;
  tc.epochs = 3;
  tc.corruption_rate = 0.3;
  tc.seed = 1;
  Model ae = build_ae(9, 0.0, 2), vae = build_vae(9, 0.0, 1.0, 3);
  train_denoising(ae, ds, tc);
  train_denoising(vae, ds, tc);
  ImputeConfig mc;
  mc.samples = 50;
  mc.sample_latent = false;
  int same = 0, total = 0;
  for (double rate : {0.1, 0.3, 0.5}) {
    const MaskedDataset md = mask_mcar(ds, rate, rng);
    for (const Model* m : {&ae, &vae}) {
      mc.seed = static_cast<std::uint64_t>(total);
      same += impute_mcd(*m, md, mc).imputed == impute_deterministic(*m, md).imputed;
      ++total;
    }
  }
  return {same == total, fmt("%d/%d model-rate pairs bit-identical at T=50", same, total)};
}

// 6 and 7. Five master seeds of the full grid on WISC and PIMA.
struct Targets {
  std::map<std::string, std::map<ModelKind, std::array<double, 3>>> rmse;
};

const Targets& published() {
  static const Targets t{{
      {"wisc",
       {{ModelKind::ae, {0.07649, 0.12444, 0.14901}},
        {ModelKind::vae, {0.06014, 0.11229, 0.13753}},
        {ModelKind::mcd_ae, {0.06048, 0.1129, 0.12488}},
        {ModelKind::mcd_vae, {0.05939, 0.1059, 0.12706}}}},
      {"pima",
       {{ModelKind::ae, {0.06565, 0.11103, 0.14132}},
        {ModelKind::vae, {0.06909, 0.11666, 0.14057}},
        {ModelKind::mcd_ae, {0.06649, 0.11410, 0.13829}},
        {ModelKind::mcd_vae, {0.06462, 0.11221, 0.13815}}}},
  }};
  return t;
}

struct GridAverages {
  // [dataset][model][rate index]
  std::map<std::string, std::map<ModelKind, std::array<double, 3>>> rmse, rmse_all, dacc;
  std::map<ModelKind, std::vector<double>> pima_dacc_10;  // per seed
  int failed_cells = 0;
  double wisc_seconds_max = 0;
};

GridAverages run_grids(int seeds, int jobs) {
  GridAverages g;
  const double rates[] = {0.1, 0.3, 0.5};
  for (int s = 1; s <= seeds; ++s)
    for (const char* id : {"wisc", "pima"}) {
      ExperimentConfig cfg;
      cfg.datasets = {{id, testsupport::data_file(std::string(id) + ".csv")}};
      cfg.seed = static_cast<std::uint64_t>(s);
      cfg.jobs = jobs;
      const auto t0 = std::chrono::steady_clock::now();
      const EvalReport r = run_cv(cfg);
      const double secs = seconds_since(t0);
      if (std::string(id) == "wisc") g.wisc_seconds_max = std::max(g.wisc_seconds_max, secs);
      std::cerr << "  grid " << id << " seed " << s << ": " << fmt("%.1fs", secs) << '\n';
      for (ModelKind k : kAllModelKinds)
        for (int ri = 0; ri < 3; ++ri) {
          const CellResult* c = r.find(id, k, rates[ri]);
          if (!c || c->failed) {
            ++g.failed_cells;
            continue;
          }
          g.rmse[id][k][ri] += c->rmse_mean / seeds;
          g.rmse_all[id][k][ri] += c->rmse_all_mean / seeds;
          g.dacc[id][k][ri] += c->delta_acc / seeds;
          if (std::string(id) == "pima" && ri == 0) g.pima_dacc_10[k].push_back(c->delta_acc);
        }
    }
  return g;
}

void print_grid(const GridAverages& g, std::ostream& os) {
  const char* pct[] = {"10%", "30%", "50%"};
  os << "  dataset model     rate  masked-RMSE  all-cells-RMSE  published  delta-acc\n";
  for (const char* id : {"wisc", "pima"})
    for (ModelKind k : kAllModelKinds)
      for (int ri = 0; ri < 3; ++ri)
        os << fmt("  %-7s %-9s %-4s  %.5f      %.5f         %.5f    %+.5f\n", id,
                         std::string(display_name(k)).c_str(), pct[ri], g.rmse.at(id).at(k)[ri],
                         g.rmse_all.at(id).at(k)[ri], published().rmse.at(id).at(k)[ri], g.dacc.at(id).at(k)[ri]);
}

Outcome criterion_6a(const GridAverages& g) {
  int within = 0, total = 0;
  double worst = 0;
  for (const auto& [id, models] : published().rmse)
    for (const auto& [k, vals] : models)
      for (int ri = 0; ri < 3; ++ri) {
        const double diff = std::abs(g.rmse.at(id).at(k)[ri] - vals[ri]);
        worst = std::max(worst, diff);
        within += diff <= 0.03;
        ++total;
      }
  return {within == total && g.failed_cells == 0,
          fmt("%d/%d cells within +-0.03 of the published table (worst |diff| %.4f)", within, total, worst)};
}

Outcome criterion_6b(const GridAverages& g) {
  int ok = 0, total = 0;
  std::string misses;
  const char* pct[] = {"10%", "30%", "50%"};
  for (const char* id : {"wisc", "pima"})
    for (int ri = 0; ri < 3; ++ri) {
      const auto& m = g.rmse.at(id);
      const double mcd = std::min(m.at(ModelKind::mcd_ae)[ri], m.at(ModelKind::mcd_vae)[ri]);
      const double plain = std::min(m.at(ModelKind::ae)[ri], m.at(ModelKind::vae)[ri]);
      ++total;
      if (mcd <= plain)
        ++ok;
      else
        misses += fmt(" %s/%s(+%.5f)", id, pct[ri], mcd - plain);
    }
  return {ok == total, fmt("%d/%d dataset-rate pairs with MCD best", ok, total) + (misses.empty() ? "" : "; misses:" + misses)};
}

Outcome criterion_6c(const GridAverages& g) {
  int ok = 0, total = 0;
  std::string misses;
  for (const char* id : {"wisc", "pima"})
    for (ModelKind k : kAllModelKinds) {
      const auto& v = g.rmse.at(id).at(k);
      ++total;
      if (v[0] < v[1] && v[1] < v[2])
        ++ok;
      else
        misses += fmt(" %s/%s", id, std::string(display_name(k)).c_str());
    }
  return {ok == total, fmt("%d/%d dataset-model series strictly increasing", ok, total) +
                           (misses.empty() ? "" : "; not increasing:" + misses)};
}

Outcome criterion_7(const GridAverages& g) {
  const double a = g.dacc.at("wisc").at(ModelKind::mcd_ae)[0], b = g.dacc.at("wisc").at(ModelKind::mcd_vae)[0];
  const bool wisc_ok = std::abs(a) <= 0.05 && std::abs(b) <= 0.05;
  int stable = 0;
  std::string signs;
  for (ModelKind k : kAllModelKinds) {
    const auto& v = g.pima_dacc_10.at(k);
    const bool all_nonneg = std::all_of(v.begin(), v.end(), [](double x) { return x >= 0; });
    const bool all_nonpos = std::all_of(v.begin(), v.end(), [](double x) { return x <= 0; });
    stable += all_nonneg || all_nonpos;
    signs += " " + std::string(display_name(k)) + ":";
    for (double x : v) signs += x > 0 ? "+" : x < 0 ? "-" : "0";
  }
  return {wisc_ok && stable == 4, fmt("WISC 10%% MCD-AE %+.4f, MCD-VAE %+.4f; PIMA 10%% sign-stable models %d/4 (", a, b,
                                      stable) + signs.substr(1) + ")"};
}

// 8. Byte-identical reports; thread count does not change the numbers.
Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "mcdimpute-acceptance";
  fs::remove_all(root);
  auto reproduce = [&](const std::string& name, int jobs) {
    std::ostringstream out, err;
    const int rc = cli::run({"reproduce", "--dataset", "wisc", "--data-dir", MCDI_DATA_DIR, "--epochs", "10",
                             "--mc-samples", "20", "--seed", "17", "--jobs", std::to_string(jobs), "--out",
                             (root / name).string()},
                            out, err);
    if (rc != 0) throw std::runtime_error("reproduce failed: " + err.str());
    return root / name;
  };
  auto slurp = [](const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
  };
  const fs::path a = reproduce("a", 1), b = reproduce("b", 1), c = reproduce("c", 4);
  bool same = true;
  for (const char* f : {"report.txt", "results.kv", "config.toml"}) same = same && slurp(a / f) == slurp(b / f);
  const bool threads_same = slurp(a / "results.kv") == slurp(c / "results.kv");
  return {same && threads_same && !slurp(a / "results.kv").empty(),
          std::string("jobs=1 twice: ") + (same ? "identical" : "DIFFERENT") +
              "; jobs=4 numbers: " + (threads_same ? "identical" : "DIFFERENT")};
}

// 9. Spread of the MC mean falls like 1/sqrt(T).
Outcome lln() {
  const Dataset wisc = load_dataset({"wisc", testsupport::data_file("wisc.csv")});
  Model model = build_ae(wisc.d(), 0.2, 4);
  TrainConfig tc;
  tc.epochs = 50;
  tc.corruption_rate = 0.1;
  tc.seed = 5;
  train_denoising(model, wisc, tc);

  const std::vector<Eigen::Index> one_row{10};
  Mask mask = Mask::Constant(1, wisc.d(), false);
  mask(0, 3) = true;
  const MaskedDataset md = with_mask(subset(wisc, one_row), mask);
  auto spread = [&](int T) {
    std::vector<double> means;
    for (int rep = 0; rep < 100; ++rep) {
      ImputeConfig ic;
      ic.samples = T;
      ic.seed = mix_seed(static_cast<std::uint64_t>(T), static_cast<std::uint64_t>(rep));
      means.push_back(impute_mcd(model, md, ic).imputed(0, 3));
    }
    return sample_std(means);
  };
  const double s10 = spread(10), s1000 = spread(1000);
  const double ratio = s10 / s1000;
  return {ratio >= 7.5 && ratio <= 12.5, fmt("std(T=10) %.3e / std(T=1000) %.3e = %.2f", s10, s1000, ratio)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mcdimpute acceptance suite"};
  std::vector<int> only;
  int seeds = 5;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  app.add_option("--only", only, "Run just these criterion numbers");
  app.add_option("--seeds", seeds, "Master seeds for the grid criteria (6, 7)");
  app.add_option("--jobs", jobs, "Worker threads for the grid criteria");
  std::vector<std::string> known_gaps;
  app.add_option("--known-gap", known_gaps,
                 "Criterion id (e.g. 6a) that still prints FAIL but does not set the exit status");
  std::string report_path;
  app.add_option("--report", report_path, "Also write the result lines to this file");
  CLI11_PARSE(app, argc, argv);
  std::ofstream report_file;
  if (!report_path.empty()) report_file.open(report_path);
  auto emit = [&](const std::string& line) {
    std::cout << line << std::endl;
    if (report_file) report_file << line << std::endl;
  };
  auto wanted = [&](int n) { return only.empty() || std::find(only.begin(), only.end(), n) != only.end(); };

  int failures = 0, gaps = 0;
  auto report = [&](const std::string& label, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const std::string id = label.substr(0, label.find(' '));
    const bool gap = std::find(known_gaps.begin(), known_gaps.end(), id) != known_gaps.end();
    if (!o.pass) (gap ? gaps : failures) += 1;
    emit(std::string(o.pass ? "PASS " : "FAIL ") + label + ": " + o.detail + (!o.pass && gap ? " [known gap]" : ""));
  };

  if (wanted(1)) report("1 gradient oracle", gradient_oracle);
  if (wanted(2)) report("2 KL oracle", kl_oracle);
  if (wanted(3)) report("3 dropout expectation", dropout_expectation);
  if (wanted(4)) report("4 mask exactness", mask_exactness);
  if (wanted(5)) report("5 noiseless equivalence", noiseless_equivalence);
  if (wanted(6) || wanted(7)) {
    std::cerr << "running " << seeds << " seeds x {wisc, pima} full grids with " << jobs << " thread(s)\n";
    const GridAverages g = run_grids(seeds, jobs);
    std::ostringstream grid;
    grid << "  averages over " << seeds << " master seeds (epochs 300, dropout 0.2, T 100, 5 folds):\n";
    print_grid(g, grid);
    std::string text = grid.str();
    text.pop_back();
    emit(text);
    if (wanted(6)) {
      report("6a published RMSE bands", [&] { return criterion_6a(g); });
      report("6b MCD lowers RMSE", [&] { return criterion_6b(g); });
      report("6c RMSE increases with rate", [&] { return criterion_6c(g); });
      report("6r WISC grid runtime", [&] {
        return Outcome{g.wisc_seconds_max < 600, fmt("slowest WISC grid %.1fs on %d thread(s)", g.wisc_seconds_max, jobs)};
      });
    }
    if (wanted(7)) report("7 delta acc band", [&] { return criterion_7(g); });
  }
  if (wanted(8)) report("8 determinism", determinism);
  if (wanted(9)) report("9 LLN check", lln);

  emit(fmt("%d unexpected failure(s), %d known gap(s)", failures, gaps));
  return failures ? 1 : 0;
}
