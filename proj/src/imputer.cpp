#include "mcdimpute/imputer.hpp"

#include <algorithm>
#include <cmath>

#include "mcdimpute/errors.hpp"

namespace mcdi {
namespace {

Eigen::Index input_width(const Model& model) {
  return std::visit([](const auto& m) { return m.input_width(); }, model);
}

void check_width(const Model& model, const MaskedDataset& md) {
  if (input_width(model) != md.base.d())
    throw DataError("model expects " + std::to_string(input_width(model)) + " attributes, data has " +
                    std::to_string(md.base.d()));
  if (md.mask.rows() != md.base.n() || md.mask.cols() != md.base.d())
    throw std::invalid_argument("mask shape does not match data");
}

ImputationResult start_result(const MaskedDataset& md) {
  ImputationResult r;
  r.mask = md.mask;
  r.imputed = md.base.values;
  for (Eigen::Index i = 0; i < md.mask.rows(); ++i)
    for (Eigen::Index j = 0; j < md.mask.cols(); ++j)
      if (md.mask(i, j)) r.cells.emplace_back(i, j);
  return r;
}

// Encoder output that every decoder pass starts from: the bottleneck code for
// an AE, (mu, logvar) for a VAE.
struct Encoding {
  Matrix code;
  Matrix logvar;
};

Encoding encode(const Model& model, const Matrix& x) {
  if (const auto* ae = std::get_if<AEModel>(&model)) return {nn::forward(ae->encoder, x, false, nullptr), {}};
  const auto& vae = std::get<VAEModel>(model);
  const Matrix h = nn::forward(vae.trunk, x, false, nullptr);
  return {nn::dense_forward(vae.mu_head, h), nn::dense_forward(vae.logvar_head, h)};
}

const nn::Network<double>& decoder_of(const Model& model) {
  if (const auto* ae = std::get_if<AEModel>(&model)) return ae->decoder;
  return std::get<VAEModel>(model).decoder;
}

}  // namespace

ImputationResult impute_deterministic(const Model& model, const MaskedDataset& md) {
  check_width(model, md);
  ImputationResult r = start_result(md);
  if (r.cells.empty()) return r;
  const Encoding enc = encode(model, md.sentinel_view);
  const Matrix out = nn::forward(decoder_of(model), enc.code, false, nullptr);
  for (const auto& [i, j] : r.cells) r.imputed(i, j) = out(i, j);
  return r;
}

ImputationResult impute_mcd(const Model& model, const MaskedDataset& md, const ImputeConfig& cfg) {
  if (cfg.samples < 1) throw std::invalid_argument("impute_mcd: T must be >= 1");
  check_width(model, md);
  ImputationResult r = start_result(md);
  const auto m = static_cast<Eigen::Index>(r.cells.size());
  r.samples.resize(cfg.samples, m);
  r.cell_std = Vector::Zero(m);
  if (m == 0) return r;

  const bool is_vae = std::holds_alternative<VAEModel>(model);
  const Encoding enc = encode(model, md.sentinel_view);
  const auto& decoder = decoder_of(model);
  const RngStream root(cfg.seed);
  for (int t = 0; t < cfg.samples; ++t) {
    RngStream rng = root.child(static_cast<std::uint64_t>(t));
    Matrix z = enc.code;
    if (is_vae && cfg.sample_latent) {
      Matrix eps(z.rows(), z.cols());
      for (Eigen::Index k = 0; k < eps.size(); ++k) eps.data()[k] = rng.normal();
      z = reparameterize(enc.code, enc.logvar, eps);
    }
    const Matrix out = nn::forward(decoder, z, true, &rng);
    for (Eigen::Index c = 0; c < m; ++c) {
      const auto [i, j] = r.cells[static_cast<std::size_t>(c)];
      r.samples(t, c) = out(i, j);
    }
  }

  // Welford running mean: equal samples give back that value bit-exactly.
  for (Eigen::Index c = 0; c < m; ++c) {
    double mean = 0, m2 = 0;
    for (int t = 0; t < cfg.samples; ++t) {
      const double x = r.samples(t, c);
      const double delta = x - mean;
      mean += delta / static_cast<double>(t + 1);
      m2 += delta * (x - mean);
    }
    const auto [i, j] = r.cells[static_cast<std::size_t>(c)];
    r.imputed(i, j) = mean;
    r.cell_std[c] = cfg.samples > 1 ? std::sqrt(std::max(0.0, m2) / static_cast<double>(cfg.samples)) : 0.0;
  }
  return r;
}

ImputationResult impute(ModelKind kind, const Model& model, const MaskedDataset& md, const ImputeConfig& cfg) {
  if ((family_of(kind) == ModelFamily::ae) != std::holds_alternative<AEModel>(model))
    throw DataError("model kind " + std::string(to_string(kind)) + " does not match the trained model");
  if (is_mcd(kind)) return impute_mcd(model, md, cfg);
  return impute_deterministic(model, md);
}

Dataset impute_dataset(ModelKind kind, const Model& model, const MaskedDataset& md, const ImputeConfig& cfg) {
  Dataset out = md.base;
  out.values = impute(kind, model, md, cfg).imputed;
  return out;
}

}  // namespace mcdi
