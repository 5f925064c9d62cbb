#include "mcdimpute/models.hpp"

#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>

#include "mcdimpute/errors.hpp"

namespace mcdi {

using nn::Activation;
using nn::DenseLayer;
using nn::ForwardCache;
using nn::Gradients;
using nn::LayerGrad;

namespace {

std::span<LayerGrad<double>> slots(Gradients<double>& g, std::size_t offset, std::size_t count) {
  return std::span<LayerGrad<double>>(g).subspan(offset, count);
}

std::span<const DenseLayer<double>> view(const nn::Network<double>& net) {
  return std::span<const DenseLayer<double>>(net);
}

}  // namespace

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::ae: return "ae";
    case ModelKind::vae: return "vae";
    case ModelKind::mcd_ae: return "mcd-ae";
    case ModelKind::mcd_vae: return "mcd-vae";
  }
  return "?";
}

std::string_view display_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::ae: return "AE";
    case ModelKind::vae: return "VAE";
    case ModelKind::mcd_ae: return "MCD-AE";
    case ModelKind::mcd_vae: return "MCD-VAE";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view s) {
  for (ModelKind k : kAllModelKinds)
    if (s == to_string(k)) return k;
  throw UsageError("unknown model kind '" + std::string(s) + "' (expected ae, vae, mcd-ae or mcd-vae)");
}

AEModel build_ae(Eigen::Index d, double dropout_p, std::uint64_t seed) {
  if (d < 1) throw std::invalid_argument("build_ae: d must be >= 1");
  RngStream rng(seed);
  AEModel m;
  m.encoder.push_back(nn::make_dense<double>(d, kHiddenWidth, Activation::relu, dropout_p, rng));
  m.encoder.push_back(nn::make_dense<double>(kHiddenWidth, kLatentWidth, Activation::relu, dropout_p, rng));
  m.decoder.push_back(nn::make_dense<double>(kLatentWidth, kHiddenWidth, Activation::relu, dropout_p, rng));
  m.decoder.push_back(nn::make_dense<double>(kHiddenWidth, d, Activation::sigmoid, 0.0, rng));
  return m;
}

VAEModel build_vae(Eigen::Index d, double dropout_p, double kl_weight, std::uint64_t seed) {
  if (d < 1) throw std::invalid_argument("build_vae: d must be >= 1");
  if (!(kl_weight > 0)) throw std::invalid_argument("build_vae: kl_weight must be > 0");
  RngStream rng(seed);
  VAEModel m;
  m.kl_weight = kl_weight;
  m.trunk.push_back(nn::make_dense<double>(d, kHiddenWidth, Activation::relu, dropout_p, rng));
  m.mu_head = nn::make_dense<double>(kHiddenWidth, kLatentWidth, Activation::linear, 0.0, rng);
  m.logvar_head = nn::make_dense<double>(kHiddenWidth, kLatentWidth, Activation::linear, 0.0, rng);
  m.decoder.push_back(nn::make_dense<double>(kLatentWidth, kHiddenWidth, Activation::relu, dropout_p, rng));
  m.decoder.push_back(nn::make_dense<double>(kHiddenWidth, d, Activation::sigmoid, 0.0, rng));
  return m;
}

Model build_model(ModelFamily family, Eigen::Index d, double dropout_p, double kl_weight, std::uint64_t seed) {
  if (family == ModelFamily::ae) return build_ae(d, dropout_p, seed);
  return build_vae(d, dropout_p, kl_weight, seed);
}

Eigen::Index parameter_count(const Model& model) {
  if (const auto* ae = std::get_if<AEModel>(&model))
    return nn::parameter_count(view(ae->encoder)) + nn::parameter_count(view(ae->decoder));
  const auto& vae = std::get<VAEModel>(model);
  return nn::parameter_count(view(vae.trunk)) + vae.mu_head.parameter_count() + vae.logvar_head.parameter_count() +
         nn::parameter_count(view(vae.decoder));
}

std::vector<DenseLayer<double>*> AEModel::parameters() {
  std::vector<DenseLayer<double>*> out;
  for (auto& l : encoder) out.push_back(&l);
  for (auto& l : decoder) out.push_back(&l);
  return out;
}

double AEModel::loss_and_gradients(const Matrix& x, const Matrix& target, RngStream& rng, Gradients<double>& grads) {
  grads.resize(encoder.size() + decoder.size());
  ForwardCache<double> enc_cache, dec_cache;
  const Matrix code = nn::forward(encoder, x, true, &rng, &enc_cache);
  const Matrix xhat = nn::forward(decoder, code, true, &rng, &dec_cache);
  const double loss = nn::mse_loss(xhat, target);
  Matrix d_code = nn::backprop(view(decoder), dec_cache, nn::mse_gradient(xhat, target),
                               slots(grads, encoder.size(), decoder.size()));
  nn::backprop(view(encoder), enc_cache, std::move(d_code), slots(grads, 0, encoder.size()));
  return loss;
}

std::vector<DenseLayer<double>*> VAEModel::parameters() {
  std::vector<DenseLayer<double>*> out;
  for (auto& l : trunk) out.push_back(&l);
  out.push_back(&mu_head);
  out.push_back(&logvar_head);
  for (auto& l : decoder) out.push_back(&l);
  return out;
}

double VAEModel::loss_and_gradients(const Matrix& x, const Matrix& target, RngStream& rng, Gradients<double>& grads) {
  const std::size_t nt = trunk.size(), nd = decoder.size();
  grads.resize(nt + 2 + nd);
  ForwardCache<double> trunk_cache, dec_cache;
  const Matrix h = nn::forward(trunk, x, true, &rng, &trunk_cache);
  const Matrix mu = nn::dense_forward(mu_head, h);
  const Matrix logvar = nn::dense_forward(logvar_head, h);
  Matrix eps(mu.rows(), mu.cols());
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = rng.normal();
  const Matrix z = reparameterize(mu, logvar, eps);
  const Matrix xhat = nn::forward(decoder, z, true, &rng, &dec_cache);
  const VaeLoss loss = vae_loss(xhat, target, mu, logvar, kl_weight);

  const Matrix dz = nn::backprop(view(decoder), dec_cache, nn::mse_gradient(xhat, target), slots(grads, nt + 2, nd));
  const double kl_scale = kl_weight / static_cast<double>(x.rows());
  const Matrix d_mu = dz + kl_scale * mu;
  const Matrix d_logvar =
      (dz.array() * eps.array() * (0.5 * logvar.array()).exp() * 0.5 + kl_scale * 0.5 * (logvar.array().exp() - 1.0))
          .matrix();
  grads[nt].weights = d_mu.transpose() * h;
  grads[nt].bias = d_mu.colwise().sum().transpose();
  grads[nt + 1].weights = d_logvar.transpose() * h;
  grads[nt + 1].bias = d_logvar.colwise().sum().transpose();
  Matrix dh = d_mu * mu_head.weights + d_logvar * logvar_head.weights;
  nn::backprop(view(trunk), trunk_cache, std::move(dh), slots(grads, 0, nt));
  return loss.total;
}

VaeLoss vae_loss(const Matrix& xhat, const Matrix& x, const Matrix& mu, const Matrix& logvar, double kl_weight) {
  if (mu.rows() != x.rows()) throw std::invalid_argument("vae_loss: batch size mismatch");
  VaeLoss l;
  l.recon = nn::mse_loss(xhat, x);
  l.kl = kl_gauss(mu, logvar);
  l.total = l.recon + kl_weight * l.kl / static_cast<double>(x.rows());
  return l;
}

void corrupt_mcar(Matrix& batch, double rate, RngStream& rng) {
  if (rate <= 0) return;
  const Mask mask = sample_mcar_mask(batch.rows(), batch.cols(), rate, rng);
  batch = mask.select(Matrix::Constant(batch.rows(), batch.cols(), kSentinel), batch);
}

std::vector<double> train_denoising(Model& model, const Dataset& train, const TrainConfig& cfg, RngStream& rng) {
  if (!(cfg.corruption_rate >= 0 && cfg.corruption_rate < 1))
    throw std::invalid_argument("train_denoising: corruption_rate must be in [0,1)");
  const Eigen::Index width = std::visit([](const auto& m) { return m.input_width(); }, model);
  if (width != train.d()) throw DataError("train_denoising: model expects " + std::to_string(width) + " attributes");
  nn::TrainOptions<double> opts;
  opts.epochs = cfg.epochs;
  opts.batch_size = cfg.batch_size;
  opts.adam = cfg.adam;
  if (cfg.corruption_rate > 0) {
    const double rate = cfg.corruption_rate;
    opts.corrupt = [rate](Matrix& batch, RngStream& r) { corrupt_mcar(batch, rate, r); };
  }
  return std::visit([&](auto& m) { return nn::fit<double>(m, train.values, train.values, opts, rng); }, model);
}

std::vector<double> train_denoising(Model& model, const Dataset& train, const TrainConfig& cfg) {
  RngStream rng(cfg.seed);
  return train_denoising(model, train, cfg, rng);
}

namespace {

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double read_hex(std::istream& is) {
  std::string tok;
  if (!(is >> tok)) throw DataError("model file: truncated");
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') throw DataError("model file: bad number '" + tok + "'");
  return v;
}

void expect(std::istream& is, const std::string& word) {
  std::string tok;
  if (!(is >> tok) || tok != word) throw DataError("model file: expected '" + word + "', found '" + tok + "'");
}

}  // namespace

void save_model(std::ostream& os, const Model& model, const ModelSchema* schema) {
  os << "mcdimpute-model " << kModelFormatVersion << '\n';
  if (const auto* ae = std::get_if<AEModel>(&model)) {
    os << "kind ae\nkl_weight " << hex(0.0) << '\n';
    nn::write_network(os, ae->encoder);
    nn::write_network(os, ae->decoder);
  } else {
    const auto& vae = std::get<VAEModel>(model);
    os << "kind vae\nkl_weight " << hex(vae.kl_weight) << '\n';
    nn::write_network(os, vae.trunk);
    nn::write_layer(os, vae.mu_head);
    nn::write_layer(os, vae.logvar_head);
    nn::write_network(os, vae.decoder);
  }
  if (schema) {
    const auto d = schema->attribute_names.size();
    os << "schema " << d << '\n' << schema->class_name << '\n';
    for (const auto& name : schema->attribute_names) os << name << '\n';
    os << "min";
    for (Eigen::Index j = 0; j < schema->norm.min.size(); ++j) os << ' ' << hex(schema->norm.min[j]);
    os << "\nmax";
    for (Eigen::Index j = 0; j < schema->norm.max.size(); ++j) os << ' ' << hex(schema->norm.max[j]);
    os << '\n';
  }
  os << "end\n";
}

std::pair<Model, std::optional<ModelSchema>> load_model(std::istream& is) {
  expect(is, "mcdimpute-model");
  int version = 0;
  if (!(is >> version) || version != kModelFormatVersion)
    throw DataError("model file: unsupported format version " + std::to_string(version));
  expect(is, "kind");
  std::string kind;
  is >> kind;
  expect(is, "kl_weight");
  const double kl_weight = read_hex(is);
  Model model;
  if (kind == "ae") {
    AEModel ae;
    ae.encoder = nn::read_network(is);
    ae.decoder = nn::read_network(is);
    model = std::move(ae);
  } else if (kind == "vae") {
    VAEModel vae;
    vae.kl_weight = kl_weight;
    vae.trunk = nn::read_network(is);
    vae.mu_head = nn::read_layer(is);
    vae.logvar_head = nn::read_layer(is);
    vae.decoder = nn::read_network(is);
    model = std::move(vae);
  } else {
    throw DataError("model file: unknown kind '" + kind + "'");
  }

  std::optional<ModelSchema> schema;
  std::string tok;
  is >> tok;
  if (tok == "schema") {
    std::size_t d = 0;
    if (!(is >> d)) throw DataError("model file: bad schema header");
    ModelSchema s;
    std::getline(is, tok);
    std::getline(is, s.class_name);
    for (std::size_t j = 0; j < d; ++j) {
      std::string name;
      if (!std::getline(is, name)) throw DataError("model file: truncated schema");
      s.attribute_names.push_back(name);
    }
    s.norm.min.resize(static_cast<Eigen::Index>(d));
    s.norm.max.resize(static_cast<Eigen::Index>(d));
    expect(is, "min");
    for (std::size_t j = 0; j < d; ++j) s.norm.min[static_cast<Eigen::Index>(j)] = read_hex(is);
    expect(is, "max");
    for (std::size_t j = 0; j < d; ++j) s.norm.max[static_cast<Eigen::Index>(j)] = read_hex(is);
    schema = std::move(s);
    is >> tok;
  }
  if (tok != "end") throw DataError("model file: missing end marker");
  return {std::move(model), std::move(schema)};
}

}  // namespace mcdi
