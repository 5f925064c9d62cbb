#ifndef MCDIMPUTE_MODELS_HPP
#define MCDIMPUTE_MODELS_HPP

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "mcdimpute/dataio.hpp"
#include "mcdimpute/nn.hpp"

namespace mcdi {

inline constexpr int kHiddenWidth = 80;
inline constexpr int kLatentWidth = 20;

/// Denoising autoencoder d -> 80 -> 20 -> 80 -> d. ReLU hidden layers,
/// sigmoid output, dropout on all three hidden layers.
struct AEModel {
  nn::Network<double> encoder;
  nn::Network<double> decoder;

  Eigen::Index input_width() const { return encoder.front().in(); }
  std::vector<nn::DenseLayer<double>*> parameters();
  double loss_and_gradients(const Matrix& x, const Matrix& target, RngStream& rng, nn::Gradients<double>& grads);
};

/// Variational autoencoder: trunk d -> 80, linear mu/logvar heads 80 -> 20,
/// decoder 20 -> 80 -> d.
struct VAEModel {
  nn::Network<double> trunk;
  nn::DenseLayer<double> mu_head;
  nn::DenseLayer<double> logvar_head;
  nn::Network<double> decoder;
  double kl_weight = 1.0;

  Eigen::Index input_width() const { return trunk.front().in(); }
  std::vector<nn::DenseLayer<double>*> parameters();
  double loss_and_gradients(const Matrix& x, const Matrix& target, RngStream& rng, nn::Gradients<double>& grads);
};

using Model = std::variant<AEModel, VAEModel>;

enum class ModelFamily { ae, vae };
enum class ModelKind { ae, vae, mcd_ae, mcd_vae };

inline constexpr ModelKind kAllModelKinds[] = {ModelKind::ae, ModelKind::vae, ModelKind::mcd_ae, ModelKind::mcd_vae};

std::string_view to_string(ModelKind kind);
/// Upper-case label used in report tables, e.g. "MCD-VAE".
std::string_view display_name(ModelKind kind);
ModelKind parse_model_kind(std::string_view s);
inline ModelFamily family_of(ModelKind k) {
  return (k == ModelKind::ae || k == ModelKind::mcd_ae) ? ModelFamily::ae : ModelFamily::vae;
}
inline bool is_mcd(ModelKind k) { return k == ModelKind::mcd_ae || k == ModelKind::mcd_vae; }

struct TrainConfig {
  int epochs = 300;
  int batch_size = 32;
  double corruption_rate = 0.0;
  nn::AdamConfig adam;
  std::uint64_t seed = 0;
};

AEModel build_ae(Eigen::Index d, double dropout_p, std::uint64_t seed);
VAEModel build_vae(Eigen::Index d, double dropout_p, double kl_weight, std::uint64_t seed);
Model build_model(ModelFamily family, Eigen::Index d, double dropout_p, double kl_weight, std::uint64_t seed);

Eigen::Index parameter_count(const Model& model);

/// z = mu + exp(logvar / 2) * eps, element-wise.
template <typename DMu, typename DLogvar, typename DEps>
auto reparameterize(const Eigen::MatrixBase<DMu>& mu, const Eigen::MatrixBase<DLogvar>& logvar,
                    const Eigen::MatrixBase<DEps>& eps) {
  if (mu.rows() != logvar.rows() || mu.cols() != logvar.cols() || mu.rows() != eps.rows() || mu.cols() != eps.cols())
    throw std::invalid_argument("reparameterize: length mismatch");
  using Plain = typename DMu::PlainObject;
  Plain z = (mu.array() + (logvar.array() * 0.5).exp() * eps.array()).matrix();
  return z;
}

/// KL(N(mu, exp(logvar)) || N(0, I)) summed over every entry.
template <typename DMu, typename DLogvar>
double kl_gauss(const Eigen::MatrixBase<DMu>& mu, const Eigen::MatrixBase<DLogvar>& logvar) {
  if (mu.rows() != logvar.rows() || mu.cols() != logvar.cols()) throw std::invalid_argument("kl_gauss: length mismatch");
  if (!mu.allFinite() || !logvar.allFinite()) throw std::invalid_argument("kl_gauss: non-finite input");
  // exp(lv) - 1 - lv >= 0 always; computing it this way keeps the sum
  // non-negative under rounding.
  const auto lv = logvar.array();
  return 0.5 * (mu.array().square() + (lv.exp() - 1.0 - lv)).sum();
}

struct VaeLoss {
  double total = 0;
  double recon = 0;
  double kl = 0;
};

/// recon + kl_weight * kl / batch_size.
VaeLoss vae_loss(const Matrix& xhat, const Matrix& x, const Matrix& mu, const Matrix& logvar, double kl_weight);

/// Sets `rate` of the batch's cells, chosen uniformly, to the -1 sentinel.
void corrupt_mcar(Matrix& batch, double rate, RngStream& rng);

/// Denoising training: every mini-batch gets a fresh MCAR corruption at
/// cfg.corruption_rate while the target stays clean. Returns per-epoch loss.
std::vector<double> train_denoising(Model& model, const Dataset& train, const TrainConfig& cfg, RngStream& rng);
std::vector<double> train_denoising(Model& model, const Dataset& train, const TrainConfig& cfg);

/// Normalization and column names stored next to a model so new CSV input can
/// be mapped into the model's space.
struct ModelSchema {
  std::vector<std::string> attribute_names;
  std::string class_name;
  NormParams norm;
};

inline constexpr int kModelFormatVersion = 1;

void save_model(std::ostream& os, const Model& model, const ModelSchema* schema = nullptr);
std::pair<Model, std::optional<ModelSchema>> load_model(std::istream& is);

}  // namespace mcdi

#endif  // MCDIMPUTE_MODELS_HPP
