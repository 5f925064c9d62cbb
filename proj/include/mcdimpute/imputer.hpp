#ifndef MCDIMPUTE_IMPUTER_HPP
#define MCDIMPUTE_IMPUTER_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include "mcdimpute/dataio.hpp"
#include "mcdimpute/models.hpp"

namespace mcdi {

struct ImputeConfig {
  enum class Mode { deterministic, mcd };
  Mode mode = Mode::mcd;
  int samples = 100;  // T, Monte Carlo decoder passes
  std::uint64_t seed = 0;
  /// VAE only: draw eps ~ N(0, I) per pass. When false eps is 0 and the
  /// latent code is mu.
  bool sample_latent = true;
};

struct ImputationResult {
  Matrix imputed;                                    // N x d
  Mask mask;                                         // true = was missing
  std::vector<std::pair<Eigen::Index, Eigen::Index>> cells;  // missing cells, row-major order
  Matrix samples;                                    // T x cells.size(), mcd mode only
  Vector cell_std;                                   // per missing cell, mcd mode only
};

/// One forward pass with dropout off everywhere (VAE uses z = mu). Observed
/// cells are copied from the input.
ImputationResult impute_deterministic(const Model& model, const MaskedDataset& md);

/// Encoder runs once without dropout; the decoder runs cfg.samples times with
/// dropout active. Pass t draws from a stream derived from (cfg.seed, t), so
/// the result does not depend on evaluation order.
ImputationResult impute_mcd(const Model& model, const MaskedDataset& md, const ImputeConfig& cfg);

/// Dispatches on kind and returns a complete dataset with the original labels
/// and normalization.
Dataset impute_dataset(ModelKind kind, const Model& model, const MaskedDataset& md, const ImputeConfig& cfg);
ImputationResult impute(ModelKind kind, const Model& model, const MaskedDataset& md, const ImputeConfig& cfg);

}  // namespace mcdi

#endif  // MCDIMPUTE_IMPUTER_HPP
