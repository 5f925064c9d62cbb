#ifndef MCDIMPUTE_TESTS_SUPPORT_HPP
#define MCDIMPUTE_TESTS_SUPPORT_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "mcdimpute/nn.hpp"

namespace testsupport {

inline std::string data_file(const std::string& name) { return std::string(MCDI_DATA_DIR) + "/" + name; }

/// Relative error with a floor so entries that are both ~0 compare absolutely.
inline double rel_error(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-6});
  return std::abs(a - b) / scale;
}

/// Central differences over every weight and bias of `layers`. `loss` must
/// replay identical randomness on each call.
inline double max_fd_error(std::vector<mcdi::nn::DenseLayer<double>*> layers,
                           const mcdi::nn::Gradients<double>& analytic, const std::function<double()>& loss,
                           double h = 1e-5) {
  double worst = 0;
  auto probe = [&](double& p, double g) {
    const double keep = p;
    p = keep + h;
    const double up = loss();
    p = keep - h;
    const double down = loss();
    p = keep;
    worst = std::max(worst, rel_error(g, (up - down) / (2 * h)));
  };
  for (std::size_t k = 0; k < layers.size(); ++k) {
    auto& l = *layers[k];
    for (Eigen::Index i = 0; i < l.weights.size(); ++i) probe(l.weights.data()[i], analytic[k].weights.data()[i]);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) probe(l.bias[i], analytic[k].bias[i]);
  }
  return worst;
}

/// Random [0,1] matrix shaped like a dataset, from a fixed stream.
inline mcdi::nn::Matrix random_unit(Eigen::Index n, Eigen::Index d, mcdi::RngStream& rng) {
  mcdi::nn::Matrix m(n, d);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform();
  return m;
}

}  // namespace testsupport

#endif
