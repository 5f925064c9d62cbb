#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "mcdimpute/nn.hpp"

namespace mcdi::nn {
namespace {

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_hex(const std::string& tok) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') throw DataError("model file: bad number '" + tok + "'");
  return v;
}

void expect(std::istream& is, const std::string& word) {
  std::string tok;
  if (!(is >> tok) || tok != word)
    throw DataError("model file: expected '" + word + "', found '" + tok + "'");
}

}  // namespace

void write_layer(std::ostream& os, const DenseLayer<double>& layer) {
  os << "layer " << layer.in() << ' ' << layer.out() << ' ' << to_string(layer.activation) << ' '
     << hex(layer.dropout_p) << '\n';
  os << "weights";
  for (Eigen::Index i = 0; i < layer.weights.size(); ++i) os << ' ' << hex(layer.weights.data()[i]);
  os << "\nbias";
  for (Eigen::Index i = 0; i < layer.bias.size(); ++i) os << ' ' << hex(layer.bias[i]);
  os << '\n';
}

DenseLayer<double> read_layer(std::istream& is) {
  expect(is, "layer");
  Eigen::Index in = 0, out = 0;
  std::string act, p;
  if (!(is >> in >> out >> act >> p) || in < 1 || out < 1) throw DataError("model file: bad layer header");
  DenseLayer<double> layer;
  layer.activation = activation_from_string(act);
  layer.dropout_p = parse_hex(p);
  layer.weights.resize(out, in);
  layer.bias.resize(out);
  std::string tok;
  expect(is, "weights");
  for (Eigen::Index i = 0; i < layer.weights.size(); ++i) {
    if (!(is >> tok)) throw DataError("model file: truncated weights");
    layer.weights.data()[i] = parse_hex(tok);
  }
  expect(is, "bias");
  for (Eigen::Index i = 0; i < layer.bias.size(); ++i) {
    if (!(is >> tok)) throw DataError("model file: truncated bias");
    layer.bias[i] = parse_hex(tok);
  }
  return layer;
}

void write_network(std::ostream& os, const Network<double>& net) {
  os << "network " << kNetworkFormatVersion << ' ' << net.size() << '\n';
  for (const auto& l : net) write_layer(os, l);
}

Network<double> read_network(std::istream& is) {
  expect(is, "network");
  int version = 0;
  std::size_t count = 0;
  if (!(is >> version >> count)) throw DataError("model file: bad network header");
  if (version != kNetworkFormatVersion)
    throw DataError("model file: unsupported network format version " + std::to_string(version));
  Network<double> net;
  for (std::size_t i = 0; i < count; ++i) net.push_back(read_layer(is));
  for (std::size_t i = 1; i < net.size(); ++i)
    if (net[i].in() != net[i - 1].out()) throw DataError("model file: inconsistent layer widths");
  return net;
}

}  // namespace mcdi::nn
