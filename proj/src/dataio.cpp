#include "mcdimpute/dataio.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include "mcdimpute/errors.hpp"

namespace mcdi {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::optional<double> parse_double(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

std::size_t resolve_class_column(const std::vector<std::string_view>& header, std::string_view class_column) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == class_column) return i;
  std::size_t index = 0;
  const auto [ptr, ec] = std::from_chars(class_column.data(), class_column.data() + class_column.size(), index);
  if (ec == std::errc() && ptr == class_column.data() + class_column.size() && index < header.size()) return index;
  throw DataError("class column '" + std::string(class_column) + "' not found");
}

}  // namespace

std::size_t RawTable::missing_cell_count() const {
  std::size_t n = 0;
  for (const auto& row : rows)
    for (const auto& c : row) n += !c.has_value();
  return n;
}

RawTable parse_csv(std::istream& in, std::string_view class_column, std::string_view missing_marker,
                   std::string source_id) {
  RawTable t;
  t.source_id = std::move(source_id);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string_view> header;
  std::string header_line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header_line = line;
      break;
    }
  }
  if (header_line.empty()) throw DataError(t.source_id + ": no data rows");
  header = split_fields(header_line);
  const std::size_t cls = resolve_class_column(header, class_column);
  t.class_position = cls;
  t.class_name = std::string(header[cls]);
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!seen.insert(std::string(header[i])).second)
      throw DataError(t.source_id + ": duplicate column name '" + std::string(header[i]) + "'");
    if (i != cls) t.attribute_names.emplace_back(header[i]);
  }

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size())
      throw DataError(t.source_id + ":" + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                      " fields, found " + std::to_string(fields.size()));
    std::vector<std::optional<double>> row;
    row.reserve(header.size() - 1);
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i == cls) {
        if (fields[i].empty() || fields[i] == missing_marker)
          throw DataError(t.source_id + ":" + std::to_string(line_no) + ": missing class label");
        t.class_labels.emplace_back(fields[i]);
        continue;
      }
      if (fields[i] == missing_marker) {
        row.emplace_back(std::nullopt);
        continue;
      }
      const auto v = parse_double(fields[i]);
      if (!v || !std::isfinite(*v))
        throw DataError(t.source_id + ":" + std::to_string(line_no) + ": non-numeric value '" +
                        std::string(fields[i]) + "' in column '" + std::string(header[i]) + "'");
      row.emplace_back(*v);
    }
    t.rows.push_back(std::move(row));
  }
  if (t.rows.empty()) throw DataError(t.source_id + ": no data rows");
  return t;
}

RawTable load_csv(const std::filesystem::path& path, std::string_view class_column, std::string_view missing_marker) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return parse_csv(in, class_column, missing_marker, path.string());
}

RawTable complete_cases(const RawTable& raw) {
  RawTable out = raw;
  out.rows.clear();
  out.class_labels.clear();
  for (std::size_t i = 0; i < raw.rows.size(); ++i) {
    const auto& row = raw.rows[i];
    if (std::all_of(row.begin(), row.end(), [](const auto& c) { return c.has_value(); })) {
      out.rows.push_back(row);
      out.class_labels.push_back(raw.class_labels[i]);
    }
  }
  if (out.rows.empty()) throw DataError(raw.source_id + ": no complete cases");
  return out;
}

Dataset normalize(const RawTable& raw) {
  const auto n = static_cast<Eigen::Index>(raw.n());
  const auto d = static_cast<Eigen::Index>(raw.d());
  if (n == 0 || d == 0) throw DataError("normalize: empty table");
  Matrix x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) {
      const auto& c = raw.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      if (!c) throw DataError("normalize: table has missing cells");
      x(i, j) = *c;
    }

  Dataset ds;
  ds.attribute_names = raw.attribute_names;
  ds.class_name = raw.class_name;
  ds.norm.min = x.colwise().minCoeff().transpose();
  ds.norm.max = x.colwise().maxCoeff().transpose();
  ds.values.resize(n, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double lo = ds.norm.min[j], range = ds.norm.max[j] - ds.norm.min[j];
    if (range > 0)
      ds.values.col(j) = ((x.col(j).array() - lo) / range).matrix();
    else
      ds.values.col(j).setZero();
  }

  const std::set<std::string> names(raw.class_labels.begin(), raw.class_labels.end());
  ds.class_names.assign(names.begin(), names.end());
  ds.labels.reserve(raw.class_labels.size());
  for (const auto& label : raw.class_labels)
    ds.labels.push_back(static_cast<int>(std::lower_bound(ds.class_names.begin(), ds.class_names.end(), label) -
                                         ds.class_names.begin()));
  return ds;
}

Matrix denormalize(const NormParams& norm, const Matrix& values) {
  if (values.cols() != norm.min.size())
    throw std::invalid_argument("denormalize: expected " + std::to_string(norm.min.size()) + " columns, got " +
                                std::to_string(values.cols()));
  Matrix out(values.rows(), values.cols());
  for (Eigen::Index j = 0; j < values.cols(); ++j) {
    const double range = norm.max[j] - norm.min[j];
    if (range > 0)
      out.col(j) = (values.col(j).array() * range + norm.min[j]).matrix();
    else
      out.col(j).setConstant(norm.min[j]);
  }
  return out;
}

Matrix apply_norm(const NormParams& norm, const RawTable& raw) {
  const auto n = static_cast<Eigen::Index>(raw.n());
  const auto d = static_cast<Eigen::Index>(raw.d());
  if (d != norm.min.size())
    throw DataError("input has " + std::to_string(d) + " attributes, model expects " + std::to_string(norm.min.size()));
  Matrix out(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) {
      const auto& c = raw.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      const double range = norm.max[j] - norm.min[j];
      if (!c)
        out(i, j) = std::numeric_limits<double>::quiet_NaN();
      else
        out(i, j) = range > 0 ? (*c - norm.min[j]) / range : 0.0;
    }
  return out;
}

std::size_t mcar_count(std::size_t cells, double rate) {
  return static_cast<std::size_t>(std::floor(rate * static_cast<double>(cells) + 0.5));
}

Mask sample_mcar_mask(Eigen::Index rows, Eigen::Index cols, double rate, RngStream& rng) {
  if (!(rate >= 0 && rate <= 1)) throw std::invalid_argument("mask_mcar: rate must be in [0,1]");
  const auto cells = static_cast<std::size_t>(rows * cols);
  const std::size_t m = std::min(cells, mcar_count(cells, rate));
  Mask mask = Mask::Constant(rows, cols, false);
  std::vector<std::size_t> idx(cells);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Partial Fisher-Yates: the first m entries are a uniform m-subset.
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(cells - i));
    std::swap(idx[i], idx[j]);
    mask.data()[idx[i]] = true;
  }
  return mask;
}

MaskedDataset with_mask(const Dataset& ds, Mask mask) {
  if (mask.rows() != ds.n() || mask.cols() != ds.d()) throw std::invalid_argument("with_mask: shape mismatch");
  MaskedDataset md;
  md.base = ds;
  md.sentinel_view = mask.select(Matrix::Constant(ds.n(), ds.d(), kSentinel), ds.values);
  md.rate = ds.values.size() ? static_cast<double>(mask.count()) / static_cast<double>(ds.values.size()) : 0.0;
  md.mask = std::move(mask);
  return md;
}

MaskedDataset mask_mcar(const Dataset& ds, double rate, RngStream& rng) {
  MaskedDataset md = with_mask(ds, sample_mcar_mask(ds.n(), ds.d(), rate, rng));
  md.rate = rate;
  return md;
}

Dataset subset(const Dataset& ds, std::span<const Eigen::Index> rows) {
  Dataset out;
  out.attribute_names = ds.attribute_names;
  out.class_names = ds.class_names;
  out.class_name = ds.class_name;
  out.norm = ds.norm;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), ds.d());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.values.row(static_cast<Eigen::Index>(i)) = ds.values.row(rows[i]);
    out.labels.push_back(ds.labels[static_cast<std::size_t>(rows[i])]);
  }
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, RngStream& rng) {
  if (!(train_fraction > 0 && train_fraction < 1)) throw std::invalid_argument("split: train_fraction must be in (0,1)");
  const auto n = static_cast<std::size_t>(ds.n());
  const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n) + 0.5));
  if (n_train == 0 || n_train >= n) throw std::invalid_argument("split: a part would be empty");
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::shuffle(order.begin(), order.end(), rng.engine());
  const std::span<const Eigen::Index> all(order);
  return {subset(ds, all.first(n_train)), subset(ds, all.subspan(n_train))};
}

FoldSplit kfold(Eigen::Index n, int k, RngStream& rng) {
  if (k < 2 || k > n) throw std::invalid_argument("kfold: k must satisfy 2 <= k <= N");
  std::vector<std::size_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng.engine());
  FoldSplit f;
  f.k = k;
  f.fold_assignment.resize(order.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) f.fold_assignment[order[pos]] = static_cast<int>(pos % k);
  return f;
}

std::vector<Eigen::Index> FoldSplit::rows_in(int fold) const {
  std::vector<Eigen::Index> out;
  for (std::size_t i = 0; i < fold_assignment.size(); ++i)
    if (fold_assignment[i] == fold) out.push_back(static_cast<Eigen::Index>(i));
  return out;
}

std::vector<Eigen::Index> FoldSplit::rows_not_in(int fold) const {
  std::vector<Eigen::Index> out;
  for (std::size_t i = 0; i < fold_assignment.size(); ++i)
    if (fold_assignment[i] != fold) out.push_back(static_cast<Eigen::Index>(i));
  return out;
}

Dataset synth_milk(std::size_t n, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("synth_milk: n must be >= 2");
  constexpr int d = 11;
  // Typical scale of each attribute, original units.
  static const std::array<const char*, d> names = {
      "milk_quantity", "casein", "fat",     "lactose", "ph",         "protein",
      "urea",          "somatic_cells",     "dry_matter", "density", "freezing_point"};
  const std::array<double, d> mean = {22.0, 2.6, 3.9, 4.7, 6.65, 3.4, 25.0, 250.0, 12.8, 1.031, -0.52};
  const std::array<double, d> sd = {6.0, 0.3, 0.6, 0.25, 0.08, 0.35, 6.0, 120.0, 0.9, 0.002, 0.01};
  // Shift of the second component in units of sd; infection lowers yield and
  // lactose and raises somatic cells and pH.
  const std::array<double, d> shift = {-0.8, 0.2, 0.3, -0.9, 0.7, 0.4, 0.3, 1.6, 0.2, -0.3, 0.3};

  Eigen::MatrixXd corr(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) corr(i, j) = std::pow(0.55, std::abs(i - j));
  // Protein and casein move together, as do fat and dry matter.
  corr(1, 5) = corr(5, 1) = 0.85;
  corr(2, 8) = corr(8, 2) = 0.7;
  const Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(corr).matrixL();

  RngStream rng(seed);
  RawTable raw;
  raw.source_id = "synth-milk";
  raw.class_name = "class";
  raw.class_position = d;
  for (const char* s : names) raw.attribute_names.emplace_back(s);
  Eigen::VectorXd z(d);
  for (std::size_t i = 0; i < n; ++i) {
    const int component = rng.bernoulli(0.5) ? 1 : 0;
    for (int j = 0; j < d; ++j) z[j] = rng.normal();
    const Eigen::VectorXd c = chol * z;
    std::vector<std::optional<double>> row(d);
    for (int j = 0; j < d; ++j) {
      const double v = std::clamp(c[j] + component * shift[static_cast<std::size_t>(j)], -3.5, 3.5);
      row[static_cast<std::size_t>(j)] = mean[static_cast<std::size_t>(j)] + sd[static_cast<std::size_t>(j)] * v;
    }
    raw.rows.push_back(std::move(row));
    raw.class_labels.push_back(component ? "1" : "0");
  }
  return normalize(raw);
}

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw std::runtime_error("format_number failed");
  return std::string(buf, ptr);
}

void write_csv(std::ostream& os, const Dataset& ds, bool normalized) {
  for (const auto& name : ds.attribute_names) os << name << ',';
  os << ds.class_name << '\n';
  const Matrix values = normalized ? ds.values : denormalize(ds, ds.values);
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) os << format_number(values(i, j)) << ',';
    os << ds.class_names[static_cast<std::size_t>(ds.labels[static_cast<std::size_t>(i)])] << '\n';
  }
}

}  // namespace mcdi
