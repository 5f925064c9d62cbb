#ifndef MCDIMPUTE_DATAIO_HPP
#define MCDIMPUTE_DATAIO_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mcdimpute/nn.hpp"
#include "mcdimpute/rng.hpp"

namespace mcdi {

using nn::Matrix;
using nn::Vector;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A parsed CSV table. Missing cells are nullopt. The class column is held
/// apart from the numeric attributes; class_position remembers where it sat in
/// the source file so the table can be written back in its original layout.
struct RawTable {
  std::vector<std::string> attribute_names;
  std::vector<std::vector<std::optional<double>>> rows;
  std::vector<std::string> class_labels;
  std::string class_name;
  std::size_t class_position = 0;
  std::string source_id;

  std::size_t n() const { return rows.size(); }
  std::size_t d() const { return attribute_names.size(); }
  std::size_t missing_cell_count() const;
};

/// Per-attribute min/max in original units.
struct NormParams {
  Vector min;
  Vector max;
};

/// Normalized numeric data in [0,1] with categorical class labels.
struct Dataset {
  Matrix values;
  std::vector<int> labels;               // index into class_names
  std::vector<std::string> class_names;  // sorted, unique
  NormParams norm;
  std::vector<std::string> attribute_names;
  std::string class_name = "class";

  Eigen::Index n() const { return values.rows(); }
  Eigen::Index d() const { return values.cols(); }
  std::size_t class_count() const { return class_names.size(); }
};

struct MaskedDataset {
  Dataset base;
  Mask mask;             // true = missing
  Matrix sentinel_view;  // base.values with masked cells set to kSentinel
  double rate = 0;

  Eigen::Index masked_count() const { return mask.count(); }
};

struct FoldSplit {
  int k = 0;
  std::vector<int> fold_assignment;

  std::vector<Eigen::Index> rows_in(int fold) const;
  std::vector<Eigen::Index> rows_not_in(int fold) const;
};

inline constexpr double kSentinel = -1.0;

RawTable parse_csv(std::istream& in, std::string_view class_column, std::string_view missing_marker = "?",
                   std::string source_id = "<stream>");
RawTable load_csv(const std::filesystem::path& path, std::string_view class_column,
                  std::string_view missing_marker = "?");

RawTable complete_cases(const RawTable& raw);

Dataset normalize(const RawTable& raw);

Matrix denormalize(const NormParams& norm, const Matrix& values);
inline Matrix denormalize(const Dataset& ds, const Matrix& values) { return denormalize(ds.norm, values); }

/// Applies stored NormParams to new raw values (missing cells become NaN).
Matrix apply_norm(const NormParams& norm, const RawTable& raw);

/// round(rate * cells) with halves rounded up.
std::size_t mcar_count(std::size_t cells, double rate);

/// Uniformly chosen, without replacement, exactly mcar_count(rows*cols, rate)
/// cells.
Mask sample_mcar_mask(Eigen::Index rows, Eigen::Index cols, double rate, RngStream& rng);

MaskedDataset mask_mcar(const Dataset& ds, double rate, RngStream& rng);

/// MaskedDataset from an explicit mask.
MaskedDataset with_mask(const Dataset& ds, Mask mask);

Dataset subset(const Dataset& ds, std::span<const Eigen::Index> rows);

std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, RngStream& rng);

FoldSplit kfold(Eigen::Index n, int k, RngStream& rng);
inline FoldSplit kfold(const Dataset& ds, int k, RngStream& rng) { return kfold(ds.n(), k, rng); }

/// Two-class Gaussian-mixture stand-in for the 11-attribute milk study data.
Dataset synth_milk(std::size_t n, std::uint64_t seed);

/// Shortest decimal text that parses back to the same double.
std::string format_number(double v);

/// Header of attribute names plus the class column; values in original units
/// unless `normalized` is set.
void write_csv(std::ostream& os, const Dataset& ds, bool normalized = false);

}  // namespace mcdi

#endif  // MCDIMPUTE_DATAIO_HPP
