#pragma once

#include <cstdint>
#include <istream>
#include <span>
#include <string>
#include <vector>

#include "fmfm/dataset.hpp"
#include "fmfm/model.hpp"
#include "fmfm/train.hpp"

namespace fmfm {

struct DimsPlan {
  std::vector<std::uint32_t> dims;
  double variance_fraction = 1.0;
  std::string source_model_hash;

  double mean_dim() const;

  // "fmfm-dims v1 <fraction>", optional "#source-model\t<hex>", then one
  // "<field>\t<dim>" line per field.
  std::string serialize() const;
  static DimsPlan parse(std::istream& in);
  static DimsPlan load(const std::string& path);
  void save(const std::string& path) const;
};

struct FieldPca {
  std::uint32_t dim = 0;
  std::vector<double> covariance;    // dim x dim, row-major
  std::vector<double> eigenvalues;   // descending, clamped at zero
  std::vector<double> eigenvectors;  // dim x dim, row-major; column i pairs with eigenvalue i
};

// Centered, optionally weighted covariance of a table's rows and its
// eigen-decomposition. Equal eigenvalues keep the solver's axis order.
FieldPca field_pca(const Table& rows, std::span<const double> weights = {});

inline std::vector<double> covariance_spectrum(const Table& rows,
                                               std::span<const double> weights = {}) {
  return field_pca(rows, weights).eigenvalues;
}

// Smallest D >= 1 whose leading eigenvalues keep `fraction` of the total.
std::uint32_t retained_dimension(std::span<const double> descending_eigenvalues, double fraction);

struct PcaOptions {
  // Per-field, per-feature row weights (e.g. training frequencies). Empty
  // means unweighted.
  std::vector<std::vector<double>> weights;
};

// Per-field PCA over a uniform-dimension model's embedding tables.
DimsPlan pca_field_dims(const FmModel& model, double fraction, const PcaOptions& options = {});

// Feature frequencies in `data`, shaped for PcaOptions::weights.
std::vector<std::vector<double>> feature_frequencies(const Dataset& data,
                                                     std::span<const std::uint32_t> feature_counts);

// Fresh FmFM with the plan's per-field dimensions, trained from scratch.
TrainResult second_pass(std::span<const std::uint32_t> feature_counts, std::uint64_t schema_hash,
                        const DimsPlan& plan, const DatasetSplit& split, const TrainConfig& config);

}  // namespace fmfm
