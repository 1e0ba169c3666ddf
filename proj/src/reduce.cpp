#include "fmfm/reduce.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fmfm/binary_io.hpp"
#include "fmfm/error.hpp"

namespace fmfm {

namespace {
constexpr std::string_view kDimsKind = "fmfm-dims";
constexpr std::string_view kDimsVersion = "v1";
// Relative slack when comparing cumulative variance against the fraction, so
// that fraction = 1 ignores round-off sized eigenvalues.
constexpr double kVarianceSlack = 1e-12;
}  // namespace

double DimsPlan::mean_dim() const {
  if (dims.empty()) return 0.0;
  return std::accumulate(dims.begin(), dims.end(), 0.0) / static_cast<double>(dims.size());
}

std::string DimsPlan::serialize() const {
  std::ostringstream out;
  out.precision(17);
  out << kDimsKind << ' ' << kDimsVersion << ' ' << variance_fraction << '\n';
  if (!source_model_hash.empty()) out << "#source-model\t" << source_model_hash << '\n';
  for (std::size_t f = 0; f < dims.size(); ++f) out << f << '\t' << dims[f] << '\n';
  return std::move(out).str();
}

DimsPlan DimsPlan::parse(std::istream& in) {
  DimsPlan plan;
  const auto rest = io::expect_magic(in, kDimsKind, kDimsVersion);
  try {
    plan.variance_fraction = std::stod(rest);
  } catch (const std::exception&) {
    throw Error(ErrorCode::kBadFormat, "dims header needs a variance fraction");
  }
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.front() == '#') {
      constexpr std::string_view tag = "#source-model\t";
      if (line.starts_with(tag)) plan.source_model_hash = line.substr(tag.size());
      continue;
    }
    std::istringstream fields(line);
    std::size_t f = 0;
    long long d = 0;
    if (!(fields >> f >> d) || f != plan.dims.size() || d < 1) {
      throw Error(ErrorCode::kBadFormat, "bad dims line '" + line + "'");
    }
    plan.dims.push_back(static_cast<std::uint32_t>(d));
  }
  if (plan.dims.empty()) throw Error(ErrorCode::kBadFormat, "dims file lists no fields");
  return plan;
}

DimsPlan DimsPlan::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  return parse(in);
}

void DimsPlan::save(const std::string& path) const { io::write_file(path, serialize()); }

FieldPca field_pca(const Table& rows, std::span<const double> weights) {
  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const auto n = rows.rows;
  const auto d = rows.width;
  FieldPca out;
  out.dim = d;
  if (d == 0) return out;
  if (!weights.empty() && weights.size() != n) {
    throw Error(ErrorCode::kDimensionMismatch, "PCA weights do not match the table rows");
  }
  Eigen::Map<const RowMatrix> x(rows.values.data(), n, d);
  const Eigen::VectorXd w = weights.empty() ? Eigen::VectorXd::Ones(n)
                                            : Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(
                                                  weights.data(), n));
  const double total = w.sum();
  RowMatrix cov = RowMatrix::Zero(d, d);
  if (n >= 2 && total > 0.0) {
    const Eigen::RowVectorXd mean = (w.transpose() * x) / total;
    const Eigen::MatrixXd centered = x.rowwise() - mean;
    cov = centered.transpose() * w.asDiagonal() * centered / total;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::kInvalidArgument, "eigen-decomposition did not converge");
  }
  // Eigen sorts ascending; reverse the pairs. stable_sort keeps the solver's
  // order among equal eigenvalues.
  std::vector<std::uint32_t> order(d);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    return solver.eigenvalues()[a] > solver.eigenvalues()[b];
  });
  out.covariance.assign(cov.data(), cov.data() + std::size_t{d} * d);
  out.eigenvalues.resize(d);
  out.eigenvectors.resize(std::size_t{d} * d);
  for (std::uint32_t i = 0; i < d; ++i) {
    out.eigenvalues[i] = std::max(solver.eigenvalues()[order[i]], 0.0);
    for (std::uint32_t r = 0; r < d; ++r) {
      out.eigenvectors[std::size_t{r} * d + i] = solver.eigenvectors()(r, order[i]);
    }
  }
  return out;
}

std::uint32_t retained_dimension(std::span<const double> eigenvalues, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "variance fraction must lie in (0, 1]");
  }
  const double total = std::accumulate(eigenvalues.begin(), eigenvalues.end(), 0.0);
  if (eigenvalues.empty() || total <= 0.0) return 1;
  double kept = 0.0;
  for (std::size_t i = 0; i < eigenvalues.size(); ++i) {
    kept += eigenvalues[i];
    if (kept >= (fraction - kVarianceSlack) * total) return static_cast<std::uint32_t>(i + 1);
  }
  return static_cast<std::uint32_t>(eigenvalues.size());
}

DimsPlan pca_field_dims(const FmModel& model, double fraction, const PcaOptions& options) {
  if (!uses_pair_matrices(model.variant())) {
    throw Error(ErrorCode::kInvalidArgument, "PCA dimension search needs an FM-family model");
  }
  const auto& dims = model.shape().dims;
  if (!std::all_of(dims.begin(), dims.end(), [&](auto d) { return d == dims[0]; })) {
    throw Error(ErrorCode::kInvalidArgument, "first-pass model must use a uniform dimension");
  }
  if (!options.weights.empty() && options.weights.size() != model.field_count()) {
    throw Error(ErrorCode::kDimensionMismatch, "PCA weights do not match the field count");
  }
  DimsPlan plan;
  plan.variance_fraction = fraction;
  plan.source_model_hash = io::hex64(model.hash());
  for (std::size_t f = 0; f < model.field_count(); ++f) {
    const std::span<const double> w =
        options.weights.empty() ? std::span<const double>{} : options.weights[f];
    const auto spectrum = covariance_spectrum(model.embeddings(f), w);
    plan.dims.push_back(retained_dimension(spectrum, fraction));
  }
  return plan;
}

std::vector<std::vector<double>> feature_frequencies(const Dataset& data,
                                                     std::span<const std::uint32_t> feature_counts) {
  data.validate(feature_counts);
  std::vector<std::vector<double>> freq(feature_counts.size());
  for (std::size_t f = 0; f < feature_counts.size(); ++f) freq[f].assign(feature_counts[f], 0.0);
  for (std::size_t r = 0; r < data.size(); ++r) {
    const auto inst = data[r];
    for (std::size_t f = 0; f < inst.features.size(); ++f) freq[f][inst.features[f]] += 1.0;
  }
  return freq;
}

TrainResult second_pass(std::span<const std::uint32_t> feature_counts, std::uint64_t schema_hash,
                        const DimsPlan& plan, const DatasetSplit& split, const TrainConfig& config) {
  if (plan.dims.size() != feature_counts.size()) {
    throw Error(ErrorCode::kSchemaMismatch, "dims plan has " + std::to_string(plan.dims.size()) +
                                                " fields, schema has " +
                                                std::to_string(feature_counts.size()));
  }
  auto shape = ModelShape::make(Variant::kFmFM, {feature_counts.begin(), feature_counts.end()},
                                plan.dims, schema_hash);
  return fit(init_model(shape, config), split, config);
}

}  // namespace fmfm
