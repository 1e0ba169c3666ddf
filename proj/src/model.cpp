#include "fmfm/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fmfm/binary_io.hpp"
#include "fmfm/error.hpp"
#include "kernels.hpp"

namespace fmfm {

namespace {

constexpr std::string_view kModelKind = "fmfm-model";
constexpr std::string_view kModelVersion = "v1";

template <typename E>
E enum_from_byte(std::uint8_t b, E last, std::string_view what) {
  if (b > static_cast<std::uint8_t>(last)) {
    throw Error(ErrorCode::kBadFormat, "bad " + std::string(what) + " tag in model file");
  }
  return static_cast<E>(b);
}

void check_dim(std::size_t got, std::size_t want, std::string_view what) {
  if (got != want) {
    throw Error(ErrorCode::kDimensionMismatch, std::string(what) + ": dimension " +
                                                   std::to_string(got) + ", expected " +
                                                   std::to_string(want));
  }
}

}  // namespace

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kLR: return "lr";
    case Variant::kFM: return "fm";
    case Variant::kFwFM: return "fwfm";
    case Variant::kFvFM: return "fvfm";
    case Variant::kFmFM: return "fmfm";
    case Variant::kFFM: return "ffm";
  }
  return "?";
}

std::string_view to_string(MatrixKind k) {
  switch (k) {
    case MatrixKind::kIdentity: return "identity";
    case MatrixKind::kScalar: return "scalar";
    case MatrixKind::kDiagonal: return "diagonal";
    case MatrixKind::kFull: return "full";
  }
  return "?";
}

std::string_view to_string(LinearMode m) {
  return m == LinearMode::kPerFeature ? "per-feature" : "field-shared";
}

Variant parse_variant(std::string_view name) {
  for (auto v : {Variant::kLR, Variant::kFM, Variant::kFwFM, Variant::kFvFM, Variant::kFmFM,
                 Variant::kFFM}) {
    if (to_string(v) == name) return v;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown variant '" + std::string(name) + "'");
}

MatrixKind parse_matrix_kind(std::string_view name) {
  for (auto k : {MatrixKind::kIdentity, MatrixKind::kScalar, MatrixKind::kDiagonal,
                 MatrixKind::kFull}) {
    if (to_string(k) == name) return k;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown matrix kind '" + std::string(name) + "'");
}

LinearMode parse_linear_mode(std::string_view name) {
  if (name == "per-feature") return LinearMode::kPerFeature;
  if (name == "field-shared") return LinearMode::kFieldShared;
  throw Error(ErrorCode::kInvalidArgument, "unknown linear mode '" + std::string(name) + "'");
}

MatrixKind default_kind(Variant v) {
  switch (v) {
    case Variant::kFwFM: return MatrixKind::kScalar;
    case Variant::kFvFM: return MatrixKind::kDiagonal;
    case Variant::kFmFM: return MatrixKind::kFull;
    default: return MatrixKind::kIdentity;
  }
}

LinearMode default_linear_mode(Variant v) {
  switch (v) {
    case Variant::kFwFM:
    case Variant::kFvFM:
    case Variant::kFmFM: return LinearMode::kFieldShared;
    default: return LinearMode::kPerFeature;
  }
}

int degrees_of_freedom(MatrixKind k) { return static_cast<int>(k); }

bool uses_pair_matrices(Variant v) { return v != Variant::kLR && v != Variant::kFFM; }

FieldPairMatrix::FieldPairMatrix(std::uint32_t k, std::uint32_t l, MatrixKind kind,
                                 std::uint32_t rows, std::uint32_t cols)
    : k(k), l(l), kind(kind), rows(rows), cols(cols), payload(payload_size(kind, rows, cols)) {
  if (kind != MatrixKind::kFull && rows != cols) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::string(to_string(kind)) + " matrix needs equal field dimensions");
  }
  if (kind == MatrixKind::kScalar) payload[0] = 1.0;
  if (kind == MatrixKind::kDiagonal) std::fill(payload.begin(), payload.end(), 1.0);
}

std::size_t FieldPairMatrix::payload_size(MatrixKind kind, std::uint32_t rows, std::uint32_t cols) {
  switch (kind) {
    case MatrixKind::kIdentity: return 0;
    case MatrixKind::kScalar: return 1;
    case MatrixKind::kDiagonal: return rows;
    case MatrixKind::kFull: return std::size_t{rows} * cols;
  }
  return 0;
}

void transform(std::span<const double> v, const FieldPairMatrix& pm, Direction dir,
               std::span<double> out) {
  const bool fwd = dir == Direction::kForward;
  const std::uint32_t in_dim = fwd ? pm.rows : pm.cols;
  const std::uint32_t out_dim = fwd ? pm.cols : pm.rows;
  check_dim(v.size(), in_dim, "transform input");
  check_dim(out.size(), out_dim, "transform output");
  switch (pm.kind) {
    case MatrixKind::kIdentity:
      std::copy(v.begin(), v.end(), out.begin());
      return;
    case MatrixKind::kScalar:
      for (std::size_t i = 0; i < v.size(); ++i) out[i] = pm.payload[0] * v[i];
      return;
    case MatrixKind::kDiagonal:
      for (std::size_t i = 0; i < v.size(); ++i) out[i] = pm.payload[i] * v[i];
      return;
    case MatrixKind::kFull:
      std::fill(out.begin(), out.end(), 0.0);
      if (fwd) {
        for (std::uint32_t r = 0; r < pm.rows; ++r) {
          const double a = v[r];
          const double* m = pm.payload.data() + std::size_t{r} * pm.cols;
          for (std::uint32_t c = 0; c < pm.cols; ++c) out[c] += a * m[c];
        }
      } else {
        for (std::uint32_t r = 0; r < pm.rows; ++r) {
          const double* m = pm.payload.data() + std::size_t{r} * pm.cols;
          double s = 0.0;
          for (std::uint32_t c = 0; c < pm.cols; ++c) s += m[c] * v[c];
          out[r] = s;
        }
      }
      return;
  }
}

std::vector<double> transform(std::span<const double> v, const FieldPairMatrix& pm, Direction dir) {
  std::vector<double> out(dir == Direction::kForward ? pm.cols : pm.rows);
  transform(v, pm, dir, out);
  return out;
}

double pair_score(std::span<const double> vi, std::span<const double> vj, const FieldPairMatrix& pm) {
  check_dim(vi.size(), pm.rows, "pair_score left vector");
  check_dim(vj.size(), pm.cols, "pair_score right vector");
  switch (pm.kind) {
    case MatrixKind::kIdentity: return detail::dot(vi, vj);
    case MatrixKind::kScalar: return pm.payload[0] * detail::dot(vi, vj);
    case MatrixKind::kDiagonal: {
      double s = 0.0;
      for (std::size_t i = 0; i < vi.size(); ++i) s += vi[i] * pm.payload[i] * vj[i];
      return s;
    }
    case MatrixKind::kFull: {
      double s = 0.0;
      for (std::uint32_t r = 0; r < pm.rows; ++r) {
        const double* m = pm.payload.data() + std::size_t{r} * pm.cols;
        double row = 0.0;
        for (std::uint32_t c = 0; c < pm.cols; ++c) row += m[c] * vj[c];
        s += vi[r] * row;
      }
      return s;
    }
  }
  return 0.0;
}

ModelShape ModelShape::make(Variant v, std::vector<std::uint32_t> feature_counts,
                            std::vector<std::uint32_t> dims, std::uint64_t schema_hash) {
  ModelShape s;
  s.variant = v;
  s.kind = default_kind(v);
  s.linear = default_linear_mode(v);
  s.feature_counts = std::move(feature_counts);
  s.dims = std::move(dims);
  if (v == Variant::kLR) std::fill(s.dims.begin(), s.dims.end(), 0u);
  s.schema_hash = schema_hash;
  return s;
}

void ModelShape::validate() const {
  const auto n = feature_counts.size();
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "model needs at least one field");
  if (dims.size() != n) {
    throw Error(ErrorCode::kInvalidArgument, "dims has " + std::to_string(dims.size()) +
                                                 " entries, expected " + std::to_string(n));
  }
  for (auto c : feature_counts) {
    if (c == 0) throw Error(ErrorCode::kInvalidArgument, "every field needs at least one feature");
  }
  if (variant == Variant::kLR) {
    if (std::any_of(dims.begin(), dims.end(), [](auto d) { return d != 0; })) {
      throw Error(ErrorCode::kInvalidArgument, "LR has no embeddings; dims must be zero");
    }
    if (linear != LinearMode::kPerFeature) {
      throw Error(ErrorCode::kInvalidArgument, "LR needs per-feature linear terms");
    }
    return;
  }
  for (auto d : dims) {
    if (d == 0) throw Error(ErrorCode::kInvalidArgument, "embedding dimensions must be positive");
  }
  const bool uniform = std::all_of(dims.begin(), dims.end(), [&](auto d) { return d == dims[0]; });
  if (variant == Variant::kFFM) {
    if (!uniform) throw Error(ErrorCode::kInvalidArgument, "FFM needs a uniform dimension");
    return;
  }
  if (kind != MatrixKind::kFull && !uniform) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(to_string(kind)) + " matrices need a uniform dimension; only full "
                                               "matrices allow per-field dimensions");
  }
}

FmModel::FmModel(ModelShape shape) : shape_(std::move(shape)) {
  shape_.validate();
  const auto n = field_count();
  embeddings_.resize(n);
  linear_.resize(n);
  for (std::size_t f = 0; f < n; ++f) {
    const auto rows = shape_.feature_counts[f];
    const auto d = shape_.dims[f];
    if (shape_.variant == Variant::kFFM) {
      embeddings_[f] = Table(rows, static_cast<std::uint32_t>((n - 1) * d));
    } else if (shape_.variant != Variant::kLR) {
      embeddings_[f] = Table(rows, d);
    }
    linear_[f] = shape_.linear == LinearMode::kPerFeature ? Table(rows, 1) : Table(1, d);
  }
  if (uses_pair_matrices(shape_.variant)) {
    pairs_.reserve(n * (n - 1) / 2);
    for (std::uint32_t k = 0; k < n; ++k) {
      for (std::uint32_t l = k + 1; l < n; ++l) {
        pairs_.emplace_back(k, l, shape_.kind, shape_.dims[k], shape_.dims[l]);
        std::fill(pairs_.back().payload.begin(), pairs_.back().payload.end(), 0.0);
      }
    }
  }
}

std::span<double> FmModel::ffm_embedding(std::size_t field, std::uint32_t local,
                                         std::size_t target) {
  const auto d = shape_.dims[field];
  const auto slot = target < field ? target : target - 1;
  return embeddings_[field].row(local).subspan(slot * d, d);
}

std::span<const double> FmModel::ffm_embedding(std::size_t field, std::uint32_t local,
                                               std::size_t target) const {
  const auto d = shape_.dims[field];
  const auto slot = target < field ? target : target - 1;
  return embeddings_[field].row(local).subspan(slot * d, d);
}

std::size_t FmModel::pair_index(std::size_t k, std::size_t l, std::size_t n) {
  if (k > l) std::swap(k, l);
  if (k == l || l >= n) throw Error(ErrorCode::kInvalidArgument, "bad field pair");
  // Pairs are laid out row by row: (0,1)..(0,n-1), (1,2)..
  return k * (2 * n - k - 1) / 2 + (l - k - 1);
}

template <typename Block, typename Self>
std::vector<Block> FmModel::collect_blocks(Self& model) {
  std::vector<Block> out;
  const auto n = static_cast<std::uint32_t>(model.field_count());
  const bool per_feature = model.linear_mode() == LinearMode::kPerFeature;
  for (std::uint32_t f = 0; f < n; ++f) {
    auto& e = model.embeddings(f);
    if (!e.values.empty()) out.push_back({BlockKind::kEmbedding, f, e.width, true, e.values});
    auto& w = model.linear(f);
    out.push_back({BlockKind::kLinear, f, w.width, per_feature, w.values});
  }
  auto& pairs = model.pairs();
  for (std::uint32_t p = 0; p < pairs.size(); ++p) {
    if (pairs[p].payload.empty()) continue;
    out.push_back({BlockKind::kPairMatrix, p, static_cast<std::uint32_t>(pairs[p].payload.size()),
                   false, pairs[p].payload});
  }
  auto& bias = model.bias_;
  out.push_back({BlockKind::kBias, 0, 1, false, std::span(&bias, 1)});
  return out;
}

std::vector<ParamBlock> FmModel::blocks() { return collect_blocks<ParamBlock>(*this); }

std::vector<ConstParamBlock> FmModel::blocks() const {
  return collect_blocks<ConstParamBlock>(*this);
}

std::size_t FmModel::parameter_count(bool include_bias) const {
  std::size_t total = include_bias ? 1 : 0;
  for (const auto& e : embeddings_) total += e.values.size();
  for (const auto& w : linear_) total += w.values.size();
  for (const auto& p : pairs_) total += p.payload.size();
  return total;
}

void FmModel::fill(double value) {
  for (auto& b : blocks()) std::fill(b.values.begin(), b.values.end(), value);
}

std::string FmModel::serialize() const {
  std::ostringstream out(std::ios::binary);
  io::write_magic(out, std::string(kModelKind) + " " + std::string(kModelVersion));
  io::write_pod<std::uint64_t>(out, shape_.schema_hash);
  io::write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(shape_.variant));
  io::write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(shape_.kind));
  io::write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(shape_.linear));
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(field_count()));
  io::write_array<std::uint32_t>(out, shape_.dims);
  io::write_array<std::uint32_t>(out, shape_.feature_counts);
  for (const auto& e : embeddings_) io::write_array<double>(out, e.values);
  for (const auto& p : pairs_) io::write_array<double>(out, p.payload);
  for (const auto& w : linear_) io::write_array<double>(out, w.values);
  io::write_pod<double>(out, bias_);
  return std::move(out).str();
}

FmModel FmModel::read(std::istream& in) {
  io::expect_magic(in, kModelKind, kModelVersion);
  ModelShape shape;
  shape.schema_hash = io::read_pod<std::uint64_t>(in);
  shape.variant = enum_from_byte(io::read_pod<std::uint8_t>(in), Variant::kFFM, "variant");
  shape.kind = enum_from_byte(io::read_pod<std::uint8_t>(in), MatrixKind::kFull, "matrix kind");
  shape.linear =
      enum_from_byte(io::read_pod<std::uint8_t>(in), LinearMode::kFieldShared, "linear mode");
  const auto n = io::read_pod<std::uint32_t>(in);
  if (n == 0 || n > 1u << 16) throw Error(ErrorCode::kBadFormat, "bad field count in model file");
  shape.dims.resize(n);
  shape.feature_counts.resize(n);
  io::read_array<std::uint32_t>(in, shape.dims);
  io::read_array<std::uint32_t>(in, shape.feature_counts);
  FmModel model(std::move(shape));
  for (auto& e : model.embeddings_) io::read_array<double>(in, e.values);
  for (auto& p : model.pairs_) io::read_array<double>(in, p.payload);
  for (auto& w : model.linear_) io::read_array<double>(in, w.values);
  model.bias_ = io::read_pod<double>(in);
  return model;
}

FmModel FmModel::parse(std::string_view bytes) {
  std::istringstream in{std::string(bytes), std::ios::binary};
  auto model = read(in);
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorCode::kBadFormat, "trailing bytes after model payload");
  }
  return model;
}

void FmModel::save(const std::string& path) const { io::write_file(path, serialize()); }

FmModel FmModel::load(const std::string& path) { return parse(io::read_file(path)); }

std::uint64_t FmModel::hash() const { return io::fnv1a(serialize()); }

void check_instance(const FmModel& model, Instance inst) {
  const auto& counts = model.shape().feature_counts;
  if (inst.features.size() != counts.size()) {
    throw Error(ErrorCode::kSchemaMismatch, "instance has " + std::to_string(inst.features.size()) +
                                                " features, model has " +
                                                std::to_string(counts.size()) + " fields");
  }
  for (std::size_t f = 0; f < counts.size(); ++f) {
    if (inst.features[f] >= counts[f]) {
      throw Error(ErrorCode::kSchemaMismatch, "feature index " + std::to_string(inst.features[f]) +
                                                  " outside field " + std::to_string(f));
    }
  }
}

double score(const FmModel& model, Instance inst) {
  check_instance(model, inst);
  return detail::logit(model, inst);
}

double sigmoid(double logit) {
  const double z = std::clamp(logit, -kLogitClamp, kLogitClamp);
  return 1.0 / (1.0 + std::exp(-z));
}

double predict_proba(const FmModel& model, Instance inst) { return sigmoid(score(model, inst)); }

namespace detail {

double logit(const FmModel& model, Instance inst) {
  const auto n = model.field_count();
  const auto& x = inst.features;
  double total = model.bias();

  for (std::size_t f = 0; f < n; ++f) {
    const auto& w = model.linear(f);
    if (model.linear_mode() == LinearMode::kPerFeature) total += w.values[x[f]];
    else total += dot(model.embedding(f, x[f]), w.values);
  }

  if (model.variant() == Variant::kFFM) {
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t l = k + 1; l < n; ++l) {
        total += dot(model.ffm_embedding(k, x[k], l), model.ffm_embedding(l, x[l], k));
      }
    }
  } else if (model.variant() != Variant::kLR) {
    for (const auto& pm : model.pairs()) {
      total += pair_score(model.embedding(pm.k, x[pm.k]), model.embedding(pm.l, x[pm.l]), pm);
    }
  }
  return total;
}

void accumulate_gradient(const FmModel& model, Instance inst, double g, FmModel& grad) {
  const auto n = model.field_count();
  const auto& x = inst.features;
  grad.bias() += g;

  for (std::size_t f = 0; f < n; ++f) {
    if (model.linear_mode() == LinearMode::kPerFeature) {
      grad.linear(f).values[x[f]] += g;
    } else {
      const auto v = model.embedding(f, x[f]);
      const auto& w = model.linear(f).values;
      auto gv = grad.embedding(f, x[f]);
      auto& gw = grad.linear(f).values;
      for (std::size_t i = 0; i < v.size(); ++i) {
        gv[i] += g * w[i];
        gw[i] += g * v[i];
      }
    }
  }

  if (model.variant() == Variant::kLR) return;

  if (model.variant() == Variant::kFFM) {
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t l = k + 1; l < n; ++l) {
        const auto a = model.ffm_embedding(k, x[k], l);
        const auto b = model.ffm_embedding(l, x[l], k);
        auto ga = grad.ffm_embedding(k, x[k], l);
        auto gb = grad.ffm_embedding(l, x[l], k);
        for (std::size_t i = 0; i < a.size(); ++i) {
          ga[i] += g * b[i];
          gb[i] += g * a[i];
        }
      }
    }
    return;
  }

  auto& gpairs = grad.pairs();
  for (std::size_t p = 0; p < model.pairs().size(); ++p) {
    const auto& pm = model.pairs()[p];
    auto& gp = gpairs[p].payload;
    const auto vi = model.embedding(pm.k, x[pm.k]);
    const auto vj = model.embedding(pm.l, x[pm.l]);
    auto gi = grad.embedding(pm.k, x[pm.k]);
    auto gj = grad.embedding(pm.l, x[pm.l]);
    switch (pm.kind) {
      case MatrixKind::kIdentity:
        for (std::size_t i = 0; i < vi.size(); ++i) {
          gi[i] += g * vj[i];
          gj[i] += g * vi[i];
        }
        break;
      case MatrixKind::kScalar: {
        const double r = pm.payload[0];
        double d = 0.0;
        for (std::size_t i = 0; i < vi.size(); ++i) {
          gi[i] += g * r * vj[i];
          gj[i] += g * r * vi[i];
          d += vi[i] * vj[i];
        }
        gp[0] += g * d;
        break;
      }
      case MatrixKind::kDiagonal:
        for (std::size_t i = 0; i < vi.size(); ++i) {
          const double d = pm.payload[i];
          gi[i] += g * d * vj[i];
          gj[i] += g * d * vi[i];
          gp[i] += g * vi[i] * vj[i];
        }
        break;
      case MatrixKind::kFull:
        for (std::uint32_t r = 0; r < pm.rows; ++r) {
          const double* m = pm.payload.data() + std::size_t{r} * pm.cols;
          double* gm = gp.data() + std::size_t{r} * pm.cols;
          const double a = vi[r];
          const double ga = g * a;
          double mv = 0.0;
          for (std::uint32_t c = 0; c < pm.cols; ++c) {
            mv += m[c] * vj[c];
            gj[c] += ga * m[c];
            gm[c] += ga * vj[c];
          }
          gi[r] += g * mv;
        }
        break;
    }
  }
}

}  // namespace detail
}  // namespace fmfm
