#include "fmfm/cache.hpp"

#include <sstream>

#include "fmfm/binary_io.hpp"
#include "fmfm/error.hpp"

namespace fmfm {

namespace {

constexpr std::string_view kCacheKind = "fmfm-cache";
constexpr std::string_view kCacheVersion = "v1";

template <typename Real>
void write_reals(std::ostream& out, const std::vector<Real>& values) {
  io::write_array<Real>(out, values);
}

template <typename Real>
std::vector<Real> read_reals(std::istream& in, std::size_t count) {
  std::vector<Real> values(count);
  io::read_array<Real>(in, values);
  return values;
}

std::uint8_t peek_precision(std::string_view bytes) {
  std::istringstream in{std::string(bytes.substr(0, 64)), std::ios::binary};
  io::expect_magic(in, kCacheKind, kCacheVersion);
  io::read_pod<std::uint64_t>(in);
  io::read_pod<std::uint64_t>(in);
  return io::read_pod<std::uint8_t>(in);
}

}  // namespace

template <typename Real>
CachedModel<Real> CachedModel<Real>::build(const FmModel& model, CacheTieBreak tie) {
  if (!uses_pair_matrices(model.variant())) {
    throw Error(ErrorCode::kInvalidArgument,
                "only FM-family models (fm, fwfm, fvfm, fmfm) can be cached; got " +
                    std::string(to_string(model.variant())));
  }
  CachedModel cm;
  cm.source_hash_ = model.hash();
  cm.schema_hash_ = model.shape().schema_hash;
  cm.feature_counts_ = model.shape().feature_counts;
  cm.dims_ = model.shape().dims;
  cm.bias_ = model.bias();
  const auto n = model.field_count();

  cm.linear_.resize(n);
  cm.embeddings_.resize(n);
  for (std::size_t f = 0; f < n; ++f) {
    const auto rows = cm.feature_counts_[f];
    auto& lin = cm.linear_[f];
    lin.resize(rows);
    for (std::uint32_t i = 0; i < rows; ++i) {
      if (model.linear_mode() == LinearMode::kPerFeature) {
        lin[i] = static_cast<Real>(model.linear(f).values[i]);
      } else {
        const auto v = model.embedding(f, i);
        const auto& w = model.linear(f).values;
        double s = 0.0;
        for (std::size_t d = 0; d < v.size(); ++d) s += v[d] * w[d];
        lin[i] = static_cast<Real>(s);
      }
    }
    const auto& src = model.embeddings(f).values;
    cm.embeddings_[f].assign(src.begin(), src.end());
  }

  std::vector<double> scratch;
  for (const auto& pm : model.pairs()) {
    CachedPair<Real> cp;
    cp.k = pm.k;
    cp.l = pm.l;
    const auto dk = cm.dims_[pm.k];
    const auto dl = cm.dims_[pm.l];
    if (dk != dl) {
      cp.cached_side = dk > dl ? pm.k : pm.l;
    } else if (tie == CacheTieBreak::kMoreFeatures &&
               cm.feature_counts_[pm.l] > cm.feature_counts_[pm.k]) {
      cp.cached_side = pm.l;
    } else {
      cp.cached_side = pm.k;
    }
    const auto other = cp.other_side();
    cp.dim = cm.dims_[other];
    const auto dir = cp.cached_side == pm.k ? Direction::kForward : Direction::kBackward;
    const auto rows = cm.feature_counts_[cp.cached_side];
    cp.vectors.resize(std::size_t{rows} * cp.dim);
    scratch.resize(cp.dim);
    for (std::uint32_t i = 0; i < rows; ++i) {
      transform(model.embedding(cp.cached_side, i), pm, dir, scratch);
      std::copy(scratch.begin(), scratch.end(), cp.vectors.begin() + std::size_t{i} * cp.dim);
    }
    cm.pairs_.push_back(std::move(cp));
  }
  return cm;
}

template <typename Real>
double CachedModel<Real>::score(Instance inst) const {
  const auto n = feature_counts_.size();
  if (inst.features.size() != n) {
    throw Error(ErrorCode::kSchemaMismatch, "instance has " + std::to_string(inst.features.size()) +
                                                " features, cache has " + std::to_string(n) +
                                                " fields");
  }
  const auto& x = inst.features;
  double total = bias_;
  for (std::size_t f = 0; f < n; ++f) {
    if (x[f] >= feature_counts_[f]) {
      throw Error(ErrorCode::kSchemaMismatch, "feature index " + std::to_string(x[f]) +
                                                  " outside field " + std::to_string(f));
    }
    total += linear_[f][x[f]];
  }
  for (const auto& cp : pairs_) {
    const auto other = cp.other_side();
    const Real* a = cp.vectors.data() + std::size_t{x[cp.cached_side]} * cp.dim;
    const Real* b = embeddings_[other].data() + std::size_t{x[other]} * cp.dim;
    double s = 0.0;
    for (std::uint32_t d = 0; d < cp.dim; ++d) s += static_cast<double>(a[d]) * b[d];
    total += s;
  }
  return total;
}

template <typename Real>
std::uint64_t CachedModel<Real>::pair_table_size() const {
  std::uint64_t total = 0;
  for (const auto& cp : pairs_) total += cp.vectors.size();
  return total;
}

template <typename Real>
std::uint64_t CachedModel<Real>::flops_per_instance() const {
  std::uint64_t total = 2 * feature_counts_.size();
  for (const auto& cp : pairs_) total += 2ull * cp.dim + 1;
  return total;
}

template <typename Real>
std::string CachedModel<Real>::serialize() const {
  std::ostringstream out(std::ios::binary);
  io::write_magic(out, std::string(kCacheKind) + " " + std::string(kCacheVersion));
  io::write_pod<std::uint64_t>(out, source_hash_);
  io::write_pod<std::uint64_t>(out, schema_hash_);
  io::write_pod<std::uint8_t>(out, sizeof(Real));
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(feature_counts_.size()));
  io::write_array<std::uint32_t>(out, feature_counts_);
  io::write_array<std::uint32_t>(out, dims_);
  io::write_pod<double>(out, bias_);
  io::write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(pairs_.size()));
  for (const auto& cp : pairs_) {
    for (auto v : {cp.k, cp.l, cp.cached_side, cp.dim}) io::write_pod<std::uint32_t>(out, v);
  }
  for (const auto& lin : linear_) write_reals(out, lin);
  for (const auto& emb : embeddings_) write_reals(out, emb);
  for (const auto& cp : pairs_) write_reals(out, cp.vectors);
  return std::move(out).str();
}

template <typename Real>
CachedModel<Real> CachedModel<Real>::parse(std::string_view bytes) {
  std::istringstream in{std::string(bytes), std::ios::binary};
  io::expect_magic(in, kCacheKind, kCacheVersion);
  CachedModel cm;
  cm.source_hash_ = io::read_pod<std::uint64_t>(in);
  cm.schema_hash_ = io::read_pod<std::uint64_t>(in);
  if (io::read_pod<std::uint8_t>(in) != sizeof(Real)) {
    throw Error(ErrorCode::kBadFormat, "cache precision does not match the requested type");
  }
  const auto n = io::read_pod<std::uint32_t>(in);
  if (n == 0 || n > 1u << 16) throw Error(ErrorCode::kBadFormat, "bad field count in cache file");
  cm.feature_counts_.resize(n);
  cm.dims_.resize(n);
  io::read_array<std::uint32_t>(in, cm.feature_counts_);
  io::read_array<std::uint32_t>(in, cm.dims_);
  cm.bias_ = io::read_pod<double>(in);
  const auto pair_count = io::read_pod<std::uint32_t>(in);
  if (pair_count != std::size_t{n} * (n - 1) / 2) {
    throw Error(ErrorCode::kBadFormat, "cache pair count does not match the field count");
  }
  cm.pairs_.resize(pair_count);
  for (auto& cp : cm.pairs_) {
    cp.k = io::read_pod<std::uint32_t>(in);
    cp.l = io::read_pod<std::uint32_t>(in);
    cp.cached_side = io::read_pod<std::uint32_t>(in);
    cp.dim = io::read_pod<std::uint32_t>(in);
    if (cp.k >= n || cp.l >= n || (cp.cached_side != cp.k && cp.cached_side != cp.l) ||
        cp.dim != cm.dims_[cp.other_side()]) {
      throw Error(ErrorCode::kBadFormat, "inconsistent pair index block in cache file");
    }
  }
  cm.linear_.resize(n);
  cm.embeddings_.resize(n);
  for (std::uint32_t f = 0; f < n; ++f) cm.linear_[f] = read_reals<Real>(in, cm.feature_counts_[f]);
  for (std::uint32_t f = 0; f < n; ++f) {
    cm.embeddings_[f] = read_reals<Real>(in, std::size_t{cm.feature_counts_[f]} * cm.dims_[f]);
  }
  for (auto& cp : cm.pairs_) {
    cp.vectors = read_reals<Real>(in, std::size_t{cm.feature_counts_[cp.cached_side]} * cp.dim);
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorCode::kBadFormat, "trailing bytes after cache payload");
  }
  return cm;
}

template class CachedModel<float>;
template class CachedModel<double>;

AnyCachedModel AnyCachedModel::build(const FmModel& model, CachePrecision precision,
                                     CacheTieBreak tie) {
  if (precision == CachePrecision::k32) return CachedModel32::build(model, tie);
  return CachedModel64::build(model, tie);
}

AnyCachedModel AnyCachedModel::parse(std::string_view bytes) {
  switch (peek_precision(bytes)) {
    case 4: return CachedModel32::parse(bytes);
    case 8: return CachedModel64::parse(bytes);
    default: throw Error(ErrorCode::kBadFormat, "unsupported cache precision");
  }
}

AnyCachedModel AnyCachedModel::load(const std::string& path) { return parse(io::read_file(path)); }

void AnyCachedModel::save(const std::string& path) const {
  io::write_file(path, std::visit([](const auto& m) { return m.serialize(); }, model_));
}

CachePrecision AnyCachedModel::precision() const {
  return model_.index() == 0 ? CachePrecision::k32 : CachePrecision::k64;
}

double AnyCachedModel::score(Instance inst) const {
  return std::visit([&](const auto& m) { return m.score(inst); }, model_);
}

std::vector<double> AnyCachedModel::score_all(const Dataset& data) const {
  std::vector<double> out(data.size());
  std::visit(
      [&](const auto& m) {
        for (std::size_t r = 0; r < data.size(); ++r) out[r] = m.score(data[r]);
      },
      model_);
  return out;
}

std::uint64_t AnyCachedModel::source_model_hash() const {
  return std::visit([](const auto& m) { return m.source_model_hash(); }, model_);
}

std::uint64_t AnyCachedModel::schema_hash() const {
  return std::visit([](const auto& m) { return m.schema_hash(); }, model_);
}

std::uint64_t AnyCachedModel::flops_per_instance() const {
  return std::visit([](const auto& m) { return m.flops_per_instance(); }, model_);
}

std::uint64_t AnyCachedModel::pair_table_size() const {
  return std::visit([](const auto& m) { return m.pair_table_size(); }, model_);
}

}  // namespace fmfm
