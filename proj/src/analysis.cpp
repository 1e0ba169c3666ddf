#include "fmfm/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>
#include <unordered_map>

#include "fmfm/error.hpp"
#include "kernels.hpp"

namespace fmfm {

namespace {

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

std::uint64_t pair_count(std::uint64_t n) { return n * (n - 1) / 2; }

bool uniform(std::span<const std::uint32_t> dims) {
  return std::all_of(dims.begin(), dims.end(), [&](auto d) { return d == dims[0]; });
}

std::uint64_t linear_flops(std::span<const std::uint32_t> dims, LinearMode linear) {
  if (linear == LinearMode::kPerFeature) return 2 * dims.size();
  std::uint64_t total = 0;
  for (auto d : dims) total += 2ull * d + 1;
  return total;
}

}  // namespace

double auc(std::span<const double> scores, std::span<const std::int8_t> labels) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "auc: scores and labels differ in length");
  }
  const auto ranks = average_ranks(scores);
  double pos_rank_sum = 0.0;
  std::uint64_t pos = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] > 0) {
      pos_rank_sum += ranks[i];
      ++pos;
    }
  }
  const std::uint64_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) {
    throw Error(ErrorCode::kInvalidArgument, "auc needs both positive and negative labels");
  }
  const double p = static_cast<double>(pos);
  return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

double logloss(std::span<const double> probs, std::span<const std::int8_t> labels) {
  if (probs.size() != labels.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "logloss: probs and labels differ in length");
  }
  if (probs.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
    total -= labels[i] > 0 ? std::log(p) : std::log(1.0 - p);
  }
  return total / static_cast<double>(probs.size());
}

std::vector<double> score_all(const FmModel& model, const Dataset& data, unsigned threads) {
  data.validate(model.shape().feature_counts);
  std::vector<double> out(data.size());
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(data.size() / 1024 + 1)));
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) out[r] = detail::logit(model, data[r]);
  };
  if (threads == 1) {
    work(0, data.size());
    return out;
  }
  std::vector<std::jthread> pool;
  const std::size_t chunk = (data.size() + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(data.size(), begin + chunk);
    if (begin < end) pool.emplace_back(work, begin, end);
  }
  return out;
}

Metrics evaluate_logits(std::span<const double> logits, std::span<const std::int8_t> labels) {
  std::vector<double> probs(logits.size());
  std::transform(logits.begin(), logits.end(), probs.begin(), sigmoid);
  return {auc(logits, labels), logloss(probs, labels)};
}

Metrics evaluate(const FmModel& model, const Dataset& data, unsigned threads) {
  const auto logits = score_all(model, data, threads);
  return evaluate_logits(logits, data.labels());
}

std::uint64_t count_params(Variant v, std::uint64_t m, std::uint64_t n, std::uint64_t k,
                           LinearMode linear) {
  const std::uint64_t lin = linear == LinearMode::kPerFeature ? m : n * k;
  switch (v) {
    case Variant::kLR: return m;
    case Variant::kFM: return lin + m * k;
    case Variant::kFwFM: return lin + m * k + pair_count(n);
    case Variant::kFvFM: return lin + m * k + pair_count(n) * k;
    case Variant::kFmFM: return lin + m * k + pair_count(n) * k * k;
    case Variant::kFFM: return lin + m * (n - 1) * k;
  }
  return 0;
}

std::uint64_t count_params(Variant v, std::span<const std::uint32_t> feature_counts,
                           std::span<const std::uint32_t> dims, LinearMode linear) {
  if (feature_counts.size() != dims.size() || dims.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "count_params: counts and dims differ in length");
  }
  const std::uint64_t m = std::accumulate(feature_counts.begin(), feature_counts.end(), 0ull);
  if (v == Variant::kLR) return m;
  if (uniform(dims)) return count_params(v, m, dims.size(), dims[0], linear);
  if (v != Variant::kFmFM) {
    throw Error(ErrorCode::kInvalidArgument, "only FmFM supports per-field dimensions");
  }
  std::uint64_t total = 0;
  for (std::size_t f = 0; f < dims.size(); ++f) {
    total += std::uint64_t{feature_counts[f]} * dims[f];
    total += linear == LinearMode::kPerFeature ? feature_counts[f] : dims[f];
  }
  for (std::size_t k = 0; k < dims.size(); ++k) {
    for (std::size_t l = k + 1; l < dims.size(); ++l) total += std::uint64_t{dims[k]} * dims[l];
  }
  return total;
}

std::uint64_t estimate_flops(Variant v, std::uint64_t n, std::uint64_t k, bool cached,
                             LinearMode linear) {
  const std::vector<std::uint32_t> dims(n, static_cast<std::uint32_t>(k));
  return estimate_flops(v, dims, cached, linear);
}

std::uint64_t estimate_flops(Variant v, std::span<const std::uint32_t> dims, bool cached,
                             LinearMode linear) {
  const std::uint64_t n = dims.size();
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "estimate_flops needs at least one field");
  if (v == Variant::kLR) return 2 * n;
  if (v == Variant::kFFM) {
    if (!uniform(dims)) throw Error(ErrorCode::kInvalidArgument, "FFM needs a uniform dimension");
    return pair_count(n) * (2ull * dims[0] + 1) + 2 * n;
  }
  if (cached) {
    std::uint64_t total = 2 * n;
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t l = k + 1; l < n; ++l) total += 2ull * std::min(dims[k], dims[l]) + 1;
    }
    return total;
  }
  const std::uint64_t lin = linear_flops(dims, linear);
  if (v != Variant::kFmFM && !uniform(dims)) {
    throw Error(ErrorCode::kInvalidArgument, "only FmFM supports per-field dimensions");
  }
  const std::uint64_t k = dims[0];
  switch (v) {
    case Variant::kFM: return 3 * n * k + lin;
    case Variant::kFwFM: return pair_count(n) * (2 * k + 2) + lin;
    case Variant::kFvFM: return pair_count(n) * (3 * k + 1) + lin;
    case Variant::kFmFM: {
      // Transform the larger side into the smaller space, then dot there.
      std::uint64_t total = lin;
      for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = a + 1; b < n; ++b) {
          total += 2ull * dims[a] * dims[b] + 2ull * std::min(dims[a], dims[b]) + 1;
        }
      }
      return total;
    }
    default: return 0;
  }
}

void FieldMatrix::write_csv(std::ostream& out) const {
  out.precision(10);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t l = 0; l < n; ++l) {
      if (l) out << ',';
      out << at(k, l);
    }
    out << '\n';
  }
}

double field_pair_mi(const Dataset& data, std::size_t k, std::size_t l) {
  if (data.empty()) throw Error(ErrorCode::kEmptyInput, "mutual information needs data");
  if (k >= data.field_count() || l >= data.field_count()) {
    throw Error(ErrorCode::kInvalidArgument, "field index out of range");
  }
  struct Counts {
    std::uint64_t pos = 0;
    std::uint64_t neg = 0;
  };
  std::unordered_map<std::uint64_t, Counts> joint;
  std::uint64_t pos = 0;
  for (std::size_t r = 0; r < data.size(); ++r) {
    const auto inst = data[r];
    const std::uint64_t key = (std::uint64_t{inst.features[k]} << 32) | inst.features[l];
    auto& c = joint[key];
    if (inst.label > 0) {
      ++c.pos;
      ++pos;
    } else {
      ++c.neg;
    }
  }
  const double total = static_cast<double>(data.size());
  const double py[2] = {static_cast<double>(data.size() - pos) / total,
                        static_cast<double>(pos) / total};
  double mi = 0.0;
  for (const auto& [key, c] : joint) {
    const double px = static_cast<double>(c.pos + c.neg) / total;
    const std::uint64_t counts[2] = {c.neg, c.pos};
    for (int y = 0; y < 2; ++y) {
      if (counts[y] == 0) continue;
      const double pxy = static_cast<double>(counts[y]) / total;
      mi += pxy * std::log2(pxy / (px * py[y]));
    }
  }
  return std::max(0.0, mi);
}

FieldMatrix mi_matrix(const Dataset& data) {
  const auto n = data.field_count();
  FieldMatrix out(n);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t l = k + 1; l < n; ++l) {
      out.at(k, l) = out.at(l, k) = field_pair_mi(data, k, l);
    }
  }
  return out;
}

FieldMatrix cross_dim_map(std::span<const std::uint32_t> dims) {
  FieldMatrix out(dims.size());
  for (std::size_t k = 0; k < dims.size(); ++k) {
    for (std::size_t l = 0; l < dims.size(); ++l) out.at(k, l) = std::min(dims[k], dims[l]);
  }
  return out;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "spearman needs two equal-length samples");
  }
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

double upper_triangle_spearman(const FieldMatrix& a, const FieldMatrix& b) {
  if (a.n != b.n) throw Error(ErrorCode::kDimensionMismatch, "field matrices differ in size");
  std::vector<double> xa;
  std::vector<double> xb;
  for (std::size_t k = 0; k < a.n; ++k) {
    for (std::size_t l = k + 1; l < a.n; ++l) {
      xa.push_back(a.at(k, l));
      xb.push_back(b.at(k, l));
    }
  }
  return spearman(xa, xb);
}

}  // namespace fmfm
