#include "gnnlink/sage.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gnnlink/csv.hpp"
#include "gnnlink/error.hpp"
#include "gnnlink/metrics.hpp"
#include "gnnlink/text.hpp"

namespace gnnlink {

namespace {

constexpr std::string_view kModelMagic = "gnnlink-model";
constexpr int kModelVersion = 1;

// Reorders every node's children (with their subtrees) into a canonical order so that
// aggregation sums do not depend on the order in which neighbors were drawn. Works
// bottom-up: each node gets a rank such that equal ranks mean identical subtrees, then
// children are sorted by rank and the levels are rebuilt top-down.
void canonicalize_in_place(NeighborhoodSample& s, std::span<const std::size_t> sizes) {
  const std::size_t depth = s.levels.size() - 1;
  if (depth == 0) return;
  std::vector<std::vector<std::uint32_t>> rank(depth + 1);
  std::vector<std::vector<std::uint32_t>> child_order(depth);  // per level l: sorted child offsets
  rank[depth].assign(s.levels[depth].begin(), s.levels[depth].end());

  std::vector<std::uint32_t> keys;
  std::vector<std::uint32_t> idx;
  for (std::size_t l = depth; l-- > 0;) {
    const std::size_t count = s.levels[l].size();
    const std::size_t fan = sizes[l];
    auto& order = child_order[l];
    order.resize(count * fan);
    keys.resize(count * (fan + 1));
    for (std::size_t i = 0; i < count; ++i) {
      std::uint32_t* o = order.data() + i * fan;
      for (std::size_t c = 0; c < fan; ++c) o[c] = static_cast<std::uint32_t>(c);
      const std::uint32_t* r = rank[l + 1].data() + i * fan;
      std::sort(o, o + fan, [r](std::uint32_t a, std::uint32_t b) { return r[a] < r[b]; });
      std::uint32_t* k = keys.data() + i * (fan + 1);
      k[0] = s.levels[l][i];
      for (std::size_t c = 0; c < fan; ++c) k[c + 1] = r[o[c]];
    }
    if (l == 0) break;
    idx.resize(count);
    std::iota(idx.begin(), idx.end(), 0u);
    auto key_less = [&](std::uint32_t a, std::uint32_t b) {
      return std::lexicographical_compare(keys.begin() + a * (fan + 1), keys.begin() + (a + 1) * (fan + 1),
                                          keys.begin() + b * (fan + 1), keys.begin() + (b + 1) * (fan + 1));
    };
    std::sort(idx.begin(), idx.end(), key_less);
    rank[l].assign(count, 0);
    std::uint32_t next = 0;
    for (std::size_t p = 0; p < count; ++p) {
      if (p > 0 && key_less(idx[p - 1], idx[p])) ++next;
      rank[l][idx[p]] = next;
    }
  }

  // map lists original indices of one level in canonical order.
  std::vector<std::uint32_t> map{0}, next_map;
  std::vector<NodeIndex> level;
  for (std::size_t l = 0; l < depth; ++l) {
    const std::size_t fan = sizes[l];
    next_map.clear();
    for (std::uint32_t orig : map)
      for (std::size_t c = 0; c < fan; ++c)
        next_map.push_back(orig * static_cast<std::uint32_t>(fan) + child_order[l][orig * fan + c]);
    map.swap(next_map);
    level.resize(map.size());
    for (std::size_t i = 0; i < map.size(); ++i) level[i] = s.levels[l + 1][map[i]];
    // Level l+1 is final; deeper levels are still read by original index via `map`.
    s.levels[l + 1].swap(level);
    if (l + 1 < depth) {
      // Re-key the deeper structures so that index i at level l+1 is canonical.
      const std::size_t fan2 = sizes[l + 1];
      std::vector<NodeIndex> below(s.levels[l + 2].size());
      std::vector<std::uint32_t> order_below(child_order[l + 1].size());
      for (std::size_t i = 0; i < map.size(); ++i)
        for (std::size_t c = 0; c < fan2; ++c) {
          below[i * fan2 + c] = s.levels[l + 2][map[i] * fan2 + c];
          order_below[i * fan2 + c] = child_order[l + 1][map[i] * fan2 + c];
        }
      s.levels[l + 2].swap(below);
      child_order[l + 1].swap(order_below);
      std::iota(map.begin(), map.end(), 0u);
    }
  }
}

NeighborhoodSample canonicalize(const NeighborhoodSample& s, std::span<const std::size_t> sizes) {
  NeighborhoodSample out = s;
  canonicalize_in_place(out, sizes);
  return out;
}

void check_sample_shape(const NeighborhoodSample& s, const SageConfig& config, std::size_t n_nodes) {
  if (s.levels.size() != config.depth() + 1 || s.levels[0].size() != 1)
    throw DataError("neighborhood sample depth does not match the model");
  for (std::size_t l = 1; l < s.levels.size(); ++l)
    if (s.levels[l].size() != s.levels[l - 1].size() * config.sample_sizes[l - 1])
      throw DataError("neighborhood sample width does not match the model");
  for (const auto& lv : s.levels)
    for (NodeIndex v : lv)
      if (v >= n_nodes) throw DataError("neighborhood sample references unknown node index " + std::to_string(v));
}

template <class T>
T logistic(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <class T>
using Levels = std::vector<std::vector<T>>;

template <class T>
struct Trace {
  std::vector<Levels<T>> h;      // h[k][l]: layer-k activations at level l (k = 0 is features)
  std::vector<Levels<T>> x;      // x[k][l]: h[k][l] after dropout (only filled with dropout)
  std::vector<Levels<T>> scale;  // dropout scale per element of x[k][l]
  std::vector<Levels<T>> agg;    // agg[k][l]: neighbor mean fed to layer k
  std::vector<Levels<T>> pre;    // pre[k][l]: pre-activation of layer k
  std::vector<Levels<T>> norm;   // norm[k][l]: L2 norm of the rectified pre-activation
  bool dropout = false;
  std::size_t degenerate = 0;
  // backward scratch
  Levels<T> g_h, g_x;
  std::vector<T> g_pre;

  const std::vector<T>& input(std::size_t k, std::size_t l) const { return dropout ? x[k][l] : h[k][l]; }
};

// Dropout keep/drop decisions: 32 bits per decision from a splitmix64 counter seeded
// once per forward pass.
class DropoutBits {
 public:
  DropoutBits(std::uint64_t seed, double rate)
      : state_(seed), threshold_(static_cast<std::uint64_t>(rate * 4294967296.0)) {}

  bool drop() {
    if (spare_ == 0) {
      state_ += 0x9e3779b97f4a7c15ULL;
      bits_ = mix64(state_);
      spare_ = 2;
    }
    const std::uint64_t v = bits_ & 0xffffffffULL;
    bits_ >>= 32;
    --spare_;
    return v < threshold_;
  }

 private:
  std::uint64_t state_;
  std::uint64_t threshold_;
  std::uint64_t bits_ = 0;
  int spare_ = 0;
};

// Forward/backward over one flat parameter vector. T is double for training and long
// double for finite-difference verification.
template <class T>
class Engine {
 public:
  Engine(const SageModel& model, std::span<const T> params, const FeatureMatrix& features)
      : model_(model), cfg_(model.config()), params_(params), features_(features) {
    dims_.push_back(cfg_.input_dim);
    for (auto d : cfg_.hidden_dims) dims_.push_back(d);
  }

  std::size_t depth() const { return cfg_.depth(); }
  std::size_t embedding_dim() const { return dims_.back(); }

  /// Fills `tr`; the embedding is tr.h[L][0]. The sample must be canonical.
  void forward(const NeighborhoodSample& s, Trace<T>& tr, Rng* dropout_rng) const {
    const std::size_t L = depth();
    tr.dropout = dropout_rng != nullptr && cfg_.dropout > 0.0;
    const T inv_keep = T(1) / (T(1) - T(cfg_.dropout));
    DropoutBits bits(tr.dropout ? dropout_rng->next() : 0, cfg_.dropout);
    tr.degenerate = 0;
    tr.h.resize(L + 1);
    tr.x.resize(L);
    tr.scale.resize(L);
    tr.agg.resize(L);
    tr.pre.resize(L);
    tr.norm.resize(L);

    tr.h[0].resize(L + 1);
    for (std::size_t l = 0; l <= L; ++l) {
      auto& dst = tr.h[0][l];
      dst.resize(s.levels[l].size() * dims_[0]);
      for (std::size_t i = 0; i < s.levels[l].size(); ++i) {
        const auto row = features_.row(s.levels[l][i]);
        for (std::size_t j = 0; j < dims_[0]; ++j) dst[i * dims_[0] + j] = T(row[j]);
      }
    }

    for (std::size_t k = 0; k < L; ++k) {
      const std::size_t din = dims_[k];
      const std::size_t dout = dims_[k + 1];
      const std::size_t wo = model_.weight_offset(k);
      const std::size_t bo = model_.bias_offset(k);

      if (tr.dropout) {
        tr.x[k].resize(L - k + 1);
        tr.scale[k].resize(L - k + 1);
        for (std::size_t l = 0; l <= L - k; ++l) {
          const auto& src = tr.h[k][l];
          auto& dst = tr.x[k][l];
          auto& sc = tr.scale[k][l];
          dst.resize(src.size());
          sc.resize(src.size());
          for (std::size_t e = 0; e < sc.size(); ++e) {
            sc[e] = bits.drop() ? T(0) : inv_keep;
            dst[e] = src[e] * sc[e];
          }
        }
      }

      tr.agg[k].resize(L - k);
      tr.pre[k].resize(L - k);
      tr.norm[k].resize(L - k);
      tr.h[k + 1].resize(L - k);
      for (std::size_t l = 0; l < L - k; ++l) {
        const std::size_t count = s.levels[l].size();
        const std::size_t fan = cfg_.sample_sizes[l];
        auto& agg = tr.agg[k][l];
        auto& pre = tr.pre[k][l];
        auto& norm = tr.norm[k][l];
        auto& out = tr.h[k + 1][l];
        agg.assign(count * din, T(0));
        pre.resize(count * dout);
        norm.resize(count);
        out.resize(count * dout);
        const auto& self_in = tr.input(k, l);
        const auto& child_in = tr.input(k, l + 1);

        for (std::size_t i = 0; i < count; ++i) {
          T* a = agg.data() + i * din;
          for (std::size_t c = 0; c < fan; ++c) {
            const T* src = child_in.data() + (i * fan + c) * din;
            for (std::size_t j = 0; j < din; ++j) a[j] += src[j];
          }
          for (std::size_t j = 0; j < din; ++j) a[j] /= T(fan);

          T* p = pre.data() + i * dout;
          for (std::size_t o = 0; o < dout; ++o) p[o] = params_[bo + o];
          const T* self = self_in.data() + i * din;
          for (std::size_t j = 0; j < din; ++j) {
            const T v = self[j];
            if (v == T(0)) continue;
            const T* col = params_.data() + wo + j * dout;
            for (std::size_t o = 0; o < dout; ++o) p[o] += v * col[o];
          }
          for (std::size_t j = 0; j < din; ++j) {
            const T v = a[j];
            if (v == T(0)) continue;
            const T* col = params_.data() + wo + (din + j) * dout;
            for (std::size_t o = 0; o < dout; ++o) p[o] += v * col[o];
          }

          T sq = T(0);
          for (std::size_t o = 0; o < dout; ++o) {
            const T r = p[o] < T(0) ? T(0) : p[o];  // NaN passes through
            sq += r * r;
          }
          const T n = std::sqrt(sq);
          norm[i] = n;
          T* h = out.data() + i * dout;
          if (n != T(0)) {
            for (std::size_t o = 0; o < dout; ++o) h[o] = (p[o] < T(0) ? T(0) : p[o]) / n;
          } else {
            for (std::size_t o = 0; o < dout; ++o) h[o] = T(0);
            ++tr.degenerate;
          }
        }
      }
    }
  }

  /// Accumulates dLoss/dparams into `grad` given dLoss/dz for the root embedding.
  void backward(const NeighborhoodSample& s, Trace<T>& tr, std::span<const T> g_z, std::span<T> grad) const {
    const std::size_t L = depth();
    auto& g_h = tr.g_h;
    auto& g_x = tr.g_x;
    auto& g_pre = tr.g_pre;
    g_h.resize(std::max<std::size_t>(g_h.size(), 1));
    g_h[0].assign(g_z.begin(), g_z.end());

    for (std::size_t kk = L; kk-- > 0;) {
      const std::size_t k = kk;
      const std::size_t din = dims_[k];
      const std::size_t dout = dims_[k + 1];
      const std::size_t wo = model_.weight_offset(k);
      const std::size_t bo = model_.bias_offset(k);
      const bool propagate = k > 0;
      if (propagate) {
        g_x.resize(L - k + 1);
        for (std::size_t l = 0; l <= L - k; ++l) g_x[l].assign(tr.input(k, l).size(), T(0));
      }
      g_pre.resize(dout);

      for (std::size_t l = 0; l < L - k; ++l) {
        const std::size_t count = s.levels[l].size();
        const std::size_t fan = cfg_.sample_sizes[l];
        for (std::size_t i = 0; i < count; ++i) {
          const T n = tr.norm[k][l][i];
          if (!(n > T(0))) continue;
          const T* h = tr.h[k + 1][l].data() + i * dout;
          const T* gh = g_h[l].data() + i * dout;
          const T* p = tr.pre[k][l].data() + i * dout;
          T dot = T(0);
          for (std::size_t o = 0; o < dout; ++o) dot += h[o] * gh[o];
          bool any = false;
          for (std::size_t o = 0; o < dout; ++o) {
            g_pre[o] = p[o] > T(0) ? (gh[o] - h[o] * dot) / n : T(0);
            any = any || g_pre[o] != T(0);
          }
          if (!any) continue;

          for (std::size_t o = 0; o < dout; ++o) grad[bo + o] += g_pre[o];
          const T* self = tr.input(k, l).data() + i * din;
          const T* a = tr.agg[k][l].data() + i * din;
          for (std::size_t j = 0; j < din; ++j) {
            const T v = self[j];
            if (v == T(0)) continue;
            T* col = grad.data() + wo + j * dout;
            for (std::size_t o = 0; o < dout; ++o) col[o] += v * g_pre[o];
          }
          for (std::size_t j = 0; j < din; ++j) {
            const T v = a[j];
            if (v == T(0)) continue;
            T* col = grad.data() + wo + (din + j) * dout;
            for (std::size_t o = 0; o < dout; ++o) col[o] += v * g_pre[o];
          }

          if (!propagate) continue;
          T* gs = g_x[l].data() + i * din;
          for (std::size_t j = 0; j < din; ++j) {
            const T* col = params_.data() + wo + j * dout;
            T acc = T(0);
            for (std::size_t o = 0; o < dout; ++o) acc += col[o] * g_pre[o];
            gs[j] += acc;
          }
          for (std::size_t j = 0; j < din; ++j) {
            const T* col = params_.data() + wo + (din + j) * dout;
            T acc = T(0);
            for (std::size_t o = 0; o < dout; ++o) acc += col[o] * g_pre[o];
            acc /= T(fan);
            for (std::size_t c = 0; c < fan; ++c) g_x[l + 1][(i * fan + c) * din + j] += acc;
          }
        }
      }

      if (propagate) {
        if (tr.dropout)
          for (std::size_t l = 0; l <= L - k; ++l)
            for (std::size_t e = 0; e < g_x[l].size(); ++e) g_x[l][e] *= tr.scale[k][l][e];
        g_h.swap(g_x);
      }
    }
  }

  /// Edge embedding of (z_u, z_v) into `e`.
  void edge(std::span<const T> zu, std::span<const T> zv, std::vector<T>& e) const {
    const std::size_t H = zu.size();
    switch (cfg_.edge_operator) {
      case EdgeOperator::inner_product: {
        T dot = T(0);
        for (std::size_t o = 0; o < H; ++o) dot += zu[o] * zv[o];
        e.assign(1, dot);
        break;
      }
      case EdgeOperator::hadamard:
        e.resize(H);
        for (std::size_t o = 0; o < H; ++o) e[o] = zu[o] * zv[o];
        break;
      case EdgeOperator::average:
        e.resize(H);
        for (std::size_t o = 0; o < H; ++o) e[o] = (zu[o] + zv[o]) / T(2);
        break;
      case EdgeOperator::concat:
        e.resize(2 * H);
        for (std::size_t o = 0; o < H; ++o) {
          e[o] = zu[o];
          e[H + o] = zv[o];
        }
        break;
    }
  }

  T logit(std::span<const T> e) const {
    const std::size_t co = model_.classifier_offset();
    T acc = params_[co + e.size()];
    for (std::size_t j = 0; j < e.size(); ++j) acc += params_[co + j] * e[j];
    return acc;
  }

  /// Gradients wrt classifier parameters (accumulated) and both endpoint embeddings.
  void edge_backward(T g_logit, std::span<const T> zu, std::span<const T> zv, std::span<const T> e,
                     std::span<T> grad, std::vector<T>& g_zu, std::vector<T>& g_zv) const {
    const std::size_t co = model_.classifier_offset();
    const std::size_t H = zu.size();
    for (std::size_t j = 0; j < e.size(); ++j) grad[co + j] += g_logit * e[j];
    grad[co + e.size()] += g_logit;
    g_zu.assign(H, T(0));
    g_zv.assign(H, T(0));
    switch (cfg_.edge_operator) {
      case EdgeOperator::inner_product: {
        const T ge = g_logit * params_[co];
        for (std::size_t o = 0; o < H; ++o) {
          g_zu[o] = ge * zv[o];
          g_zv[o] = ge * zu[o];
        }
        break;
      }
      case EdgeOperator::hadamard:
        for (std::size_t o = 0; o < H; ++o) {
          const T ge = g_logit * params_[co + o];
          g_zu[o] = ge * zv[o];
          g_zv[o] = ge * zu[o];
        }
        break;
      case EdgeOperator::average:
        for (std::size_t o = 0; o < H; ++o) g_zu[o] = g_zv[o] = g_logit * params_[co + o] / T(2);
        break;
      case EdgeOperator::concat:
        for (std::size_t o = 0; o < H; ++o) {
          g_zu[o] = g_logit * params_[co + o];
          g_zv[o] = g_logit * params_[co + H + o];
        }
        break;
    }
  }

 private:
  const SageModel& model_;
  const SageConfig& cfg_;
  std::span<const T> params_;
  const FeatureMatrix& features_;
  std::vector<std::size_t> dims_;
};

template <class T>
T clamp_probability(T p) {
  return std::clamp(p, T(kProbabilityEpsilon), T(1) - T(kProbabilityEpsilon));
}

template <class T>
T bce(T p, int label) {
  const T q = clamp_probability(p);
  return label == 1 ? -std::log(q) : -std::log(T(1) - q);
}

template <class T>
std::span<const T> root_embedding(const Trace<T>& tr) {
  return tr.h.back()[0];
}

template <class T>
T loss_impl(const SageModel& model, std::span<const T> params, const FeatureMatrix& features,
            const FrozenBatch& samples, std::span<const LabeledPair> batch) {
  Engine<T> engine(model, params, features);
  Trace<T> tu, tv;
  std::vector<T> e;
  T total = T(0);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto su = canonicalize(samples.heads[b], model.config().sample_sizes);
    const auto sv = canonicalize(samples.tails[b], model.config().sample_sizes);
    engine.forward(su, tu, nullptr);
    engine.forward(sv, tv, nullptr);
    engine.edge(root_embedding(tu), root_embedding(tv), e);
    total += bce(logistic(engine.logit(e)), batch[b].label);
  }
  return total / T(batch.size());
}

void check_inputs(const SageModel& model, const FeatureMatrix& features) {
  if (features.cols() != model.config().input_dim)
    throw DataError("feature dimension " + std::to_string(features.cols()) + " does not match model input " +
                    std::to_string(model.config().input_dim));
}

void check_batch(const FrozenBatch& samples, std::span<const LabeledPair> batch) {
  if (batch.empty()) throw DataError("empty batch");
  if (samples.heads.size() != batch.size() || samples.tails.size() != batch.size())
    throw DataError("frozen batch does not match the batch size");
}

}  // namespace

std::string_view to_string(EdgeOperator op) {
  switch (op) {
    case EdgeOperator::inner_product: return "inner_product";
    case EdgeOperator::hadamard: return "hadamard";
    case EdgeOperator::average: return "average";
    case EdgeOperator::concat: return "concat";
  }
  return "inner_product";
}

EdgeOperator edge_operator_from_string(std::string_view text) {
  if (text == "inner_product" || text == "ip") return EdgeOperator::inner_product;
  if (text == "hadamard") return EdgeOperator::hadamard;
  if (text == "average") return EdgeOperator::average;
  if (text == "concat") return EdgeOperator::concat;
  throw ConfigError("unknown edge operator '" + std::string(text) + "'");
}

std::size_t SageConfig::edge_dim() const noexcept {
  switch (edge_operator) {
    case EdgeOperator::inner_product: return 1;
    case EdgeOperator::hadamard:
    case EdgeOperator::average: return embedding_dim();
    case EdgeOperator::concat: return 2 * embedding_dim();
  }
  return 1;
}

void SageConfig::validate() const {
  if (input_dim == 0) throw ConfigError("sage: input dimension must be positive");
  if (hidden_dims.empty()) throw ConfigError("sage: at least one layer is required");
  if (hidden_dims.size() != sample_sizes.size())
    throw ConfigError("sage: one neighbor sample size per layer is required");
  for (auto d : hidden_dims)
    if (d == 0) throw ConfigError("sage: hidden dimensions must be positive");
  for (auto s : sample_sizes)
    if (s == 0) throw ConfigError("sage: sample sizes must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("sage: dropout must be in [0,1)");
}

SageModel::SageModel(SageConfig config) : config_(std::move(config)) {
  config_.validate();
  std::size_t offset = 0;
  std::size_t in = config_.input_dim;
  for (auto out : config_.hidden_dims) {
    weight_offsets_.push_back(offset);
    offset += out * 2 * in;
    bias_offsets_.push_back(offset);
    offset += out;
    in = out;
  }
  classifier_offset_ = offset;
  offset += config_.edge_dim() + 1;
  params_.assign(offset, 0.0);
}

SageModel SageModel::initialize(SageConfig config, std::uint64_t seed) {
  SageModel model(std::move(config));
  Rng rng(derive_seed(seed, {0x1417u}));
  for (std::size_t k = 0; k < model.config_.depth(); ++k) {
    auto view = model.layer(k);
    const double a = std::sqrt(6.0 / static_cast<double>(view.in + view.out));
    for (auto& w : view.weights) w = rng.uniform(-a, a);
  }
  auto cw = model.classifier_weights();
  const double a = std::sqrt(6.0 / static_cast<double>(cw.size() + 1));
  for (auto& w : cw) w = rng.uniform(-a, a);
  return model;
}

LayerView<std::span<double>> SageModel::layer(std::size_t k) {
  const std::size_t in = 2 * (k == 0 ? config_.input_dim : config_.hidden_dims[k - 1]);
  const std::size_t out = config_.hidden_dims[k];
  return {std::span(params_).subspan(weight_offsets_[k], out * in), std::span(params_).subspan(bias_offsets_[k], out),
          out, in};
}

LayerView<std::span<const double>> SageModel::layer(std::size_t k) const {
  const std::size_t in = 2 * (k == 0 ? config_.input_dim : config_.hidden_dims[k - 1]);
  const std::size_t out = config_.hidden_dims[k];
  std::span<const double> p(params_);
  return {p.subspan(weight_offsets_[k], out * in), p.subspan(bias_offsets_[k], out), out, in};
}

std::span<double> SageModel::classifier_weights() {
  return std::span(params_).subspan(classifier_offset_, config_.edge_dim());
}

std::span<const double> SageModel::classifier_weights() const {
  return std::span<const double>(params_).subspan(classifier_offset_, config_.edge_dim());
}

std::string SageModel::serialize() const {
  auto list = [](std::string key, const std::vector<std::size_t>& v) {
    std::vector<std::string> f{std::move(key)};
    for (auto x : v) f.push_back(std::to_string(x));
    return csv::join(f) + '\n';
  };
  std::string out;
  out += csv::join({std::string(kModelMagic), std::to_string(kModelVersion)}) + '\n';
  out += csv::join({"input_dim", std::to_string(config_.input_dim)}) + '\n';
  out += list("hidden", config_.hidden_dims);
  out += list("samples", config_.sample_sizes);
  out += csv::join({"dropout", format_hex(config_.dropout)}) + '\n';
  out += csv::join({"operator", std::string(to_string(config_.edge_operator))}) + '\n';
  out += csv::join({"aggregator", "mean"}) + '\n';
  for (const auto& [k, v] : metadata_) out += csv::join({"meta", k, v}) + '\n';
  out += csv::join({"parameters", std::to_string(params_.size())}) + '\n';
  for (double p : params_) out += format_hex(p) + '\n';
  return out;
}

SageModel SageModel::deserialize(std::string_view text) {
  auto rows = csv::parse(text);
  auto expect = [&](std::size_t r, std::string_view key) -> const std::vector<std::string>& {
    if (r >= rows.size() || rows[r].fields.empty() || rows[r].fields[0] != key)
      throw DataError("model: expected '" + std::string(key) + "' record");
    return rows[r].fields;
  };
  auto sizes = [](const std::vector<std::string>& f) {
    std::vector<std::size_t> out;
    for (std::size_t i = 1; i < f.size(); ++i) out.push_back(static_cast<std::size_t>(parse_integer(f[i])));
    return out;
  };
  const auto& head = expect(0, kModelMagic);
  if (head.size() != 2 || head[1] != std::to_string(kModelVersion)) throw DataError("model: unsupported version");
  SageConfig cfg;
  cfg.input_dim = static_cast<std::size_t>(parse_integer(expect(1, "input_dim").at(1)));
  cfg.hidden_dims = sizes(expect(2, "hidden"));
  cfg.sample_sizes = sizes(expect(3, "samples"));
  cfg.dropout = parse_double(expect(4, "dropout").at(1));
  cfg.edge_operator = edge_operator_from_string(expect(5, "operator").at(1));
  if (expect(6, "aggregator").at(1) != "mean") throw DataError("model: unsupported aggregator");

  std::size_t r = 7;
  std::map<std::string, std::string> meta;
  while (r < rows.size() && !rows[r].fields.empty() && rows[r].fields[0] == "meta") {
    const auto& f = rows[r].fields;
    if (f.size() != 3) throw ParseError("model: malformed meta record", rows[r].line, "meta");
    meta[f[1]] = f[2];
    ++r;
  }
  SageModel model(cfg);
  model.metadata_ = std::move(meta);
  const auto count = static_cast<std::size_t>(parse_integer(expect(r, "parameters").at(1)));
  if (count != model.params_.size()) throw DataError("model: parameter count does not match architecture");
  if (rows.size() != r + 1 + count) throw DataError("model: truncated parameter list");
  for (std::size_t i = 0; i < count; ++i) model.params_[i] = parse_double(rows[r + 1 + i].fields.at(0));
  return model;
}

NeighborhoodSample sample_neighborhood(const CoConsiderationNetwork& graph, NodeIndex v,
                                       std::span<const std::size_t> sizes, Rng& rng) {
  if (v >= graph.size()) throw DataError("sample_neighborhood: unknown node index " + std::to_string(v));
  NeighborhoodSample s;
  s.levels.push_back({v});
  for (std::size_t hop = 0; hop < sizes.size(); ++hop) {
    std::vector<NodeIndex> next;
    next.reserve(s.levels.back().size() * sizes[hop]);
    for (NodeIndex u : s.levels.back()) {
      const auto nbrs = graph.neighbors(u);
      for (std::size_t i = 0; i < sizes[hop]; ++i)
        next.push_back(nbrs.empty() ? u : nbrs[rng.uniform_index(nbrs.size())]);
    }
    s.levels.push_back(std::move(next));
  }
  return s;
}

Embeddings forward_embed(const SageModel& model, const FeatureMatrix& features, const CoConsiderationNetwork& graph,
                         std::span<const NodeIndex> nodes, Rng& rng, Mode mode) {
  check_inputs(model, features);
  if (features.rows() != graph.size()) throw DataError("feature rows do not match graph size");
  Engine<double> engine(model, model.parameters(), features);
  Trace<double> tr;
  Embeddings out;
  out.dim = engine.embedding_dim();
  out.values.reserve(nodes.size() * out.dim);
  for (NodeIndex v : nodes) {
    const auto s = canonicalize(sample_neighborhood(graph, v, model.config().sample_sizes, rng),
                                model.config().sample_sizes);
    engine.forward(s, tr, mode == Mode::train ? &rng : nullptr);
    const auto z = root_embedding(tr);
    out.values.insert(out.values.end(), z.begin(), z.end());
    out.degenerate += tr.degenerate > 0 && std::all_of(z.begin(), z.end(), [](double x) { return x == 0.0; });
  }
  return out;
}

Embeddings embed_samples(const SageModel& model, const FeatureMatrix& features,
                         std::span<const NeighborhoodSample> samples) {
  check_inputs(model, features);
  Engine<double> engine(model, model.parameters(), features);
  Trace<double> tr;
  Embeddings out;
  out.dim = engine.embedding_dim();
  out.values.reserve(samples.size() * out.dim);
  for (const auto& raw : samples) {
    check_sample_shape(raw, model.config(), features.rows());
    engine.forward(canonicalize(raw, model.config().sample_sizes), tr, nullptr);
    const auto z = root_embedding(tr);
    out.values.insert(out.values.end(), z.begin(), z.end());
    out.degenerate += std::all_of(z.begin(), z.end(), [](double x) { return x == 0.0; });
  }
  return out;
}

Embeddings node_embeddings(const SageModel& model, const FeatureMatrix& features,
                           const CoConsiderationNetwork& graph, std::uint64_t seed) {
  check_inputs(model, features);
  if (features.rows() != graph.size()) throw DataError("feature rows do not match graph size");
  std::vector<NeighborhoodSample> samples;
  samples.reserve(graph.size());
  for (NodeIndex v = 0; v < graph.size(); ++v) {
    Rng rng(derive_seed(seed, {0x5a3b1eu, v}));
    samples.push_back(sample_neighborhood(graph, v, model.config().sample_sizes, rng));
  }
  return embed_samples(model, features, samples);
}

std::vector<double> edge_embedding(const SageModel& model, std::span<const double> z_u, std::span<const double> z_v) {
  if (z_u.size() != model.config().embedding_dim() || z_v.size() != z_u.size())
    throw DataError("edge_embedding: embedding dimension mismatch");
  static const FeatureMatrix kNoFeatures;
  Engine<double> engine(model, model.parameters(), kNoFeatures);
  std::vector<double> e;
  engine.edge(z_u, z_v, e);
  return e;
}

double edge_probability(const SageModel& model, std::span<const double> z_u, std::span<const double> z_v) {
  const auto e = edge_embedding(model, z_u, z_v);
  static const FeatureMatrix kNoFeatures;
  Engine<double> engine(model, model.parameters(), kNoFeatures);
  return logistic(engine.logit(e));
}

double bce_loss(double p, int label) { return bce(p, label); }

FrozenBatch sample_batch(const SageModel& model, const CoConsiderationNetwork& graph,
                         std::span<const LabeledPair> batch, Rng& rng) {
  FrozenBatch out;
  out.heads.reserve(batch.size());
  out.tails.reserve(batch.size());
  for (const auto& pair : batch) {
    out.heads.push_back(sample_neighborhood(graph, pair.u, model.config().sample_sizes, rng));
    out.tails.push_back(sample_neighborhood(graph, pair.v, model.config().sample_sizes, rng));
  }
  return out;
}

double batch_loss(const SageModel& model, const FeatureMatrix& features, const FrozenBatch& samples,
                  std::span<const LabeledPair> batch) {
  check_inputs(model, features);
  check_batch(samples, batch);
  return loss_impl<double>(model, model.parameters(), features, samples, batch);
}

long double batch_loss_extended(const SageModel& model, std::span<const long double> parameters,
                                const FeatureMatrix& features, const FrozenBatch& samples,
                                std::span<const LabeledPair> batch) {
  check_inputs(model, features);
  check_batch(samples, batch);
  if (parameters.size() != model.parameter_count()) throw DataError("parameter vector has the wrong length");
  return loss_impl<long double>(model, parameters, features, samples, batch);
}

BatchGradient batch_gradient(const SageModel& model, const FeatureMatrix& features, const FrozenBatch& samples,
                             std::span<const LabeledPair> batch, Rng* dropout_rng) {
  check_inputs(model, features);
  check_batch(samples, batch);
  const auto& sizes = model.config().sample_sizes;
  Engine<double> engine(model, model.parameters(), features);
  BatchGradient out;
  out.gradient.assign(model.parameter_count(), 0.0);
  Trace<double> tu, tv;
  std::vector<double> e, g_zu, g_zv;
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;

  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto su = canonicalize(samples.heads[b], sizes);
    const auto sv = canonicalize(samples.tails[b], sizes);
    engine.forward(su, tu, dropout_rng);
    engine.forward(sv, tv, dropout_rng);
    const auto zu = root_embedding(tu);
    const auto zv = root_embedding(tv);
    engine.edge(zu, zv, e);
    const double p = logistic(engine.logit(e));
    const int y = batch[b].label;
    total += bce(p, y);
    const bool inside = p > kProbabilityEpsilon && p < 1.0 - kProbabilityEpsilon;
    const double g_logit = inside ? (p - static_cast<double>(y)) * inv_batch : 0.0;
    if (g_logit == 0.0) continue;
    engine.edge_backward(g_logit, zu, zv, e, out.gradient, g_zu, g_zv);
    engine.backward(su, tu, g_zu, out.gradient);
    engine.backward(sv, tv, g_zv, out.gradient);
  }
  out.loss = total * inv_batch;
  return out;
}

BatchGradient parameter_gradients(const SageModel& model, const FeatureMatrix& features,
                                  const CoConsiderationNetwork& graph, std::span<const LabeledPair> batch, Rng& rng,
                                  Mode mode) {
  const auto samples = sample_batch(model, graph, batch, rng);
  return batch_gradient(model, features, samples, batch, mode == Mode::train ? &rng : nullptr);
}

TrainResult train(SageModel model, const FeatureMatrix& features, const EdgeSplit& split, const TrainConfig& config) {
  if (split.train.empty()) throw DataError("train: no training samples");
  if (config.epochs == 0 || config.batch_size == 0) throw ConfigError("train: epochs and batch size must be >= 1");
  if (!(config.learning_rate >= 0.0) || !std::isfinite(config.learning_rate))
    throw ConfigError("train: learning rate must be finite and non-negative");
  check_inputs(model, features);
  if (features.rows() != split.training.size()) throw DataError("train: feature rows do not match graph size");

  Rng order_rng(derive_seed(config.seed, {0x0de7u}));
  Rng sample_rng(derive_seed(config.seed, {0x5a3bu}));
  std::vector<LabeledPair> samples(split.train.begin(), split.train.end());

  std::vector<NodePair> test_pairs;
  std::vector<int> test_labels;
  for (const auto& s : split.test) {
    test_pairs.emplace_back(s.u, s.v);
    test_labels.push_back(s.label);
  }

  TrainResult result{std::move(model), {}};
  auto params = result.model.parameters();
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    order_rng.shuffle(std::span(samples));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < samples.size(); start += config.batch_size) {
      const std::size_t end = std::min(samples.size(), start + config.batch_size);
      std::span<const LabeledPair> batch(samples.data() + start, end - start);
      const auto g = parameter_gradients(result.model, features, split.training, batch, sample_rng, Mode::train);
      if (!std::isfinite(g.loss))
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch + 1) +
                           " (learning rate too high?)");
      epoch_loss += g.loss * static_cast<double>(batch.size());
      for (std::size_t i = 0; i < params.size(); ++i) params[i] -= config.learning_rate * g.gradient[i];
    }
    for (double p : params)
      if (!std::isfinite(p))
        throw NumericError("train: non-finite parameter at epoch " + std::to_string(epoch + 1) +
                           " (learning rate too high?)");
    result.trace.epoch_loss.push_back(epoch_loss / static_cast<double>(samples.size()));
    if (config.track_held_out_auc && !split.test.empty()) {
      const auto probs = predict_links(result.model, features, split.training, test_pairs, config.seed);
      result.trace.held_out_auc.push_back(roc_auc(test_labels, probs).auc);
    }
  }
  return result;
}

std::vector<double> score_pairs(const SageModel& model, const Embeddings& embeddings, std::span<const NodePair> pairs) {
  static const FeatureMatrix kNoFeatures;
  Engine<double> engine(model, model.parameters(), kNoFeatures);
  std::vector<double> out;
  out.reserve(pairs.size());
  std::vector<double> e;
  const std::size_t n = embeddings.rows();
  for (auto [a, b] : pairs) {
    if (a >= n || b >= n)
      throw DataError("predict: pair references unknown node index " + std::to_string(a >= n ? a : b));
    engine.edge(embeddings.row(a), embeddings.row(b), e);
    const double p = logistic(engine.logit(e));
    if (std::isnan(p))
      throw NumericError("predict: non-finite link score for pair (" + std::to_string(a) + ", " + std::to_string(b) + ")");
    out.push_back(p);
  }
  return out;
}

std::vector<double> predict_links(const SageModel& model, const FeatureMatrix& features,
                                  const CoConsiderationNetwork& graph, std::span<const NodePair> pairs,
                                  std::uint64_t seed) {
  for (auto [a, b] : pairs)
    if (a >= graph.size() || b >= graph.size()) {
      const NodeIndex bad = a >= graph.size() ? a : b;
      throw DataError("predict: pair references unknown node index " + std::to_string(bad));
    }
  return score_pairs(model, node_embeddings(model, features, graph, seed), pairs);
}

}  // namespace gnnlink
