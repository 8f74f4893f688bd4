#include "atlas/model.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "atlas/rng.hpp"
#include "atlas/threading.hpp"

namespace atlas {

namespace {
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConstMat = Eigen::Map<const RowMat>;
constexpr double kLnEps = 1e-5;
}  // namespace

void ModelConfig::validate() const {
  if (n_layers < 1) throw std::invalid_argument("model: n_layers must be >= 1");
  if (heads_per_layer < 1) throw std::invalid_argument("model: heads_per_layer must be >= 1");
  if (d_head < 1) throw std::invalid_argument("model: d_head must be >= 1");
  if (d_model != heads_per_layer * d_head) {
    throw std::invalid_argument("model: d_model must equal heads_per_layer * d_head");
  }
  if (vocab_size < 2) throw std::invalid_argument("model: vocab_size must be >= 2");
  if (max_context < 1) throw std::invalid_argument("model: max_context must be >= 1");
  if (positional != "learned") {
    throw std::invalid_argument("model: unsupported positional encoding '" + positional + "'");
  }
}

ParamVector::ParamVector(std::shared_ptr<const std::vector<Segment>> segments,
                         std::vector<double> values)
    : segments_(std::move(segments)), values_(std::move(values)) {
  std::size_t covered = 0;
  for (const auto& seg : *segments_) {
    if (seg.offset != covered) throw std::invalid_argument("param segments must be contiguous");
    covered += seg.size;
  }
  if (covered != values_.size()) {
    throw std::invalid_argument("param segments must cover the value array");
  }
}

const Segment& ParamVector::segment(std::string_view name) const {
  for (const auto& seg : *segments_) {
    if (seg.name == name) return seg;
  }
  throw std::out_of_range("no parameter segment named '" + std::string(name) + "'");
}

bool ParamVector::all_finite() const {
  for (const double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

struct Transformer::Offsets {
  std::size_t embed = 0, pos = 0, unembed = 0;
  std::size_t lnf_g = 0, lnf_b = 0;
  // indexed [layer]
  std::vector<std::size_t> ln_g, ln_b;
  // indexed [layer * heads + head]
  std::vector<std::size_t> q, k, v, o;
};

Transformer::Transformer(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  const std::size_t D = static_cast<std::size_t>(config_.d_model);
  const std::size_t dh = static_cast<std::size_t>(config_.d_head);
  const std::size_t V = static_cast<std::size_t>(config_.vocab_size);
  const std::size_t K = static_cast<std::size_t>(config_.max_context);
  const int L = config_.n_layers;
  const int H = config_.heads_per_layer;

  auto segments = std::make_shared<std::vector<Segment>>();
  auto offsets = std::make_shared<Offsets>();
  std::size_t at = 0;
  auto add = [&](const std::string& name, std::size_t size) {
    segments->push_back({name, at, size});
    const std::size_t off = at;
    at += size;
    return off;
  };

  offsets->embed = add("embed", V * D);
  offsets->pos = add("pos", K * D);
  offsets->ln_g.resize(static_cast<std::size_t>(L));
  offsets->ln_b.resize(static_cast<std::size_t>(L));
  offsets->q.resize(static_cast<std::size_t>(L * H));
  offsets->k.resize(static_cast<std::size_t>(L * H));
  offsets->v.resize(static_cast<std::size_t>(L * H));
  offsets->o.resize(static_cast<std::size_t>(L * H));
  for (int l = 0; l < L; ++l) {
    if (config_.layernorm) {
      offsets->ln_g[l] = add("ln" + std::to_string(l) + ".g", D);
      offsets->ln_b[l] = add("ln" + std::to_string(l) + ".b", D);
    }
    for (int h = 0; h < H; ++h) {
      const std::string base = "h" + std::to_string(l) + ":" + std::to_string(h);
      const std::size_t i = static_cast<std::size_t>(l * H + h);
      offsets->q[i] = add(base + ".q", D * dh);
      offsets->k[i] = add(base + ".k", D * dh);
      offsets->v[i] = add(base + ".v", D * dh);
      offsets->o[i] = add(base + ".o", dh * D);
    }
  }
  if (config_.layernorm) {
    offsets->lnf_g = add("lnf.g", D);
    offsets->lnf_b = add("lnf.b", D);
  }
  offsets->unembed = add("unembed", D * V);

  segments_ = std::move(segments);
  offsets_ = std::move(offsets);
  param_count_ = at;
}

ParamVector Transformer::init_params(std::uint64_t seed) const {
  std::vector<double> values(param_count_, 0.0);
  const double D = static_cast<double>(config_.d_model);
  const double dh = static_cast<double>(config_.d_head);
  Rng root(seed);
  std::size_t ordinal = 0;
  for (const auto& seg : *segments_) {
    Rng stream = root.derive(0x494E4954ull, ordinal++);
    double std_dev = 0.0;
    bool ones = false;
    if (seg.name == "embed" || seg.name == "pos") {
      std_dev = 0.02;
    } else if (seg.name == "unembed") {
      std_dev = 1.0 / std::sqrt(D);
    } else if (seg.name.ends_with(".q") || seg.name.ends_with(".k") || seg.name.ends_with(".v")) {
      std_dev = 1.0 / std::sqrt(D);
    } else if (seg.name.ends_with(".o")) {
      std_dev = 1.0 / std::sqrt(dh);
    } else if (seg.name.ends_with(".g")) {
      ones = true;
    }  // ".b" stays zero
    for (std::size_t i = 0; i < seg.size; ++i) {
      double v = ones ? 1.0 : std_dev * stream.normal();
      values[seg.offset + i] = static_cast<double>(static_cast<float>(v));
    }
  }
  return ParamVector(segments_, std::move(values));
}

namespace {

struct HeadCache {
  RowMat Q, K, V, A, Z;
};

struct LayerCache {
  RowMat input;       // residual stream entering the layer
  RowMat normed;      // LN(input) (or == input when LN disabled)
  RowMat xhat;        // LN normalized pre-scale values
  Eigen::VectorXd inv_sigma;
  std::vector<HeadCache> heads;
};

struct ForwardCache {
  std::vector<LayerCache> layers;
  RowMat final_input;           // residual stream after the last layer
  Eigen::RowVectorXd final_xhat;  // last row, final LN
  double final_inv_sigma = 1.0;
  Eigen::RowVectorXd final_row;   // normed last row fed to the unembedding
  Eigen::VectorXd probs;
};

void layer_norm_rows(const RowMat& x, const double* g, const double* b, RowMat& out, RowMat& xhat,
                     Eigen::VectorXd& inv_sigma) {
  const auto m = x.rows();
  const auto D = x.cols();
  out.resize(m, D);
  xhat.resize(m, D);
  inv_sigma.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().mean();
    const double inv = 1.0 / std::sqrt(var + kLnEps);
    inv_sigma[i] = inv;
    for (Eigen::Index j = 0; j < D; ++j) {
      const double n = (x(i, j) - mu) * inv;
      xhat(i, j) = n;
      out(i, j) = n * g[j] + b[j];
    }
  }
}

}  // namespace

// Shared forward walk. When `cache` is non-null everything needed for the
// backward pass is retained.
static double forward_one(const ModelConfig& cfg, const Transformer::Offsets& off,
                          const double* p, const Sample& sample, ForwardCache* cache) {
  const int m = static_cast<int>(sample.context.size());
  if (m < 1) throw std::invalid_argument("sample has empty context");
  if (m > cfg.max_context) {
    throw std::invalid_argument("sample context length " + std::to_string(m) +
                                " exceeds max_context " + std::to_string(cfg.max_context));
  }
  if (sample.target < 0 || sample.target >= cfg.vocab_size) {
    throw std::invalid_argument("sample target outside vocabulary");
  }
  const int D = cfg.d_model;
  const int dh = cfg.d_head;
  const int H = cfg.heads_per_layer;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  MapConstMat embed(p + off.embed, cfg.vocab_size, D);
  MapConstMat pos(p + off.pos, cfg.max_context, D);

  RowMat X(m, D);
  for (int i = 0; i < m; ++i) {
    const int tok = sample.context[static_cast<std::size_t>(i)];
    if (tok < 0 || tok >= cfg.vocab_size) {
      throw std::invalid_argument("context token outside vocabulary");
    }
    X.row(i) = embed.row(tok) + pos.row(i);
  }

  if (cache) cache->layers.resize(static_cast<std::size_t>(cfg.n_layers));
  RowMat normed, xhat;
  Eigen::VectorXd inv_sigma;
  for (int l = 0; l < cfg.n_layers; ++l) {
    LayerCache* lc = cache ? &cache->layers[static_cast<std::size_t>(l)] : nullptr;
    if (lc) lc->input = X;
    if (cfg.layernorm) {
      layer_norm_rows(X, p + off.ln_g[l], p + off.ln_b[l], normed, xhat, inv_sigma);
    } else {
      normed = X;
    }
    if (lc) {
      lc->normed = normed;
      if (cfg.layernorm) {
        lc->xhat = xhat;
        lc->inv_sigma = inv_sigma;
      }
      lc->heads.resize(static_cast<std::size_t>(H));
    }
    RowMat attn = RowMat::Zero(m, D);
    for (int h = 0; h < H; ++h) {
      const std::size_t hi = static_cast<std::size_t>(l * H + h);
      MapConstMat Wq(p + off.q[hi], D, dh);
      MapConstMat Wk(p + off.k[hi], D, dh);
      MapConstMat Wv(p + off.v[hi], D, dh);
      MapConstMat Wo(p + off.o[hi], dh, D);
      RowMat Q = normed * Wq;
      RowMat K = normed * Wk;
      RowMat V = normed * Wv;
      RowMat A(m, m);
      for (int i = 0; i < m; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j <= i; ++j) {
          const double s = Q.row(i).dot(K.row(j)) * scale;
          A(i, j) = s;
          mx = std::max(mx, s);
        }
        double denom = 0.0;
        for (int j = 0; j <= i; ++j) {
          A(i, j) = std::exp(A(i, j) - mx);
          denom += A(i, j);
        }
        for (int j = 0; j <= i; ++j) A(i, j) /= denom;
        for (int j = i + 1; j < m; ++j) A(i, j) = 0.0;
      }
      RowMat Z = A * V;
      attn.noalias() += Z * Wo;
      if (lc) {
        HeadCache& hc = lc->heads[static_cast<std::size_t>(h)];
        hc.Q = std::move(Q);
        hc.K = std::move(K);
        hc.V = std::move(V);
        hc.A = std::move(A);
        hc.Z = std::move(Z);
      }
    }
    X += attn;
    if (!X.allFinite()) {
      throw std::runtime_error("non-finite activation in layer " + std::to_string(l));
    }
  }

  // Final norm + unembedding for the last position only.
  Eigen::RowVectorXd last = X.row(m - 1);
  Eigen::RowVectorXd final_xhat;
  double final_inv = 1.0;
  if (cfg.layernorm) {
    const double mu = last.mean();
    const double var = (last.array() - mu).square().mean();
    final_inv = 1.0 / std::sqrt(var + kLnEps);
    final_xhat = (last.array() - mu) * final_inv;
    const double* g = p + off.lnf_g;
    const double* b = p + off.lnf_b;
    for (int j = 0; j < D; ++j) last[j] = final_xhat[j] * g[j] + b[j];
  }
  MapConstMat U(p + off.unembed, D, cfg.vocab_size);
  Eigen::VectorXd logits = (last * U).transpose();
  const double mx = logits.maxCoeff();
  if (!std::isfinite(mx)) throw std::runtime_error("non-finite activation in unembedding");
  const double lse = mx + std::log((logits.array() - mx).exp().sum());
  const double loss = lse - logits[sample.target];

  if (cache) {
    cache->final_input = std::move(X);
    cache->final_xhat = std::move(final_xhat);
    cache->final_inv_sigma = final_inv;
    cache->final_row = std::move(last);
    cache->probs = (logits.array() - lse).exp();
  }
  return loss;
}

double Transformer::sample_loss(const ParamVector& params, const Sample& sample) const {
  return forward_one(config_, *offsets_, params.data(), sample, nullptr);
}

LossRecord Transformer::forward_per_token_loss(const ParamVector& params,
                                               std::span<const Sample> batch) const {
  LossRecord rec;
  rec.per_sample.reserve(batch.size());
  double sum = 0.0;
  for (const auto& s : batch) {
    const double l = forward_one(config_, *offsets_, params.data(), s, nullptr);
    rec.per_sample.push_back(l);
    sum += l;
  }
  rec.mean = batch.empty() ? 0.0 : sum / static_cast<double>(batch.size());
  return rec;
}

void Transformer::backward_sample(const ParamVector& params, const Sample& sample, double weight,
                                  double* grad) const {
  const auto& off = *offsets_;
  const ModelConfig& cfg = config_;
  const double* p = params.data();
  ForwardCache cache;
  forward_one(cfg, off, p, sample, &cache);

  const int m = static_cast<int>(sample.context.size());
  const int D = cfg.d_model;
  const int dh = cfg.d_head;
  const int H = cfg.heads_per_layer;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  // d loss / d logits = softmax(logits) - onehot(target)
  Eigen::VectorXd dlogits = cache.probs;
  dlogits[sample.target] -= 1.0;
  dlogits *= weight;

  MapConstMat U(p + off.unembed, D, cfg.vocab_size);
  MapMat dU(grad + off.unembed, D, cfg.vocab_size);
  dU.noalias() += cache.final_row.transpose() * dlogits.transpose();
  Eigen::RowVectorXd d_last = (U * dlogits).transpose();

  if (cfg.layernorm) {
    const double* g = p + off.lnf_g;
    Eigen::RowVectorXd dxhat(D);
    for (int j = 0; j < D; ++j) {
      grad[off.lnf_g + j] += d_last[j] * cache.final_xhat[j];
      grad[off.lnf_b + j] += d_last[j];
      dxhat[j] = d_last[j] * g[j];
    }
    const double mean_dxhat = dxhat.mean();
    const double mean_dxhat_xhat = (dxhat.array() * cache.final_xhat.array()).mean();
    for (int j = 0; j < D; ++j) {
      d_last[j] = cache.final_inv_sigma *
                  (dxhat[j] - mean_dxhat - cache.final_xhat[j] * mean_dxhat_xhat);
    }
  }

  RowMat dX = RowMat::Zero(m, D);
  dX.row(m - 1) = d_last;

  for (int l = cfg.n_layers - 1; l >= 0; --l) {
    const LayerCache& lc = cache.layers[static_cast<std::size_t>(l)];
    RowMat dN = RowMat::Zero(m, D);
    for (int h = 0; h < H; ++h) {
      const std::size_t hi = static_cast<std::size_t>(l * H + h);
      const HeadCache& hc = lc.heads[static_cast<std::size_t>(h)];
      MapConstMat Wq(p + off.q[hi], D, dh);
      MapConstMat Wk(p + off.k[hi], D, dh);
      MapConstMat Wv(p + off.v[hi], D, dh);
      MapConstMat Wo(p + off.o[hi], dh, D);
      MapMat dWq(grad + off.q[hi], D, dh);
      MapMat dWk(grad + off.k[hi], D, dh);
      MapMat dWv(grad + off.v[hi], D, dh);
      MapMat dWo(grad + off.o[hi], dh, D);

      dWo.noalias() += hc.Z.transpose() * dX;
      RowMat dZ = dX * Wo.transpose();
      RowMat dA = dZ * hc.V.transpose();
      RowMat dV = hc.A.transpose() * dZ;
      RowMat dS(m, m);
      for (int i = 0; i < m; ++i) {
        double dot = 0.0;
        for (int j = 0; j <= i; ++j) dot += dA(i, j) * hc.A(i, j);
        for (int j = 0; j <= i; ++j) dS(i, j) = hc.A(i, j) * (dA(i, j) - dot);
        for (int j = i + 1; j < m; ++j) dS(i, j) = 0.0;
      }
      RowMat dQ = (dS * hc.K) * scale;
      RowMat dK = (dS.transpose() * hc.Q) * scale;
      dWq.noalias() += lc.normed.transpose() * dQ;
      dWk.noalias() += lc.normed.transpose() * dK;
      dWv.noalias() += lc.normed.transpose() * dV;
      dN.noalias() += dQ * Wq.transpose();
      dN.noalias() += dK * Wk.transpose();
      dN.noalias() += dV * Wv.transpose();
    }
    if (cfg.layernorm) {
      const double* g = p + off.ln_g[l];
      for (int i = 0; i < m; ++i) {
        Eigen::RowVectorXd dxhat(D);
        for (int j = 0; j < D; ++j) {
          grad[off.ln_g[l] + j] += dN(i, j) * lc.xhat(i, j);
          grad[off.ln_b[l] + j] += dN(i, j);
          dxhat[j] = dN(i, j) * g[j];
        }
        const double mean_dxhat = dxhat.mean();
        const double mean_dxhat_xhat = (dxhat.array() * lc.xhat.row(i).array()).mean();
        for (int j = 0; j < D; ++j) {
          dX(i, j) += lc.inv_sigma[i] *
                      (dxhat[j] - mean_dxhat - lc.xhat(i, j) * mean_dxhat_xhat);
        }
      }
    } else {
      dX += dN;
    }
  }

  MapMat dEmbed(grad + off.embed, cfg.vocab_size, D);
  MapMat dPos(grad + off.pos, cfg.max_context, D);
  for (int i = 0; i < m; ++i) {
    dEmbed.row(sample.context[static_cast<std::size_t>(i)]) += dX.row(i);
    dPos.row(i) += dX.row(i);
  }
}

ParamVector Transformer::grad_loss(const ParamVector& params, std::span<const Sample> batch,
                                   int threads) const {
  if (batch.empty()) throw std::invalid_argument("grad_loss: empty batch");
  const double weight = 1.0 / static_cast<double>(batch.size());
  std::vector<double> grad(param_count_, 0.0);
  if (threads <= 1 || batch.size() == 1) {
    for (const auto& s : batch) backward_sample(params, s, weight, grad.data());
  } else {
    const int workers = std::min<int>(threads, static_cast<int>(batch.size()));
    std::vector<std::vector<double>> partial(
        static_cast<std::size_t>(workers), std::vector<double>(param_count_, 0.0));
    parallel_for(
        static_cast<std::size_t>(workers),
        [&](std::size_t w) {
          const std::size_t begin = batch.size() * w / static_cast<std::size_t>(workers);
          const std::size_t end = batch.size() * (w + 1) / static_cast<std::size_t>(workers);
          for (std::size_t i = begin; i < end; ++i) {
            backward_sample(params, batch[i], weight, partial[w].data());
          }
        },
        workers);
    for (int w = 0; w < workers; ++w) {
      for (std::size_t i = 0; i < param_count_; ++i) grad[i] += partial[w][i];
    }
  }
  return ParamVector(segments_, std::move(grad));
}

ComponentSpec Transformer::head_component(int layer, int head) const {
  if (layer < 0 || layer >= config_.n_layers || head < 0 || head >= config_.heads_per_layer) {
    throw std::out_of_range("head_component: layer " + std::to_string(layer) + " head " +
                            std::to_string(head) + " out of range");
  }
  const auto& off = *offsets_;
  const std::size_t hi = static_cast<std::size_t>(layer * config_.heads_per_layer + head);
  const std::size_t qkv = static_cast<std::size_t>(config_.d_model) *
                          static_cast<std::size_t>(config_.d_head);
  ComponentSpec spec;
  spec.name = std::to_string(layer) + ":" + std::to_string(head);
  spec.indices.reserve(4 * qkv);
  for (const std::size_t base : {off.q[hi], off.k[hi], off.v[hi], off.o[hi]}) {
    for (std::size_t i = 0; i < qkv; ++i) spec.indices.push_back(base + i);
  }
  return spec;
}

std::vector<ComponentSpec> Transformer::all_head_components() const {
  std::vector<ComponentSpec> specs;
  specs.reserve(static_cast<std::size_t>(config_.n_layers * config_.heads_per_layer));
  for (int l = 0; l < config_.n_layers; ++l) {
    for (int h = 0; h < config_.heads_per_layer; ++h) specs.push_back(head_component(l, h));
  }
  return specs;
}

std::vector<std::string> Transformer::component_names() const {
  std::vector<std::string> names;
  for (int l = 0; l < config_.n_layers; ++l) {
    for (int h = 0; h < config_.heads_per_layer; ++h) {
      names.push_back(std::to_string(l) + ":" + std::to_string(h));
    }
  }
  return names;
}

}  // namespace atlas
