#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "xrisk/common.hpp"
#include "xrisk/encode.hpp"
#include "xrisk/tensor.hpp"

namespace xrisk {

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kInitStddev = 0.02;

// BERT-style post-layer-norm encoder: learned positions, GELU feed-forward,
// no segment embeddings (inputs are single sentences).
struct EncoderConfig {
  std::size_t d_model = 768;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t d_ff = 1024;
  std::size_t max_tokens = 64;  // T
  std::size_t vocab_size = 8000;
  double dropout = 0.1;
  // layer whose attention feeds the summed word attention; -1 = final
  int summed_attention_layer = -1;
  std::uint64_t seed = 0;

  std::size_t head_dim() const { return d_model / n_heads; }

  void validate() const {
    if (d_model < 1) throw ConfigError("d_model must be at least 1");
    if (n_layers < 1) throw ConfigError("n_layers must be at least 1");
    if (n_heads < 1) throw ConfigError("n_heads must be at least 1");
    if (d_model % n_heads != 0)
      throw ConfigError("d_model must be divisible by n_heads");
    if (d_ff < 1) throw ConfigError("d_ff must be at least 1");
    if (max_tokens < 2) throw ConfigError("max_tokens must be at least 2");
    if (vocab_size < 4) throw ConfigError("vocab_size must be at least 4");
    if (dropout < 0.0 || dropout >= 1.0)
      throw ConfigError("dropout must lie in [0,1)");
    if (summed_attention_layer != -1 &&
        (summed_attention_layer < 0 ||
         static_cast<std::size_t>(summed_attention_layer) >= n_layers))
      throw ConfigError("summed_attention_layer out of range");
  }
};

template <class T>
struct EncoderLayerParams {
  Tensor<T> wq, bq, wk, bk, wv, bv;  // (d,d) and (d)
  Tensor<T> wo, bo;                  // (d,d) and (d)
  Tensor<T> ln1_gain, ln1_bias;      // (d)
  Tensor<T> w1, b1;                  // (d,dff), (dff)
  Tensor<T> w2, b2;                  // (dff,d), (d)
  Tensor<T> ln2_gain, ln2_bias;      // (d)
};

template <class T>
struct EncoderParams {
  Tensor<T> token_embedding;     // (V,d)
  Tensor<T> position_embedding;  // (T,d)
  std::vector<EncoderLayerParams<T>> layers;

  static EncoderParams zeros(const EncoderConfig& cfg) {
    EncoderParams p;
    const auto d = cfg.d_model, f = cfg.d_ff;
    p.token_embedding = Tensor<T>({cfg.vocab_size, d});
    p.position_embedding = Tensor<T>({cfg.max_tokens, d});
    p.layers.resize(cfg.n_layers);
    for (auto& l : p.layers) {
      l.wq = Tensor<T>({d, d});
      l.bq = Tensor<T>({d});
      l.wk = Tensor<T>({d, d});
      l.bk = Tensor<T>({d});
      l.wv = Tensor<T>({d, d});
      l.bv = Tensor<T>({d});
      l.wo = Tensor<T>({d, d});
      l.bo = Tensor<T>({d});
      l.ln1_gain = Tensor<T>({d});
      l.ln1_bias = Tensor<T>({d});
      l.w1 = Tensor<T>({d, f});
      l.b1 = Tensor<T>({f});
      l.w2 = Tensor<T>({f, d});
      l.b2 = Tensor<T>({d});
      l.ln2_gain = Tensor<T>({d});
      l.ln2_bias = Tensor<T>({d});
    }
    return p;
  }

  // visitation order is fixed; checkpoints and the optimizer rely on it
  template <class F>
  void for_each(F&& f) {
    f("encoder.token_embedding", token_embedding);
    f("encoder.position_embedding", position_embedding);
    for (std::size_t i = 0; i < layers.size(); ++i) {
      auto& l = layers[i];
      const std::string p = "encoder.layer" + std::to_string(i) + ".";
      f(p + "attn.q_weight", l.wq);
      f(p + "attn.q_bias", l.bq);
      f(p + "attn.k_weight", l.wk);
      f(p + "attn.k_bias", l.bk);
      f(p + "attn.v_weight", l.wv);
      f(p + "attn.v_bias", l.bv);
      f(p + "attn.out_weight", l.wo);
      f(p + "attn.out_bias", l.bo);
      f(p + "ln1.gain", l.ln1_gain);
      f(p + "ln1.bias", l.ln1_bias);
      f(p + "ffn.w1", l.w1);
      f(p + "ffn.b1", l.b1);
      f(p + "ffn.w2", l.w2);
      f(p + "ffn.b2", l.b2);
      f(p + "ln2.gain", l.ln2_gain);
      f(p + "ln2.bias", l.ln2_bias);
    }
  }
};

namespace detail {

template <class T>
inline void init_normal(Tensor<T>& t, Rng& rng, double stddev) {
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<T>(rng.normal(0.0, stddev));
}

template <class T>
inline T gelu(T x) {
  return static_cast<T>(0.5) * x *
         (static_cast<T>(1) + static_cast<T>(std::erf(static_cast<double>(x) / M_SQRT2)));
}

template <class T>
inline T gelu_grad(T x) {
  double xd = static_cast<double>(x);
  double phi = std::exp(-0.5 * xd * xd) / std::sqrt(2.0 * M_PI);
  double Phi = 0.5 * (1.0 + std::erf(xd / M_SQRT2));
  return static_cast<T>(Phi + xd * phi);
}

// y = gain * (x - mu) * rstd + bias, per row
template <class T>
inline void layer_norm_row(const T* x, std::size_t d, const Tensor<T>& gain,
                           const Tensor<T>& bias, T* y, T& mu_out, T& rstd_out) {
  T mu = T{};
  for (std::size_t i = 0; i < d; ++i) mu += x[i];
  mu /= static_cast<T>(d);
  T var = T{};
  for (std::size_t i = 0; i < d; ++i) {
    T c = x[i] - mu;
    var += c * c;
  }
  var /= static_cast<T>(d);
  T rstd = static_cast<T>(1.0 / std::sqrt(static_cast<double>(var) + kLayerNormEps));
  for (std::size_t i = 0; i < d; ++i) y[i] = gain[i] * (x[i] - mu) * rstd + bias[i];
  mu_out = mu;
  rstd_out = rstd;
}

// dx from dy with cached statistics; accumulates dgain/dbias
template <class T>
inline void layer_norm_row_backward(const T* x, std::size_t d, T mu, T rstd,
                                    const Tensor<T>& gain, const T* dy, T* dx,
                                    Tensor<T>& dgain, Tensor<T>& dbias) {
  T mean_dyg = T{}, mean_dyg_xhat = T{};
  for (std::size_t i = 0; i < d; ++i) {
    T xhat = (x[i] - mu) * rstd;
    T dyg = dy[i] * gain[i];
    dgain[i] += dy[i] * xhat;
    dbias[i] += dy[i];
    mean_dyg += dyg;
    mean_dyg_xhat += dyg * xhat;
  }
  mean_dyg /= static_cast<T>(d);
  mean_dyg_xhat /= static_cast<T>(d);
  for (std::size_t i = 0; i < d; ++i) {
    T xhat = (x[i] - mu) * rstd;
    T dyg = dy[i] * gain[i];
    dx[i] += rstd * (dyg - mean_dyg - xhat * mean_dyg_xhat);
  }
}

// Inverted dropout mask: 1/(1-p) for kept entries, 0 for dropped.
template <class T>
inline Tensor<T> dropout_mask(const std::vector<std::size_t>& shape, double p,
                              Rng& rng) {
  Tensor<T> mask(shape);
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  for (std::size_t i = 0; i < mask.size(); ++i)
    mask[i] = rng.uniform_real() < p ? T{} : keep_scale;
  return mask;
}

}  // namespace detail

template <class T>
inline EncoderParams<T> init_encoder_params(const EncoderConfig& cfg, Rng& rng) {
  cfg.validate();
  auto p = EncoderParams<T>::zeros(cfg);
  p.for_each([&](const std::string& name, Tensor<T>& t) {
    if (name.find("ln") != std::string::npos) {
      if (name.ends_with("gain")) t.fill(static_cast<T>(1));
      return;  // ln biases stay zero
    }
    if (name.ends_with("bias") || name.ends_with("b1") || name.ends_with("b2"))
      return;  // biases stay zero
    detail::init_normal(t, rng, kInitStddev);
  });
  return p;
}

template <class T>
struct EncoderLayerCache {
  Tensor<T> x_in;                 // (T,d)
  Tensor<T> q, k, v;              // (T,d)
  std::vector<Tensor<T>> attn;    // per head (T,T); zero at invalid keys
  Tensor<T> attn_concat;          // (T,d)
  Tensor<T> proj;                 // (T,d) after dropout
  Tensor<T> proj_mask;            // dropout scales; empty when inactive
  Tensor<T> r1;                   // residual sum before LN1
  std::vector<T> mu1, rstd1;
  Tensor<T> x1;                   // (T,d)
  Tensor<T> ff_pre;               // (T,dff)
  Tensor<T> ff_act;               // (T,dff)
  Tensor<T> ff_out;               // (T,d) after dropout
  Tensor<T> ff_mask;
  Tensor<T> r2;
  std::vector<T> mu2, rstd2;
  Tensor<T> x_out;                // (T,d)
};

template <class T>
struct EncoderForward {
  std::vector<int> token_ids;
  std::vector<int> mask;
  int n_real = 0;
  Tensor<T> embedded;             // (T,d) after dropout
  Tensor<T> emb_mask;
  std::vector<EncoderLayerCache<T>> layers;

  const Tensor<T>& token_states() const { return layers.back().x_out; }
  const Tensor<T>& attention(std::size_t layer, std::size_t head) const {
    return layers[layer].attn[head];
  }
};

// Full forward pass for one tokenized sentence. Masked positions never
// receive attention; their own rows are still well defined. Pass a dropout
// rng only in training.
template <class T>
inline EncoderForward<T> encoder_forward(const TokenizedSentence& sentence,
                                         const EncoderParams<T>& params,
                                         const EncoderConfig& cfg,
                                         bool train_mode = false,
                                         Rng* dropout_rng = nullptr) {
  const std::size_t n_tok = cfg.max_tokens, d = cfg.d_model;
  const std::size_t heads = cfg.n_heads, dk = cfg.head_dim();
  if (sentence.token_ids.size() != n_tok)
    throw InputError("encoder_forward: sentence length " +
                     std::to_string(sentence.token_ids.size()) +
                     " does not match max_tokens " + std::to_string(n_tok));
  for (int id : sentence.token_ids)
    if (id < 0 || static_cast<std::size_t>(id) >= cfg.vocab_size)
      throw InputError("encoder_forward: token id " + std::to_string(id) +
                       " out of range for vocab_size " +
                       std::to_string(cfg.vocab_size));
  bool any_valid = false;
  for (int m : sentence.attention_mask) any_valid |= m != 0;
  if (!any_valid)
    throw InputError("encoder_forward: sentence has no valid tokens");

  const bool use_dropout = train_mode && cfg.dropout > 0.0;
  if (use_dropout && !dropout_rng)
    throw InputError("encoder_forward: dropout requires an rng in train mode");

  EncoderForward<T> fwd;
  fwd.token_ids = sentence.token_ids;
  fwd.mask = sentence.attention_mask;
  fwd.n_real = sentence.n_real;

  fwd.embedded = Tensor<T>({n_tok, d});
  for (std::size_t t = 0; t < n_tok; ++t) {
    const T* tok = params.token_embedding.row(
        static_cast<std::size_t>(sentence.token_ids[t]));
    const T* pos = params.position_embedding.row(t);
    T* out = fwd.embedded.row(t);
    for (std::size_t i = 0; i < d; ++i) out[i] = tok[i] + pos[i];
  }
  if (use_dropout) {
    fwd.emb_mask = detail::dropout_mask<T>({n_tok, d}, cfg.dropout, *dropout_rng);
    for (std::size_t i = 0; i < fwd.embedded.size(); ++i)
      fwd.embedded[i] *= fwd.emb_mask[i];
  }

  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dk)));
  const Tensor<T>* x = &fwd.embedded;
  fwd.layers.resize(cfg.n_layers);
  for (std::size_t li = 0; li < cfg.n_layers; ++li) {
    const auto& lp = params.layers[li];
    auto& lc = fwd.layers[li];
    lc.x_in = *x;

    lc.q = Tensor<T>({n_tok, d});
    lc.k = Tensor<T>({n_tok, d});
    lc.v = Tensor<T>({n_tok, d});
    matmul_bias(lc.x_in, lp.wq, lp.bq.data(), lc.q);
    matmul_bias(lc.x_in, lp.wk, lp.bk.data(), lc.k);
    matmul_bias(lc.x_in, lp.wv, lp.bv.data(), lc.v);

    lc.attn.assign(heads, Tensor<T>({n_tok, n_tok}));
    lc.attn_concat = Tensor<T>({n_tok, d});
    std::vector<T> scores(n_tok);
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = h * dk;
      auto& a = lc.attn[h];
      for (std::size_t i = 0; i < n_tok; ++i) {
        T maxv = std::numeric_limits<T>::lowest();
        for (std::size_t j = 0; j < n_tok; ++j) {
          if (!fwd.mask[j]) continue;
          scores[j] = scale * dot(lc.q.row(i) + off, lc.k.row(j) + off, dk);
          maxv = std::max(maxv, scores[j]);
        }
        T denom = T{};
        for (std::size_t j = 0; j < n_tok; ++j) {
          if (!fwd.mask[j]) continue;
          scores[j] = static_cast<T>(std::exp(static_cast<double>(scores[j] - maxv)));
          denom += scores[j];
        }
        T* arow = a.row(i);
        T* orow = lc.attn_concat.row(i) + off;
        for (std::size_t j = 0; j < n_tok; ++j) {
          if (!fwd.mask[j]) continue;
          arow[j] = scores[j] / denom;
          axpy(arow[j], lc.v.row(j) + off, orow, dk);
        }
      }
    }

    lc.proj = Tensor<T>({n_tok, d});
    matmul_bias(lc.attn_concat, lp.wo, lp.bo.data(), lc.proj);
    if (use_dropout) {
      lc.proj_mask = detail::dropout_mask<T>({n_tok, d}, cfg.dropout, *dropout_rng);
      for (std::size_t i = 0; i < lc.proj.size(); ++i)
        lc.proj[i] *= lc.proj_mask[i];
    }

    lc.r1 = Tensor<T>({n_tok, d});
    for (std::size_t i = 0; i < lc.r1.size(); ++i)
      lc.r1[i] = lc.x_in[i] + lc.proj[i];
    lc.x1 = Tensor<T>({n_tok, d});
    lc.mu1.resize(n_tok);
    lc.rstd1.resize(n_tok);
    for (std::size_t t = 0; t < n_tok; ++t)
      detail::layer_norm_row(lc.r1.row(t), d, lp.ln1_gain, lp.ln1_bias,
                             lc.x1.row(t), lc.mu1[t], lc.rstd1[t]);

    lc.ff_pre = Tensor<T>({n_tok, cfg.d_ff});
    matmul_bias(lc.x1, lp.w1, lp.b1.data(), lc.ff_pre);
    lc.ff_act = Tensor<T>({n_tok, cfg.d_ff});
    for (std::size_t i = 0; i < lc.ff_pre.size(); ++i)
      lc.ff_act[i] = detail::gelu(lc.ff_pre[i]);
    lc.ff_out = Tensor<T>({n_tok, d});
    matmul_bias(lc.ff_act, lp.w2, lp.b2.data(), lc.ff_out);
    if (use_dropout) {
      lc.ff_mask = detail::dropout_mask<T>({n_tok, d}, cfg.dropout, *dropout_rng);
      for (std::size_t i = 0; i < lc.ff_out.size(); ++i)
        lc.ff_out[i] *= lc.ff_mask[i];
    }

    lc.r2 = Tensor<T>({n_tok, d});
    for (std::size_t i = 0; i < lc.r2.size(); ++i)
      lc.r2[i] = lc.x1[i] + lc.ff_out[i];
    lc.x_out = Tensor<T>({n_tok, d});
    lc.mu2.resize(n_tok);
    lc.rstd2.resize(n_tok);
    for (std::size_t t = 0; t < n_tok; ++t)
      detail::layer_norm_row(lc.r2.row(t), d, lp.ln2_gain, lp.ln2_bias,
                             lc.x_out.row(t), lc.mu2[t], lc.rstd2[t]);

    x = &lc.x_out;
    for (std::size_t i = 0; i < lc.x_out.size(); ++i)
      if (!std::isfinite(static_cast<double>(lc.x_out[i])))
        throw NumericError("encoder_forward: non-finite activation in layer " +
                           std::to_string(li));
  }
  return fwd;
}

// The [CLS] slot is position 0 by construction.
template <class T>
inline std::vector<T> cls_embedding(const Tensor<T>& token_states) {
  return std::vector<T>(token_states.row(0), token_states.row(0) + token_states.cols());
}

// Attention received per token: pick one layer, average heads, then sum the
// head-averaged matrix over valid query positions. Masked keys get 0. Over
// valid tokens the values average to 1, which is what makes the 1.1 word
// cutoff meaningful.
template <class T>
inline std::vector<double> summed_word_attention(const EncoderForward<T>& fwd,
                                                 const EncoderConfig& cfg) {
  const std::size_t n_tok = cfg.max_tokens;
  const std::size_t layer =
      cfg.summed_attention_layer < 0
          ? cfg.n_layers - 1
          : static_cast<std::size_t>(cfg.summed_attention_layer);
  std::vector<double> sums(n_tok, 0.0);
  const auto& lc = fwd.layers[layer];
  const double head_scale = 1.0 / static_cast<double>(cfg.n_heads);
  for (std::size_t h = 0; h < cfg.n_heads; ++h) {
    const auto& a = lc.attn[h];
    for (std::size_t i = 0; i < n_tok; ++i) {
      if (!fwd.mask[i]) continue;  // padded queries are excluded
      const T* arow = a.row(i);
      for (std::size_t j = 0; j < n_tok; ++j)
        if (fwd.mask[j]) sums[j] += head_scale * static_cast<double>(arow[j]);
    }
  }
  return sums;
}

// Backward through the whole encoder stack. d_states is the gradient with
// respect to the final token states; gradients accumulate into `grads`.
template <class T>
inline void encoder_backward(const EncoderForward<T>& fwd,
                             const EncoderParams<T>& params,
                             const EncoderConfig& cfg,
                             const Tensor<T>& d_states,
                             EncoderParams<T>& grads) {
  const std::size_t n_tok = cfg.max_tokens, d = cfg.d_model;
  const std::size_t heads = cfg.n_heads, dk = cfg.head_dim();
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dk)));

  Tensor<T> dx = d_states;  // gradient w.r.t. current layer output
  for (std::size_t li = cfg.n_layers; li-- > 0;) {
    const auto& lp = params.layers[li];
    const auto& lc = fwd.layers[li];
    auto& lg = grads.layers[li];

    // LN2
    Tensor<T> dr2({n_tok, d});
    for (std::size_t t = 0; t < n_tok; ++t)
      detail::layer_norm_row_backward(lc.r2.row(t), d, lc.mu2[t], lc.rstd2[t],
                                      lp.ln2_gain, dx.row(t), dr2.row(t),
                                      lg.ln2_gain, lg.ln2_bias);

    // r2 = x1 + dropout(ff_out_raw)
    Tensor<T> dff_out = dr2;
    if (lc.ff_mask.size())
      for (std::size_t i = 0; i < dff_out.size(); ++i)
        dff_out[i] *= lc.ff_mask[i];
    Tensor<T> dx1 = dr2;

    // ff_out = gelu(ff_pre) . w2 + b2
    Tensor<T> dff_act({n_tok, cfg.d_ff});
    matmul_bias_backward(lc.ff_act, lp.w2, dff_out, dff_act, lg.w2,
                         lg.b2.data());
    Tensor<T> dff_pre({n_tok, cfg.d_ff});
    for (std::size_t i = 0; i < dff_pre.size(); ++i)
      dff_pre[i] = dff_act[i] * detail::gelu_grad(lc.ff_pre[i]);
    matmul_bias_backward(lc.x1, lp.w1, dff_pre, dx1, lg.w1, lg.b1.data());

    // LN1
    Tensor<T> dr1({n_tok, d});
    for (std::size_t t = 0; t < n_tok; ++t)
      detail::layer_norm_row_backward(lc.r1.row(t), d, lc.mu1[t], lc.rstd1[t],
                                      lp.ln1_gain, dx1.row(t), dr1.row(t),
                                      lg.ln1_gain, lg.ln1_bias);

    // r1 = x_in + dropout(proj_raw)
    Tensor<T> dproj = dr1;
    if (lc.proj_mask.size())
      for (std::size_t i = 0; i < dproj.size(); ++i)
        dproj[i] *= lc.proj_mask[i];
    Tensor<T> dx_in = dr1;

    // proj = attn_concat . wo + bo
    Tensor<T> dconcat({n_tok, d});
    matmul_bias_backward(lc.attn_concat, lp.wo, dproj, dconcat, lg.wo,
                         lg.bo.data());

    // attention heads
    Tensor<T> dq({n_tok, d}), dkt({n_tok, d}), dv({n_tok, d});
    std::vector<T> da(n_tok), ds(n_tok);
    for (std::size_t h = 0; h < heads; ++h) {
      const std::size_t off = h * dk;
      const auto& a = lc.attn[h];
      for (std::size_t i = 0; i < n_tok; ++i) {
        const T* arow = a.row(i);
        const T* do_row = dconcat.row(i) + off;
        // dA[i,j] = dO[i] . V[j]; dV[j] += A[i,j] dO[i]
        T dot_da_a = T{};
        for (std::size_t j = 0; j < n_tok; ++j) {
          if (!fwd.mask[j]) continue;
          da[j] = dot(do_row, lc.v.row(j) + off, dk);
          axpy(arow[j], do_row, dv.row(j) + off, dk);
          dot_da_a += da[j] * arow[j];
        }
        // softmax backward, then scores
        for (std::size_t j = 0; j < n_tok; ++j) {
          if (!fwd.mask[j]) continue;
          ds[j] = arow[j] * (da[j] - dot_da_a);
          if (ds[j] == T{}) continue;
          axpy(ds[j] * scale, lc.k.row(j) + off, dq.row(i) + off, dk);
          axpy(ds[j] * scale, lc.q.row(i) + off, dkt.row(j) + off, dk);
        }
      }
    }
    matmul_bias_backward(lc.x_in, lp.wq, dq, dx_in, lg.wq, lg.bq.data());
    matmul_bias_backward(lc.x_in, lp.wk, dkt, dx_in, lg.wk, lg.bk.data());
    matmul_bias_backward(lc.x_in, lp.wv, dv, dx_in, lg.wv, lg.bv.data());

    dx = std::move(dx_in);
  }

  // embeddings
  if (fwd.emb_mask.size())
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= fwd.emb_mask[i];
  for (std::size_t t = 0; t < n_tok; ++t) {
    T* dtok = grads.token_embedding.row(
        static_cast<std::size_t>(fwd.token_ids[t]));
    T* dpos = grads.position_embedding.row(t);
    const T* g = dx.row(t);
    for (std::size_t i = 0; i < d; ++i) {
      dtok[i] += g[i];
      dpos[i] += g[i];
    }
  }
}

}  // namespace xrisk
