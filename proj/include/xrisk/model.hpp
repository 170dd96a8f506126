#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "xrisk/encoder.hpp"
#include "xrisk/labeling.hpp"
#include "xrisk/tensor.hpp"
#include "xrisk/vocab.hpp"

namespace xrisk {

struct ModelConfig {
  EncoderConfig encoder;
  std::size_t max_sentences = 50;  // L
  std::size_t attention_dim = 100; // a
  std::uint64_t seed = 0;

  // GRU hidden size equals d_model, so the concatenated encoding has
  // width 2*d_model.
  std::size_t gru_hidden() const { return encoder.d_model; }
  std::size_t context_dim() const { return 2 * encoder.d_model; }

  void validate() const {
    encoder.validate();
    if (max_sentences < 1) throw ConfigError("max_sentences must be at least 1");
    if (attention_dim < 1) throw ConfigError("attention_dim must be at least 1");
  }
};

template <class T>
struct GruDirectionParams {
  Tensor<T> wz, uz, bz;  // update gate: (d,h), (h,h), (h)
  Tensor<T> wr, ur, br;  // reset gate
  Tensor<T> wh, uh, bh;  // candidate

  static GruDirectionParams zeros(std::size_t d, std::size_t h) {
    GruDirectionParams p;
    p.wz = Tensor<T>({d, h});
    p.uz = Tensor<T>({h, h});
    p.bz = Tensor<T>({h});
    p.wr = Tensor<T>({d, h});
    p.ur = Tensor<T>({h, h});
    p.br = Tensor<T>({h});
    p.wh = Tensor<T>({d, h});
    p.uh = Tensor<T>({h, h});
    p.bh = Tensor<T>({h});
    return p;
  }

  template <class F>
  void for_each(const std::string& prefix, F&& f) {
    f(prefix + "w_update", wz);
    f(prefix + "u_update", uz);
    f(prefix + "b_update", bz);
    f(prefix + "w_reset", wr);
    f(prefix + "u_reset", ur);
    f(prefix + "b_reset", br);
    f(prefix + "w_candidate", wh);
    f(prefix + "u_candidate", uh);
    f(prefix + "b_candidate", bh);
  }
};

template <class T>
struct AttentionParams {
  Tensor<T> w;  // (2m, a)
  Tensor<T> b;  // (a)
  Tensor<T> u;  // (a)
};

template <class T>
struct ClassifierParams {
  Tensor<T> w;  // (2m)
  Tensor<T> b;  // (1)
};

template <class T>
struct ModelParams {
  EncoderParams<T> encoder;
  GruDirectionParams<T> gru_fwd, gru_bwd;
  AttentionParams<T> attention;
  ClassifierParams<T> classifier;

  static ModelParams zeros(const ModelConfig& cfg) {
    ModelParams p;
    p.encoder = EncoderParams<T>::zeros(cfg.encoder);
    p.gru_fwd = GruDirectionParams<T>::zeros(cfg.encoder.d_model, cfg.gru_hidden());
    p.gru_bwd = GruDirectionParams<T>::zeros(cfg.encoder.d_model, cfg.gru_hidden());
    p.attention.w = Tensor<T>({cfg.context_dim(), cfg.attention_dim});
    p.attention.b = Tensor<T>({cfg.attention_dim});
    p.attention.u = Tensor<T>({cfg.attention_dim});
    p.classifier.w = Tensor<T>({cfg.context_dim()});
    p.classifier.b = Tensor<T>({1});
    return p;
  }

  template <class F>
  void for_each(F&& f) {
    encoder.for_each(f);
    gru_fwd.for_each("gru.forward.", f);
    gru_bwd.for_each("gru.backward.", f);
    f("attention.w", attention.w);
    f("attention.b", attention.b);
    f("attention.u", attention.u);
    f("classifier.weight", classifier.w);
    f("classifier.bias", classifier.b);
  }

  // fixed traversal order keeps initialization reproducible
  static ModelParams init(const ModelConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    ModelParams p = zeros(cfg);
    p.for_each([&](const std::string& name, Tensor<T>& t) {
      bool is_bias = name.find(".b_") != std::string::npos ||
                     name.ends_with("bias") || name.ends_with(".b") ||
                     name.ends_with("b1") || name.ends_with("b2");
      bool is_gain = name.ends_with("gain");
      if (is_gain) {
        t.fill(static_cast<T>(1));
      } else if (!is_bias) {
        detail::init_normal(t, rng, kInitStddev);
      }
    });
    return p;
  }
};

namespace detail {

template <class T>
inline T sigmoid(T x) {
  return static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(x))));
}

}  // namespace detail

template <class T>
struct GruStepCache {
  std::vector<T> h_prev, z, r, hcand, h_new;
};

// z = sig(Wz x + Uz h + bz); r = sig(Wr x + Ur h + br)
// hcand = tanh(Wh x + Uh (r*h) + bh); h' = (1-z)*h + z*hcand
template <class T>
inline std::vector<T> gru_cell(const T* x, const std::vector<T>& h_prev,
                               const GruDirectionParams<T>& p,
                               GruStepCache<T>* cache = nullptr) {
  const std::size_t h = p.uz.rows();
  std::vector<T> z(h), r(h), hcand(h), gate(h), rh(h);

  vecmat(x, p.wz, p.bz.data(), z.data());
  vecmat(h_prev.data(), p.uz, nullptr, gate.data());
  for (std::size_t i = 0; i < h; ++i) z[i] = detail::sigmoid(z[i] + gate[i]);

  vecmat(x, p.wr, p.br.data(), r.data());
  vecmat(h_prev.data(), p.ur, nullptr, gate.data());
  for (std::size_t i = 0; i < h; ++i) r[i] = detail::sigmoid(r[i] + gate[i]);

  for (std::size_t i = 0; i < h; ++i) rh[i] = r[i] * h_prev[i];
  vecmat(x, p.wh, p.bh.data(), hcand.data());
  vecmat(rh.data(), p.uh, nullptr, gate.data());
  for (std::size_t i = 0; i < h; ++i)
    hcand[i] = static_cast<T>(std::tanh(static_cast<double>(hcand[i] + gate[i])));

  std::vector<T> h_new(h);
  for (std::size_t i = 0; i < h; ++i) {
    h_new[i] = (static_cast<T>(1) - z[i]) * h_prev[i] + z[i] * hcand[i];
    if (!std::isfinite(static_cast<double>(h_new[i])))
      throw NumericError("gru_cell produced a non-finite state");
  }
  if (cache) {
    cache->h_prev = h_prev;
    cache->z = z;
    cache->r = r;
    cache->hcand = hcand;
    cache->h_new = h_new;
  }
  return h_new;
}

// Accumulates parameter gradients, the input gradient dx, and returns the
// gradient w.r.t. the previous hidden state.
template <class T>
inline std::vector<T> gru_cell_backward(const T* x, const GruStepCache<T>& c,
                                        const GruDirectionParams<T>& p,
                                        const std::vector<T>& dh_new,
                                        GruDirectionParams<T>& g, T* dx) {
  const std::size_t h = c.h_prev.size();
  std::vector<T> dh_prev(h), dz(h), dhcand(h), dz_pre(h), dr_pre(h),
      dhcand_pre(h), drh(h), rh(h);

  for (std::size_t i = 0; i < h; ++i) {
    dz[i] = dh_new[i] * (c.hcand[i] - c.h_prev[i]);
    dhcand[i] = dh_new[i] * c.z[i];
    dh_prev[i] = dh_new[i] * (static_cast<T>(1) - c.z[i]);
    dhcand_pre[i] = dhcand[i] * (static_cast<T>(1) - c.hcand[i] * c.hcand[i]);
    dz_pre[i] = dz[i] * c.z[i] * (static_cast<T>(1) - c.z[i]);
    rh[i] = c.r[i] * c.h_prev[i];
  }

  // candidate path
  drh.assign(h, T{});
  vecmat_backward(x, p.wh, dhcand_pre.data(), g.wh, g.bh.data(), dx);
  vecmat_backward(rh.data(), p.uh, dhcand_pre.data(), g.uh, nullptr, drh.data());
  std::vector<T> dr(h);
  for (std::size_t i = 0; i < h; ++i) {
    dr[i] = drh[i] * c.h_prev[i];
    dh_prev[i] += drh[i] * c.r[i];
    dr_pre[i] = dr[i] * c.r[i] * (static_cast<T>(1) - c.r[i]);
  }

  // gates
  vecmat_backward(x, p.wz, dz_pre.data(), g.wz, g.bz.data(), dx);
  vecmat_backward(c.h_prev.data(), p.uz, dz_pre.data(), g.uz, nullptr,
                  dh_prev.data());
  vecmat_backward(x, p.wr, dr_pre.data(), g.wr, g.br.data(), dx);
  vecmat_backward(c.h_prev.data(), p.ur, dr_pre.data(), g.ur, nullptr,
                  dh_prev.data());
  return dh_prev;
}

template <class T>
struct BiGruForward {
  std::size_t n_real = 0;
  Tensor<T> context;  // (L, 2m); zero rows for padded sentences
  std::vector<GruStepCache<T>> fwd_steps, bwd_steps;
};

// Recurrence runs over real sentences only: the forward direction
// left-to-right, the backward direction right-to-left. Padded rows stay 0.
template <class T>
inline BiGruForward<T> bigru_forward(const Tensor<T>& cls_sequence,
                                     const std::vector<int>& sentence_mask,
                                     const GruDirectionParams<T>& fwd,
                                     const GruDirectionParams<T>& bwd,
                                     bool keep_caches = false) {
  const std::size_t L = cls_sequence.rows();
  const std::size_t m = cls_sequence.cols();
  const std::size_t h = fwd.uz.rows();
  std::size_t n = 0;
  for (std::size_t s = 0; s < L; ++s) {
    if (sentence_mask[s]) {
      if (s != n)
        throw InputError("bigru_forward: real sentences must form a prefix");
      ++n;
    }
  }

  BiGruForward<T> out;
  out.n_real = n;
  out.context = Tensor<T>({L, 2 * h});
  if (keep_caches) {
    out.fwd_steps.resize(n);
    out.bwd_steps.resize(n);
  }

  std::vector<T> state(h, T{});
  for (std::size_t s = 0; s < n; ++s) {
    state = gru_cell(cls_sequence.row(s), state, fwd,
                     keep_caches ? &out.fwd_steps[s] : nullptr);
    std::copy(state.begin(), state.end(), out.context.row(s));
  }
  state.assign(h, T{});
  for (std::size_t s = n; s-- > 0;) {
    state = gru_cell(cls_sequence.row(s), state, bwd,
                     keep_caches ? &out.bwd_steps[s] : nullptr);
    std::copy(state.begin(), state.end(), out.context.row(s) + h);
  }
  (void)m;
  return out;
}

// BPTT for both directions; returns d(cls_sequence).
template <class T>
inline Tensor<T> bigru_backward(const Tensor<T>& cls_sequence,
                                const BiGruForward<T>& fwd_pass,
                                const GruDirectionParams<T>& fwd,
                                const GruDirectionParams<T>& bwd,
                                const Tensor<T>& dcontext,
                                GruDirectionParams<T>& gfwd,
                                GruDirectionParams<T>& gbwd) {
  const std::size_t h = fwd.uz.rows();
  const std::size_t n = fwd_pass.n_real;
  Tensor<T> dx({cls_sequence.rows(), cls_sequence.cols()});

  std::vector<T> carry(h, T{});
  for (std::size_t s = n; s-- > 0;) {
    std::vector<T> dh(h);
    for (std::size_t i = 0; i < h; ++i) dh[i] = dcontext(s, i) + carry[i];
    carry = gru_cell_backward(cls_sequence.row(s), fwd_pass.fwd_steps[s], fwd,
                              dh, gfwd, dx.row(s));
  }
  carry.assign(h, T{});
  for (std::size_t s = 0; s < n; ++s) {
    std::vector<T> dh(h);
    for (std::size_t i = 0; i < h; ++i) dh[i] = dcontext(s, h + i) + carry[i];
    carry = gru_cell_backward(cls_sequence.row(s), fwd_pass.bwd_steps[s], bwd,
                              dh, gbwd, dx.row(s));
  }
  return dx;
}

template <class T>
struct SentenceAttentionForward {
  Tensor<T> u;              // (L, a); rows for real sentences only
  std::vector<T> scores;    // (L)
  std::vector<T> alpha;     // (L); 0 on padded sentences
};

// u_s = tanh(W h_s + b); score_s = u_s . U; alpha = softmax over real
// sentences (padded ones are excluded from the normalization entirely).
template <class T>
inline SentenceAttentionForward<T> sentence_attention(
    const Tensor<T>& context, const std::vector<int>& sentence_mask,
    const AttentionParams<T>& params) {
  const std::size_t L = context.rows();
  const std::size_t a = params.b.size();
  SentenceAttentionForward<T> out;
  out.u = Tensor<T>({L, a});
  out.scores.assign(L, T{});
  out.alpha.assign(L, T{});

  bool any = false;
  T maxv = std::numeric_limits<T>::lowest();
  for (std::size_t s = 0; s < L; ++s) {
    if (!sentence_mask[s]) continue;
    any = true;
    vecmat(context.row(s), params.w, params.b.data(), out.u.row(s));
    T* urow = out.u.row(s);
    for (std::size_t i = 0; i < a; ++i)
      urow[i] = static_cast<T>(std::tanh(static_cast<double>(urow[i])));
    out.scores[s] = dot(urow, params.u.data(), a);
    maxv = std::max(maxv, out.scores[s]);
  }
  if (!any)
    throw InputError("sentence_attention: document has no real sentences");

  T denom = T{};
  for (std::size_t s = 0; s < L; ++s) {
    if (!sentence_mask[s]) continue;
    out.alpha[s] = static_cast<T>(std::exp(static_cast<double>(out.scores[s] - maxv)));
    denom += out.alpha[s];
  }
  for (std::size_t s = 0; s < L; ++s) out.alpha[s] /= denom == T{} ? static_cast<T>(1) : denom;
  return out;
}

// d_i = sum_s alpha_s h_s
template <class T>
inline std::vector<T> document_embedding(const std::vector<T>& alpha,
                                         const Tensor<T>& context) {
  const std::size_t L = context.rows(), w = context.cols();
  std::vector<T> d(w, T{});
  for (std::size_t s = 0; s < L; ++s) {
    if (alpha[s] == T{}) continue;
    axpy(alpha[s], context.row(s), d.data(), w);
  }
  return d;
}

template <class T>
struct ClassifyResult {
  T logit{};
  T probability{};
  RiskClass label = RiskClass::NonRisky;
};

// probability >= 0.5 classifies as Risky (the boundary goes to Risky).
template <class T>
inline ClassifyResult<T> classify(const std::vector<T>& doc_embedding,
                                  const ClassifierParams<T>& params) {
  ClassifyResult<T> out;
  out.logit = dot(doc_embedding.data(), params.w.data(), doc_embedding.size()) +
              params.b[0];
  out.probability = detail::sigmoid(out.logit);
  out.label = out.probability >= static_cast<T>(0.5) ? RiskClass::Risky
                                                     : RiskClass::NonRisky;
  return out;
}

// Numerically stable binary cross entropy on the logit:
// max(z,0) - z*y + log(1 + exp(-|z|)), scaled by pos_weight for y=1.
template <class T>
inline double bce_loss(T logit, int target, double pos_weight = 1.0) {
  double z = static_cast<double>(logit);
  double y = target ? 1.0 : 0.0;
  double base = std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  return target ? pos_weight * base : base;
}

// d(loss)/d(logit) for the same expression.
template <class T>
inline double bce_loss_grad(T logit, int target, double pos_weight = 1.0) {
  double p = 1.0 / (1.0 + std::exp(-static_cast<double>(logit)));
  return target ? pos_weight * (p - 1.0) : p;
}

// Everything predict_document exposes: the prediction plus all attention
// artifacts used by the explanation layers.
struct ForwardTrace {
  std::string doc_id;
  int n_sentences = 0;
  std::vector<double> sentence_alphas;                  // L
  std::vector<std::vector<double>> word_attention;      // L x T
  std::vector<std::vector<std::string>> tokens;         // L x T
  double logit = 0.0;
  double probability = 0.0;
  RiskClass predicted = RiskClass::NonRisky;
};

template <class T>
struct DocumentForward {
  std::vector<EncoderForward<T>> sentence_fwd;  // real sentences only
  Tensor<T> cls;                                // (L, d); zero rows padded
  BiGruForward<T> gru;
  SentenceAttentionForward<T> attn;
  std::vector<T> doc_embedding;
  ClassifyResult<T> result;
};

// Runs encoder -> BiGRU -> sentence attention -> classifier. Padding
// sentences are skipped entirely; every downstream stage masks them out.
template <class T>
inline DocumentForward<T> document_forward(const EncodedDocument& doc,
                                           const ModelParams<T>& params,
                                           const ModelConfig& cfg,
                                           bool train_mode = false,
                                           Rng* dropout_rng = nullptr,
                                           bool keep_caches = false) {
  if (doc.sentences.size() != cfg.max_sentences)
    throw InputError("document_forward: document has " +
                     std::to_string(doc.sentences.size()) +
                     " sentence slots, config expects " +
                     std::to_string(cfg.max_sentences));
  if (doc.n_sentences == 0)
    throw InputError("document_forward: all-padding document " + doc.doc_id +
                     " has undefined attention");

  DocumentForward<T> out;
  const std::size_t n = static_cast<std::size_t>(doc.n_sentences);
  out.cls = Tensor<T>({cfg.max_sentences, cfg.encoder.d_model});
  out.sentence_fwd.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    out.sentence_fwd.push_back(encoder_forward(doc.sentences[s], params.encoder,
                                               cfg.encoder, train_mode,
                                               dropout_rng));
    const auto& states = out.sentence_fwd.back().token_states();
    std::copy(states.row(0), states.row(0) + cfg.encoder.d_model,
              out.cls.row(s));
  }
  out.gru = bigru_forward(out.cls, doc.sentence_mask, params.gru_fwd,
                          params.gru_bwd, keep_caches);
  out.attn = sentence_attention(out.gru.context, doc.sentence_mask,
                                params.attention);
  out.doc_embedding = document_embedding(out.attn.alpha, out.gru.context);
  out.result = classify(out.doc_embedding, params.classifier);
  if (!std::isfinite(static_cast<double>(out.result.logit)))
    throw NumericError("document_forward: non-finite logit for " + doc.doc_id);
  return out;
}

template <class T>
inline ForwardTrace predict_document(const EncodedDocument& doc,
                                     const ModelParams<T>& params,
                                     const ModelConfig& cfg,
                                     const Vocabulary& vocab) {
  auto fwd = document_forward(doc, params, cfg, /*train=*/false);
  ForwardTrace trace;
  trace.doc_id = doc.doc_id;
  trace.n_sentences = doc.n_sentences;
  trace.logit = static_cast<double>(fwd.result.logit);
  trace.probability = static_cast<double>(fwd.result.probability);
  trace.predicted = fwd.result.label;

  const std::size_t L = cfg.max_sentences, n_tok = cfg.encoder.max_tokens;
  trace.sentence_alphas.assign(L, 0.0);
  trace.word_attention.assign(L, std::vector<double>(n_tok, 0.0));
  trace.tokens.assign(L, std::vector<std::string>(n_tok, kPadToken));
  for (std::size_t s = 0; s < L; ++s) {
    trace.sentence_alphas[s] = static_cast<double>(fwd.attn.alpha[s]);
    for (std::size_t t = 0; t < n_tok; ++t)
      trace.tokens[s][t] = vocab.token(doc.sentences[s].token_ids[t]);
    if (s < fwd.sentence_fwd.size())
      trace.word_attention[s] =
          summed_word_attention(fwd.sentence_fwd[s], cfg.encoder);
  }
  return trace;
}

}  // namespace xrisk
