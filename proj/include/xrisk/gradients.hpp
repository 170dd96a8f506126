#pragma once

#include <cstdint>
#include <vector>

#include "xrisk/common.hpp"
#include "xrisk/model.hpp"

namespace xrisk {

struct TrainingExample {
  const EncodedDocument* doc = nullptr;
  int label = 0;  // 1 = Risky
};

template <class T>
struct LossAndGradients {
  double loss = 0.0;
  ModelParams<T> grads;
};

namespace detail {

// Per-item dropout seed; derived so parallel workers never share rng state.
inline std::uint64_t item_seed(std::uint64_t base, std::size_t item) {
  std::uint64_t x = base + 0x9e3779b97f4a7c15ull * (item + 1);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ull;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebull;
  x ^= x >> 31;
  return x;
}

// Backward for a single document given its forward caches. dlogit already
// includes the batch-mean factor.
template <class T>
inline void document_backward(const EncodedDocument& doc,
                              const DocumentForward<T>& fwd,
                              const ModelParams<T>& params,
                              const ModelConfig& cfg, T dlogit,
                              ModelParams<T>& grads) {
  const std::size_t L = cfg.max_sentences;
  const std::size_t w = cfg.context_dim();
  const std::size_t a = cfg.attention_dim;

  // classifier: logit = w . d + b
  std::vector<T> dd(w);
  for (std::size_t i = 0; i < w; ++i) {
    grads.classifier.w[i] += dlogit * fwd.doc_embedding[i];
    dd[i] = dlogit * params.classifier.w[i];
  }
  grads.classifier.b[0] += dlogit;

  // document embedding: d = sum_s alpha_s H_s
  Tensor<T> dcontext({L, w});
  std::vector<T> dalpha(L, T{});
  for (std::size_t s = 0; s < L; ++s) {
    if (fwd.attn.alpha[s] == T{} && !doc.sentence_mask[s]) continue;
    dalpha[s] = dot(dd.data(), fwd.gru.context.row(s), w);
    axpy(fwd.attn.alpha[s], dd.data(), dcontext.row(s), w);
  }

  // softmax over real sentences
  T dot_da = T{};
  for (std::size_t s = 0; s < L; ++s)
    if (doc.sentence_mask[s]) dot_da += dalpha[s] * fwd.attn.alpha[s];
  std::vector<T> du(a);
  for (std::size_t s = 0; s < L; ++s) {
    if (!doc.sentence_mask[s]) continue;
    T dscore = fwd.attn.alpha[s] * (dalpha[s] - dot_da);
    // score = u_s . U
    const T* urow = fwd.attn.u.row(s);
    for (std::size_t i = 0; i < a; ++i) {
      grads.attention.u[i] += dscore * urow[i];
      du[i] = dscore * params.attention.u[i] *
              (static_cast<T>(1) - urow[i] * urow[i]);  // through tanh
    }
    vecmat_backward(fwd.gru.context.row(s), params.attention.w, du.data(),
                    grads.attention.w, grads.attention.b.data(),
                    dcontext.row(s));
  }

  // BiGRU
  Tensor<T> dcls = bigru_backward(fwd.cls, fwd.gru, params.gru_fwd,
                                  params.gru_bwd, dcontext, grads.gru_fwd,
                                  grads.gru_bwd);

  // encoder per real sentence; only the [CLS] row feeds the loss
  const std::size_t n = fwd.sentence_fwd.size();
  const std::size_t n_tok = cfg.encoder.max_tokens, d = cfg.encoder.d_model;
  for (std::size_t s = 0; s < n; ++s) {
    Tensor<T> dstates({n_tok, d});
    std::copy(dcls.row(s), dcls.row(s) + d, dstates.row(0));
    encoder_backward(fwd.sentence_fwd[s], params.encoder, cfg.encoder, dstates,
                     grads.encoder);
  }
}

}  // namespace detail

// Mean BCE over the batch, with exact analytic gradients for every
// parameter tensor. Batch items may fan out over threads; per-item gradient
// buffers are reduced in batch order so the result does not depend on the
// thread count.
template <class T>
inline LossAndGradients<T> compute_gradients(
    const std::vector<TrainingExample>& batch, const ModelParams<T>& params,
    const ModelConfig& cfg, double pos_weight = 1.0, bool train_mode = true,
    std::uint64_t dropout_seed = 0, int threads = 1) {
  if (batch.empty()) throw InputError("compute_gradients: empty batch");

  const std::size_t n = batch.size();
  std::vector<double> losses(n, 0.0);
  std::vector<ModelParams<T>> item_grads(n);
  for (auto& g : item_grads) g = ModelParams<T>::zeros(cfg);

  parallel_for(n, threads, [&](std::size_t i) {
    const auto& ex = batch[i];
    Rng rng(detail::item_seed(dropout_seed, i));
    auto fwd = document_forward(*ex.doc, params, cfg, train_mode,
                                train_mode ? &rng : nullptr,
                                /*keep_caches=*/true);
    losses[i] = bce_loss(fwd.result.logit, ex.label, pos_weight);
    T dlogit = static_cast<T>(
        bce_loss_grad(fwd.result.logit, ex.label, pos_weight) /
        static_cast<double>(n));
    detail::document_backward(*ex.doc, fwd, params, cfg, dlogit,
                              item_grads[i]);
  });

  LossAndGradients<T> out;
  out.grads = ModelParams<T>::zeros(cfg);
  for (std::size_t i = 0; i < n; ++i) {
    out.loss += losses[i];
    std::vector<Tensor<T>*> dst;
    out.grads.for_each([&](const std::string&, Tensor<T>& t) { dst.push_back(&t); });
    std::size_t k = 0;
    item_grads[i].for_each([&](const std::string&, Tensor<T>& t) {
      Tensor<T>& acc = *dst[k++];
      for (std::size_t j = 0; j < t.size(); ++j) acc[j] += t[j];
    });
  }
  out.loss /= static_cast<double>(n);

  bool finite = true;
  out.grads.for_each([&](const std::string&, Tensor<T>& t) {
    for (std::size_t j = 0; j < t.size() && finite; ++j)
      finite = std::isfinite(static_cast<double>(t[j]));
  });
  if (!finite || !std::isfinite(out.loss))
    throw NumericError("compute_gradients produced a non-finite result");
  return out;
}

}  // namespace xrisk
