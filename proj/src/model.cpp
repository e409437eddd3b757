#include "mce/model.hpp"

#include <algorithm>
#include <cmath>

#include "mce/error.hpp"
#include "mce/random.hpp"

namespace mce {

namespace {

constexpr double kLogitClamp = 30.0;

template <typename Real>
Real clamp_logit(Real f) {
  return std::clamp(f, static_cast<Real>(-kLogitClamp), static_cast<Real>(kLogitClamp));
}

// -log(sigmoid(f)) for a clamped f.
template <typename Real>
Real neg_log_sigmoid(Real f) {
  return std::log1p(std::exp(-f));
}

template <typename Real>
Real sigmoid(Real f) {
  return Real(1) / (Real(1) + std::exp(-f));
}

template <typename Real>
Real dot(const Real* a, const Real* b, std::size_t n) {
  Real s = 0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

template <typename Real>
void axpy(Real alpha, const Real* x, Real* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename Real>
void check_context(const ModelParams<Real>& p, const ContextSet& ctx) {
  if (ctx.entries.empty()) throw UsageError("empty context set");
  if (ctx.target >= p.vocab_size) throw UsageError("target id out of range");
  for (const auto& e : ctx.entries) {
    if (e.code >= p.vocab_size) throw UsageError("context code out of range");
    if (e.delta < -p.scope || e.delta > p.scope) throw UsageError("context offset outside scope");
  }
}

template <typename Real>
void softmax_weights(const ModelParams<Real>& p, const ContextSet& ctx, std::vector<Real>& w) {
  const std::size_t n = ctx.entries.size();
  w.resize(n);
  const Real* scores = p.attn_score.data() + ctx.target * p.slots();
  Real max_s = -INFINITY;
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t k = p.slot(ctx.entries[j].delta);
    w[j] = scores[k] + p.attn_bias[k];
    max_s = std::max(max_s, w[j]);
  }
  Real sum = 0;
  for (std::size_t j = 0; j < n; ++j) {
    w[j] = std::exp(w[j] - max_s);
    sum += w[j];
  }
  for (std::size_t j = 0; j < n; ++j) w[j] /= sum;
}

template <typename Real>
void uniform_weights(const ContextSet& ctx, std::vector<Real>& w) {
  w.assign(ctx.entries.size(), Real(1) / static_cast<Real>(ctx.entries.size()));
}

template <typename Real>
void accumulate_hidden(const ModelParams<Real>& p, const ContextSet& ctx,
                       std::span<const Real> w, std::vector<Real>& h) {
  h.assign(p.dim, Real(0));
  for (std::size_t j = 0; j < ctx.entries.size(); ++j) {
    axpy(w[j], p.input.data() + ctx.entries[j].code * p.dim, h.data(), p.dim);
  }
}

template <typename Real>
double output_loss(const ModelParams<Real>& p, CodeId target, std::span<const CodeId> negatives,
                   const std::vector<Real>& h) {
  Real f = clamp_logit(dot(p.output.data() + target * p.dim, h.data(), p.dim));
  double loss = neg_log_sigmoid(f);
  for (CodeId x : negatives) {
    Real fx = clamp_logit(dot(p.output.data() + x * p.dim, h.data(), p.dim));
    loss += neg_log_sigmoid(-fx);
  }
  return loss;
}

// Shared SGD update for both models; `weights` already holds the context
// weights for this step.
template <typename Real>
double step_with_weights(ModelParams<Real>& p, const ContextSet& ctx,
                         std::span<const CodeId> negatives, Real lr, StepScratch<Real>& s,
                         bool update_attention) {
  const std::size_t d = p.dim;
  const std::size_t n = ctx.entries.size();
  const std::size_t n_out = negatives.size() + 1;
  accumulate_hidden(p, ctx, std::span<const Real>(s.weights), s.hidden);

  // dloss/df for each output row, all taken before any row changes.
  s.out_coef.resize(n_out);
  double loss = 0;
  for (std::size_t o = 0; o < n_out; ++o) {
    CodeId row = o == 0 ? ctx.target : negatives[o - 1];
    Real f = clamp_logit(dot(p.output.data() + row * d, s.hidden.data(), d));
    if (o == 0) {
      loss += neg_log_sigmoid(f);
      s.out_coef[o] = sigmoid(f) - Real(1);
    } else {
      loss += neg_log_sigmoid(-f);
      s.out_coef[o] = sigmoid(f);
    }
  }

  s.grad_hidden.assign(d, Real(0));
  for (std::size_t o = 0; o < n_out; ++o) {
    CodeId row = o == 0 ? ctx.target : negatives[o - 1];
    axpy(s.out_coef[o], p.output.data() + row * d, s.grad_hidden.data(), d);
  }
  for (std::size_t o = 0; o < n_out; ++o) {
    CodeId row = o == 0 ? ctx.target : negatives[o - 1];
    axpy(-lr * s.out_coef[o], s.hidden.data(), p.output.data() + row * d, d);
  }

  if (update_attention) {
    s.ctx_dot.resize(n);
    Real mean = 0;
    for (std::size_t j = 0; j < n; ++j) {
      s.ctx_dot[j] = dot(s.grad_hidden.data(), p.input.data() + ctx.entries[j].code * d, d);
      mean += s.weights[j] * s.ctx_dot[j];
    }
    Real* scores = p.attn_score.data() + ctx.target * p.slots();
    for (std::size_t j = 0; j < n; ++j) {
      Real grad_score = s.weights[j] * (s.ctx_dot[j] - mean);
      std::size_t k = p.slot(ctx.entries[j].delta);
      scores[k] -= lr * grad_score;
      p.attn_bias[k] -= lr * grad_score;
    }
  }

  for (std::size_t j = 0; j < n; ++j) {
    axpy(-lr * s.weights[j], s.grad_hidden.data(), p.input.data() + ctx.entries[j].code * d, d);
  }
  return loss;
}

}  // namespace

template <typename Real>
ModelParams<Real>::ModelParams(std::size_t vocab_size_, std::size_t dim_, int scope_)
    : vocab_size(vocab_size_), dim(dim_), scope(scope_) {
  if (vocab_size < 1 || dim < 1 || scope < 0) throw UsageError("invalid model dimensions");
  input.assign(vocab_size * dim, Real(0));
  output.assign(vocab_size * dim, Real(0));
  attn_score.assign(vocab_size * slots(), Real(0));
  attn_bias.assign(slots(), Real(0));
}

template <typename Real>
bool ModelParams<Real>::all_finite() const {
  auto finite = [](const std::vector<Real>& v) {
    return std::all_of(v.begin(), v.end(), [](Real x) { return std::isfinite(x); });
  };
  return finite(input) && finite(output) && finite(attn_score) && finite(attn_bias);
}

template <typename Real>
ModelParams<Real> init_params(std::size_t vocab_size, std::size_t dim, int scope,
                              std::uint64_t seed) {
  ModelParams<Real> p(vocab_size, dim, scope);
  Rng rng(seed);
  const double half_width = 0.5 / static_cast<double>(dim);
  for (auto& x : p.input) x = static_cast<Real>((uniform01(rng) * 2.0 - 1.0) * half_width);
  return p;
}

template <typename Real>
std::vector<Real> attention_weights(const ModelParams<Real>& params, const ContextSet& ctx) {
  check_context(params, ctx);
  std::vector<Real> w;
  softmax_weights(params, ctx, w);
  return w;
}

template <typename Real>
std::vector<Real> hidden(const ModelParams<Real>& params, const ContextSet& ctx,
                         std::span<const Real> weights) {
  if (weights.size() != ctx.entries.size()) throw UsageError("weights/context size mismatch");
  std::vector<Real> h;
  accumulate_hidden(params, ctx, weights, h);
  return h;
}

template <typename Real>
double forward_loss(const ModelParams<Real>& params, const ContextSet& ctx,
                    std::span<const CodeId> negatives) {
  check_context(params, ctx);
  std::vector<Real> w, h;
  softmax_weights(params, ctx, w);
  accumulate_hidden(params, ctx, std::span<const Real>(w), h);
  return output_loss(params, ctx.target, negatives, h);
}

template <typename Real>
double cbow_forward_loss(const ModelParams<Real>& params, const ContextSet& ctx,
                         std::span<const CodeId> negatives) {
  check_context(params, ctx);
  std::vector<Real> w, h;
  uniform_weights(ctx, w);
  accumulate_hidden(params, ctx, std::span<const Real>(w), h);
  return output_loss(params, ctx.target, negatives, h);
}

template <typename Real>
double train_step(ModelParams<Real>& params, const ContextSet& ctx,
                  std::span<const CodeId> negatives, Real lr, StepScratch<Real>& scratch,
                  StepOptions opts) {
  softmax_weights(params, ctx, scratch.weights);
  return step_with_weights(params, ctx, negatives, lr, scratch, opts.update_attention);
}

template <typename Real>
double cbow_train_step(ModelParams<Real>& params, const ContextSet& ctx,
                       std::span<const CodeId> negatives, Real lr, StepScratch<Real>& scratch) {
  uniform_weights(ctx, scratch.weights);
  return step_with_weights(params, ctx, negatives, lr, scratch, false);
}

template <typename Real>
std::vector<AttentionProfile> export_profiles(const ModelParams<Real>& params) {
  std::vector<AttentionProfile> out(params.vocab_size);
  const std::size_t k = params.slots();
  for (std::size_t c = 0; c < params.vocab_size; ++c) {
    auto row = params.score_row(static_cast<CodeId>(c));
    std::vector<double> w(k);
    double max_s = -INFINITY;
    for (std::size_t i = 0; i < k; ++i) {
      w[i] = static_cast<double>(row[i]) + static_cast<double>(params.attn_bias[i]);
      max_s = std::max(max_s, w[i]);
    }
    double sum = 0;
    for (auto& x : w) sum += (x = std::exp(x - max_s));
    for (auto& x : w) x /= sum;
    out[c] = AttentionProfile{static_cast<CodeId>(c), std::move(w)};
  }
  return out;
}

#define MCE_INSTANTIATE(Real)                                                                    \
  template struct ModelParams<Real>;                                                             \
  template ModelParams<Real> init_params<Real>(std::size_t, std::size_t, int, std::uint64_t);    \
  template std::vector<Real> attention_weights<Real>(const ModelParams<Real>&, const ContextSet&); \
  template std::vector<Real> hidden<Real>(const ModelParams<Real>&, const ContextSet&,           \
                                          std::span<const Real>);                                \
  template double forward_loss<Real>(const ModelParams<Real>&, const ContextSet&,                \
                                     std::span<const CodeId>);                                   \
  template double cbow_forward_loss<Real>(const ModelParams<Real>&, const ContextSet&,           \
                                          std::span<const CodeId>);                              \
  template double train_step<Real>(ModelParams<Real>&, const ContextSet&,                        \
                                   std::span<const CodeId>, Real, StepScratch<Real>&,            \
                                   StepOptions);                                                 \
  template double cbow_train_step<Real>(ModelParams<Real>&, const ContextSet&,                   \
                                        std::span<const CodeId>, Real, StepScratch<Real>&);      \
  template std::vector<AttentionProfile> export_profiles<Real>(const ModelParams<Real>&);

MCE_INSTANTIATE(float)
MCE_INSTANTIATE(double)

#undef MCE_INSTANTIATE

}  // namespace mce
