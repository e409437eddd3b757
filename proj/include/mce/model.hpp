#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mce/corpus.hpp"

namespace mce {

struct ContextEntry {
  CodeId code = 0;
  int delta = 0;  // bucket offset from the target, in [-S, S]

  bool operator==(const ContextEntry&) const = default;
};

// Contexts of one target occurrence. The target occurrence itself is never an
// entry; other occurrences of the same code may be.
struct ContextSet {
  CodeId target = 0;
  std::vector<ContextEntry> entries;

  bool operator==(const ContextSet&) const = default;
};

/// Learnable parameters: input vectors, output vectors, per-code attention
/// scores over the 2S+1 offset slots, and per-slot attention biases.
/// Slot k holds offset k - S. All matrices are row-major.
template <typename Real>
struct ModelParams {
  std::size_t vocab_size = 0;
  std::size_t dim = 0;
  int scope = 0;
  std::vector<Real> input;       // vocab_size x dim
  std::vector<Real> output;      // vocab_size x dim
  std::vector<Real> attn_score;  // vocab_size x slots()
  std::vector<Real> attn_bias;   // slots()

  ModelParams() = default;
  ModelParams(std::size_t vocab_size, std::size_t dim, int scope);

  std::size_t slots() const { return 2 * static_cast<std::size_t>(scope) + 1; }
  std::size_t slot(int delta) const { return static_cast<std::size_t>(delta + scope); }

  std::span<Real> in_row(CodeId c) { return {input.data() + c * dim, dim}; }
  std::span<const Real> in_row(CodeId c) const { return {input.data() + c * dim, dim}; }
  std::span<Real> out_row(CodeId c) { return {output.data() + c * dim, dim}; }
  std::span<const Real> out_row(CodeId c) const { return {output.data() + c * dim, dim}; }
  std::span<Real> score_row(CodeId c) { return {attn_score.data() + c * slots(), slots()}; }
  std::span<const Real> score_row(CodeId c) const {
    return {attn_score.data() + c * slots(), slots()};
  }

  bool all_finite() const;
  bool operator==(const ModelParams&) const = default;
};

/// Inputs uniform in [-0.5/d, 0.5/d], outputs zero, attention scores and
/// biases zero (uniform attention, i.e. the CBOW starting point).
template <typename Real>
ModelParams<Real> init_params(std::size_t vocab_size, std::size_t dim, int scope,
                              std::uint64_t seed);

// Reusable buffers so a step does not allocate.
template <typename Real>
struct StepScratch {
  std::vector<Real> weights;
  std::vector<Real> hidden;
  std::vector<Real> grad_hidden;
  std::vector<Real> out_coef;
  std::vector<Real> ctx_dot;
};

struct StepOptions {
  bool update_attention = true;
};

/// Softmax over context occurrences of m[target, slot] + b[slot]; a bucket
/// with more codes therefore receives proportionally more mass.
template <typename Real>
std::vector<Real> attention_weights(const ModelParams<Real>& params, const ContextSet& ctx);

template <typename Real>
std::vector<Real> hidden(const ModelParams<Real>& params, const ContextSet& ctx,
                         std::span<const Real> weights);

/// Negative-sampling loss -log s(v'_t.h) - sum_x log s(-v'_x.h) with the
/// attention-weighted hidden state.
template <typename Real>
double forward_loss(const ModelParams<Real>& params, const ContextSet& ctx,
                    std::span<const CodeId> negatives);

/// Same loss with uniform 1/|ctx| averaging.
template <typename Real>
double cbow_forward_loss(const ModelParams<Real>& params, const ContextSet& ctx,
                         std::span<const CodeId> negatives);

/// One SGD step of the attention model. Every gradient is taken at the
/// parameters as they were on entry, so the update equals -lr * grad exactly.
/// Returns the loss before the update.
template <typename Real>
double train_step(ModelParams<Real>& params, const ContextSet& ctx,
                  std::span<const CodeId> negatives, Real lr, StepScratch<Real>& scratch,
                  StepOptions opts = {});

template <typename Real>
double train_step(ModelParams<Real>& params, const ContextSet& ctx,
                  std::span<const CodeId> negatives, Real lr, StepOptions opts = {}) {
  StepScratch<Real> scratch;
  return train_step(params, ctx, negatives, lr, scratch, opts);
}

/// CBOW baseline step: uniform weights, attention parameters untouched.
template <typename Real>
double cbow_train_step(ModelParams<Real>& params, const ContextSet& ctx,
                       std::span<const CodeId> negatives, Real lr, StepScratch<Real>& scratch);

template <typename Real>
double cbow_train_step(ModelParams<Real>& params, const ContextSet& ctx,
                       std::span<const CodeId> negatives, Real lr) {
  StepScratch<Real> scratch;
  return cbow_train_step(params, ctx, negatives, lr, scratch);
}

struct AttentionProfile {
  CodeId code = 0;
  std::vector<double> weights;  // 2S+1 entries, slot k <-> offset k - S
};

/// Per-code softmax of m[c, .] + b over all 2S+1 slots.
template <typename Real>
std::vector<AttentionProfile> export_profiles(const ModelParams<Real>& params);

}  // namespace mce
