#pragma once

// Reference loss and finite-difference gradient check shared by the unit and
// acceptance suites.

#include <algorithm>
#include <cmath>
#include <vector>

#include "mce/model.hpp"
#include "mce/random.hpp"

namespace mce::testing {

using P = ModelParams<double>;

inline double rand_sym(Rng& rng, double half) { return (uniform01(rng) * 2 - 1) * half; }

// Reference loss straight from the model definition: softmax attention over
// context occurrences (or uniform), weighted hidden state, negative sampling.
inline double oracle_loss(const P& p, const ContextSet& ctx, const std::vector<CodeId>& negs,
                   bool uniform) {
  const std::size_t n = ctx.entries.size();
  std::vector<double> a(n);
  double z = 0;
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t k = static_cast<std::size_t>(ctx.entries[j].delta + p.scope);
    a[j] = uniform ? 1.0 : std::exp(p.attn_score[ctx.target * p.slots() + k] + p.attn_bias[k]);
    z += a[j];
  }
  std::vector<double> h(p.dim, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < p.dim; ++i) h[i] += a[j] / z * p.input[ctx.entries[j].code * p.dim + i];
  }
  auto score = [&](CodeId c) {
    double s = 0;
    for (std::size_t i = 0; i < p.dim; ++i) s += p.output[c * p.dim + i] * h[i];
    return s;
  };
  double loss = std::log1p(std::exp(-score(ctx.target)));
  for (CodeId x : negs) loss += std::log1p(std::exp(score(x)));
  return loss;
}

struct Instance {
  P params;
  ContextSet ctx;
  std::vector<CodeId> negs;
};

inline Instance random_instance(Rng& rng, std::size_t max_ctx = 6) {
  Instance in{P(20, 8, 2), {}, {}};
  for (auto* v : {&in.params.input, &in.params.output, &in.params.attn_score, &in.params.attn_bias}) {
    for (auto& x : *v) x = rand_sym(rng, 0.5);
  }
  in.ctx.target = static_cast<CodeId>(uniform_index(rng, 20));
  std::size_t n = 1 + uniform_index(rng, max_ctx);
  for (std::size_t j = 0; j < n; ++j) {
    in.ctx.entries.push_back({static_cast<CodeId>(uniform_index(rng, 20)),
                              static_cast<int>(uniform_index(rng, 5)) - 2});
  }
  for (int x = 0; x < 3; ++x) {
    CodeId c;
    do {
      c = static_cast<CodeId>(uniform_index(rng, 20));
    } while (c == in.ctx.target);
    in.negs.push_back(c);
  }
  return in;
}

inline std::vector<double>* group(P& p, int g) {
  switch (g) {
    case 0: return &p.input;
    case 1: return &p.output;
    case 2: return &p.attn_score;
    default: return &p.attn_bias;
  }
}

// Checks -(after - before) of a unit-rate step against central differences of
// the reference loss; returns the worst relative error.
inline double worst_gradient_error(const Instance& in, bool cbow) {
  P stepped = in.params;
  if (cbow) {
    cbow_train_step(stepped, in.ctx, std::span<const CodeId>(in.negs), 1.0);
  } else {
    train_step(stepped, in.ctx, std::span<const CodeId>(in.negs), 1.0);
  }
  const double eps = 1e-5;
  double worst = 0;
  P base = in.params;
  for (int g = 0; g < 4; ++g) {
    P probe = in.params;
    auto& values = *group(probe, g);
    const auto& before = *group(base, g);
    const auto& after = *group(stepped, g);
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      values[i] = orig + eps;
      double up = oracle_loss(probe, in.ctx, in.negs, cbow);
      values[i] = orig - eps;
      double down = oracle_loss(probe, in.ctx, in.negs, cbow);
      values[i] = orig;
      double numeric = (up - down) / (2 * eps);
      double analytic = before[i] - after[i];
      double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
      worst = std::max(worst, std::abs(numeric - analytic) / scale);
    }
  }
  return worst;
}


}  // namespace mce::testing
