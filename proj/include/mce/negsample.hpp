#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "mce/corpus.hpp"
#include "mce/random.hpp"

namespace mce {

/// Negative sampler over the unigram distribution raised to the 3/4 power,
/// P(i) = count_i^0.75 / A. Uses Vose's alias tables, so each draw costs one
/// index and one uniform regardless of vocabulary size.
class NegSampler {
 public:
  static constexpr double kPower = 0.75;

  explicit NegSampler(const Vocabulary& vocab);

  std::size_t size() const { return prob_.size(); }

  /// Target probability of code i.
  double probability(CodeId i) const { return target_[i]; }
  /// Probability of code i implied by the alias tables.
  double implied_probability(CodeId i) const;
  /// Normalization constant A = sum_j count_j^0.75.
  double normalizer() const { return normalizer_; }

  CodeId draw(Rng& rng) const {
    auto slot = static_cast<CodeId>(uniform_index(rng, prob_.size()));
    return uniform01(rng) < prob_[slot] ? slot : alias_[slot];
  }

  /// Draws until the result differs from `exclude`. Throws UsageError when
  /// the vocabulary has a single code.
  CodeId draw(Rng& rng, CodeId exclude) const;

 private:
  std::vector<double> prob_;
  std::vector<CodeId> alias_;
  std::vector<double> target_;
  double normalizer_ = 0;
};

}  // namespace mce
