#include "mce/negsample.hpp"

#include <cmath>

#include "mce/error.hpp"

namespace mce {

NegSampler::NegSampler(const Vocabulary& vocab) {
  const std::size_t n = vocab.size();
  if (n == 0) throw UsageError("negative sampler needs a non-empty vocabulary");

  target_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    target_[i] = std::pow(static_cast<double>(vocab.count(static_cast<CodeId>(i))), kPower);
    normalizer_ += target_[i];
  }
  for (auto& p : target_) p /= normalizer_;

  prob_.assign(n, 1.0);
  alias_.resize(n);
  std::vector<double> scaled(n);
  std::vector<CodeId> small, large;
  for (std::size_t i = 0; i < n; ++i) {
    alias_[i] = static_cast<CodeId>(i);
    scaled[i] = target_[i] * static_cast<double>(n);
    (scaled[i] < 1.0 ? small : large).push_back(static_cast<CodeId>(i));
  }
  while (!small.empty() && !large.empty()) {
    CodeId s = small.back();
    small.pop_back();
    CodeId l = large.back();
    prob_[s] = scaled[s];
    alias_[s] = l;
    scaled[l] = (scaled[l] + scaled[s]) - 1.0;
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  // Leftovers differ from 1 only by rounding.
  for (CodeId i : small) prob_[i] = 1.0;
  for (CodeId i : large) prob_[i] = 1.0;
}

double NegSampler::implied_probability(CodeId i) const {
  double mass = prob_[i];
  for (std::size_t j = 0; j < prob_.size(); ++j) {
    if (alias_[j] == i && j != i) mass += 1.0 - prob_[j];
  }
  return mass / static_cast<double>(prob_.size());
}

CodeId NegSampler::draw(Rng& rng, CodeId exclude) const {
  if (prob_.size() < 2) throw UsageError("cannot exclude the only code in the vocabulary");
  CodeId c;
  do {
    c = draw(rng);
  } while (c == exclude);
  return c;
}

}  // namespace mce
