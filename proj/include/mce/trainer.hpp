#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mce/corpus.hpp"
#include "mce/model.hpp"

namespace mce {

enum class Mode { mce, cbow };

std::string to_string(Mode mode);
Mode parse_mode(const std::string& name);

// Defaults follow the published setup: 100-d vectors, 20-week scope, at most
// 60 contexts (twice a 30-token window), 5 negatives, lr 0.025, weekly units.
struct TrainConfig {
  std::size_t dim = 100;
  int scope = 20;
  std::size_t gamma = 60;
  std::size_t negatives = 5;
  double alpha = 0.025;
  int epochs = 5;
  std::uint64_t min_count = 5;
  double sample_threshold = 1e-4;
  std::int64_t time_unit_days = 7;
  int workers = 1;
  std::uint64_t seed = 1;
  Mode mode = Mode::mce;
  bool freeze_attention = false;
  bool shuffle = false;

  void validate() const;
};

// Epoch presets used for the two published corpora.
inline constexpr int kEpochsSmallCorpus = 30;
inline constexpr int kEpochsLargeCorpus = 5;

struct Corpus {
  Vocabulary vocab;
  std::vector<std::string> entity_ids;
  std::vector<BucketedSequence> sequences;
};

Corpus make_corpus(const EncodedCorpus& encoded, std::int64_t time_unit_days);

/// Contexts of the occurrence at (bucket_pos, code_pos): every other
/// occurrence within S buckets of the target. Past Gamma entries, nearer
/// offsets win, past beats future at equal distance, and record order decides
/// within a bucket. Entries come out in that priority order.
ContextSet assemble_contexts(const BucketedSequence& seq, std::size_t bucket_pos,
                             std::size_t code_pos, int scope, std::size_t gamma);
void assemble_contexts(const BucketedSequence& seq, std::size_t bucket_pos,
                       std::size_t code_pos, int scope, std::size_t gamma, ContextSet& out);

/// Linear decay alpha0 * max(1 - processed/total, 1e-4).
double lr_schedule(std::uint64_t processed, std::uint64_t total, double alpha0);

/// Targets whose context set is non-empty without subsampling, per epoch.
std::uint64_t count_eligible_targets(const TrainConfig& config, const Corpus& corpus);

/// Attention-score fetches one epoch performs without subsampling: the sum of
/// context sizes over all eligible targets. Bounded by targets * Gamma.
std::uint64_t count_attention_ops(const TrainConfig& config, const Corpus& corpus);

struct TrainReport {
  std::uint64_t targets = 0;           // training steps performed, all epochs
  std::uint64_t eligible_targets = 0;  // per epoch, before subsampling
  int epochs = 0;
  double final_lr = 0;
  std::vector<double> mean_loss_per_epoch;
  std::vector<std::uint64_t> steps_per_epoch;
  std::uint64_t attention_ops = 0;     // all epochs
  double wall_seconds = 0;
};

template <typename Real>
struct TrainResult {
  ModelParams<Real> params;
  TrainReport report;
};

using EpochCallback = std::function<void(int epoch, double mean_loss, std::uint64_t steps)>;

/// Trains with one worker (serial reference loop, bit-deterministic) or with
/// `workers` OpenMP threads doing lock-free asynchronous SGD over disjoint
/// entity ranges.
template <typename Real>
TrainResult<Real> train(const Corpus& corpus, const TrainConfig& config,
                        const EpochCallback& on_epoch = {});

std::string report_json(const TrainReport& report);

}  // namespace mce
