#include "mce/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <json.hpp>

#include "mce/error.hpp"
#include "mce/negsample.hpp"
#include "mce/random.hpp"

namespace mce {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b);
}

// An occurrence in bucket b has a context iff it shares its bucket or a
// neighbouring bucket lies within the scope.
bool bucket_has_context(const BucketedSequence& seq, std::size_t b, int scope) {
  const auto& buckets = seq.buckets;
  if (buckets[b].codes.size() > 1) return true;
  if (b > 0 && buckets[b].index - buckets[b - 1].index <= scope) return true;
  if (b + 1 < buckets.size() && buckets[b + 1].index - buckets[b].index <= scope) return true;
  return false;
}

template <typename Real>
struct Worker {
  const TrainConfig& config;
  const NegSampler& sampler;
  const std::vector<double>& keep;
  const std::uint64_t total;

  Rng rng;
  StepScratch<Real> scratch;
  ContextSet ctx;
  BucketedSequence filtered;
  SubsampleMap kept;
  std::vector<CodeId> negatives;

  double loss_sum = 0;
  std::uint64_t steps = 0;
  std::uint64_t attention_ops = 0;
  double last_lr = 0;

  Worker(const TrainConfig& c, const NegSampler& s, const std::vector<double>& k,
         std::uint64_t t, std::uint64_t seed)
      : config(c), sampler(s), keep(k), total(t), rng(seed) {
    negatives.resize(config.negatives);
  }

  void reset_epoch_stats() {
    loss_sum = 0;
    steps = 0;
  }

  template <typename Progress>
  void run_entity(ModelParams<Real>& params, const BucketedSequence& seq, Progress&& advance) {
    subsample(seq, keep, rng, filtered, kept);
    const StepOptions opts{!config.freeze_attention};
    std::size_t occ = 0;
    for (std::size_t b = 0; b < seq.buckets.size(); ++b) {
      const bool eligible = bucket_has_context(seq, b, config.scope);
      for (std::size_t i = 0; i < seq.buckets[b].codes.size(); ++i, ++occ) {
        if (!eligible) continue;
        const double lr = lr_schedule(advance(), total, config.alpha);
        if (kept.bucket[occ] < 0) continue;
        assemble_contexts(filtered, static_cast<std::size_t>(kept.bucket[occ]),
                          static_cast<std::size_t>(kept.code[occ]), config.scope, config.gamma,
                          ctx);
        if (ctx.entries.empty()) continue;
        for (auto& n : negatives) n = sampler.draw(rng, ctx.target);
        double loss;
        if (config.mode == Mode::mce) {
          loss = train_step(params, ctx, std::span<const CodeId>(negatives), static_cast<Real>(lr),
                            scratch, opts);
          attention_ops += ctx.entries.size();
        } else {
          loss = cbow_train_step(params, ctx, std::span<const CodeId>(negatives),
                                 static_cast<Real>(lr), scratch);
        }
        loss_sum += loss;
        ++steps;
        last_lr = lr;
      }
    }
  }
};

std::vector<std::size_t> epoch_order(std::size_t n, const TrainConfig& config, int epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (config.shuffle) {
    Rng rng(stream_seed(config.seed, 0x5348554646ull, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
  }
  return order;
}

template <typename Real>
void train_serial(const Corpus& corpus, const TrainConfig& config, const NegSampler& sampler,
                  const std::vector<double>& keep, std::uint64_t total, ModelParams<Real>& params,
                  TrainReport& report, const EpochCallback& on_epoch) {
  Worker<Real> worker(config, sampler, keep, total, stream_seed(config.seed, 1, 0));
  std::uint64_t progress = 0;
  auto advance = [&progress] { return progress++; };
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    worker.reset_epoch_stats();
    for (std::size_t e : epoch_order(corpus.sequences.size(), config, epoch)) {
      worker.run_entity(params, corpus.sequences[e], advance);
    }
    double mean = worker.steps ? worker.loss_sum / static_cast<double>(worker.steps) : 0.0;
    report.mean_loss_per_epoch.push_back(mean);
    report.steps_per_epoch.push_back(worker.steps);
    report.targets += worker.steps;
    if (on_epoch) on_epoch(epoch, mean, worker.steps);
  }
  report.attention_ops = worker.attention_ops;
  report.final_lr = worker.last_lr;
}

template <typename Real>
void train_parallel(const Corpus& corpus, const TrainConfig& config, const NegSampler& sampler,
                    const std::vector<double>& keep, std::uint64_t total,
                    ModelParams<Real>& params, TrainReport& report,
                    const EpochCallback& on_epoch) {
  std::atomic<std::uint64_t> progress{0};
  auto advance = [&progress] { return progress.fetch_add(1, std::memory_order_relaxed); };
  const int workers = config.workers;
  const std::size_t n = corpus.sequences.size();
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = epoch_order(n, config, epoch);
    double loss_sum = 0;
    std::uint64_t steps = 0;
    std::uint64_t ops = 0;
    double last_lr = 0;
#pragma omp parallel num_threads(workers) reduction(+ : loss_sum, steps, ops)
    {
#ifdef _OPENMP
      const int t = omp_get_thread_num();
      const int nt = omp_get_num_threads();
#else
      const int t = 0;
      const int nt = 1;
#endif
      Worker<Real> worker(config, sampler, keep, total,
                          stream_seed(config.seed, static_cast<std::uint64_t>(t) + 1,
                                      static_cast<std::uint64_t>(epoch) + 1));
      const std::size_t begin = n * static_cast<std::size_t>(t) / static_cast<std::size_t>(nt);
      const std::size_t end = n * static_cast<std::size_t>(t + 1) / static_cast<std::size_t>(nt);
      for (std::size_t i = begin; i < end; ++i) {
        worker.run_entity(params, corpus.sequences[order[i]], advance);
      }
      loss_sum += worker.loss_sum;
      steps += worker.steps;
      ops += worker.attention_ops;
#pragma omp critical
      if (worker.steps > 0 && (last_lr == 0 || worker.last_lr < last_lr)) last_lr = worker.last_lr;
    }
    double mean = steps ? loss_sum / static_cast<double>(steps) : 0.0;
    report.mean_loss_per_epoch.push_back(mean);
    report.steps_per_epoch.push_back(steps);
    report.targets += steps;
    report.attention_ops += ops;
    report.final_lr = last_lr;
    if (on_epoch) on_epoch(epoch, mean, steps);
  }
}

}  // namespace

std::string to_string(Mode mode) { return mode == Mode::mce ? "mce" : "cbow"; }

Mode parse_mode(const std::string& name) {
  if (name == "mce") return Mode::mce;
  if (name == "cbow") return Mode::cbow;
  throw UsageError("unknown mode '" + name + "' (expected mce or cbow)");
}

void TrainConfig::validate() const {
  if (dim < 1) throw UsageError("dim must be >= 1");
  if (scope < 0) throw UsageError("scope must be >= 0");
  if (gamma < 1) throw UsageError("gamma must be >= 1");
  if (negatives < 1) throw UsageError("negatives must be >= 1");
  if (!(alpha > 0)) throw UsageError("alpha must be > 0");
  if (epochs < 1) throw UsageError("epochs must be >= 1");
  if (min_count < 1) throw UsageError("min_count must be >= 1");
  if (!(sample_threshold > 0)) throw UsageError("sample threshold must be > 0");
  if (time_unit_days < 1) throw UsageError("time unit must be >= 1 day");
  if (workers < 1) throw UsageError("workers must be >= 1");
}

Corpus make_corpus(const EncodedCorpus& encoded, std::int64_t time_unit_days) {
  Corpus corpus{encoded.vocab, {}, {}};
  corpus.entity_ids.reserve(encoded.records.size());
  corpus.sequences.reserve(encoded.records.size());
  for (const auto& r : encoded.records) {
    if (r.events.empty()) continue;
    corpus.entity_ids.push_back(r.entity_id);
    corpus.sequences.push_back(bucketize(r, time_unit_days));
  }
  return corpus;
}

void assemble_contexts(const BucketedSequence& seq, std::size_t bucket_pos, std::size_t code_pos,
                       int scope, std::size_t gamma, ContextSet& out) {
  const auto& buckets = seq.buckets;
  const Bucket& home = buckets.at(bucket_pos);
  out.target = home.codes.at(code_pos);
  out.entries.clear();

  auto take = [&](const Bucket& bucket, int delta, std::size_t skip) {
    for (std::size_t i = 0; i < bucket.codes.size() && out.entries.size() < gamma; ++i) {
      if (i != skip) out.entries.push_back(ContextEntry{bucket.codes[i], delta});
    }
  };
  take(home, 0, code_pos);

  // Walk outward; at equal distance the past bucket goes first.
  std::size_t left = bucket_pos;  // next past bucket is left - 1
  std::size_t right = bucket_pos + 1;
  const std::int64_t t = home.index;
  while (out.entries.size() < gamma) {
    std::int64_t dl = left > 0 ? t - buckets[left - 1].index : INT64_MAX;
    std::int64_t dr = right < buckets.size() ? buckets[right].index - t : INT64_MAX;
    if (dl > scope) dl = INT64_MAX;
    if (dr > scope) dr = INT64_MAX;
    if (dl == INT64_MAX && dr == INT64_MAX) break;
    if (dl <= dr) {
      --left;
      take(buckets[left], -static_cast<int>(dl), SIZE_MAX);
    } else {
      take(buckets[right], static_cast<int>(dr), SIZE_MAX);
      ++right;
    }
  }
}

ContextSet assemble_contexts(const BucketedSequence& seq, std::size_t bucket_pos,
                             std::size_t code_pos, int scope, std::size_t gamma) {
  ContextSet out;
  assemble_contexts(seq, bucket_pos, code_pos, scope, gamma, out);
  return out;
}

double lr_schedule(std::uint64_t processed, std::uint64_t total, double alpha0) {
  if (total == 0 || processed > total) throw UsageError("lr_schedule: need processed <= total, total > 0");
  double remaining = 1.0 - static_cast<double>(processed) / static_cast<double>(total);
  return alpha0 * std::max(remaining, 1e-4);
}

std::uint64_t count_eligible_targets(const TrainConfig& config, const Corpus& corpus) {
  std::uint64_t n = 0;
  for (const auto& seq : corpus.sequences) {
    for (std::size_t b = 0; b < seq.buckets.size(); ++b) {
      if (bucket_has_context(seq, b, config.scope)) n += seq.buckets[b].codes.size();
    }
  }
  return n;
}

std::uint64_t count_attention_ops(const TrainConfig& config, const Corpus& corpus) {
  std::uint64_t ops = 0;
  ContextSet ctx;
  for (const auto& seq : corpus.sequences) {
    for (std::size_t b = 0; b < seq.buckets.size(); ++b) {
      for (std::size_t i = 0; i < seq.buckets[b].codes.size(); ++i) {
        assemble_contexts(seq, b, i, config.scope, config.gamma, ctx);
        ops += ctx.entries.size();
      }
    }
  }
  return ops;
}

template <typename Real>
TrainResult<Real> train(const Corpus& corpus, const TrainConfig& config,
                        const EpochCallback& on_epoch) {
  config.validate();
  if (corpus.vocab.empty() || corpus.sequences.empty()) throw DataError("empty corpus");
  const auto start = std::chrono::steady_clock::now();

  const std::uint64_t eligible = count_eligible_targets(config, corpus);
  if (eligible == 0) throw DataError("corpus has no target with a non-empty context");
  const std::uint64_t total = eligible * static_cast<std::uint64_t>(config.epochs);

  const NegSampler sampler(corpus.vocab);
  const std::vector<double> keep = keep_probabilities(corpus.vocab, config.sample_threshold);

  TrainResult<Real> result{
      init_params<Real>(corpus.vocab.size(), config.dim, config.scope, config.seed), {}};
  result.report.eligible_targets = eligible;
  result.report.epochs = config.epochs;

  if (config.workers == 1) {
    train_serial(corpus, config, sampler, keep, total, result.params, result.report, on_epoch);
  } else {
    train_parallel(corpus, config, sampler, keep, total, result.params, result.report, on_epoch);
  }

  if (!result.params.all_finite()) throw InvariantError("training produced non-finite parameters");
  result.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

template TrainResult<float> train<float>(const Corpus&, const TrainConfig&, const EpochCallback&);
template TrainResult<double> train<double>(const Corpus&, const TrainConfig&, const EpochCallback&);

std::string report_json(const TrainReport& report) {
  nlohmann::ordered_json j;
  j["targets"] = report.targets;
  j["epochs"] = report.epochs;
  j["final_lr"] = report.final_lr;
  j["mean_loss_per_epoch"] = report.mean_loss_per_epoch;
  j["wall_seconds"] = report.wall_seconds;
  j["eligible_targets_per_epoch"] = report.eligible_targets;
  j["steps_per_epoch"] = report.steps_per_epoch;
  j["attention_ops"] = report.attention_ops;
  return j.dump(2) + "\n";
}

}  // namespace mce
