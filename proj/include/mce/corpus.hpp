#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mce/random.hpp"

namespace mce {

using CodeId = std::uint32_t;

// A parsed event before codes are mapped to dense ids.
struct TimedCode {
  std::int64_t day = 0;
  std::string code;

  bool operator==(const TimedCode&) const = default;
};

// One entity's events keyed by code string, sorted by day.
struct RawRecord {
  std::string entity_id;
  std::vector<TimedCode> events;

  bool operator==(const RawRecord&) const = default;
};

struct Event {
  std::int64_t day = 0;
  CodeId code = 0;

  bool operator==(const Event&) const = default;
};

// One entity's events over the dense vocabulary, sorted by day (stable).
struct PatientRecord {
  std::string entity_id;
  std::vector<Event> events;

  bool operator==(const PatientRecord&) const = default;
};

struct Bucket {
  std::int64_t index = 0;  // floor(day / time_unit_days)
  std::vector<CodeId> codes;

  bool operator==(const Bucket&) const = default;
};

// Events grouped by time unit. Buckets are non-empty and strictly increasing
// in index; duplicate codes inside a bucket are kept.
struct BucketedSequence {
  std::vector<Bucket> buckets;

  std::size_t code_count() const;
  bool operator==(const BucketedSequence&) const = default;
};

class Vocabulary {
 public:
  Vocabulary() = default;
  // Codes must be unique; counts parallel to codes.
  Vocabulary(std::vector<std::string> codes, std::vector<std::uint64_t> counts);

  std::size_t size() const { return codes_.size(); }
  bool empty() const { return codes_.empty(); }
  const std::string& code(CodeId id) const { return codes_[id]; }
  std::uint64_t count(CodeId id) const { return counts_[id]; }
  std::uint64_t total_count() const { return total_; }
  const std::vector<std::string>& codes() const { return codes_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }
  std::optional<CodeId> find(std::string_view code) const;

  bool operator==(const Vocabulary& o) const {
    return codes_ == o.codes_ && counts_ == o.counts_;
  }

 private:
  std::vector<std::string> codes_;
  std::vector<std::uint64_t> counts_;
  std::uint64_t total_ = 0;
  std::unordered_map<std::string, CodeId> index_;
};

struct EncodedCorpus {
  Vocabulary vocab;
  std::vector<PatientRecord> records;  // records left empty by filtering are dropped
};

/// Parses `entity<TAB>day<TAB>code` lines. Blank lines and lines starting
/// with '#' are skipped. Entities come out in first-appearance order with
/// their events stably sorted by day. Throws ParseError on malformed lines.
std::vector<RawRecord> parse_events(std::istream& in);
std::vector<RawRecord> read_events_file(const std::string& path);

void write_events(std::ostream& out, std::span<const RawRecord> records);

/// Keeps codes occurring at least `min_count` times, ordered by descending
/// count then code string, and re-encodes the records over that vocabulary.
/// Throws DataError if nothing survives.
EncodedCorpus build_vocab(std::span<const RawRecord> records, std::uint64_t min_count);

/// Re-encodes records over an existing vocabulary, dropping unknown codes.
std::vector<PatientRecord> encode(std::span<const RawRecord> records, const Vocabulary& vocab);
std::vector<RawRecord> decode(std::span<const PatientRecord> records, const Vocabulary& vocab);

BucketedSequence bucketize(const PatientRecord& record, std::int64_t time_unit_days);

/// word2vec-style subsampling: min(1, sqrt(t/f) + t/f) with f = count / total.
double keep_probability(std::uint64_t count, std::uint64_t total_count, double sample_threshold);

/// keep_probability for every vocabulary code.
std::vector<double> keep_probabilities(const Vocabulary& vocab, double sample_threshold);

// Where each source occurrence landed after subsampling; -1 when dropped.
struct SubsampleMap {
  std::vector<std::int64_t> bucket;
  std::vector<std::int64_t> code;
};

/// Keeps each occurrence independently with probability keep[code] (no draw
/// is spent when that probability is 1). Buckets left empty disappear.
void subsample(const BucketedSequence& seq, std::span<const double> keep, Rng& rng,
               BucketedSequence& out, SubsampleMap& map);

// Vocabulary file: `<|C|>` header then `code<TAB>count` lines.
void write_vocab(std::ostream& out, const Vocabulary& vocab);
Vocabulary read_vocab(std::istream& in);

}  // namespace mce
