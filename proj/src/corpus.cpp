#include "mce/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "mce/error.hpp"

namespace mce {

namespace {

bool has_whitespace(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

template <typename Int>
bool parse_int(std::string_view s, Int& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

std::size_t BucketedSequence::code_count() const {
  std::size_t n = 0;
  for (const auto& b : buckets) n += b.codes.size();
  return n;
}

Vocabulary::Vocabulary(std::vector<std::string> codes, std::vector<std::uint64_t> counts)
    : codes_(std::move(codes)), counts_(std::move(counts)) {
  if (codes_.size() != counts_.size()) {
    throw UsageError("vocabulary codes and counts differ in length");
  }
  index_.reserve(codes_.size());
  for (std::size_t i = 0; i < codes_.size(); ++i) {
    if (!index_.emplace(codes_[i], static_cast<CodeId>(i)).second) {
      throw DataError("duplicate vocabulary code '" + codes_[i] + "'");
    }
    total_ += counts_[i];
  }
}

std::optional<CodeId> Vocabulary::find(std::string_view code) const {
  auto it = index_.find(std::string(code));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<RawRecord> parse_events(std::istream& in) {
  std::vector<RawRecord> records;
  std::unordered_map<std::string, std::size_t> slot;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;

    std::string_view view(line);
    std::size_t t1 = view.find('\t');
    std::size_t t2 = t1 == std::string_view::npos ? t1 : view.find('\t', t1 + 1);
    if (t2 == std::string_view::npos || view.find('\t', t2 + 1) != std::string_view::npos) {
      throw ParseError(lineno, "expected 3 tab-separated fields");
    }
    std::string_view entity = view.substr(0, t1);
    std::string_view day_str = view.substr(t1 + 1, t2 - t1 - 1);
    std::string_view code = view.substr(t2 + 1);

    if (entity.empty()) throw ParseError(lineno, "empty entity id");
    std::int64_t day = 0;
    if (!parse_int(day_str, day)) {
      throw ParseError(lineno, "day '" + std::string(day_str) + "' is not an integer");
    }
    if (day < 0) throw ParseError(lineno, "negative day " + std::to_string(day));
    if (code.empty() || has_whitespace(code)) {
      throw ParseError(lineno, "code must be non-empty without whitespace");
    }

    auto [it, inserted] = slot.try_emplace(std::string(entity), records.size());
    if (inserted) records.push_back(RawRecord{std::string(entity), {}});
    records[it->second].events.push_back(TimedCode{day, std::string(code)});
  }
  for (auto& r : records) {
    std::stable_sort(r.events.begin(), r.events.end(),
                     [](const TimedCode& a, const TimedCode& b) { return a.day < b.day; });
  }
  return records;
}

std::vector<RawRecord> read_events_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file '" + path + "'");
  return parse_events(in);
}

void write_events(std::ostream& out, std::span<const RawRecord> records) {
  for (const auto& r : records) {
    for (const auto& e : r.events) out << r.entity_id << '\t' << e.day << '\t' << e.code << '\n';
  }
}

EncodedCorpus build_vocab(std::span<const RawRecord> records, std::uint64_t min_count) {
  if (min_count < 1) throw UsageError("min_count must be >= 1");
  std::unordered_map<std::string, std::uint64_t> raw_counts;
  for (const auto& r : records) {
    for (const auto& e : r.events) ++raw_counts[e.code];
  }
  std::vector<std::pair<std::string, std::uint64_t>> kept;
  for (auto& [code, count] : raw_counts) {
    if (count >= min_count) kept.emplace_back(code, count);
  }
  if (kept.empty()) {
    throw DataError("empty vocabulary: no code occurs at least " + std::to_string(min_count) +
                    " times");
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> codes;
  std::vector<std::uint64_t> counts;
  codes.reserve(kept.size());
  counts.reserve(kept.size());
  for (auto& [code, count] : kept) {
    codes.push_back(std::move(code));
    counts.push_back(count);
  }
  EncodedCorpus out{Vocabulary(std::move(codes), std::move(counts)), {}};
  out.records = encode(records, out.vocab);
  return out;
}

std::vector<PatientRecord> encode(std::span<const RawRecord> records, const Vocabulary& vocab) {
  std::vector<PatientRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    PatientRecord p{r.entity_id, {}};
    p.events.reserve(r.events.size());
    for (const auto& e : r.events) {
      if (auto id = vocab.find(e.code)) p.events.push_back(Event{e.day, *id});
    }
    if (!p.events.empty()) out.push_back(std::move(p));
  }
  return out;
}

std::vector<RawRecord> decode(std::span<const PatientRecord> records, const Vocabulary& vocab) {
  std::vector<RawRecord> out;
  out.reserve(records.size());
  for (const auto& p : records) {
    RawRecord r{p.entity_id, {}};
    r.events.reserve(p.events.size());
    for (const auto& e : p.events) r.events.push_back(TimedCode{e.day, vocab.code(e.code)});
    out.push_back(std::move(r));
  }
  return out;
}

BucketedSequence bucketize(const PatientRecord& record, std::int64_t time_unit_days) {
  if (time_unit_days < 1) throw UsageError("time_unit_days must be >= 1");
  if (record.events.empty()) throw UsageError("cannot bucketize an empty record");
  BucketedSequence seq;
  for (const auto& e : record.events) {
    std::int64_t index = e.day / time_unit_days;  // day >= 0, so this is floor
    if (seq.buckets.empty() || seq.buckets.back().index != index) {
      if (!seq.buckets.empty() && seq.buckets.back().index > index) {
        throw UsageError("record events are not sorted by day");
      }
      seq.buckets.push_back(Bucket{index, {}});
    }
    seq.buckets.back().codes.push_back(e.code);
  }
  return seq;
}

double keep_probability(std::uint64_t count, std::uint64_t total_count, double sample_threshold) {
  if (count == 0 || count > total_count) throw UsageError("keep_probability: need 0 < count <= total");
  if (!(sample_threshold > 0)) throw UsageError("keep_probability: threshold must be positive");
  double ratio = sample_threshold / (static_cast<double>(count) / static_cast<double>(total_count));
  return std::min(1.0, std::sqrt(ratio) + ratio);
}

std::vector<double> keep_probabilities(const Vocabulary& vocab, double sample_threshold) {
  std::vector<double> keep(vocab.size());
  for (std::size_t c = 0; c < keep.size(); ++c) {
    keep[c] = keep_probability(vocab.count(static_cast<CodeId>(c)), vocab.total_count(),
                               sample_threshold);
  }
  return keep;
}

void subsample(const BucketedSequence& seq, std::span<const double> keep, Rng& rng,
               BucketedSequence& out, SubsampleMap& map) {
  out.buckets.clear();
  map.bucket.clear();
  map.code.clear();
  for (const auto& bucket : seq.buckets) {
    Bucket kept{bucket.index, {}};
    for (CodeId c : bucket.codes) {
      const double p = keep[c];
      if (p >= 1.0 || uniform01(rng) < p) {
        map.bucket.push_back(static_cast<std::int64_t>(out.buckets.size()));
        map.code.push_back(static_cast<std::int64_t>(kept.codes.size()));
        kept.codes.push_back(c);
      } else {
        map.bucket.push_back(-1);
        map.code.push_back(-1);
      }
    }
    if (!kept.codes.empty()) out.buckets.push_back(std::move(kept));
  }
}

void write_vocab(std::ostream& out, const Vocabulary& vocab) {
  out << vocab.size() << '\n';
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    out << vocab.code(static_cast<CodeId>(i)) << '\t' << vocab.count(static_cast<CodeId>(i)) << '\n';
  }
}

Vocabulary read_vocab(std::istream& in) {
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line)) throw ParseError(1, "missing vocabulary header");
  std::size_t n = 0;
  if (!parse_int(std::string_view(line), n)) throw ParseError(1, "bad vocabulary header");
  std::vector<std::string> codes;
  std::vector<std::uint64_t> counts;
  codes.reserve(n);
  counts.reserve(n);
  while (codes.size() < n && std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::size_t tab = line.find('\t');
    std::uint64_t count = 0;
    if (tab == std::string::npos || tab == 0 ||
        !parse_int(std::string_view(line).substr(tab + 1), count)) {
      throw ParseError(lineno, "expected code<TAB>count");
    }
    codes.push_back(line.substr(0, tab));
    counts.push_back(count);
  }
  if (codes.size() != n) throw DataError("vocabulary file truncated");
  return Vocabulary(std::move(codes), std::move(counts));
}

}  // namespace mce
