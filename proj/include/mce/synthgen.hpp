#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mce/corpus.hpp"

namespace mce {

// Temporal archetypes of how long a code stays relevant.
enum class Profile { peak, stable, sequela };

std::string to_string(Profile p);
Profile parse_profile(const std::string& name);

struct SynthConfig {
  std::size_t n_groups = 10;
  std::size_t codes_per_group = 20;
  std::vector<Profile> profiles;  // per group; empty cycles peak, stable, sequela
  std::size_t n_entities = 2000;
  double episodes_per_entity = 5.0;  // Poisson mean, at least one episode per entity
  int horizon_units = 52;
  double noise_rate = 0.1;  // chance an occupied unit receives one background code
  std::size_t noise_pool = 50;
  double visit_rate = 1.0;  // chance a unit is a visit; emissions elsewhere are lost
  int unit_days = 7;
  // Emissions per episode.
  int peak_emissions = 4;
  int stable_emissions = 8;
  int sequela_emissions = 6;
  int sequela_first = 2;  // elevated phase covers [u0 + first, u0 + last]
  int sequela_last = 26;
  std::uint64_t seed = 1;

  void validate() const;
  Profile profile_of(std::size_t group) const;
};

struct GroupInfo {
  std::size_t group = 0;
  Profile profile = Profile::peak;
  std::vector<std::string> codes;
};

struct SynthCorpus {
  std::vector<RawRecord> records;
  std::vector<GroupInfo> groups;
  std::vector<std::string> noise_codes;
  std::size_t n_events = 0;
  std::size_t n_unique_codes = 0;
};

/// Each entity draws a Poisson number of episodes; an episode picks a group
/// and a start unit u0 and emits codes uniformly from that group:
///   peak     every emission in units [u0, u0+1]
///   stable   emissions uniform over [u0, horizon]
///   sequela  one emission at u0, the rest over [u0+first, u0+last]
/// With visit_rate < 1 each unit of an entity's timeline is a visit with that
/// probability and emissions outside visits are dropped, leaving gaps.
/// Background codes from a disjoint pool land in occupied units with
/// probability noise_rate. Deterministic in the seed.
SynthCorpus generate(const SynthConfig& config);

/// Cluster and neighbour truth: `code<TAB>group` for every group code.
void write_group_labels(std::ostream& out, const SynthCorpus& corpus);
std::string manifest_json(const SynthConfig& config, const SynthCorpus& corpus);

/// Attention mass at offsets |delta| <= window of a 2S+1 profile.
double profile_concentration(std::span<const double> weights, int window);

/// Attention mass at offsets lo <= delta <= hi.
double profile_mass(std::span<const double> weights, int lo, int hi);

}  // namespace mce
