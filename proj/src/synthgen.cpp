#include "mce/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <set>

#include <json.hpp>

#include "mce/error.hpp"
#include "mce/random.hpp"

namespace mce {

namespace {

int poisson(Rng& rng, double mean) {
  const double limit = std::exp(-mean);
  int k = 0;
  double p = 1.0;
  do {
    ++k;
    p *= uniform01(rng);
  } while (p > limit);
  return k - 1;
}

std::int64_t uniform_range(Rng& rng, std::int64_t lo, std::int64_t hi) {
  return lo + static_cast<std::int64_t>(uniform_index(rng, static_cast<std::uint64_t>(hi - lo + 1)));
}

std::string group_code(std::size_t g, std::size_t i) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "G%02zu_%02zu", g, i);
  return buf;
}

std::string noise_code(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "N%02zu", i);
  return buf;
}

struct Emission {
  std::int64_t unit;
  const std::string* code;
};

}  // namespace

std::string to_string(Profile p) {
  switch (p) {
    case Profile::peak: return "peak";
    case Profile::stable: return "stable";
    case Profile::sequela: return "sequela";
  }
  return "?";
}

Profile parse_profile(const std::string& name) {
  if (name == "peak") return Profile::peak;
  if (name == "stable") return Profile::stable;
  if (name == "sequela") return Profile::sequela;
  throw UsageError("unknown profile '" + name + "'");
}

void SynthConfig::validate() const {
  if (n_groups < 1 || codes_per_group < 1) throw UsageError("need at least one group and code");
  if (!profiles.empty() && profiles.size() != n_groups) {
    throw UsageError("profile list must have one entry per group");
  }
  if (n_entities < 1) throw UsageError("need at least one entity");
  if (!(episodes_per_entity > 0)) throw UsageError("episode mean must be > 0");
  if (horizon_units < 1 || unit_days < 1) throw UsageError("horizon and unit must be >= 1");
  if (!(noise_rate >= 0 && noise_rate <= 1)) throw UsageError("noise rate must be in [0, 1]");
  if (noise_rate > 0 && noise_pool < 1) throw UsageError("noise needs a non-empty pool");
  if (!(visit_rate > 0 && visit_rate <= 1)) throw UsageError("visit rate must be in (0, 1]");
  if (peak_emissions < 1 || stable_emissions < 1 || sequela_emissions < 1) {
    throw UsageError("emission counts must be >= 1");
  }
  if (sequela_first < 1 || sequela_last < sequela_first) throw UsageError("bad sequela window");
}

Profile SynthConfig::profile_of(std::size_t group) const {
  if (!profiles.empty()) return profiles[group];
  static constexpr Profile cycle[] = {Profile::peak, Profile::stable, Profile::sequela};
  return cycle[group % 3];
}

SynthCorpus generate(const SynthConfig& config) {
  config.validate();
  SynthCorpus out;
  for (std::size_t g = 0; g < config.n_groups; ++g) {
    GroupInfo info{g, config.profile_of(g), {}};
    for (std::size_t i = 0; i < config.codes_per_group; ++i) info.codes.push_back(group_code(g, i));
    out.groups.push_back(std::move(info));
  }
  for (std::size_t i = 0; i < config.noise_pool; ++i) out.noise_codes.push_back(noise_code(i));

  Rng rng(config.seed);
  std::set<std::string> seen;
  std::vector<Emission> emissions;
  std::vector<std::int64_t> units;
  std::vector<bool> visits;
  const int width = static_cast<int>(std::to_string(config.n_entities).size());
  for (std::size_t e = 0; e < config.n_entities; ++e) {
    emissions.clear();
    const int episodes = std::max(1, poisson(rng, config.episodes_per_entity));
    for (int ep = 0; ep < episodes; ++ep) {
      const GroupInfo& group = out.groups[uniform_index(rng, out.groups.size())];
      const std::int64_t u0 = uniform_range(rng, 0, config.horizon_units - 1);
      auto emit = [&](std::int64_t unit) {
        emissions.push_back({unit, &group.codes[uniform_index(rng, group.codes.size())]});
      };
      switch (group.profile) {
        case Profile::peak:
          for (int i = 0; i < config.peak_emissions; ++i) emit(u0 + uniform_range(rng, 0, 1));
          break;
        case Profile::stable:
          for (int i = 0; i < config.stable_emissions; ++i) {
            emit(uniform_range(rng, u0, config.horizon_units));
          }
          break;
        case Profile::sequela:
          emit(u0);
          for (int i = 0; i < config.sequela_emissions; ++i) {
            emit(u0 + uniform_range(rng, config.sequela_first, config.sequela_last));
          }
          break;
      }
    }
    if (config.visit_rate < 1) {
      std::int64_t last = 0;
      for (const auto& em : emissions) last = std::max(last, em.unit);
      visits.resize(static_cast<std::size_t>(last) + 1);
      for (auto&& v : visits) v = uniform01(rng) < config.visit_rate;
      std::erase_if(emissions, [&](const Emission& em) { return !visits[em.unit]; });
    }
    if (config.noise_rate > 0) {
      units.clear();
      for (const auto& em : emissions) units.push_back(em.unit);
      std::sort(units.begin(), units.end());
      units.erase(std::unique(units.begin(), units.end()), units.end());
      for (std::int64_t u : units) {
        if (uniform01(rng) < config.noise_rate) {
          emissions.push_back({u, &out.noise_codes[uniform_index(rng, out.noise_codes.size())]});
        }
      }
    }

    if (emissions.empty()) continue;  // every episode fell into gaps
    char id[32];
    std::snprintf(id, sizeof id, "E%0*zu", width, e);
    RawRecord record{id, {}};
    record.events.reserve(emissions.size());
    for (const auto& em : emissions) {
      std::int64_t day = em.unit * config.unit_days + uniform_range(rng, 0, config.unit_days - 1);
      record.events.push_back(TimedCode{day, *em.code});
      seen.insert(*em.code);
    }
    std::stable_sort(record.events.begin(), record.events.end(),
                     [](const TimedCode& a, const TimedCode& b) { return a.day < b.day; });
    out.n_events += record.events.size();
    out.records.push_back(std::move(record));
  }
  out.n_unique_codes = seen.size();
  return out;
}

void write_group_labels(std::ostream& out, const SynthCorpus& corpus) {
  for (const auto& g : corpus.groups) {
    for (const auto& code : g.codes) out << code << '\t' << 'g' << g.group << '\n';
  }
}

std::string manifest_json(const SynthConfig& config, const SynthCorpus& corpus) {
  nlohmann::ordered_json j;
  j["seed"] = config.seed;
  j["config"] = {
      {"n_groups", config.n_groups},
      {"codes_per_group", config.codes_per_group},
      {"n_entities", config.n_entities},
      {"episodes_per_entity", config.episodes_per_entity},
      {"horizon_units", config.horizon_units},
      {"noise_rate", config.noise_rate},
      {"noise_pool", config.noise_pool},
      {"visit_rate", config.visit_rate},
      {"unit_days", config.unit_days},
  };
  j["schedules"] = {
      {"peak", {{"emissions", config.peak_emissions}, {"units", "[u0, u0+1]"}}},
      {"stable", {{"emissions", config.stable_emissions}, {"units", "[u0, horizon]"}}},
      {"sequela",
       {{"emissions", config.sequela_emissions + 1},
        {"units", "u0, then [u0+" + std::to_string(config.sequela_first) + ", u0+" +
                      std::to_string(config.sequela_last) + "]"}}},
  };
  nlohmann::ordered_json groups = nlohmann::ordered_json::array();
  for (const auto& g : corpus.groups) {
    groups.push_back({{"group", "g" + std::to_string(g.group)},
                      {"profile", to_string(g.profile)},
                      {"codes", g.codes}});
  }
  j["groups"] = groups;
  j["noise_codes"] = corpus.noise_codes;
  j["stats"] = {{"entities", corpus.records.size()},
                {"events", corpus.n_events},
                {"unique_codes", corpus.n_unique_codes}};
  return j.dump(2) + "\n";
}

double profile_mass(std::span<const double> weights, int lo, int hi) {
  if (weights.size() % 2 == 0) throw UsageError("profile must have 2S+1 entries");
  const int scope = static_cast<int>(weights.size() / 2);
  double mass = 0;
  for (int delta = std::max(lo, -scope); delta <= std::min(hi, scope); ++delta) {
    mass += weights[static_cast<std::size_t>(delta + scope)];
  }
  return mass;
}

double profile_concentration(std::span<const double> weights, int window) {
  const int scope = static_cast<int>(weights.size() / 2);
  if (window < 0 || window > scope) throw UsageError("window must be in [0, S]");
  return profile_mass(weights, -window, window);
}

}  // namespace mce
