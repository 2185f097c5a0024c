#pragma once

#include <cstdint>
#include <filesystem>
#include <shared_mutex>
#include <string>
#include <vector>

#include "critscene/scene_graph.hpp"

namespace critscene {

/// Sorted multiset of dynamic-agent classes; traffic lights and locations are
/// part of the seed structure, not of the lookup key.
std::vector<NodeClass> agent_multiset(const TemporalGraph& g);
std::vector<NodeClass> normalize_multiset(std::vector<NodeClass> classes);
/// "Car,Pedestrian" style key of a sorted multiset; empty multiset is "".
std::string multiset_key(const std::vector<NodeClass>& sorted_classes);
/// |A ∩ B| / |A ∪ B| over multisets; 1.0 when both are empty.
double multiset_jaccard(const std::vector<NodeClass>& a, const std::vector<NodeClass>& b);
/// True iff every class of `sub` occurs in `super` at least as often.
bool multiset_includes(const std::vector<NodeClass>& super, const std::vector<NodeClass>& sub);

enum class SeedMatch { Exact, Superset, Jaccard };
std::string_view to_string(SeedMatch m);

struct SeedSample {
  TemporalGraph seed;
  std::size_t index = 0;
  SeedMatch match = SeedMatch::Exact;
};

/// Database seeds indexed by agent multiset. Reads take a shared lock,
/// inserts an exclusive one.
class SeedDatabase {
 public:
  SeedDatabase() = default;
  SeedDatabase(const SeedDatabase& other);
  SeedDatabase& operator=(const SeedDatabase& other);

  /// Validates `seed` as a DatabaseSeed; returns its entry index.
  std::size_t insert(TemporalGraph seed, const Ontology& ont);

  /// Uniform among exact multiset matches, else uniform among supersets, else
  /// the highest Jaccard similarity (lowest index on ties).
  SeedSample sample(std::vector<NodeClass> agents, std::uint64_t rng_seed) const;

  std::size_t size() const;
  TemporalGraph entry(std::size_t i) const;

  /// Writes `seeds.jsonl` and `index.json` (key -> byte offsets of lines).
  void save(const std::filesystem::path& dir) const;
  static SeedDatabase load(const std::filesystem::path& dir, const Ontology& ont);

 private:
  mutable std::shared_mutex mutex_;
  std::vector<TemporalGraph> entries_;
  std::vector<std::vector<NodeClass>> keys_;
};

}  // namespace critscene
