#include "critscene/seed_database.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <mutex>

#include <nlohmann/json.hpp>

#include "critscene/graph_io.hpp"
#include "critscene/random.hpp"

namespace critscene {

std::vector<NodeClass> normalize_multiset(std::vector<NodeClass> classes) {
  std::sort(classes.begin(), classes.end());
  return classes;
}

std::vector<NodeClass> agent_multiset(const TemporalGraph& g) {
  std::vector<NodeClass> out;
  for (const auto& n : g.nodes) {
    if (is_dynamic_agent(n.cls)) out.push_back(n.cls);
  }
  return normalize_multiset(std::move(out));
}

std::string multiset_key(const std::vector<NodeClass>& sorted_classes) {
  std::string key;
  for (std::size_t i = 0; i < sorted_classes.size(); ++i) {
    if (i) key += ',';
    key += to_string(sorted_classes[i]);
  }
  return key;
}

namespace {

std::array<int, kNumNodeClasses> counts(const std::vector<NodeClass>& m) {
  std::array<int, kNumNodeClasses> c{};
  for (NodeClass x : m) ++c[index_of(x)];
  return c;
}

}  // namespace

double multiset_jaccard(const std::vector<NodeClass>& a, const std::vector<NodeClass>& b) {
  const auto ca = counts(a), cb = counts(b);
  int inter = 0, uni = 0;
  for (std::size_t i = 0; i < kNumNodeClasses; ++i) {
    inter += std::min(ca[i], cb[i]);
    uni += std::max(ca[i], cb[i]);
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

bool multiset_includes(const std::vector<NodeClass>& super, const std::vector<NodeClass>& sub) {
  const auto cs = counts(super), cb = counts(sub);
  for (std::size_t i = 0; i < kNumNodeClasses; ++i) {
    if (cs[i] < cb[i]) return false;
  }
  return true;
}

std::string_view to_string(SeedMatch m) {
  switch (m) {
    case SeedMatch::Exact: return "exact";
    case SeedMatch::Superset: return "superset";
    case SeedMatch::Jaccard: return "jaccard";
  }
  return "?";
}

SeedDatabase::SeedDatabase(const SeedDatabase& other) {
  std::shared_lock lock(other.mutex_);
  entries_ = other.entries_;
  keys_ = other.keys_;
}

SeedDatabase& SeedDatabase::operator=(const SeedDatabase& other) {
  if (this == &other) return *this;
  std::unique_lock mine(mutex_, std::defer_lock);
  std::shared_lock theirs(other.mutex_, std::defer_lock);
  std::lock(mine, theirs);
  entries_ = other.entries_;
  keys_ = other.keys_;
  return *this;
}

std::size_t SeedDatabase::insert(TemporalGraph seed, const Ontology& ont) {
  if (seed.flavor != Flavor::DatabaseSeed) {
    throw GraphError("seed database only stores database seeds");
  }
  validate(seed, ont);
  auto key = agent_multiset(seed);
  std::unique_lock lock(mutex_);
  entries_.push_back(std::move(seed));
  keys_.push_back(std::move(key));
  return entries_.size() - 1;
}

SeedSample SeedDatabase::sample(std::vector<NodeClass> agents, std::uint64_t rng_seed) const {
  agents = normalize_multiset(std::move(agents));
  std::shared_lock lock(mutex_);
  if (entries_.empty()) throw GraphError("seed database is empty");

  Rng rng(rng_seed);
  std::vector<std::size_t> exact, superset;
  for (std::size_t i = 0; i < keys_.size(); ++i) {
    if (keys_[i] == agents) {
      exact.push_back(i);
    } else if (multiset_includes(keys_[i], agents)) {
      superset.push_back(i);
    }
  }
  if (!exact.empty()) {
    const std::size_t i = exact[rng.below(exact.size())];
    return {entries_[i], i, SeedMatch::Exact};
  }
  if (!superset.empty()) {
    const std::size_t i = superset[rng.below(superset.size())];
    return {entries_[i], i, SeedMatch::Superset};
  }
  std::size_t best = 0;
  double best_score = -1.0;
  for (std::size_t i = 0; i < keys_.size(); ++i) {
    const double s = multiset_jaccard(keys_[i], agents);
    if (s > best_score) {
      best_score = s;
      best = i;
    }
  }
  return {entries_[best], best, SeedMatch::Jaccard};
}

std::size_t SeedDatabase::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

TemporalGraph SeedDatabase::entry(std::size_t i) const {
  std::shared_lock lock(mutex_);
  return entries_.at(i);
}

void SeedDatabase::save(const std::filesystem::path& dir) const {
  std::shared_lock lock(mutex_);
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "seeds.jsonl", std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + (dir / "seeds.jsonl").string());
  std::map<std::string, std::vector<std::uint64_t>> index;
  std::uint64_t offset = 0;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const std::string line = graph_to_line(entries_[i]) + "\n";
    index[multiset_key(keys_[i])].push_back(offset);
    out << line;
    offset += line.size();
  }
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, offsets] : index) j[k] = offsets;
  std::ofstream idx(dir / "index.json", std::ios::binary);
  idx << j.dump(2) << '\n';
}

SeedDatabase SeedDatabase::load(const std::filesystem::path& dir, const Ontology& ont) {
  SeedDatabase db;
  for (auto& g : read_graphs_file((dir / "seeds.jsonl").string())) db.insert(std::move(g), ont);
  return db;
}

}  // namespace critscene
