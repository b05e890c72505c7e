#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ccgen/metrics.hpp"
#include "ccgen/skipgram.hpp"

namespace ccgen {

struct NameEntry {
  std::string token;
  bool seed = true;
  // Discovery round that confirmed the name (0 for seeds).
  std::size_t iteration = 0;
  // Query whose neighbor list surfaced the name.
  std::string via;
  bool operator==(const NameEntry&) const = default;
};

// Unique, lowercased name tokens in insertion order.
class NameList {
 public:
  // Returns false when the token is already present.
  bool add(NameEntry entry);
  bool contains(const std::string& token) const;
  const std::vector<NameEntry>& entries() const { return entries_; }
  std::vector<std::string> tokens() const;
  std::size_t size() const { return entries_.size(); }
  bool operator==(const NameList&) const = default;

 private:
  std::vector<NameEntry> entries_;
};

// One token per line; '#' starts a comment. A trailing comment of the form
// "# discovered iteration=<n> via=<query>" carries provenance, anything else
// (or nothing) marks a seed.
NameList read_name_list(std::istream& in);
NameList read_name_list(const std::filesystem::path& path);
void write_name_list(std::ostream& out, const NameList& names);
void write_name_list(const std::filesystem::path& path, const NameList& names);

struct CandidateBlock {
  std::string query;
  std::vector<Neighbor> neighbors;
  // Neighbor tokens marked as names.
  std::vector<std::string> confirmed;
};

// Candidates file: for each query a line "query<TAB><token>" followed by one
// "<neighbor><TAB><similarity><TAB><mark>" line per neighbor. A mark of y, Y,
// x or 1 confirms the neighbor; an empty mark leaves it unconfirmed.
void write_candidates(std::ostream& out, std::span<const CandidateBlock> blocks);
void write_candidates(const std::filesystem::path& path, std::span<const CandidateBlock> blocks);
std::vector<CandidateBlock> read_candidates(std::istream& in);
std::vector<CandidateBlock> read_candidates(const std::filesystem::path& path);

// Iterative neighbor-curation loop, steppable so a human can work through it
// across separate command invocations.
class DiscoverySession {
 public:
  // Throws ValidationError when a seed is not in the embedding vocabulary.
  DiscoverySession(const NameList& seeds, const SkipgramModel& model, std::size_t k = 100);

  bool done() const { return frontier_.empty(); }
  // Number of completed rounds.
  std::size_t iteration() const { return iteration_; }
  const std::vector<std::string>& frontier() const { return frontier_; }
  const NameList& names() const { return names_; }

  // Neighbor lists for every frontier query.
  std::vector<CandidateBlock> candidates() const;
  // Applies one round of curation. New names form the next frontier; a round
  // adding nothing ends the session.
  void confirm(std::span<const CandidateBlock> curated);

  nlohmann::json to_json() const;
  static DiscoverySession from_json(const nlohmann::json& j, const SkipgramModel& model);

 private:
  DiscoverySession(const SkipgramModel& model, std::size_t k) : model_(&model), k_(k) {}

  const SkipgramModel* model_;
  std::size_t k_;
  NameList names_;
  std::vector<std::string> frontier_;
  std::size_t iteration_ = 0;
};

// Returns the neighbor tokens the curator accepts as names.
using Curator = std::function<std::vector<std::string>(const std::string& query, std::span<const Neighbor> neighbors)>;

struct DiscoveryResult {
  NameList names;
  std::size_t iterations = 0;
};

DiscoveryResult name_discovery_session(const NameList& seeds, const SkipgramModel& model, std::size_t k,
                                       const Curator& curator);

struct NameHits {
  // Sentences containing at least one name.
  std::size_t sentences = 0;
  // Sentences containing each name.
  std::map<std::string, std::size_t> per_name;
};

// Whole-token, case-insensitive matching.
NameHits count_name_hits(std::span<const TokenList> sentences, const NameList& names);

}  // namespace ccgen
