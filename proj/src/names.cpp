#include "ccgen/names.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "ccgen/common.hpp"
#include "ccgen/text.hpp"

namespace ccgen {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

}  // namespace

bool NameList::add(NameEntry entry) {
  entry.token = lower(trim(entry.token));
  if (entry.token.empty()) throw ValidationError("name list: empty token");
  if (entry.token.find_first_of(" \t") != std::string::npos) {
    throw ValidationError("name list: '" + entry.token + "' is not a single token");
  }
  if (contains(entry.token)) return false;
  entries_.push_back(std::move(entry));
  return true;
}

bool NameList::contains(const std::string& token) const {
  const auto t = lower(token);
  return std::any_of(entries_.begin(), entries_.end(), [&](const NameEntry& e) { return e.token == t; });
}

std::vector<std::string> NameList::tokens() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) out.push_back(e.token);
  return out;
}

NameList read_name_list(std::istream& in) {
  NameList list;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    const auto token = trim(line.substr(0, hash));
    if (token.empty()) continue;
    NameEntry e;
    e.token = token;
    if (hash != std::string::npos) {
      std::istringstream note(line.substr(hash + 1));
      std::string word;
      note >> word;
      if (word == "discovered") {
        e.seed = false;
        while (note >> word) {
          if (word.rfind("iteration=", 0) == 0) e.iteration = std::stoul(word.substr(10));
          if (word.rfind("via=", 0) == 0) e.via = word.substr(4);
        }
      }
    }
    list.add(std::move(e));
  }
  return list;
}

NameList read_name_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read name list " + path.string());
  return read_name_list(in);
}

void write_name_list(std::ostream& out, const NameList& names) {
  out << "# one name per line\n";
  for (const auto& e : names.entries()) {
    out << e.token;
    if (e.seed) {
      out << "\t# seed";
    } else {
      out << "\t# discovered iteration=" << e.iteration << " via=" << e.via;
    }
    out << '\n';
  }
}

void write_name_list(const std::filesystem::path& path, const NameList& names) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_name_list(out, names);
}

void write_candidates(std::ostream& out, std::span<const CandidateBlock> blocks) {
  out << "# mark confirmed names with y in the last column\n";
  for (const auto& b : blocks) {
    out << "query\t" << b.query << '\n';
    for (const auto& n : b.neighbors) {
      const bool marked = std::find(b.confirmed.begin(), b.confirmed.end(), n.token) != b.confirmed.end();
      out << n.token << '\t' << std::fixed << std::setprecision(6) << n.similarity << '\t' << (marked ? "y" : "")
          << '\n';
    }
  }
}

void write_candidates(const std::filesystem::path& path, std::span<const CandidateBlock> blocks) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_candidates(out, blocks);
}

std::vector<CandidateBlock> read_candidates(std::istream& in) {
  std::vector<CandidateBlock> blocks;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line[0] == '#') continue;
    const auto cols = split_tabs(line);
    if (cols[0] == "query") {
      if (cols.size() < 2 || trim(cols[1]).empty()) {
        throw ValidationError("candidates line " + std::to_string(lineno) + ": query without token");
      }
      blocks.push_back({lower(trim(cols[1])), {}, {}});
      continue;
    }
    if (blocks.empty()) throw ValidationError("candidates line " + std::to_string(lineno) + ": neighbor before query");
    if (cols.size() < 2) throw ValidationError("candidates line " + std::to_string(lineno) + ": expected token<TAB>similarity");
    Neighbor n;
    n.token = lower(trim(cols[0]));
    try {
      n.similarity = std::stod(cols[1]);
    } catch (const std::exception&) {
      throw ValidationError("candidates line " + std::to_string(lineno) + ": bad similarity");
    }
    const std::string mark = cols.size() > 2 ? trim(cols[2]) : "";
    if (mark == "y" || mark == "Y" || mark == "x" || mark == "1") blocks.back().confirmed.push_back(n.token);
    blocks.back().neighbors.push_back(std::move(n));
  }
  return blocks;
}

std::vector<CandidateBlock> read_candidates(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read candidates file " + path.string());
  return read_candidates(in);
}

DiscoverySession::DiscoverySession(const NameList& seeds, const SkipgramModel& model, std::size_t k)
    : model_(&model), k_(k) {
  for (const auto& e : seeds.entries()) {
    if (!model.find(e.token)) throw ValidationError("seed name '" + e.token + "' is not in the embedding vocabulary");
    names_.add(e);
    frontier_.push_back(e.token);
  }
}

std::vector<CandidateBlock> DiscoverySession::candidates() const {
  std::vector<CandidateBlock> out;
  for (const auto& q : frontier_) out.push_back({q, nearest_neighbors(*model_, q, k_), {}});
  return out;
}

void DiscoverySession::confirm(std::span<const CandidateBlock> curated) {
  const std::set<std::string> open(frontier_.begin(), frontier_.end());
  std::vector<std::string> next;
  for (const auto& block : curated) {
    if (!open.count(block.query)) continue;
    for (const auto& tok : block.confirmed) {
      if (!model_->find(tok)) throw ValidationError("confirmed name '" + tok + "' is not in the embedding vocabulary");
      if (names_.add({tok, false, iteration_ + 1, block.query})) next.push_back(lower(tok));
    }
  }
  ++iteration_;
  frontier_ = std::move(next);
}

nlohmann::json DiscoverySession::to_json() const {
  nlohmann::json names = nlohmann::json::array();
  for (const auto& e : names_.entries()) {
    names.push_back({{"token", e.token}, {"seed", e.seed}, {"iteration", e.iteration}, {"via", e.via}});
  }
  return {{"k", k_}, {"iteration", iteration_}, {"frontier", frontier_}, {"names", names}};
}

DiscoverySession DiscoverySession::from_json(const nlohmann::json& j, const SkipgramModel& model) {
  try {
    DiscoverySession s(model, j.at("k").get<std::size_t>());
    s.iteration_ = j.at("iteration").get<std::size_t>();
    s.frontier_ = j.at("frontier").get<std::vector<std::string>>();
    for (const auto& e : j.at("names")) {
      s.names_.add({e.at("token").get<std::string>(), e.at("seed").get<bool>(), e.at("iteration").get<std::size_t>(),
                    e.at("via").get<std::string>()});
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("discovery state: ") + e.what());
  }
}

DiscoveryResult name_discovery_session(const NameList& seeds, const SkipgramModel& model, std::size_t k,
                                       const Curator& curator) {
  DiscoverySession session(seeds, model, k);
  while (!session.done()) {
    auto blocks = session.candidates();
    for (auto& b : blocks) b.confirmed = curator(b.query, b.neighbors);
    session.confirm(blocks);
  }
  return {session.names(), session.iteration()};
}

NameHits count_name_hits(std::span<const TokenList> sentences, const NameList& names) {
  NameHits hits;
  const auto toks = names.tokens();
  for (const auto& t : toks) hits.per_name[t] = 0;
  for (const auto& s : sentences) {
    std::set<std::string> seen;
    for (const auto& w : s) {
      const auto lw = lower(w);
      if (hits.per_name.count(lw)) seen.insert(lw);
    }
    if (!seen.empty()) ++hits.sentences;
    for (const auto& n : seen) ++hits.per_name[n];
  }
  return hits;
}

}  // namespace ccgen
