#include "ccgen/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ccgen/common.hpp"
#include "ccgen/rng.hpp"

namespace ccgen {

namespace {

const std::string kReservedNames[kReservedTokens] = {"<pad>", "<sos>", "<eos>"};

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (is_space(c)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string normalize_text(std::string_view text) {
  std::string out;
  for (const auto& tok : tokenize(text)) {
    if (!out.empty()) out.push_back(' ');
    out += tok;
  }
  return out;
}

void Vocabulary::index() {
  ids_.clear();
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!ids_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw FormatError("vocabulary: duplicate token '" + tokens_[i] + "'");
    }
  }
}

Vocabulary Vocabulary::build(std::span<const std::string> corpus, std::size_t min_freq) {
  if (corpus.empty()) throw ValidationError("build_vocab: empty corpus");
  std::map<std::string, std::size_t> counts;
  for (const auto& sentence : corpus) {
    for (auto& tok : tokenize(sentence)) ++counts[std::move(tok)];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : counts) {
    if (n < min_freq) continue;
    if (std::find(std::begin(kReservedNames), std::end(kReservedNames), tok) != std::end(kReservedNames)) continue;
    kept.emplace_back(tok, n);
  }
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocabulary v;
  v.min_freq_ = min_freq;
  for (const auto& r : kReservedNames) {
    v.tokens_.push_back(r);
    v.freqs_.push_back(0);
  }
  for (auto& [tok, n] : kept) {
    v.tokens_.push_back(tok);
    v.freqs_.push_back(n);
  }
  v.index();
  return v;
}

Vocabulary Vocabulary::load(std::istream& in) {
  Vocabulary v;
  std::string line;
  std::size_t lineno = 0;
  std::size_t min_seen = SIZE_MAX;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw FormatError("vocabulary line " + std::to_string(lineno) + ": missing tab");
    std::string tok = line.substr(0, tab);
    std::size_t freq = 0;
    try {
      freq = std::stoull(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw FormatError("vocabulary line " + std::to_string(lineno) + ": bad frequency");
    }
    const std::size_t id = v.tokens_.size();
    if (id < kReservedTokens && tok != kReservedNames[id]) {
      throw FormatError("vocabulary: expected reserved token " + kReservedNames[id] + " on line " +
                        std::to_string(lineno));
    }
    if (id >= kReservedTokens) min_seen = std::min(min_seen, freq);
    v.tokens_.push_back(std::move(tok));
    v.freqs_.push_back(freq);
  }
  if (v.tokens_.size() < kReservedTokens) throw FormatError("vocabulary: missing reserved tokens");
  v.min_freq_ = min_seen == SIZE_MAX ? 0 : min_seen;
  v.index();
  return v;
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open vocabulary " + path.string());
  return load(in);
}

void Vocabulary::save(std::ostream& out) const {
  for (std::size_t i = 0; i < tokens_.size(); ++i) out << tokens_[i] << '\t' << freqs_[i] << '\n';
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  save(out);
}

std::optional<int> Vocabulary::id(std::string_view token) const {
  const auto it = ids_.find(std::string(token));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw ValidationError("token id " + std::to_string(id) + " outside vocabulary of size " +
                          std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

TokenSequence make_sequence(std::span<const int> content, std::size_t max_len) {
  if (content.size() > max_len) {
    throw ValidationError("sequence of " + std::to_string(content.size()) + " tokens exceeds max_len " +
                          std::to_string(max_len));
  }
  TokenSequence s;
  s.ids.assign(max_len + 2, kPad);
  s.ids[0] = kSos;
  for (std::size_t i = 0; i < content.size(); ++i) {
    if (content[i] < kReservedTokens) throw ValidationError("reserved id inside sequence content");
    s.ids[i + 1] = content[i];
  }
  s.ids[content.size() + 1] = kEos;
  s.content_len = content.size();
  return s;
}

TokenSequence encode_sentence(std::string_view text, const Vocabulary& vocab, std::size_t max_len) {
  const auto toks = tokenize(text);
  std::vector<int> ids;
  ids.reserve(toks.size());
  for (const auto& t : toks) {
    const auto id = vocab.id(t);
    if (!id || *id < kReservedTokens) throw ValidationError("out-of-vocabulary token '" + t + "'");
    ids.push_back(*id);
  }
  return make_sequence(ids, max_len);
}

std::string decode_tokens(std::span<const int> content, const Vocabulary& vocab) {
  std::string out;
  for (int id : content) {
    if (!out.empty()) out.push_back(' ');
    out += vocab.token(id);
  }
  return out;
}

std::string decode_tokens(const TokenSequence& seq, const Vocabulary& vocab) {
  if (seq.ids.size() < 2 || seq.ids[0] != kSos || seq.content_len + 1 >= seq.ids.size() ||
      seq.ids[seq.content_len + 1] != kEos) {
    throw ValidationError("malformed token sequence");
  }
  return decode_tokens(seq.content(), vocab);
}

std::vector<RecordText> filter_corpus(std::span<const RecordText> pairs, const Vocabulary& vocab,
                                      std::size_t max_len, FilterStats* stats) {
  FilterStats local;
  std::vector<RecordText> kept;
  for (const auto& p : pairs) {
    const auto toks = tokenize(p.text);
    if (toks.empty()) {
      ++local.dropped_empty;
      continue;
    }
    const bool oov = std::any_of(toks.begin(), toks.end(), [&](const std::string& t) {
      const auto id = vocab.id(t);
      return !id || *id < kReservedTokens;
    });
    if (oov) {
      ++local.dropped_oov;
      continue;
    }
    if (toks.size() > max_len) {
      ++local.dropped_length;
      continue;
    }
    kept.push_back(p);
  }
  local.kept = kept.size();
  if (stats) *stats = local;
  return kept;
}

SplitIndices split_pairs(std::size_t n, double train_fraction, std::size_t test_size, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) throw ValidationError("train fraction must be in (0, 1]");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng = Rng::derive(seed, 0x5e11);
  rng.shuffle(order.begin(), order.end());
  const auto n_train = static_cast<std::size_t>(static_cast<double>(n) * train_fraction + 0.5);
  SplitIndices out;
  out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min(n_train, n)));
  out.valid.assign(order.begin() + static_cast<std::ptrdiff_t>(std::min(n_train, n)), order.end());

  std::vector<std::size_t> pick(out.valid.size());
  for (std::size_t i = 0; i < pick.size(); ++i) pick[i] = i;
  Rng test_rng = Rng::derive(seed, 0x7e57);
  test_rng.shuffle(pick.begin(), pick.end());
  pick.resize(std::min(test_size, pick.size()));
  std::sort(pick.begin(), pick.end());
  for (auto i : pick) out.test.push_back(out.valid[i]);
  return out;
}

Example make_example(const RecordText& pair, const RecordSchema& schema, const Vocabulary& vocab,
                     std::size_t max_len) {
  Example ex;
  ex.record = encode_record(pair.record, schema);
  ex.tokens = encode_sentence(pair.text, vocab, max_len);
  ex.text = normalize_text(pair.text);
  for (std::size_t v = 0; v < schema.size(); ++v) {
    if (schema.variable(v).multi_valued) {
      if (!pair.record.values[v].empty()) ex.primary_dx = pair.record.values[v].front();
      break;
    }
  }
  return ex;
}

void write_examples(std::ostream& out, std::span<const Example> examples) {
  for (const auto& ex : examples) {
    nlohmann::json j;
    j["record_bits"] = ex.record.set_indices();
    j["token_ids"] = ex.tokens.ids;
    j["text"] = ex.text;
    j["primary_dx"] = ex.primary_dx ? nlohmann::json(*ex.primary_dx) : nlohmann::json(nullptr);
    out << j.dump() << '\n';
  }
}

void write_examples(const std::filesystem::path& path, std::span<const Example> examples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  write_examples(out, examples);
}

std::vector<Example> read_examples(std::istream& in, std::size_t record_dim) {
  std::vector<Example> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Example ex;
      const auto bits = j.at("record_bits").get<std::vector<std::size_t>>();
      ex.record = EncodedRecord::from_indices(bits, record_dim);
      ex.tokens.ids = j.at("token_ids").get<std::vector<int>>();
      if (ex.tokens.ids.size() < 2 || ex.tokens.ids[0] != kSos) throw FormatError("token_ids must start with SOS");
      const auto eos = std::find(ex.tokens.ids.begin(), ex.tokens.ids.end(), kEos);
      if (eos == ex.tokens.ids.end()) throw FormatError("token_ids lack EOS");
      ex.tokens.content_len = static_cast<std::size_t>(eos - ex.tokens.ids.begin()) - 1;
      ex.text = j.at("text").get<std::string>();
      if (j.contains("primary_dx") && !j["primary_dx"].is_null()) ex.primary_dx = j["primary_dx"].get<int>();
      out.push_back(std::move(ex));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("pair file line " + std::to_string(lineno) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw FormatError("pair file line " + std::to_string(lineno) + ": " + e.what());
    } catch (const FormatError& e) {
      throw FormatError("pair file line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Example> read_examples(const std::filesystem::path& path, std::size_t record_dim) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  return read_examples(in, record_dim);
}

}  // namespace ccgen
