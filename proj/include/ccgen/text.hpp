#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ccgen/schema.hpp"

namespace ccgen {

inline constexpr int kPad = 0;
inline constexpr int kSos = 1;
inline constexpr int kEos = 2;
inline constexpr int kReservedTokens = 3;
inline constexpr std::size_t kDefaultMaxLen = 18;
inline constexpr std::size_t kDefaultMinFreq = 10;

// Lowercase (ASCII) and split on whitespace. No punctuation handling.
std::vector<std::string> tokenize(std::string_view text);

// Tokens re-joined with single spaces.
std::string normalize_text(std::string_view text);

class Vocabulary {
 public:
  // Tokens with corpus frequency >= min_freq, ids assigned by descending
  // frequency with alphabetical tie-break, after the three reserved ids.
  static Vocabulary build(std::span<const std::string> corpus, std::size_t min_freq = kDefaultMinFreq);

  // Token-per-line file: "<token>\t<frequency>", reserved tokens first.
  static Vocabulary load(std::istream& in);
  static Vocabulary load(const std::filesystem::path& path);
  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;

  std::optional<int> id(std::string_view token) const;
  // Throws ValidationError for ids outside the vocabulary.
  const std::string& token(int id) const;
  std::size_t frequency(int id) const { return freqs_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return tokens_.size(); }
  std::size_t min_freq() const { return min_freq_; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_ && freqs_ == o.freqs_; }

 private:
  void index();

  std::vector<std::string> tokens_;
  std::vector<std::size_t> freqs_;
  std::unordered_map<std::string, int> ids_;
  std::size_t min_freq_ = kDefaultMinFreq;
};

// Fixed-capacity id sequence: SOS, content, EOS, then PAD up to max_len + 2.
struct TokenSequence {
  std::vector<int> ids;
  std::size_t content_len = 0;

  std::size_t max_len() const { return ids.size() - 2; }
  std::span<const int> content() const { return std::span<const int>(ids).subspan(1, content_len); }
  bool operator==(const TokenSequence&) const = default;
};

// Throws ValidationError when content exceeds max_len or holds reserved ids.
TokenSequence make_sequence(std::span<const int> content, std::size_t max_len = kDefaultMaxLen);

// Throws ValidationError for OOV or over-length input.
TokenSequence encode_sentence(std::string_view text, const Vocabulary& vocab, std::size_t max_len = kDefaultMaxLen);

// Space-joined tokens strictly between SOS and EOS.
std::string decode_tokens(const TokenSequence& seq, const Vocabulary& vocab);
std::string decode_tokens(std::span<const int> content, const Vocabulary& vocab);

struct FilterStats {
  std::size_t kept = 0;
  std::size_t dropped_oov = 0;
  std::size_t dropped_length = 0;
  std::size_t dropped_empty = 0;
};

// Keeps pairs whose sentence is non-empty, fully in-vocabulary and at most
// max_len tokens. OOV takes precedence when both rules fail.
std::vector<RecordText> filter_corpus(std::span<const RecordText> pairs, const Vocabulary& vocab,
                                      std::size_t max_len = kDefaultMaxLen, FilterStats* stats = nullptr);

// Seeded pair-level split. valid holds the remainder after train; test is a
// seeded sample of valid (in valid order).
struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> valid;
  std::vector<std::size_t> test;
};
SplitIndices split_pairs(std::size_t n, double train_fraction, std::size_t test_size, std::uint64_t seed);

// A preprocessed record-sentence pair.
struct Example {
  EncodedRecord record;
  TokenSequence tokens;
  std::string text;
  std::optional<int> primary_dx;
};

Example make_example(const RecordText& pair, const RecordSchema& schema, const Vocabulary& vocab,
                     std::size_t max_len = kDefaultMaxLen);

// Line-delimited JSON: record_bits (set indices), token_ids, text, primary_dx.
void write_examples(std::ostream& out, std::span<const Example> examples);
void write_examples(const std::filesystem::path& path, std::span<const Example> examples);
std::vector<Example> read_examples(std::istream& in, std::size_t record_dim);
std::vector<Example> read_examples(const std::filesystem::path& path, std::size_t record_dim);

}  // namespace ccgen
