#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ccgen/metrics.hpp"
#include "ccgen/nn/tensor.hpp"

namespace ccgen {

struct SkipgramConfig {
  std::size_t dim = 100;
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double lr = 0.025;
  std::uint64_t seed = 0;
};

// Input and output tables share the row order of `tokens` (frequency
// descending, then alphabetical).
struct SkipgramModel {
  std::vector<std::string> tokens;
  std::vector<std::size_t> counts;
  nn::Matrix<float> input;
  nn::Matrix<float> output;
  std::vector<double> epoch_loss;

  std::size_t size() const { return tokens.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(input.cols()); }
  std::optional<std::size_t> find(const std::string& token) const;
  EmbeddingTable table() const;

  // Rebuilds the token index; call after filling tokens by hand.
  void reindex();

 private:
  std::unordered_map<std::string, std::size_t> index_;
};

// Skipgram with negative sampling over the whole (unfiltered) corpus. Each
// center word predicts the tokens within a window shrunk uniformly at random
// per position; negatives come from the unigram^0.75 distribution and the
// learning rate decays linearly to lr * 1e-4. Throws ValidationError when the
// corpus has fewer than two distinct tokens.
SkipgramModel train_skipgram(std::span<const TokenList> corpus, const SkipgramConfig& config);

struct Neighbor {
  std::string token;
  std::size_t id = 0;
  double similarity = 0.0;
};

// Top-k by cosine over input vectors, excluding the query; ties go to the
// lower id. Throws ValidationError for an unknown token.
std::vector<Neighbor> nearest_neighbors(const SkipgramModel& model, const std::string& token, std::size_t k = 100);

// Checkpoint with tensors skipgram.input / skipgram.output plus a
// "<path>.vocab" file of token<TAB>count lines.
void save_skipgram(const std::filesystem::path& path, const SkipgramModel& model,
                   const std::map<std::string, std::string>& meta = {});
SkipgramModel load_skipgram(const std::filesystem::path& path);

}  // namespace ccgen
