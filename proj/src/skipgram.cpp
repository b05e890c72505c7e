#include "ccgen/skipgram.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "ccgen/common.hpp"
#include "ccgen/nn/checkpoint.hpp"
#include "ccgen/rng.hpp"

namespace ccgen {

namespace {

// -log(sigmoid(x)), stable for large |x|.
double neg_log_sigmoid(double x) { return x >= 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x)); }

}  // namespace

std::optional<std::size_t> SkipgramModel::find(const std::string& token) const {
  const auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

EmbeddingTable SkipgramModel::table() const { return EmbeddingTable(tokens, input); }

void SkipgramModel::reindex() {
  index_.clear();
  for (std::size_t i = 0; i < tokens.size(); ++i) index_.emplace(tokens[i], i);
}

SkipgramModel train_skipgram(std::span<const TokenList> corpus, const SkipgramConfig& config) {
  if (config.dim == 0 || config.window == 0 || config.epochs == 0) {
    throw ValidationError("skipgram: dim, window and epochs must be positive");
  }
  std::unordered_map<std::string, std::size_t> freq;
  for (const auto& s : corpus) {
    for (const auto& t : s) ++freq[t];
  }
  if (freq.size() < 2) throw ValidationError("skipgram: corpus vocabulary needs at least two tokens");

  SkipgramModel m;
  std::vector<std::pair<std::string, std::size_t>> sorted(freq.begin(), freq.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  for (auto& [tok, n] : sorted) {
    m.tokens.push_back(tok);
    m.counts.push_back(n);
  }
  m.reindex();

  const auto V = static_cast<Eigen::Index>(m.size());
  const auto D = static_cast<Eigen::Index>(config.dim);
  Rng init = Rng::derive(config.seed, fnv1a64("skipgram.input"));
  m.input.resize(V, D);
  const double half = 0.5 / static_cast<double>(config.dim);
  for (Eigen::Index i = 0; i < m.input.size(); ++i) m.input.data()[i] = static_cast<float>(init.uniform(-half, half));
  m.output = nn::Matrix<float>::Zero(V, D);

  std::vector<double> cumulative(m.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    acc += std::pow(static_cast<double>(m.counts[i]), 0.75);
    cumulative[i] = acc;
  }

  std::vector<std::vector<std::size_t>> ids(corpus.size());
  std::size_t total_tokens = 0;
  for (std::size_t s = 0; s < corpus.size(); ++s) {
    for (const auto& t : corpus[s]) ids[s].push_back(*m.find(t));
    total_tokens += ids[s].size();
  }
  const double budget = static_cast<double>(total_tokens * config.epochs);

  std::vector<std::size_t> order(corpus.size());
  nn::RowVector<float> grad_in(D);
  std::size_t processed = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng = Rng::derive(config.seed, epoch + 1);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order.begin(), order.end());
    double loss = 0.0;
    std::size_t pairs = 0;
    for (auto s : order) {
      const auto& sent = ids[s];
      for (std::size_t pos = 0; pos < sent.size(); ++pos, ++processed) {
        const double lr = config.lr * std::max(1e-4, 1.0 - static_cast<double>(processed) / budget);
        const std::size_t span = config.window - rng.below(config.window);
        const std::size_t lo = pos >= span ? pos - span : 0;
        const std::size_t hi = std::min(sent.size() - 1, pos + span);
        auto center = m.input.row(static_cast<Eigen::Index>(sent[pos]));
        for (std::size_t c = lo; c <= hi; ++c) {
          if (c == pos) continue;
          grad_in.setZero();
          for (std::size_t d = 0; d <= config.negatives; ++d) {
            std::size_t target;
            double label;
            if (d == 0) {
              target = sent[c];
              label = 1.0;
            } else {
              const double u = rng.uniform() * acc;
              target = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) -
                                                cumulative.begin());
              target = std::min(target, m.size() - 1);
              if (target == sent[c]) continue;
              label = 0.0;
            }
            auto out = m.output.row(static_cast<Eigen::Index>(target));
            const double f = static_cast<double>(center.dot(out));
            loss += label > 0 ? neg_log_sigmoid(f) : neg_log_sigmoid(-f);
            const double sig = 1.0 / (1.0 + std::exp(-f));
            const auto g = static_cast<float>((label - sig) * lr);
            grad_in.noalias() += g * out;
            out.noalias() += g * center;
          }
          center += grad_in;
          ++pairs;
        }
      }
    }
    m.epoch_loss.push_back(pairs ? loss / static_cast<double>(pairs) : 0.0);
  }
  return m;
}

std::vector<Neighbor> nearest_neighbors(const SkipgramModel& model, const std::string& token, std::size_t k) {
  const auto q = model.find(token);
  if (!q) throw ValidationError("nearest_neighbors: unknown token '" + token + "'");
  const nn::Matrix<double> vecs = model.input.cast<double>();
  const Eigen::VectorXd norms = vecs.rowwise().norm();
  const auto qi = static_cast<Eigen::Index>(*q);
  std::vector<Neighbor> all;
  all.reserve(model.size());
  for (Eigen::Index i = 0; i < vecs.rows(); ++i) {
    if (i == qi) continue;
    const double denom = norms(i) * norms(qi);
    const double sim = denom > 0 ? vecs.row(i).dot(vecs.row(qi)) / denom : 0.0;
    all.push_back({model.tokens[static_cast<std::size_t>(i)], static_cast<std::size_t>(i), sim});
  }
  const auto by_rank = [](const Neighbor& a, const Neighbor& b) {
    return a.similarity != b.similarity ? a.similarity > b.similarity : a.id < b.id;
  };
  const std::size_t n = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(), by_rank);
  all.resize(n);
  return all;
}

void save_skipgram(const std::filesystem::path& path, const SkipgramModel& model,
                   const std::map<std::string, std::string>& meta) {
  nn::ParamStore<float> p;
  p.add("skipgram.input", {model.size(), model.dim()});
  p.add("skipgram.output", {model.size(), model.dim()});
  p[0].data = model.input;
  p[1].data = model.output;
  nn::save_checkpoint(path, p, meta);
  std::ofstream vocab(path.string() + ".vocab", std::ios::binary);
  if (!vocab) throw std::runtime_error("cannot write " + path.string() + ".vocab");
  for (std::size_t i = 0; i < model.size(); ++i) vocab << model.tokens[i] << '\t' << model.counts[i] << '\n';
}

SkipgramModel load_skipgram(const std::filesystem::path& path) {
  auto ck = nn::load_checkpoint(path);
  if (!ck.params.contains("skipgram.input") || !ck.params.contains("skipgram.output")) {
    throw FormatError(path.string() + ": not a skipgram checkpoint");
  }
  SkipgramModel m;
  m.input = ck.params.at("skipgram.input").data;
  m.output = ck.params.at("skipgram.output").data;
  std::ifstream vocab(path.string() + ".vocab");
  if (!vocab) throw FormatError("missing " + path.string() + ".vocab");
  std::string line;
  while (std::getline(vocab, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw FormatError(path.string() + ".vocab: malformed line");
    m.tokens.push_back(line.substr(0, tab));
    m.counts.push_back(std::stoull(line.substr(tab + 1)));
  }
  if (m.tokens.size() != static_cast<std::size_t>(m.input.rows())) {
    throw FormatError(path.string() + ": vocabulary does not match the embedding table");
  }
  m.reindex();
  return m;
}

}  // namespace ccgen
