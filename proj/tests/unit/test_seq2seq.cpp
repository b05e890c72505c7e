#include <doctest.h>

#include <cmath>

#include "ccgen/common.hpp"
#include "ccgen/nn/grad_check.hpp"
#include "ccgen/nn/optim.hpp"
#include "ccgen/rng.hpp"
#include "ccgen/sampler.hpp"
#include "ccgen/seq2seq.hpp"

using namespace ccgen;
using nn::Matrix;

namespace {

using MatD = Matrix<double>;

// Direct transcription of the decoder recurrence, independent of the tape.
struct RefLstm {
  const ParamStore<double>& p;

  const MatD& w(const std::string& n) const { return p.at(n).data; }
  static MatD sig(const MatD& x) { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); }

  void step(const MatD& x, MatD& m, MatD& c) const {
    const MatD i = sig(x * w("lstm.W_ix") + m * w("lstm.W_im") + w("lstm.b_i"));
    const MatD f = sig(x * w("lstm.W_fx") + m * w("lstm.W_fm") + w("lstm.b_f"));
    const MatD o = sig(x * w("lstm.W_ox") + m * w("lstm.W_om") + w("lstm.b_o"));
    const MatD g = (x * w("lstm.W_cx") + m * w("lstm.W_cm") + w("lstm.b_c")).array().tanh().matrix();
    c = (f.array() * c.array() + i.array() * g.array()).matrix();
    m = (o.array() * c.array().tanh()).matrix();
  }

  double log_prob(const EncodedRecord& r, const TokenSequence& s) const {
    const auto d = w("encoder.bias").cols();
    MatD x = w("encoder.bias");
    for (auto b : r.set_indices()) x += w("encoder.weight").row(static_cast<Eigen::Index>(b));
    MatD m = MatD::Zero(1, d), c = MatD::Zero(1, d);
    step(x, m, c);
    double total = 0.0;
    for (std::size_t t = 0; t <= s.content_len; ++t) {
      step(w("embedding.weight").row(s.ids[t]), m, c);
      const MatD z = m * w("output.weight") + w("output.bias");
      const double mx = z.maxCoeff();
      const double lse = mx + std::log((z.array() - mx).exp().sum());
      total += z(0, s.ids[t + 1]) - lse;
    }
    return total;
  }
};

struct Toy {
  std::vector<EncodedRecord> records;
  std::vector<TokenSequence> sentences;
  std::vector<PairView> views() const {
    std::vector<PairView> v;
    for (std::size_t i = 0; i < records.size(); ++i) v.push_back({&records[i], &sentences[i]});
    return v;
  }
};

Toy toy_pairs(std::size_t n, std::size_t record_dim, std::size_t vocab, std::size_t max_len, std::uint64_t seed) {
  Rng rng(seed);
  Toy t;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> bits;
    for (std::size_t b = 0; b < record_dim; ++b) {
      if (rng.bernoulli(0.3)) bits.push_back(b);
    }
    t.records.push_back(EncodedRecord::from_indices(bits, record_dim));
    std::vector<int> content(1 + rng.below(max_len));
    for (auto& tok : content) tok = kReservedTokens + static_cast<int>(rng.below(vocab - kReservedTokens));
    t.sentences.push_back(make_sequence(content, max_len));
  }
  return t;
}

}  // namespace

TEST_CASE("parameter layout") {
  const auto p = make_seq2seq_params<float>({7, 20, 8});
  CHECK(p.at("encoder.weight").rows() == 7);
  CHECK(p.at("embedding.weight").rows() == 20);
  CHECK(p.at("output.weight").cols() == 20);
  CHECK(seq2seq_dims(p) == Seq2SeqDims{7, 20, 8});
  CHECK_THROWS_AS(make_seq2seq_params<float>({7, 3, 8}), ValidationError);
}

TEST_CASE("batch loss matches an independent recurrence") {
  auto p = make_seq2seq_params<double>({6, 20, 8});
  nn::init_params(p, 3);
  const auto toy = toy_pairs(4, 6, 20, 5, 11);
  const RefLstm ref{p};
  double mean_nll = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const double lp = ref.log_prob(toy.records[i], toy.sentences[i]);
    CHECK(sequence_log_prob(toy.records[i], toy.sentences[i], p) == doctest::Approx(lp).epsilon(1e-10));
    mean_nll -= lp / 4.0;
  }
  nn::Tape<double> tape(&p);
  const auto views = toy.views();
  const auto loss = seq2seq_batch_loss(tape, std::span<const PairView>(views));
  CHECK(tape.scalar(loss) == doctest::Approx(mean_nll).epsilon(1e-10));
}

TEST_CASE("seq2seq gradients pass the finite-difference check") {
  auto p = make_seq2seq_params<double>({6, 20, 8});
  nn::init_params(p, 5);
  const auto toy = toy_pairs(3, 6, 20, 4, 12);
  const auto views = toy.views();
  nn::LossFn fn = [&](const ParamStore<double>& params, ParamStore<double>* g) {
    nn::Tape<double> tape(&params);
    auto loss = seq2seq_batch_loss(tape, std::span<const PairView>(views));
    if (g) {
      tape.backward(loss);
      tape.accumulate_gradients(*g);
    }
    return tape.scalar(loss);
  };
  nn::GradCheckOptions opt;
  opt.eps = 1e-5;
  opt.floor = 1e-7;
  const auto r = nn::grad_check(fn, p, opt);
  INFO("worst " << r.worst_param << "[" << r.worst_index << "] analytic " << r.worst_analytic << " numeric "
                << r.worst_numeric);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("fused inference matches lstm_step") {
  auto pd = make_seq2seq_params<double>({6, 20, 8});
  nn::init_params(pd, 9);
  const auto pf = pd.cast<float>();
  const auto toy = toy_pairs(1, 6, 20, 4, 2);
  const Seq2SeqInference inf(pf);
  auto s = inf.start(toy.records[0]);
  auto r = start_decoding(toy.records[0], pf);
  for (int tok : {5, 7, 19}) {
    CHECK((s.m - r.m).cwiseAbs().maxCoeff() < 1e-5f);
    const RowVector<double> lp = inf.log_probs(s);
    const RowVector<double> dist = step_distribution(r, pf);
    for (Eigen::Index j = 0; j < lp.size(); ++j) CHECK(std::exp(lp(j)) == doctest::Approx(dist(j)).epsilon(1e-4));
    s = inf.advance(s, tok);
    r = lstm_step<float>(pf.at("embedding.weight").data.row(tok), r, pf);
  }
}

TEST_CASE("training lowers validation loss on a learnable mapping") {
  // Sentence is a deterministic function of the record.
  Toy toy;
  for (int i = 0; i < 64; ++i) {
    const std::size_t a = static_cast<std::size_t>(i % 4), b = 4 + static_cast<std::size_t>(i / 4 % 4);
    const std::vector<std::size_t> bits{a, b};
    toy.records.push_back(EncodedRecord::from_indices(bits, 8));
    const std::vector<int> content{kReservedTokens + static_cast<int>(a), kReservedTokens + static_cast<int>(b)};
    toy.sentences.push_back(make_sequence(content, 4));
  }
  auto p = make_seq2seq_params<float>({8, 11, 16});
  nn::init_params(p, 1);
  const auto views = toy.views();
  const auto before = seq2seq_eval_loss(p, views).per_token();
  TrainConfig cfg;
  cfg.batch = 16;
  cfg.lr = 0.02;
  cfg.max_epochs = 60;
  cfg.patience = 60;
  const auto stats = train_seq2seq(p, views, views, cfg);
  const auto after = seq2seq_eval_loss(p, views).per_token();
  CHECK(after < 0.1 * before);
  CHECK(stats.best_epoch >= 1);

  // Greedy decoding reproduces the mapping.
  const Seq2SeqInference inf(p);
  for (std::size_t i = 0; i < 16; ++i) {
    const auto h = greedy_decode(Seq2SeqDecoder(inf, toy.records[i]), 4);
    CHECK(h.tokens == std::vector<int>(toy.sentences[i].content().begin(), toy.sentences[i].content().end()));
  }
}

TEST_CASE("autoencoder pretraining reduces reconstruction loss") {
  const auto toy = toy_pairs(200, 12, 10, 3, 4);
  AutoencoderStats st;
  const auto enc = pretrain_autoencoder(toy.records, 6, 5, 32, 0.01, 3, &st);
  REQUIRE(st.epoch_loss.size() == 5);
  CHECK(st.epoch_loss.back() < st.initial_loss);
  CHECK(enc.size() == 2);
  auto p = make_seq2seq_params<float>({12, 10, 6});
  warm_start_encoder(p, enc);
  CHECK(p.at("encoder.weight").data == enc.at("encoder.weight").data);
  auto wrong = make_seq2seq_params<float>({12, 10, 7});
  CHECK_THROWS_AS(warm_start_encoder(wrong, enc), ValidationError);
}
