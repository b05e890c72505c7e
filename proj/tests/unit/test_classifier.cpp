#include <doctest.h>

#include <cmath>

#include "ccgen/common.hpp"
#include "ccgen/classifier.hpp"
#include "ccgen/nn/grad_check.hpp"
#include "ccgen/nn/optim.hpp"
#include "ccgen/rng.hpp"
#include "support/oracles.hpp"

using namespace ccgen;
using nn::Matrix;

namespace {

using MatD = Matrix<double>;

// Plain-Eigen BiGRU forward for one sentence.
nn::RowVector<double> ref_forward(const std::vector<int>& s, const nn::ParamStore<double>& p) {
  auto w = [&](const std::string& n) -> const MatD& { return p.at(n).data; };
  auto sig = [](const MatD& x) -> MatD { return (1.0 / (1.0 + (-x.array()).exp())).matrix(); };
  const auto H = w("fwd.U_z").rows();
  auto run = [&](const std::string& dir, bool reverse) {
    MatD h = MatD::Zero(1, H);
    for (std::size_t k = 0; k < s.size(); ++k) {
      const int tok = s[reverse ? s.size() - 1 - k : k];
      const MatD x = w("embedding.weight").row(tok);
      const MatD z = sig(x * w(dir + ".W_z") + h * w(dir + ".U_z") + w(dir + ".b_z"));
      const MatD r = sig(x * w(dir + ".W_r") + h * w(dir + ".U_r") + w(dir + ".b_r"));
      const MatD g = (x * w(dir + ".W_h") + (r.array() * h.array()).matrix() * w(dir + ".U_h") + w(dir + ".b_h"))
                         .array()
                         .tanh()
                         .matrix();
      h = (z.array() * h.array() + (1.0 - z.array()) * g.array()).matrix();
    }
    return h;
  };
  MatD both(1, 2 * H);
  both << run("fwd", false), run("bwd", true);
  const MatD logits = both * w("head.weight") + w("head.bias");
  const MatD e = (logits.array() - logits.maxCoeff()).exp().matrix();
  return e / e.sum();
}

std::vector<std::vector<int>> random_sentences(std::size_t n, std::size_t vocab, std::size_t max_len, Rng& rng) {
  std::vector<std::vector<int>> out(n);
  for (auto& s : out) {
    s.resize(1 + rng.below(max_len));
    for (auto& t : s) t = 3 + static_cast<int>(rng.below(vocab - 3));
  }
  return out;
}

std::vector<Sentence> views(const std::vector<std::vector<int>>& s) {
  return std::vector<Sentence>(s.begin(), s.end());
}

}  // namespace

TEST_CASE("forward pass matches a direct recurrence") {
  auto p = make_classifier_params<double>({15, 6, 5, 4});
  nn::init_params(p, 7);
  Rng rng(1);
  for (auto& v : {"fwd.b_z", "bwd.b_h", "head.bias"}) {
    for (std::size_t j = 0; j < p.at(v).size(); ++j) p.at(v).raw()[j] = rng.uniform(-0.5, 0.5);
  }
  const auto sents = random_sentences(6, 15, 7, rng);
  const auto batch = views(sents);
  nn::Tape<double> tape(&p);
  const auto logits = tape.value(classifier_logits(tape, std::span<const Sentence>(batch)));
  for (std::size_t i = 0; i < sents.size(); ++i) {
    const auto want = ref_forward(sents[i], p);
    const auto got = bigru_forward<double>(sents[i], p);
    for (Eigen::Index c = 0; c < 4; ++c) CHECK(got(c) == doctest::Approx(want(c)).epsilon(1e-10));
    // The batched tape logits give the same distribution.
    const MatD row = logits.row(static_cast<Eigen::Index>(i));
    const MatD e = (row.array() - row.maxCoeff()).exp().matrix();
    for (Eigen::Index c = 0; c < 4; ++c) CHECK(e(0, c) / e.sum() == doctest::Approx(want(c)).epsilon(1e-10));
  }
}

TEST_CASE("classifier gradients pass the finite-difference check") {
  auto p = make_classifier_params<double>({12, 5, 4, 3});
  nn::init_params(p, 2);
  Rng rng(4);
  const auto sents = random_sentences(3, 12, 5, rng);
  const auto batch = views(sents);
  const std::vector<int> labels{0, 2, 1};
  nn::LossFn fn = [&](const nn::ParamStore<double>& params, nn::ParamStore<double>* g) {
    nn::Tape<double> tape(&params);
    auto loss = classifier_batch_loss(tape, std::span<const Sentence>(batch), std::span<const int>(labels));
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
  INFO("worst " << r.worst_param << "[" << r.worst_index << "]");
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("weighted metrics hand example") {
  // A=0, B=1
  const std::vector<int> truth{0, 0, 1, 1}, pred{0, 1, 1, 1};
  const auto r = weighted_metrics(pred, truth);
  CHECK(r.sens == doctest::Approx(0.75));
  CHECK(r.ppv == doctest::Approx(5.0 / 6.0));
  CHECK(r.f1 == doctest::Approx(0.7333333).epsilon(1e-6));
  CHECK(r.accuracy == doctest::Approx(0.75));
  CHECK(r.support.at(0) == 2);
}

TEST_CASE("weighted metrics equal the one-vs-rest oracle") {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(40), k = 1 + rng.below(6);
    std::vector<int> truth(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = static_cast<int>(rng.below(k));
      pred[i] = rng.bernoulli(0.5) ? truth[i] : static_cast<int>(rng.below(k + 1));
    }
    const auto got = weighted_metrics(pred, truth);
    const auto want = testing::brute_weighted(pred, truth);
    CHECK(got.sens == doctest::Approx(want.sens).epsilon(1e-12));
    CHECK(got.ppv == doctest::Approx(want.ppv).epsilon(1e-12));
    CHECK(got.f1 == doctest::Approx(want.f1).epsilon(1e-12));
  }
  const std::vector<int> a{1}, b{1, 2};
  CHECK_THROWS_AS(weighted_metrics(a, b), ValidationError);
}

TEST_CASE("classifier learns a keyword rule") {
  // Label is the class of the first keyword token in the sentence.
  Rng rng(5);
  std::vector<std::vector<int>> sents;
  std::vector<int> labels;
  for (int i = 0; i < 300; ++i) {
    const int label = static_cast<int>(rng.below(3));
    std::vector<int> s;
    for (std::size_t j = 0, n = rng.below(3); j < n; ++j) s.push_back(6 + static_cast<int>(rng.below(6)));
    s.insert(s.begin() + static_cast<std::ptrdiff_t>(rng.below(s.size() + 1)), 3 + label);
    sents.push_back(s);
    labels.push_back(label);
  }
  auto p = make_classifier_params<float>({12, 8, 8, 3});
  nn::init_params(p, 1);
  const auto all = views(sents);
  const std::span<const Sentence> train(all.data(), 200), valid(all.data() + 200, 100);
  const std::span<const int> ltrain(labels.data(), 200), lvalid(labels.data() + 200, 100);
  TrainConfig cfg;
  cfg.batch = 32;
  cfg.lr = 0.01;
  cfg.max_epochs = 30;
  cfg.patience = 3;
  train_classifier(p, train, ltrain, valid, lvalid, cfg);
  const auto rep = weighted_metrics(classify(p, valid), lvalid);
  CHECK(rep.accuracy > 0.95);
  const auto tr = transfer_eval(p, valid, valid, lvalid);
  CHECK(tr.authentic.f1 == tr.synthetic.f1);
}
