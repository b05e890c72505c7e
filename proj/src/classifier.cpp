#include "ccgen/classifier.hpp"

#include <algorithm>
#include <string>

#include "ccgen/common.hpp"

namespace ccgen {

namespace {

const char* const kDirs[2] = {"fwd", "bwd"};
const char* const kGru[3] = {"z", "r", "h"};

std::string pname(const char* dir, const char* kind, const char* gate) {
  return std::string(dir) + "." + kind + "_" + gate;
}

template <typename T>
typename nn::Tape<T>::Var gru_step(nn::Tape<T>& t, const char* dir, typename nn::Tape<T>::Var x,
                                   typename nn::Tape<T>::Var h) {
  auto pre = [&](const char* g, typename nn::Tape<T>::Var hin) {
    auto a = t.add(t.matmul(x, t.param(pname(dir, "W", g))), t.matmul(hin, t.param(pname(dir, "U", g))));
    return t.add_bias(a, t.param(pname(dir, "b", g)));
  };
  auto z = t.sigmoid(pre("z", h));
  auto r = t.sigmoid(pre("r", h));
  auto g = t.tanh(pre("h", t.mul(r, h)));
  return t.add(t.mul(z, h), t.mul(t.one_minus(z), g));
}

}  // namespace

template <typename T>
nn::ParamStore<T> make_classifier_params(const ClassifierDims& dims) {
  if (dims.vocab_size == 0 || dims.embed == 0 || dims.hidden == 0 || dims.classes == 0) {
    throw ValidationError("classifier: all dimensions must be positive");
  }
  nn::ParamStore<T> p;
  p.add("embedding.weight", {dims.vocab_size, dims.embed});
  for (const char* dir : kDirs) {
    for (const char* g : kGru) {
      p.add(pname(dir, "W", g), {dims.embed, dims.hidden});
      p.add(pname(dir, "U", g), {dims.hidden, dims.hidden});
      p.add(pname(dir, "b", g), {dims.hidden});
    }
  }
  p.add("head.weight", {2 * dims.hidden, dims.classes});
  p.add("head.bias", {dims.classes});
  return p;
}

template <typename T>
ClassifierDims classifier_dims(const nn::ParamStore<T>& params) {
  ClassifierDims d;
  try {
    d.vocab_size = params.at("embedding.weight").rows();
    d.embed = params.at("embedding.weight").cols();
    d.hidden = params.at("fwd.U_z").rows();
    d.classes = params.at("head.weight").cols();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("not a classifier checkpoint: ") + e.what());
  }
  if (!make_classifier_params<T>(d).same_layout(params)) {
    throw ValidationError("classifier checkpoint has an unexpected tensor layout");
  }
  return d;
}

template <typename T>
typename nn::Tape<T>::Var classifier_logits(nn::Tape<T>& t, std::span<const Sentence> batch) {
  if (batch.empty()) throw ValidationError("classifier: empty batch");
  const auto& emb = t.value(t.param("embedding.weight"));
  const auto V = static_cast<int>(emb.rows());
  const auto H = t.value(t.param("fwd.U_z")).rows();
  const auto B = static_cast<Eigen::Index>(batch.size());
  std::size_t longest = 0;
  for (const auto& s : batch) {
    longest = std::max(longest, s.size());
    for (int id : s) {
      if (id <= 0 || id >= V) throw ValidationError("classifier: token id " + std::to_string(id) + " out of range");
    }
  }
  std::vector<typename nn::Tape<T>::Var> finals;
  std::vector<int> ids(batch.size());
  std::vector<std::uint8_t> mask(batch.size());
  for (int dir = 0; dir < 2; ++dir) {
    auto h = t.constant(nn::Matrix<T>::Zero(B, H));
    for (std::size_t pos = 0; pos < longest; ++pos) {
      for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& s = batch[b];
        const bool live = pos < s.size();
        mask[b] = live ? 1 : 0;
        ids[b] = live ? (dir == 0 ? s[pos] : s[s.size() - 1 - pos]) : 0;
      }
      auto x = t.embedding(t.param("embedding.weight"), ids);
      auto next = gru_step<T>(t, kDirs[dir], x, h);
      h = t.blend_rows(mask, next, h);
    }
    finals.push_back(h);
  }
  auto feat = t.concat_cols(finals[0], finals[1]);
  return t.add_bias(t.matmul(feat, t.param("head.weight")), t.param("head.bias"));
}

template <typename T>
typename nn::Tape<T>::Var classifier_batch_loss(nn::Tape<T>& t, std::span<const Sentence> batch,
                                                std::span<const int> labels) {
  if (labels.size() != batch.size()) throw ValidationError("classifier: labels/batch size mismatch");
  auto logits = classifier_logits<T>(t, batch);
  return t.cross_entropy(logits, labels, T(1) / static_cast<T>(batch.size()), -1);
}

template <typename T>
nn::RowVector<double> bigru_forward(Sentence content, const nn::ParamStore<T>& params) {
  if (content.empty()) throw ValidationError("bigru_forward: empty sentence");
  nn::Tape<T> t(&params);
  const Sentence one[1] = {content};
  auto logits = classifier_logits<T>(t, one);
  nn::RowVector<double> z = t.value(logits).row(0).template cast<double>();
  z.array() -= z.maxCoeff();
  z = z.array().exp().matrix();
  return z / z.sum();
}

std::vector<int> classify(const nn::ParamStore<float>& params, std::span<const Sentence> sentences, std::size_t chunk) {
  std::vector<int> out;
  out.reserve(sentences.size());
  for (std::size_t start = 0; start < sentences.size(); start += chunk) {
    const auto part = sentences.subspan(start, std::min(chunk, sentences.size() - start));
    nn::Tape<float> t(&params);
    const auto& z = t.value(classifier_logits<float>(t, part));
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
      Eigen::Index best = 0;
      for (Eigen::Index c = 1; c < z.cols(); ++c) {
        if (z(r, c) > z(r, best)) best = c;
      }
      out.push_back(static_cast<int>(best));
    }
  }
  return out;
}

nlohmann::json ClassificationReport::to_json() const {
  nlohmann::json sup = nlohmann::json::object();
  for (const auto& [c, n] : support) sup[std::to_string(c)] = n;
  return {{"sens", sens}, {"ppv", ppv}, {"f1", f1}, {"accuracy", accuracy}, {"pairs", pairs}, {"support", sup}};
}

ClassificationReport weighted_metrics(std::span<const int> predictions, std::span<const int> truth) {
  if (predictions.size() != truth.size()) throw ValidationError("weighted_metrics: length mismatch");
  ClassificationReport rep;
  rep.pairs = truth.size();
  if (truth.empty()) return rep;
  std::map<int, std::size_t> tp, predicted;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++rep.support[truth[i]];
    ++predicted[predictions[i]];
    if (predictions[i] == truth[i]) {
      ++tp[truth[i]];
      ++correct;
    }
  }
  const double n = static_cast<double>(truth.size());
  for (const auto& [c, sup] : rep.support) {
    const double w = static_cast<double>(sup) / n;
    const double hits = static_cast<double>(tp[c]);
    const double recall = hits / static_cast<double>(sup);
    const auto pc = predicted.find(c);
    const double precision = (pc == predicted.end() || pc->second == 0) ? 0.0 : hits / static_cast<double>(pc->second);
    const double f1 = (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    rep.sens += w * recall;
    rep.ppv += w * precision;
    rep.f1 += w * f1;
  }
  rep.accuracy = static_cast<double>(correct) / n;
  return rep;
}

TrainStats train_classifier(nn::ParamStore<float>& params, std::span<const Sentence> train,
                            std::span<const int> train_labels, std::span<const Sentence> valid,
                            std::span<const int> valid_labels, const TrainConfig& config, const EpochLogFn& log) {
  if (train.empty() || valid.empty()) throw ValidationError("train_classifier: empty split");
  if (train.size() != train_labels.size() || valid.size() != valid_labels.size()) {
    throw ValidationError("train_classifier: sentence/label count mismatch");
  }
  const auto C = static_cast<int>(classifier_dims(params).classes);
  for (auto span : {train_labels, valid_labels}) {
    for (int l : span) {
      if (l < 0 || l >= C) throw ValidationError("train_classifier: label " + std::to_string(l) + " out of range");
    }
  }
  std::vector<Sentence> sb;
  std::vector<int> lb;
  auto batch_loss = [&](nn::Tape<float>& t, std::span<const std::size_t> idx) {
    sb.clear();
    lb.clear();
    for (auto i : idx) {
      sb.push_back(train[i]);
      lb.push_back(train_labels[i]);
    }
    return classifier_batch_loss<float>(t, sb, lb);
  };
  auto valid_loss = [&](const nn::ParamStore<float>& p) {
    double total = 0.0;
    const std::size_t chunk = 512;
    for (std::size_t s = 0; s < valid.size(); s += chunk) {
      const std::size_t n = std::min(chunk, valid.size() - s);
      nn::Tape<float> t(&p);
      auto loss = classifier_batch_loss<float>(t, valid.subspan(s, n), valid_labels.subspan(s, n));
      total += static_cast<double>(t.scalar(loss)) * static_cast<double>(n);
    }
    return total / static_cast<double>(valid.size());
  };
  return fit(params, train.size(), batch_loss, valid_loss, config, log);
}

TransferResult transfer_eval(const nn::ParamStore<float>& params, std::span<const Sentence> authentic,
                             std::span<const Sentence> synthetic, std::span<const int> labels) {
  if (authentic.size() != synthetic.size() || authentic.size() != labels.size()) {
    throw ValidationError("transfer_eval: authentic, synthetic and labels must be aligned");
  }
  TransferResult r;
  r.authentic = weighted_metrics(classify(params, authentic), labels);
  r.synthetic = weighted_metrics(classify(params, synthetic), labels);
  return r;
}

#define CCGEN_INSTANTIATE(T)                                                                              \
  template nn::ParamStore<T> make_classifier_params<T>(const ClassifierDims&);                            \
  template ClassifierDims classifier_dims<T>(const nn::ParamStore<T>&);                                   \
  template typename nn::Tape<T>::Var classifier_logits<T>(nn::Tape<T>&, std::span<const Sentence>);       \
  template typename nn::Tape<T>::Var classifier_batch_loss<T>(nn::Tape<T>&, std::span<const Sentence>,    \
                                                              std::span<const int>);                      \
  template nn::RowVector<double> bigru_forward<T>(Sentence, const nn::ParamStore<T>&);

CCGEN_INSTANTIATE(float)
CCGEN_INSTANTIATE(double)
#undef CCGEN_INSTANTIATE

}  // namespace ccgen
