#include "nmtadv/training.hpp"

#include "nmtadv/errors.hpp"
#include "nmtadv/models/forward.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace nmtadv {

std::string to_string(Optimizer opt) { return opt == Optimizer::Adam ? "adam" : "sgd"; }

Optimizer parse_optimizer(std::string_view name) {
  if (name == "adam") return Optimizer::Adam;
  if (name == "sgd") return Optimizer::Sgd;
  throw InputError("unknown optimizer '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw InputError("learning rate must be >= 0");
  if (epochs <= 0 || batch_size <= 0) throw InputError("epochs and batch size must be positive");
}

EncodedCorpus encode_corpus(const Tokenizer& tok, const ParallelCorpus& corpus, int max_len) {
  EncodedCorpus out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    Example ex{tok.encode(corpus.source[i]).ids, tok.encode(corpus.target[i]).ids};
    ex.tgt.push_back(kEosId);
    if (ex.src.empty() || static_cast<int>(ex.src.size()) > max_len || static_cast<int>(ex.tgt.size()) > max_len) {
      ++out.skipped_too_long;
      continue;
    }
    out.examples.push_back(std::move(ex));
  }
  return out;
}

namespace {

std::size_t total_tokens(const std::vector<Example>& xs) {
  std::size_t n = 0;
  for (const auto& x : xs) n += x.tgt.size();
  return n;
}

/// Loss of one example; when `grads` is non-null the parameter gradients are
/// added into it (same layout as the model's ParamStore).
double example_loss(const Seq2SeqModel& model, const Example& ex, std::vector<MatrixF>* grads) {
  Graph g;
  detail::Binder<float> bind(g, model, grads != nullptr);
  const MatrixF rows = detail::one_hot_rows<float>(ex.src, model.vocab_size());
  std::vector<std::uint8_t> mask(ex.src.size(), 1);
  const Var<float> loss = detail::build_loss(bind, g.reference(rows), mask, ex.tgt).loss;
  const double value = loss.value()(0, 0);
  if (grads != nullptr) {
    g.backward(loss);
    const auto& entries = model.params().entries();
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto it = bind.bound().find(entries[i].first);
      if (it != bind.bound().end()) (*grads)[i] += g.grad(it->second);
    }
  }
  return value;
}

struct AdamState {
  std::vector<MatrixF> m;
  std::vector<MatrixF> v;
  long step = 0;
};

}  // namespace

double mean_token_loss(const Seq2SeqModel& model, const std::vector<Example>& examples) {
  if (examples.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (const auto& ex : examples) total += example_loss(model, ex, nullptr);
  return total / static_cast<double>(total_tokens(examples));
}

TrainResult train_model(const ModelConfig& config, const TrainConfig& tc, const std::vector<Example>& train,
                        const std::vector<Example>& dev, const EpochCallback& on_epoch) {
  tc.validate();
  if (train.empty()) throw InputError("training corpus is empty");
  for (const auto& ex : train)
    for (const auto* seq : {&ex.src, &ex.tgt})
      for (int id : *seq)
        if (id < 0 || id >= config.vocab_size) throw InputError("training example uses an id outside the vocabulary");

  TrainResult result{Seq2SeqModel::initialize(config, tc.seed), {}};
  Seq2SeqModel& model = result.model;
  auto& entries = model.params().entries();

  AdamState adam;
  for (const auto& [name, p] : entries) {
    adam.m.push_back(MatrixF::Zero(p.rows(), p.cols()));
    adam.v.push_back(MatrixF::Zero(p.rows(), p.cols()));
  }
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;

  Rng rng(tc.seed ^ 0x5eedULL);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> per_example(train.size(), 0.0);
  const double train_tokens = static_cast<double>(total_tokens(train));

  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(tc.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(tc.batch_size));
      std::vector<MatrixF> grads;
      for (const auto& [name, p] : entries) grads.push_back(MatrixF::Zero(p.rows(), p.cols()));
      std::size_t tokens = 0;
      for (std::size_t k = start; k < stop; ++k) {
        const Example& ex = train[order[k]];
        const double loss = example_loss(model, ex, &grads);
        if (!std::isfinite(loss)) throw TrainingError("training diverged: non-finite loss in epoch " + std::to_string(epoch));
        per_example[order[k]] = loss;
        tokens += ex.tgt.size();
      }
      const float inv = 1.0f / static_cast<float>(tokens);
      double norm2 = 0.0;
      for (auto& gm : grads) {
        gm *= inv;
        norm2 += static_cast<double>(gm.squaredNorm());
      }
      if (!std::isfinite(norm2)) throw TrainingError("training diverged: non-finite gradient in epoch " + std::to_string(epoch));
      const double norm = std::sqrt(norm2);
      if (tc.clip_norm > 0.0 && norm > tc.clip_norm) {
        const auto scale = static_cast<float>(tc.clip_norm / norm);
        for (auto& gm : grads) gm *= scale;
      }

      const auto lr = static_cast<float>(tc.learning_rate);
      if (tc.optimizer == Optimizer::Sgd) {
        for (std::size_t i = 0; i < entries.size(); ++i) entries[i].second -= lr * grads[i];
      } else {
        ++adam.step;
        const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(adam.step));
        const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(adam.step));
        const auto step = static_cast<float>(tc.learning_rate * std::sqrt(c2) / c1);
        for (std::size_t i = 0; i < entries.size(); ++i) {
          adam.m[i] = static_cast<float>(kBeta1) * adam.m[i] + static_cast<float>(1.0 - kBeta1) * grads[i];
          adam.v[i] = static_cast<float>(kBeta2) * adam.v[i] +
                      static_cast<float>(1.0 - kBeta2) * grads[i].cwiseProduct(grads[i]);
          entries[i].second.array() -=
              step * adam.m[i].array() / (adam.v[i].array().sqrt() + static_cast<float>(kEps));
        }
      }
    }
    if (!model.all_finite()) throw TrainingError("training diverged: non-finite parameters after epoch " + std::to_string(epoch));

    // Summed in dataset order so the value does not depend on the shuffle.
    EpochLoss row;
    row.epoch = epoch;
    row.train_loss = std::accumulate(per_example.begin(), per_example.end(), 0.0) / train_tokens;
    row.dev_loss = mean_token_loss(model, dev);
    if (!std::isfinite(row.train_loss))
      throw TrainingError("training diverged: non-finite loss in epoch " + std::to_string(epoch));
    result.curve.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  return result;
}

void write_loss_csv(std::ostream& out, const std::vector<EpochLoss>& curve) {
  out << "epoch,train_loss,dev_loss\n";
  out << std::setprecision(9);
  for (const auto& r : curve) {
    out << r.epoch << ',' << r.train_loss << ',';
    if (std::isfinite(r.dev_loss)) out << r.dev_loss;
    out << '\n';
  }
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<EpochLoss>& curve) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  write_loss_csv(out, curve);
}

}  // namespace nmtadv
