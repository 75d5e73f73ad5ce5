#pragma once

#include "nmtadv/corpus.hpp"
#include "nmtadv/models/seq2seq.hpp"
#include "nmtadv/tokenizer.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace nmtadv {

enum class Optimizer { Sgd, Adam };

std::string to_string(Optimizer opt);
Optimizer parse_optimizer(std::string_view name);

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 10;
  int batch_size = 16;
  std::uint64_t seed = 1;
  double clip_norm = 5.0;  // <= 0 disables clipping
  Optimizer optimizer = Optimizer::Adam;

  void validate() const;
};

/// A tokenized pair; the target ends with EOS.
struct Example {
  std::vector<int> src;
  std::vector<int> tgt;
};

struct EncodedCorpus {
  std::vector<Example> examples;
  std::size_t skipped_too_long = 0;
};

/// Encodes both sides and appends EOS to targets.  Pairs whose source or
/// target exceeds max_len are skipped and counted.
EncodedCorpus encode_corpus(const Tokenizer& tok, const ParallelCorpus& corpus, int max_len);

struct EpochLoss {
  int epoch = 0;
  double train_loss = 0.0;  // mean per target token
  double dev_loss = 0.0;    // NaN without a dev set
};

struct TrainResult {
  Seq2SeqModel model;
  std::vector<EpochLoss> curve;
};

using EpochCallback = std::function<void(const EpochLoss&)>;

/// Mini-batch training on the per-token mean NLL.  Batches are drawn from a
/// shuffle seeded by tc.seed, so a fixed seed gives identical parameters.
/// Throws TrainingError naming the epoch when the loss stops being finite.
TrainResult train_model(const ModelConfig& config, const TrainConfig& tc, const std::vector<Example>& train,
                        const std::vector<Example>& dev = {}, const EpochCallback& on_epoch = {});

/// Per-token mean NLL over a set of examples.
double mean_token_loss(const Seq2SeqModel& model, const std::vector<Example>& examples);

void write_loss_csv(std::ostream& out, const std::vector<EpochLoss>& curve);
void write_loss_csv(const std::filesystem::path& path, const std::vector<EpochLoss>& curve);

}  // namespace nmtadv
