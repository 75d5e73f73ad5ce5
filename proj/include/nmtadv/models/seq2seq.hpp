#pragma once

#include "nmtadv/numerics/graph.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace nmtadv {

enum class Architecture { Recurrent, Transformer };

std::string to_string(Architecture arch);
Architecture parse_architecture(std::string_view name);

struct ModelConfig {
  Architecture arch = Architecture::Recurrent;
  int vocab_size = 0;
  int embed_dim = 64;
  int hidden_dim = 128;  // recurrent state size, or transformer feed-forward width
  int layers = 1;
  int heads = 4;
  int max_len = 48;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Named parameter matrices in registration order.
class ParamStore {
 public:
  MatrixF& add(std::string name, MatrixF value);
  [[nodiscard]] const MatrixF& at(std::string_view name) const;
  [[nodiscard]] MatrixF& at(std::string_view name);
  [[nodiscard]] bool contains(std::string_view name) const;
  [[nodiscard]] std::size_t size() const { return entries_.size(); }
  [[nodiscard]] std::size_t scalar_count() const;

  [[nodiscard]] const std::vector<std::pair<std::string, MatrixF>>& entries() const { return entries_; }
  [[nodiscard]] std::vector<std::pair<std::string, MatrixF>>& entries() { return entries_; }

  bool operator==(const ParamStore& other) const;

 private:
  std::vector<std::pair<std::string, MatrixF>> entries_;
};

class Seq2SeqModel {
 public:
  Seq2SeqModel() = default;
  Seq2SeqModel(ModelConfig config, ParamStore params);

  /// Fresh parameters drawn deterministically from `seed`.
  static Seq2SeqModel initialize(const ModelConfig& config, std::uint64_t seed);

  [[nodiscard]] const ModelConfig& config() const { return config_; }
  [[nodiscard]] const ParamStore& params() const { return params_; }
  [[nodiscard]] ParamStore& params() { return params_; }
  [[nodiscard]] const MatrixF& embedding() const { return params_.at("embedding"); }
  [[nodiscard]] int vocab_size() const { return config_.vocab_size; }

  [[nodiscard]] bool all_finite() const;

 private:
  ModelConfig config_;
  ParamStore params_;
};

/// n rows over the shared vocabulary; each row one-hot or a distribution.
class InputRepresentation {
 public:
  InputRepresentation() = default;
  static InputRepresentation one_hot(std::span<const int> ids, int vocab_size);

  /// Replaces row r by a distribution supported on `support`.
  void set_distribution(Eigen::Index r, std::span<const int> support, std::span<const float> probs);
  void set_token(Eigen::Index r, int id);

  [[nodiscard]] const MatrixF& rows() const { return rows_; }
  [[nodiscard]] Eigen::Index size() const { return rows_.rows(); }
  /// 1 for real positions, 0 for PAD one-hot rows.
  [[nodiscard]] std::vector<std::uint8_t> mask() const;
  /// Every row nonnegative and summing to 1 within tol.
  [[nodiscard]] bool valid(double tol = 1e-6) const;

 private:
  MatrixF rows_;
};

struct Translation {
  std::vector<int> ids;  // ends with EOS unless the length limit was hit
  double log_prob = 0.0;
  int beam_width = 1;

  bool operator==(const Translation&) const = default;
};

/// Beam search without length normalisation.  Equal scores keep the
/// candidate from the earlier beam entry, then the lower token id.
Translation translate(const Seq2SeqModel& model, std::span<const int> src, int beam_width);

/// log q(token | prefix, source) over the whole vocabulary for the next step.
std::vector<double> next_token_log_probs(const Seq2SeqModel& model, std::span<const int> src,
                                         std::span<const int> prefix);

/// -sum_i log q(t_i | t_<i, x) with teacher forcing on `target`.
double nll_loss(const Seq2SeqModel& model, const InputRepresentation& input, std::span<const int> target);

struct LossGradients {
  double loss = 0.0;
  MatrixF embedded;  // n x d, d loss / d e_i
  MatrixF input;     // n x |V|, d loss / d x_i
};

LossGradients loss_and_gradients(const Seq2SeqModel& model, const InputRepresentation& input,
                                 std::span<const int> target);

MatrixF embedding_gradients(const Seq2SeqModel& model, const InputRepresentation& input,
                            std::span<const int> target);
MatrixF onehot_gradients(const Seq2SeqModel& model, const InputRepresentation& input,
                         std::span<const int> target);

struct RelaxedLoss {
  double loss = 0.0;
  std::vector<float> grad;  // d loss / d p_j for j in the support, same order
};

/// Loss with row r relaxed to the distribution already stored there.  Every
/// other row must be one-hot.
RelaxedLoss relaxed_loss(const Seq2SeqModel& model, const InputRepresentation& input, Eigen::Index r,
                         std::span<const int> support, std::span<const int> target);

}  // namespace nmtadv
