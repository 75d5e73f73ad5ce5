#pragma once

#include "nmtadv/models/seq2seq.hpp"
#include "nmtadv/random.hpp"
#include "nmtadv/tokenizer.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nmtadv {

enum class Traversal { MinGrad, Random };
enum class ReplacementKind { SoftAtt, HotFlip };
enum class LossMode { Hard, Relaxed };
enum class SoftAttUpdate { Softmax, Simplex };

std::string to_string(Traversal t);
std::string to_string(ReplacementKind k);
std::string to_string(LossMode m);
std::string to_string(SoftAttUpdate u);
Traversal parse_traversal(std::string_view s);
ReplacementKind parse_replacement(std::string_view s);
LossMode parse_loss_mode(std::string_view s);
SoftAttUpdate parse_update(std::string_view s);

struct AttackConfig {
  int max_sweep = 5;
  int max_iter = 1000;
  double max_prob = 0.9;
  int n_iter = 10;
  double step = 0.1;
  double l_min = 100.0;  // initial value of the min-loss threshold
  Traversal traversal = Traversal::MinGrad;
  ReplacementKind replacement = ReplacementKind::SoftAtt;
  LossMode loss_mode = LossMode::Hard;
  SoftAttUpdate update = SoftAttUpdate::Softmax;
  int beam_width = 5;
  bool compare_text = false;  // judge success on detokenized text instead of token ids
  std::uint64_t seed = 1;

  void validate() const;
  /// "min-grad+soft-att" and friends.
  [[nodiscard]] std::string method() const;
  /// Sorted key=value lines; the digest is taken over this text.
  [[nodiscard]] std::string canonical() const;
  [[nodiscard]] std::string digest() const;

  /// Defaults with traversal and replacement taken from a method name.
  static AttackConfig for_method(std::string_view method);
};

/// What the attack needs from a model: hard loss, the two gradient surfaces
/// and the loss with one row relaxed to a distribution.
class AttackObjective {
 public:
  virtual ~AttackObjective() = default;
  [[nodiscard]] virtual int vocab_size() const = 0;
  [[nodiscard]] virtual double loss(std::span<const int> s) const = 0;
  [[nodiscard]] virtual LossGradients gradients(std::span<const int> s) const = 0;
  [[nodiscard]] virtual RelaxedLoss relaxed(std::span<const int> s, Eigen::Index r, std::span<const int> support,
                                            std::span<const float> probs) const = 0;
};

/// NLL of a fixed target translation under a model.
class ModelObjective final : public AttackObjective {
 public:
  ModelObjective(const Seq2SeqModel& model, std::vector<int> target);
  [[nodiscard]] int vocab_size() const override { return model_.vocab_size(); }
  [[nodiscard]] double loss(std::span<const int> s) const override;
  [[nodiscard]] LossGradients gradients(std::span<const int> s) const override;
  [[nodiscard]] RelaxedLoss relaxed(std::span<const int> s, Eigen::Index r, std::span<const int> support,
                                    std::span<const float> probs) const override;

 private:
  const Seq2SeqModel& model_;
  std::vector<int> target_;
};

/// L(x) = bias + sum_i (x_i E) . w_i, exactly linear in the one-hot rows.
class LinearObjective final : public AttackObjective {
 public:
  LinearObjective(MatrixF embedding, MatrixF weights, double bias = 0.0);
  [[nodiscard]] int vocab_size() const override { return static_cast<int>(embedding_.rows()); }
  [[nodiscard]] double loss(std::span<const int> s) const override;
  [[nodiscard]] LossGradients gradients(std::span<const int> s) const override;
  [[nodiscard]] RelaxedLoss relaxed(std::span<const int> s, Eigen::Index r, std::span<const int> support,
                                    std::span<const float> probs) const override;
  /// d L / d x_{r, j}.
  [[nodiscard]] double coefficient(Eigen::Index r, int j) const;

 private:
  MatrixF embedding_;
  MatrixF weights_;
  double bias_;
};

// -- position traversal ---------------------------------------------------------

/// argmin over unvisited i of ||grad_{e_i} L||_2, lowest index on ties.
int min_grad_position(const MatrixF& embedding_grads, const std::vector<std::uint8_t>& visited);
int min_grad_position(const AttackObjective& objective, std::span<const int> s, const std::vector<std::uint8_t>& visited);

/// Uniform over unvisited positions.
int random_position(const std::vector<std::uint8_t>& visited, Rng& rng);

// -- word replacement ------------------------------------------------------------

struct ReplacementChoice {
  int word = -1;
  double loss = 0.0;          // per the loss mode (hotflip: exact hard loss)
  double relaxed_loss = 0.0;  // last relaxed loss seen (soft-att only)
  int iterations = 0;
  bool converged = false;     // a word held p > max_prob for n_iter iterations
  double p_max = 0.0;
};

ReplacementChoice soft_att_replace(const AttackObjective& objective, std::span<const int> s, Eigen::Index r,
                                   const PrunedVocab& prune, const AttackConfig& cfg);

/// First-order score g[r][j] - g[r][cur] per candidate, in candidate order.
std::vector<double> hotflip_scores(const MatrixF& onehot_grads, std::span<const int> s, Eigen::Index r,
                                   const PrunedVocab& prune);
ReplacementChoice hotflip_replace(const AttackObjective& objective, std::span<const int> s, Eigen::Index r,
                                  const PrunedVocab& prune);

// -- Algorithm 3 ---------------------------------------------------------------------

enum class AcceptRule { Revisit, FirstVisit };
std::string to_string(AcceptRule rule);

struct ReplacementLog {
  int position = 0;
  int old_token = 0;
  int new_token = 0;
  double loss_before = 0.0;  // l, the loss of the current sentence
  double loss_after = 0.0;   // loss returned by the replacement step
  double l_min_before = 0.0;
  double l_min_after = 0.0;
  int sweep = 0;             // 1-based
  AcceptRule rule = AcceptRule::FirstVisit;
};

struct AttackTrace {
  std::vector<int> adversarial;
  std::vector<ReplacementLog> replacements;
  double l_org = 0.0;
  double l_min = 0.0;
  int sweeps = 0;
  int steps = 0;                     // positions examined
  double min_candidate_loss = 0.0;   // lowest loss any replacement step returned
  std::vector<int> visit_order;      // positions in the order they were selected

  [[nodiscard]] std::size_t distinct_positions() const;
};

/// Runs the sweep loop on a sentence under an objective.
AttackTrace run_sweeps(const AttackObjective& objective, std::span<const int> s_org, const PrunedVocab& prune,
                       const AttackConfig& cfg, Rng& rng);

struct AttackResult {
  TokenSeq s_org;
  TokenSeq s_adv;
  Translation t_org;
  Translation t_adv;
  std::string src_text;
  std::string adv_text;
  std::string pred_text;
  std::string adv_pred_text;
  bool success = false;
  double nor = 0.0;
  std::uint64_t seed = 0;
  AttackTrace trace;
  // Flags for degenerate runs: nothing replaced, and whether any candidate
  // loss was below the initial l_min (the premise of the >= 1 guarantee).
  bool no_replacement = false;
  bool premise_held = true;
};

/// t_org = beam translation of s_org, then the sweep loop, then s_adv is
/// translated and compared with t_org.
AttackResult run_attack(const Seq2SeqModel& model, const Tokenizer& tok, const TokenSeq& s_org,
                        const PrunedVocab& prune, const AttackConfig& cfg, std::uint64_t seed);

/// Per-sentence seed derived from the run seed and the sentence index.
std::uint64_t sentence_seed(std::uint64_t run_seed, std::size_t index);

struct AttackOutcome {
  std::size_t index = 0;
  std::optional<AttackResult> result;
  std::string skipped;  // reason, when result is empty
};

/// Attacks every sentence on a pool of `workers` threads; results come back in
/// input order.  Over-long sentences and sentences without candidates are
/// skipped with a reason.
std::vector<AttackOutcome> attack_sentences(const Seq2SeqModel& model, const Tokenizer& tok,
                                            const std::set<std::string>& source_words,
                                            const std::vector<std::string>& sentences, const AttackConfig& cfg,
                                            int workers);

}  // namespace nmtadv
