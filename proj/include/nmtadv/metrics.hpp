#pragma once

#include "nmtadv/attack.hpp"

#include <array>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace nmtadv {

// -- BLEU -------------------------------------------------------------------------

struct BleuScore {
  double value = 0.0;                  // 0..100
  std::array<double, 4> precisions{};  // p_1..p_4 as used in the geometric mean
  std::array<std::size_t, 4> matches{};
  std::array<std::size_t, 4> totals{};
  double brevity_penalty = 1.0;
  std::size_t hyp_length = 0;
  std::size_t ref_length = 0;
  bool smoothed = false;
};

/// Corpus 4-gram BLEU over whitespace tokens, one reference per hypothesis.
/// With smoothing, an order n >= 2 whose match count is zero uses
/// 1 / (total_n + 1) as its precision.  An order with no hypothesis n-grams
/// at all counts as precision 1.
BleuScore corpus_bleu(std::span<const std::string> hypotheses, std::span<const std::string> references,
                      bool smoothing = true);

// -- attack statistics ---------------------------------------------------------------

/// The two per-sentence facts the summary statistics need.
struct Outcome {
  bool success = false;
  double nor = 0.0;
};

std::vector<Outcome> outcomes_of(std::span<const AttackResult> results);

/// Percentage of successful attacks.
double success_rate(std::span<const Outcome> results);
double success_rate(std::span<const AttackResult> results);

struct NorStats {
  double mean = 0.0;
  double median = 0.0;
};

NorStats nor_stats(std::span<const Outcome> results);
NorStats nor_stats(std::span<const AttackResult> results);

// -- cross-model BLEU ---------------------------------------------------------------------

struct FleetMember {
  std::string name;
  const Seq2SeqModel* model = nullptr;
  const Tokenizer* tokenizer = nullptr;
};

struct BleuMatrix {
  double b_src = 0.0;
  std::vector<double> b;  // per fleet member, attacked model first
  std::vector<std::string> names;
  std::size_t used = 0;
  std::size_t excluded = 0;  // pairs some member could not translate
};

/// Source BLEU (adversarial vs original) and, for every model, the BLEU of its
/// adversarial translations against its original translations.  The attacked
/// member is moved to the front of the result.
BleuMatrix bleu_matrix(std::span<const std::string> originals, std::span<const std::string> adversarials,
                       std::span<const FleetMember> fleet, std::size_t attacked, int beam_width = 5,
                       bool smoothing = true);

/// (b_src + (100 - b_attacked) + sum(b_others)) / (n + 1), n = 1 + |others|.
double composite_score(double b_src, double b_attacked, std::span<const double> b_others);

// -- reports ---------------------------------------------------------------------------

struct EvalReport {
  std::string model;
  std::string method;
  std::size_t sentences = 0;
  double success_rate = 0.0;
  double nor_mean = 0.0;
  double nor_median = 0.0;
  bool has_bleu = false;
  double b_src = 0.0;
  std::vector<double> b;  // attacked model first
  double e = 0.0;

  /// e recomputed from b_src and b.
  [[nodiscard]] double recompute_e() const;
};

std::string report_json(std::span<const EvalReport> reports);
std::string report_markdown(std::span<const EvalReport> reports);
std::string report_csv(std::span<const EvalReport> reports);
std::vector<EvalReport> parse_report_csv(std::istream& in);

/// One row of published cross-model BLEU values with the published e(M).
struct BleuRow {
  std::string model;
  std::string pair;
  std::string method;
  double b_src = 0.0;
  std::vector<double> b;
  double e = 0.0;
};

std::vector<BleuRow> read_bleu_rows(const std::filesystem::path& path);
std::vector<BleuRow> read_bleu_rows(std::istream& in);

}  // namespace nmtadv
