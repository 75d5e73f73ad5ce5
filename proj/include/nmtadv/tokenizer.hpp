#pragma once

// Byte-pair-encoding subwords over a vocabulary shared by source and target.
//
// Convention: the first piece of a word is stored bare, every following piece
// carries the "##" continuation prefix.  "lowest" with the single rule
// (l, ##o) becomes  lo ##w ##e ##s ##t.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace nmtadv {

inline constexpr int kPadId = 0;
inline constexpr int kBosId = 1;
inline constexpr int kEosId = 2;
inline constexpr int kUnkId = 3;
inline constexpr int kNumSpecial = 4;
inline constexpr std::string_view kContinuationPrefix = "##";

/// Lowercases (ASCII) on request, splits on whitespace and isolates every
/// ASCII punctuation character as its own word.
std::vector<std::string> split_words(std::string_view text, bool lowercase);

/// Space-joined split_words(); the canonical surface form the tokenizer
/// round-trips.
std::string normalize_text(std::string_view text, bool lowercase);

bool is_continuation(std::string_view symbol);
std::string_view surface_of(std::string_view symbol);

struct MergeRule {
  std::string left;
  std::string right;

  [[nodiscard]] std::string merged() const;
  bool operator==(const MergeRule&) const = default;
};

class MergeTable {
 public:
  MergeTable() = default;
  explicit MergeTable(std::vector<MergeRule> rules);

  [[nodiscard]] const std::vector<MergeRule>& rules() const { return rules_; }
  [[nodiscard]] std::size_t size() const { return rules_.size(); }
  /// Rank of (left, right), or -1 if the pair is not a rule.
  [[nodiscard]] int rank(std::string_view left, std::string_view right) const;

  /// Applies the rules in learned order to one word's initial symbols.
  [[nodiscard]] std::vector<std::string> apply(std::vector<std::string> symbols) const;

 private:
  std::vector<MergeRule> rules_;
  std::unordered_map<std::string, int> rank_;
};

class Vocabulary {
 public:
  /// Starts with the four special tokens.
  Vocabulary();

  /// Adds a token if absent; returns its id either way.
  int add(std::string token);

  [[nodiscard]] int id(std::string_view token) const;  // kUnkId when absent
  [[nodiscard]] bool contains(std::string_view token) const;
  [[nodiscard]] const std::string& token(int id) const;
  [[nodiscard]] std::size_t size() const { return tokens_.size(); }
  [[nodiscard]] const std::vector<std::string>& tokens() const { return tokens_; }

  static bool is_special(int id) { return id >= 0 && id < kNumSpecial; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

struct TokenSeq {
  std::vector<int> ids;
  std::vector<std::uint8_t> word_initial;
  std::string text;

  [[nodiscard]] std::size_t size() const { return ids.size(); }
  bool operator==(const TokenSeq&) const = default;
};

struct PrunedVocab {
  std::vector<int> candidates;  // ascending token ids
  std::string source_text;

  [[nodiscard]] bool contains(int id) const;
  [[nodiscard]] std::size_t size() const { return candidates.size(); }
};

class Tokenizer {
 public:
  Tokenizer() = default;
  Tokenizer(MergeTable merges, Vocabulary vocab, bool lowercase);

  [[nodiscard]] TokenSeq encode(std::string_view text) const;
  [[nodiscard]] std::string decode(const TokenSeq& seq) const;
  /// Decodes bare ids (e.g. a translation); specials other than UNK are dropped.
  [[nodiscard]] std::string decode(std::span<const int> ids) const;

  [[nodiscard]] const MergeTable& merges() const { return merges_; }
  [[nodiscard]] const Vocabulary& vocab() const { return vocab_; }
  [[nodiscard]] bool lowercase() const { return lowercase_; }

  void write_merges(std::ostream& out) const;
  void write_vocab(std::ostream& out) const;
  static Tokenizer read(std::istream& merges, std::istream& vocab);

  void save(const std::filesystem::path& merges_path, const std::filesystem::path& vocab_path) const;
  static Tokenizer load(const std::filesystem::path& merges_path, const std::filesystem::path& vocab_path);

 private:
  MergeTable merges_;
  Vocabulary vocab_;
  bool lowercase_ = true;
};

/// Learns up to n_merges rules from the corpus.  Ties in pair frequency go to
/// the lexicographically smallest (surface, surface) pair.
Tokenizer learn_bpe(std::span<const std::string> corpus, int n_merges, bool lowercase = true);

/// Unique full words of a corpus under the tokenizer's normalisation.
std::set<std::string> unique_words(std::span<const std::string> corpus, bool lowercase = true);

/// Candidates = single word-initial vocabulary tokens that are full corpus
/// words, minus every word and token of the sentence under attack.
PrunedVocab build_pruned_vocab(const Vocabulary& shared_vocab, const std::set<std::string>& source_words,
                               const TokenSeq& s_org);

}  // namespace nmtadv
