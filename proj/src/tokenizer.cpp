#include "nmtadv/tokenizer.hpp"

#include "nmtadv/errors.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

namespace nmtadv {

namespace {

constexpr std::string_view kMergesHeader = "#nmtadv-merges v1";
constexpr std::string_view kVocabHeader = "#nmtadv-vocab v1";
const char* const kSpecialTokens[kNumSpecial] = {"<pad>", "<s>", "</s>", "<unk>"};

std::size_t utf8_length(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xE) return 3;
  if ((lead >> 3) == 0x1E) return 4;
  return 1;
}

std::vector<std::string> initial_symbols(std::string_view word) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < word.size()) {
    const std::size_t len = std::min(utf8_length(static_cast<unsigned char>(word[i])), word.size() - i);
    std::string piece(word.substr(i, len));
    out.push_back(out.empty() ? piece : std::string(kContinuationPrefix) + piece);
    i += len;
  }
  return out;
}

std::string pair_key(std::string_view left, std::string_view right) {
  std::string key(left);
  key.push_back(' ');
  key.append(right);
  return key;
}

std::string join_symbol(std::string_view left, std::string_view right) {
  std::string merged(left);
  merged.append(surface_of(right));
  return merged;
}

void read_header(std::istream& in, std::string_view expected) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("tokenizer file: missing header line");
  if (line == expected) return;
  const auto kind = expected.substr(0, expected.rfind(' '));
  if (line.rfind(kind, 0) == 0)
    throw FormatError("tokenizer file: unsupported version '" + line + "', expected '" + std::string(expected) + "'");
  throw FormatError("tokenizer file: unexpected header '" + line + "'");
}

}  // namespace

std::vector<std::string> split_words(std::string_view text, bool lowercase) {
  std::vector<std::string> words;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) words.push_back(std::move(current));
    current.clear();
  };
  for (char raw : text) {
    const auto c = static_cast<unsigned char>(raw);
    if (std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      words.emplace_back(1, raw);
    } else {
      current.push_back(lowercase && c < 0x80 ? static_cast<char>(std::tolower(c)) : raw);
    }
  }
  flush();
  return words;
}

std::string normalize_text(std::string_view text, bool lowercase) {
  std::string out;
  for (const auto& w : split_words(text, lowercase)) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

bool is_continuation(std::string_view symbol) {
  return symbol.size() > kContinuationPrefix.size() && symbol.substr(0, kContinuationPrefix.size()) == kContinuationPrefix;
}

std::string_view surface_of(std::string_view symbol) {
  return is_continuation(symbol) ? symbol.substr(kContinuationPrefix.size()) : symbol;
}

// -- MergeTable -------------------------------------------------------------

std::string MergeRule::merged() const { return join_symbol(left, right); }

MergeTable::MergeTable(std::vector<MergeRule> rules) : rules_(std::move(rules)) {
  for (std::size_t i = 0; i < rules_.size(); ++i)
    rank_.emplace(pair_key(rules_[i].left, rules_[i].right), static_cast<int>(i));
}

int MergeTable::rank(std::string_view left, std::string_view right) const {
  const auto it = rank_.find(pair_key(left, right));
  return it == rank_.end() ? -1 : it->second;
}

std::vector<std::string> MergeTable::apply(std::vector<std::string> symbols) const {
  while (symbols.size() > 1) {
    int best = std::numeric_limits<int>::max();
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      const int r = rank(symbols[i], symbols[i + 1]);
      if (r >= 0 && r < best) best = r;
    }
    if (best == std::numeric_limits<int>::max()) break;
    const MergeRule& rule = rules_[static_cast<std::size_t>(best)];
    std::vector<std::string> next;
    next.reserve(symbols.size());
    for (std::size_t i = 0; i < symbols.size();) {
      if (i + 1 < symbols.size() && symbols[i] == rule.left && symbols[i + 1] == rule.right) {
        next.push_back(rule.merged());
        i += 2;
      } else {
        next.push_back(std::move(symbols[i]));
        ++i;
      }
    }
    symbols = std::move(next);
  }
  return symbols;
}

// -- Vocabulary -------------------------------------------------------------

Vocabulary::Vocabulary() {
  for (const char* s : kSpecialTokens) add(s);
}

int Vocabulary::add(std::string token) {
  if (const auto it = ids_.find(token); it != ids_.end()) return it->second;
  const int id = static_cast<int>(tokens_.size());
  ids_.emplace(token, id);
  tokens_.push_back(std::move(token));
  return id;
}

int Vocabulary::id(std::string_view token) const {
  const auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnkId : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return ids_.contains(std::string(token)); }

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    throw ContractViolation("vocabulary id out of range: " + std::to_string(id));
  return tokens_[static_cast<std::size_t>(id)];
}

bool PrunedVocab::contains(int id) const { return std::binary_search(candidates.begin(), candidates.end(), id); }

// -- Tokenizer --------------------------------------------------------------

Tokenizer::Tokenizer(MergeTable merges, Vocabulary vocab, bool lowercase)
    : merges_(std::move(merges)), vocab_(std::move(vocab)), lowercase_(lowercase) {}

TokenSeq Tokenizer::encode(std::string_view text) const {
  TokenSeq seq;
  seq.text = normalize_text(text, lowercase_);
  for (const auto& word : split_words(text, lowercase_)) {
    bool first = true;
    for (const auto& symbol : merges_.apply(initial_symbols(word))) {
      seq.ids.push_back(vocab_.id(symbol));
      seq.word_initial.push_back(first ? 1 : 0);
      first = false;
    }
  }
  return seq;
}

std::string Tokenizer::decode(const TokenSeq& seq) const {
  std::string out;
  for (std::size_t i = 0; i < seq.ids.size(); ++i) {
    const int id = seq.ids[i];
    if (id == kPadId || id == kBosId || id == kEosId) continue;
    const bool initial = i < seq.word_initial.size() ? seq.word_initial[i] != 0 : true;
    const std::string_view piece = id == kUnkId ? std::string_view(vocab_.token(id)) : surface_of(vocab_.token(id));
    const bool starts_word = id == kUnkId ? initial : !is_continuation(vocab_.token(id));
    if (starts_word && !out.empty()) out.push_back(' ');
    out.append(piece);
  }
  return out;
}

std::string Tokenizer::decode(std::span<const int> ids) const {
  TokenSeq seq;
  seq.ids.assign(ids.begin(), ids.end());
  seq.word_initial.assign(ids.size(), 1);
  return decode(seq);
}

void Tokenizer::write_merges(std::ostream& out) const {
  out << kMergesHeader << '\n' << "lowercase " << (lowercase_ ? 1 : 0) << '\n';
  for (const auto& r : merges_.rules()) out << r.left << ' ' << r.right << '\n';
}

void Tokenizer::write_vocab(std::ostream& out) const {
  out << kVocabHeader << '\n';
  for (const auto& t : vocab_.tokens()) out << t << '\n';
}

Tokenizer Tokenizer::read(std::istream& merges_in, std::istream& vocab_in) {
  read_header(merges_in, kMergesHeader);
  std::string line;
  bool lowercase = true;
  if (!std::getline(merges_in, line) || line.rfind("lowercase ", 0) != 0)
    throw FormatError("merges file: missing lowercase line");
  lowercase = line.substr(10) == "1";
  std::vector<MergeRule> rules;
  std::size_t lineno = 2;
  while (std::getline(merges_in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto space = line.find(' ');
    if (space == std::string::npos || line.find(' ', space + 1) != std::string::npos)
      throw FormatError("merges file: malformed rule on line " + std::to_string(lineno));
    rules.push_back({line.substr(0, space), line.substr(space + 1)});
  }

  read_header(vocab_in, kVocabHeader);
  Vocabulary vocab;
  std::size_t index = 0;
  while (std::getline(vocab_in, line)) {
    if (index < static_cast<std::size_t>(kNumSpecial)) {
      if (line != kSpecialTokens[index]) throw FormatError("vocab file: special tokens out of order");
    } else if (line.empty() || vocab.contains(line)) {
      throw FormatError("vocab file: empty or duplicate token on line " + std::to_string(index + 2));
    } else {
      vocab.add(line);
    }
    ++index;
  }
  if (index < static_cast<std::size_t>(kNumSpecial)) throw FormatError("vocab file: truncated");
  return Tokenizer(MergeTable(std::move(rules)), std::move(vocab), lowercase);
}

void Tokenizer::save(const std::filesystem::path& merges_path, const std::filesystem::path& vocab_path) const {
  std::ofstream m(merges_path, std::ios::binary);
  std::ofstream v(vocab_path, std::ios::binary);
  if (!m || !v) throw InputError("cannot write tokenizer files");
  write_merges(m);
  write_vocab(v);
}

Tokenizer Tokenizer::load(const std::filesystem::path& merges_path, const std::filesystem::path& vocab_path) {
  std::ifstream m(merges_path, std::ios::binary);
  if (!m) throw InputError("cannot open " + merges_path.string());
  std::ifstream v(vocab_path, std::ios::binary);
  if (!v) throw InputError("cannot open " + vocab_path.string());
  return read(m, v);
}

// -- learning ---------------------------------------------------------------

Tokenizer learn_bpe(std::span<const std::string> corpus, int n_merges, bool lowercase) {
  if (corpus.empty()) throw InputError("learn_bpe: empty corpus");
  if (n_merges < 0) throw ContractViolation("learn_bpe: negative merge count");

  std::map<std::string, long> word_freq;
  for (const auto& line : corpus)
    for (auto& w : split_words(line, lowercase)) ++word_freq[std::move(w)];
  if (word_freq.empty()) throw InputError("learn_bpe: corpus has no words");

  // Symbols are interned so pair counting runs over integer keys.
  std::vector<std::string> names;
  std::unordered_map<std::string, int> intern;
  auto symbol_id = [&](const std::string& s) {
    const auto [it, inserted] = intern.emplace(s, static_cast<int>(names.size()));
    if (inserted) names.push_back(s);
    return it->second;
  };

  struct WordEntry {
    std::vector<int> symbols;
    long freq;
  };
  std::vector<WordEntry> words;
  std::set<std::string> base;
  for (const auto& [w, f] : word_freq) {
    WordEntry e{{}, f};
    for (const auto& s : initial_symbols(w)) {
      base.insert(s);
      e.symbols.push_back(symbol_id(s));
    }
    words.push_back(std::move(e));
  }

  Vocabulary vocab;
  for (const auto& s : base) vocab.add(s);

  std::vector<MergeRule> rules;
  std::unordered_map<std::uint64_t, long> counts;
  auto key_of = [](int a, int b) { return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b); };
  for (int m = 0; m < n_merges; ++m) {
    counts.clear();
    for (const auto& w : words)
      for (std::size_t i = 0; i + 1 < w.symbols.size(); ++i) counts[key_of(w.symbols[i], w.symbols[i + 1])] += w.freq;
    if (counts.empty()) break;

    long best_count = 0;
    for (const auto& [k, c] : counts) best_count = std::max(best_count, c);
    std::uint64_t best = 0;
    bool have = false;
    auto order_key = [&](std::uint64_t k) {
      const std::string& l = names[static_cast<std::size_t>(k >> 32)];
      const std::string& r = names[static_cast<std::size_t>(k & 0xffffffffu)];
      return std::make_tuple(surface_of(l), surface_of(r), std::string_view(l), std::string_view(r));
    };
    for (const auto& [k, c] : counts) {
      if (c != best_count) continue;
      if (!have || order_key(k) < order_key(best)) {
        best = k;
        have = true;
      }
    }
    const int left = static_cast<int>(best >> 32);
    const int right = static_cast<int>(best & 0xffffffffu);
    MergeRule rule{names[static_cast<std::size_t>(left)], names[static_cast<std::size_t>(right)]};
    const int merged = symbol_id(rule.merged());
    vocab.add(rule.merged());
    rules.push_back(std::move(rule));

    for (auto& w : words) {
      std::vector<int> next;
      next.reserve(w.symbols.size());
      for (std::size_t i = 0; i < w.symbols.size();) {
        if (i + 1 < w.symbols.size() && w.symbols[i] == left && w.symbols[i + 1] == right) {
          next.push_back(merged);
          i += 2;
        } else {
          next.push_back(w.symbols[i++]);
        }
      }
      w.symbols = std::move(next);
    }
  }
  return Tokenizer(MergeTable(std::move(rules)), std::move(vocab), lowercase);
}

std::set<std::string> unique_words(std::span<const std::string> corpus, bool lowercase) {
  std::set<std::string> out;
  for (const auto& line : corpus)
    for (auto& w : split_words(line, lowercase)) out.insert(std::move(w));
  return out;
}

PrunedVocab build_pruned_vocab(const Vocabulary& shared_vocab, const std::set<std::string>& source_words,
                               const TokenSeq& s_org) {
  std::set<std::string> excluded;
  for (auto& w : split_words(s_org.text, false)) excluded.insert(std::move(w));
  for (int id : s_org.ids)
    if (!Vocabulary::is_special(id) && !is_continuation(shared_vocab.token(id))) excluded.insert(shared_vocab.token(id));

  PrunedVocab out;
  out.source_text = s_org.text;
  for (std::size_t id = kNumSpecial; id < shared_vocab.size(); ++id) {
    const std::string& tok = shared_vocab.token(static_cast<int>(id));
    if (is_continuation(tok)) continue;
    if (!source_words.contains(tok) || excluded.contains(tok)) continue;
    out.candidates.push_back(static_cast<int>(id));
  }
  if (out.candidates.empty()) throw NoCandidatesError("no candidates: pruned vocabulary is empty for '" + s_org.text + "'");
  return out;
}

}  // namespace nmtadv
