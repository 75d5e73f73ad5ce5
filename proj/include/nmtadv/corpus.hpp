#pragma once

#include "nmtadv/random.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace nmtadv {

struct ParallelCorpus {
  std::vector<std::string> source;
  std::vector<std::string> target;
  std::size_t dropped_blank = 0;  // pairs removed because either side was blank

  [[nodiscard]] std::size_t size() const { return source.size(); }
  [[nodiscard]] bool empty() const { return source.empty(); }
  void add(std::string src, std::string tgt);
};

struct CorpusSplits {
  ParallelCorpus train;
  ParallelCorpus dev;
  ParallelCorpus test;
};

/// Reads one sentence per line from each file and pairs them by line number.
/// Throws AlignmentError when the line counts differ.
ParallelCorpus load_parallel_corpus(const std::filesystem::path& src_path, const std::filesystem::path& tgt_path);

std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines);

/// Deterministic shuffle into train/dev/test by fractions of the pair count.
CorpusSplits split_corpus(const ParallelCorpus& corpus, double dev_fraction, double test_fraction, std::uint64_t seed);

/// Pairs from a small context-free grammar whose "translation" maps every word
/// through a fixed bilingual lexicon and reorders it (adjectives follow nouns,
/// transitive verbs go last), so each target determines its source.
ParallelCorpus synthetic_corpus(std::size_t pairs, std::uint64_t seed);

}  // namespace nmtadv
