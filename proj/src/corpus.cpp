#include "nmtadv/corpus.hpp"

#include "nmtadv/errors.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string_view>

namespace nmtadv {

namespace {

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; });
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

void ParallelCorpus::add(std::string src, std::string tgt) {
  source.push_back(std::move(src));
  target.push_back(std::move(tgt));
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(strip_cr(std::move(line)));
  return lines;
}

void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
}

ParallelCorpus load_parallel_corpus(const std::filesystem::path& src_path, const std::filesystem::path& tgt_path) {
  auto src = read_lines(src_path);
  auto tgt = read_lines(tgt_path);
  if (src.size() != tgt.size())
    throw AlignmentError("parallel corpus misaligned: " + src_path.string() + " has " + std::to_string(src.size()) +
                         " lines, " + tgt_path.string() + " has " + std::to_string(tgt.size()));
  ParallelCorpus out;
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (blank(src[i]) || blank(tgt[i])) {
      ++out.dropped_blank;
      continue;
    }
    out.add(std::move(src[i]), std::move(tgt[i]));
  }
  return out;
}

CorpusSplits split_corpus(const ParallelCorpus& corpus, double dev_fraction, double test_fraction, std::uint64_t seed) {
  if (dev_fraction < 0 || test_fraction < 0 || dev_fraction + test_fraction >= 1.0)
    throw InputError("split fractions must be nonnegative and leave a training split");
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  const auto n = static_cast<double>(corpus.size());
  const auto dev_n = static_cast<std::size_t>(std::floor(n * dev_fraction));
  const auto test_n = static_cast<std::size_t>(std::floor(n * test_fraction));
  CorpusSplits out;
  for (std::size_t k = 0; k < order.size(); ++k) {
    ParallelCorpus& dst = k < dev_n ? out.dev : (k < dev_n + test_n ? out.test : out.train);
    dst.add(corpus.source[order[k]], corpus.target[order[k]]);
  }
  return out;
}

// -- synthetic grammar -----------------------------------------------------------

namespace {

struct Entry {
  const char* src;
  const char* tgt;
};

constexpr std::array kDeterminers{Entry{"the", "le"}, Entry{"a", "un"}, Entry{"this", "ce"}, Entry{"every", "chaque"},
                                  Entry{"my", "mon"}, Entry{"your", "ton"}};
constexpr std::array kNouns{
    Entry{"cat", "chat"},        Entry{"dog", "chien"},      Entry{"bird", "oiseau"},    Entry{"house", "maison"},
    Entry{"tree", "arbre"},      Entry{"river", "fleuve"},   Entry{"child", "enfant"},   Entry{"teacher", "maitre"},
    Entry{"farmer", "fermier"},  Entry{"book", "livre"},     Entry{"garden", "jardin"},  Entry{"window", "fenetre"},
    Entry{"horse", "cheval"},    Entry{"friend", "ami"},     Entry{"city", "ville"},     Entry{"road", "chemin"},
    Entry{"apple", "pomme"},     Entry{"king", "roi"},       Entry{"doctor", "medecin"}, Entry{"song", "chanson"},
    Entry{"letter", "lettre"},   Entry{"mountain", "mont"},  Entry{"boat", "bateau"},    Entry{"student", "eleve"},
    Entry{"table", "tableau"},   Entry{"painter", "peintre"}, Entry{"forest", "foret"},  Entry{"singer", "chanteur"},
    Entry{"village", "hameau"},  Entry{"baker", "boulanger"}};
constexpr std::array kAdjectives{Entry{"old", "vieux"},    Entry{"young", "jeune"},   Entry{"small", "petit"},
                                 Entry{"big", "grand"},    Entry{"red", "rouge"},     Entry{"green", "vert"},
                                 Entry{"happy", "heureux"}, Entry{"quiet", "calme"},  Entry{"strange", "etrange"},
                                 Entry{"bright", "clair"}, Entry{"dark", "sombre"},  Entry{"gentle", "doux"}};
constexpr std::array kTransitive{Entry{"sees", "voit"},     Entry{"likes", "aime"},     Entry{"finds", "trouve"},
                                 Entry{"follows", "suit"},  Entry{"paints", "peint"},   Entry{"visits", "visite"},
                                 Entry{"carries", "porte"}, Entry{"watches", "regarde"}, Entry{"helps", "aide"},
                                 Entry{"builds", "construit"}, Entry{"reads", "lit"},   Entry{"remembers", "rappelle"}};
constexpr std::array kIntransitive{Entry{"sleeps", "dort"}, Entry{"runs", "court"},   Entry{"sings", "chante"},
                                   Entry{"waits", "attend"}, Entry{"laughs", "rit"},  Entry{"falls", "tombe"},
                                   Entry{"works", "travaille"}, Entry{"dances", "danse"}};
constexpr std::array kAdverbs{Entry{"today", "aujourdhui"}, Entry{"slowly", "lentement"}, Entry{"often", "souvent"},
                              Entry{"again", "encore"},     Entry{"outside", "dehors"},   Entry{"quickly", "vite"}};
constexpr std::array kPrepositions{Entry{"near", "pres"}, Entry{"with", "avec"}, Entry{"behind", "derriere"},
                                   Entry{"under", "sous"}, Entry{"beside", "acote"}};

template <std::size_t N>
const Entry& pick(Rng& rng, const std::array<Entry, N>& table) {
  return table[rng.below(N)];
}

struct Sentence {
  std::vector<std::string> src;
  std::vector<std::string> tgt;
};

// det (adj) noun  ->  det noun (adj)
void noun_phrase(Rng& rng, Sentence& s) {
  const Entry& det = pick(rng, kDeterminers);
  const Entry& noun = pick(rng, kNouns);
  const bool with_adj = rng.unit() < 0.5;
  s.src.push_back(det.src);
  s.tgt.push_back(det.tgt);
  if (with_adj) {
    const Entry& adj = pick(rng, kAdjectives);
    s.src.push_back(adj.src);
    s.src.push_back(noun.src);
    s.tgt.push_back(noun.tgt);
    s.tgt.push_back(adj.tgt);
  } else {
    s.src.push_back(noun.src);
    s.tgt.push_back(noun.tgt);
  }
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

}  // namespace

ParallelCorpus synthetic_corpus(std::size_t pairs, std::uint64_t seed) {
  Rng rng(seed);
  ParallelCorpus out;
  for (std::size_t i = 0; i < pairs; ++i) {
    Sentence s;
    noun_phrase(rng, s);
    if (rng.unit() < 0.6) {
      // subject verb object (prep np)  ->  subject object (prep np) verb
      const Entry& verb = pick(rng, kTransitive);
      s.src.push_back(verb.src);
      Sentence obj;
      noun_phrase(rng, obj);
      if (rng.unit() < 0.3) {
        const Entry& prep = pick(rng, kPrepositions);
        obj.src.push_back(prep.src);
        obj.tgt.push_back(prep.tgt);
        noun_phrase(rng, obj);
      }
      s.src.insert(s.src.end(), obj.src.begin(), obj.src.end());
      s.tgt.insert(s.tgt.end(), obj.tgt.begin(), obj.tgt.end());
      s.tgt.push_back(verb.tgt);
    } else {
      const Entry& verb = pick(rng, kIntransitive);
      s.src.push_back(verb.src);
      s.tgt.push_back(verb.tgt);
      if (rng.unit() < 0.5) {
        const Entry& adv = pick(rng, kAdverbs);
        s.src.push_back(adv.src);
        s.tgt.push_back(adv.tgt);
      }
    }
    s.src.push_back(".");
    s.tgt.push_back(".");
    out.add(join(s.src), join(s.tgt));
  }
  return out;
}

}  // namespace nmtadv
