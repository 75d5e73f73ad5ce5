#include "nmtadv/errors.hpp"
#include "nmtadv/metrics.hpp"

#include "support/bleu_oracle.hpp"
#include "support/toy_pipeline.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

namespace nmtadv {
namespace {

using oracle::naive_bleu;
using oracle::random_corpus;

TEST(CorpusBleu, IdenticalIsHundred) {
  Rng rng(1);
  for (int t = 0; t < 10; ++t) {
    const auto x = random_corpus(rng, 1 + rng.below(10), 20);
    EXPECT_DOUBLE_EQ(corpus_bleu(x, x, false).value, 100.0);
    EXPECT_DOUBLE_EQ(corpus_bleu(x, x, true).value, 100.0);
  }
  const std::vector<std::string> single{"a", "b"};  // no higher-order n-grams at all
  EXPECT_DOUBLE_EQ(corpus_bleu(single, single).value, 100.0);
}

TEST(CorpusBleu, HandComputedRepeatedWord) {
  const std::vector<std::string> hyp{"the the the the"}, ref{"the cat sat down"};
  const auto s = corpus_bleu(hyp, ref, false);
  EXPECT_DOUBLE_EQ(s.precisions[0], 0.25);
  EXPECT_EQ(s.matches[1], 0u);
  EXPECT_EQ(s.value, 0.0);
  const auto smoothed = corpus_bleu(hyp, ref, true);
  EXPECT_GT(smoothed.value, 0.0);
  EXPECT_DOUBLE_EQ(smoothed.precisions[1], 1.0 / 4.0);  // 3 bigrams, add one
}

TEST(CorpusBleu, MatchesNaiveImplementation) {
  Rng rng(77);
  for (int t = 0; t < 50; ++t) {
    const std::size_t lines = 1 + rng.below(15);
    const auto refs = random_corpus(rng, lines, 6);
    auto hyps = random_corpus(rng, lines, 6);
    for (std::size_t i = 0; i < lines; ++i)
      if (rng.unit() < 0.3) hyps[i] = refs[i];
    EXPECT_NEAR(corpus_bleu(hyps, refs, false).value, naive_bleu(hyps, refs), 1e-6) << "corpus " << t;
  }
}

TEST(CorpusBleu, BrevityPenaltyAndErrors) {
  const std::vector<std::string> hyp{"a b c d"}, ref{"a b c d e f g h"};
  EXPECT_NEAR(corpus_bleu(hyp, ref, false).value, 100 * std::exp(1.0 - 2.0), 1e-9);
  EXPECT_THROW(corpus_bleu(hyp, std::vector<std::string>{}), InputError);
  EXPECT_THROW(corpus_bleu(std::vector<std::string>{}, std::vector<std::string>{}), InputError);
}

TEST(SuccessRate, Counts) {
  std::vector<Outcome> o(5);
  EXPECT_DOUBLE_EQ(success_rate(o), 0.0);
  o[0].success = o[2].success = o[4].success = true;
  EXPECT_DOUBLE_EQ(success_rate(o), 60.0);
  for (auto& x : o) x.success = true;
  EXPECT_DOUBLE_EQ(success_rate(o), 100.0);
  EXPECT_THROW(success_rate(std::vector<Outcome>{}), InputError);
}

TEST(NorStats, MeanAndMedian) {
  EXPECT_DOUBLE_EQ(nor_stats(std::vector<Outcome>{{true, 0.2}}).mean, 0.2);
  const auto s = nor_stats(std::vector<Outcome>{{false, 0.9}, {true, 0.2}, {false, 0.4}});
  EXPECT_DOUBLE_EQ(s.mean, 0.5);
  EXPECT_DOUBLE_EQ(s.median, 0.4);
  EXPECT_DOUBLE_EQ(nor_stats(std::vector<Outcome>{{false, 0.1}, {false, 0.3}}).median, 0.2);
  EXPECT_THROW(nor_stats(std::vector<Outcome>{}), InputError);
}

TEST(NorStats, MatchesIndependentStatistics) {
  Rng rng(5);
  std::vector<Outcome> o(1000);
  std::vector<double> v;
  for (auto& x : o) v.push_back(x.nor = static_cast<double>(1 + rng.below(20)) / 20.0);
  double sum = 0;
  for (double x : v) sum += x;
  std::nth_element(v.begin(), v.begin() + 499, v.end());
  const double lo = v[499];
  std::nth_element(v.begin(), v.begin() + 500, v.end());
  const auto s = nor_stats(o);
  EXPECT_NEAR(s.mean, sum / 1000, 1e-9);
  EXPECT_NEAR(s.median, (lo + v[500]) / 2, 1e-9);
}

TEST(CompositeScore, PublishedRows) {
  const std::vector<double> blstm{19.74, 18.51, 21.98};
  EXPECT_NEAR(composite_score(14.49, 89.86, blstm), 16.97, 0.005);
  const std::vector<double> transformer{31.09, 20.63, 27.43};
  EXPECT_NEAR(composite_score(31.17, 88.55, transformer), 24.35, 0.005);
  const std::vector<double> zeros{0, 0, 0};
  EXPECT_DOUBLE_EQ(composite_score(0, 100, zeros), 0.0);
}

TEST(CompositeScore, MonotoneInEachInput) {
  const double h = 0.5;
  std::vector<double> others{40, 50, 60};
  const double base = composite_score(30, 70, others);
  EXPECT_LT(composite_score(30, 70 + h, others), base);
  EXPECT_GT(composite_score(30 + h, 70, others), base);
  for (auto& b : others) {
    b += h;
    EXPECT_GT(composite_score(30, 70, others), base);
    b -= h;
  }
  EXPECT_THROW(composite_score(-1, 50, others), InputError);
  EXPECT_THROW(composite_score(10, 100.5, others), InputError);
}

TEST(CompositeScore, FixtureRowsAgainstPublishedColumn) {
  const auto rows = read_bleu_rows(std::filesystem::path(NMTADV_DATA_DIR) / "reference_bleu.csv");
  ASSERT_EQ(rows.size(), 16u);
  int off = 0;
  for (const auto& r : rows) {
    ASSERT_EQ(r.b.size(), 4u);
    const double e = composite_score(r.b_src, r.b[0], std::span<const double>(r.b).subspan(1));
    if (std::abs(e - r.e) > 0.005) {
      ++off;
      // The one published cell that does not follow from its inputs.
      EXPECT_EQ(r.model + " " + r.pair + " " + r.method, "blstm en-de min-grad+hotflip");
      EXPECT_NEAR(e, 46.466, 1e-9);
    }
  }
  EXPECT_EQ(off, 1);
}

TEST(Report, CsvRoundTripReproducesE) {
  std::vector<EvalReport> reports(2);
  reports[0] = {"toy", "min-grad+soft-att", 100, 42.0, 0.31, 0.3, true, 12.345678901, {88.1, 20.2}, 0};
  reports[1] = {"toy", "random+hotflip", 100, 10.0, 0.5, 0.5, true, 50.0, {70.0, 33.3333333}, 0};
  for (auto& r : reports) r.e = r.recompute_e();
  std::istringstream csv(report_csv(reports));
  const auto back = parse_report_csv(csv);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].method, reports[i].method);
    EXPECT_EQ(back[i].e, reports[i].e);
    EXPECT_EQ(back[i].recompute_e(), back[i].e);
  }
  const auto md = report_markdown(reports);
  EXPECT_NE(md.find("| toy | min-grad+soft-att | 100 | 42.00 |"), std::string::npos);
  EXPECT_NE(report_json(reports).find("\"e\""), std::string::npos);
}

TEST(Report, MalformedCsvNamesLine) {
  std::istringstream in("model,method,sentences,success_rate,nor_mean,nor_median,b_src,e\nx,y,1,2,3,4,,\nx,y,zz,2,3,4,,\n");
  try {
    parse_report_csv(in);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

// -- cross-model matrix -------------------------------------------------------------------

struct Fleet {
  toy::Pipeline a, b;
};

const Fleet& fleet() {
  static const Fleet f = [] {
    toy::Options o;
    o.pairs = 30;
    o.epochs = 8;
    o.merges = 300;
    Fleet out{toy::build(o), {}};
    o.arch = Architecture::Transformer;
    o.seed = 4;
    out.b = toy::build(o);
    return out;
  }();
  return f;
}

TEST(BleuMatrix, IdenticalSourcesGiveHundreds) {
  const auto& f = fleet();
  const std::vector<FleetMember> members{{"a", &f.a.model, &f.a.tok}, {"b", &f.b.model, &f.b.tok}};
  const std::vector<std::string> src(f.a.corpus.source.begin(), f.a.corpus.source.begin() + 8);
  const auto m = bleu_matrix(src, src, members, 1);
  EXPECT_DOUBLE_EQ(m.b_src, 100.0);
  ASSERT_EQ(m.b.size(), 2u);
  EXPECT_EQ(m.names.front(), "b");
  for (double b : m.b) EXPECT_DOUBLE_EQ(b, 100.0);
}

TEST(BleuMatrix, CellsMatchDirectBleu) {
  const auto& f = fleet();
  const std::vector<FleetMember> members{{"a", &f.a.model, &f.a.tok}, {"b", &f.b.model, &f.b.tok}};
  std::vector<std::string> orig(f.a.corpus.source.begin(), f.a.corpus.source.begin() + 20);
  std::vector<std::string> adv(f.a.corpus.source.begin() + 1, f.a.corpus.source.begin() + 21);
  std::string too_long;
  for (int i = 0; i < 40; ++i) too_long += "my cat ";
  adv[5] = too_long;
  const auto m = bleu_matrix(orig, adv, members, 0);
  EXPECT_EQ(m.excluded, 1u);
  EXPECT_EQ(m.used, 19u);
  orig.erase(orig.begin() + 5);
  adv.erase(adv.begin() + 5);
  EXPECT_DOUBLE_EQ(m.b_src, corpus_bleu(adv, orig).value);
  for (std::size_t k = 0; k < 2; ++k) {
    const auto& p = k == 0 ? f.a : f.b;
    std::vector<std::string> ref, hyp;
    for (std::size_t i = 0; i < orig.size(); ++i) {
      ref.push_back(p.tok.decode(translate(p.model, p.tok.encode(orig[i]).ids, 5).ids));
      hyp.push_back(p.tok.decode(translate(p.model, p.tok.encode(adv[i]).ids, 5).ids));
    }
    EXPECT_DOUBLE_EQ(m.b[k], corpus_bleu(hyp, ref).value);
  }
}

}  // namespace
}  // namespace nmtadv
