#include "nmtadv/attack.hpp"
#include "nmtadv/errors.hpp"

#include "support/model_oracles.hpp"
#include "support/toy_pipeline.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace nmtadv {
namespace {

using oracle::tiny_config;

PrunedVocab prune_of(std::vector<int> ids) {
  PrunedVocab p;
  std::sort(ids.begin(), ids.end());
  p.candidates = std::move(ids);
  return p;
}

MatrixF random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  MatrixF m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(rng.uniform(-scale, scale));
  return m;
}

// A random-weight tiny model plus a sentence and the model's own translation.
struct TinyCase {
  Seq2SeqModel model;
  std::vector<int> src;
  std::vector<int> target;
  PrunedVocab prune;
};

TinyCase tiny_case(Architecture arch, std::uint64_t seed, int n = 6, int vocab = 14) {
  Rng rng(seed);
  TinyCase c{Seq2SeqModel::initialize(tiny_config(arch, vocab), seed), oracle::random_ids(rng, n, vocab), {}, {}};
  c.target = translate(c.model, c.src, 2).ids;
  std::vector<int> cand;
  for (int id = kNumSpecial; id < vocab; ++id)
    if (std::find(c.src.begin(), c.src.end(), id) == c.src.end()) cand.push_back(id);
  c.prune = prune_of(cand);
  return c;
}

// -- config ---------------------------------------------------------------------------

TEST(AttackConfig, MethodPresetKeepsDefaults) {
  const auto cfg = AttackConfig::for_method("min-grad+soft-att");
  EXPECT_EQ(cfg.max_sweep, 5);
  EXPECT_EQ(cfg.max_iter, 1000);
  EXPECT_DOUBLE_EQ(cfg.max_prob, 0.9);
  EXPECT_EQ(cfg.n_iter, 10);
  EXPECT_EQ(cfg.method(), "min-grad+soft-att");
  EXPECT_EQ(AttackConfig::for_method("random+hotflip").method(), "random+hotflip");
  EXPECT_THROW(AttackConfig::for_method("min-grad"), InputError);
  EXPECT_THROW(AttackConfig::for_method("greedy+hotflip"), InputError);
}

TEST(AttackConfig, ValidationAndDigest) {
  AttackConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  for (double p : {0.0, 1.0, 1.5}) {
    auto bad = cfg;
    bad.max_prob = p;
    EXPECT_THROW(bad.validate(), InputError);
  }
  auto bad = cfg;
  bad.n_iter = 0;
  EXPECT_THROW(bad.validate(), InputError);
  EXPECT_EQ(cfg.digest(), AttackConfig{}.digest());
  auto other = cfg;
  other.seed = 2;
  EXPECT_NE(cfg.digest(), other.digest());
  EXPECT_EQ(cfg.digest().size(), 16u);
}

// -- traversal --------------------------------------------------------------------------

TEST(MinGrad, ForcedPositions) {
  EXPECT_EQ(min_grad_position(MatrixF::Constant(1, 3, 5.0f), {0}), 0);
  MatrixF g = MatrixF::Zero(5, 3);
  EXPECT_EQ(min_grad_position(g, {1, 1, 0, 1, 1}), 2);
  EXPECT_EQ(min_grad_position(g, {0, 0, 0, 0, 0}), 0);  // all tied
  EXPECT_THROW(min_grad_position(g, {1, 1, 1, 1, 1}), ContractViolation);
}

class AttackBoth : public ::testing::TestWithParam<Architecture> {};
INSTANTIATE_TEST_SUITE_P(Attack, AttackBoth, ::testing::Values(Architecture::Recurrent, Architecture::Transformer),
                         [](const auto& info) { return to_string(info.param); });

TEST_P(AttackBoth, MinGradMatchesBruteForceScan) {
  int near_ties = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto c = tiny_case(GetParam(), seed, 8);
    const ModelObjective objective(c.model, c.target);
    Rng rng(seed * 7);
    std::vector<std::uint8_t> visited(8, 0);
    for (int k = 0; k < 3; ++k) visited[rng.below(8)] = 1;

    const auto ref = oracle::gradients(c.model, detail::one_hot_rows<double>(c.src, c.model.vocab_size()),
                                       oracle::mask_of(c.src), c.target);
    std::vector<std::pair<double, int>> norms;
    for (int i = 0; i < 8; ++i)
      if (!visited[static_cast<std::size_t>(i)]) norms.emplace_back(ref.embedded.row(i).norm(), i);
    std::sort(norms.begin(), norms.end());
    const int got = min_grad_position(objective, c.src, visited);
    if (norms[1].first - norms[0].first < 1e-5 * norms[0].first) {
      ++near_ties;  // float vs double could legitimately split a near tie
      continue;
    }
    EXPECT_EQ(got, norms[0].second) << "seed " << seed;
  }
  EXPECT_LE(near_ties, 1);
}

TEST(RandomPosition, ForcedAndDeterministic) {
  Rng rng(1);
  EXPECT_EQ(random_position({1, 1, 0, 1}, rng), 2);
  EXPECT_THROW(random_position({1, 1}, rng), ContractViolation);
  Rng a(42), b(42);
  const std::vector<std::uint8_t> open(9, 0);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(random_position(open, a), random_position(open, b));
}

TEST(RandomPosition, UniformOverUnvisited) {
  Rng rng(2024);
  const std::vector<std::uint8_t> visited{1, 0, 0, 1, 0, 0, 1};
  std::map<int, int> counts;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) ++counts[random_position(visited, rng)];
  ASSERT_EQ(counts.size(), 4u);
  const double sigma = std::sqrt(draws * 0.25 * 0.75);
  for (const auto& [pos, count] : counts) {
    EXPECT_FALSE(visited[static_cast<std::size_t>(pos)]);
    EXPECT_LT(std::abs(count - 2500), 3 * sigma) << "position " << pos;
  }
}

// -- soft-att -----------------------------------------------------------------------------

struct Linear {
  MatrixF embedding;
  MatrixF weights;
};

Linear random_linear(std::uint64_t seed, int vocab, int n, int d = 6) {
  Rng rng(seed);
  return {random_matrix(rng, vocab, d), random_matrix(rng, n, d)};
}

TEST(SoftAtt, SingleCandidateIsReturnedWithHardLoss) {
  const auto c = tiny_case(Architecture::Recurrent, 3);
  const ModelObjective objective(c.model, c.target);
  AttackConfig cfg;
  cfg.max_iter = 20;
  const PrunedVocab one = prune_of({c.prune.candidates.back()});
  const auto choice = soft_att_replace(objective, c.src, 2, one, cfg);
  EXPECT_EQ(choice.word, one.candidates[0]);
  auto flipped = c.src;
  flipped[2] = choice.word;
  EXPECT_EQ(choice.loss, objective.loss(flipped));
}

TEST(SoftAtt, EmptyPruneIsNoCandidates) {
  const auto lin = random_linear(1, 10, 4);
  const LinearObjective objective(lin.embedding, lin.weights);
  const std::vector<int> s{4, 5, 6, 7};
  EXPECT_THROW(soft_att_replace(objective, s, 1, PrunedVocab{}, AttackConfig{}), NoCandidatesError);
  EXPECT_THROW(hotflip_replace(objective, s, 1, PrunedVocab{}), NoCandidatesError);
}

TEST(SoftAtt, LinearSurrogateFindsCoefficientArgmin) {
  for (const auto update : {SoftAttUpdate::Softmax, SoftAttUpdate::Simplex}) {
    int hits = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const int vocab = 44;
      const auto lin = random_linear(seed, vocab, 5);
      const LinearObjective objective(lin.embedding, lin.weights, 3.0);
      std::vector<int> cand(vocab - kNumSpecial - 4);
      std::iota(cand.begin(), cand.end(), kNumSpecial + 4);
      const PrunedVocab prune = prune_of(cand);
      const std::vector<int> s{4, 5, 6, 7, 4};
      AttackConfig cfg;
      cfg.update = update;
      const auto choice = soft_att_replace(objective, s, 3, prune, cfg);
      int best = cand[0];
      for (int j : cand)
        if (objective.coefficient(3, j) < objective.coefficient(3, best)) best = j;
      hits += choice.word == best;
      auto flipped = s;
      flipped[3] = choice.word;
      EXPECT_NEAR(choice.loss, objective.loss(flipped), 1e-9);
    }
    EXPECT_GE(hits, 19) << to_string(update);
  }
}

TEST(SoftAtt, ZeroGradientStaysUniform) {
  const LinearObjective objective(MatrixF::Ones(12, 3), MatrixF::Zero(4, 3), 1.5);
  AttackConfig cfg;
  cfg.max_iter = 37;
  const PrunedVocab prune = prune_of({9, 6, 11, 8});
  const std::vector<int> s{4, 5, 7, 10};
  for (const auto update : {SoftAttUpdate::Softmax, SoftAttUpdate::Simplex}) {
    cfg.update = update;
    const auto choice = soft_att_replace(objective, s, 0, prune, cfg);
    EXPECT_EQ(choice.word, 6);
    EXPECT_EQ(choice.iterations, 37);
    EXPECT_FALSE(choice.converged);
    EXPECT_NEAR(choice.p_max, 0.25, 1e-12);
  }
}

TEST(SoftAtt, StopsAfterNIterAboveMaxProb) {
  // One strongly preferred candidate: convergence is reached long before max_iter.
  MatrixF e = MatrixF::Zero(8, 1);
  e(5, 0) = -40.0f;
  const LinearObjective objective(e, MatrixF::Ones(2, 1));
  AttackConfig cfg;
  cfg.n_iter = 4;
  const auto choice = soft_att_replace(objective, std::vector<int>{4, 7}, 1, prune_of({5, 6}), cfg);
  EXPECT_EQ(choice.word, 5);
  EXPECT_TRUE(choice.converged);
  EXPECT_GT(choice.p_max, cfg.max_prob);
  EXPECT_LT(choice.iterations, cfg.max_iter);
  // The streak needs n_iter iterations above the threshold, so running one
  // more iteration never shortens it.
  cfg.n_iter = 5;
  EXPECT_EQ(soft_att_replace(objective, std::vector<int>{4, 7}, 1, prune_of({5, 6}), cfg).iterations,
            choice.iterations + 1);
}

TEST(SoftAtt, RelaxedModeReturnsRelaxedLoss) {
  const auto c = tiny_case(Architecture::Transformer, 5);
  const ModelObjective objective(c.model, c.target);
  AttackConfig cfg;
  cfg.max_iter = 15;
  cfg.loss_mode = LossMode::Relaxed;
  const auto choice = soft_att_replace(objective, c.src, 1, c.prune, cfg);
  EXPECT_EQ(choice.loss, choice.relaxed_loss);
  EXPECT_TRUE(c.prune.contains(choice.word));
}

// -- hotflip ------------------------------------------------------------------------------

TEST_P(AttackBoth, HotFlipMatchesBruteForceScoring) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto c = tiny_case(GetParam(), seed + 100);
    const ModelObjective objective(c.model, c.target);
    const Eigen::Index r = static_cast<Eigen::Index>(seed % c.src.size());
    const auto ref = oracle::gradients(c.model, detail::one_hot_rows<double>(c.src, c.model.vocab_size()),
                                       oracle::mask_of(c.src), c.target);
    const double current = ref.input(r, c.src[static_cast<std::size_t>(r)]);
    std::vector<std::pair<double, int>> scored;
    for (int j : c.prune.candidates) scored.emplace_back(ref.input(r, j) - current, j);
    std::sort(scored.begin(), scored.end());
    const auto choice = hotflip_replace(objective, c.src, r, c.prune);
    if (scored[1].first - scored[0].first > 1e-5) EXPECT_EQ(choice.word, scored[0].second) << "seed " << seed;
    auto flipped = c.src;
    flipped[static_cast<std::size_t>(r)] = choice.word;
    EXPECT_EQ(choice.loss, objective.loss(flipped));
  }
}

TEST(HotFlip, FirstOrderIsExactOnLinearModel) {
  const auto lin = random_linear(9, 30, 6);
  const LinearObjective objective(lin.embedding, lin.weights, -2.0);
  const std::vector<int> s{4, 8, 15, 16, 23, 5};
  std::vector<int> cand;
  for (int j = kNumSpecial; j < 30; ++j)
    if (std::find(s.begin(), s.end(), j) == s.end()) cand.push_back(j);
  const PrunedVocab prune = prune_of(cand);
  const auto g = objective.gradients(s);
  for (Eigen::Index r = 0; r < 6; ++r) {
    const auto scores = hotflip_scores(g.input, s, r, prune);
    for (std::size_t k = 0; k < cand.size(); ++k) {
      auto flipped = s;
      flipped[static_cast<std::size_t>(r)] = cand[k];
      EXPECT_NEAR(g.loss + scores[k], objective.loss(flipped), 1e-5);
    }
  }
  EXPECT_EQ(hotflip_replace(objective, s, 2, prune_of({cand[3]})).word, cand[3]);
}

// -- Algorithm 3 ----------------------------------------------------------------------------

// Straight-line transcription of the sweep loop, used as a reference.
struct RefOutcome {
  std::vector<int> s;
  std::vector<std::tuple<int, int, int>> replacements;  // sweep, position, token
  double l_min;
};

RefOutcome reference_sweeps(const AttackObjective& obj, const std::vector<int>& s_org, const PrunedVocab& prune,
                            const AttackConfig& cfg, Rng& rng) {
  const std::size_t n = s_org.size();
  std::vector<int> s = s_org;
  const double l_org = obj.loss(s);
  double l_min = cfg.l_min;
  std::set<int> ind_rep;
  RefOutcome out;
  for (int sweep = 1; sweep <= cfg.max_sweep; ++sweep) {
    std::set<int> ind_vis;
    bool any = false;
    while (ind_vis.size() < n) {
      const double l = obj.loss(s);
      int r = -1;
      if (cfg.traversal == Traversal::MinGrad) {
        const MatrixF g = obj.gradients(s).embedded;
        double best = 0.0;
        for (int i = 0; i < static_cast<int>(n); ++i) {
          if (ind_vis.count(i)) continue;
          const double norm = g.row(i).cast<double>().norm();
          if (r < 0 || norm < best) r = i, best = norm;
        }
      } else {
        std::vector<int> open;
        for (int i = 0; i < static_cast<int>(n); ++i)
          if (!ind_vis.count(i)) open.push_back(i);
        r = open[rng.below(open.size())];
      }
      ind_vis.insert(r);
      const auto choice = cfg.replacement == ReplacementKind::SoftAtt ? soft_att_replace(obj, s, r, prune, cfg)
                                                                      : hotflip_replace(obj, s, r, prune);
      if ((ind_rep.count(r) && choice.loss < l) || (!ind_rep.count(r) && choice.loss < l_min)) {
        l_min = std::max(choice.loss, l_org);
        s[static_cast<std::size_t>(r)] = choice.word;
        ind_rep.insert(r);
        out.replacements.emplace_back(sweep, r, choice.word);
        any = true;
      }
    }
    if (!any) break;
  }
  out.s = s;
  out.l_min = l_min;
  return out;
}

// Checks every logged replacement against the objective and the acceptance rules.
void expect_trace_invariants(const AttackObjective& obj, const std::vector<int>& s_org, const PrunedVocab& prune,
                             const AttackConfig& cfg, const AttackTrace& t) {
  const std::size_t n = s_org.size();
  EXPECT_LE(t.sweeps, cfg.max_sweep);
  EXPECT_EQ(t.visit_order.size(), static_cast<std::size_t>(t.steps));
  EXPECT_EQ(static_cast<std::size_t>(t.steps), static_cast<std::size_t>(t.sweeps) * n);
  for (std::size_t begin = 0; begin < t.visit_order.size(); begin += n) {
    std::set<int> sweep(t.visit_order.begin() + static_cast<long>(begin),
                        t.visit_order.begin() + static_cast<long>(begin + n));
    EXPECT_EQ(sweep.size(), n);
  }
  std::vector<int> s = s_org;
  std::set<int> replaced;
  for (const auto& rep : t.replacements) {
    EXPECT_TRUE(prune.contains(rep.new_token));
    EXPECT_EQ(rep.old_token, s[static_cast<std::size_t>(rep.position)]);
    EXPECT_EQ(rep.loss_before, obj.loss(s));
    const bool revisit = replaced.count(rep.position) > 0;
    EXPECT_EQ(rep.rule, revisit ? AcceptRule::Revisit : AcceptRule::FirstVisit);
    if (revisit)
      EXPECT_LT(rep.loss_after, rep.loss_before);
    else
      EXPECT_LT(rep.loss_after, rep.l_min_before);
    EXPECT_EQ(rep.l_min_after, std::max(rep.loss_after, t.l_org));
    EXPECT_GE(rep.l_min_after, t.l_org);
    s[static_cast<std::size_t>(rep.position)] = rep.new_token;
    replaced.insert(rep.position);
    if (cfg.loss_mode == LossMode::Hard || cfg.replacement == ReplacementKind::HotFlip)
      EXPECT_EQ(rep.loss_after, obj.loss(s));
  }
  EXPECT_EQ(s, t.adversarial);
  if (t.min_candidate_loss < cfg.l_min && cfg.max_sweep > 0) EXPECT_GE(t.replacements.size(), 1u);
}

TEST(RunSweeps, ZeroSweepsLeavesSentenceAlone) {
  const auto c = tiny_case(Architecture::Recurrent, 8);
  const ModelObjective objective(c.model, c.target);
  AttackConfig cfg;
  cfg.max_sweep = 0;
  Rng rng(1);
  const auto t = run_sweeps(objective, c.src, c.prune, cfg, rng);
  EXPECT_EQ(t.adversarial, c.src);
  EXPECT_TRUE(t.replacements.empty());
  EXPECT_EQ(t.sweeps, 0);
}

TEST(RunSweeps, EmptySentenceAndEmptyPrune) {
  const auto c = tiny_case(Architecture::Recurrent, 8);
  const ModelObjective objective(c.model, c.target);
  Rng rng(1);
  EXPECT_THROW(run_sweeps(objective, c.src, PrunedVocab{}, AttackConfig{}, rng), NoCandidatesError);
  EXPECT_THROW(run_sweeps(objective, std::vector<int>{}, c.prune, AttackConfig{}, rng), ContractViolation);
}

struct MethodCase {
  Architecture arch;
  const char* method;
};

class SweepMethods : public ::testing::TestWithParam<MethodCase> {};
INSTANTIATE_TEST_SUITE_P(
    Attack, SweepMethods,
    ::testing::Values(MethodCase{Architecture::Recurrent, "min-grad+soft-att"},
                      MethodCase{Architecture::Recurrent, "random+soft-att"},
                      MethodCase{Architecture::Transformer, "min-grad+hotflip"},
                      MethodCase{Architecture::Transformer, "random+hotflip"}),
    [](const auto& info) {
      std::string name = to_string(info.param.arch) + "_" + info.param.method;
      std::replace_if(name.begin(), name.end(), [](char ch) { return !std::isalnum(static_cast<unsigned char>(ch)); }, '_');
      return name;
    });

TEST_P(SweepMethods, MatchesReferenceAndKeepsInvariants) {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto c = tiny_case(GetParam().arch, seed + 30, 5);
    const ModelObjective objective(c.model, c.target);
    auto cfg = AttackConfig::for_method(GetParam().method);
    cfg.max_iter = 30;
    Rng a(seed), b(seed);
    const auto t = run_sweeps(objective, c.src, c.prune, cfg, a);
    const auto ref = reference_sweeps(objective, c.src, c.prune, cfg, b);
    EXPECT_EQ(t.adversarial, ref.s);
    EXPECT_EQ(t.l_min, ref.l_min);
    ASSERT_EQ(t.replacements.size(), ref.replacements.size());
    for (std::size_t k = 0; k < ref.replacements.size(); ++k) {
      EXPECT_EQ(t.replacements[k].sweep, std::get<0>(ref.replacements[k]));
      EXPECT_EQ(t.replacements[k].position, std::get<1>(ref.replacements[k]));
      EXPECT_EQ(t.replacements[k].new_token, std::get<2>(ref.replacements[k]));
    }
    expect_trace_invariants(objective, c.src, c.prune, cfg, t);
    EXPECT_GE(t.replacements.size(), 1u);
  }
}

TEST(RunSweeps, RelaxedLossModeKeepsAcceptanceRules) {
  const auto c = tiny_case(Architecture::Transformer, 77, 5);
  const ModelObjective objective(c.model, c.target);
  auto cfg = AttackConfig::for_method("min-grad+soft-att");
  cfg.max_iter = 20;
  cfg.loss_mode = LossMode::Relaxed;
  Rng rng(1);
  expect_trace_invariants(objective, c.src, c.prune, cfg, run_sweeps(objective, c.src, c.prune, cfg, rng));
}

TEST(RunSweeps, LowInitialThresholdCanBlockEveryReplacement) {
  const auto c = tiny_case(Architecture::Recurrent, 12, 4);
  const ModelObjective objective(c.model, c.target);
  auto cfg = AttackConfig::for_method("min-grad+hotflip");
  cfg.l_min = -1.0;  // no NLL is negative
  Rng rng(1);
  const auto t = run_sweeps(objective, c.src, c.prune, cfg, rng);
  EXPECT_TRUE(t.replacements.empty());
  EXPECT_EQ(t.sweeps, 1);
  EXPECT_GE(t.min_candidate_loss, 0.0);
}

// -- end to end on a trained toy model --------------------------------------------------------

const toy::Pipeline& trained() {
  static const toy::Pipeline p = [] {
    toy::Options o;
    o.pairs = 40;
    o.epochs = 25;
    return toy::build(o);
  }();
  return p;
}

TEST(RunAttack, ResultFieldsAreConsistent) {
  const auto& p = trained();
  auto cfg = AttackConfig::for_method("min-grad+soft-att");
  cfg.max_iter = 40;
  for (std::size_t i = 0; i < 3; ++i) {
    const TokenSeq s = p.tok.encode(p.corpus.source[i]);
    const PrunedVocab prune = build_pruned_vocab(p.tok.vocab(), p.source_words, s);
    const auto res = run_attack(p.model, p.tok, s, prune, cfg, sentence_seed(cfg.seed, i));
    EXPECT_EQ(res.success, res.t_adv.ids == res.t_org.ids);
    EXPECT_EQ(res.t_org.ids, translate(p.model, s.ids, 5).ids);
    EXPECT_EQ(res.s_adv.ids, res.trace.adversarial);
    EXPECT_GT(res.nor, 0.0);
    EXPECT_LE(res.nor, 1.0);
    EXPECT_FALSE(res.no_replacement);
    EXPECT_TRUE(res.premise_held);
    EXPECT_EQ(res.src_text, p.tok.decode(s));
    for (const auto& rep : res.trace.replacements) EXPECT_TRUE(prune.contains(rep.new_token));
  }
}

TEST(RunAttack, ZeroSweepsIsFlagged) {
  const auto& p = trained();
  AttackConfig cfg;
  cfg.max_sweep = 0;
  const TokenSeq s = p.tok.encode(p.corpus.source[0]);
  const auto res = run_attack(p.model, p.tok, s, build_pruned_vocab(p.tok.vocab(), p.source_words, s), cfg, 1);
  EXPECT_TRUE(res.no_replacement);
  EXPECT_TRUE(res.success);
  EXPECT_EQ(res.nor, 0.0);
  EXPECT_EQ(res.adv_text, res.src_text);
}

TEST(AttackSentences, InputOrderIndependentOfWorkers) {
  const auto& p = trained();
  auto cfg = AttackConfig::for_method("random+hotflip");
  std::vector<std::string> sentences(p.corpus.source.begin(), p.corpus.source.begin() + 6);
  std::string very_long;
  for (int i = 0; i < 40; ++i) very_long += "the cat ";
  sentences[2] = very_long;
  sentences.push_back("   ");

  const auto one = attack_sentences(p.model, p.tok, p.source_words, sentences, cfg, 1);
  const auto three = attack_sentences(p.model, p.tok, p.source_words, sentences, cfg, 3);
  ASSERT_EQ(one.size(), sentences.size());
  ASSERT_EQ(three.size(), sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    EXPECT_EQ(one[i].index, i);
    EXPECT_EQ(one[i].result.has_value(), three[i].result.has_value());
    EXPECT_EQ(one[i].skipped, three[i].skipped);
    if (one[i].result) {
      EXPECT_EQ(one[i].result->s_adv.ids, three[i].result->s_adv.ids);
      EXPECT_EQ(one[i].result->seed, sentence_seed(cfg.seed, i));
    }
  }
  EXPECT_NE(one[2].skipped.find("max_len"), std::string::npos);
  EXPECT_FALSE(one.back().result.has_value());
}

TEST(SentenceSeed, DistinctPerIndexAndRun) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t run = 1; run <= 3; ++run)
    for (std::size_t i = 0; i < 100; ++i) seen.insert(sentence_seed(run, i));
  EXPECT_EQ(seen.size(), 300u);
}

}  // namespace
}  // namespace nmtadv
