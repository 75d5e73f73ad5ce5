#include "nmtadv/attack.hpp"

#include "nmtadv/checkpoint.hpp"
#include "nmtadv/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace nmtadv {

// -- names ------------------------------------------------------------------------

std::string to_string(Traversal t) { return t == Traversal::MinGrad ? "min-grad" : "random"; }
std::string to_string(ReplacementKind k) { return k == ReplacementKind::SoftAtt ? "soft-att" : "hotflip"; }
std::string to_string(LossMode m) { return m == LossMode::Hard ? "hard" : "relaxed"; }
std::string to_string(SoftAttUpdate u) { return u == SoftAttUpdate::Softmax ? "softmax" : "simplex"; }
std::string to_string(AcceptRule rule) { return rule == AcceptRule::Revisit ? "revisit" : "first-visit"; }

Traversal parse_traversal(std::string_view s) {
  if (s == "min-grad") return Traversal::MinGrad;
  if (s == "random") return Traversal::Random;
  throw InputError("unknown traversal '" + std::string(s) + "' (min-grad | random)");
}

ReplacementKind parse_replacement(std::string_view s) {
  if (s == "soft-att") return ReplacementKind::SoftAtt;
  if (s == "hotflip") return ReplacementKind::HotFlip;
  throw InputError("unknown replacement '" + std::string(s) + "' (soft-att | hotflip)");
}

LossMode parse_loss_mode(std::string_view s) {
  if (s == "hard") return LossMode::Hard;
  if (s == "relaxed") return LossMode::Relaxed;
  throw InputError("unknown loss mode '" + std::string(s) + "' (hard | relaxed)");
}

SoftAttUpdate parse_update(std::string_view s) {
  if (s == "softmax") return SoftAttUpdate::Softmax;
  if (s == "simplex") return SoftAttUpdate::Simplex;
  throw InputError("unknown soft-att update '" + std::string(s) + "' (softmax | simplex)");
}

// -- config -------------------------------------------------------------------------

void AttackConfig::validate() const {
  if (max_sweep < 0) throw InputError("max_sweep must be >= 0");
  if (max_iter <= 0 || n_iter <= 0) throw InputError("max_iter and n_iter must be positive");
  if (!(max_prob > 0.0 && max_prob < 1.0)) throw InputError("max_prob must lie in (0, 1)");
  if (!(step > 0.0) || !std::isfinite(step)) throw InputError("step must be positive");
  if (!std::isfinite(l_min)) throw InputError("l_min must be finite");
  if (beam_width < 1) throw InputError("beam_width must be >= 1");
}

std::string AttackConfig::method() const { return to_string(traversal) + "+" + to_string(replacement); }

std::string AttackConfig::canonical() const {
  std::ostringstream out;
  out.precision(17);
  out << "beam_width=" << beam_width << '\n'
      << "compare_text=" << (compare_text ? 1 : 0) << '\n'
      << "l_min=" << l_min << '\n'
      << "loss_mode=" << to_string(loss_mode) << '\n'
      << "max_iter=" << max_iter << '\n'
      << "max_prob=" << max_prob << '\n'
      << "max_sweep=" << max_sweep << '\n'
      << "n_iter=" << n_iter << '\n'
      << "replacement=" << to_string(replacement) << '\n'
      << "seed=" << seed << '\n'
      << "step=" << step << '\n'
      << "traversal=" << to_string(traversal) << '\n'
      << "update=" << to_string(update) << '\n';
  return out.str();
}

std::string AttackConfig::digest() const { return digest_hex(canonical()); }

AttackConfig AttackConfig::for_method(std::string_view method) {
  const auto plus = method.find('+');
  if (plus == std::string_view::npos)
    throw InputError("method must look like <traversal>+<replacement>, got '" + std::string(method) + "'");
  AttackConfig cfg;
  cfg.traversal = parse_traversal(method.substr(0, plus));
  cfg.replacement = parse_replacement(method.substr(plus + 1));
  return cfg;
}

// -- objectives -------------------------------------------------------------------------

ModelObjective::ModelObjective(const Seq2SeqModel& model, std::vector<int> target)
    : model_(model), target_(std::move(target)) {
  if (target_.empty()) throw ContractViolation("attack objective needs a nonempty target");
}

double ModelObjective::loss(std::span<const int> s) const {
  return nll_loss(model_, InputRepresentation::one_hot(s, model_.vocab_size()), target_);
}

LossGradients ModelObjective::gradients(std::span<const int> s) const {
  return loss_and_gradients(model_, InputRepresentation::one_hot(s, model_.vocab_size()), target_);
}

RelaxedLoss ModelObjective::relaxed(std::span<const int> s, Eigen::Index r, std::span<const int> support,
                                    std::span<const float> probs) const {
  auto x = InputRepresentation::one_hot(s, model_.vocab_size());
  x.set_distribution(r, support, probs);
  return relaxed_loss(model_, x, r, support, target_);
}

LinearObjective::LinearObjective(MatrixF embedding, MatrixF weights, double bias)
    : embedding_(std::move(embedding)), weights_(std::move(weights)), bias_(bias) {
  if (embedding_.cols() != weights_.cols()) throw ContractViolation("linear objective: embedding/weight width mismatch");
}

double LinearObjective::coefficient(Eigen::Index r, int j) const {
  return static_cast<double>(embedding_.row(j).cast<double>().dot(weights_.row(r).cast<double>()));
}

double LinearObjective::loss(std::span<const int> s) const {
  if (static_cast<Eigen::Index>(s.size()) != weights_.rows()) throw ContractViolation("linear objective: length mismatch");
  double total = bias_;
  for (std::size_t i = 0; i < s.size(); ++i) total += coefficient(static_cast<Eigen::Index>(i), s[i]);
  return total;
}

LossGradients LinearObjective::gradients(std::span<const int> s) const {
  LossGradients g;
  g.loss = loss(s);
  g.embedded = weights_;
  g.input = weights_ * embedding_.transpose();
  return g;
}

RelaxedLoss LinearObjective::relaxed(std::span<const int> s, Eigen::Index r, std::span<const int> support,
                                     std::span<const float> probs) const {
  RelaxedLoss out;
  out.loss = loss(s) - coefficient(r, s[static_cast<std::size_t>(r)]);
  for (std::size_t j = 0; j < support.size(); ++j) {
    const double c = coefficient(r, support[j]);
    out.loss += static_cast<double>(probs[j]) * c;
    out.grad.push_back(static_cast<float>(c));
  }
  return out;
}

// -- traversal --------------------------------------------------------------------------

int min_grad_position(const MatrixF& embedding_grads, const std::vector<std::uint8_t>& visited) {
  if (static_cast<Eigen::Index>(visited.size()) != embedding_grads.rows())
    throw ContractViolation("min_grad_position: visited mask length mismatch");
  int best = -1;
  double best_norm = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < embedding_grads.rows(); ++i) {
    if (visited[static_cast<std::size_t>(i)]) continue;
    const double norm = embedding_grads.row(i).cast<double>().norm();
    if (best < 0 || norm < best_norm) {
      best = static_cast<int>(i);
      best_norm = norm;
    }
  }
  if (best < 0) throw ContractViolation("min_grad_position: every position already visited");
  return best;
}

int min_grad_position(const AttackObjective& objective, std::span<const int> s, const std::vector<std::uint8_t>& visited) {
  return min_grad_position(objective.gradients(s).embedded, visited);
}

int random_position(const std::vector<std::uint8_t>& visited, Rng& rng) {
  std::vector<int> open;
  for (std::size_t i = 0; i < visited.size(); ++i)
    if (!visited[i]) open.push_back(static_cast<int>(i));
  if (open.empty()) throw ContractViolation("random_position: every position already visited");
  return open[rng.below(open.size())];
}

// -- replacement ---------------------------------------------------------------------------

namespace {

void require_candidates(const PrunedVocab& prune) {
  if (prune.candidates.empty()) throw NoCandidatesError("no candidates: pruned vocabulary is empty");
}

std::vector<int> substituted(std::span<const int> s, Eigen::Index r, int word) {
  std::vector<int> out(s.begin(), s.end());
  out[static_cast<std::size_t>(r)] = word;
  return out;
}

// Euclidean projection onto the probability simplex.
void project_to_simplex(std::vector<double>& v) {
  std::vector<double> u(v);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    cumulative += u[k];
    const double t = (cumulative - 1.0) / static_cast<double>(k + 1);
    if (u[k] - t > 0.0) theta = t;
  }
  for (auto& x : v) x = std::max(0.0, x - theta);
}

std::vector<double> softmax_of(const std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double total = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) total += (p[j] = std::exp(z[j] - m));
  for (auto& x : p) x /= total;
  return p;
}

// Float copy whose entries sum to 1 as closely as float allows.
std::vector<float> to_float_distribution(const std::vector<double>& p) {
  std::vector<float> out(p.size());
  double total = std::accumulate(p.begin(), p.end(), 0.0);
  for (std::size_t j = 0; j < p.size(); ++j) out[j] = static_cast<float>(p[j] / total);
  return out;
}

}  // namespace

ReplacementChoice soft_att_replace(const AttackObjective& objective, std::span<const int> s, Eigen::Index r,
                                   const PrunedVocab& prune, const AttackConfig& cfg) {
  require_candidates(prune);
  if (r < 0 || r >= static_cast<Eigen::Index>(s.size())) throw ContractViolation("soft_att_replace: position out of range");
  const std::vector<int>& support = prune.candidates;
  const std::size_t k = support.size();

  std::vector<double> z(k, 0.0);                                   // softmax scores
  std::vector<double> p(k, 1.0 / static_cast<double>(k));          // current distribution
  ReplacementChoice out;
  std::size_t word = 0;
  int streak = 0;
  for (int it = 1; it <= cfg.max_iter; ++it) {
    const RelaxedLoss rl = objective.relaxed(s, r, support, to_float_distribution(p));
    out.relaxed_loss = rl.loss;
    out.iterations = it;

    if (cfg.update == SoftAttUpdate::Softmax) {
      // dL/dz_j = p_j (g_j - sum_i p_i g_i)
      double mean = 0.0;
      for (std::size_t j = 0; j < k; ++j) mean += p[j] * rl.grad[j];
      for (std::size_t j = 0; j < k; ++j) z[j] -= cfg.step * p[j] * (rl.grad[j] - mean);
      p = softmax_of(z);
    } else {
      for (std::size_t j = 0; j < k; ++j) p[j] -= cfg.step * rl.grad[j];
      project_to_simplex(p);
    }

    const std::size_t best = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    if (best != word) streak = 0;  // every other word's count is reset
    word = best;
    out.p_max = p[best];
    if (p[best] > cfg.max_prob) {
      if (++streak == cfg.n_iter) {
        out.converged = true;
        break;
      }
    } else {
      streak = 0;
    }
  }
  out.word = support[word];
  out.loss = cfg.loss_mode == LossMode::Hard ? objective.loss(substituted(s, r, out.word)) : out.relaxed_loss;
  return out;
}

std::vector<double> hotflip_scores(const MatrixF& onehot_grads, std::span<const int> s, Eigen::Index r,
                                   const PrunedVocab& prune) {
  const double current = onehot_grads(r, s[static_cast<std::size_t>(r)]);
  std::vector<double> scores;
  scores.reserve(prune.size());
  for (int j : prune.candidates) scores.push_back(static_cast<double>(onehot_grads(r, j)) - current);
  return scores;
}

ReplacementChoice hotflip_replace(const AttackObjective& objective, std::span<const int> s, Eigen::Index r,
                                  const PrunedVocab& prune) {
  require_candidates(prune);
  if (r < 0 || r >= static_cast<Eigen::Index>(s.size())) throw ContractViolation("hotflip_replace: position out of range");
  const auto scores = hotflip_scores(objective.gradients(s).input, s, r, prune);
  const auto best = static_cast<std::size_t>(std::min_element(scores.begin(), scores.end()) - scores.begin());
  ReplacementChoice out;
  out.word = prune.candidates[best];
  out.loss = objective.loss(substituted(s, r, out.word));
  out.iterations = 1;
  return out;
}

// -- Algorithm 3 ------------------------------------------------------------------------------

std::size_t AttackTrace::distinct_positions() const {
  std::set<int> seen;
  for (const auto& r : replacements) seen.insert(r.position);
  return seen.size();
}

AttackTrace run_sweeps(const AttackObjective& objective, std::span<const int> s_org, const PrunedVocab& prune,
                       const AttackConfig& cfg, Rng& rng) {
  cfg.validate();
  if (s_org.empty()) throw ContractViolation("cannot attack an empty sentence");
  require_candidates(prune);

  const std::size_t n = s_org.size();
  AttackTrace trace;
  trace.adversarial.assign(s_org.begin(), s_org.end());
  trace.l_org = objective.loss(s_org);
  trace.l_min = cfg.l_min;
  trace.min_candidate_loss = std::numeric_limits<double>::infinity();
  std::vector<std::uint8_t> replaced(n, 0);  // ind_rep
  std::vector<int>& s = trace.adversarial;

  for (int sweep = 1; sweep <= cfg.max_sweep; ++sweep) {
    trace.sweeps = sweep;
    bool changed = false;
    std::vector<std::uint8_t> visited(n, 0);  // ind_vis
    for (std::size_t count = 0; count < n; ++count) {
      int r = 0;
      double l = 0.0;
      if (cfg.traversal == Traversal::MinGrad) {
        const LossGradients g = objective.gradients(s);
        l = g.loss;
        r = min_grad_position(g.embedded, visited);
      } else {
        l = objective.loss(s);
        r = random_position(visited, rng);
      }
      visited[static_cast<std::size_t>(r)] = 1;
      trace.visit_order.push_back(r);
      ++trace.steps;

      const ReplacementChoice choice = cfg.replacement == ReplacementKind::SoftAtt
                                           ? soft_att_replace(objective, s, r, prune, cfg)
                                           : hotflip_replace(objective, s, r, prune);
      trace.min_candidate_loss = std::min(trace.min_candidate_loss, choice.loss);

      const bool seen = replaced[static_cast<std::size_t>(r)] != 0;
      const bool accept = seen ? choice.loss < l : choice.loss < trace.l_min;
      if (!accept) continue;
      ReplacementLog log;
      log.position = r;
      log.old_token = s[static_cast<std::size_t>(r)];
      log.new_token = choice.word;
      log.loss_before = l;
      log.loss_after = choice.loss;
      log.l_min_before = trace.l_min;
      log.sweep = sweep;
      log.rule = seen ? AcceptRule::Revisit : AcceptRule::FirstVisit;
      replaced[static_cast<std::size_t>(r)] = 1;
      trace.l_min = std::max(choice.loss, trace.l_org);
      log.l_min_after = trace.l_min;
      s[static_cast<std::size_t>(r)] = choice.word;
      trace.replacements.push_back(log);
      changed = true;
    }
    if (!changed) break;
  }
  return trace;
}

namespace {

TokenSeq adversarial_seq(const TokenSeq& s_org, const std::vector<int>& ids) {
  TokenSeq out;
  out.ids = ids;
  out.word_initial = s_org.word_initial;
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (ids[i] != s_org.ids[i]) out.word_initial[i] = 1;  // candidates are whole words
  return out;
}

}  // namespace

AttackResult run_attack(const Seq2SeqModel& model, const Tokenizer& tok, const TokenSeq& s_org,
                        const PrunedVocab& prune, const AttackConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  AttackResult res;
  res.s_org = s_org;
  res.seed = seed;
  res.t_org = translate(model, s_org.ids, cfg.beam_width);
  const ModelObjective objective(model, res.t_org.ids);
  Rng rng(seed);
  res.trace = run_sweeps(objective, s_org.ids, prune, cfg, rng);

  res.s_adv = adversarial_seq(s_org, res.trace.adversarial);
  res.t_adv = translate(model, res.s_adv.ids, cfg.beam_width);
  res.src_text = tok.decode(s_org);
  res.adv_text = tok.decode(res.s_adv);
  res.s_adv.text = res.adv_text;
  res.pred_text = tok.decode(res.t_org.ids);
  res.adv_pred_text = tok.decode(res.t_adv.ids);
  res.success = cfg.compare_text ? res.pred_text == res.adv_pred_text : res.t_adv.ids == res.t_org.ids;
  res.nor = static_cast<double>(res.trace.distinct_positions()) / static_cast<double>(s_org.size());
  res.no_replacement = res.trace.replacements.empty();
  res.premise_held = cfg.max_sweep == 0 || res.trace.min_candidate_loss < cfg.l_min;
  return res;
}

std::uint64_t sentence_seed(std::uint64_t run_seed, std::size_t index) {
  // splitmix64 finaliser over the pair
  std::uint64_t z = run_seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(index) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::vector<AttackOutcome> attack_sentences(const Seq2SeqModel& model, const Tokenizer& tok,
                                            const std::set<std::string>& source_words,
                                            const std::vector<std::string>& sentences, const AttackConfig& cfg,
                                            int workers) {
  cfg.validate();
  std::vector<AttackOutcome> out(sentences.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;

  auto work = [&] {
    for (std::size_t i = next++; i < sentences.size(); i = next++) {
      AttackOutcome& slot = out[i];
      slot.index = i;
      try {
        const TokenSeq s = tok.encode(sentences[i]);
        if (s.ids.empty()) {
          slot.skipped = "empty sentence";
          continue;
        }
        if (static_cast<int>(s.size()) > model.config().max_len) {
          slot.skipped = "length " + std::to_string(s.size()) + " exceeds max_len " +
                         std::to_string(model.config().max_len);
          continue;
        }
        const PrunedVocab prune = build_pruned_vocab(tok.vocab(), source_words, s);
        slot.result = run_attack(model, tok, s, prune, cfg, sentence_seed(cfg.seed, i));
      } catch (const NoCandidatesError& e) {
        slot.skipped = e.what();
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = sentences.size();
      }
    }
  };

  const int threads = std::max(1, std::min<int>(workers, static_cast<int>(sentences.size())));
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace nmtadv
