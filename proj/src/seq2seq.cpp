#include "nmtadv/models/seq2seq.hpp"

#include "nmtadv/models/forward.hpp"
#include "nmtadv/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <tuple>

namespace nmtadv {

std::string to_string(Architecture arch) { return arch == Architecture::Recurrent ? "recurrent" : "transformer"; }

Architecture parse_architecture(std::string_view name) {
  if (name == "recurrent" || name == "rnn" || name == "blstm") return Architecture::Recurrent;
  if (name == "transformer") return Architecture::Transformer;
  throw InputError("unknown architecture '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
  if (vocab_size <= kNumSpecial) throw InputError("model config: vocab_size must exceed the special tokens");
  if (embed_dim <= 0 || hidden_dim <= 0 || layers <= 0 || max_len <= 0)
    throw InputError("model config: dimensions, layers and max_len must be positive");
  if (arch == Architecture::Recurrent && hidden_dim % 2 != 0)
    throw InputError("model config: recurrent hidden_dim must be even (split across directions)");
  if (arch == Architecture::Transformer && (heads <= 0 || embed_dim % heads != 0))
    throw InputError("model config: heads must divide embed_dim");
}

// -- ParamStore ---------------------------------------------------------------

MatrixF& ParamStore::add(std::string name, MatrixF value) {
  if (contains(name)) throw ContractViolation("duplicate parameter " + name);
  entries_.emplace_back(std::move(name), std::move(value));
  return entries_.back().second;
}

const MatrixF& ParamStore::at(std::string_view name) const {
  for (const auto& [n, m] : entries_)
    if (n == name) return m;
  throw ContractViolation("unknown parameter " + std::string(name));
}

MatrixF& ParamStore::at(std::string_view name) {
  return const_cast<MatrixF&>(static_cast<const ParamStore&>(*this).at(name));
}

bool ParamStore::contains(std::string_view name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == name; });
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += static_cast<std::size_t>(e.second.size());
  return n;
}

bool ParamStore::operator==(const ParamStore& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& [na, a] = entries_[i];
    const auto& [nb, b] = other.entries_[i];
    if (na != nb || a.rows() != b.rows() || a.cols() != b.cols()) return false;
    if (std::memcmp(a.data(), b.data(), sizeof(float) * static_cast<std::size_t>(a.size())) != 0) return false;
  }
  return true;
}

// -- Seq2SeqModel -------------------------------------------------------------

Seq2SeqModel::Seq2SeqModel(ModelConfig config, ParamStore params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  if (!params_.contains("embedding") || embedding().rows() != config_.vocab_size)
    throw FormatError("model parameters: embedding rows must equal vocab_size");
}

namespace {

MatrixF xavier(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  MatrixF m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(rng.uniform(-limit, limit));
  return m;
}

MatrixF zeros(Eigen::Index cols) { return MatrixF::Zero(1, cols); }
MatrixF ones(Eigen::Index cols) { return MatrixF::Ones(1, cols); }

void add_lstm(ParamStore& p, Rng& rng, const std::string& name, int input, int hidden) {
  p.add(name + ".W", xavier(rng, input + hidden, 4 * hidden));
  MatrixF b = zeros(4 * hidden);
  b.middleCols(hidden, hidden).setOnes();  // forget gate starts open
  p.add(name + ".b", std::move(b));
}

void add_layer_norm(ParamStore& p, const std::string& name, int dim) {
  p.add(name + ".g", ones(dim));
  p.add(name + ".b", zeros(dim));
}

void add_attention(ParamStore& p, Rng& rng, const std::string& name, int dim) {
  for (const char* w : {".Wq", ".Wk", ".Wv", ".Wo"}) p.add(name + w, xavier(rng, dim, dim));
}

void add_ffn(ParamStore& p, Rng& rng, const std::string& name, int dim, int width) {
  p.add(name + ".W1", xavier(rng, dim, width));
  p.add(name + ".b1", zeros(width));
  p.add(name + ".W2", xavier(rng, width, dim));
  p.add(name + ".b2", zeros(dim));
}

}  // namespace

Seq2SeqModel Seq2SeqModel::initialize(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  ParamStore p;
  const int v = config.vocab_size;
  const int d = config.embed_dim;
  const int h = config.hidden_dim;
  p.add("embedding", xavier(rng, v, d));
  if (config.arch == Architecture::Recurrent) {
    for (int l = 0; l < config.layers; ++l) {
      const int in = l == 0 ? d : h;
      add_lstm(p, rng, "enc" + std::to_string(l) + ".fwd", in, h / 2);
      add_lstm(p, rng, "enc" + std::to_string(l) + ".bwd", in, h / 2);
    }
    p.add("bridge.W", xavier(rng, h, h));
    p.add("bridge.b", zeros(h));
    add_lstm(p, rng, "dec", d + h, h);
    p.add("attn.W", xavier(rng, h, h));
    p.add("comb.W", xavier(rng, 2 * h, h));
    p.add("comb.b", zeros(h));
    p.add("out.W", xavier(rng, h, v));
    p.add("out.b", zeros(v));
  } else {
    for (int l = 0; l < config.layers; ++l) {
      const std::string base = "enc" + std::to_string(l);
      add_layer_norm(p, base + ".ln1", d);
      add_attention(p, rng, base + ".self", d);
      add_layer_norm(p, base + ".ln2", d);
      add_ffn(p, rng, base + ".ffn", d, h);
    }
    add_layer_norm(p, "enc.ln", d);
    for (int l = 0; l < config.layers; ++l) {
      const std::string base = "dec" + std::to_string(l);
      add_layer_norm(p, base + ".ln1", d);
      add_attention(p, rng, base + ".self", d);
      add_layer_norm(p, base + ".ln2", d);
      add_attention(p, rng, base + ".cross", d);
      add_layer_norm(p, base + ".ln3", d);
      add_ffn(p, rng, base + ".ffn", d, h);
    }
    add_layer_norm(p, "dec.ln", d);
    p.add("out.W", xavier(rng, d, v));
    p.add("out.b", zeros(v));
  }
  return Seq2SeqModel(config, std::move(p));
}

bool Seq2SeqModel::all_finite() const {
  return std::all_of(params_.entries().begin(), params_.entries().end(),
                     [](const auto& e) { return e.second.allFinite(); });
}

// -- InputRepresentation ------------------------------------------------------

InputRepresentation InputRepresentation::one_hot(std::span<const int> ids, int vocab_size) {
  InputRepresentation x;
  x.rows_ = MatrixF::Zero(static_cast<Eigen::Index>(ids.size()), vocab_size);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= vocab_size) throw ContractViolation("token id outside vocabulary");
    x.rows_(static_cast<Eigen::Index>(i), ids[i]) = 1.0f;
  }
  return x;
}

void InputRepresentation::set_distribution(Eigen::Index r, std::span<const int> support,
                                           std::span<const float> probs) {
  if (support.size() != probs.size()) throw ContractViolation("set_distribution: support/probability size mismatch");
  rows_.row(r).setZero();
  for (std::size_t j = 0; j < support.size(); ++j) rows_(r, support[j]) = probs[j];
}

void InputRepresentation::set_token(Eigen::Index r, int id) {
  rows_.row(r).setZero();
  rows_(r, id) = 1.0f;
}

std::vector<std::uint8_t> InputRepresentation::mask() const {
  std::vector<std::uint8_t> m(static_cast<std::size_t>(rows_.rows()));
  for (Eigen::Index r = 0; r < rows_.rows(); ++r) m[static_cast<std::size_t>(r)] = rows_(r, kPadId) < 0.5f ? 1 : 0;
  return m;
}

bool InputRepresentation::valid(double tol) const {
  for (Eigen::Index r = 0; r < rows_.rows(); ++r) {
    double total = 0.0;
    for (Eigen::Index c = 0; c < rows_.cols(); ++c) {
      if (rows_(r, c) < 0.0f) return false;
      total += rows_(r, c);
    }
    if (std::abs(total - 1.0) > tol) return false;
  }
  return true;
}

// -- inference ------------------------------------------------------------------

namespace {

void check_source(const Seq2SeqModel& model, std::span<const int> src) {
  if (src.empty()) throw ContractViolation("empty source sentence");
  if (static_cast<int>(src.size()) > model.config().max_len)
    throw InputError("source length " + std::to_string(src.size()) + " exceeds max_len " +
                     std::to_string(model.config().max_len));
}

std::vector<double> row_log_softmax(const MatrixF& logits, Eigen::Index row) {
  const auto v = logits.cols();
  double mx = -std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < v; ++j) mx = std::max(mx, static_cast<double>(logits(row, j)));
  double total = 0.0;
  for (Eigen::Index j = 0; j < v; ++j) total += std::exp(static_cast<double>(logits(row, j)) - mx);
  const double lse = mx + std::log(total);
  std::vector<double> out(static_cast<std::size_t>(v));
  for (Eigen::Index j = 0; j < v; ++j) out[static_cast<std::size_t>(j)] = static_cast<double>(logits(row, j)) - lse;
  return out;
}

class StepScorer {
 public:
  StepScorer(const Seq2SeqModel& model, std::span<const int> src)
      : source_(detail::one_hot_rows<float>(src, model.vocab_size())), bind_(graph_, model, false) {
    std::vector<std::uint8_t> mask;
    for (int id : src) mask.push_back(id == kPadId ? 0 : 1);
    const Var<float> rows = graph_.reference(source_);
    for (const auto& entry : model.params().entries()) (void)bind_(entry.first);
    encoded_ = detail::encode(bind_, embed(rows, bind_("embedding")), mask);
    mark_ = graph_.size();
  }

  std::vector<double> next(std::span<const int> prefix) {
    std::vector<int> inputs;
    inputs.reserve(prefix.size() + 1);
    inputs.push_back(kBosId);
    inputs.insert(inputs.end(), prefix.begin(), prefix.end());
    std::vector<double> out;
    const Var<float> logits = detail::decode(bind_, encoded_, inputs);
    out = row_log_softmax(logits.value(), logits.rows() - 1);
    graph_.truncate(mark_);
    return out;
  }

 private:
  using Binder = detail::Binder<float>;
  MatrixF source_;
  Graph graph_;
  Binder bind_;
  detail::Encoded<float> encoded_;
  std::size_t mark_ = 0;
};

}  // namespace

std::vector<double> next_token_log_probs(const Seq2SeqModel& model, std::span<const int> src,
                                         std::span<const int> prefix) {
  check_source(model, src);
  StepScorer scorer(model, src);
  return scorer.next(prefix);
}

Translation translate(const Seq2SeqModel& model, std::span<const int> src, int beam_width) {
  if (beam_width < 1) throw ContractViolation("beam width must be at least 1");
  check_source(model, src);
  StepScorer scorer(model, src);
  const int max_len = model.config().max_len;

  struct Hyp {
    std::vector<int> tokens;
    double score;
  };
  struct Candidate {
    double score;
    std::size_t beam;
    int token;
  };
  auto better = [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.beam != b.beam) return a.beam < b.beam;
    return a.token < b.token;
  };

  std::vector<Hyp> live{{{}, 0.0}};
  std::vector<Hyp> finished;
  const auto width = static_cast<std::size_t>(beam_width);
  for (int step = 0; step < max_len && !live.empty(); ++step) {
    std::vector<Candidate> pool;
    for (std::size_t b = 0; b < live.size(); ++b) {
      const std::vector<double> lp = scorer.next(live[b].tokens);
      std::vector<Candidate> local;
      local.reserve(lp.size());
      for (std::size_t tok = 0; tok < lp.size(); ++tok) {
        if (tok == kPadId || tok == kBosId) continue;
        local.push_back({live[b].score + lp[tok], b, static_cast<int>(tok)});
      }
      const std::size_t keep = std::min(width, local.size());
      std::partial_sort(local.begin(), local.begin() + static_cast<std::ptrdiff_t>(keep), local.end(), better);
      pool.insert(pool.end(), local.begin(), local.begin() + static_cast<std::ptrdiff_t>(keep));
    }
    std::sort(pool.begin(), pool.end(), better);
    if (pool.size() > width) pool.resize(width);

    std::vector<Hyp> next;
    for (const auto& c : pool) {
      Hyp h{live[c.beam].tokens, c.score};
      h.tokens.push_back(c.token);
      if (c.token == kEosId || step + 1 == max_len)
        finished.push_back(std::move(h));
      else
        next.push_back(std::move(h));
    }
    live = std::move(next);
    if (!finished.empty() && !live.empty()) {
      // Extensions only lower a score, so nothing live can overtake this.
      double best_finished = -std::numeric_limits<double>::infinity();
      for (const auto& f : finished) best_finished = std::max(best_finished, f.score);
      double best_live = -std::numeric_limits<double>::infinity();
      for (const auto& l : live) best_live = std::max(best_live, l.score);
      if (best_finished >= best_live) break;
    }
  }
  const Hyp* best = nullptr;
  for (const auto& f : finished)
    if (best == nullptr || f.score > best->score) best = &f;
  Translation t;
  t.ids = best->tokens;
  t.log_prob = best->score;
  t.beam_width = beam_width;
  return t;
}

// -- losses and gradients ---------------------------------------------------------

double nll_loss(const Seq2SeqModel& model, const InputRepresentation& input, std::span<const int> target) {
  if (target.empty()) throw ContractViolation("nll_loss: empty target");
  Graph g;
  detail::Binder<float> bind(g, model, false);
  const auto mask = input.mask();
  const auto lg = detail::build_loss(bind, g.reference(input.rows()), mask, target);
  return static_cast<double>(lg.loss.value()(0, 0));
}

LossGradients loss_and_gradients(const Seq2SeqModel& model, const InputRepresentation& input,
                                 std::span<const int> target) {
  if (target.empty()) throw ContractViolation("loss_and_gradients: empty target");
  Graph g;
  detail::Binder<float> bind(g, model, false);
  const auto mask = input.mask();
  const auto lg = detail::build_loss(bind, g.reference(input.rows(), true), mask, target);
  g.backward(lg.loss);
  return {static_cast<double>(lg.loss.value()(0, 0)), g.grad(lg.embedded), g.grad(lg.input)};
}

MatrixF embedding_gradients(const Seq2SeqModel& model, const InputRepresentation& input,
                            std::span<const int> target) {
  return loss_and_gradients(model, input, target).embedded;
}

MatrixF onehot_gradients(const Seq2SeqModel& model, const InputRepresentation& input,
                         std::span<const int> target) {
  return loss_and_gradients(model, input, target).input;
}

RelaxedLoss relaxed_loss(const Seq2SeqModel& model, const InputRepresentation& input, Eigen::Index r,
                         std::span<const int> support, std::span<const int> target) {
  const MatrixF& rows = input.rows();
  if (r < 0 || r >= rows.rows()) throw ContractViolation("relaxed_loss: row out of range");
  double total = 0.0;
  for (Eigen::Index c = 0; c < rows.cols(); ++c) {
    if (rows(r, c) < 0.0f) throw ContractViolation("relaxed_loss: negative probability");
    total += rows(r, c);
  }
  if (std::abs(total - 1.0) > 1e-6) throw ContractViolation("relaxed_loss: distribution row does not sum to 1");
  const auto grads = loss_and_gradients(model, input, target);
  RelaxedLoss out;
  out.loss = grads.loss;
  out.grad.reserve(support.size());
  for (int j : support) out.grad.push_back(grads.input(r, j));
  return out;
}

}  // namespace nmtadv
