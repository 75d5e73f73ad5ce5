#pragma once

// Graph construction for both architectures, templated on the graph scalar so
// the same code runs in float (production) and double (gradient checking).

#include "nmtadv/models/seq2seq.hpp"
#include "nmtadv/tokenizer.hpp"

#include <cmath>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace nmtadv::detail {

inline constexpr double kMaskedScore = -1e9;

/// Binds model parameters into a graph on first use.
template <typename S>
class Binder {
 public:
  Binder(BasicGraph<S>& graph, const Seq2SeqModel& model, bool trainable)
      : graph_(graph), model_(model), trainable_(trainable) {}

  Var<S> operator()(const std::string& name) {
    if (auto it = bound_.find(name); it != bound_.end()) return it->second;
    const MatrixF& p = model_.params().at(name);
    Var<S> v;
    if constexpr (std::is_same_v<S, float>) {
      v = graph_.reference(p, trainable_);
    } else {
      v = graph_.input(p.template cast<S>(), trainable_);
    }
    bound_.emplace(name, v);
    return v;
  }

  [[nodiscard]] const std::unordered_map<std::string, Var<S>>& bound() const { return bound_; }
  BasicGraph<S>& graph() { return graph_; }
  const Seq2SeqModel& model() const { return model_; }
  const ModelConfig& config() const { return model_.config(); }

 private:
  BasicGraph<S>& graph_;
  const Seq2SeqModel& model_;
  bool trainable_;
  std::unordered_map<std::string, Var<S>> bound_;
};

template <typename S>
Matrix<S> one_hot_rows(std::span<const int> ids, int vocab) {
  Matrix<S> m = Matrix<S>::Zero(static_cast<Eigen::Index>(ids.size()), vocab);
  for (std::size_t i = 0; i < ids.size(); ++i) m(static_cast<Eigen::Index>(i), ids[i]) = S(1);
  return m;
}

/// Additive attention bias: row i, col j is masked when key j is padding or,
/// for causal masks, j > i.
template <typename S>
Matrix<S> attention_bias(Eigen::Index queries, std::span<const std::uint8_t> key_mask, bool causal) {
  const auto keys = static_cast<Eigen::Index>(key_mask.size());
  Matrix<S> bias = Matrix<S>::Zero(queries, keys);
  for (Eigen::Index i = 0; i < queries; ++i)
    for (Eigen::Index j = 0; j < keys; ++j)
      if (!key_mask[static_cast<std::size_t>(j)] || (causal && j > i)) bias(i, j) = static_cast<S>(kMaskedScore);
  return bias;
}

template <typename S>
Matrix<S> positional_encoding(Eigen::Index rows, Eigen::Index dim) {
  Matrix<S> pe(rows, dim);
  for (Eigen::Index pos = 0; pos < rows; ++pos) {
    for (Eigen::Index i = 0; i < dim; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
      const double angle = static_cast<double>(pos) * freq;
      pe(pos, i) = static_cast<S>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  return pe;
}

template <typename S>
struct Encoded {
  Var<S> states;                      // n x H (recurrent) or n x d (transformer)
  std::vector<std::uint8_t> mask;     // per source position
  Var<S> init_hidden;                 // recurrent decoder start state
};

// -- recurrent ----------------------------------------------------------------

template <typename S>
struct LstmState {
  Var<S> h;
  Var<S> c;
};

// Gates in column blocks [input, forget, candidate, output]:
//   i = sigm(z_i), f = sigm(z_f), g = tanh(z_g), o = sigm(z_o)
//   c' = f*c + i*g,  h' = o*tanh(c')
template <typename S>
LstmState<S> lstm_step(Binder<S>& bind, const std::string& prefix, Var<S> x, const LstmState<S>& prev) {
  const Eigen::Index h = prev.h.cols();
  Var<S> z = matmul(bind.graph().concat_cols({x, prev.h}), bind(prefix + ".W")) + bind(prefix + ".b");
  Var<S> i = sigmoid(slice_cols(z, 0, h));
  Var<S> f = sigmoid(slice_cols(z, h, h));
  Var<S> g = tanh(slice_cols(z, 2 * h, h));
  Var<S> o = sigmoid(slice_cols(z, 3 * h, h));
  Var<S> c = f * prev.c + i * g;
  return {o * tanh(c), c};
}

template <typename S>
Encoded<S> encode_recurrent(Binder<S>& bind, Var<S> embedded, std::span<const std::uint8_t> mask) {
  auto& g = bind.graph();
  const ModelConfig& cfg = bind.config();
  const int half = cfg.hidden_dim / 2;
  const auto n = static_cast<Eigen::Index>(mask.size());
  const Var<S> zero = g.input(Matrix<S>::Zero(1, half));

  Var<S> layer_in = embedded;
  Var<S> fwd_last = zero;
  Var<S> bwd_first = zero;
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string base = "enc" + std::to_string(l);
    std::vector<Var<S>> fwd(static_cast<std::size_t>(n), zero);
    std::vector<Var<S>> bwd(static_cast<std::size_t>(n), zero);
    LstmState<S> state{zero, zero};
    for (Eigen::Index t = 0; t < n; ++t) {
      if (!mask[static_cast<std::size_t>(t)]) continue;
      state = lstm_step(bind, base + ".fwd", slice_rows(layer_in, t, 1), state);
      fwd[static_cast<std::size_t>(t)] = state.h;
    }
    fwd_last = state.h;
    state = {zero, zero};
    for (Eigen::Index t = n - 1; t >= 0; --t) {
      if (!mask[static_cast<std::size_t>(t)]) continue;
      state = lstm_step(bind, base + ".bwd", slice_rows(layer_in, t, 1), state);
      bwd[static_cast<std::size_t>(t)] = state.h;
    }
    bwd_first = state.h;
    std::vector<Var<S>> rows;
    rows.reserve(static_cast<std::size_t>(n));
    for (std::size_t t = 0; t < static_cast<std::size_t>(n); ++t) rows.push_back(g.concat_cols({fwd[t], bwd[t]}));
    layer_in = g.concat_rows(rows);
  }
  Encoded<S> out;
  out.states = layer_in;
  out.mask.assign(mask.begin(), mask.end());
  out.init_hidden = tanh(matmul(g.concat_cols({fwd_last, bwd_first}), bind("bridge.W")) + bind("bridge.b"));
  return out;
}

/// Luong "general" attention with input feeding:
///   a_t = softmax(h_t W_a H^T),  c_t = a_t H,  h~_t = tanh([c_t, h_t] W_c + b_c)
template <typename S>
Var<S> decode_recurrent(Binder<S>& bind, const Encoded<S>& enc, Var<S> target_embedded) {
  auto& g = bind.graph();
  const int hidden = bind.config().hidden_dim;
  const Eigen::Index steps = target_embedded.rows();
  const Var<S> bias = g.input(attention_bias<S>(1, enc.mask, false));
  const Var<S> zero = g.input(Matrix<S>::Zero(1, hidden));

  LstmState<S> state{enc.init_hidden, zero};
  Var<S> feed = zero;
  std::vector<Var<S>> outputs;
  outputs.reserve(static_cast<std::size_t>(steps));
  for (Eigen::Index t = 0; t < steps; ++t) {
    state = lstm_step(bind, "dec", g.concat_cols({slice_rows(target_embedded, t, 1), feed}), state);
    Var<S> scores = matmul_transposed(matmul(state.h, bind("attn.W")), enc.states) + bias;
    Var<S> context = matmul(softmax(scores), enc.states);
    feed = tanh(matmul(g.concat_cols({context, state.h}), bind("comb.W")) + bind("comb.b"));
    outputs.push_back(feed);
  }
  return matmul(g.concat_rows(outputs), bind("out.W")) + bind("out.b");
}

// -- transformer --------------------------------------------------------------

template <typename S>
Var<S> layer_norm_affine(Binder<S>& bind, const std::string& name, Var<S> x) {
  return layer_norm(x) * bind(name + ".g") + bind(name + ".b");
}

template <typename S>
Var<S> multi_head_attention(Binder<S>& bind, const std::string& name, Var<S> queries, Var<S> keys_values,
                            Var<S> bias) {
  auto& g = bind.graph();
  const int heads = bind.config().heads;
  const Eigen::Index dh = queries.cols() / heads;
  const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));
  Var<S> q = matmul(queries, bind(name + ".Wq"));
  Var<S> k = matmul(keys_values, bind(name + ".Wk"));
  Var<S> v = matmul(keys_values, bind(name + ".Wv"));
  std::vector<Var<S>> parts;
  parts.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    Var<S> qh = slice_cols(q, h * dh, dh);
    Var<S> kh = slice_cols(k, h * dh, dh);
    Var<S> vh = slice_cols(v, h * dh, dh);
    Var<S> weights = softmax(matmul_transposed(qh, kh) * scale + bias);
    parts.push_back(matmul(weights, vh));
  }
  return matmul(heads == 1 ? parts[0] : g.concat_cols(parts), bind(name + ".Wo"));
}

template <typename S>
Var<S> feed_forward(Binder<S>& bind, const std::string& name, Var<S> x) {
  return matmul(relu(matmul(x, bind(name + ".W1")) + bind(name + ".b1")), bind(name + ".W2")) + bind(name + ".b2");
}

// Pre-norm blocks: x + Attn(LN(x)), then x + FFN(LN(x)).
template <typename S>
Encoded<S> encode_transformer(Binder<S>& bind, Var<S> embedded, std::span<const std::uint8_t> mask) {
  auto& g = bind.graph();
  const ModelConfig& cfg = bind.config();
  const auto n = embedded.rows();
  Var<S> x = embedded + g.input(positional_encoding<S>(n, cfg.embed_dim));
  const Var<S> bias = g.input(attention_bias<S>(n, mask, false));
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string base = "enc" + std::to_string(l);
    Var<S> normed = layer_norm_affine(bind, base + ".ln1", x);
    x = x + multi_head_attention(bind, base + ".self", normed, normed, bias);
    x = x + feed_forward(bind, base + ".ffn", layer_norm_affine(bind, base + ".ln2", x));
  }
  Encoded<S> out;
  out.states = layer_norm_affine(bind, "enc.ln", x);
  out.mask.assign(mask.begin(), mask.end());
  return out;
}

template <typename S>
Var<S> decode_transformer(Binder<S>& bind, const Encoded<S>& enc, Var<S> target_embedded) {
  auto& g = bind.graph();
  const ModelConfig& cfg = bind.config();
  const auto m = target_embedded.rows();
  Var<S> x = target_embedded + g.input(positional_encoding<S>(m, cfg.embed_dim));
  const std::vector<std::uint8_t> all(static_cast<std::size_t>(m), 1);
  const Var<S> causal = g.input(attention_bias<S>(m, all, true));
  const Var<S> cross = g.input(attention_bias<S>(m, enc.mask, false));
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string base = "dec" + std::to_string(l);
    Var<S> normed = layer_norm_affine(bind, base + ".ln1", x);
    x = x + multi_head_attention(bind, base + ".self", normed, normed, causal);
    x = x + multi_head_attention(bind, base + ".cross", layer_norm_affine(bind, base + ".ln2", x), enc.states, cross);
    x = x + feed_forward(bind, base + ".ffn", layer_norm_affine(bind, base + ".ln3", x));
  }
  return matmul(layer_norm_affine(bind, "dec.ln", x), bind("out.W")) + bind("out.b");
}

// -- shared -------------------------------------------------------------------

template <typename S>
Encoded<S> encode(Binder<S>& bind, Var<S> embedded, std::span<const std::uint8_t> mask) {
  return bind.config().arch == Architecture::Recurrent ? encode_recurrent(bind, embedded, mask)
                                                       : encode_transformer(bind, embedded, mask);
}

/// Logits (rows = inputs.size()) for decoder inputs BOS, t_1, ..., t_{k-1}.
template <typename S>
Var<S> decode(Binder<S>& bind, const Encoded<S>& enc, std::span<const int> inputs) {
  auto& g = bind.graph();
  Var<S> onehot = g.input(one_hot_rows<S>(inputs, bind.config().vocab_size));
  Var<S> embedded = embed(onehot, bind("embedding"));
  return bind.config().arch == Architecture::Recurrent ? decode_recurrent(bind, enc, embedded)
                                                       : decode_transformer(bind, enc, embedded);
}

inline std::vector<int> teacher_inputs(std::span<const int> target) {
  std::vector<int> in;
  in.reserve(target.size());
  in.push_back(kBosId);
  for (std::size_t i = 0; i + 1 < target.size(); ++i) in.push_back(target[i]);
  return in;
}

template <typename S>
struct LossGraph {
  Var<S> input;     // n x |V| source rows
  Var<S> embedded;  // n x d
  Var<S> loss;      // 1 x 1
};

/// Teacher-forced sequence NLL given already embedded source rows.
template <typename S>
Var<S> sequence_loss(Binder<S>& bind, Var<S> embedded, std::span<const std::uint8_t> mask,
                     std::span<const int> target) {
  const Encoded<S> enc = encode(bind, embedded, mask);
  const std::vector<int> inputs = teacher_inputs(target);
  Var<S> logp = log_softmax(decode(bind, enc, inputs));
  return -sum(gather(logp, target));
}

template <typename S>
LossGraph<S> build_loss(Binder<S>& bind, Var<S> source_rows, std::span<const std::uint8_t> mask,
                        std::span<const int> target) {
  LossGraph<S> out;
  out.input = source_rows;
  out.embedded = embed(source_rows, bind("embedding"));
  out.loss = sequence_loss(bind, out.embedded, mask, target);
  return out;
}

}  // namespace nmtadv::detail
