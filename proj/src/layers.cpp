#include "sentcomp/layers.hpp"

#include <stdexcept>

namespace sentcomp::nn {

using namespace sentcomp::ad;

Tensor uniform_init(std::vector<int> shape, std::mt19937_64& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  std::uniform_real_distribution<real> dist(-0.08, 0.08);
  for (auto& e : t.v) e = dist(rng);
  return t;
}

Var dropout(const Var& x, real rate, std::mt19937_64* rng) {
  if (!rng || rate <= 0) return x;
  if (rate >= 1) throw std::invalid_argument("dropout: rate must be below 1");
  Tensor mask = Tensor::zeros(x.shape());
  std::bernoulli_distribution keep(1 - rate);
  real inv = real(1) / (real(1) - rate);
  for (auto& e : mask.v) e = keep(*rng) ? inv : real(0);
  return mul(x, Var::constant(std::move(mask)));
}

LstmCell::LstmCell(const std::string& name, int input_dim, int hidden_dim, std::mt19937_64& rng)
    : input_dim(input_dim), hidden_dim(hidden_dim) {
  w_x = {name + ".w_x", make_param(uniform_init({4 * hidden_dim, input_dim}, rng))};
  w_h = {name + ".w_h", make_param(uniform_init({4 * hidden_dim, hidden_dim}, rng))};
  Tensor bias = Tensor::zeros({4 * hidden_dim});
  for (int i = hidden_dim; i < 2 * hidden_dim; ++i) bias.at(i) = 1;  // forget gate
  b = {name + ".b", make_param(std::move(bias))};
}

std::pair<Var, Var> LstmCell::step(const Var& h_prev, const Var& c_prev, const Var& x) const {
  if (x.shape() != std::vector<int>{input_dim} || h_prev.shape() != std::vector<int>{hidden_dim} ||
      c_prev.shape() != std::vector<int>{hidden_dim})
    throw std::invalid_argument("lstm_step: state/input shapes do not match cell dims " +
                                std::to_string(input_dim) + "/" + std::to_string(hidden_dim));
  Var pre = add(add(matmul(w_x.var, x), matmul(w_h.var, h_prev)), b.var);
  Var i = sigmoid(slice(pre, 0, hidden_dim));
  Var f = sigmoid(slice(pre, hidden_dim, hidden_dim));
  Var o = sigmoid(slice(pre, 2 * hidden_dim, hidden_dim));
  Var g = ad::tanh(slice(pre, 3 * hidden_dim, hidden_dim));
  Var c_next = add(mul(f, c_prev), mul(i, g));
  Var h_next = mul(o, ad::tanh(c_next));
  return {h_next, c_next};
}

RnnCell::RnnCell(const std::string& name, int input_dim, int hidden_dim, std::mt19937_64& rng)
    : input_dim(input_dim), hidden_dim(hidden_dim) {
  w_x = {name + ".w_x", make_param(uniform_init({hidden_dim, input_dim}, rng))};
  w_h = {name + ".w_h", make_param(uniform_init({hidden_dim, hidden_dim}, rng))};
  b = {name + ".b", make_param(Tensor::zeros({hidden_dim}))};
}

Var RnnCell::step(const Var& h_prev, const Var& x) const {
  if (x.shape() != std::vector<int>{input_dim} || h_prev.shape() != std::vector<int>{hidden_dim})
    throw std::invalid_argument("rnn_step: state/input shapes do not match cell dims " +
                                std::to_string(input_dim) + "/" + std::to_string(hidden_dim));
  return ad::tanh(add(add(matmul(w_x.var, x), matmul(w_h.var, h_prev)), b.var));
}

StackedRnn::StackedRnn(const std::string& name, CellKind kind, int layers, int input_dim,
                       int hidden_dim, bool skip_connections, real dropout_rate,
                       std::mt19937_64& rng)
    : kind(kind),
      input_dim(input_dim),
      hidden_dim(hidden_dim),
      skip_connections(skip_connections),
      dropout_rate(dropout_rate) {
  if (layers < 1) throw std::invalid_argument("StackedRnn: needs at least one layer");
  for (int l = 0; l < layers; ++l) {
    int in = l == 0 ? input_dim : (skip_connections ? hidden_dim + input_dim : hidden_dim);
    std::string cell_name = name + ".l" + std::to_string(l);
    if (kind == CellKind::lstm)
      lstm_cells.emplace_back(cell_name, in, hidden_dim, rng);
    else
      rnn_cells.emplace_back(cell_name, in, hidden_dim, rng);
  }
}

StackedRnn::State StackedRnn::initial_state() const {
  State s;
  for (int l = 0; l < layers(); ++l) {
    s.h.push_back(Var::constant(Tensor::zeros({hidden_dim})));
    if (kind == CellKind::lstm) s.c.push_back(Var::constant(Tensor::zeros({hidden_dim})));
  }
  return s;
}

StackedRnn::State StackedRnn::step(const State& prev, const Var& x,
                                   std::mt19937_64* dropout_rng) const {
  if (static_cast<int>(prev.h.size()) != layers())
    throw std::invalid_argument("StackedRnn::step: state has " + std::to_string(prev.h.size()) +
                                " layers, stack has " + std::to_string(layers()));
  State next;
  Var below = x;
  for (int l = 0; l < layers(); ++l) {
    Var in = l == 0 ? below : (skip_connections ? concat({below, x}) : below);
    in = dropout(in, dropout_rate, dropout_rng);
    if (kind == CellKind::lstm) {
      auto [h, c] = lstm_cells[l].step(prev.h[l], prev.c[l], in);
      next.h.push_back(h);
      next.c.push_back(c);
      below = h;
    } else {
      Var h = rnn_cells[l].step(prev.h[l], in);
      next.h.push_back(h);
      below = h;
    }
  }
  return next;
}

std::vector<Parameter> StackedRnn::params() const {
  std::vector<Parameter> out;
  for (const auto& c : lstm_cells)
    for (const auto& p : c.params()) out.push_back(p);
  for (const auto& c : rnn_cells)
    for (const auto& p : c.params()) out.push_back(p);
  return out;
}

Embedding::Embedding(const std::string& name, int vocab_size, int dim, std::mt19937_64& rng)
    : vocab_size(vocab_size), dim(dim) {
  table = {name + ".table", make_param(uniform_init({vocab_size, dim}, rng))};
}

Var Embedding::operator()(int id) const { return lookup(table.var, id); }

Mlp::Mlp(const std::string& name, const std::vector<int>& dims, std::mt19937_64& rng) {
  if (dims.size() < 2) throw std::invalid_argument("Mlp: needs at least input and output dims");
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    std::string ln = name + ".l" + std::to_string(l);
    weights.push_back({ln + ".w", make_param(uniform_init({dims[l + 1], dims[l]}, rng))});
    biases.push_back({ln + ".b", make_param(Tensor::zeros({dims[l + 1]}))});
  }
}

Var Mlp::forward(const Var& x) const {
  Var h = x;
  for (size_t l = 0; l < weights.size(); ++l) {
    h = add(matmul(weights[l].var, h), biases[l].var);
    if (l + 1 < weights.size()) h = ad::tanh(h);
  }
  return h;
}

std::vector<Parameter> Mlp::params() const {
  std::vector<Parameter> out;
  for (size_t l = 0; l < weights.size(); ++l) {
    out.push_back(weights[l]);
    out.push_back(biases[l]);
  }
  return out;
}

std::vector<Var> encode_bidirectional(const StackedRnn& fwd, const StackedRnn& bwd,
                                      const std::vector<Var>& embeddings,
                                      std::mt19937_64* dropout_rng) {
  if (embeddings.empty()) throw std::invalid_argument("encode_bidirectional: empty sequence");
  int n = static_cast<int>(embeddings.size());
  std::vector<Var> fh(n), bh(n);
  StackedRnn::State s = fwd.initial_state();
  for (int i = 0; i < n; ++i) {
    s = fwd.step(s, embeddings[i], dropout_rng);
    fh[i] = fwd.output(s);
  }
  s = bwd.initial_state();
  for (int i = n - 1; i >= 0; --i) {
    s = bwd.step(s, embeddings[i], dropout_rng);
    bh[i] = bwd.output(s);
  }
  std::vector<Var> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(concat({fh[i], bh[i]}));
  return out;
}

}  // namespace sentcomp::nn
