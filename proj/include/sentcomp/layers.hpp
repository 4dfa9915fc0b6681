#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sentcomp/autodiff.hpp"

namespace sentcomp::nn {

using ad::Parameter;
using ad::Var;

// All weight matrices start uniform in [-0.08, 0.08]; biases start at zero
// (the LSTM forget gate is then bumped to 1 so memory survives early steps).
Tensor uniform_init(std::vector<int> shape, std::mt19937_64& rng);

// Inverted dropout: keep with prob 1-rate and rescale by 1/(1-rate) so the
// eval-mode forward needs no correction. Identity when rng is null.
Var dropout(const Var& x, real rate, std::mt19937_64* rng);

struct LstmCell {
  int input_dim = 0;
  int hidden_dim = 0;
  Parameter w_x;  // [4H, E], gate order i, f, o, g
  Parameter w_h;  // [4H, H]
  Parameter b;    // [4H]

  LstmCell() = default;
  LstmCell(const std::string& name, int input_dim, int hidden_dim, std::mt19937_64& rng);

  // (h, c) -> (h', c'); shapes checked against hidden_dim/input_dim.
  std::pair<Var, Var> step(const Var& h_prev, const Var& c_prev, const Var& x) const;
  std::vector<Parameter> params() const { return {w_x, w_h, b}; }
};

struct RnnCell {
  int input_dim = 0;
  int hidden_dim = 0;
  Parameter w_x;  // [H, E]
  Parameter w_h;  // [H, H]
  Parameter b;    // [H]

  RnnCell() = default;
  RnnCell(const std::string& name, int input_dim, int hidden_dim, std::mt19937_64& rng);

  Var step(const Var& h_prev, const Var& x) const;
  std::vector<Parameter> params() const { return {w_x, w_h, b}; }
};

enum class CellKind { lstm, vanilla };

// Multi-layer recurrence. With skip connections every layer above the first
// consumes concat(below output, original input), so internal inputs have
// dimension H + input_dim. Dropout hits only these non-recurrent inputs.
struct StackedRnn {
  CellKind kind = CellKind::lstm;
  int input_dim = 0;
  int hidden_dim = 0;
  bool skip_connections = false;
  real dropout_rate = 0;
  std::vector<LstmCell> lstm_cells;
  std::vector<RnnCell> rnn_cells;

  struct State {
    std::vector<Var> h;
    std::vector<Var> c;  // unused for vanilla cells
  };

  StackedRnn() = default;
  StackedRnn(const std::string& name, CellKind kind, int layers, int input_dim, int hidden_dim,
             bool skip_connections, real dropout_rate, std::mt19937_64& rng);

  int layers() const {
    return static_cast<int>(kind == CellKind::lstm ? lstm_cells.size() : rnn_cells.size());
  }
  State initial_state() const;  // all-zero constant state
  // dropout_rng null → eval mode (deterministic).
  State step(const State& prev, const Var& x, std::mt19937_64* dropout_rng = nullptr) const;
  const Var& output(const State& s) const { return s.h.back(); }
  std::vector<Parameter> params() const;
};

struct Embedding {
  int vocab_size = 0;
  int dim = 0;
  Parameter table;  // [V, D]

  Embedding() = default;
  Embedding(const std::string& name, int vocab_size, int dim, std::mt19937_64& rng);

  Var operator()(int id) const;  // out-of-range id is a hard error
  std::vector<Parameter> params() const { return {table}; }
};

struct Mlp {
  std::vector<Parameter> weights;  // [out, in] per layer
  std::vector<Parameter> biases;   // [out] per layer

  Mlp() = default;
  // dims = {in, hidden..., out}; tanh between layers, linear final output.
  Mlp(const std::string& name, const std::vector<int>& dims, std::mt19937_64& rng);

  Var forward(const Var& x) const;
  std::vector<Parameter> params() const;
};

// h^e_i = forward-state_i ++ backward-state_i over the whole sequence; each
// output has dimension 2*hidden_dim.
std::vector<Var> encode_bidirectional(const StackedRnn& fwd, const StackedRnn& bwd,
                                      const std::vector<Var>& embeddings,
                                      std::mt19937_64* dropout_rng = nullptr);

}  // namespace sentcomp::nn
