#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "v2c/graph.hpp"
#include "v2c/rng.hpp"

namespace v2c {

enum class CellKind { lstm, gru };

std::string to_string(CellKind kind);
CellKind parse_cell_kind(const std::string& text);

// One weight matrix per gate and per source (input x, previous hidden h),
// named after the gate equations they implement.
struct LstmParams {
  LstmParams() = default;
  LstmParams(const std::string& prefix, std::size_t input_dim, std::size_t hidden_dim);

  std::vector<Parameter*> parameters();

  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Parameter W_xi, W_hi, b_i;  // input gate
  Parameter W_xf, W_hf, b_f;  // forget gate
  Parameter W_xo, W_ho, b_o;  // output gate
  Parameter W_xg, W_hg, b_g;  // candidate cell
};

struct GruParams {
  GruParams() = default;
  GruParams(const std::string& prefix, std::size_t input_dim, std::size_t hidden_dim);

  std::vector<Parameter*> parameters();

  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  Parameter W_xr, W_hr, b_r;  // reset gate
  Parameter W_xz, W_hz, b_z;  // update gate
  Parameter W_xh, W_hh, b_h;  // candidate state
};

using RnnParams = std::variant<LstmParams, GruParams>;

CellKind cell_kind(const RnnParams& p);
std::size_t input_dim(const RnnParams& p);
std::size_t hidden_dim(const RnnParams& p);
std::vector<Parameter*> parameters(RnnParams& p);

// `c` is only meaningful for LSTM state.
struct RnnState {
  Var h;
  Var c;
};

RnnState lstm_cell(Graph& g, Var x, const RnnState& prev, LstmParams& p);
RnnState gru_cell(Graph& g, Var x, const RnnState& prev, GruParams& p);
RnnState cell_step(Graph& g, Var x, const RnnState& prev, RnnParams& p);

// Initial state from fixed tensors; `c0` is ignored for GRU.
RnnState initial_state(Graph& g, const RnnParams& p, const Tensor& h0, const Tensor& c0);
RnnState zero_state(Graph& g, const RnnParams& p);

// Runs the cell over the rows of X [n x d] and returns every hidden state.
std::vector<Var> unroll_states(Graph& g, Var X, RnnParams& p, RnnState initial);
// Same, stacked as [n x h].
Var unroll(Graph& g, Var X, RnnParams& p, RnnState initial);

// Fills every parameter with i.i.d. draws from U[-scale, scale].
void init_uniform(std::span<Parameter* const> params, Rng& rng, double scale = 0.1);

RnnParams init_rnn(CellKind kind, const std::string& prefix, std::size_t input_dim, std::size_t hidden_dim,
                   std::uint64_t seed);

}  // namespace v2c
