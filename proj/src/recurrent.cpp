#include "v2c/recurrent.hpp"

#include "v2c/error.hpp"
#include "v2c/ops.hpp"

namespace v2c {

std::string to_string(CellKind kind) { return kind == CellKind::lstm ? "lstm" : "gru"; }

CellKind parse_cell_kind(const std::string& text) {
  if (text == "lstm") return CellKind::lstm;
  if (text == "gru") return CellKind::gru;
  throw ValidationError("unknown cell kind '" + text + "' (expected lstm or gru)");
}

namespace {

void check_dims(std::size_t input_dim, std::size_t hidden_dim) {
  if (input_dim == 0 || hidden_dim == 0) throw ValidationError("recurrent cell dimensions must be positive");
}

}  // namespace

LstmParams::LstmParams(const std::string& prefix, std::size_t d, std::size_t h) : input_dim(d), hidden_dim(h) {
  check_dims(d, h);
  W_xi = Parameter(prefix + ".W_xi", {h, d});
  W_hi = Parameter(prefix + ".W_hi", {h, h});
  b_i = Parameter(prefix + ".b_i", {h});
  W_xf = Parameter(prefix + ".W_xf", {h, d});
  W_hf = Parameter(prefix + ".W_hf", {h, h});
  b_f = Parameter(prefix + ".b_f", {h});
  W_xo = Parameter(prefix + ".W_xo", {h, d});
  W_ho = Parameter(prefix + ".W_ho", {h, h});
  b_o = Parameter(prefix + ".b_o", {h});
  W_xg = Parameter(prefix + ".W_xg", {h, d});
  W_hg = Parameter(prefix + ".W_hg", {h, h});
  b_g = Parameter(prefix + ".b_g", {h});
}

std::vector<Parameter*> LstmParams::parameters() {
  return {&W_xi, &W_hi, &b_i, &W_xf, &W_hf, &b_f, &W_xo, &W_ho, &b_o, &W_xg, &W_hg, &b_g};
}

GruParams::GruParams(const std::string& prefix, std::size_t d, std::size_t h) : input_dim(d), hidden_dim(h) {
  check_dims(d, h);
  W_xr = Parameter(prefix + ".W_xr", {h, d});
  W_hr = Parameter(prefix + ".W_hr", {h, h});
  b_r = Parameter(prefix + ".b_r", {h});
  W_xz = Parameter(prefix + ".W_xz", {h, d});
  W_hz = Parameter(prefix + ".W_hz", {h, h});
  b_z = Parameter(prefix + ".b_z", {h});
  W_xh = Parameter(prefix + ".W_xh", {h, d});
  W_hh = Parameter(prefix + ".W_hh", {h, h});
  b_h = Parameter(prefix + ".b_h", {h});
}

std::vector<Parameter*> GruParams::parameters() {
  return {&W_xr, &W_hr, &b_r, &W_xz, &W_hz, &b_z, &W_xh, &W_hh, &b_h};
}

CellKind cell_kind(const RnnParams& p) {
  return std::holds_alternative<LstmParams>(p) ? CellKind::lstm : CellKind::gru;
}

std::size_t input_dim(const RnnParams& p) {
  return std::visit([](const auto& q) { return q.input_dim; }, p);
}

std::size_t hidden_dim(const RnnParams& p) {
  return std::visit([](const auto& q) { return q.hidden_dim; }, p);
}

std::vector<Parameter*> parameters(RnnParams& p) {
  return std::visit([](auto& q) { return q.parameters(); }, p);
}

RnnState lstm_cell(Graph& g, Var x, const RnnState& prev, LstmParams& p) {
  auto gate = [&](Parameter& Wx, Parameter& Wh, Parameter& b) {
    return ops::gate(g, g.param(Wx), x, g.param(Wh), prev.h, g.param(b));
  };
  const Var i = ops::sigmoid(g, gate(p.W_xi, p.W_hi, p.b_i));
  const Var f = ops::sigmoid(g, gate(p.W_xf, p.W_hf, p.b_f));
  const Var o = ops::sigmoid(g, gate(p.W_xo, p.W_ho, p.b_o));
  const Var cand = ops::tanh_act(g, gate(p.W_xg, p.W_hg, p.b_g));
  const Var c = ops::add(g, ops::mul(g, f, prev.c), ops::mul(g, i, cand));
  const Var h = ops::mul(g, o, ops::tanh_act(g, c));
  return {h, c};
}

RnnState gru_cell(Graph& g, Var x, const RnnState& prev, GruParams& p) {
  const Var r = ops::sigmoid(g, ops::gate(g, g.param(p.W_xr), x, g.param(p.W_hr), prev.h, g.param(p.b_r)));
  const Var z = ops::sigmoid(g, ops::gate(g, g.param(p.W_xz), x, g.param(p.W_hz), prev.h, g.param(p.b_z)));
  const Var reset_h = ops::mul(g, r, prev.h);
  const Var cand = ops::tanh_act(g, ops::gate(g, g.param(p.W_xh), x, g.param(p.W_hh), reset_h, g.param(p.b_h)));
  const Var h = ops::add(g, ops::mul(g, z, prev.h), ops::mul(g, ops::one_minus(g, z), cand));
  return {h, Var{}};
}

RnnState cell_step(Graph& g, Var x, const RnnState& prev, RnnParams& p) {
  if (auto* lstm = std::get_if<LstmParams>(&p)) return lstm_cell(g, x, prev, *lstm);
  return gru_cell(g, x, prev, std::get<GruParams>(p));
}

RnnState initial_state(Graph& g, const RnnParams& p, const Tensor& h0, const Tensor& c0) {
  const Shape expect{hidden_dim(p)};
  if (h0.shape() != expect) throw DimensionError("initial hidden state has shape " + shape_string(h0.shape()));
  RnnState s{g.constant(h0), Var{}};
  if (cell_kind(p) == CellKind::lstm) {
    if (c0.shape() != expect) throw DimensionError("initial cell state has shape " + shape_string(c0.shape()));
    s.c = g.constant(c0);
  }
  return s;
}

RnnState zero_state(Graph& g, const RnnParams& p) {
  const Tensor zeros({hidden_dim(p)});
  return initial_state(g, p, zeros, zeros);
}

std::vector<Var> unroll_states(Graph& g, Var X, RnnParams& p, RnnState initial) {
  const Tensor& xv = g.value(X);
  if (xv.rank() != 2 || xv.dim(0) == 0) throw EmptySequenceError("unroll: input must be a non-empty [n x d] sequence");
  const std::size_t n = xv.dim(0);
  std::vector<Var> hidden;
  hidden.reserve(n);
  RnnState state = initial;
  for (std::size_t t = 0; t < n; ++t) {
    state = cell_step(g, ops::row(g, X, t), state, p);
    hidden.push_back(state.h);
  }
  return hidden;
}

Var unroll(Graph& g, Var X, RnnParams& p, RnnState initial) {
  const auto hidden = unroll_states(g, X, p, initial);
  return ops::stack_rows(g, hidden);
}

void init_uniform(std::span<Parameter* const> params, Rng& rng, double scale) {
  for (auto* p : params) {
    for (auto& w : p->value.values()) w = rng.uniform(-scale, scale);
    p->zero_grad();
  }
}

RnnParams init_rnn(CellKind kind, const std::string& prefix, std::size_t input_dim, std::size_t hidden_dim,
                   std::uint64_t seed) {
  RnnParams p = kind == CellKind::lstm ? RnnParams(LstmParams(prefix, input_dim, hidden_dim))
                                       : RnnParams(GruParams(prefix, input_dim, hidden_dim));
  Rng rng(seed);
  init_uniform(parameters(p), rng);
  return p;
}

}  // namespace v2c
