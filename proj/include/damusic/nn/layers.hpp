#pragma once

#include <cmath>
#include <string>

#include "damusic/nn/param_store.hpp"
#include "damusic/nn/tape.hpp"
#include "damusic/rng.hpp"

namespace damusic::nn {

/// Glorot/Xavier uniform: U[-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))].
inline RealVector glorot_init(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  if (fan_in < 1 || fan_out < 1) throw InvalidInputError("glorot_init: fans must be >= 1");
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  RealVector out(fan_in * fan_out);
  for (auto& w : out) w = rng.uniform(-bound, bound);
  return out;
}

/// y = act(W x + b), W stored row-major (out x in).
struct DenseLayer {
  ParamId weight = 0;
  ParamId bias = 0;
  std::size_t in = 0;
  std::size_t out = 0;
  Activation activation = Activation::identity;

  static DenseLayer create(ParamStore& store, const std::string& name, std::size_t in, std::size_t out,
                           Activation act, Rng& rng) {
    DenseLayer layer;
    layer.in = in;
    layer.out = out;
    layer.activation = act;
    layer.weight = store.add(name + ".W", {out, in}, glorot_init(in, out, rng));
    layer.bias = store.add(name + ".b", {out}, RealVector(out, 0.0));
    return layer;
  }

  Var forward(Tape& tape, ParamStore& store, Var x) const {
    if (tape.value(x).size() != in) throw DimensionError("DenseLayer: input size mismatch");
    return affine(tape, {{tape.param(store, weight), x}}, tape.param(store, bias), activation);
  }
};

/// Standard GRU cell (reset gate applied before the candidate's recurrent product):
///   z  = sigmoid(W_z x + U_z h + b_z)
///   r  = sigmoid(W_r x + U_r h + b_r)
///   h~ = tanh(W_h x + U_h (r o h) + b_h)
///   h' = (1 - z) o h + z o h~
struct GruCell {
  struct Gate {
    ParamId w = 0;
    ParamId u = 0;
    ParamId b = 0;
  };
  Gate update;
  Gate reset;
  Gate candidate;
  std::size_t input = 0;
  std::size_t hidden = 0;

  static GruCell create(ParamStore& store, const std::string& name, std::size_t input, std::size_t hidden, Rng& rng) {
    GruCell cell;
    cell.input = input;
    cell.hidden = hidden;
    auto make_gate = [&](const std::string& g) {
      Gate gate;
      gate.w = store.add(name + ".W_" + g, {hidden, input}, glorot_init(input, hidden, rng));
      gate.u = store.add(name + ".U_" + g, {hidden, hidden}, glorot_init(hidden, hidden, rng));
      gate.b = store.add(name + ".b_" + g, {hidden}, RealVector(hidden, 0.0));
      return gate;
    };
    cell.update = make_gate("z");
    cell.reset = make_gate("r");
    cell.candidate = make_gate("h");
    return cell;
  }

  Var step(Tape& tape, ParamStore& store, Var h_prev, Var x_t) const {
    if (tape.value(x_t).size() != input) throw DimensionError("GruCell: input size mismatch");
    if (tape.value(h_prev).size() != hidden) throw DimensionError("GruCell: state size mismatch");
    auto p = [&](ParamId id) { return tape.param(store, id); };
    const Var z = affine(tape, {{p(update.w), x_t}, {p(update.u), h_prev}}, p(update.b), Activation::sigmoid);
    const Var r = affine(tape, {{p(reset.w), x_t}, {p(reset.u), h_prev}}, p(reset.b), Activation::sigmoid);
    const Var rh = mul(tape, r, h_prev);
    const Var cand = affine(tape, {{p(candidate.w), x_t}, {p(candidate.u), rh}}, p(candidate.b), Activation::tanh);
    // h + z o (h~ - h)
    return add(tape, h_prev, mul(tape, z, sub(tape, cand, h_prev)));
  }
};

}  // namespace damusic::nn
