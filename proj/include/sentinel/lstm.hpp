#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "sentinel/core_math.hpp"
#include "sentinel/random.hpp"

namespace sentinel {

enum Gate : std::size_t { kInputGate = 0, kForgetGate = 1, kOutputGate = 2, kCandidate = 3 };
inline constexpr std::array<const char*, 4> kGateNames = {"input", "forget", "output", "candidate"};

// One LSTM layer. Gate k's pre-activation is x * input_weights[k] +
// s_prev * recurrent_weights[k] (+ biases[k]); biases are all present or all
// absent.
template <class Scalar>
struct LstmLayer {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  bool has_bias = true;
  std::array<Tensor<Scalar>, 4> input_weights;      // input_dim x hidden_dim
  std::array<Tensor<Scalar>, 4> recurrent_weights;  // hidden_dim x hidden_dim
  std::array<Tensor<Scalar>, 4> biases;             // 1 x hidden_dim, or empty

  static LstmLayer zeros(std::size_t input_dim, std::size_t hidden_dim, bool has_bias) {
    LstmLayer layer;
    layer.input_dim = input_dim;
    layer.hidden_dim = hidden_dim;
    layer.has_bias = has_bias;
    const auto in = static_cast<Eigen::Index>(input_dim);
    const auto h = static_cast<Eigen::Index>(hidden_dim);
    for (std::size_t k = 0; k < 4; ++k) {
      layer.input_weights[k] = Tensor<Scalar>::Zero(in, h);
      layer.recurrent_weights[k] = Tensor<Scalar>::Zero(h, h);
      layer.biases[k] = has_bias ? Tensor<Scalar>::Zero(1, h) : Tensor<Scalar>();
    }
    return layer;
  }

  // Weights uniform in +-1/sqrt(input_dim + hidden_dim); biases zero except
  // the forget gate, which starts at 1.
  static LstmLayer random(std::size_t input_dim, std::size_t hidden_dim, bool has_bias, Rng& rng) {
    LstmLayer layer = zeros(input_dim, hidden_dim, has_bias);
    for (std::size_t k = 0; k < 4; ++k) {
      init_uniform(layer.input_weights[k], input_dim + hidden_dim, rng);
      init_uniform(layer.recurrent_weights[k], input_dim + hidden_dim, rng);
    }
    if (has_bias) layer.biases[kForgetGate].setOnes();
    return layer;
  }

  LstmLayer zeros_like() const { return zeros(input_dim, hidden_dim, has_bias); }

  template <class Fn>
  void visit(const std::string& prefix, Fn&& fn) {
    for (std::size_t k = 0; k < 4; ++k) fn(prefix + "input_weights." + kGateNames[k], input_weights[k]);
    for (std::size_t k = 0; k < 4; ++k) fn(prefix + "recurrent_weights." + kGateNames[k], recurrent_weights[k]);
    if (has_bias) {
      for (std::size_t k = 0; k < 4; ++k) fn(prefix + "bias." + kGateNames[k], biases[k]);
    }
  }

  template <class Fn>
  void visit(const std::string& prefix, Fn&& fn) const {
    const_cast<LstmLayer*>(this)->visit(prefix, [&](const std::string& name, Tensor<Scalar>& t) {
      fn(name, static_cast<const Tensor<Scalar>&>(t));
    });
  }

  ParamRefs<Scalar> params() {
    ParamRefs<Scalar> out;
    visit("", [&](const std::string&, Tensor<Scalar>& t) { out.push_back(&t); });
    return out;
  }

  template <class Other>
  LstmLayer<Other> cast() const {
    LstmLayer<Other> out;
    out.input_dim = input_dim;
    out.hidden_dim = hidden_dim;
    out.has_bias = has_bias;
    for (std::size_t k = 0; k < 4; ++k) {
      out.input_weights[k] = input_weights[k].template cast<Other>();
      out.recurrent_weights[k] = recurrent_weights[k].template cast<Other>();
      out.biases[k] = biases[k].template cast<Other>();
    }
    return out;
  }
};

template <class Scalar>
struct LstmState {
  RowVec<Scalar> s;  // hidden state
  RowVec<Scalar> c;  // cell state

  static LstmState zeros(std::size_t hidden_dim) {
    const auto h = static_cast<Eigen::Index>(hidden_dim);
    return {RowVec<Scalar>::Zero(h), RowVec<Scalar>::Zero(h)};
  }
};

// Everything backward needs from one forward step.
template <class Scalar>
struct LstmStepCache {
  RowVec<Scalar> x;
  RowVec<Scalar> s_prev;
  RowVec<Scalar> c_prev;
  std::array<RowVec<Scalar>, 4> gates;  // post-activation i, f, o, g
  RowVec<Scalar> c;
  RowVec<Scalar> tanh_c;
  RowVec<Scalar> s;
};

template <class Scalar>
struct LstmTrace {
  std::vector<LstmStepCache<Scalar>> steps;

  std::size_t size() const { return steps.size(); }
  LstmState<Scalar> state(std::size_t t) const { return {steps[t].s, steps[t].c}; }
  LstmState<Scalar> final_state() const { return state(steps.size() - 1); }
  std::vector<RowVec<Scalar>> hidden_states() const {
    std::vector<RowVec<Scalar>> out;
    out.reserve(steps.size());
    for (const auto& st : steps) out.push_back(st.s);
    return out;
  }
};

namespace detail {

template <class Scalar, class X>
LstmStepCache<Scalar> lstm_step_cached(const Eigen::MatrixBase<X>& x, const LstmState<Scalar>& prev,
                                       const LstmLayer<Scalar>& layer) {
  if (static_cast<std::size_t>(x.size()) != layer.input_dim) {
    throw ShapeError("lstm cell: input of length " + std::to_string(x.size()) + ", layer expects " +
                     std::to_string(layer.input_dim));
  }
  if (static_cast<std::size_t>(prev.s.size()) != layer.hidden_dim ||
      static_cast<std::size_t>(prev.c.size()) != layer.hidden_dim) {
    throw ShapeError("lstm cell: state of length " + std::to_string(prev.s.size()) + "/" +
                     std::to_string(prev.c.size()) + ", layer expects " +
                     std::to_string(layer.hidden_dim));
  }
  LstmStepCache<Scalar> st;
  st.x = x;
  st.s_prev = prev.s;
  st.c_prev = prev.c;
  for (std::size_t k = 0; k < 4; ++k) {
    RowVec<Scalar> pre = st.x * layer.input_weights[k] + st.s_prev * layer.recurrent_weights[k];
    if (layer.has_bias) pre += layer.biases[k].row(0);
    st.gates[k] = (k == kCandidate) ? tanh_act(pre) : sigmoid(pre);
  }
  st.c = st.gates[kForgetGate].cwiseProduct(st.c_prev) +
         st.gates[kInputGate].cwiseProduct(st.gates[kCandidate]);
  st.tanh_c = tanh_act(st.c);
  st.s = st.gates[kOutputGate].cwiseProduct(st.tanh_c);
  return st;
}

}  // namespace detail

// i, f, o = sigmoid(...), g = tanh(...), c = f*c_prev + i*g, s = o*tanh(c).
template <class Scalar, class X>
LstmState<Scalar> cell_step(const Eigen::MatrixBase<X>& x, const LstmState<Scalar>& prev,
                            const LstmLayer<Scalar>& layer) {
  auto st = detail::lstm_step_cached(x, prev, layer);
  return {std::move(st.s), std::move(st.c)};
}

template <class Scalar>
LstmTrace<Scalar> sequence_forward(const std::vector<RowVec<Scalar>>& xs, const LstmState<Scalar>& init,
                                   const LstmLayer<Scalar>& layer) {
  if (xs.empty()) throw UsageError("sequence_forward: empty sequence");
  LstmTrace<Scalar> trace;
  trace.steps.reserve(xs.size());
  LstmState<Scalar> state = init;
  for (const auto& x : xs) {
    trace.steps.push_back(detail::lstm_step_cached(x, state, layer));
    state = {trace.steps.back().s, trace.steps.back().c};
  }
  return trace;
}

// Backpropagation through the unrolled window. d_states[t] is the upstream
// gradient on s_t; the initial state is treated as a constant. Parameter
// gradients are accumulated into `grads`; input gradients are returned.
template <class Scalar>
std::vector<RowVec<Scalar>> sequence_backward(const LstmTrace<Scalar>& trace, const LstmLayer<Scalar>& layer,
                                              const std::vector<RowVec<Scalar>>& d_states,
                                              LstmLayer<Scalar>& grads) {
  if (d_states.size() != trace.size()) {
    throw UsageError("sequence_backward: " + std::to_string(d_states.size()) +
                     " upstream gradients for " + std::to_string(trace.size()) + " timesteps");
  }
  if (grads.input_dim != layer.input_dim || grads.hidden_dim != layer.hidden_dim ||
      grads.has_bias != layer.has_bias) {
    throw ShapeError("sequence_backward: gradient buffer does not match layer");
  }
  const auto h = static_cast<Eigen::Index>(layer.hidden_dim);
  std::vector<RowVec<Scalar>> d_inputs(trace.size());
  RowVec<Scalar> ds_next = RowVec<Scalar>::Zero(h);
  RowVec<Scalar> dc_next = RowVec<Scalar>::Zero(h);
  std::array<RowVec<Scalar>, 4> d_pre;
  for (std::size_t t = trace.size(); t-- > 0;) {
    const auto& st = trace.steps[t];
    const auto& i = st.gates[kInputGate];
    const auto& f = st.gates[kForgetGate];
    const auto& o = st.gates[kOutputGate];
    const auto& g = st.gates[kCandidate];

    const RowVec<Scalar> ds = d_states[t] + ds_next;
    const RowVec<Scalar> d_o = ds.cwiseProduct(st.tanh_c);
    const RowVec<Scalar> dc =
        dc_next + ds.cwiseProduct(o).cwiseProduct((Scalar(1) - st.tanh_c.array().square()).matrix());

    d_pre[kInputGate] = dc.cwiseProduct(g).cwiseProduct(i.cwiseProduct((Scalar(1) - i.array()).matrix()));
    d_pre[kForgetGate] =
        dc.cwiseProduct(st.c_prev).cwiseProduct(f.cwiseProduct((Scalar(1) - f.array()).matrix()));
    d_pre[kOutputGate] = d_o.cwiseProduct(o.cwiseProduct((Scalar(1) - o.array()).matrix()));
    d_pre[kCandidate] = dc.cwiseProduct(i).cwiseProduct((Scalar(1) - g.array().square()).matrix());

    RowVec<Scalar> dx = RowVec<Scalar>::Zero(static_cast<Eigen::Index>(layer.input_dim));
    RowVec<Scalar> ds_prev = RowVec<Scalar>::Zero(h);
    for (std::size_t k = 0; k < 4; ++k) {
      grads.input_weights[k].noalias() += st.x.transpose() * d_pre[k];
      grads.recurrent_weights[k].noalias() += st.s_prev.transpose() * d_pre[k];
      if (layer.has_bias) grads.biases[k] += d_pre[k];
      dx.noalias() += d_pre[k] * layer.input_weights[k].transpose();
      ds_prev.noalias() += d_pre[k] * layer.recurrent_weights[k].transpose();
    }
    d_inputs[t] = std::move(dx);
    ds_next = std::move(ds_prev);
    dc_next = dc.cwiseProduct(f);
  }
  return d_inputs;
}

// Plain recurrent step s_t = f(x W + s_prev U) with f = tanh, and its softmax
// read-out y = softmax(s V). Kept for reference and tests; the pipeline trains
// LSTM stacks only.
template <class Scalar>
RowVec<Scalar> elman_step(const RowVec<Scalar>& x, const RowVec<Scalar>& s_prev, const Tensor<Scalar>& w,
                          const Tensor<Scalar>& u) {
  return tanh_act(RowVec<Scalar>(affine(x, w) + affine(s_prev, u)));
}

template <class Scalar>
RowVec<Scalar> elman_output(const RowVec<Scalar>& s, const Tensor<Scalar>& v) {
  return softmax(RowVec<Scalar>(affine(s, v)));
}

}  // namespace sentinel
