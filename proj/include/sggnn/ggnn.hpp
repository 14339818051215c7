#pragma once

#include "sggnn/filters.hpp"
#include "sggnn/graph.hpp"
#include "sggnn/linalg.hpp"

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace sggnn {

enum class Activation { identity, tanh, scaled_tanh };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::tanh: return "tanh";
    case Activation::scaled_tanh: return "scaled_tanh";
  }
  return "unknown";
}

inline Activation activation_from_string(const std::string& name) {
  if (name == "identity") return Activation::identity;
  if (name == "tanh") return Activation::tanh;
  if (name == "scaled_tanh") return Activation::scaled_tanh;
  throw Error("unknown activation '" + name + "'");
}

/// Affine map shared by every agent: act(x W + b), W is in x out, b is 1 x out.
template <class M>
struct Dense {
  M weight;
  M bias;
  Activation activation = Activation::tanh;
};

/// One gated graph recurrent layer. A, A_hat, A_tilde read the F-wide state;
/// B, B_hat, B_tilde read the G-wide layer input. Biases are 1 x F rows
/// broadcast to every agent.
template <class M>
struct BasicLayerParams {
  FilterBank<M> A, B;
  FilterBank<M> A_hat, B_hat;      // forget (state) gate
  FilterBank<M> A_tilde, B_tilde;  // input gate
  M b, b_hat, b_tilde;
};

struct NetworkMetadata {
  int k_order = 2;
  int state_width = 50;
  int n_layers = 1;
  SupportKind support = SupportKind::normalized_laplacian;
  double saturation = 5.0;
  /// Assumed uniform bound on inf_norm(S) the weights were trained against.
  double s_bar = 0.0;
};

template <class M>
struct BasicNetworkParams {
  NetworkMetadata meta;
  std::vector<Dense<M>> encoder;
  std::vector<BasicLayerParams<M>> layers;
  FilterBank<M> readout;
  M readout_bias;
  std::vector<Dense<M>> head;
};

using LayerParams = BasicLayerParams<Matrix>;
using NetworkParams = BasicNetworkParams<Matrix>;

// ---------------------------------------------------------------------------
// Parameter traversal. Both helpers visit members in the same fixed order.

template <class Net, class Fn>
void for_each_param(Net& net, Fn&& fn) {
  auto bank = [&](const std::string& name, auto& fb) {
    for (std::size_t k = 0; k < fb.taps.size(); ++k) fn(name + "[" + std::to_string(k) + "]", fb.taps[k]);
  };
  auto dense = [&](const std::string& name, auto& d) {
    fn(name + ".weight", d.weight);
    fn(name + ".bias", d.bias);
  };
  for (std::size_t i = 0; i < net.encoder.size(); ++i) dense("encoder." + std::to_string(i), net.encoder[i]);
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    auto& l = net.layers[i];
    const std::string p = "layer." + std::to_string(i) + ".";
    bank(p + "A", l.A);
    bank(p + "B", l.B);
    bank(p + "A_hat", l.A_hat);
    bank(p + "B_hat", l.B_hat);
    bank(p + "A_tilde", l.A_tilde);
    bank(p + "B_tilde", l.B_tilde);
    fn(p + "b", l.b);
    fn(p + "b_hat", l.b_hat);
    fn(p + "b_tilde", l.b_tilde);
  }
  bank("readout", net.readout);
  fn("readout_bias", net.readout_bias);
  for (std::size_t i = 0; i < net.head.size(); ++i) dense("head." + std::to_string(i), net.head[i]);
}

template <class To, class From, class Fn>
FilterBank<To> transform_bank(const FilterBank<From>& fb, Fn& fn) {
  FilterBank<To> out;
  out.taps.reserve(fb.taps.size());
  for (const auto& h : fb.taps) out.taps.push_back(fn(h));
  return out;
}

template <class To, class From, class Fn>
BasicLayerParams<To> transform_layer(const BasicLayerParams<From>& l, Fn& fn) {
  BasicLayerParams<To> out;
  out.A = transform_bank<To>(l.A, fn);
  out.B = transform_bank<To>(l.B, fn);
  out.A_hat = transform_bank<To>(l.A_hat, fn);
  out.B_hat = transform_bank<To>(l.B_hat, fn);
  out.A_tilde = transform_bank<To>(l.A_tilde, fn);
  out.B_tilde = transform_bank<To>(l.B_tilde, fn);
  out.b = fn(l.b);
  out.b_hat = fn(l.b_hat);
  out.b_tilde = fn(l.b_tilde);
  return out;
}

/// Maps every parameter matrix through fn, preserving structure and metadata.
/// fn is called in for_each_param order.
template <class To, class From, class Fn>
BasicNetworkParams<To> transform_params(const BasicNetworkParams<From>& net, Fn&& fn) {
  BasicNetworkParams<To> out;
  out.meta = net.meta;
  auto dense = [&](const Dense<From>& d) {
    Dense<To> r;
    r.weight = fn(d.weight);
    r.bias = fn(d.bias);
    r.activation = d.activation;
    return r;
  };
  for (const auto& d : net.encoder) out.encoder.push_back(dense(d));
  for (const auto& l : net.layers) out.layers.push_back(transform_layer<To>(l, fn));
  out.readout = transform_bank<To>(net.readout, fn);
  out.readout_bias = fn(net.readout_bias);
  for (const auto& d : net.head) out.head.push_back(dense(d));
  return out;
}

inline std::size_t parameter_count(const NetworkParams& net) {
  std::size_t n = 0;
  for_each_param(net, [&](const std::string&, const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

// ---------------------------------------------------------------------------
// Shapes and initialization

struct LayerShape {
  int state_width = 0;  // F
  int input_width = 0;  // G
  int k_order = 0;      // K
};

inline LayerShape shape_of(const LayerParams& p) {
  return {static_cast<int>(p.b.cols()), static_cast<int>(input_width(p.B)), p.A.order()};
}

inline void validate(const LayerParams& p) {
  for (const auto* fb : {&p.A, &p.B, &p.A_hat, &p.B_hat, &p.A_tilde, &p.B_tilde}) validate(*fb);
  const int K = p.A.order();
  const auto F = p.b.cols();
  const auto G = input_width(p.B);
  for (const auto* fb : {&p.A, &p.B, &p.A_hat, &p.B_hat, &p.A_tilde, &p.B_tilde}) {
    require(fb->order() == K, "layer: all banks must share K");
    require(output_width(*fb) == F, "layer: bank output width must equal state width");
  }
  for (const auto* fb : {&p.A, &p.A_hat, &p.A_tilde}) require(input_width(*fb) == F, "layer: state banks must read F features");
  for (const auto* fb : {&p.B, &p.B_hat, &p.B_tilde}) require(input_width(*fb) == G, "layer: input banks must read G features");
  for (const auto* b : {&p.b, &p.b_hat, &p.b_tilde}) require(b->rows() == 1 && b->cols() == F, "layer: biases must be 1 x F");
}

inline void validate(const NetworkParams& net) {
  require(!net.layers.empty(), "network: needs at least one layer");
  Eigen::Index width = -1;
  for (const auto& d : net.encoder) {
    require(d.bias.rows() == 1 && d.bias.cols() == d.weight.cols(), "network: encoder bias shape");
    require(width < 0 || d.weight.rows() == width, "network: encoder widths do not chain");
    width = d.weight.cols();
  }
  for (const auto& l : net.layers) {
    validate(l);
    const auto s = shape_of(l);
    require(width < 0 || s.input_width == width, "network: layer input width must equal previous width");
    require(s.k_order == net.layers.front().A.order(), "network: layers must share K");
    width = s.state_width;
  }
  validate(net.readout);
  require(input_width(net.readout) == width, "network: readout must read the last state");
  require(net.readout_bias.rows() == 1 && net.readout_bias.cols() == output_width(net.readout),
          "network: readout bias shape");
  width = output_width(net.readout);
  for (const auto& d : net.head) {
    require(d.weight.rows() == width, "network: head widths do not chain");
    require(d.bias.rows() == 1 && d.bias.cols() == d.weight.cols(), "network: head bias shape");
    width = d.weight.cols();
  }
  require(net.meta.saturation > 0.0, "network: saturation must be positive");
}

namespace detail {
inline Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
  return m;
}

inline FilterBank<Matrix> uniform_bank(int in, int out, int k_order, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>((k_order + 1) * in));
  FilterBank<Matrix> fb;
  for (int k = 0; k <= k_order; ++k) fb.taps.push_back(uniform_matrix(in, out, bound, rng));
  return fb;
}

inline Dense<Matrix> uniform_dense(int in, int out, Activation act, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  return {uniform_matrix(in, out, bound, rng), uniform_matrix(1, out, bound, rng), act};
}
}  // namespace detail

/// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], fan_in = (K+1) * width_in for filters.
inline LayerParams init_layer(const LayerShape& shape, std::mt19937_64& rng) {
  require(shape.state_width > 0 && shape.input_width > 0 && shape.k_order >= 0, "init_layer: bad shape");
  const int F = shape.state_width;
  const int G = shape.input_width;
  const int K = shape.k_order;
  LayerParams p;
  p.A = detail::uniform_bank(F, F, K, rng);
  p.B = detail::uniform_bank(G, F, K, rng);
  p.A_hat = detail::uniform_bank(F, F, K, rng);
  p.B_hat = detail::uniform_bank(G, F, K, rng);
  p.A_tilde = detail::uniform_bank(F, F, K, rng);
  p.B_tilde = detail::uniform_bank(G, F, K, rng);
  const double bound = 1.0 / std::sqrt(static_cast<double>((K + 1) * F));
  p.b = detail::uniform_matrix(1, F, bound, rng);
  p.b_hat = detail::uniform_matrix(1, F, bound, rng);
  p.b_tilde = detail::uniform_matrix(1, F, bound, rng);
  return p;
}

inline LayerParams zero_layer(const LayerShape& shape) {
  const int F = shape.state_width;
  const int G = shape.input_width;
  auto bank = [&](int in) {
    FilterBank<Matrix> fb;
    for (int k = 0; k <= shape.k_order; ++k) fb.taps.push_back(Matrix::Zero(in, F));
    return fb;
  };
  LayerParams p;
  p.A = bank(F);
  p.A_hat = bank(F);
  p.A_tilde = bank(F);
  p.B = bank(G);
  p.B_hat = bank(G);
  p.B_tilde = bank(G);
  p.b = p.b_hat = p.b_tilde = Matrix::Zero(1, F);
  return p;
}

struct NetworkShape {
  int raw_inputs = 10;
  std::vector<int> encoder_widths{128, 128};
  int state_width = 50;
  int n_layers = 1;
  int k_order = 2;
  int readout_width = 128;
  std::vector<int> head_widths{128};
  int outputs = 2;
  SupportKind support = SupportKind::normalized_laplacian;
  double saturation = 5.0;
  double s_bar = 0.0;
};

/// Encoder: tanh affine maps (so the GGNN input is unit bounded). Head: tanh
/// hidden maps then a tanh scaled by the control saturation.
inline NetworkParams init_network(const NetworkShape& shape, std::mt19937_64& rng) {
  NetworkParams net;
  net.meta.k_order = shape.k_order;
  net.meta.state_width = shape.state_width;
  net.meta.n_layers = shape.n_layers;
  net.meta.support = shape.support;
  net.meta.saturation = shape.saturation;
  net.meta.s_bar = shape.s_bar;
  int width = shape.raw_inputs;
  for (int w : shape.encoder_widths) {
    net.encoder.push_back(detail::uniform_dense(width, w, Activation::tanh, rng));
    width = w;
  }
  for (int i = 0; i < shape.n_layers; ++i) {
    net.layers.push_back(init_layer({shape.state_width, width, shape.k_order}, rng));
    width = shape.state_width;
  }
  net.readout = detail::uniform_bank(width, shape.readout_width, shape.k_order, rng);
  net.readout_bias = detail::uniform_matrix(1, shape.readout_width,
                                            1.0 / std::sqrt(static_cast<double>((shape.k_order + 1) * width)), rng);
  width = shape.readout_width;
  for (int w : shape.head_widths) {
    net.head.push_back(detail::uniform_dense(width, w, Activation::tanh, rng));
    width = w;
  }
  net.head.push_back(detail::uniform_dense(width, shape.outputs, Activation::scaled_tanh, rng));
  validate(net);
  return net;
}

// ---------------------------------------------------------------------------
// Forward computations (generic over Matrix and tape variables)

template <class M>
M activate(const M& z, Activation act, double saturation) {
  switch (act) {
    case Activation::identity: return z;
    case Activation::tanh: return tanh_act(z);
    case Activation::scaled_tanh: return scale(tanh_act(z), saturation);
  }
  throw Error("activate: unknown activation");
}

template <class M>
M dense_forward(const Dense<M>& d, const M& x, double saturation) {
  return activate(add_bias(matmul(x, d.weight), d.bias), d.activation, saturation);
}

template <class M>
struct LayerOutput {
  M state;       // x+
  M gate_state;  // q_hat, forget gate
  M gate_input;  // q_tilde, input gate
};

/// Gated update from precomputed k-hop aggregates of the state (xs) and the
/// input (us). Gates use the same (x, u) as the state update.
template <class M>
LayerOutput<M> layer_update(const BasicLayerParams<M>& p, const std::vector<M>& xs, const std::vector<M>& us) {
  M q_tilde = logistic(add_bias(apply_taps(xs, p.A_tilde) + apply_taps(us, p.B_tilde), p.b_tilde));
  M q_hat = logistic(add_bias(apply_taps(xs, p.A_hat) + apply_taps(us, p.B_hat), p.b_hat));
  M pre = hadamard(q_hat, apply_taps(xs, p.A)) + hadamard(q_tilde, apply_taps(us, p.B));
  M next = tanh_act(add_bias(pre, p.b));
  return {std::move(next), std::move(q_hat), std::move(q_tilde)};
}

template <class M>
LayerOutput<M> layer_forward(const BasicLayerParams<M>& p, const SupportMatrix& s, const M& x, const M& u) {
  if (max_abs(value_of(u)) > 1.0 || max_abs(value_of(x)) > 1.0) throw Error("input out of unit ball");
  require(value_of(x).rows() == s.size() && value_of(u).rows() == s.size(), "layer: agent count mismatch");
  const int K = p.A.order();
  return layer_update(p, shift_stack(s.entries, x, K), shift_stack(s.entries, u, K));
}

/// Gated update with every filter replaced by its unit-delayed counterpart.
/// Both histories must carry the same support sequence.
inline LayerOutput<Matrix> delayed_forward(const LayerParams& p, const SignalHistory& state_history,
                                           const SignalHistory& input_history) {
  if (!state_history.warm() || !input_history.warm()) throw Error("insufficient history");
  require(state_history.order() == p.A.order() && input_history.order() == p.A.order(),
          "delayed layer: history order must equal K");
  for (int lag = 0; lag <= p.A.order(); ++lag) {
    require(state_history.lagged(lag).time == input_history.lagged(lag).time,
            "delayed layer: state and input histories are out of step");
  }
  return layer_update(p, delayed_shift_stack(state_history), delayed_shift_stack(input_history));
}

template <class M>
M encode(const BasicNetworkParams<M>& net, const M& raw) {
  M u = raw;
  for (const auto& d : net.encoder) u = dense_forward(d, u, net.meta.saturation);
  return u;
}

/// Head applied to readout-filter aggregates of the last state.
template <class M>
M read_out(const BasicNetworkParams<M>& net, const std::vector<M>& last_state_shifts) {
  M y = add_bias(apply_taps(last_state_shifts, net.readout), net.readout_bias);
  for (const auto& d : net.head) y = dense_forward(d, y, net.meta.saturation);
  return y;
}

template <class M>
struct NetworkOutput {
  M control;
  std::vector<M> states;
};

/// Encoder, chained layers (u^i = x^{i-1,+}), readout of the updated last state.
template <class M>
NetworkOutput<M> deep_forward(const BasicNetworkParams<M>& net, const SupportMatrix& s, const std::vector<M>& states,
                              const M& raw) {
  if (states.size() != net.layers.size()) throw Error("state-count mismatch");
  require(value_of(raw).allFinite(), "deep_forward: non-finite input");
  M u = encode(net, raw);
  NetworkOutput<M> out;
  out.states.reserve(states.size());
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    out.states.push_back(layer_forward(net.layers[i], s, states[i], u).state);
    u = out.states.back();
  }
  out.control = read_out(net, shift_stack(s.entries, out.states.back(), net.readout.order()));
  return out;
}

inline std::vector<Matrix> zero_states(const NetworkParams& net, Eigen::Index n_agents) {
  std::vector<Matrix> states;
  for (const auto& l : net.layers) states.push_back(Matrix::Zero(n_agents, l.b.cols()));
  return states;
}

/// Closed-loop evaluator with instantaneous communication.
class NetworkRunner {
 public:
  NetworkRunner(const NetworkParams& net, Eigen::Index n_agents) : net_(&net), states_(zero_states(net, n_agents)) {}

  Matrix step(const SupportMatrix& s, const Matrix& raw) {
    auto out = deep_forward(*net_, s, states_, raw);
    states_ = std::move(out.states);
    return out.control;
  }

  const std::vector<Matrix>& states() const { return states_; }

 private:
  const NetworkParams* net_;
  std::vector<Matrix> states_;
};

/// Closed-loop evaluator where every hop costs one communication step
/// (unit-delayed filters everywhere). On the first call the histories are
/// filled with K copies of the current support and signals, as if the swarm
/// had been frozen in its initial configuration.
class DelayedNetworkRunner {
 public:
  DelayedNetworkRunner(const NetworkParams& net, Eigen::Index n_agents)
      : net_(&net), states_(zero_states(net, n_agents)), readout_history_(net.readout.order()) {
    const int K = net.layers.front().A.order();
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
      state_histories_.emplace_back(K);
      input_histories_.emplace_back(K);
    }
  }

  Matrix step(const SupportMatrix& s, const Matrix& raw) {
    const Matrix u0 = encode(*net_, raw);
    if (max_abs(u0) > 1.0) throw Error("input out of unit ball");
    Matrix u = u0;
    for (std::size_t i = 0; i < net_->layers.size(); ++i) {
      push(state_histories_[i], states_[i], s.entries);
      push(input_histories_[i], u, s.entries);
      states_[i] = delayed_forward(net_->layers[i], state_histories_[i], input_histories_[i]).state;
      u = states_[i];
    }
    push(readout_history_, states_.back(), s.entries);
    time_ += 1;
    return read_out(*net_, delayed_shift_stack(readout_history_));
  }

  const std::vector<Matrix>& states() const { return states_; }

 private:
  void push(SignalHistory& h, const Matrix& signal, const Matrix& support) const {
    if (h.entries().empty()) {
      for (int lag = h.order(); lag > 0; --lag) h.push(time_ - lag, signal, support);
    }
    h.push(time_, signal, support);
  }

  const NetworkParams* net_;
  std::vector<Matrix> states_;
  std::vector<SignalHistory> state_histories_;
  std::vector<SignalHistory> input_histories_;
  SignalHistory readout_history_;
  long time_ = 0;
};

// ---------------------------------------------------------------------------
// Gate bounds

template <class T>
struct GateBounds {
  T state_gate;  // sigma_q_hat
  T input_gate;  // sigma_q_tilde
};

/// Upper bounds on every forget/input gate activation over the unit balls of
/// state and input, given inf_norm([I, S, ..., S^K]) <= s_k_norm.
template <class M>
auto gate_bounds(const BasicLayerParams<M>& p, double s_k_norm) {
  require(s_k_norm >= 1.0, "gate bounds: stacked shift norm must be at least 1");
  auto hat = logistic(s_k_norm * (tap_norm(p.A_hat) + tap_norm(p.B_hat)) + max_abs(p.b_hat));
  auto tilde = logistic(s_k_norm * (tap_norm(p.A_tilde) + tap_norm(p.B_tilde)) + max_abs(p.b_tilde));
  return GateBounds<decltype(hat)>{hat, tilde};
}

}  // namespace sggnn
