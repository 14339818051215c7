#pragma once

#include "sggnn/ggnn.hpp"
#include "sggnn/graph.hpp"
#include "sggnn/linalg.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <string>

namespace sggnn {

// Weights file: metadata plus every matrix as {rows, cols, data} with data in
// row-major order. Doubles are written in shortest round-trip form, so a
// save/load cycle is bit-exact.

inline constexpr const char* kWeightsFormat = "sggnn-weights";
inline constexpr int kWeightsVersion = 1;

inline nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json data = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

inline Matrix matrix_from(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data"))
    throw Error(where + ": expected {rows, cols, data}");
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (rows < 0 || cols < 0 || !data.is_array() || static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw Error(where + ": data length does not match rows x cols");
  Matrix m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!data[k].is_number()) throw Error(where + ": non-numeric entry at index " + std::to_string(k));
      m(r, c) = data[k++].get<double>();
    }
  }
  return m;
}

inline nlohmann::json to_json(const NetworkMetadata& m) {
  return {{"k_order", m.k_order},     {"state_width", m.state_width}, {"n_layers", m.n_layers},
          {"support", to_string(m.support)}, {"saturation", m.saturation},   {"s_bar", m.s_bar}};
}

inline NetworkMetadata metadata_from_json(const nlohmann::json& j) {
  NetworkMetadata m;
  m.k_order = j.at("k_order").get<int>();
  m.state_width = j.at("state_width").get<int>();
  m.n_layers = j.at("n_layers").get<int>();
  m.support = support_kind_from_string(j.at("support").get<std::string>());
  m.saturation = j.at("saturation").get<double>();
  m.s_bar = j.at("s_bar").get<double>();
  return m;
}

inline nlohmann::json to_json(const NetworkParams& net) {
  auto bank = [](const FilterBank<Matrix>& fb) {
    nlohmann::json taps = nlohmann::json::array();
    for (const auto& h : fb.taps) taps.push_back(matrix_json(h));
    return taps;
  };
  auto dense = [](const Dense<Matrix>& d) {
    return nlohmann::json{
        {"activation", to_string(d.activation)}, {"weight", matrix_json(d.weight)}, {"bias", matrix_json(d.bias)}};
  };
  nlohmann::json j;
  j["format"] = kWeightsFormat;
  j["version"] = kWeightsVersion;
  j["metadata"] = to_json(net.meta);
  j["encoder"] = nlohmann::json::array();
  for (const auto& d : net.encoder) j["encoder"].push_back(dense(d));
  j["layers"] = nlohmann::json::array();
  for (const auto& l : net.layers) {
    j["layers"].push_back({{"A", bank(l.A)},
                           {"B", bank(l.B)},
                           {"A_hat", bank(l.A_hat)},
                           {"B_hat", bank(l.B_hat)},
                           {"A_tilde", bank(l.A_tilde)},
                           {"B_tilde", bank(l.B_tilde)},
                           {"b", matrix_json(l.b)},
                           {"b_hat", matrix_json(l.b_hat)},
                           {"b_tilde", matrix_json(l.b_tilde)}});
  }
  j["readout"] = bank(net.readout);
  j["readout_bias"] = matrix_json(net.readout_bias);
  j["head"] = nlohmann::json::array();
  for (const auto& d : net.head) j["head"].push_back(dense(d));
  return j;
}

/// Throws Error naming the offending field on any structural problem.
inline NetworkParams network_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object()) throw Error("weights: top level must be an object");
    if (j.value("format", std::string()) != kWeightsFormat) throw Error("weights: missing or unknown format tag");
    if (j.at("version").get<int>() != kWeightsVersion) throw Error("weights: unsupported version");
    auto bank = [](const nlohmann::json& taps, const std::string& where) {
      if (!taps.is_array() || taps.empty()) throw Error(where + ": expected a non-empty tap list");
      FilterBank<Matrix> fb;
      for (std::size_t k = 0; k < taps.size(); ++k)
        fb.taps.push_back(matrix_from(taps[k], where + "[" + std::to_string(k) + "]"));
      return fb;
    };
    auto dense = [](const nlohmann::json& d, const std::string& where) {
      Dense<Matrix> out;
      out.activation = activation_from_string(d.at("activation").get<std::string>());
      out.weight = matrix_from(d.at("weight"), where + ".weight");
      out.bias = matrix_from(d.at("bias"), where + ".bias");
      return out;
    };
    NetworkParams net;
    net.meta = metadata_from_json(j.at("metadata"));
    for (std::size_t i = 0; i < j.at("encoder").size(); ++i)
      net.encoder.push_back(dense(j.at("encoder")[i], "encoder." + std::to_string(i)));
    for (std::size_t i = 0; i < j.at("layers").size(); ++i) {
      const auto& l = j.at("layers")[i];
      const std::string p = "layer." + std::to_string(i) + ".";
      LayerParams lp;
      lp.A = bank(l.at("A"), p + "A");
      lp.B = bank(l.at("B"), p + "B");
      lp.A_hat = bank(l.at("A_hat"), p + "A_hat");
      lp.B_hat = bank(l.at("B_hat"), p + "B_hat");
      lp.A_tilde = bank(l.at("A_tilde"), p + "A_tilde");
      lp.B_tilde = bank(l.at("B_tilde"), p + "B_tilde");
      lp.b = matrix_from(l.at("b"), p + "b");
      lp.b_hat = matrix_from(l.at("b_hat"), p + "b_hat");
      lp.b_tilde = matrix_from(l.at("b_tilde"), p + "b_tilde");
      net.layers.push_back(std::move(lp));
    }
    net.readout = bank(j.at("readout"), "readout");
    net.readout_bias = matrix_from(j.at("readout_bias"), "readout_bias");
    for (std::size_t i = 0; i < j.at("head").size(); ++i)
      net.head.push_back(dense(j.at("head")[i], "head." + std::to_string(i)));
    validate(net);
    require(static_cast<int>(net.layers.size()) == net.meta.n_layers, "weights: n_layers disagrees with layer list");
    require(net.layers.front().A.order() == net.meta.k_order, "weights: k_order disagrees with the filters");
    require(net.layers.front().b.cols() == net.meta.state_width, "weights: state_width disagrees with the layers");
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("weights: ") + e.what());
  }
}

inline NetworkParams load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open weights file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("weights file '" + path + "' is not valid JSON: " + e.what());
  }
  return network_from_json(j);
}

inline void save_network(const NetworkParams& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write weights file '" + path + "'");
  out << to_json(net).dump(1) << "\n";
  if (!out) throw Error("failed writing weights file '" + path + "'");
}

}  // namespace sggnn
