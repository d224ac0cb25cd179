#pragma once

// Scalar-by-scalar LSTM cell written straight from the gate equations. Used
// only as a test oracle; shares no code with sentinel/lstm.hpp.

#include <cmath>
#include <vector>

#include "sentinel/lstm.hpp"

namespace oracle {

struct ScalarCell {
  // [gate][row][col]; gate order i, f, o, g
  std::vector<std::vector<std::vector<double>>> u, w;
  std::vector<std::vector<double>> b;  // empty when no bias
};

inline ScalarCell from_layer(const sentinel::LstmLayer<double>& layer) {
  ScalarCell cell;
  cell.u.resize(4);
  cell.w.resize(4);
  for (std::size_t k = 0; k < 4; ++k) {
    for (Eigen::Index r = 0; r < layer.input_weights[k].rows(); ++r) {
      std::vector<double> row;
      for (Eigen::Index c = 0; c < layer.input_weights[k].cols(); ++c) row.push_back(layer.input_weights[k](r, c));
      cell.u[k].push_back(row);
    }
    for (Eigen::Index r = 0; r < layer.recurrent_weights[k].rows(); ++r) {
      std::vector<double> row;
      for (Eigen::Index c = 0; c < layer.recurrent_weights[k].cols(); ++c) row.push_back(layer.recurrent_weights[k](r, c));
      cell.w[k].push_back(row);
    }
    if (layer.has_bias) {
      std::vector<double> row;
      for (Eigen::Index c = 0; c < layer.biases[k].cols(); ++c) row.push_back(layer.biases[k](0, c));
      cell.b.push_back(row);
    }
  }
  return cell;
}

inline void step(const ScalarCell& cell, const std::vector<double>& x, std::vector<double>& s,
                 std::vector<double>& c) {
  const std::size_t h = s.size();
  std::vector<double> gate[4];
  for (std::size_t k = 0; k < 4; ++k) {
    gate[k].assign(h, 0.0);
    for (std::size_t j = 0; j < h; ++j) {
      double z = cell.b.empty() ? 0.0 : cell.b[k][j];
      for (std::size_t m = 0; m < x.size(); ++m) z += x[m] * cell.u[k][m][j];
      for (std::size_t m = 0; m < h; ++m) z += s[m] * cell.w[k][m][j];
      gate[k][j] = (k == 3) ? std::tanh(z) : 1.0 / (1.0 + std::exp(-z));
    }
  }
  for (std::size_t j = 0; j < h; ++j) {
    c[j] = gate[1][j] * c[j] + gate[0][j] * gate[3][j];
    s[j] = gate[2][j] * std::tanh(c[j]);
  }
}

}  // namespace oracle
