#pragma once

// Straight-line reference forward for the toy transformer, written against
// the raw weights without the session/KV-cache machinery. Test-only.

#include <cmath>
#include <vector>

#include "factsteer/model/toy_transformer.hpp"

namespace oracle {

using Mat = std::vector<std::vector<double>>;  // [position][dim]

inline std::vector<double> matvec(const factsteer::model::Matrix& m, const std::vector<double>& x) {
  std::vector<double> y(m.rows, 0.0);
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) y[r] += m.data[r * m.cols + c] * x[c];
  return y;
}

inline std::vector<double> rms(const std::vector<double>& x, const std::vector<double>& g) {
  double s = 0;
  for (double v : x) s += v * v;
  const double denom = std::sqrt(s / x.size() + 1e-6);
  std::vector<double> y(x.size());
  for (size_t i = 0; i < x.size(); ++i) y[i] = g[i] * (x[i] / denom);
  return y;
}

// Normalize-then-project by hand.
inline std::vector<double> lens(const factsteer::model::ToyTransformer& model,
                                const std::vector<double>& h) {
  const auto& w = model.weights();
  std::vector<double> n = model.config().rms_final_norm ? rms(h, w.final_norm) : h;
  std::vector<double> logits = matvec(w.unembedding, n);
  for (size_t v = 0; v < logits.size(); ++v) logits[v] += w.unembedding_bias[v];
  return logits;
}

// Returns states[layer][position][dim] for an unplanted model.
inline std::vector<Mat> forward(const factsteer::model::ToyTransformer& model,
                                const std::vector<int>& ids) {
  const auto& cfg = model.config();
  const auto& w = model.weights();
  const int n = static_cast<int>(ids.size());
  const int d = cfg.hidden_dim;
  const int hd = d / cfg.heads;
  std::vector<Mat> states;
  Mat x(n, std::vector<double>(d));
  for (int t = 0; t < n; ++t)
    for (int i = 0; i < d; i += 2) {
      const double f = std::pow(10000.0, -double(i) / d);
      x[t][i] = w.token_embedding.data[ids[t] * d + i] + std::sin(t * f);
      x[t][i + 1] = w.token_embedding.data[ids[t] * d + i + 1] + std::cos(t * f);
    }
  states.push_back(x);
  for (const auto& b : w.blocks) {
    Mat q(n), k(n), v(n);
    for (int t = 0; t < n; ++t) {
      auto h = rms(x[t], b.attn_norm);
      q[t] = matvec(b.wq, h);
      k[t] = matvec(b.wk, h);
      v[t] = matvec(b.wv, h);
    }
    Mat y = x;
    for (int t = 0; t < n; ++t) {
      std::vector<double> att(d, 0.0);
      for (int head = 0; head < cfg.heads; ++head) {
        std::vector<double> p(t + 1);
        double denom = 0;
        double mx = -1e300;
        for (int j = 0; j <= t; ++j) {
          double s = 0;
          for (int i = head * hd; i < (head + 1) * hd; ++i) s += q[t][i] * k[j][i];
          p[j] = s / std::sqrt(double(hd));
          if (p[j] > mx) mx = p[j];
        }
        for (int j = 0; j <= t; ++j) denom += (p[j] = std::exp(p[j] - mx));
        for (int j = 0; j <= t; ++j)
          for (int i = head * hd; i < (head + 1) * hd; ++i) att[i] += p[j] / denom * v[j][i];
      }
      auto o = matvec(b.wo, att);
      for (int i = 0; i < d; ++i) y[t][i] += o[i];
      auto h2 = rms(y[t], b.mlp_norm);
      auto hid = matvec(b.w_in, h2);
      for (size_t i = 0; i < hid.size(); ++i) {
        const double a = hid[i] + b.b_in[i];
        hid[i] = 0.5 * a * (1 + std::tanh(std::sqrt(2 / M_PI) * (a + 0.044715 * a * a * a)));
      }
      auto m = matvec(b.w_out, hid);
      for (int i = 0; i < d; ++i) y[t][i] += m[i] + b.b_out[i];
    }
    x = y;
    states.push_back(x);
  }
  return states;
}

inline double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max(std::abs(b), 1e-12);
}

}  // namespace oracle
