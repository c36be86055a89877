#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "models.hpp"

namespace dld::ml::detail {

namespace {

constexpr double kMomentum = 0.9;

struct Workspace {
  std::vector<std::vector<double>> act;  // act[0] is the input, act[L] the logits
};

void forward(const std::vector<MlpModel::Layer>& layers, const double* in, Workspace& ws) {
  ws.act.resize(layers.size() + 1);
  ws.act[0].assign(in, in + layers.front().in);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layers[l];
    auto& out = ws.act[l + 1];
    out.assign(L.out, 0.0);
    const auto& a = ws.act[l];
    for (std::size_t o = 0; o < L.out; ++o) {
      double s = L.b[o];
      for (std::size_t i = 0; i < L.in; ++i) s += L.w[o * L.in + i] * a[i];
      out[o] = (l + 1 < layers.size()) ? std::max(0.0, s) : s;
    }
  }
}

/// Softmax of two logits, computed stably.
void softmax2(const std::vector<double>& z, double p[2]) {
  const double m = std::max(z[0], z[1]);
  const double e0 = std::exp(z[0] - m);
  const double e1 = std::exp(z[1] - m);
  p[0] = e0 / (e0 + e1);
  p[1] = e1 / (e0 + e1);
}

double cross_entropy(const std::vector<MlpModel::Layer>& layers, const Table& x, std::span<const double> y,
                     std::span<const std::size_t> rows) {
  Workspace ws;
  double loss = 0.0;
  for (std::size_t r : rows) {
    forward(layers, x.row(r), ws);
    const auto& z = ws.act.back();
    const double m = std::max(z[0], z[1]);
    const double lse = m + std::log(std::exp(z[0] - m) + std::exp(z[1] - m));
    loss += lse - z[y[r] == kBumped ? 1 : 0];
  }
  return loss / static_cast<double>(rows.size());
}

}  // namespace

std::vector<double> MlpModel::probabilities(const double* row) const {
  Workspace ws;
  forward(layers_, row, ws);
  double p[2];
  softmax2(ws.act.back(), p);
  return {p[0], p[1]};
}

double MlpModel::predict_scaled(const double* row) const {
  Workspace ws;
  forward(layers_, row, ws);
  const auto& z = ws.act.back();
  return z[1] > z[0] ? kBumped : kZigzag;
}

void MlpModel::fit_scaled(const Table& x, std::span<const double> y) {
  const auto& h = hyperparameters();
  Rng rng(seed());

  // He initialisation.
  layers_.clear();
  std::size_t in = x.cols();
  std::vector<std::size_t> widths(h.layers.begin(), h.layers.end());
  widths.push_back(2);
  for (std::size_t out : widths) {
    Layer L;
    L.in = in;
    L.out = out;
    L.w.resize(in * out);
    L.b.assign(out, 0.0);
    const double scale = std::sqrt(2.0 / static_cast<double>(in));
    for (auto& w : L.w) w = rng.normal() * scale;
    layers_.push_back(std::move(L));
    in = out;
  }

  // Stratified holdout for early stopping; every class keeps a training record.
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> val_rows;
  for (double cls : {kZigzag, kBumped}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (y[i] == cls) idx.push_back(i);
    }
    rng.shuffle(idx);
    auto n_val = static_cast<std::size_t>(std::lround(h.validation_fraction * static_cast<double>(idx.size())));
    n_val = std::min(n_val, idx.size() - 1);
    val_rows.insert(val_rows.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
    train_rows.insert(train_rows.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(val_rows.begin(), val_rows.end());
  const auto& monitor = val_rows.empty() ? train_rows : val_rows;

  std::vector<Layer> velocity = layers_;
  std::vector<Layer> grad = layers_;
  for (auto* set : {&velocity, &grad}) {
    for (auto& L : *set) {
      std::fill(L.w.begin(), L.w.end(), 0.0);
      std::fill(L.b.begin(), L.b.end(), 0.0);
    }
  }

  std::vector<Layer> best = layers_;
  double best_loss = cross_entropy(layers_, x, y, monitor);
  int since_best = 0;
  bool stopped = false;
  Workspace ws;
  std::vector<std::vector<double>> delta(layers_.size());
  const auto batch = static_cast<std::size_t>(h.batch_size);

  for (int epoch = 0; epoch < h.max_epochs && !stopped; ++epoch) {
    rng.shuffle(train_rows);
    for (std::size_t start = 0; start < train_rows.size(); start += batch) {
      const std::size_t stop = std::min(train_rows.size(), start + batch);
      for (auto& L : grad) {
        std::fill(L.w.begin(), L.w.end(), 0.0);
        std::fill(L.b.begin(), L.b.end(), 0.0);
      }
      for (std::size_t s = start; s < stop; ++s) {
        const std::size_t r = train_rows[s];
        forward(layers_, x.row(r), ws);
        double p[2];
        softmax2(ws.act.back(), p);
        const std::size_t last = layers_.size() - 1;
        delta[last] = {p[0], p[1]};
        delta[last][y[r] == kBumped ? 1 : 0] -= 1.0;
        for (std::size_t l = last + 1; l-- > 0;) {
          const auto& L = layers_[l];
          auto& G = grad[l];
          const auto& a = ws.act[l];
          for (std::size_t o = 0; o < L.out; ++o) {
            G.b[o] += delta[l][o];
            for (std::size_t i = 0; i < L.in; ++i) G.w[o * L.in + i] += delta[l][o] * a[i];
          }
          if (l == 0) break;
          auto& d = delta[l - 1];
          d.assign(L.in, 0.0);
          for (std::size_t o = 0; o < L.out; ++o) {
            for (std::size_t i = 0; i < L.in; ++i) d[i] += L.w[o * L.in + i] * delta[l][o];
          }
          for (std::size_t i = 0; i < L.in; ++i) {
            if (a[i] <= 0.0) d[i] = 0.0;
          }
        }
      }
      const double scale = h.mlp_learning_rate / static_cast<double>(stop - start);
      for (std::size_t l = 0; l < layers_.size(); ++l) {
        auto& L = layers_[l];
        auto& V = velocity[l];
        const auto& G = grad[l];
        for (std::size_t k = 0; k < L.w.size(); ++k) {
          V.w[k] = kMomentum * V.w[k] - scale * G.w[k];
          L.w[k] += V.w[k];
        }
        for (std::size_t k = 0; k < L.b.size(); ++k) {
          V.b[k] = kMomentum * V.b[k] - scale * G.b[k];
          L.b[k] += V.b[k];
        }
      }
    }
    const double loss = cross_entropy(layers_, x, y, monitor);
    if (!std::isfinite(loss)) break;
    if (loss < best_loss) {
      best_loss = loss;
      best = layers_;
      since_best = 0;
    } else if (++since_best >= h.patience) {
      stopped = true;
    }
  }

  layers_ = std::move(best);
  final_loss_ = best_loss;
  converged_ = stopped;
  if (!stopped) {
    warning_ = "no early stop within max_epochs = " + std::to_string(h.max_epochs) +
               "; monitored loss was still improving";
  }
}

nlohmann::json MlpModel::state_json() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& L : layers_) {
    layers.push_back({{"shape", {L.out, L.in}}, {"weights", L.w}, {"bias", L.b}});
  }
  return {{"layers", std::move(layers)}};
}

void MlpModel::load_state(const nlohmann::json& j) {
  layers_.clear();
  std::size_t expect_in = n_features();
  for (const auto& lj : j.at("layers")) {
    Layer L;
    const auto shape = lj.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 2) throw ModelError("layer shape must have two entries");
    L.out = shape[0];
    L.in = shape[1];
    L.w = lj.at("weights").get<std::vector<double>>();
    L.b = lj.at("bias").get<std::vector<double>>();
    if (L.in != expect_in || L.w.size() != L.in * L.out || L.b.size() != L.out) {
      throw ModelError("MLP layer shapes are inconsistent");
    }
    expect_in = L.out;
    layers_.push_back(std::move(L));
  }
  if (layers_.empty() || expect_in != 2) throw ModelError("MLP must end in two logits");
}

}  // namespace dld::ml::detail
