#include "optikit/mlp.hpp"

#include <cmath>
#include <memory>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

#include "optikit/errors.hpp"

namespace optikit::problems {

namespace {

// Internal arithmetic type for the network. fp64 by default; defining
// OPTIKIT_MLP_FP32 at build time switches the forward/backward passes to
// fp32 (parameters stay fp64 at the interface). Both instantiations are
// always compiled.
#ifdef OPTIKIT_MLP_FP32
using MlpReal = float;
#else
using MlpReal = double;
#endif

template <typename Real>
Real activate(Real z, MlpSpec::Activation act) {
  return act == MlpSpec::Activation::Tanh ? std::tanh(z)
                                          : (z > Real(0) ? z : Real(0));
}

// Derivative of the activation expressed through the activation value
// itself: tanh' = 1 - a^2, relu' = [a > 0].
template <typename Real>
Real activate_deriv(Real a, MlpSpec::Activation act) {
  return act == MlpSpec::Activation::Tanh ? Real(1) - a * a
                                          : (a > Real(0) ? Real(1) : Real(0));
}

template <typename Real>
void require_layer_finite(const std::vector<Real>& z, std::size_t layer) {
  for (Real v : z) {
    if (!std::isfinite(v)) {
      throw DomainError("mlp forward: non-finite value at layer " +
                        std::to_string(layer));
    }
  }
}

std::vector<std::size_t> layer_offsets(const MlpSpec& spec) {
  const auto& ls = spec.layer_sizes;
  std::vector<std::size_t> offs(ls.size());
  offs[0] = 0;
  for (std::size_t l = 0; l + 1 < ls.size(); ++l) {
    offs[l + 1] = offs[l] + static_cast<std::size_t>(ls[l + 1]) *
                                static_cast<std::size_t>(ls[l]);
  }
  return offs;
}

// Stable log-sum-exp cross-entropy of one logits vector against a label.
// Fills dlogits with softmax(logits) - onehot(label).
template <typename Real>
double cross_entropy(const std::vector<Real>& logits, int label,
                     std::vector<Real>& dlogits) {
  Real mx = logits[0];
  for (Real v : logits) mx = std::max(mx, v);
  Real sum = Real(0);
  for (std::size_t k = 0; k < logits.size(); ++k) {
    dlogits[k] = std::exp(logits[k] - mx);
    sum += dlogits[k];
  }
  for (auto& v : dlogits) v /= sum;
  const double loss =
      std::log(static_cast<double>(sum)) -
      static_cast<double>(logits[static_cast<std::size_t>(label)] - mx);
  dlogits[static_cast<std::size_t>(label)] -= Real(1);
  return loss;
}

template <typename Real>
double forward_loss_impl(const MlpSpec& spec, const Dataset& data,
                         const ParamVector& params,
                         const std::vector<std::size_t>& batch) {
  const auto& ls = spec.layer_sizes;
  const std::size_t layers = ls.size() - 1;
  const auto offs = layer_offsets(spec);
  double loss_sum = 0.0;
  std::vector<Real> a, z, dlogits;
  for (std::size_t idx : batch) {
    a.assign(data.x[idx].begin(), data.x[idx].end());
    for (std::size_t l = 0; l < layers; ++l) {
      const std::size_t rows = static_cast<std::size_t>(ls[l + 1]);
      const std::size_t cols = static_cast<std::size_t>(ls[l]);
      z.assign(rows, Real(0));
      for (std::size_t r = 0; r < rows; ++r) {
        const double* w = params.data() + offs[l] + r * cols;
        Real acc = Real(0);
        for (std::size_t c = 0; c < cols; ++c) acc += static_cast<Real>(w[c]) * a[c];
        z[r] = acc;
      }
      require_layer_finite(z, l);
      if (l + 1 < layers) {
        for (auto& v : z) v = activate(v, spec.activation);
      }
      a = z;
    }
    dlogits.assign(a.size(), Real(0));
    loss_sum += cross_entropy(a, data.y[idx], dlogits);
  }
  return loss_sum / static_cast<double>(batch.size());
}

template <typename Real>
std::pair<double, ParamVector> forward_backward_impl(
    const MlpSpec& spec, const Dataset& data, const ParamVector& params,
    const std::vector<std::size_t>& batch) {
  const auto& ls = spec.layer_sizes;
  const std::size_t layers = ls.size() - 1;
  const auto offs = layer_offsets(spec);

  std::vector<Real> gacc(params.size(), Real(0));
  double loss_sum = 0.0;
  std::vector<std::vector<Real>> act(layers + 1);
  std::vector<Real> delta, dprev, dlogits;

  for (std::size_t idx : batch) {
    act[0].assign(data.x[idx].begin(), data.x[idx].end());
    for (std::size_t l = 0; l < layers; ++l) {
      const std::size_t rows = static_cast<std::size_t>(ls[l + 1]);
      const std::size_t cols = static_cast<std::size_t>(ls[l]);
      act[l + 1].assign(rows, Real(0));
      for (std::size_t r = 0; r < rows; ++r) {
        const double* w = params.data() + offs[l] + r * cols;
        Real acc = Real(0);
        for (std::size_t c = 0; c < cols; ++c) {
          acc += static_cast<Real>(w[c]) * act[l][c];
        }
        act[l + 1][r] = acc;
      }
      require_layer_finite(act[l + 1], l);
      if (l + 1 < layers) {
        for (auto& v : act[l + 1]) v = activate(v, spec.activation);
      }
    }
    dlogits.assign(act[layers].size(), Real(0));
    loss_sum += cross_entropy(act[layers], data.y[idx], dlogits);
    delta = dlogits;
    for (std::size_t l = layers; l-- > 0;) {
      const std::size_t rows = static_cast<std::size_t>(ls[l + 1]);
      const std::size_t cols = static_cast<std::size_t>(ls[l]);
      Real* gw = gacc.data() + offs[l];
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
          gw[r * cols + c] += delta[r] * act[l][c];
        }
      }
      if (l > 0) {
        dprev.assign(cols, Real(0));
        const double* w = params.data() + offs[l];
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < cols; ++c) {
            dprev[c] += static_cast<Real>(w[r * cols + c]) * delta[r];
          }
        }
        for (std::size_t c = 0; c < cols; ++c) {
          dprev[c] *= activate_deriv(act[l][c], spec.activation);
        }
        delta = dprev;
      }
    }
  }

  const double inv = 1.0 / static_cast<double>(batch.size());
  ParamVector grad(params.size());
  for (std::size_t i = 0; i < grad.size(); ++i) {
    grad[i] = static_cast<double>(gacc[i]) * inv;
  }
  return {loss_sum * inv, grad};
}

std::vector<std::size_t> all_indices(const Dataset& data) {
  std::vector<std::size_t> idx(data.x.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

}  // namespace

void BlobDatasetSpec::validate() const {
  if (n_samples < 2) throw ConfigError("dataset.n_samples must be >= 2");
  if (n_classes < 2) throw ConfigError("dataset.n_classes must be >= 2");
  if (!std::isfinite(blob_sigma) || blob_sigma < 0.0) {
    throw ConfigError("dataset.blob_sigma must be finite and >= 0");
  }
}

void MlpSpec::validate() const {
  if (layer_sizes.size() < 2) {
    throw ConfigError("layer_sizes must list at least input and output sizes");
  }
  for (int s : layer_sizes) {
    if (s < 1) throw ConfigError("layer_sizes entries must be >= 1");
  }
  dataset.validate();
  if (layer_sizes.back() != dataset.n_classes) {
    throw ConfigError("output layer size must equal dataset.n_classes");
  }
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
}

Dataset make_blob_dataset(int input_dim, const BlobDatasetSpec& spec) {
  spec.validate();
  if (input_dim < 1) throw ConfigError("mlp input dimension must be >= 1");
  RngStream rng(spec.seed);
  const std::size_t dim = static_cast<std::size_t>(input_dim);
  // Class centers sit on a circle of radius 2 in the first two input
  // coordinates (on a line if the input is one-dimensional).
  std::vector<ParamVector> centers(static_cast<std::size_t>(spec.n_classes),
                                   ParamVector(dim, 0.0));
  for (int k = 0; k < spec.n_classes; ++k) {
    const double theta =
        2.0 * std::numbers::pi * static_cast<double>(k) / spec.n_classes;
    centers[static_cast<std::size_t>(k)][0] = 2.0 * std::cos(theta);
    if (dim >= 2) centers[static_cast<std::size_t>(k)][1] = 2.0 * std::sin(theta);
  }
  Dataset data;
  data.x.reserve(static_cast<std::size_t>(spec.n_samples));
  data.y.reserve(static_cast<std::size_t>(spec.n_samples));
  for (long i = 0; i < spec.n_samples; ++i) {
    const int label = static_cast<int>(i % spec.n_classes);
    ParamVector x = gaussian_noise(rng, dim, spec.blob_sigma);
    const auto& c = centers[static_cast<std::size_t>(label)];
    for (std::size_t j = 0; j < dim; ++j) x[j] += c[j];
    data.x.push_back(std::move(x));
    data.y.push_back(label);
  }
  return data;
}

std::size_t param_count(const MlpSpec& spec) {
  spec.validate();
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
    n += static_cast<std::size_t>(spec.layer_sizes[l + 1]) *
         static_cast<std::size_t>(spec.layer_sizes[l]);
  }
  return n;
}

ParamVector init_params(const MlpSpec& spec, RngStream& rng) {
  spec.validate();
  ParamVector params(param_count(spec));
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
    const std::size_t rows = static_cast<std::size_t>(spec.layer_sizes[l + 1]);
    const std::size_t cols = static_cast<std::size_t>(spec.layer_sizes[l]);
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    for (std::size_t i = 0; i < rows * cols; ++i) {
      params[off + i] = bound * (2.0 * rng.next_unit() - 1.0);
    }
    off += rows * cols;
  }
  return params;
}

std::pair<double, ParamVector> mlp_forward_backward(
    const MlpSpec& spec, const Dataset& data, const ParamVector& params,
    const std::vector<std::size_t>& batch) {
  spec.validate();
  if (params.size() != param_count(spec)) {
    throw std::invalid_argument(
        "mlp: params length " + std::to_string(params.size()) +
        " does not match the layer sizes' parameter count " +
        std::to_string(param_count(spec)));
  }
  if (batch.empty()) throw std::invalid_argument("mlp: batch must be non-empty");
  for (std::size_t idx : batch) {
    if (idx >= data.x.size()) {
      throw std::invalid_argument("mlp: batch index out of range");
    }
  }
  return forward_backward_impl<MlpReal>(spec, data, params, batch);
}

std::vector<LayerNorm> heterogeneity_report(const MlpSpec& spec,
                                            const ParamVector& params) {
  const Dataset data = make_blob_dataset(spec.layer_sizes.front(), spec.dataset);
  const auto [loss, grad] =
      mlp_forward_backward(spec, data, params, all_indices(data));
  (void)loss;
  const auto offs = layer_offsets(spec);
  std::vector<LayerNorm> rows;
  for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
    double sq = 0.0;
    for (std::size_t i = offs[l]; i < offs[l + 1]; ++i) sq += grad[i] * grad[i];
    rows.push_back({"W" + std::to_string(l), std::sqrt(sq)});
  }
  return rows;
}

Problem mlp_problem(const MlpSpec& spec) {
  spec.validate();
  auto sp = std::make_shared<const MlpSpec>(spec);
  auto data = std::make_shared<const Dataset>(
      make_blob_dataset(spec.layer_sizes.front(), spec.dataset));
  auto all = std::make_shared<const std::vector<std::size_t>>(all_indices(*data));

  Problem p;
  p.name = "mlp";
  p.dim = param_count(spec);
  p.noise_sigma = 0.0;
  p.default_x0 = ParamVector(p.dim, 0.0);
  p.loss = [sp, data, all](const ParamVector& w) {
    if (w.size() != param_count(*sp)) {
      throw std::invalid_argument("mlp: params length mismatch");
    }
    return forward_loss_impl<MlpReal>(*sp, *data, w, *all);
  };
  p.grad = [sp, data, all](const ParamVector& w) {
    return mlp_forward_backward(*sp, *data, w, *all).second;
  };
  p.stochastic_grad = [sp, data, all](const ParamVector& w, RngStream& rng) {
    const std::size_t n = data->x.size();
    if (static_cast<std::size_t>(sp->batch_size) >= n) {
      return mlp_forward_backward(*sp, *data, w, *all).second;
    }
    std::vector<std::size_t> batch(static_cast<std::size_t>(sp->batch_size));
    for (auto& idx : batch) {
      idx = static_cast<std::size_t>(rng.next_below(n));
    }
    return mlp_forward_backward(*sp, *data, w, batch).second;
  };
  p.init = [sp](RngStream& rng) { return init_params(*sp, rng); };
  return p;
}

}  // namespace optikit::problems
