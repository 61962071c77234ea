#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "optikit/problems.hpp"
#include "optikit/rng.hpp"
#include "optikit/vec.hpp"

namespace optikit::problems {

// Synthetic Gaussian-blob classification data. The dataset is generated, not
// shipped: the seed fully determines it.
struct BlobDatasetSpec {
  long n_samples = 512;
  int n_classes = 4;
  double blob_sigma = 0.5;
  std::uint64_t seed = 1;
  void validate() const;
};

// Fully-connected classifier with bias-free layers: layer l maps
// activations through W_l (shape layer_sizes[l+1] x layer_sizes[l]),
// followed by the activation on hidden layers and raw logits at the output.
// Loss is mean softmax cross-entropy over the batch.
struct MlpSpec {
  std::vector<int> layer_sizes;  // input, hidden..., output (= n_classes)
  enum class Activation { Tanh, Relu };
  Activation activation = Activation::Tanh;
  BlobDatasetSpec dataset;
  int batch_size = 64;
  void validate() const;
};

struct Dataset {
  std::vector<ParamVector> x;
  std::vector<int> y;
};

Dataset make_blob_dataset(int input_dim, const BlobDatasetSpec& spec);

std::size_t param_count(const MlpSpec& spec);

// Symmetric fan-in-scaled uniform init: each weight of layer l is drawn from
// U(-1/sqrt(fan_in), +1/sqrt(fan_in)). Fixed because spike behaviour is
// init-sensitive.
ParamVector init_params(const MlpSpec& spec, RngStream& rng);

// Mean softmax cross-entropy over the batch (indices into the dataset) and
// its exact backprop gradient. Throws DomainError naming the layer if the
// forward pass produces a non-finite value.
std::pair<double, ParamVector> mlp_forward_backward(
    const MlpSpec& spec, const Dataset& data, const ParamVector& params,
    const std::vector<std::size_t>& batch);

struct LayerNorm {
  std::string layer;
  double norm = 0.0;
};

// Per-layer l2 norm of the full-batch gradient at the given params.
std::vector<LayerNorm> heterogeneity_report(const MlpSpec& spec,
                                            const ParamVector& params);

// Problem wrapper: loss/grad run over the full dataset; stochastic_grad
// samples batch_size indices with replacement from the caller's stream.
Problem mlp_problem(const MlpSpec& spec);

// Parses the classifier options from a run config (strict keys: layer_sizes,
// activation, batch_size, dataset). ctx names the enclosing config in errors.
MlpSpec parse_mlp_spec(const nlohmann::json& options, const std::string& ctx);

}  // namespace optikit::problems
