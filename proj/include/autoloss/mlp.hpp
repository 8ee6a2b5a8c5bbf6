#pragma once

#include <string>
#include <vector>

#include "autoloss/ops.hpp"
#include "autoloss/rng.hpp"
#include "autoloss/tensor.hpp"

namespace autoloss {

struct MlpLayerCache {
    AffineCache affine;
    BatchNormCache bn;
    ReluCache relu;
    DropoutCache dropout;
};

struct MlpCache {
    std::vector<MlpLayerCache> layers;
};

// Fully-connected tower: per layer, affine -> batchnorm -> relu -> dropout.
// Both the recommender body and the controller body use this block.
class MlpTower {
public:
    MlpTower(std::size_t in_dim, std::size_t width, std::size_t num_layers, double dropout_rate,
             RngStream& init_rng);

    Tensor forward(const Tensor& x, bool train, RngStream* dropout_rng, MlpCache& cache);
    // Returns dL/dx, accumulating layer parameter grads.
    Tensor backward(const Tensor& dy, const MlpCache& cache);

    void collect_params(const std::string& prefix, std::vector<NamedParam>& out);
    void collect_buffers(const std::string& prefix, std::vector<NamedBuffer>& out);

    std::size_t in_dim() const { return in_dim_; }
    std::size_t out_dim() const { return layers_.empty() ? in_dim_ : width_; }

private:
    struct Layer {
        Parameter weight;
        Parameter bias;
        BatchNorm bn;
    };

    std::size_t in_dim_;
    std::size_t width_;
    double dropout_rate_;
    std::vector<Layer> layers_;
};

}  // namespace autoloss
