#include "autoloss/mlp.hpp"

#include "autoloss/error.hpp"

namespace autoloss {

MlpTower::MlpTower(std::size_t in_dim, std::size_t width, std::size_t num_layers,
                   double dropout_rate, RngStream& init_rng)
    : in_dim_(in_dim), width_(width), dropout_rate_(dropout_rate) {
    std::size_t fan_in = in_dim;
    for (std::size_t l = 0; l < num_layers; ++l) {
        Layer layer{Parameter(Tensor({fan_in, width})), Parameter(Tensor({width})),
                    BatchNorm(width)};
        init_glorot_uniform(layer.weight.value, fan_in, width, init_rng);
        layers_.push_back(std::move(layer));
        fan_in = width;
    }
}

Tensor MlpTower::forward(const Tensor& x, bool train, RngStream* dropout_rng, MlpCache& cache) {
    cache.layers.assign(layers_.size(), MlpLayerCache{});
    Tensor h = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        MlpLayerCache& lc = cache.layers[l];
        h = affine_forward(h, layers_[l].weight, layers_[l].bias, lc.affine);
        h = layers_[l].bn.forward(h, train, lc.bn);
        h = relu_forward(h, lc.relu);
        h = dropout_forward(h, dropout_rate_, train, dropout_rng, lc.dropout);
    }
    return h;
}

Tensor MlpTower::backward(const Tensor& dy, const MlpCache& cache) {
    if (cache.layers.size() != layers_.size()) {
        throw DimError("mlp backward: cache does not match tower depth");
    }
    Tensor d = dy;
    for (std::size_t l = layers_.size(); l-- > 0;) {
        const MlpLayerCache& lc = cache.layers[l];
        d = dropout_backward(d, lc.dropout);
        d = relu_backward(d, lc.relu);
        d = layers_[l].bn.backward(d, lc.bn);
        d = affine_backward(d, lc.affine, layers_[l].weight, layers_[l].bias);
    }
    return d;
}

void MlpTower::collect_params(const std::string& prefix, std::vector<NamedParam>& out) {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        std::string base = prefix + ".fc" + std::to_string(l);
        out.push_back({base + ".weight", &layers_[l].weight});
        out.push_back({base + ".bias", &layers_[l].bias});
        layers_[l].bn.collect_params(base + ".bn", out);
    }
}

void MlpTower::collect_buffers(const std::string& prefix, std::vector<NamedBuffer>& out) {
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        layers_[l].bn.collect_buffers(prefix + ".fc" + std::to_string(l) + ".bn", out);
    }
}

}  // namespace autoloss
