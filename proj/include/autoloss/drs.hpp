#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "autoloss/dataset.hpp"
#include "autoloss/mlp.hpp"
#include "autoloss/ops.hpp"
#include "autoloss/rng.hpp"
#include "autoloss/schema.hpp"
#include "autoloss/tensor.hpp"

namespace autoloss {

enum class DrsKind { deepfm, ipnn };

std::string drs_kind_name(DrsKind kind);
DrsKind drs_kind_from_name(const std::string& name);

struct DrsConfig {
    DrsKind kind = DrsKind::deepfm;
    std::size_t embedding_dim = 16;
    std::size_t mlp_width = 128;
    std::size_t mlp_layers = 2;
    double dropout_rate = 0.2;
};

// Embedding lookup: rows of each per-field table selected by the batch
// indices, concatenated to B x (m*d). Backward scatters into looked-up rows
// only.
Tensor embed_lookup(const Batch& batch, std::span<const Parameter> tables,
                    std::size_t embedding_dim);
void embed_scatter_grad(const Batch& batch, const Tensor& dflat,
                        std::span<Parameter> tables, std::size_t embedding_dim);

struct FmCache {
    Tensor field_sum;  // B x d, sum of field embeddings per example
};

// Factorization-machine interaction: per-example linear term plus the sum of
// pairwise inner products, computed with the O(m*d) identity
// sum_{i<j} <e_i,e_j> = 0.5 * (|sum_i e_i|^2 - sum_i |e_i|^2).
Tensor fm_interaction(const Batch& batch, const Tensor& flat_embed,
                      std::span<const Parameter> linear_weights, std::size_t embedding_dim,
                      FmCache& cache);
// dlfm: B x 1. Accumulates into linear weight grads and the flat embedding grad.
void fm_interaction_backward(const Batch& batch, const Tensor& dlfm, const Tensor& flat_embed,
                             const FmCache& cache, std::span<Parameter> linear_weights,
                             Tensor& dflat, std::size_t embedding_dim);

// Reference O(m^2 d) pairwise sum, kept as the oracle for the identity above.
Tensor fm_pairwise_naive(const Tensor& flat_embed, std::size_t num_fields,
                         std::size_t embedding_dim);

// All <e_i, e_j> for i<j in lexicographic order, B x C(m,2).
Tensor pairwise_inner_products(const Tensor& flat_embed, std::size_t num_fields,
                               std::size_t embedding_dim);
void pairwise_inner_products_backward(const Tensor& dprods, const Tensor& flat_embed,
                                      Tensor& dflat, std::size_t num_fields,
                                      std::size_t embedding_dim);

// Per-example linear term sum_i w_i[x_i] on its own (IPNN feeds it to the MLP).
Tensor fm_linear_term(const Batch& batch, std::span<const Parameter> linear_weights);
void fm_linear_term_backward(const Batch& batch, const Tensor& dlin,
                             std::span<Parameter> linear_weights);

struct DrsCache {
    Batch batch;
    Tensor flat_embed;      // B x (m*d)
    FmCache fm;             // deepfm
    Tensor mlp_input;       // ipnn
    MlpCache mlp;
    AffineCache head;
    SigmoidCache sigmoid;   // binary head
    SoftmaxCache softmax;   // multiclass head
};

// DeepFM / IPNN recommender. Assembly by kind:
//   deepfm: head input = MLP(flat E) + l_fm broadcast per example
//   ipnn:   MLP input  = [pairwise products | flat E | linear term]
// Head activation follows the task: sigmoid (binary), softmax (multiclass),
// identity (regression).
class DrsModel {
public:
    DrsModel(const FeatureSchema& schema, const DrsConfig& cfg, std::uint64_t init_seed);

    // Returns predictions: B x 1 (binary/regression) or B x k (multiclass).
    Tensor forward(const Batch& batch, bool train, RngStream* dropout_rng, DrsCache& cache);
    // dpred = dL/d(prediction); accumulates into all parameter grads.
    void backward(const Tensor& dpred, const DrsCache& cache);

    std::vector<NamedParam> named_params();
    std::vector<NamedBuffer> named_buffers();

    const TaskSpec& task() const { return task_; }
    DrsKind kind() const { return cfg_.kind; }
    const DrsConfig& config() const { return cfg_; }
    std::size_t num_fields() const { return cardinalities_.size(); }
    const std::vector<std::size_t>& cardinalities() const { return cardinalities_; }

private:
    std::size_t mlp_input_dim() const;

    TaskSpec task_;
    DrsConfig cfg_;
    std::vector<std::size_t> cardinalities_;
    std::vector<Parameter> embeddings_;     // per field: u_i x d
    std::vector<Parameter> linear_;         // per field: u_i x 1
    MlpTower mlp_;
    Parameter head_w_;
    Parameter head_b_;
};

}  // namespace autoloss
