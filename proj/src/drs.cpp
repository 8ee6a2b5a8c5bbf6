#include "autoloss/drs.hpp"

#include <cmath>

#include "autoloss/error.hpp"

namespace autoloss {

std::string drs_kind_name(DrsKind kind) {
    return kind == DrsKind::deepfm ? "deepfm" : "ipnn";
}

DrsKind drs_kind_from_name(const std::string& name) {
    if (name == "deepfm") return DrsKind::deepfm;
    if (name == "ipnn") return DrsKind::ipnn;
    throw ConfigError("model: unknown kind '" + name + "' (expected deepfm|ipnn)");
}

Tensor embed_lookup(const Batch& batch, std::span<const Parameter> tables,
                    std::size_t embedding_dim) {
    const std::size_t m = batch.num_fields;
    if (tables.size() != m) {
        throw DimError("embed: batch has " + std::to_string(m) + " fields, model has " +
                       std::to_string(tables.size()) + " tables");
    }
    const std::size_t d = embedding_dim;
    Tensor flat({batch.batch_size, m * d});
    for (std::size_t b = 0; b < batch.batch_size; ++b) {
        for (std::size_t i = 0; i < m; ++i) {
            const std::uint32_t idx = batch.index(b, i);
            const std::size_t rows = tables[i].value.dim(0);
            if (idx >= rows) {
                throw DataError("embed: field " + std::to_string(i) + " index " +
                                std::to_string(idx) + " out of range (cardinality " +
                                std::to_string(rows) + ")");
            }
            const double* src = tables[i].value.data() + static_cast<std::size_t>(idx) * d;
            double* dst = flat.data() + (b * m + i) * d;
            std::copy(src, src + d, dst);
        }
    }
    return flat;
}

void embed_scatter_grad(const Batch& batch, const Tensor& dflat, std::span<Parameter> tables,
                        std::size_t embedding_dim) {
    const std::size_t m = batch.num_fields;
    const std::size_t d = embedding_dim;
    for (std::size_t b = 0; b < batch.batch_size; ++b) {
        for (std::size_t i = 0; i < m; ++i) {
            const std::uint32_t idx = batch.index(b, i);
            const double* src = dflat.data() + (b * m + i) * d;
            double* dst = tables[i].grad.data() + static_cast<std::size_t>(idx) * d;
            for (std::size_t c = 0; c < d; ++c) {
                dst[c] += src[c];
            }
        }
    }
}

Tensor fm_linear_term(const Batch& batch, std::span<const Parameter> linear_weights) {
    const std::size_t m = batch.num_fields;
    Tensor out({batch.batch_size, 1});
    for (std::size_t b = 0; b < batch.batch_size; ++b) {
        double sum = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            sum += linear_weights[i].value[batch.index(b, i)];
        }
        out[b] = sum;
    }
    return out;
}

void fm_linear_term_backward(const Batch& batch, const Tensor& dlin,
                             std::span<Parameter> linear_weights) {
    const std::size_t m = batch.num_fields;
    for (std::size_t b = 0; b < batch.batch_size; ++b) {
        for (std::size_t i = 0; i < m; ++i) {
            linear_weights[i].grad[batch.index(b, i)] += dlin[b];
        }
    }
}

Tensor fm_interaction(const Batch& batch, const Tensor& flat_embed,
                      std::span<const Parameter> linear_weights, std::size_t embedding_dim,
                      FmCache& cache) {
    const std::size_t m = batch.num_fields;
    if (m < 2) {
        throw ConfigError("fm interaction: needs at least 2 fields, got " + std::to_string(m));
    }
    const std::size_t d = embedding_dim;
    const std::size_t batch_size = flat_embed.rows();

    Tensor out = fm_linear_term(batch, linear_weights);
    cache.field_sum = Tensor({batch_size, d});
    for (std::size_t b = 0; b < batch_size; ++b) {
        const double* e = flat_embed.data() + b * m * d;
        double* s = cache.field_sum.data() + b * d;
        double sq = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t c = 0; c < d; ++c) {
                const double v = e[i * d + c];
                s[c] += v;
                sq += v * v;
            }
        }
        double sum_sq = 0.0;
        for (std::size_t c = 0; c < d; ++c) sum_sq += s[c] * s[c];
        out[b] += 0.5 * (sum_sq - sq);
    }
    return out;
}

void fm_interaction_backward(const Batch& batch, const Tensor& dlfm, const Tensor& flat_embed,
                             const FmCache& cache, std::span<Parameter> linear_weights,
                             Tensor& dflat, std::size_t embedding_dim) {
    const std::size_t m = batch.num_fields;
    const std::size_t d = embedding_dim;
    const std::size_t batch_size = flat_embed.rows();

    fm_linear_term_backward(batch, dlfm, linear_weights);
    // d(pair sum)/d(e_i) = field_sum - e_i.
    for (std::size_t b = 0; b < batch_size; ++b) {
        const double g = dlfm[b];
        const double* e = flat_embed.data() + b * m * d;
        const double* s = cache.field_sum.data() + b * d;
        double* out = dflat.data() + b * m * d;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t c = 0; c < d; ++c) {
                out[i * d + c] += g * (s[c] - e[i * d + c]);
            }
        }
    }
}

Tensor fm_pairwise_naive(const Tensor& flat_embed, std::size_t num_fields,
                         std::size_t embedding_dim) {
    const std::size_t m = num_fields;
    const std::size_t d = embedding_dim;
    const std::size_t batch_size = flat_embed.rows();
    Tensor out({batch_size, 1});
    for (std::size_t b = 0; b < batch_size; ++b) {
        const double* e = flat_embed.data() + b * m * d;
        double sum = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = i + 1; j < m; ++j) {
                for (std::size_t c = 0; c < d; ++c) {
                    sum += e[i * d + c] * e[j * d + c];
                }
            }
        }
        out[b] = sum;
    }
    return out;
}

Tensor pairwise_inner_products(const Tensor& flat_embed, std::size_t num_fields,
                               std::size_t embedding_dim) {
    const std::size_t m = num_fields;
    if (m < 2) {
        throw ConfigError("pairwise products: needs at least 2 fields, got " +
                          std::to_string(m));
    }
    const std::size_t d = embedding_dim;
    const std::size_t batch_size = flat_embed.rows();
    const std::size_t num_pairs = m * (m - 1) / 2;
    Tensor out({batch_size, num_pairs});
    for (std::size_t b = 0; b < batch_size; ++b) {
        const double* e = flat_embed.data() + b * m * d;
        double* o = out.data() + b * num_pairs;
        std::size_t p = 0;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = i + 1; j < m; ++j, ++p) {
                double dot = 0.0;
                for (std::size_t c = 0; c < d; ++c) {
                    dot += e[i * d + c] * e[j * d + c];
                }
                o[p] = dot;
            }
        }
    }
    return out;
}

void pairwise_inner_products_backward(const Tensor& dprods, const Tensor& flat_embed,
                                      Tensor& dflat, std::size_t num_fields,
                                      std::size_t embedding_dim) {
    const std::size_t m = num_fields;
    const std::size_t d = embedding_dim;
    const std::size_t batch_size = flat_embed.rows();
    const std::size_t num_pairs = m * (m - 1) / 2;
    if (dprods.rows() != batch_size || dprods.cols() != num_pairs) {
        throw DimError("pairwise backward: upstream " + dprods.shape_str() + " expected " +
                       Tensor({batch_size, num_pairs}).shape_str());
    }
    for (std::size_t b = 0; b < batch_size; ++b) {
        const double* e = flat_embed.data() + b * m * d;
        const double* g = dprods.data() + b * num_pairs;
        double* out = dflat.data() + b * m * d;
        std::size_t p = 0;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = i + 1; j < m; ++j, ++p) {
                for (std::size_t c = 0; c < d; ++c) {
                    out[i * d + c] += g[p] * e[j * d + c];
                    out[j * d + c] += g[p] * e[i * d + c];
                }
            }
        }
    }
}

namespace {

std::vector<std::size_t> schema_cardinalities(const FeatureSchema& schema) {
    std::vector<std::size_t> out;
    out.reserve(schema.fields.size());
    for (const auto& f : schema.fields) {
        out.push_back(f.cardinality());
    }
    return out;
}

}  // namespace

DrsModel::DrsModel(const FeatureSchema& schema, const DrsConfig& cfg, std::uint64_t init_seed)
    : task_(schema.task),
      cfg_(cfg),
      cardinalities_(schema_cardinalities(schema)),
      mlp_([&] {
          // Tower construction happens before the member initializers below
          // run, so compute the input width from schema + config directly.
          const std::size_t m = schema.fields.size();
          const std::size_t flat = m * cfg.embedding_dim;
          std::size_t in = flat;
          if (cfg.kind == DrsKind::ipnn) {
              in = m * (m - 1) / 2 + flat + 1;
          }
          RngStream tmp(RngStream::derive(init_seed, "drs-mlp"));
          return MlpTower(in, cfg.mlp_width, cfg.mlp_layers, cfg.dropout_rate, tmp);
      }()),
      head_w_(Tensor({cfg.mlp_width, task_.pred_dim()})),
      head_b_(Tensor({task_.pred_dim()})) {
    if (cardinalities_.size() < 2) {
        throw ConfigError("model: needs at least 2 feature fields");
    }
    RngStream embed_rng(RngStream::derive(init_seed, "drs-embed"));
    for (std::size_t i = 0; i < cardinalities_.size(); ++i) {
        Parameter table(Tensor({cardinalities_[i], cfg_.embedding_dim}));
        init_gaussian(table.value, 0.01, embed_rng);
        embeddings_.push_back(std::move(table));
        Parameter lin(Tensor({cardinalities_[i]}));
        init_gaussian(lin.value, 0.01, embed_rng);
        linear_.push_back(std::move(lin));
    }
    RngStream head_rng(RngStream::derive(init_seed, "drs-head"));
    init_glorot_uniform(head_w_.value, cfg_.mlp_width, task_.pred_dim(), head_rng);
}

std::size_t DrsModel::mlp_input_dim() const {
    const std::size_t m = cardinalities_.size();
    const std::size_t flat = m * cfg_.embedding_dim;
    return cfg_.kind == DrsKind::deepfm ? flat : m * (m - 1) / 2 + flat + 1;
}

Tensor DrsModel::forward(const Batch& batch, bool train, RngStream* dropout_rng,
                         DrsCache& cache) {
    if (batch.num_fields != cardinalities_.size()) {
        throw DimError("model: batch has " + std::to_string(batch.num_fields) +
                       " fields, model expects " + std::to_string(cardinalities_.size()));
    }
    const std::size_t m = batch.num_fields;
    const std::size_t d = cfg_.embedding_dim;
    cache.batch = batch;
    cache.flat_embed = embed_lookup(batch, embeddings_, d);

    Tensor head_in;
    if (cfg_.kind == DrsKind::deepfm) {
        Tensor lfm = fm_interaction(batch, cache.flat_embed, linear_, d, cache.fm);
        Tensor mlp_out = mlp_.forward(cache.flat_embed, train, dropout_rng, cache.mlp);
        // Scalar interaction output added to every MLP unit before the head.
        head_in = std::move(mlp_out);
        for (std::size_t b = 0; b < head_in.rows(); ++b) {
            for (std::size_t c = 0; c < head_in.cols(); ++c) {
                head_in.at(b, c) += lfm[b];
            }
        }
    } else {
        Tensor prods = pairwise_inner_products(cache.flat_embed, m, d);
        Tensor lin = fm_linear_term(batch, linear_);
        const std::size_t flat = m * d;
        const std::size_t num_pairs = prods.cols();
        cache.mlp_input = Tensor({batch.batch_size, num_pairs + flat + 1});
        for (std::size_t b = 0; b < batch.batch_size; ++b) {
            double* dst = cache.mlp_input.data() + b * (num_pairs + flat + 1);
            std::copy(prods.data() + b * num_pairs, prods.data() + (b + 1) * num_pairs, dst);
            std::copy(cache.flat_embed.data() + b * flat,
                      cache.flat_embed.data() + (b + 1) * flat, dst + num_pairs);
            dst[num_pairs + flat] = lin[b];
        }
        head_in = mlp_.forward(cache.mlp_input, train, dropout_rng, cache.mlp);
    }

    Tensor logits = affine_forward(head_in, head_w_, head_b_, cache.head);
    switch (task_.kind) {
        case TaskKind::binary:
            return sigmoid_forward(logits, cache.sigmoid);
        case TaskKind::multiclass:
            return softmax_forward(logits, cache.softmax);
        case TaskKind::regression:
            return logits;
    }
    throw ConfigError("model: unknown task kind");
}

void DrsModel::backward(const Tensor& dpred, const DrsCache& cache) {
    Tensor dlogits;
    switch (task_.kind) {
        case TaskKind::binary:
            dlogits = sigmoid_backward(dpred, cache.sigmoid);
            break;
        case TaskKind::multiclass:
            dlogits = softmax_backward(dpred, cache.softmax);
            break;
        case TaskKind::regression:
            dlogits = dpred;
            break;
    }
    Tensor dhead_in = affine_backward(dlogits, cache.head, head_w_, head_b_);

    const std::size_t m = cache.batch.num_fields;
    const std::size_t d = cfg_.embedding_dim;
    Tensor dflat({cache.batch.batch_size, m * d});

    if (cfg_.kind == DrsKind::deepfm) {
        // Broadcast add in forward: l_fm gradient is the row sum.
        Tensor dlfm({cache.batch.batch_size, 1});
        for (std::size_t b = 0; b < dhead_in.rows(); ++b) {
            double sum = 0.0;
            for (std::size_t c = 0; c < dhead_in.cols(); ++c) {
                sum += dhead_in.at(b, c);
            }
            dlfm[b] = sum;
        }
        Tensor dmlp_in = mlp_.backward(dhead_in, cache.mlp);
        dflat.add(dmlp_in);
        fm_interaction_backward(cache.batch, dlfm, cache.flat_embed, cache.fm, linear_, dflat,
                                d);
    } else {
        Tensor dmlp_in = mlp_.backward(dhead_in, cache.mlp);
        const std::size_t num_pairs = m * (m - 1) / 2;
        const std::size_t flat = m * d;
        Tensor dprods({cache.batch.batch_size, num_pairs});
        Tensor dlin({cache.batch.batch_size, 1});
        for (std::size_t b = 0; b < cache.batch.batch_size; ++b) {
            const double* src = dmlp_in.data() + b * (num_pairs + flat + 1);
            std::copy(src, src + num_pairs, dprods.data() + b * num_pairs);
            double* df = dflat.data() + b * flat;
            for (std::size_t c = 0; c < flat; ++c) {
                df[c] += src[num_pairs + c];
            }
            dlin[b] = src[num_pairs + flat];
        }
        pairwise_inner_products_backward(dprods, cache.flat_embed, dflat, m, d);
        fm_linear_term_backward(cache.batch, dlin, linear_);
    }

    embed_scatter_grad(cache.batch, dflat, embeddings_, d);
}

std::vector<NamedParam> DrsModel::named_params() {
    std::vector<NamedParam> out;
    for (std::size_t i = 0; i < embeddings_.size(); ++i) {
        out.push_back({"embed." + std::to_string(i), &embeddings_[i]});
        out.push_back({"linear." + std::to_string(i), &linear_[i]});
    }
    mlp_.collect_params("mlp", out);
    out.push_back({"head.weight", &head_w_});
    out.push_back({"head.bias", &head_b_});
    return out;
}

std::vector<NamedBuffer> DrsModel::named_buffers() {
    std::vector<NamedBuffer> out;
    mlp_.collect_buffers("mlp", out);
    return out;
}

}  // namespace autoloss
