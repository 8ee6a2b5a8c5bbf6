#include "autoloss/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "autoloss/error.hpp"
#include "autoloss/rng.hpp"

namespace autoloss {

void SynthConfig::validate() const {
    if (num_fields < 2) {
        throw ConfigError("synth: need at least 2 fields for pairwise structure");
    }
    if (count < 100) {
        throw ConfigError("synth: need at least 100 examples, got " + std::to_string(count));
    }
    if (cardinalities.empty() ||
        (cardinalities.size() != 1 && cardinalities.size() != num_fields)) {
        throw ConfigError("synth: cardinalities must have 1 entry or one per field");
    }
    for (std::size_t c : cardinalities) {
        if (c < 2) {
            throw ConfigError("synth: per-field cardinality must be >= 2");
        }
    }
    if (num_numeric > num_fields) {
        throw ConfigError("synth: more numeric fields than fields");
    }
    if (label_noise < 0.0 || (task.is_classification() && label_noise >= 0.5)) {
        throw ConfigError("synth: classification label noise must be in [0, 0.5)");
    }
    if (latent_dim == 0) {
        throw ConfigError("synth: latent dim must be >= 1");
    }
    if (task.kind == TaskKind::multiclass && task.num_classes < 2) {
        throw ConfigError("synth: multiclass needs >= 2 classes");
    }
}

namespace {

std::size_t field_domain(const SynthConfig& cfg, std::size_t field) {
    return cfg.cardinalities.size() == 1 ? cfg.cardinalities[0] : cfg.cardinalities[field];
}

// Standard normal CDF, used to map standardized scores to balanced classes.
double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

}  // namespace

SynthData generate_synth_raw(const SynthConfig& cfg) {
    cfg.validate();

    const std::size_t m = cfg.num_fields;
    SynthData out;

    // Schema: numeric fields bucketize integer-aligned floats back onto the
    // planted value index; categorical fields use vocabulary strings v1..vK.
    for (std::size_t i = 0; i < m; ++i) {
        FieldDescriptor f;
        f.name = "f" + std::to_string(i);
        const std::size_t domain = field_domain(cfg, i);
        if (i < cfg.num_numeric) {
            f.kind = FieldDescriptor::Kind::numeric;
            for (std::size_t b = 1; b < domain; ++b) {
                f.boundaries.push_back(static_cast<double>(b));
            }
        } else {
            f.kind = FieldDescriptor::Kind::categorical;
            for (std::size_t v = 1; v <= domain; ++v) {
                f.vocabulary.push_back("v" + std::to_string(v));
            }
        }
        out.schema.fields.push_back(std::move(f));
    }
    out.schema.task = cfg.task;
    out.schema.label_column = "label";
    out.schema.validate();

    RngStream table_rng(RngStream::derive(cfg.seed, "synth-tables"));
    RngStream sample_rng(RngStream::derive(cfg.seed, "synth-samples"));
    RngStream label_rng(RngStream::derive(cfg.seed, "synth-labels"));

    // Hidden per-value parameters. Tables are indexed by the planted value
    // index (0-based within the field's domain).
    const std::size_t r = cfg.latent_dim;
    std::vector<std::vector<double>> latent(m);   // domain x r, flattened
    std::vector<std::vector<double>> linear(m);   // domain
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t domain = field_domain(cfg, i);
        latent[i].resize(domain * r);
        linear[i].resize(domain);
        for (double& v : latent[i]) v = table_rng.gaussian();
        for (double& v : linear[i]) v = table_rng.gaussian();
    }

    const double pair_norm =
        std::sqrt(static_cast<double>(m * (m - 1) / 2) * static_cast<double>(r));
    const double lin_norm = std::sqrt(static_cast<double>(m));

    std::vector<std::vector<std::size_t>> planted(cfg.count,
                                                  std::vector<std::size_t>(m));
    std::vector<double> scores(cfg.count);
    std::vector<double> acc(r);
    for (std::size_t n = 0; n < cfg.count; ++n) {
        double lin = 0.0;
        std::fill(acc.begin(), acc.end(), 0.0);
        double sq = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t v = sample_rng.uniform_below(field_domain(cfg, i));
            planted[n][i] = v;
            lin += linear[i][v];
            const double* z = latent[i].data() + v * r;
            double norm_i = 0.0;
            for (std::size_t d = 0; d < r; ++d) {
                acc[d] += z[d];
                norm_i += z[d] * z[d];
            }
            sq += norm_i;
        }
        double pair_sum = 0.0;
        for (std::size_t d = 0; d < r; ++d) pair_sum += acc[d] * acc[d];
        pair_sum = 0.5 * (pair_sum - sq);
        scores[n] = cfg.linear_scale * lin / lin_norm +
                    cfg.interaction_scale * pair_sum / pair_norm;
    }

    // Standardize scores over the generated set.
    double mean = std::accumulate(scores.begin(), scores.end(), 0.0) /
                  static_cast<double>(cfg.count);
    double var = 0.0;
    for (double s : scores) var += (s - mean) * (s - mean);
    var /= static_cast<double>(cfg.count);
    const double inv_std = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;

    out.labels.resize(cfg.count);
    for (std::size_t n = 0; n < cfg.count; ++n) {
        const double s = (scores[n] - mean) * inv_std;
        switch (cfg.task.kind) {
            case TaskKind::binary: {
                int y = s > 0.0 ? 1 : 0;
                if (label_rng.uniform01() < cfg.label_noise) y = 1 - y;
                out.labels[n] = static_cast<double>(y);
                break;
            }
            case TaskKind::multiclass: {
                const std::size_t k = cfg.task.num_classes;
                auto cls = static_cast<std::size_t>(normal_cdf(s) * static_cast<double>(k));
                cls = std::min(cls, k - 1);
                if (label_rng.uniform01() < cfg.label_noise) {
                    cls = label_rng.uniform_below(k);
                }
                out.labels[n] = static_cast<double>(cls);
                break;
            }
            case TaskKind::regression:
                out.labels[n] = s + cfg.label_noise * label_rng.gaussian();
                break;
        }
    }

    // Raw rows. Numeric raw values stay strictly inside the planted bucket
    // even after 4-decimal formatting.
    out.rows.assign(cfg.count, std::vector<std::string>(m));
    char buf[32];
    for (std::size_t n = 0; n < cfg.count; ++n) {
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t v = planted[n][i];
            if (i < cfg.num_numeric) {
                double raw = static_cast<double>(v) + 0.05 + 0.9 * sample_rng.uniform01();
                std::snprintf(buf, sizeof(buf), "%.4f", raw);
                out.rows[n][i] = buf;
            } else {
                out.rows[n][i] = "v" + std::to_string(v + 1);
            }
        }
    }
    return out;
}

Dataset generate_synth(const SynthConfig& cfg) {
    SynthData raw = generate_synth_raw(cfg);
    SchemaEncoder encoder(raw.schema);
    Dataset ds{std::move(raw.schema), {}};
    ds.examples.reserve(raw.rows.size());
    for (std::size_t n = 0; n < raw.rows.size(); ++n) {
        ds.examples.push_back(encoder.encode(raw.rows[n], raw.labels[n]));
    }
    return ds;
}

void write_synth_csv(const SynthData& data, const std::string& csv_path) {
    std::ofstream out(csv_path);
    if (!out) {
        throw DataError("synth: cannot write '" + csv_path + "'");
    }
    for (const auto& f : data.schema.fields) {
        out << f.name << ',';
    }
    out << data.schema.label_column << '\n';
    const bool regression = data.schema.task.kind == TaskKind::regression;
    char buf[32];
    for (std::size_t n = 0; n < data.rows.size(); ++n) {
        for (const auto& cell : data.rows[n]) {
            out << cell << ',';
        }
        if (regression) {
            std::snprintf(buf, sizeof(buf), "%.17g", data.labels[n]);
            out << buf << '\n';
        } else {
            out << static_cast<long long>(data.labels[n]) << '\n';
        }
    }
}

}  // namespace autoloss
