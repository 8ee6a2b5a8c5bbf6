#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "autoloss/dataset.hpp"
#include "autoloss/schema.hpp"

namespace autoloss {

// Synthetic tabular benchmark with planted structure: the label is driven by
// a hidden per-value linear term plus a low-rank pairwise interaction between
// field values, so factorization-machine-family models can learn it while a
// label-shuffled copy cannot.
struct SynthConfig {
    std::size_t num_fields = 6;
    // Value-domain size per field; a single entry broadcasts to all fields.
    // For categorical fields this is the vocabulary size (the encoded
    // cardinality adds the OOV slot).
    std::vector<std::size_t> cardinalities = {40};
    std::size_t num_numeric = 0;  // the first num_numeric fields emit bucketized floats
    std::size_t count = 50000;
    TaskSpec task{TaskKind::binary, 2};
    std::uint64_t seed = 1;
    // Classification: label flip probability. Regression: noise stddev.
    double label_noise = 0.15;
    std::size_t latent_dim = 4;
    double linear_scale = 0.5;
    double interaction_scale = 1.0;

    void validate() const;
};

struct SynthData {
    FeatureSchema schema;
    std::vector<std::vector<std::string>> rows;  // raw values in schema field order
    std::vector<double> labels;
};

SynthData generate_synth_raw(const SynthConfig& cfg);
Dataset generate_synth(const SynthConfig& cfg);

// Writes data.csv conforming to the schema (header: field names + label column).
void write_synth_csv(const SynthData& data, const std::string& csv_path);

}  // namespace autoloss
