#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "autoloss/rng.hpp"
#include "autoloss/schema.hpp"

namespace autoloss {

// Prebuilt per-field vocabulary maps; use for anything beyond a handful of rows.
class SchemaEncoder {
public:
    explicit SchemaEncoder(const FeatureSchema& schema);

    EncodedExample encode(std::span<const std::string> raw_values, double label) const;

private:
    const FeatureSchema& schema_;
    std::vector<std::unordered_map<std::string, std::uint32_t>> vocab_maps_;
};

struct Dataset {
    FeatureSchema schema;
    std::vector<EncodedExample> examples;
};

// Headered CSV; columns are matched to schema fields and the label column by
// name, extra columns are ignored.
Dataset load_csv(const std::string& csv_path, const FeatureSchema& schema);

struct SplitRatios {
    double train = 0.8;
    double validation = 0.1;
    double test = 0.1;
};

struct DatasetSplits {
    std::vector<EncodedExample> train;
    std::vector<EncodedExample> validation;
    std::vector<EncodedExample> test;
    std::uint64_t seed = 0;
};

// Seeded shuffle then floor allocation for validation/test with the remainder
// going to train. Deterministic partition of the input.
DatasetSplits split_dataset(std::vector<EncodedExample> examples, const SplitRatios& ratios,
                            std::uint64_t seed);

// Mini-batch of encoded examples, indices laid out row-major B x m.
struct Batch {
    std::size_t batch_size = 0;
    std::size_t num_fields = 0;
    std::vector<std::uint32_t> indices;
    std::vector<double> labels;

    std::uint32_t index(std::size_t row, std::size_t field) const {
        return indices[row * num_fields + field];
    }
};

// Seeded batch iterator over a split.
//   non-cyclic: one shuffled epoch, last batch may be short, then next()
//               returns nullopt.
//   cyclic:     reshuffles and wraps indefinitely (used for sampling
//               validation batches during the alternating loop).
class BatchIterator {
public:
    BatchIterator(std::span<const EncodedExample> split, std::size_t batch_size,
                  std::uint64_t seed, bool cyclic);

    std::optional<Batch> next();
    void reset();  // restart the epoch sequence from the seed

private:
    void reshuffle();

    std::span<const EncodedExample> split_;
    std::size_t batch_size_;
    std::uint64_t seed_;
    bool cyclic_;
    RngStream rng_;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
};

// Assembles a batch from explicit examples (tests, eval passes).
Batch make_batch(std::span<const EncodedExample> examples);

}  // namespace autoloss
