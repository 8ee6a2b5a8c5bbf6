#include "autoloss/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "autoloss/error.hpp"

namespace autoloss {

SchemaEncoder::SchemaEncoder(const FeatureSchema& schema) : schema_(schema) {
    vocab_maps_.resize(schema.fields.size());
    for (std::size_t i = 0; i < schema.fields.size(); ++i) {
        const auto& f = schema.fields[i];
        if (f.kind == FieldDescriptor::Kind::categorical) {
            vocab_maps_[i].reserve(f.vocabulary.size());
            for (std::size_t v = 0; v < f.vocabulary.size(); ++v) {
                vocab_maps_[i][f.vocabulary[v]] = static_cast<std::uint32_t>(v) + 1;
            }
        }
    }
}

EncodedExample SchemaEncoder::encode(std::span<const std::string> raw_values,
                                     double label) const {
    if (raw_values.size() != schema_.fields.size()) {
        throw DataError("encode: row has " + std::to_string(raw_values.size()) +
                        " values, schema expects " + std::to_string(schema_.fields.size()));
    }
    EncodedExample ex;
    ex.indices.reserve(schema_.fields.size());
    for (std::size_t i = 0; i < schema_.fields.size(); ++i) {
        const FieldDescriptor& f = schema_.fields[i];
        if (f.kind == FieldDescriptor::Kind::categorical) {
            auto it = vocab_maps_[i].find(raw_values[i]);
            ex.indices.push_back(it == vocab_maps_[i].end() ? 0u : it->second);
        } else {
            double v = 0.0;
            const std::string& s = raw_values[i];
            auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc{} || ptr != s.data() + s.size()) {
                throw DataError("encode: field '" + f.name + "' value '" + s +
                                "' is not numeric");
            }
            ex.indices.push_back(static_cast<std::uint32_t>(bucketize(v, f.boundaries)));
        }
    }
    ex.label = label;
    if (schema_.task.kind == TaskKind::binary) {
        if (label != 0.0 && label != 1.0) {
            throw DataError("encode: binary label must be 0 or 1, got " + std::to_string(label));
        }
    } else if (schema_.task.kind == TaskKind::multiclass) {
        if (label < 0.0 || label >= static_cast<double>(schema_.task.num_classes) ||
            label != std::floor(label)) {
            throw DataError("encode: multiclass label out of range: " + std::to_string(label));
        }
    }
    return ex;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    // Simple comma split; the pipeline's CSV dialect has no quoting. Values
    // containing commas are not supported.
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

}  // namespace

Dataset load_csv(const std::string& csv_path, const FeatureSchema& schema) {
    schema.validate();
    std::ifstream in(csv_path);
    if (!in) {
        throw DataError("load_csv: cannot open '" + csv_path + "'");
    }

    std::string line;
    if (!std::getline(in, line)) {
        throw DataError("load_csv: '" + csv_path + "' is empty (expected a header line)");
    }
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    std::vector<std::string> header = split_csv_line(line);

    std::vector<std::size_t> field_cols(schema.fields.size());
    for (std::size_t i = 0; i < schema.fields.size(); ++i) {
        auto it = std::find(header.begin(), header.end(), schema.fields[i].name);
        if (it == header.end()) {
            throw DataError("load_csv: missing field column '" + schema.fields[i].name + "'");
        }
        field_cols[i] = static_cast<std::size_t>(std::distance(header.begin(), it));
    }
    auto label_it = std::find(header.begin(), header.end(), schema.label_column);
    if (label_it == header.end()) {
        throw DataError("load_csv: missing label column '" + schema.label_column + "'");
    }
    std::size_t label_col = static_cast<std::size_t>(std::distance(header.begin(), label_it));

    SchemaEncoder encoder(schema);
    Dataset ds{schema, {}};
    std::vector<std::string> row_values(schema.fields.size());
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw DataError("load_csv: line " + std::to_string(line_no) + " has " +
                            std::to_string(cells.size()) + " cells, header has " +
                            std::to_string(header.size()));
        }
        for (std::size_t i = 0; i < field_cols.size(); ++i) {
            row_values[i] = cells[field_cols[i]];
        }
        double label = 0.0;
        {
            const std::string& s = cells[label_col];
            auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), label);
            if (ec != std::errc{} || ptr != s.data() + s.size()) {
                throw DataError("load_csv: line " + std::to_string(line_no) +
                                ": label '" + s + "' is not numeric");
            }
        }
        ds.examples.push_back(encoder.encode(row_values, label));
    }
    return ds;
}

DatasetSplits split_dataset(std::vector<EncodedExample> examples, const SplitRatios& ratios,
                            std::uint64_t seed) {
    if (ratios.train <= 0.0 || ratios.validation <= 0.0 || ratios.test <= 0.0) {
        throw ConfigError("split: all ratios must be positive");
    }
    double sum = ratios.train + ratios.validation + ratios.test;
    if (std::abs(sum - 1.0) > 1e-9) {
        throw ConfigError("split: ratios must sum to 1, got " + std::to_string(sum));
    }
    if (examples.size() < 3) {
        throw DataError("split: need at least 3 examples, got " +
                        std::to_string(examples.size()));
    }

    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    RngStream rng(RngStream::derive(seed, "split"));
    rng.shuffle(order);

    const std::size_t n = examples.size();
    std::size_t n_val = static_cast<std::size_t>(std::floor(ratios.validation * n));
    std::size_t n_test = static_cast<std::size_t>(std::floor(ratios.test * n));
    n_val = std::max<std::size_t>(n_val, 1);
    n_test = std::max<std::size_t>(n_test, 1);
    std::size_t n_train = n - n_val - n_test;

    DatasetSplits splits;
    splits.seed = seed;
    splits.train.reserve(n_train);
    splits.validation.reserve(n_val);
    splits.test.reserve(n_test);
    for (std::size_t i = 0; i < n_train; ++i) {
        splits.train.push_back(std::move(examples[order[i]]));
    }
    for (std::size_t i = n_train; i < n_train + n_val; ++i) {
        splits.validation.push_back(std::move(examples[order[i]]));
    }
    for (std::size_t i = n_train + n_val; i < n; ++i) {
        splits.test.push_back(std::move(examples[order[i]]));
    }
    return splits;
}

BatchIterator::BatchIterator(std::span<const EncodedExample> split, std::size_t batch_size,
                             std::uint64_t seed, bool cyclic)
    : split_(split),
      batch_size_(batch_size),
      seed_(seed),
      cyclic_(cyclic),
      rng_(seed) {
    if (batch_size_ == 0) {
        throw ConfigError("batch iterator: batch size must be >= 1");
    }
    if (split_.empty()) {
        throw DataError("batch iterator: empty split");
    }
    order_.resize(split_.size());
    std::iota(order_.begin(), order_.end(), 0);
    reshuffle();
}

void BatchIterator::reshuffle() {
    rng_.shuffle(order_);
    cursor_ = 0;
}

void BatchIterator::reset() {
    rng_ = RngStream(seed_);
    std::iota(order_.begin(), order_.end(), 0);
    reshuffle();
}

std::optional<Batch> BatchIterator::next() {
    if (cursor_ >= order_.size()) {
        if (!cyclic_) {
            return std::nullopt;
        }
        reshuffle();
    }

    const std::size_t m = split_[0].indices.size();
    std::size_t want = batch_size_;
    Batch batch;
    batch.num_fields = m;
    batch.indices.reserve(want * m);
    batch.labels.reserve(want);
    while (want > 0) {
        if (cursor_ >= order_.size()) {
            if (!cyclic_) {
                break;  // short final batch of the epoch
            }
            reshuffle();
        }
        const EncodedExample& ex = split_[order_[cursor_++]];
        batch.indices.insert(batch.indices.end(), ex.indices.begin(), ex.indices.end());
        batch.labels.push_back(ex.label);
        --want;
    }
    batch.batch_size = batch.labels.size();
    return batch;
}

Batch make_batch(std::span<const EncodedExample> examples) {
    if (examples.empty()) {
        throw DataError("make_batch: empty example list");
    }
    Batch batch;
    batch.num_fields = examples[0].indices.size();
    batch.batch_size = examples.size();
    batch.indices.reserve(examples.size() * batch.num_fields);
    for (const auto& ex : examples) {
        batch.indices.insert(batch.indices.end(), ex.indices.begin(), ex.indices.end());
        batch.labels.push_back(ex.label);
    }
    return batch;
}

}  // namespace autoloss
