#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace autoloss {

enum class TaskKind { binary, multiclass, regression };

struct TaskSpec {
    TaskKind kind = TaskKind::binary;
    std::size_t num_classes = 2;  // used for multiclass

    // Width of the model's prediction vector: 1 for binary/regression,
    // num_classes for multiclass.
    std::size_t pred_dim() const { return kind == TaskKind::multiclass ? num_classes : 1; }
    bool is_classification() const { return kind != TaskKind::regression; }
};

std::string task_to_string(const TaskSpec& task);
TaskSpec task_from_string(const std::string& s);

struct FieldDescriptor {
    enum class Kind { categorical, numeric };

    std::string name;
    Kind kind = Kind::categorical;
    // Categorical: raw value -> index, indices start at 1; index 0 is the
    // reserved out-of-vocabulary slot.
    std::vector<std::string> vocabulary;
    // Numeric: strictly ascending bucket boundaries.
    std::vector<double> boundaries;

    // Number of index values the field can take (categorical counts the OOV
    // slot; numeric has one bucket per interval).
    std::size_t cardinality() const {
        return kind == Kind::categorical ? vocabulary.size() + 1 : boundaries.size() + 1;
    }

    void validate() const;
};

struct FeatureSchema {
    std::vector<FieldDescriptor> fields;
    TaskSpec task;
    std::string label_column = "label";

    std::size_t num_fields() const { return fields.size(); }
    void validate() const;

    nlohmann::json to_json() const;
    static FeatureSchema from_json(const nlohmann::json& j);
    static FeatureSchema load(const std::string& path);
    void save(const std::string& path) const;

    // Stable content hash, recorded in checkpoints to guard transfers.
    std::uint64_t hash() const;
};

// Right-open interval bucketing: (-inf,b0), [b0,b1), ..., [b_last,+inf).
// Returns the index of the interval containing `value`.
std::size_t bucketize(double value, std::span<const double> boundaries);

struct EncodedExample {
    std::vector<std::uint32_t> indices;  // one field-local index per field
    double label = 0.0;                  // class index (classification) or value (regression)
};

// Encodes one raw row (values in schema field order). Unseen categorical
// values map to the OOV index 0.
EncodedExample encode_example(std::span<const std::string> raw_values, double label,
                              const FeatureSchema& schema);

std::uint64_t fnv1a64_string(const std::string& s);

}  // namespace autoloss
