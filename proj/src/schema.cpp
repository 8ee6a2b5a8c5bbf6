#include "autoloss/schema.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include "autoloss/error.hpp"

namespace autoloss {

std::string task_to_string(const TaskSpec& task) {
    switch (task.kind) {
        case TaskKind::binary:
            return "binary";
        case TaskKind::regression:
            return "regression";
        case TaskKind::multiclass:
            return "multiclass:" + std::to_string(task.num_classes);
    }
    throw ConfigError("task_to_string: unknown task kind");
}

TaskSpec task_from_string(const std::string& s) {
    if (s == "binary") {
        return {TaskKind::binary, 2};
    }
    if (s == "regression") {
        return {TaskKind::regression, 0};
    }
    if (s.rfind("multiclass:", 0) == 0) {
        std::size_t k = 0;
        auto digits = s.substr(11);
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), k);
        if (ec != std::errc{} || k < 2) {
            throw ConfigError("task: multiclass needs a class count >= 2, got '" + s + "'");
        }
        return {TaskKind::multiclass, k};
    }
    throw ConfigError("task: unknown task '" + s + "' (expected binary|multiclass:k|regression)");
}

void FieldDescriptor::validate() const {
    if (name.empty()) {
        throw ConfigError("schema: field with empty name");
    }
    if (kind == Kind::categorical) {
        if (vocabulary.empty()) {
            throw ConfigError("schema: categorical field '" + name + "' has empty vocabulary");
        }
    } else {
        if (boundaries.empty()) {
            throw ConfigError("schema: numeric field '" + name + "' has no boundaries");
        }
        for (std::size_t i = 1; i < boundaries.size(); ++i) {
            if (!(boundaries[i - 1] < boundaries[i])) {
                throw ConfigError("schema: boundaries of field '" + name +
                                  "' must be strictly ascending");
            }
        }
    }
    if (cardinality() < 2) {
        throw ConfigError("schema: field '" + name + "' has cardinality < 2");
    }
}

void FeatureSchema::validate() const {
    if (fields.empty()) {
        throw ConfigError("schema: needs at least one field");
    }
    std::unordered_set<std::string> seen;
    for (const auto& f : fields) {
        f.validate();
        if (!seen.insert(f.name).second) {
            throw ConfigError("schema: duplicate field name '" + f.name + "'");
        }
        if (f.name == label_column) {
            throw ConfigError("schema: field '" + f.name + "' collides with the label column");
        }
    }
    if (task.kind == TaskKind::multiclass && task.num_classes < 2) {
        throw ConfigError("schema: multiclass task needs >= 2 classes");
    }
}

nlohmann::json FeatureSchema::to_json() const {
    nlohmann::json jfields = nlohmann::json::array();
    for (const auto& f : fields) {
        nlohmann::json jf;
        jf["name"] = f.name;
        if (f.kind == FieldDescriptor::Kind::categorical) {
            jf["kind"] = "categorical";
            jf["vocabulary"] = f.vocabulary;
        } else {
            jf["kind"] = "numeric";
            jf["boundaries"] = f.boundaries;
        }
        jfields.push_back(std::move(jf));
    }
    return nlohmann::json{{"version", 1},
                          {"task", task_to_string(task)},
                          {"label_column", label_column},
                          {"fields", std::move(jfields)}};
}

FeatureSchema FeatureSchema::from_json(const nlohmann::json& j) {
    FeatureSchema s;
    try {
        s.task = task_from_string(j.at("task").get<std::string>());
        s.label_column = j.value("label_column", std::string("label"));
        for (const auto& jf : j.at("fields")) {
            FieldDescriptor f;
            f.name = jf.at("name").get<std::string>();
            std::string kind = jf.at("kind").get<std::string>();
            if (kind == "categorical") {
                f.kind = FieldDescriptor::Kind::categorical;
                f.vocabulary = jf.at("vocabulary").get<std::vector<std::string>>();
            } else if (kind == "numeric") {
                f.kind = FieldDescriptor::Kind::numeric;
                f.boundaries = jf.at("boundaries").get<std::vector<double>>();
            } else {
                throw ConfigError("schema: unknown field kind '" + kind + "'");
            }
            s.fields.push_back(std::move(f));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("schema: malformed json: ") + e.what());
    }
    s.validate();
    return s;
}

FeatureSchema FeatureSchema::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw DataError("schema: cannot open '" + path + "'");
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("schema: cannot parse '" + path + "': " + e.what());
    }
    return from_json(j);
}

void FeatureSchema::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) {
        throw DataError("schema: cannot write '" + path + "'");
    }
    out << to_json().dump(2) << '\n';
}

std::uint64_t fnv1a64_string(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t FeatureSchema::hash() const {
    return fnv1a64_string(to_json().dump());
}

std::size_t bucketize(double value, std::span<const double> boundaries) {
    if (boundaries.empty()) {
        throw ConfigError("bucketize: boundaries must be nonempty");
    }
    if (std::isnan(value)) {
        throw DataError("bucketize: NaN value");
    }
    // Count of boundaries <= value == index of the right-open interval.
    return static_cast<std::size_t>(
        std::distance(boundaries.begin(),
                      std::upper_bound(boundaries.begin(), boundaries.end(), value)));
}

EncodedExample encode_example(std::span<const std::string> raw_values, double label,
                              const FeatureSchema& schema) {
    if (raw_values.size() != schema.fields.size()) {
        throw DataError("encode: row has " + std::to_string(raw_values.size()) +
                        " values, schema expects " + std::to_string(schema.fields.size()));
    }
    EncodedExample ex;
    ex.indices.reserve(schema.fields.size());
    for (std::size_t i = 0; i < schema.fields.size(); ++i) {
        const FieldDescriptor& f = schema.fields[i];
        if (f.kind == FieldDescriptor::Kind::categorical) {
            auto it = std::find(f.vocabulary.begin(), f.vocabulary.end(), raw_values[i]);
            if (it == f.vocabulary.end()) {
                ex.indices.push_back(0);  // out-of-vocabulary
            } else {
                ex.indices.push_back(
                    static_cast<std::uint32_t>(std::distance(f.vocabulary.begin(), it)) + 1);
            }
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
    if (schema.task.kind == TaskKind::binary) {
        if (label != 0.0 && label != 1.0) {
            throw DataError("encode: binary label must be 0 or 1, got " + std::to_string(label));
        }
    } else if (schema.task.kind == TaskKind::multiclass) {
        if (label < 0.0 || label >= static_cast<double>(schema.task.num_classes) ||
            label != std::floor(label)) {
            throw DataError("encode: multiclass label out of range: " + std::to_string(label));
        }
    }
    return ex;
}

}  // namespace autoloss
