#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "autoloss/tensor.hpp"

namespace autoloss {

// Single-file checkpoint container:
//   magic "ALCK" | u32 version | u64 header length | JSON header | f64 LE data
// The header carries the kind tag, arbitrary metadata and a tensor manifest
// (name, shape, offset into the data section). Float64 payloads round-trip
// bitwise.
struct CheckpointPayload {
    static constexpr std::uint32_t kVersion = 1;

    std::string kind;  // "drs" | "controller" | "train_state"
    nlohmann::json meta;
    std::vector<std::pair<std::string, Tensor>> tensors;

    const Tensor& find(const std::string& name) const;
    bool has(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const CheckpointPayload& payload);
CheckpointPayload load_checkpoint(const std::string& path);

}  // namespace autoloss
