#include "autoloss/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "autoloss/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

namespace autoloss {

namespace {

constexpr char kMagic[4] = {'A', 'L', 'C', 'K'};

template <typename T>
void write_pod(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

}  // namespace

const Tensor& CheckpointPayload::find(const std::string& name) const {
    for (const auto& [n, t] : tensors) {
        if (n == name) return t;
    }
    throw DataError("checkpoint: missing tensor '" + name + "'");
}

bool CheckpointPayload::has(const std::string& name) const {
    for (const auto& [n, t] : tensors) {
        if (n == name) return true;
    }
    return false;
}

void save_checkpoint(const std::string& path, const CheckpointPayload& payload) {
    nlohmann::json manifest = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, tensor] : payload.tensors) {
        manifest.push_back({{"name", name},
                            {"shape", tensor.shape()},
                            {"offset", offset},
                            {"count", tensor.size()}});
        offset += tensor.size();
    }
    nlohmann::json header{{"version", CheckpointPayload::kVersion},
                          {"kind", payload.kind},
                          {"meta", payload.meta},
                          {"tensors", std::move(manifest)}};
    const std::string header_str = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("checkpoint: cannot write '" + path + "'");
    }
    out.write(kMagic, sizeof(kMagic));
    write_pod<std::uint32_t>(out, CheckpointPayload::kVersion);
    write_pod<std::uint64_t>(out, header_str.size());
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    for (const auto& [name, tensor] : payload.tensors) {
        out.write(reinterpret_cast<const char*>(tensor.data()),
                  static_cast<std::streamsize>(tensor.size() * sizeof(double)));
    }
    if (!out) {
        throw DataError("checkpoint: write failed for '" + path + "'");
    }
}

CheckpointPayload load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("checkpoint: cannot open '" + path + "'");
    }
    char magic[4] = {};
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw DataError("checkpoint: '" + path + "' is not a checkpoint file");
    }
    const auto version = read_pod<std::uint32_t>(in);
    if (version != CheckpointPayload::kVersion) {
        throw DataError("checkpoint: unsupported version " + std::to_string(version));
    }
    const auto header_len = read_pod<std::uint64_t>(in);
    std::string header_str(header_len, '\0');
    in.read(header_str.data(), static_cast<std::streamsize>(header_len));
    if (!in) {
        throw DataError("checkpoint: truncated header in '" + path + "'");
    }

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_str);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("checkpoint: malformed header: " + std::string(e.what()));
    }

    CheckpointPayload payload;
    payload.kind = header.at("kind").get<std::string>();
    payload.meta = header.value("meta", nlohmann::json::object());
    for (const auto& entry : header.at("tensors")) {
        auto shape = entry.at("shape").get<std::vector<std::size_t>>();
        auto count = entry.at("count").get<std::size_t>();
        Tensor t(std::move(shape));
        if (t.size() != count) {
            throw DataError("checkpoint: manifest count mismatch for tensor '" +
                            entry.at("name").get<std::string>() + "'");
        }
        in.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(count * sizeof(double)));
        if (!in) {
            throw DataError("checkpoint: truncated tensor data in '" + path + "'");
        }
        payload.tensors.emplace_back(entry.at("name").get<std::string>(), std::move(t));
    }
    return payload;
}

}  // namespace autoloss
