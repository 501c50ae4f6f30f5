#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "ssr/nn.hpp"

namespace ssr::nn {

/// Binary checkpoint container:
///   8 bytes  magic "SSRCKPT1"
///   8 bytes  little-endian header length L
///   L bytes  JSON header {arch, tensors[name, rows, cols, offset], dtype, meta}
///   payload  float32 little-endian weights, row-major, in tensor order
struct Checkpoint {
    ModelParams<float> params;
    std::string manifest_hash;
    nlohmann::json meta = nlohmann::json::object();  ///< loss type, filter, best epoch, ...
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

nlohmann::json to_json(const ArchConfig& cfg);
ArchConfig arch_from_json(const nlohmann::json& j);

}  // namespace ssr::nn
