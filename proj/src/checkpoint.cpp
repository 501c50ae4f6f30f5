#include "ssr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ssr::nn {

namespace {

constexpr char kMagic[8] = {'S', 'S', 'R', 'C', 'K', 'P', 'T', '1'};

void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("truncated checkpoint");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

}  // namespace

nlohmann::json to_json(const ArchConfig& cfg) {
    return {{"sensor_dim", cfg.sensor_dim},
            {"meas_dim", cfg.meas_dim},
            {"d", cfg.d},
            {"mlp_hidden", cfg.mlp_hidden},
            {"mlp_layers", cfg.mlp_layers}};
}

ArchConfig arch_from_json(const nlohmann::json& j) {
    return {j.at("sensor_dim").get<std::size_t>(), j.at("meas_dim").get<std::size_t>(), j.at("d").get<std::size_t>(),
            j.at("mlp_hidden").get<std::size_t>(), j.at("mlp_layers").get<std::size_t>()};
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& s : ckpt.params.specs) tensors.push_back({s.name, s.rows, s.cols, s.offset});
    nlohmann::json header = {{"arch", to_json(ckpt.params.cfg)},
                             {"dtype", "f32"},
                             {"tensors", tensors},
                             {"manifest_hash", ckpt.manifest_hash},
                             {"meta", ckpt.meta}};
    auto text = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
    out.write(kMagic, sizeof kMagic);
    put_u64(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (float v : ckpt.params.values) {
        auto bits = std::bit_cast<std::uint32_t>(v);
        unsigned char b[4];
        for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
        out.write(reinterpret_cast<const char*>(b), 4);
    }
    if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error(path.string() + " is not a checkpoint");
    auto len = get_u64(in);
    std::string text(len, '\0');
    if (!in.read(text.data(), static_cast<std::streamsize>(len))) throw std::runtime_error("truncated checkpoint");
    auto header = nlohmann::json::parse(text);
    if (header.at("dtype") != "f32") throw std::runtime_error("unsupported checkpoint dtype");

    Checkpoint ckpt;
    ckpt.params = ModelParams<float>(arch_from_json(header.at("arch")));
    const auto& tensors = header.at("tensors");
    if (tensors.size() != ckpt.params.specs.size()) throw std::runtime_error("checkpoint tensor list mismatch");
    for (std::size_t k = 0; k < tensors.size(); ++k) {
        const auto& s = ckpt.params.specs[k];
        if (tensors[k].at(0) != s.name || tensors[k].at(1) != s.rows || tensors[k].at(2) != s.cols ||
            tensors[k].at(3) != s.offset)
            throw std::runtime_error("checkpoint tensor '" + s.name + "' has unexpected shape");
    }
    std::vector<unsigned char> raw(ckpt.params.values.size() * 4);
    if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size())))
        throw std::runtime_error("truncated checkpoint payload");
    for (std::size_t i = 0; i < ckpt.params.values.size(); ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(raw[4 * i + b]) << (8 * b);
        ckpt.params.values[i] = std::bit_cast<float>(bits);
    }
    ckpt.manifest_hash = header.at("manifest_hash").get<std::string>();
    ckpt.meta = header.at("meta");
    return ckpt;
}

}  // namespace ssr::nn
