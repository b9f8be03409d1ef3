#include "fm/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "fm/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");
static_assert(sizeof(float) == 4, "checkpoint I/O assumes 32-bit floats");

namespace fm {

using nlohmann::json;

std::uint32_t crc32(const unsigned char* data, std::size_t len, std::uint32_t state) {
    static const std::array<std::uint32_t, 256> table = [] {
        std::array<std::uint32_t, 256> t{};
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k)
                c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    std::uint32_t c = state ^ 0xFFFFFFFFu;
    for (std::size_t i = 0; i < len; ++i)
        c = table[(c ^ data[i]) & 0xFFu] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

void to_json(json& j, const EncoderConfig& cfg) {
    j = json{{"num_layers", cfg.num_layers},
             {"hidden_size", cfg.hidden_size},
             {"num_heads", cfg.num_heads},
             {"ffn_size", cfg.ffn_size},
             {"vocab_size", cfg.vocab_size},
             {"max_positions", cfg.max_positions},
             {"dropout_p", cfg.dropout_p},
             {"cased", cfg.cased}};
}

void from_json(const json& j, EncoderConfig& cfg) {
    j.at("num_layers").get_to(cfg.num_layers);
    j.at("hidden_size").get_to(cfg.hidden_size);
    j.at("num_heads").get_to(cfg.num_heads);
    j.at("ffn_size").get_to(cfg.ffn_size);
    j.at("vocab_size").get_to(cfg.vocab_size);
    j.at("max_positions").get_to(cfg.max_positions);
    j.at("dropout_p").get_to(cfg.dropout_p);
    j.at("cased").get_to(cfg.cased);
}

void save_checkpoint(const std::string& path, const json& config,
                     const ParamStore<float>& store) {
    json manifest = json::array();
    std::uint64_t offset = 0;
    for (std::size_t i = 0; i < store.size(); ++i) {
        const Parameter<float>& p = store.at(i);
        manifest.push_back(
            {{"name", p.name}, {"shape", p.value.shape()}, {"offset", offset}});
        offset += static_cast<std::uint64_t>(p.value.numel()) * sizeof(float);
    }
    const json header = {{"config", config}, {"tensors", manifest}};

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw DataError("cannot write checkpoint: " + path);
    out << header.dump() << "\n";

    std::uint32_t crc = 0;
    for (std::size_t i = 0; i < store.size(); ++i) {
        const Parameter<float>& p = store.at(i);
        const auto* bytes = reinterpret_cast<const unsigned char*>(p.value.data());
        const std::size_t n = static_cast<std::size_t>(p.value.numel()) * sizeof(float);
        crc = crc32(bytes, n, crc);
        out.write(reinterpret_cast<const char*>(bytes), static_cast<std::streamsize>(n));
    }
    out.write(reinterpret_cast<const char*>(&crc), 4);
    out.flush();
    if (!out)
        throw DataError("failed writing checkpoint: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open checkpoint: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    const std::size_t nl = bytes.find('\n');
    if (nl == std::string::npos)
        throw DataError("malformed checkpoint (no header line): " + path);

    json header;
    try {
        header = json::parse(bytes.substr(0, nl));
    } catch (const json::exception& e) {
        throw DataError("malformed checkpoint header in " + path + ": " + e.what());
    }
    if (!header.contains("config") || !header.contains("tensors") ||
        !header["tensors"].is_array())
        throw DataError("malformed checkpoint header in " + path);

    const std::size_t body = nl + 1;
    if (bytes.size() < body + 4)
        throw DataError("truncated checkpoint: " + path);
    const std::size_t payload_len = bytes.size() - body - 4;
    const auto* payload = reinterpret_cast<const unsigned char*>(bytes.data() + body);

    std::uint32_t stored = 0;
    std::memcpy(&stored, bytes.data() + body + payload_len, 4);
    if (crc32(payload, payload_len) != stored)
        throw DataError("checkpoint checksum mismatch (corrupt or truncated): " + path);

    LoadedCheckpoint out;
    out.config = header["config"];
    std::uint64_t expect_offset = 0;
    for (const json& entry : header["tensors"]) {
        LoadedTensor t;
        try {
            t.spec.name = entry.at("name").get<std::string>();
            t.spec.shape = entry.at("shape").get<std::vector<idx_t>>();
            if (entry.at("offset").get<std::uint64_t>() != expect_offset)
                throw DataError("non-contiguous tensor offsets in " + path);
        } catch (const json::exception& e) {
            throw DataError("malformed tensor manifest in " + path + ": " + e.what());
        }
        const std::uint64_t n = static_cast<std::uint64_t>(t.spec.numel());
        if (expect_offset + n * sizeof(float) > payload_len)
            throw DataError("truncated checkpoint payload: " + path);
        t.data = Tensor<float>(t.spec.shape);
        std::memcpy(t.data.data(), payload + expect_offset, n * sizeof(float));
        expect_offset += n * sizeof(float);
        out.tensors.push_back(std::move(t));
    }
    if (expect_offset != payload_len)
        throw DataError("checkpoint payload size mismatch: " + path);
    return out;
}

ParamStore<float> LoadedCheckpoint::to_store() const {
    ParamStore<float> store;
    for (const LoadedTensor& t : tensors)
        store.add(t.spec.name, t.data);
    return store;
}

namespace {
std::string shape_str(const std::vector<idx_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i)
        s += (i ? "," : "") + std::to_string(shape[i]);
    return s + "]";
}
} // namespace

void verify_manifest(const LoadedCheckpoint& ckpt, const std::vector<TensorSpec>& expected) {
    if (ckpt.tensors.size() != expected.size())
        throw DataError("checkpoint has " + std::to_string(ckpt.tensors.size()) +
                        " tensors, expected " + std::to_string(expected.size()));
    for (std::size_t i = 0; i < expected.size(); ++i) {
        const TensorSpec& got = ckpt.tensors[i].spec;
        const TensorSpec& want = expected[i];
        if (got.name != want.name)
            throw DataError("checkpoint tensor " + std::to_string(i) + " is '" + got.name +
                            "', expected '" + want.name + "'");
        if (got.shape != want.shape)
            throw DataError("checkpoint tensor '" + got.name + "' has shape " +
                            shape_str(got.shape) + ", expected " + shape_str(want.shape));
    }
}

} // namespace fm
