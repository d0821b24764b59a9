#include "laneid/harness/checkpoint.hpp"

#include "laneid/harness/config.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

namespace laneid::harness {

using nlohmann::json;
using Kind = CheckpointError::Kind;

namespace {

constexpr char kMagic[4] = {'M', 'O', 'K', 'A'};

template <typename T>
void put_le(std::vector<char>& out, T v) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(const char* p) {
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
}

void put_double(std::vector<char>& out, double d) { put_le(out, std::bit_cast<std::uint64_t>(d)); }

} // namespace

void save_checkpoint(const std::filesystem::path& path, const num::ParameterSet& params,
                     const model::ModelConfig& config, const json& metadata) {
    json table = json::array();
    std::uint64_t offset = 0;
    for (const auto& p : params) {
        table.push_back({{"name", p.name}, {"shape", p.value.shape()}, {"offset", offset}});
        offset += p.value.size() * sizeof(double);
    }
    const std::string header = json{{"config", to_json(config)}, {"parameters", table}, {"metadata", metadata}}.dump();

    std::vector<char> bytes(kMagic, kMagic + 4);
    put_le<std::uint32_t>(bytes, kCheckpointVersion);
    put_le<std::uint64_t>(bytes, header.size());
    bytes.insert(bytes.end(), header.begin(), header.end());
    bytes.reserve(bytes.size() + offset);
    for (const auto& p : params)
        for (double v : p.value.data()) put_double(bytes, v);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError(Kind::Io, "cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError(Kind::Io, "write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError(Kind::Io, "cannot open " + path.string());
    const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string where = path.string() + ": ";

    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw CheckpointError(Kind::BadMagic, where + "bad magic, not a MOKA checkpoint");
    }
    if (bytes.size() < 16) throw CheckpointError(Kind::Truncated, where + "truncated data in preamble");
    const auto version = get_le<std::uint32_t>(bytes.data() + 4);
    if (version != kCheckpointVersion) {
        throw CheckpointError(Kind::Version, where + "unsupported checkpoint version " + std::to_string(version) +
                                                 " (this build reads version " +
                                                 std::to_string(kCheckpointVersion) + ")");
    }
    const auto header_len = get_le<std::uint64_t>(bytes.data() + 8);
    if (header_len > bytes.size() - 16) throw CheckpointError(Kind::Truncated, where + "truncated data in header");

    json header;
    try {
        header = json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(header_len));
    } catch (const json::exception& e) {
        throw CheckpointError(Kind::BadHeader, where + "unreadable header: " + e.what());
    }

    Checkpoint ck;
    try {
        ck.config = model_config_from_json(header.at("config"));
        if (header.contains("metadata")) ck.metadata = header.at("metadata");
    } catch (const std::exception& e) {
        throw CheckpointError(Kind::BadHeader, where + "bad config in header: " + e.what());
    }

    const model::Moka net(ck.config);
    const auto& table = header.at("parameters");
    if (table.size() != net.param_names().size()) {
        throw CheckpointError(Kind::ShapeMismatch, where + "checkpoint holds " + std::to_string(table.size()) +
                                                       " parameters, config implies " +
                                                       std::to_string(net.param_names().size()));
    }
    const char* data = bytes.data() + 16 + header_len;
    const std::uint64_t data_len = bytes.size() - 16 - header_len;
    for (std::size_t i = 0; i < table.size(); ++i) {
        const auto name = table[i].at("name").get<std::string>();
        const auto shape = table[i].at("shape").get<num::Shape>();
        const auto offset = table[i].at("offset").get<std::uint64_t>();
        if (name != net.param_names()[i] || shape != net.param_shapes()[i]) {
            throw CheckpointError(Kind::ShapeMismatch,
                                  where + "parameter '" + name + "' " + num::to_string(shape) +
                                      " disagrees with config ('" + net.param_names()[i] + "' " +
                                      num::to_string(net.param_shapes()[i]) + ")");
        }
        const std::uint64_t n = num::element_count(shape);
        if (offset > data_len || n * sizeof(double) > data_len - offset) {
            throw CheckpointError(Kind::Truncated, where + "truncated data for parameter '" + name + "'");
        }
        std::vector<double> values(n);
        for (std::uint64_t k = 0; k < n; ++k) {
            values[k] = std::bit_cast<double>(get_le<std::uint64_t>(data + offset + k * sizeof(double)));
        }
        ck.params.add(name, num::Tensor(shape, std::move(values)));
    }
    return ck;
}

} // namespace laneid::harness
