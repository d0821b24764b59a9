#pragma once

#include "laneid/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <stdexcept>

namespace laneid::harness {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// File layout: "MOKA", u32 version, u64 header length, JSON header
/// {config, parameters: [{name, shape, offset}], metadata}, then the raw
/// little-endian float64 parameter data. Offsets are in bytes from the start
/// of the data section.
class CheckpointError : public std::runtime_error {
public:
    enum class Kind { Io, BadMagic, Version, Truncated, ShapeMismatch, BadHeader };

    CheckpointError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

struct Checkpoint {
    model::ModelConfig config;
    num::ParameterSet params;
    nlohmann::json metadata = nlohmann::json::object();
};

void save_checkpoint(const std::filesystem::path& path, const num::ParameterSet& params,
                     const model::ModelConfig& config, const nlohmann::json& metadata = nlohmann::json::object());
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace laneid::harness
