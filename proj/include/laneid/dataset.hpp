#pragma once

#include "laneid/conventions.hpp"
#include "laneid/image.hpp"

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace laneid {

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Manifest {
    std::string profile;
    std::uint64_t seed = 0;
    int count = 0;
    int frames = 0;
    int height = 0;
    int width = 0;
    int generator_version = 0;
    std::vector<std::string> sequences;
};

struct Sequence {
    std::string id;
    std::vector<Image> frames;
    std::vector<LaneLabel> labels;
};

struct Corpus {
    Manifest manifest;
    std::vector<Sequence> sequences;

    std::size_t frame_count() const;
};

Manifest read_manifest(const std::filesystem::path& dir);
/// Loads every sequence listed in the manifest; labels are checked against the lane-ID identity.
Corpus load_corpus(const std::filesystem::path& dir);

} // namespace laneid
