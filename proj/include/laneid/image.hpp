#pragma once

#include "laneid/numerics/tensor.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace laneid {

class ImageIoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// 8-bit RGB image, pixels stored interleaved row-major.
class Image {
public:
    Image() = default;
    Image(int width, int height, std::array<std::uint8_t, 3> fill = {0, 0, 0});

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    bool empty() const noexcept { return pixels_.empty(); }

    std::uint8_t channel(int x, int y, int c) const { return pixels_[index(x, y) + c]; }
    std::uint8_t& channel(int x, int y, int c) { return pixels_[index(x, y) + c]; }
    void set(int x, int y, std::array<std::uint8_t, 3> rgb);

    const std::vector<std::uint8_t>& bytes() const noexcept { return pixels_; }
    std::vector<std::uint8_t>& bytes() noexcept { return pixels_; }

    bool operator==(const Image&) const = default;

private:
    std::size_t index(int x, int y) const {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)) * 3;
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> pixels_;
};

/// [3,H,W] tensor with intensities scaled to [0,1].
num::Tensor to_tensor(const Image& img);

/// Binary P6 with maxval 255.
void write_ppm(const std::filesystem::path& path, const Image& img);
Image read_ppm(const std::filesystem::path& path);

} // namespace laneid
