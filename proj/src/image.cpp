#include "laneid/image.hpp"

#include <cctype>
#include <fstream>
#include <string>

namespace laneid {

Image::Image(int width, int height, std::array<std::uint8_t, 3> fill) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) {
        throw std::invalid_argument("image dimensions must be positive, got " + std::to_string(width) + "x" +
                                    std::to_string(height));
    }
    pixels_.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3);
    for (std::size_t i = 0; i < pixels_.size(); i += 3) {
        pixels_[i] = fill[0];
        pixels_[i + 1] = fill[1];
        pixels_[i + 2] = fill[2];
    }
}

void Image::set(int x, int y, std::array<std::uint8_t, 3> rgb) {
    const auto i = index(x, y);
    pixels_[i] = rgb[0];
    pixels_[i + 1] = rgb[1];
    pixels_[i + 2] = rgb[2];
}

num::Tensor to_tensor(const Image& img) {
    const auto h = static_cast<std::size_t>(img.height());
    const auto w = static_cast<std::size_t>(img.width());
    num::Tensor t({3, h, w});
    const auto& px = img.bytes();
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < 3; ++c) t.at(c, y, x) = px[(y * w + x) * 3 + c] / 255.0;
    return t;
}

void write_ppm(const std::filesystem::path& path, const Image& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ImageIoError("cannot open " + path.string() + " for writing");
    out << "P6\n" << img.width() << ' ' << img.height() << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.bytes().data()), static_cast<std::streamsize>(img.bytes().size()));
    if (!out) throw ImageIoError("write failed for " + path.string());
}

namespace {

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in) {
    std::string token;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {}
            continue;
        }
        if (std::isspace(ch)) {
            if (!token.empty()) break;
            continue;
        }
        token.push_back(static_cast<char>(ch));
    }
    return token;
}

int parse_positive(const std::string& token, const std::filesystem::path& path, const char* field) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(token, &used);
        if (used == token.size() && v > 0) return v;
    } catch (const std::exception&) {
    }
    throw ImageIoError(path.string() + ": bad PPM " + field + " '" + token + "'");
}

} // namespace

Image read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ImageIoError("cannot open " + path.string());
    if (next_token(in) != "P6") throw ImageIoError(path.string() + ": not a binary P6 PPM");
    const int w = parse_positive(next_token(in), path, "width");
    const int h = parse_positive(next_token(in), path, "height");
    const int maxval = parse_positive(next_token(in), path, "maxval");
    if (maxval != 255) throw ImageIoError(path.string() + ": only maxval 255 is supported, got " + std::to_string(maxval));
    Image img(w, h);
    in.read(reinterpret_cast<char*>(img.bytes().data()), static_cast<std::streamsize>(img.bytes().size()));
    if (in.gcount() != static_cast<std::streamsize>(img.bytes().size())) {
        throw ImageIoError(path.string() + ": truncated pixel data");
    }
    return img;
}

} // namespace laneid
