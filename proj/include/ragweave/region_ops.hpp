#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ragweave/error.hpp"

namespace ragweave::region {

struct BinaryMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> bits; // row-major, one byte per pixel, 0 or 1

    static BinaryMask zeros(int height, int width) {
        return BinaryMask{height, width,
                          std::vector<std::uint8_t>(static_cast<std::size_t>(height) * width, 0)};
    }

    bool at(int row, int col) const {
        return bits[static_cast<std::size_t>(row) * width + col] != 0;
    }
    void set(int row, int col, bool value = true) {
        bits[static_cast<std::size_t>(row) * width + col] = value ? 1 : 0;
    }
    std::size_t popcount() const {
        std::size_t n = 0;
        for (auto b : bits) n += (b != 0);
        return n;
    }
};

/// Half-open pixel rectangle [x0,x1) x [y0,y1).
struct CropBox {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    bool operator==(const CropBox&) const = default;
    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
};

/// Tight bounding box of the set pixels, padded by pad_fraction * max(w, h)
/// pixels on every side (rounded), clipped to the mask extent. Returns
/// nullopt for an all-zero mask.
std::optional<CropBox> mask_to_box(const BinaryMask& mask, double pad_fraction);

using ImageBytes = std::vector<std::uint8_t>;

/// Decoded RGB image, 3 bytes per pixel, row-major.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;

    std::uint8_t channel(int row, int col, int c) const {
        return rgb[(static_cast<std::size_t>(row) * width + col) * 3 + c];
    }
};

/// Decodes PNG or JPEG bytes. Throws Error(DecodeFailure) on unreadable input.
Image decode_image(std::span<const std::uint8_t> bytes);

ImageBytes encode_png(const Image& image);

/// Extracts exactly the box extent from the encoded image and re-encodes it
/// as PNG. Throws InvalidBox when the box exceeds the image bounds.
ImageBytes crop_query(std::span<const std::uint8_t> image_bytes, const CropBox& box);

} // namespace ragweave::region
