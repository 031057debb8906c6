#include "ragweave/region_ops.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace ragweave::region {

std::optional<CropBox> mask_to_box(const BinaryMask& mask, double pad_fraction) {
    int min_row = mask.height, max_row = -1;
    int min_col = mask.width, max_col = -1;
    for (int r = 0; r < mask.height; ++r) {
        for (int c = 0; c < mask.width; ++c) {
            if (!mask.at(r, c)) continue;
            min_row = std::min(min_row, r);
            max_row = std::max(max_row, r);
            min_col = std::min(min_col, c);
            max_col = std::max(max_col, c);
        }
    }
    if (max_row < 0) return std::nullopt;

    const int box_w = max_col - min_col + 1;
    const int box_h = max_row - min_row + 1;
    const long pad = std::lround(pad_fraction * std::max(box_w, box_h));
    CropBox box;
    box.x0 = static_cast<int>(std::max<long>(0, min_col - pad));
    box.y0 = static_cast<int>(std::max<long>(0, min_row - pad));
    box.x1 = static_cast<int>(std::min<long>(mask.width, max_col + 1 + pad));
    box.y1 = static_cast<int>(std::min<long>(mask.height, max_row + 1 + pad));
    return box;
}

Image decode_image(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) {
        raise(Errc::DecodeFailure, "empty image bytes");
    }
    const cv::Mat raw(1, static_cast<int>(bytes.size()), CV_8UC1,
                      const_cast<std::uint8_t*>(bytes.data()));
    cv::Mat bgr = cv::imdecode(raw, cv::IMREAD_COLOR);
    if (bgr.empty()) {
        raise(Errc::DecodeFailure, "unreadable image bytes");
    }
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    Image image;
    image.width = rgb.cols;
    image.height = rgb.rows;
    image.rgb.resize(static_cast<std::size_t>(rgb.cols) * rgb.rows * 3);
    for (int r = 0; r < rgb.rows; ++r) {
        std::copy_n(rgb.ptr<std::uint8_t>(r), static_cast<std::size_t>(rgb.cols) * 3,
                    image.rgb.data() + static_cast<std::size_t>(r) * rgb.cols * 3);
    }
    return image;
}

ImageBytes encode_png(const Image& image) {
    cv::Mat rgb(image.height, image.width, CV_8UC3,
                const_cast<std::uint8_t*>(image.rgb.data()));
    cv::Mat bgr;
    cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
    std::vector<std::uint8_t> out;
    if (!cv::imencode(".png", bgr, out)) {
        raise(Errc::DecodeFailure, "PNG encoding failed");
    }
    return out;
}

ImageBytes crop_query(std::span<const std::uint8_t> image_bytes, const CropBox& box) {
    Image image = decode_image(image_bytes);
    if (box.x0 < 0 || box.y0 < 0 || box.x0 >= box.x1 || box.y0 >= box.y1 ||
        box.x1 > image.width || box.y1 > image.height) {
        raise(Errc::InvalidBox, "crop box exceeds image bounds");
    }
    Image out;
    out.width = box.width();
    out.height = box.height();
    out.rgb.resize(static_cast<std::size_t>(out.width) * out.height * 3);
    for (int r = 0; r < out.height; ++r) {
        const auto* src =
            image.rgb.data() +
            ((static_cast<std::size_t>(box.y0) + r) * image.width + box.x0) * 3;
        std::copy_n(src, static_cast<std::size_t>(out.width) * 3,
                    out.rgb.data() + static_cast<std::size_t>(r) * out.width * 3);
    }
    return encode_png(out);
}

} // namespace ragweave::region
