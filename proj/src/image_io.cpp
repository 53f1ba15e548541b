#include "hdrssl/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace hdrssl {

Tensor read_ldr_tiff(const std::filesystem::path& file) {
    cv::Mat m = cv::imread(file.string(), cv::IMREAD_UNCHANGED);
    if (m.empty()) throw InvalidInput("cannot read LDR frame " + file.string());
    if (m.depth() != CV_8U && m.depth() != CV_16U)
        throw InvalidInput(file.string() + ": only 8/16-bit TIFF frames are supported");
    if (m.channels() != 3 && m.channels() != 4) throw InvalidInput(file.string() + ": expected an RGB image");
    Tensor out = Tensor::image(3, m.rows, m.cols);
    const int ch = m.channels();
    for (int y = 0; y < m.rows; ++y)
        for (int x = 0; x < m.cols; ++x)
            for (int c = 0; c < 3; ++c) {
                // OpenCV stores BGR.
                const int src = 2 - c;
                const double v = m.depth() == CV_8U ? m.ptr<std::uint8_t>(y)[x * ch + src]
                                                    : m.ptr<std::uint16_t>(y)[x * ch + src];
                out.at(c, y, x) = static_cast<float>(v) / (m.depth() == CV_8U ? 255.0f : 65535.0f);
            }
    return out;
}

void write_ldr_tiff(const std::filesystem::path& file, const Tensor& image) {
    if (image.n() != 1 || image.c() != 3) throw InvalidInput("write_ldr_tiff expects a 1x3xHxW image");
    cv::Mat m(image.h(), image.w(), CV_16UC3);
    for (int y = 0; y < image.h(); ++y)
        for (int x = 0; x < image.w(); ++x)
            for (int c = 0; c < 3; ++c)
                m.ptr<std::uint16_t>(y)[x * 3 + (2 - c)] =
                    static_cast<std::uint16_t>(std::lround(std::clamp(image.at(c, y, x), 0.0f, 1.0f) * 65535.0f));
    if (!cv::imwrite(file.string(), m)) throw InvalidInput("cannot write " + file.string());
}

void write_png8(const std::filesystem::path& file, const Tensor& image) {
    if (image.n() != 1 || (image.c() != 1 && image.c() != 3))
        throw InvalidInput("write_png8 expects a 1- or 3-channel image");
    const int ch = image.c();
    cv::Mat m(image.h(), image.w(), ch == 1 ? CV_8UC1 : CV_8UC3);
    for (int y = 0; y < image.h(); ++y)
        for (int x = 0; x < image.w(); ++x)
            for (int c = 0; c < ch; ++c)
                m.ptr<std::uint8_t>(y)[x * ch + (ch == 3 ? 2 - c : 0)] =
                    static_cast<std::uint8_t>(std::lround(std::clamp(image.at(c, y, x), 0.0f, 1.0f) * 255.0f));
    if (!cv::imwrite(file.string(), m)) throw InvalidInput("cannot write " + file.string());
}

}  // namespace hdrssl
