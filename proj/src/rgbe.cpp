#include "hdrssl/rgbe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace hdrssl::rgbe {

std::array<std::uint8_t, 4> encode(float r, float g, float b) {
    const float v = std::max({r, g, b});
    if (!(v >= 1e-32f)) return {0, 0, 0, 0};
    int e = 0;
    const float scale = std::frexp(v, &e) * 256.0f / v;
    return {static_cast<std::uint8_t>(std::max(r, 0.0f) * scale), static_cast<std::uint8_t>(std::max(g, 0.0f) * scale),
            static_cast<std::uint8_t>(std::max(b, 0.0f) * scale), static_cast<std::uint8_t>(e + 128)};
}

std::array<float, 3> decode(const std::array<std::uint8_t, 4>& p) {
    if (p[3] == 0) return {0.0f, 0.0f, 0.0f};
    const float f = std::ldexp(1.0f, static_cast<int>(p[3]) - (128 + 8));
    return {(p[0] + 0.5f) * f, (p[1] + 0.5f) * f, (p[2] + 0.5f) * f};
}

std::array<float, 3> quantize(float r, float g, float b) { return decode(encode(r, g, b)); }

namespace {

void read_rle_scanline(std::istream& in, int width, std::vector<std::uint8_t>& line, const std::string& name) {
    // `line` holds 4 planes of `width` bytes (r..., g..., b..., e...).
    for (int plane = 0; plane < 4; ++plane) {
        int x = 0;
        while (x < width) {
            const int count = in.get();
            if (count == EOF) throw InvalidInput(name + ": truncated RLE data");
            if (count > 128) {
                const int run = count - 128;
                const int value = in.get();
                if (value == EOF || x + run > width) throw InvalidInput(name + ": bad RLE run");
                std::fill_n(&line[static_cast<std::size_t>(plane) * width + x], run, static_cast<std::uint8_t>(value));
                x += run;
            } else {
                if (count == 0 || x + count > width) throw InvalidInput(name + ": bad RLE dump");
                in.read(reinterpret_cast<char*>(&line[static_cast<std::size_t>(plane) * width + x]), count);
                if (!in) throw InvalidInput(name + ": truncated RLE dump");
                x += count;
            }
        }
    }
}

}  // namespace

Tensor read(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    const std::string name = file.string();
    if (!in) throw InvalidInput("cannot open " + name);
    std::string line;
    std::getline(in, line);
    if (line.rfind("#?", 0) != 0) throw InvalidInput(name + ": missing Radiance signature");
    bool format_ok = true;
    while (std::getline(in, line) && !line.empty()) {
        if (line.rfind("FORMAT=", 0) == 0) format_ok = line == "FORMAT=32-bit_rle_rgbe";
    }
    if (!format_ok) throw InvalidInput(name + ": unsupported pixel format");
    std::getline(in, line);
    std::istringstream res(line);
    std::string ya, xa;
    int h = 0, w = 0;
    res >> ya >> h >> xa >> w;
    if (ya != "-Y" || xa != "+X" || h <= 0 || w <= 0) throw InvalidInput(name + ": unsupported resolution line '" + line + "'");

    Tensor img = Tensor::image(3, h, w);
    std::vector<std::uint8_t> scan(static_cast<std::size_t>(4) * w);
    for (int y = 0; y < h; ++y) {
        std::array<std::uint8_t, 4> head{};
        in.read(reinterpret_cast<char*>(head.data()), 4);
        if (!in) throw InvalidInput(name + ": truncated pixel data");
        const bool rle = w >= 8 && w < 32768 && head[0] == 2 && head[1] == 2 && !(head[2] & 0x80) &&
                         ((head[2] << 8) | head[3]) == w;
        if (rle) {
            read_rle_scanline(in, w, scan, name);
            for (int x = 0; x < w; ++x) {
                const auto v = decode({scan[x], scan[w + x], scan[2 * w + x], scan[3 * w + x]});
                for (int c = 0; c < 3; ++c) img.at(c, y, x) = v[c];
            }
        } else {
            // Flat scanline; the four bytes already read are the first pixel.
            for (int x = 0; x < w; ++x) {
                std::array<std::uint8_t, 4> px = head;
                if (x > 0) {
                    in.read(reinterpret_cast<char*>(px.data()), 4);
                    if (!in) throw InvalidInput(name + ": truncated pixel data");
                }
                const auto v = decode(px);
                for (int c = 0; c < 3; ++c) img.at(c, y, x) = v[c];
            }
        }
    }
    return img;
}

namespace {

// Ward-style run-length encoding of one byte plane.
void write_rle_plane(std::ostream& out, const std::uint8_t* data, int n) {
    constexpr int kMinRun = 4;
    int cur = 0;
    while (cur < n) {
        int beg_run = cur, run_count = 0, old_run_count = 0;
        while (run_count < kMinRun && beg_run < n) {
            beg_run += run_count;
            old_run_count = run_count;
            run_count = 1;
            while (beg_run + run_count < n && run_count < 127 && data[beg_run] == data[beg_run + run_count])
                ++run_count;
        }
        if (old_run_count > 1 && old_run_count == beg_run - cur) {
            out.put(static_cast<char>(128 + old_run_count));
            out.put(static_cast<char>(data[cur]));
            cur = beg_run;
        }
        while (cur < beg_run) {
            int nonrun = std::min(beg_run - cur, 128);
            out.put(static_cast<char>(nonrun));
            out.write(reinterpret_cast<const char*>(data + cur), nonrun);
            cur += nonrun;
        }
        if (run_count >= kMinRun) {
            out.put(static_cast<char>(128 + run_count));
            out.put(static_cast<char>(data[beg_run]));
            cur += run_count;
        }
    }
}

}  // namespace

void write(const std::filesystem::path& file, const Tensor& image) {
    if (image.n() != 1 || image.c() != 3) throw InvalidInput("rgbe::write expects a 1x3xHxW image");
    std::ofstream out(file, std::ios::binary);
    if (!out) throw InvalidInput("cannot write " + file.string());
    const int w = image.w();
    out << "#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y " << image.h() << " +X " << w << "\n";
    const bool rle = w >= 8 && w < 32768;
    std::vector<std::uint8_t> planes(static_cast<std::size_t>(4) * w);
    for (int y = 0; y < image.h(); ++y) {
        for (int x = 0; x < w; ++x) {
            const auto p = encode(image.at(0, y, x), image.at(1, y, x), image.at(2, y, x));
            if (!rle) {
                out.write(reinterpret_cast<const char*>(p.data()), 4);
                continue;
            }
            for (int k = 0; k < 4; ++k) planes[static_cast<std::size_t>(k) * w + x] = p[k];
        }
        if (!rle) continue;
        const char head[4] = {2, 2, static_cast<char>(w >> 8), static_cast<char>(w & 0xff)};
        out.write(head, 4);
        for (int k = 0; k < 4; ++k) write_rle_plane(out, &planes[static_cast<std::size_t>(k) * w], w);
    }
    if (!out) throw InvalidInput("short write to " + file.string());
}

}  // namespace hdrssl::rgbe
