#include "cryosr/mrc.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

#include "cryosr/errors.hpp"

namespace cryosr {

static_assert(std::endian::native == std::endian::little,
              "MRC I/O assumes a little-endian host");

namespace {

constexpr size_t kHeaderBytes = 1024;
constexpr int32_t kModeFloat32 = 2;

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void put_i32(unsigned char* h, size_t off, int32_t v) {
    std::memcpy(h + off, &v, 4);
}
void put_f32(unsigned char* h, size_t off, float v) {
    std::memcpy(h + off, &v, 4);
}
int32_t get_i32(const unsigned char* h, size_t off) {
    int32_t v;
    std::memcpy(&v, h + off, 4);
    return v;
}
float get_f32(const unsigned char* h, size_t off) {
    float v;
    std::memcpy(&v, h + off, 4);
    return v;
}

}  // namespace

MovieStack read_mrc(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw io_error("cannot open " + path);
    unsigned char header[kHeaderBytes];
    if (std::fread(header, 1, kHeaderBytes, f.get()) != kHeaderBytes)
        throw io_error("short MRC header in " + path);

    if (std::memcmp(header + 208, "MAP ", 4) != 0)
        throw io_error("unsupported MRC file (map stamp missing at offset 208): " + path);
    int32_t mode = get_i32(header, 12);
    if (mode != kModeFloat32)
        throw io_error("unsupported MRC mode " + std::to_string(mode) +
                       " (only mode 2 float32 is supported): " + path);

    int32_t nx = get_i32(header, 0);
    int32_t ny = get_i32(header, 4);
    int32_t nz = get_i32(header, 8);
    if (nx <= 0 || ny <= 0 || nz <= 0)
        throw io_error("invalid MRC dimensions in " + path);
    if (nx % 2 != 0 || ny % 2 != 0)
        throw io_error("odd image dimensions are not supported: " + path);

    float cella_x = get_f32(header, 40);
    double pixel_size = cella_x > 0 ? static_cast<double>(cella_x) / nx : 1.0;

    MovieStack stack;
    stack.frames.reserve(nz);
    std::vector<float> buf(static_cast<size_t>(nx) * ny);
    for (int32_t z = 0; z < nz; ++z) {
        if (std::fread(buf.data(), 4, buf.size(), f.get()) != buf.size())
            throw io_error("truncated MRC data in " + path);
        Image2D img(nx, ny, pixel_size);
        for (size_t i = 0; i < buf.size(); ++i) img.data[i] = buf[i];
        stack.frames.push_back(std::move(img));
    }
    return stack;
}

void write_mrc(const MovieStack& stack, const std::string& path) {
    stack.validate();
    const Image2D& f0 = stack.frames.front();
    if (f0.width % 2 != 0 || f0.height % 2 != 0)
        throw config_error("odd image dimensions are not supported by the MRC writer");

    unsigned char header[kHeaderBytes] = {};
    int32_t nx = f0.width, ny = f0.height, nz = stack.frame_count();
    put_i32(header, 0, nx);
    put_i32(header, 4, ny);
    put_i32(header, 8, nz);
    put_i32(header, 12, kModeFloat32);
    put_i32(header, 28, nx);  // mx
    put_i32(header, 32, ny);  // my
    put_i32(header, 36, nz);  // mz
    float px = static_cast<float>(f0.pixel_size);
    put_f32(header, 40, px * nx);
    put_f32(header, 44, px * ny);
    put_f32(header, 48, px * nz);
    put_i32(header, 64, 1);  // mapc
    put_i32(header, 68, 2);  // mapr
    put_i32(header, 72, 3);  // maps
    std::memcpy(header + 208, "MAP ", 4);
    header[212] = 0x44;  // little-endian machine stamp
    header[213] = 0x44;

    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw io_error("cannot create " + path);
    if (std::fwrite(header, 1, kHeaderBytes, f.get()) != kHeaderBytes)
        throw io_error("failed writing MRC header to " + path);
    std::vector<float> buf(static_cast<size_t>(nx) * ny);
    for (const Image2D& img : stack.frames) {
        for (size_t i = 0; i < buf.size(); ++i)
            buf[i] = static_cast<float>(img.data[i]);
        if (std::fwrite(buf.data(), 4, buf.size(), f.get()) != buf.size())
            throw io_error("failed writing MRC data to " + path);
    }
    if (std::fflush(f.get()) != 0) throw io_error("failed flushing " + path);
}

Image2D read_mrc_image(const std::string& path) {
    MovieStack s = read_mrc(path);
    if (s.frame_count() != 1)
        throw io_error("expected a single-section MRC file: " + path);
    return std::move(s.frames.front());
}

void write_mrc_image(const Image2D& img, const std::string& path) {
    MovieStack s;
    s.frames.push_back(img);
    write_mrc(s, path);
}

}  // namespace cryosr
