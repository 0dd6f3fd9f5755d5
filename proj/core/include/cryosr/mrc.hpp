#pragma once

#include <string>

#include "cryosr/image.hpp"

namespace cryosr {

// MRC2014 subset: mode 2 (32-bit little-endian float), 1024-byte header,
// "MAP " stamp. Pixel size is cella.x / nx. write + read round trips are
// bit exact for float32 payloads.
MovieStack read_mrc(const std::string& path);
void write_mrc(const MovieStack& stack, const std::string& path);

// Single-image convenience wrappers (nz = 1).
Image2D read_mrc_image(const std::string& path);
void write_mrc_image(const Image2D& img, const std::string& path);

}  // namespace cryosr
