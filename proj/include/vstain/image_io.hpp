#ifndef VSTAIN_IMAGE_IO_HPP
#define VSTAIN_IMAGE_IO_HPP

#include <string>

#include "vstain/tensor.hpp"

namespace vstain::io {

// Reads a PNG/JPG into an [H,W,3] tensor in [-1,1] (RGB order). When
// target_size > 0 the image is bilinearly resized to target_size square.
// Throws std::runtime_error on unreadable files.
Tensor read_image(const std::string& path, int target_size = 0);

// Writes an [H,W,3] tensor in [-1,1] as an 8-bit PNG (values clamped).
void write_image(const std::string& path, const Tensor& img);

}  // namespace vstain::io

#endif
