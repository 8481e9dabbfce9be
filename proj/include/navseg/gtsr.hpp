#pragma once

#include <string>

#include "navseg/tensor.hpp"

namespace navseg {

// Binary tensor file: magic "GTSR", u32 LE ndim, ndim u32 LE dims, then the
// payload as f32 LE. Values are down-converted to f32 on write and
// up-converted on read.
void write_gtsr(const std::string& path, const Tensor& t);
Tensor read_gtsr(const std::string& path);

}  // namespace navseg
